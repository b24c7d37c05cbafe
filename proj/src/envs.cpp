#include "gsim/envs.hpp"

#include "gsim/errors.hpp"
#include "gsim/parallel.hpp"
#include "gsim/samplers.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

namespace gsim::envs {

std::string_view to_string(EnvKind kind) noexcept {
    switch (kind) {
    case EnvKind::Sir: return "sir";
    case EnvKind::Supply: return "supply";
    case EnvKind::Hospital: return "hospital";
    }
    return "";
}

std::size_t EnvSpec::param_index(std::string_view param) const {
    for (std::size_t i = 0; i < param_names.size(); ++i) {
        if (param_names[i] == param) return i;
    }
    throw ConfigError("env '" + name + "' has no parameter '" + std::string(param) + "'");
}

void EnvSpec::set_param(std::string_view param, double value) { params[param_index(param)] = value; }

namespace {

ProjectionSpec sir_projection() { return {{{"S", ScalarField{"S"}}, {"I", ScalarField{"I"}}, {"R", ScalarField{"R"}}}}; }

ProjectionSpec supply_projection() {
    return {{{"inventory", ScalarField{"inventory"}},
             {"backlog", ScalarField{"backlog"}},
             {"pipeline", ListTotal{"pipeline"}}}};
}

ProjectionSpec hospital_projection() {
    return {{{"icu_occupancy", ScalarField{"icu_occupancy"}},
             {"standard_occupancy", ScalarField{"standard_occupancy"}},
             {"alive", RecordCount{"patients", "is_alive", true}}}};
}

EnvSpec hospital_spec(std::string name, double scale, double icu_beds, double standard_beds, std::size_t horizon) {
    EnvSpec s;
    s.name = std::move(name);
    s.kind = EnvKind::Hospital;
    s.param_names = {"arrival_rate_0", "arrival_rate_1", "arrival_rate_2", "los_mean_0",  "los_mean_1",
                     "los_mean_2",     "base_prob_0",    "base_prob_1",    "base_prob_2", "day_factor_0",
                     "day_factor_1",   "day_factor_2",   "icu_capacity",   "standard_capacity"};
    s.params = {1.0 * scale, 2.0 * scale, 1.5 * scale, 5.0,   6.0,         4.0,         0.01,
                0.005,       0.008,       0.002,       0.001, 0.0015,      icu_beds,    standard_beds};
    s.lower = {0, 0, 0, 1, 1, 1, 0, 0, 0, 0, 0, 0, 1 * scale, 1 * scale};
    s.upper = {5 * scale, 5 * scale, 5 * scale, 10, 10, 10, 0.05, 0.05, 0.05, 0.01, 0.01, 0.01, 20 * scale, 60 * scale};
    s.horizon = horizon;
    s.projection = hospital_projection();
    return s;
}

std::shared_ptr<const RecordSchema> patient_schema() {
    static const auto schema = std::make_shared<const RecordSchema>(RecordSchema{{{"disease_id", AttrKind::Int},
                                                                                  {"bed_type", AttrKind::Symbol},
                                                                                  {"los_remaining", AttrKind::Int},
                                                                                  {"is_alive", AttrKind::Bool},
                                                                                  {"day_in_hospital", AttrKind::Int}}});
    return schema;
}

std::int64_t& int_field(SystemState& s, std::string_view name) {
    auto& v = s.at(name);
    auto* p = std::get_if<std::int64_t>(&v);
    if (p == nullptr) throw SchemaError("field '" + std::string(name) + "' is not an int");
    return *p;
}

void free_bed(std::int64_t& icu, std::int64_t& standard, const AttrValue& bed) {
    const auto& b = std::get<std::string>(bed);
    std::int64_t& occ = b == "ICU" ? icu : standard;
    if (b != "ICU" && b != "Standard") return;
    if (occ > 0) --occ;
}

std::string num(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

std::string params_block(const EnvSpec& s) {
    std::string out = "  params {\n";
    for (std::size_t i = 0; i < s.param_names.size(); ++i) {
        out += "    " + s.param_names[i] + " = " + num(s.params[i]) + " in [" + num(s.lower[i]) + ", " +
               num(s.upper[i]) + "];\n";
    }
    return out + "  }\n";
}

} // namespace

EnvSpec preset(std::string_view name) {
    if (name == "sir") {
        EnvSpec s;
        s.name = "sir";
        s.kind = EnvKind::Sir;
        s.param_names = {"beta", "gamma"};
        s.params = {0.5, 0.1};
        s.lower = {0.0, 0.0};
        s.upper = {2.0, 1.0};
        s.horizon = 60;
        s.projection = sir_projection();
        return s;
    }
    if (name == "supply") {
        EnvSpec s;
        s.name = "supply";
        s.kind = EnvKind::Supply;
        s.param_names = {"demand_lambda", "holding_cost", "backlog_cost", "lead_time"};
        s.params = {5.0, 1.0, 2.0, 2.0};
        s.lower = {0.0, 0.0, 0.0, 0.0};
        s.upper = {20.0, 5.0, 10.0, 8.0};
        s.horizon = 60;
        s.projection = supply_projection();
        return s;
    }
    if (name == "hospital") return hospital_spec("hospital", 1.0, 5.0, 20.0, 60);
    if (name == "hospital-large") {
        // arrivals scaled 100x against roughly 1000 beds, so demand outgrows capacity
        return hospital_spec("hospital-large", 100.0, 250.0, 750.0, 120);
    }
    throw ConfigError("unknown environment '" + std::string(name) + "' (expected sir, supply, hospital, hospital-large)");
}

std::vector<std::string> preset_names() { return {"sir", "supply", "hospital", "hospital-large"}; }

// ---------------------------------------------------------------------------

SystemState sir_step(std::span<const double> p, const SystemState& state, const StepContext& ctx) {
    SystemState next = state;
    auto& S = int_field(next, "S");
    auto& I = int_field(next, "I");
    auto& R = int_field(next, "R");
    const auto s0 = static_cast<double>(S), i0 = static_cast<double>(I), r0 = static_cast<double>(R);
    if (S + I + R <= 0) return next;
    const double beta = p[0], gamma = p[1];
    // same operation order as the DSL twin so the draws agree bit for bit
    const double n = dsl::sanitize(dsl::sanitize(s0 + i0) + r0);
    const double prob = dsl::clip(dsl::sanitize(1.0 - std::exp(dsl::safe_div(dsl::sanitize(-beta * i0), n))), 0.0, 1.0);
    RngStream infect = ctx.rule_stream(0);
    RngStream recover = ctx.rule_stream(1);
    const std::int64_t new_inf = std::min(sampling::binomial(infect, s0, prob), S);
    const std::int64_t new_rec_raw = sampling::binomial(recover, i0, gamma);
    S -= new_inf;
    I += new_inf;
    const std::int64_t new_rec = std::min(new_rec_raw, I);
    I -= new_rec;
    R += new_rec;
    return next;
}

SystemState supply_step(std::span<const double> p, const SystemState& state, const Action& action,
                        const StepContext& ctx) {
    SystemState next = state;
    auto& inv = int_field(next, "inventory");
    auto& back = int_field(next, "backlog");
    auto* pipe = std::get_if<Pipeline>(&next.at("pipeline"));
    if (pipe == nullptr) throw SchemaError("field 'pipeline' is not a pipeline");

    // 1) pipeline
    std::int64_t delivered = 0;
    Pipeline kept;
    for (QuantityTimer e : *pipe) {
        e.timer -= 1;
        if (e.timer <= 0) delivered += e.quantity;
        else kept.push_back(e);
    }
    *pipe = std::move(kept);
    if (const auto cap = field_cap(ctx.overrides, "inventory")) {
        delivered = std::min(delivered, std::max<std::int64_t>(0, *cap - inv));
    }
    inv += delivered;

    // 2) backlog first, then today's demand
    RngStream demand_rng = ctx.rule_stream(1);
    const std::int64_t demand = sampling::poisson(demand_rng, p[0]);
    const std::int64_t fill_back = std::min(inv, back);
    inv -= fill_back;
    back -= fill_back;
    const std::int64_t fill = std::min(inv, demand);
    inv -= fill;
    back += demand - fill;

    // 3) order
    if (!action) throw StepError("unbound action", 2);
    const std::int64_t q = sampling::to_count(static_cast<double>(*action));
    const std::int64_t lead = std::max<std::int64_t>(0, sampling::truncate(p[3]));
    if (q > 0) pipe->push_back({q, lead});

    int_field(next, "t") += 1;
    return next;
}

SystemState hospital_step(std::span<const double> p, const SystemState& state, const StepContext& ctx) {
    SystemState next = state;
    auto& icu = int_field(next, "icu_occupancy");
    auto& standard = int_field(next, "standard_occupancy");
    auto* list = std::get_if<RecordList>(&next.at("patients"));
    if (list == nullptr) throw SchemaError("field 'patients' is not a record list");
    constexpr std::size_t kDisease = 0, kBed = 1, kLos = 2, kDay = 4;

    // 1) mortality
    {
        RngStream rng = ctx.rule_stream(0);
        std::vector<bool> keep(list->size(), true);
        for (std::size_t i = 0; i < list->size(); ++i) {
            const auto row = std::as_const(*list).row(i);
            const auto d = static_cast<std::size_t>(std::get<std::int64_t>(row[kDisease]));
            const auto day = static_cast<double>(std::get<std::int64_t>(row[kDay]));
            const double pd = dsl::clip(dsl::sanitize(p[6 + d] + dsl::sanitize(p[9 + d] * day)), 0.0, 1.0);
            if (rng.uniform01() < pd) {
                keep[i] = false;
                free_bed(icu, standard, row[kBed]);
            }
        }
        list->retain(keep);
    }
    // 2) length of stay
    {
        std::vector<bool> keep(list->size(), true);
        for (std::size_t i = 0; i < list->size(); ++i) {
            auto row = list->row(i);
            auto& los = std::get<std::int64_t>(row[kLos]);
            los -= 1;
            std::get<std::int64_t>(row[kDay]) += 1;
            if (los <= 0) {
                los = 0;
                keep[i] = false;
                free_bed(icu, standard, row[kBed]);
            }
        }
        list->retain(keep);
    }
    // 3) arrivals and bed allocation
    const std::int64_t icu_cap = sampling::truncate(p[12]);
    const std::int64_t std_cap = sampling::truncate(p[13]);
    auto& overflow = int_field(next, "overflow");
    for (std::uint32_t d = 0; d < 3; ++d) {
        RngStream rng = ctx.rule_stream(2 + d);
        const std::int64_t n = sampling::poisson(rng, p[d]);
        for (std::int64_t a = 0; a < n; ++a) {
            const std::int64_t los = sampling::normal_count(rng, p[3 + d], 1.0, 1);
            const bool icu_first = d < 2;
            std::string bed;
            for (int attempt = 0; attempt < 2 && bed.empty(); ++attempt) {
                const bool try_icu = (attempt == 0) == icu_first;
                if (try_icu && icu < icu_cap) {
                    ++icu;
                    bed = "ICU";
                } else if (!try_icu && standard < std_cap) {
                    ++standard;
                    bed = "Standard";
                }
            }
            if (bed.empty()) {
                ++overflow;
                continue;
            }
            list->push_back({std::int64_t{d}, std::move(bed), los, true, std::int64_t{1}});
        }
    }
    int_field(next, "day") += 1;
    return next;
}

StepFn reference_step(const EnvSpec& spec) { return reference_step(spec, spec.params); }

StepFn reference_step(const EnvSpec& spec, std::vector<double> params) {
    if (params.size() != spec.param_names.size()) throw SizeError("parameter count does not match env '" + spec.name + "'");
    return [kind = spec.kind, names = spec.param_names, params = std::move(params)](
               const SystemState& s, const Action& a, const StepContext& ctx) {
        std::vector<double> p = params;
        apply_overrides(names, p, ctx.overrides, ctx.t);
        switch (kind) {
        case EnvKind::Sir: return sir_step(p, s, ctx);
        case EnvKind::Supply: return supply_step(p, s, a, ctx);
        case EnvKind::Hospital: return hospital_step(p, s, ctx);
        }
        return s;
    };
}

Simulator reference_simulator(const EnvSpec& spec) { return {reference_step(spec), {}}; }

SystemState initial_state(const EnvSpec& spec, RngStream& rng) {
    SystemState s;
    switch (spec.kind) {
    case EnvKind::Sir:
        s.set("S", rng.uniform_int(900, 1000));
        s.set("I", rng.uniform_int(1, 20));
        s.set("R", std::int64_t{0});
        break;
    case EnvKind::Supply:
        s.set("inventory", std::int64_t{20});
        s.set("pipeline", Pipeline{});
        s.set("backlog", std::int64_t{0});
        s.set("t", std::int64_t{0});
        break;
    case EnvKind::Hospital:
        s.set("day", std::int64_t{0});
        s.set("icu_occupancy", std::int64_t{0});
        s.set("standard_occupancy", std::int64_t{0});
        s.set("patients", RecordList(patient_schema()));
        s.set("overflow", std::int64_t{0});
        break;
    }
    return s;
}

// ---------------------------------------------------------------------------

std::string gt_config_text(const EnvSpec& spec) {
    std::string t = "config " + std::string(to_string(spec.kind)) + "_gt {\n";
    switch (spec.kind) {
    case EnvKind::Sir:
        t += "  description \"Discrete-time stochastic SIR with binomial transitions\";\n";
        t += params_block(spec);
        t += "  state {\n    S : int = 990;\n    I : int = 10;\n    R : int = 0;\n  }\n";
        t += "  rules {\n"
             "    CompartmentFlow(from = S, to = I, count = Binomial(n = S, p = clip(1 - exp(-beta * I / (S + I + R)), 0, 1)));\n"
             "    CompartmentFlow(from = I, to = R, count = Binomial(n = I, p = gamma));\n"
             "  }\n";
        break;
    case EnvKind::Supply:
        t += "  description \"Single-stage retailer with Poisson demand and a shipment pipeline\";\n";
        t += "  action int;\n";
        t += params_block(spec);
        t += "  state {\n    inventory : int = 20;\n    pipeline : pipeline = [];\n    backlog : int = 0;\n    t : int = 0;\n  }\n";
        t += "  rules {\n"
             "    PipelineAdvance(pipeline = pipeline, deliver_to = inventory);\n"
             "    QueueService(inventory = inventory, backlog = backlog, demand = Poisson(rate = demand_lambda));\n"
             "    PipelineAppend(pipeline = pipeline, quantity = action, delay = lead_time);\n"
             "    Assign(field = t, expr = t + 1);\n"
             "  }\n";
        break;
    case EnvKind::Hospital: {
        t += "  description \"Hospital wards with ICU and standard beds, three diseases\";\n";
        t += params_block(spec);
        t += "  state {\n    day : int = 0;\n    icu_occupancy : int = 0;\n    standard_occupancy : int = 0;\n"
             "    patients : records(disease_id: int, bed_type: symbol, los_remaining: int, is_alive: bool, "
             "day_in_hospital: int) = [];\n    overflow : int = 0;\n  }\n";
        // exact 0/1 selectors on disease_id in {0, 1, 2}
        const std::string l0 = "((disease_id - 1) * (disease_id - 2) / 2)";
        const std::string l1 = "(disease_id * (2 - disease_id))";
        const std::string l2 = "(disease_id * (disease_id - 1) / 2)";
        const auto hazard = [](int d) {
            return "(base_prob_" + std::to_string(d) + " + day_factor_" + std::to_string(d) + " * day_in_hospital)";
        };
        const std::string occ = "occupancy = {ICU: icu_occupancy, Standard: standard_occupancy}";
        t += "  rules {\n";
        t += "    RecordHazard(records = patients, prob = clip(" + l0 + " * " + hazard(0) + " + " + l1 + " * " +
             hazard(1) + " + " + l2 + " * " + hazard(2) + ", 0, 1), bed = bed_type, " + occ + ");\n";
        t += "    RecordCountdown(records = patients, timer = los_remaining, age = day_in_hospital, bed = bed_type, " +
             occ + ");\n";
        for (int d = 0; d < 3; ++d) {
            const std::string icu = "(ICU, icu_occupancy, icu_capacity)";
            const std::string standard = "(Standard, standard_occupancy, standard_capacity)";
            const std::string gate = d < 2 ? icu + ", " + standard : standard + ", " + icu;
            const std::string ds = std::to_string(d);
            t += "    RecordSpawn(records = patients, count = Poisson(rate = arrival_rate_" + ds +
                 "), attrs = {disease_id: " + ds + ", los_remaining: Normal(mean = los_mean_" + ds +
                 ", stdev = 1, floor = 1), is_alive: 1, day_in_hospital: 1}, gate = [" + gate +
                 "], bed = bed_type, overflow = overflow);\n";
        }
        t += "    Assign(field = day, expr = day + 1);\n  }\n";
        break;
    }
    }
    return t + "}\n";
}

dsl::StructuralConfig gt_config(const EnvSpec& spec) { return dsl::parse_config(gt_config_text(spec)); }

dsl::StructuralConfig gt_config(std::string_view preset_name) { return gt_config(preset(preset_name)); }

// ---------------------------------------------------------------------------

Overrides to_overrides(const EnvSpec& spec, std::span<const Intervention> interventions) {
    Overrides out;
    for (const auto& iv : interventions) {
        std::visit(
            [&](const auto& x) {
                using I = std::decay_t<decltype(x)>;
                if constexpr (std::is_same_v<I, LockdownWindow>) {
                    if (spec.kind != EnvKind::Sir) throw ConfigError("lockdown windows apply to the SIR env");
                    if (x.t_start > x.t_end || x.t_start < 0) throw ConfigError("lockdown window has t_start > t_end");
                    if (!(x.alpha >= 0.0 && x.alpha <= 1.0)) throw ConfigError("lockdown alpha must lie in [0, 1]");
                    out.params.push_back({"beta", OverrideOp::Scale, x.alpha, x.t_start, x.t_end});
                } else if constexpr (std::is_same_v<I, LeadTimeOverride>) {
                    if (spec.kind != EnvKind::Supply) throw ConfigError("lead-time overrides apply to the supply env");
                    if (x.lead < 1) throw ConfigError("lead time must be >= 1");
                    out.params.push_back({"lead_time", OverrideOp::Set, static_cast<double>(x.lead)});
                } else if constexpr (std::is_same_v<I, CapacityDelta>) {
                    if (x.delta < 0) throw ConfigError("capacity delta must be >= 0");
                    if (spec.kind == EnvKind::Hospital) {
                        out.params.push_back({"standard_capacity", OverrideOp::Add, static_cast<double>(x.delta)});
                    } else if (spec.kind == EnvKind::Supply) {
                        out.caps.push_back({"inventory", spec.base_capacity + x.delta});
                    } else {
                        throw ConfigError("capacity deltas apply to the supply and hospital envs");
                    }
                } else {
                    if (spec.kind != EnvKind::Hospital) throw ConfigError("arrival scaling applies to the hospital env");
                    if (x.t_start > x.t_end || x.t_start < 0) throw ConfigError("arrival window has t_start > t_end");
                    if (!(x.factor >= 0.0)) throw ConfigError("arrival factor must be >= 0");
                    for (int d = 0; d < 3; ++d) {
                        out.params.push_back(
                            {"arrival_rate_" + std::to_string(d), OverrideOp::Scale, x.factor, x.t_start, x.t_end});
                    }
                }
            },
            iv);
    }
    return out;
}

// ---------------------------------------------------------------------------

PolicySpec parse_policy(std::string_view text) {
    std::vector<std::string> parts;
    std::string cur;
    for (char c : text) {
        if (c == ':') {
            parts.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    parts.push_back(cur);
    const auto integer = [&](const std::string& s) {
        std::int64_t v = 0;
        auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || ptr != s.data() + s.size() || v < 0) {
            throw ConfigError("bad policy number '" + s + "' in '" + std::string(text) + "'");
        }
        return v;
    };
    PolicySpec p;
    if (parts[0] == "none" && parts.size() == 1) return p;
    if (parts[0] == "constant" && parts.size() == 2) {
        p.kind = PolicySpec::Kind::Constant;
        p.a = integer(parts[1]);
        return p;
    }
    if (parts[0] == "uniform" && parts.size() == 3) {
        p.kind = PolicySpec::Kind::UniformRandom;
        p.a = integer(parts[1]);
        p.b = integer(parts[2]);
        if (p.a > p.b) throw ConfigError("uniform policy needs lo <= hi");
        return p;
    }
    if (parts[0] == "base-stock" && parts.size() == 2) {
        p.kind = PolicySpec::Kind::BaseStock;
        p.a = integer(parts[1]);
        return p;
    }
    throw ConfigError("unknown policy '" + std::string(text) +
                      "' (expected none, constant:K, uniform:LO:HI or base-stock:S)");
}

std::string to_string(const PolicySpec& p) {
    switch (p.kind) {
    case PolicySpec::Kind::None: return "none";
    case PolicySpec::Kind::Constant: return "constant:" + std::to_string(p.a);
    case PolicySpec::Kind::UniformRandom: return "uniform:" + std::to_string(p.a) + ":" + std::to_string(p.b);
    case PolicySpec::Kind::BaseStock: return "base-stock:" + std::to_string(p.a);
    }
    return "none";
}

PolicySpec default_policy(const EnvSpec& spec) {
    if (spec.kind == EnvKind::Supply) return {PolicySpec::Kind::UniformRandom, 0, 10};
    return {};
}

PolicyFn make_policy(const PolicySpec& p) {
    switch (p.kind) {
    case PolicySpec::Kind::None: return [](const SystemState&, std::int64_t, RngStream&) { return Action{}; };
    case PolicySpec::Kind::Constant:
        return [k = p.a](const SystemState&, std::int64_t, RngStream&) { return Action{k}; };
    case PolicySpec::Kind::UniformRandom:
        return [lo = p.a, hi = p.b](const SystemState&, std::int64_t, RngStream& rng) {
            return Action{rng.uniform_int(lo, hi)};
        };
    case PolicySpec::Kind::BaseStock:
        return [level = p.a](const SystemState& s, std::int64_t, RngStream&) {
            std::int64_t position = s.get_int("inventory") - s.get_int("backlog");
            if (const auto* pipe = std::get_if<Pipeline>(s.find("pipeline"))) position += pipeline_total(*pipe);
            return Action{std::max<std::int64_t>(0, level - position)};
        };
    }
    return {};
}

Dataset generate_with(const StepFn& step, const EnvSpec& spec, std::size_t n, std::size_t horizon,
                      const PolicySpec& policy, std::uint64_t seed, std::size_t workers, const Overrides* overrides) {
    Dataset d;
    d.env_name = spec.name;
    d.projection = spec.projection;
    std::vector<Trajectory> trajs(n);
    const PolicyFn pol = make_policy(policy);
    parallel_for(n, workers, [&](std::size_t i) {
        RngStream init_rng(seed, {2, static_cast<std::uint32_t>(i)});
        const std::uint32_t prefix[] = {1, static_cast<std::uint32_t>(i)};
        trajs[i] = rollout_policy(step, initial_state(spec, init_rng), horizon, pol, seed, prefix, overrides);
    });
    for (auto& t : trajs) d.push_back(std::move(t));
    return d;
}

Dataset generate_dataset(const EnvSpec& spec, std::size_t n, std::size_t horizon, const PolicySpec& policy,
                         std::uint64_t seed, std::size_t workers, const Overrides* overrides) {
    return generate_with(reference_step(spec), spec, n, horizon, policy, seed, workers, overrides);
}

EnvRules env_rules(const EnvSpec& spec) {
    EnvRules r;
    switch (spec.kind) {
    case EnvKind::Sir:
        r.nonnegative = {"S", "I", "R"};
        r.conserved_sum = {"S", "I", "R"};
        break;
    case EnvKind::Supply: r.nonnegative = {"inventory", "backlog", "t"}; break;
    case EnvKind::Hospital:
        r.nonnegative = {"icu_occupancy", "standard_occupancy", "overflow"};
        r.capacities = {{"icu_occupancy", std::trunc(spec.params[12])}, {"standard_occupancy", std::trunc(spec.params[13])}};
        break;
    }
    return r;
}

} // namespace gsim::envs
