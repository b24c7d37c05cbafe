#include "gsim/interpreter.hpp"

#include "gsim/errors.hpp"
#include "gsim/samplers.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <mutex>
#include <cmath>
#include <set>

namespace gsim::dsl {

namespace {

// ---------------------------------------------------------------------------
// Expression bytecode

enum class Op : std::uint8_t { Lit, Param, Field, Attr, Action, Neg, Add, Sub, Mul, Div, Exp, Log, Pow, Min, Max, Clip };

struct Instr {
    Op op = Op::Lit;
    std::uint32_t index = 0;
    double value = 0.0;
};

constexpr int kMaxDepth = 64;

struct Code {
    std::vector<Instr> ops;
};

struct Env {
    std::span<const double> params;
    const SystemState* state = nullptr;
    std::span<const AttrValue> row;
    const Action* action = nullptr;
};

double attr_number(const AttrValue& v) {
    switch (v.index()) {
    case 0: return static_cast<double>(std::get<std::int64_t>(v));
    case 1: return std::get<double>(v);
    case 2: return std::get<bool>(v) ? 1.0 : 0.0;
    default: throw EvalError("symbol attribute used as a number");
    }
}

double run(const Code& code, const Env& env) {
    double st[kMaxDepth];
    int sp = 0;
    for (const Instr& in : code.ops) {
        switch (in.op) {
        case Op::Lit: st[sp++] = in.value; break;
        case Op::Param: st[sp++] = env.params[in.index]; break;
        case Op::Field: st[sp++] = numeric_view(env.state->value(in.index)); break;
        case Op::Attr:
            if (in.index >= env.row.size()) throw EvalError("attribute read outside a record");
            st[sp++] = attr_number(env.row[in.index]);
            break;
        case Op::Action:
            if (env.action == nullptr || !*env.action) throw EvalError("unbound action");
            st[sp++] = static_cast<double>(**env.action);
            break;
        case Op::Neg: st[sp - 1] = -st[sp - 1]; break;
        case Op::Add: --sp; st[sp - 1] = sanitize(st[sp - 1] + st[sp]); break;
        case Op::Sub: --sp; st[sp - 1] = sanitize(st[sp - 1] - st[sp]); break;
        case Op::Mul: --sp; st[sp - 1] = sanitize(st[sp - 1] * st[sp]); break;
        case Op::Div: --sp; st[sp - 1] = safe_div(st[sp - 1], st[sp]); break;
        case Op::Exp: st[sp - 1] = std::exp(st[sp - 1]); break;
        case Op::Log: st[sp - 1] = safe_log(st[sp - 1]); break;
        case Op::Pow: --sp; st[sp - 1] = safe_pow(st[sp - 1], st[sp]); break;
        case Op::Min: --sp; st[sp - 1] = std::min(st[sp - 1], st[sp]); break;
        case Op::Max: --sp; st[sp - 1] = std::max(st[sp - 1], st[sp]); break;
        case Op::Clip: sp -= 2; st[sp - 1] = clip(st[sp - 1], st[sp], st[sp + 1]); break;
        }
    }
    return st[0];
}

// ---------------------------------------------------------------------------
// Compiled rules

enum class SamplerKind { Binomial, Poisson, NegBinomial, Normal, Deterministic };

struct CSampler {
    SamplerKind kind = SamplerKind::Deterministic;
    Code a, b;
    std::int64_t floor = 0;
};

struct CAttr {
    std::uint32_t index = 0;
    AttrKind kind = AttrKind::Int;
    bool sampled = false;
    Code expr;
    CSampler sampler;
};

struct CGate {
    std::string bed;
    std::uint32_t occupancy = 0;
    Code capacity;
};

enum class RuleKind { Flow, Accumulate, Advance, Append, Queue, Countdown, Hazard, Spawn, Assign };

struct CRule {
    RuleKind kind = RuleKind::Assign;
    std::uint32_t f1 = 0, f2 = 0;
    int sign = 1;
    CSampler sampler;
    Code e1, e2;
    int timer = -1, age = -1, bed = -1, overflow = -1;
    std::vector<std::pair<std::string, std::uint32_t>> occupancy;
    std::vector<CAttr> attrs;
    std::vector<CGate> gate;
    std::vector<AttrValue> blank_row;
    std::size_t run_end = 0; // flows: one past the last rule of this flow run
    bool float_target = false;
};

class Compiler {
  public:
    explicit Compiler(const StructuralConfig& c) : c_(c) {}

    Code expr(const ExprPtr& e, const RecordSchema* scope) {
        Code code;
        int depth = 0, max_depth = 0;
        emit(*e, scope, code, depth, max_depth);
        if (max_depth > kMaxDepth) throw ConfigError("expression nests too deeply");
        return code;
    }

    CSampler sampler(const CountSampler& s, const RecordSchema* scope) {
        CSampler out;
        std::visit(
            [&](const auto& x) {
                using S = std::decay_t<decltype(x)>;
                if constexpr (std::is_same_v<S, Binomial>) {
                    out.kind = SamplerKind::Binomial;
                    out.a = expr(x.n, scope);
                    out.b = expr(x.p, scope);
                } else if constexpr (std::is_same_v<S, Poisson>) {
                    out.kind = SamplerKind::Poisson;
                    out.a = expr(x.rate, scope);
                } else if constexpr (std::is_same_v<S, NegBinomial>) {
                    out.kind = SamplerKind::NegBinomial;
                    out.a = expr(x.mean, scope);
                    out.b = expr(x.dispersion, scope);
                } else if constexpr (std::is_same_v<S, Normal>) {
                    out.kind = SamplerKind::Normal;
                    out.a = expr(x.mean, scope);
                    out.b = expr(x.stdev, scope);
                    out.floor = x.floor;
                } else {
                    out.kind = SamplerKind::Deterministic;
                    out.a = expr(x.value, scope);
                }
            },
            s);
        return out;
    }

    std::uint32_t field(const std::string& name) const { return static_cast<std::uint32_t>(*c_.field_index(name)); }

    const RecordSchema& schema(const std::string& records) const { return c_.state[field(records)].record_schema; }

    std::vector<std::pair<std::string, std::uint32_t>> occupancy(const OccupancyMap& m) const {
        std::vector<std::pair<std::string, std::uint32_t>> out;
        for (const auto& [bed, f] : m) out.emplace_back(bed, field(f));
        return out;
    }

  private:
    void emit(const Expr& e, const RecordSchema* scope, Code& code, int& depth, int& max_depth) {
        for (const auto& a : e.args) emit(*a, scope, code, depth, max_depth);
        Instr in;
        switch (e.kind) {
        case ExprKind::Literal: in.op = Op::Lit; in.value = e.value; break;
        case ExprKind::Param: in.op = Op::Param; in.index = static_cast<std::uint32_t>(*c_.param_index(e.name)); break;
        case ExprKind::Field: in.op = Op::Field; in.index = field(e.name); break;
        case ExprKind::Attr: in.op = Op::Attr; in.index = static_cast<std::uint32_t>(*scope->index_of(e.name)); break;
        case ExprKind::Action: in.op = Op::Action; break;
        case ExprKind::Neg: in.op = Op::Neg; break;
        case ExprKind::Add: in.op = Op::Add; break;
        case ExprKind::Sub: in.op = Op::Sub; break;
        case ExprKind::Mul: in.op = Op::Mul; break;
        case ExprKind::Div: in.op = Op::Div; break;
        case ExprKind::Exp: in.op = Op::Exp; break;
        case ExprKind::Log: in.op = Op::Log; break;
        case ExprKind::Pow: in.op = Op::Pow; break;
        case ExprKind::Min: in.op = Op::Min; break;
        case ExprKind::Max: in.op = Op::Max; break;
        case ExprKind::Clip: in.op = Op::Clip; break;
        }
        depth += 1 - static_cast<int>(e.args.size());
        max_depth = std::max(max_depth, depth);
        code.ops.push_back(in);
    }

    const StructuralConfig& c_;
};

AttrValue blank(AttrKind k) {
    switch (k) {
    case AttrKind::Int: return std::int64_t{0};
    case AttrKind::Float: return 0.0;
    case AttrKind::Bool: return false;
    case AttrKind::Symbol: return std::string();
    }
    return std::int64_t{0};
}

AttrValue convert(double v, AttrKind k) {
    switch (k) {
    case AttrKind::Int: return static_cast<std::int64_t>(std::llround(std::clamp(sanitize(v), -9.0e18, 9.0e18)));
    case AttrKind::Float: return sanitize(v);
    case AttrKind::Bool: return v != 0.0 && !std::isnan(v);
    case AttrKind::Symbol: break;
    }
    throw EvalError("cannot assign a number to a symbol attribute");
}

std::int64_t draw(const CSampler& s, RngStream& rng, const Env& env) {
    switch (s.kind) {
    case SamplerKind::Binomial: {
        const double n = run(s.a, env);
        return sampling::binomial(rng, n, run(s.b, env));
    }
    case SamplerKind::Poisson: return sampling::poisson(rng, run(s.a, env));
    case SamplerKind::NegBinomial: {
        const double m = run(s.a, env);
        return sampling::negative_binomial(rng, m, run(s.b, env));
    }
    case SamplerKind::Normal: {
        const double m = run(s.a, env);
        return sampling::normal_count(rng, m, run(s.b, env), s.floor);
    }
    case SamplerKind::Deterministic: return sampling::deterministic(run(s.a, env));
    }
    return 0;
}

void free_bed(std::vector<StateValue>& values, const std::vector<std::pair<std::string, std::uint32_t>>& occ,
              const AttrValue& bed) {
    const auto* name = std::get_if<std::string>(&bed);
    if (name == nullptr) return;
    for (const auto& [b, f] : occ) {
        if (b == *name) {
            auto& v = std::get<std::int64_t>(values[f]);
            if (v > 0) --v;
            return;
        }
    }
}

} // namespace

struct Program::Impl {
    StructuralConfig config;
    std::vector<std::string> param_names;
    std::vector<std::string> field_names;
    std::vector<CRule> rules;

    // Name tables already checked against the declared fields. Tables are kept alive so a
    // cached address can never be reused by a different table.
    mutable std::mutex verified_mutex;
    mutable std::vector<std::shared_ptr<const std::vector<std::string>>> verified_tables;
    mutable std::atomic<const std::vector<std::string>*> last_verified{nullptr};
};

Program::Program(const StructuralConfig& config) {
    const auto report = validate(config);
    if (!report.ok()) throw ConfigError("config '" + config.name + "' is invalid:\n" + report.summary());

    auto impl = std::make_shared<Impl>();
    impl->config = config;
    impl->param_names = config.param_names();
    for (const auto& f : config.state) impl->field_names.push_back(f.name);

    Compiler cc(config);
    for (const auto& rule : config.rules) {
        CRule r;
        std::visit(
            [&](const auto& x) {
                using R = std::decay_t<decltype(x)>;
                if constexpr (std::is_same_v<R, CompartmentFlow>) {
                    r.kind = RuleKind::Flow;
                    r.f1 = cc.field(x.from);
                    r.f2 = cc.field(x.to);
                    r.sampler = cc.sampler(x.count, nullptr);
                } else if constexpr (std::is_same_v<R, Accumulate>) {
                    r.kind = RuleKind::Accumulate;
                    r.f1 = cc.field(x.field);
                    r.sign = x.sign;
                    r.sampler = cc.sampler(x.delta, nullptr);
                    r.float_target = config.state[r.f1].kind == ValueKind::Float;
                } else if constexpr (std::is_same_v<R, PipelineAdvance>) {
                    r.kind = RuleKind::Advance;
                    r.f1 = cc.field(x.pipeline);
                    r.f2 = cc.field(x.deliver_to);
                } else if constexpr (std::is_same_v<R, PipelineAppend>) {
                    r.kind = RuleKind::Append;
                    r.f1 = cc.field(x.pipeline);
                    r.e1 = cc.expr(x.quantity, nullptr);
                    r.e2 = cc.expr(x.delay, nullptr);
                } else if constexpr (std::is_same_v<R, QueueService>) {
                    r.kind = RuleKind::Queue;
                    r.f1 = cc.field(x.inventory);
                    r.f2 = cc.field(x.backlog);
                    r.sampler = cc.sampler(x.demand, nullptr);
                } else if constexpr (std::is_same_v<R, RecordCountdown>) {
                    r.kind = RuleKind::Countdown;
                    r.f1 = cc.field(x.records);
                    const auto& s = cc.schema(x.records);
                    r.timer = static_cast<int>(*s.index_of(x.timer));
                    if (!x.age.empty()) r.age = static_cast<int>(*s.index_of(x.age));
                    r.bed = static_cast<int>(*s.index_of(x.bed));
                    r.occupancy = cc.occupancy(x.occupancy);
                } else if constexpr (std::is_same_v<R, RecordHazard>) {
                    r.kind = RuleKind::Hazard;
                    r.f1 = cc.field(x.records);
                    const auto& s = cc.schema(x.records);
                    r.e1 = cc.expr(x.prob, &s);
                    r.bed = static_cast<int>(*s.index_of(x.bed));
                    r.occupancy = cc.occupancy(x.occupancy);
                } else if constexpr (std::is_same_v<R, RecordSpawn>) {
                    r.kind = RuleKind::Spawn;
                    r.f1 = cc.field(x.records);
                    const auto& s = cc.schema(x.records);
                    r.sampler = cc.sampler(x.count, nullptr);
                    for (const auto& [name, init] : x.attrs) {
                        CAttr a;
                        a.index = static_cast<std::uint32_t>(*s.index_of(name));
                        a.kind = s.attrs[a.index].second;
                        if (init.index() == 0) {
                            a.expr = cc.expr(std::get<0>(init), &s);
                        } else {
                            a.sampled = true;
                            a.sampler = cc.sampler(std::get<1>(init), &s);
                        }
                        r.attrs.push_back(std::move(a));
                    }
                    for (const auto& g : x.gate) r.gate.push_back({g.bed_type, cc.field(g.occupancy), cc.expr(g.capacity, nullptr)});
                    if (!x.bed.empty()) r.bed = static_cast<int>(*s.index_of(x.bed));
                    if (!x.overflow.empty()) r.overflow = static_cast<int>(cc.field(x.overflow));
                    for (const auto& [n, k] : s.attrs) r.blank_row.push_back(blank(k));
                } else {
                    r.kind = RuleKind::Assign;
                    r.f1 = cc.field(x.field);
                    r.e1 = cc.expr(x.expr, nullptr);
                    r.float_target = config.state[r.f1].kind == ValueKind::Float;
                }
            },
            rule);
        impl->rules.push_back(std::move(r));
    }
    for (std::size_t k = impl->rules.size(); k-- > 0;) {
        if (impl->rules[k].kind != RuleKind::Flow) continue;
        const bool next_is_flow = k + 1 < impl->rules.size() && impl->rules[k + 1].kind == RuleKind::Flow;
        impl->rules[k].run_end = next_is_flow ? impl->rules[k + 1].run_end : k + 1;
    }
    impl_ = std::move(impl);
}

const StructuralConfig& Program::config() const noexcept { return impl_->config; }

namespace {

void check_conforms(const Program::Impl& impl, const SystemState& state) {
    const auto& decl = impl.config.state;
    if (state.size() != decl.size()) {
        throw SchemaError("state has " + std::to_string(state.size()) + " fields, config '" + impl.config.name +
                          "' declares " + std::to_string(decl.size()));
    }
    const auto* table = state.name_table().get();
    const bool names_known = table == impl.last_verified.load(std::memory_order_acquire);
    for (std::size_t i = 0; i < decl.size(); ++i) {
        if (!names_known && state.name(i) != decl[i].name) {
            throw SchemaError("state field " + std::to_string(i) + " is '" + state.name(i) + "', expected '" +
                              decl[i].name + "'");
        }
        const auto& v = state.value(i);
        if (kind_of(v) != decl[i].kind) {
            throw SchemaError("field '" + decl[i].name + "' holds " + std::string(to_string(kind_of(v))) + ", expected " +
                              std::string(to_string(decl[i].kind)));
        }
        if (decl[i].kind == ValueKind::Records && !(std::get<RecordList>(v).schema() == decl[i].record_schema)) {
            throw SchemaError("record schema of '" + decl[i].name + "' does not match the config");
        }
    }
    if (!names_known) {
        const std::lock_guard<std::mutex> lock(impl.verified_mutex);
        if (impl.verified_tables.size() < 64) {
            impl.verified_tables.push_back(state.name_table());
            impl.last_verified.store(table, std::memory_order_release);
        }
    }
}

} // namespace

SystemState Program::step(std::span<const double> params, const SystemState& state, const Action& action,
                          const StepContext& ctx) const {
    const Impl& impl = *impl_;
    if (params.size() != impl.param_names.size()) {
        throw SizeError("expected " + std::to_string(impl.param_names.size()) + " parameters, got " +
                        std::to_string(params.size()));
    }
    check_conforms(impl, state);

    std::vector<double> p;
    std::span<const double> active = params;
    if (ctx.overrides != nullptr && !ctx.overrides->params.empty()) {
        p.assign(params.begin(), params.end());
        apply_overrides(impl.param_names, p, ctx.overrides, ctx.t);
        active = p;
    }

    SystemState next = state;
    std::array<double, 16> flow_small{};
    std::vector<double> flow_large;
    std::size_t flow_n = 0;
    Env env{active, &next, {}, &action};

    for (std::size_t k = 0; k < impl.rules.size(); ++k) {
        const CRule& r = impl.rules[k];
        try {
            auto& values = next.mutable_values();
            std::optional<RngStream> stream;
            const auto rng = [&]() -> RngStream& {
                if (!stream) stream.emplace(ctx.rule_stream(static_cast<std::uint32_t>(k)));
                return *stream;
            };
            switch (r.kind) {
            case RuleKind::Flow: {
                // every flow in a run samples against the state at the start of the run
                const bool run_start = k == 0 || impl.rules[k - 1].kind != RuleKind::Flow;
                if (run_start) {
                    flow_n = r.run_end - k;
                    if (flow_n > flow_small.size()) flow_large.resize(flow_n);
                    double* out = flow_n > flow_small.size() ? flow_large.data() : flow_small.data();
                    for (std::size_t j = k; j < r.run_end; ++j) {
                        RngStream s = ctx.rule_stream(static_cast<std::uint32_t>(j));
                        out[j - k] = static_cast<double>(draw(impl.rules[j].sampler, s, env));
                    }
                }
                const double* flow_counts = flow_n > flow_small.size() ? flow_large.data() : flow_small.data();
                const std::size_t offset = flow_n - (r.run_end - k);
                auto& from = std::get<std::int64_t>(values[r.f1]);
                auto& to = std::get<std::int64_t>(values[r.f2]);
                const auto n = std::min(static_cast<std::int64_t>(flow_counts[offset]), std::max<std::int64_t>(from, 0));
                from -= n;
                to += n;
                break;
            }
            case RuleKind::Accumulate: {
                const auto d = static_cast<double>(r.sign) * static_cast<double>(draw(r.sampler, rng(), env));
                if (r.float_target) {
                    auto& v = std::get<double>(values[r.f1]);
                    v = std::max(0.0, sanitize(v + d));
                } else {
                    auto& v = std::get<std::int64_t>(values[r.f1]);
                    v = std::max<std::int64_t>(0, v + static_cast<std::int64_t>(d));
                }
                break;
            }
            case RuleKind::Advance: {
                auto& pipe = std::get<Pipeline>(values[r.f1]);
                std::int64_t delivered = 0;
                std::size_t w = 0;
                for (std::size_t i = 0; i < pipe.size(); ++i) {
                    QuantityTimer e = pipe[i];
                    e.timer -= 1;
                    if (e.timer <= 0) delivered += e.quantity;
                    else pipe[w++] = e;
                }
                pipe.resize(w);
                auto& inv = std::get<std::int64_t>(values[r.f2]);
                if (const auto cap = field_cap(ctx.overrides, impl.field_names[r.f2])) {
                    delivered = std::min(delivered, std::max<std::int64_t>(0, *cap - inv));
                }
                inv += delivered;
                break;
            }
            case RuleKind::Append: {
                const std::int64_t q = sampling::to_count(run(r.e1, env));
                const std::int64_t delay = std::max<std::int64_t>(0, sampling::truncate(run(r.e2, env)));
                if (q > 0) std::get<Pipeline>(values[r.f1]).push_back({q, delay});
                break;
            }
            case RuleKind::Queue: {
                const std::int64_t demand = draw(r.sampler, rng(), env);
                auto& inv = std::get<std::int64_t>(values[r.f1]);
                auto& back = std::get<std::int64_t>(values[r.f2]);
                const std::int64_t fill_back = std::min(inv, back);
                inv -= fill_back;
                back -= fill_back;
                const std::int64_t fill = std::min(inv, demand);
                inv -= fill;
                back += demand - fill;
                break;
            }
            case RuleKind::Countdown: {
                auto& list = std::get<RecordList>(values[r.f1]);
                std::vector<bool> keep(list.size(), true);
                for (std::size_t i = 0; i < list.size(); ++i) {
                    auto row = list.row(i);
                    auto& timer = std::get<std::int64_t>(row[static_cast<std::size_t>(r.timer)]);
                    timer -= 1;
                    if (r.age >= 0) std::get<std::int64_t>(row[static_cast<std::size_t>(r.age)]) += 1;
                    if (timer <= 0) {
                        timer = 0;
                        keep[i] = false;
                        free_bed(values, r.occupancy, row[static_cast<std::size_t>(r.bed)]);
                    }
                }
                list.retain(keep);
                break;
            }
            case RuleKind::Hazard: {
                auto& list = std::get<RecordList>(values[r.f1]);
                std::vector<bool> keep(list.size(), true);
                RngStream& g = rng();
                for (std::size_t i = 0; i < list.size(); ++i) {
                    const auto row = std::as_const(list).row(i);
                    Env renv = env;
                    renv.row = row;
                    const double pr = clip(run(r.e1, renv), 0.0, 1.0);
                    if (g.uniform01() < pr) {
                        keep[i] = false;
                        free_bed(values, r.occupancy, row[static_cast<std::size_t>(r.bed)]);
                    }
                }
                list.retain(keep);
                break;
            }
            case RuleKind::Spawn: {
                RngStream& g = rng();
                const std::int64_t n = draw(r.sampler, g, env);
                for (std::int64_t a = 0; a < n; ++a) {
                    std::vector<AttrValue> row = r.blank_row;
                    Env renv = env;
                    renv.row = row;
                    for (const auto& attr : r.attrs) {
                        const double v = attr.sampled ? static_cast<double>(draw(attr.sampler, g, renv)) : run(attr.expr, renv);
                        row[attr.index] = convert(v, attr.kind);
                    }
                    bool admitted = r.gate.empty();
                    for (const auto& opt : r.gate) {
                        const std::int64_t cap = sampling::truncate(run(opt.capacity, env));
                        auto& occ = std::get<std::int64_t>(values[opt.occupancy]);
                        if (occ < cap) {
                            ++occ;
                            if (r.bed >= 0) row[static_cast<std::size_t>(r.bed)] = opt.bed;
                            admitted = true;
                            break;
                        }
                    }
                    if (admitted) {
                        std::get<RecordList>(values[r.f1]).push_back(std::move(row));
                    } else if (r.overflow >= 0) {
                        std::get<std::int64_t>(values[static_cast<std::size_t>(r.overflow)]) += 1;
                    }
                }
                break;
            }
            case RuleKind::Assign: {
                const double v = run(r.e1, env);
                if (r.float_target) std::get<double>(values[r.f1]) = sanitize(v);
                else std::get<std::int64_t>(values[r.f1]) = sampling::to_count(v);
                break;
            }
            }
        } catch (const StepError&) {
            throw;
        } catch (const std::exception& e) {
            throw StepError(e.what(), k);
        }
    }
    return next;
}

SystemState step(const StructuralConfig& config, const ParameterVector& params, const SystemState& state,
                 const Action& action, const StepContext& ctx) {
    return Program(config).step(params.values(), state, action, ctx);
}

Trajectory rollout(const StructuralConfig& config, const ParameterVector& params, const SystemState& init,
                   std::span<const Action> actions, std::uint64_t seed, std::span<const std::uint32_t> prefix,
                   const Overrides* overrides) {
    return gsim::rollout(make_step_fn(config, {params.values().begin(), params.values().end()}), init, actions, seed,
                         prefix, overrides);
}

StepFn make_step_fn(const Program& program, std::vector<double> params) {
    return [program, params = std::move(params)](const SystemState& s, const Action& a, const StepContext& ctx) {
        return program.step(params, s, a, ctx);
    };
}

StepFn make_step_fn(const StructuralConfig& config, std::vector<double> params) {
    return make_step_fn(Program(config), std::move(params));
}

SystemState adapt_state(const StructuralConfig& config, const SystemState& data) {
    SystemState s = config.initial_state();
    for (std::size_t i = 0; i < s.size(); ++i) {
        const StateValue* v = data.find(s.name(i));
        if (v == nullptr || kind_of(*v) != kind_of(s.value(i))) continue;
        if (kind_of(*v) == ValueKind::Records &&
            !(std::get<RecordList>(*v).schema() == std::get<RecordList>(s.value(i)).schema()))
            continue;
        s.value(i) = *v;
    }
    return s;
}

Simulator make_simulator(const StructuralConfig& config, std::vector<double> params) {
    const Program program(config);
    return {make_step_fn(program, std::move(params)),
            [program](const SystemState& data) { return adapt_state(program.config(), data); }};
}

// ---------------------------------------------------------------------------
// Dependency graph

namespace {

void expr_fields(const ExprPtr& e, std::set<std::string>& out) {
    if (!e) return;
    if (e->kind == ExprKind::Field) out.insert(e->name);
    for (const auto& a : e->args) expr_fields(a, out);
}

void sampler_fields(const CountSampler& s, std::set<std::string>& out) {
    std::visit(
        [&](const auto& x) {
            using S = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<S, Binomial>) {
                expr_fields(x.n, out);
                expr_fields(x.p, out);
            } else if constexpr (std::is_same_v<S, Poisson>) {
                expr_fields(x.rate, out);
            } else if constexpr (std::is_same_v<S, NegBinomial>) {
                expr_fields(x.mean, out);
                expr_fields(x.dispersion, out);
            } else if constexpr (std::is_same_v<S, Normal>) {
                expr_fields(x.mean, out);
                expr_fields(x.stdev, out);
            } else {
                expr_fields(x.value, out);
            }
        },
        s);
}

} // namespace

std::size_t DirectedGraph::edge_count() const noexcept {
    std::size_t n = 0;
    for (const auto& row : adj) n += static_cast<std::size_t>(std::count(row.begin(), row.end(), true));
    return n;
}

bool DirectedGraph::has_edge(std::string_view from, std::string_view to) const {
    const auto f = std::find(nodes.begin(), nodes.end(), from);
    const auto t = std::find(nodes.begin(), nodes.end(), to);
    if (f == nodes.end() || t == nodes.end()) return false;
    return adj[static_cast<std::size_t>(f - nodes.begin())][static_cast<std::size_t>(t - nodes.begin())];
}

DirectedGraph dependency_graph(const StructuralConfig& config) {
    DirectedGraph g;
    for (const auto& f : config.state) g.nodes.push_back(f.name);
    g.adj.assign(g.nodes.size(), std::vector<bool>(g.nodes.size(), false));
    for (const auto& rule : config.rules) {
        std::set<std::string> reads, writes;
        std::visit(
            [&](const auto& x) {
                using R = std::decay_t<decltype(x)>;
                if constexpr (std::is_same_v<R, CompartmentFlow>) {
                    writes = {x.from, x.to};
                    sampler_fields(x.count, reads);
                } else if constexpr (std::is_same_v<R, Accumulate>) {
                    writes = {x.field};
                    sampler_fields(x.delta, reads);
                } else if constexpr (std::is_same_v<R, PipelineAdvance>) {
                    writes = {x.pipeline, x.deliver_to};
                } else if constexpr (std::is_same_v<R, PipelineAppend>) {
                    writes = {x.pipeline};
                    expr_fields(x.quantity, reads);
                    expr_fields(x.delay, reads);
                } else if constexpr (std::is_same_v<R, QueueService>) {
                    writes = {x.inventory, x.backlog};
                    sampler_fields(x.demand, reads);
                } else if constexpr (std::is_same_v<R, RecordCountdown>) {
                    writes = {x.records};
                    for (const auto& o : x.occupancy) writes.insert(o.second);
                } else if constexpr (std::is_same_v<R, RecordHazard>) {
                    writes = {x.records};
                    for (const auto& o : x.occupancy) writes.insert(o.second);
                    expr_fields(x.prob, reads);
                } else if constexpr (std::is_same_v<R, RecordSpawn>) {
                    writes = {x.records};
                    for (const auto& o : x.gate) {
                        writes.insert(o.occupancy);
                        expr_fields(o.capacity, reads);
                    }
                    if (!x.overflow.empty()) writes.insert(x.overflow);
                    sampler_fields(x.count, reads);
                    for (const auto& a : x.attrs) {
                        if (a.second.index() == 0) expr_fields(std::get<0>(a.second), reads);
                        else sampler_fields(std::get<1>(a.second), reads);
                    }
                } else {
                    writes = {x.field};
                    expr_fields(x.expr, reads);
                }
                if constexpr (!std::is_same_v<R, Assign>) reads.insert(writes.begin(), writes.end());
            },
            rule);
        for (const auto& r : reads) {
            const auto j = config.field_index(r);
            if (!j) continue;
            for (const auto& w : writes) {
                if (const auto i = config.field_index(w)) g.adj[*j][*i] = true;
            }
        }
    }
    return g;
}

} // namespace gsim::dsl
