#include "gsim/experiments.hpp"

#include "gsim/errors.hpp"
#include "gsim/metrics.hpp"
#include "gsim/parallel.hpp"
#include "gsim/text.hpp"

#include <algorithm>
#include <array>
#include <variant>

namespace gsim::experiments {

namespace {

SystemState start_state(const envs::EnvSpec& spec, const Simulator& sim, std::uint64_t seed, std::size_t m) {
    RngStream rng(seed, {11, static_cast<std::uint32_t>(m)});
    return sim.init_from(envs::initial_state(spec, rng));
}

/// Steps one replicate without keeping the trajectory; visit(t, state) sees t = 0..horizon.
template <class Visit>
void run_lean(const envs::EnvSpec& spec, const Simulator& sim, const Overrides* overrides, std::size_t horizon,
              const PolicyFn& policy, std::uint64_t seed, std::size_t m, Visit&& visit) {
    SystemState state = start_state(spec, sim, seed, m);
    visit(std::size_t{0}, state);
    StepContext ctx{seed, {12, static_cast<std::uint32_t>(m)}, 0, overrides};
    for (std::size_t t = 0; t < horizon; ++t) {
        ctx.t = static_cast<std::int64_t>(t);
        RngStream prng = ctx.rule_stream(kPolicyStream);
        const Action a = policy ? policy(state, ctx.t, prng) : Action{};
        state = sim.step(state, a, ctx);
        visit(t + 1, state);
    }
}

PolicyFn policy_for(const envs::EnvSpec& spec, const envs::PolicySpec& policy) {
    return spec.kind == envs::EnvKind::Supply ? envs::make_policy(policy) : PolicyFn{};
}

std::size_t horizon_or(std::size_t h, const envs::EnvSpec& spec) { return h == 0 ? spec.horizon : h; }

double int_at(const SystemState& s, std::string_view field) { return static_cast<double>(s.get_int(field)); }

double param_or(const envs::EnvSpec& spec, std::optional<double> v, std::string_view name) {
    return v ? *v : spec.params[spec.param_index(name)];
}

void require_kind(const envs::EnvSpec& spec, envs::EnvKind kind, const char* what) {
    if (spec.kind != kind) {
        throw ConfigError(std::string(what) + " needs the " + std::string(envs::to_string(kind)) + " env, got " +
                          spec.name);
    }
}

} // namespace

Trajectory replicate(const envs::EnvSpec& spec, const Simulator& sim, const Overrides* overrides, std::size_t horizon,
                     const envs::PolicySpec& policy, std::uint64_t seed, std::size_t m) {
    const std::uint32_t prefix[] = {12, static_cast<std::uint32_t>(m)};
    return rollout_policy(sim.step, start_state(spec, sim, seed, m), horizon, policy_for(spec, policy), seed, prefix,
                          overrides);
}

// ---------------------------------------------------------------------------

double Curve::peak(std::size_t dim) const { return mean.at(peak_time(dim)).at(dim); }

std::size_t Curve::peak_time(std::size_t dim) const {
    std::size_t best = 0;
    for (std::size_t t = 1; t < mean.size(); ++t) {
        if (mean[t].at(dim) > mean[best].at(dim)) best = t;
    }
    return best;
}

std::string LockdownResult::csv() const {
    std::vector<std::string> header{"alpha", "t"};
    header.insert(header.end(), dims.begin(), dims.end());
    std::string out = csv_row(header);
    auto emit = [&](const Curve& c) {
        const std::string a = c.alpha ? format_number(*c.alpha) : "none";
        for (std::size_t t = 0; t < c.mean.size(); ++t) {
            std::vector<std::string> row{a, std::to_string(t)};
            for (double v : c.mean[t]) row.push_back(format_number(v));
            out += csv_row(row);
        }
    };
    emit(baseline);
    for (const auto& c : curves) emit(c);
    return out;
}

LockdownResult lockdown_sir(const envs::EnvSpec& spec, const Simulator& sim, const LockdownSpec& ls,
                            std::uint64_t seed, std::size_t workers) {
    require_kind(spec, envs::EnvKind::Sir, "lockdown experiment");
    const std::size_t horizon = horizon_or(ls.horizon, spec);
    if (ls.mc < 1) throw ConfigError("lockdown experiment needs mc >= 1");
    if (ls.t_start < 0 || ls.t_end < ls.t_start || ls.t_end > static_cast<std::int64_t>(horizon)) {
        throw ConfigError("lockdown window [" + std::to_string(ls.t_start) + ", " + std::to_string(ls.t_end) +
                          ") lies outside the horizon " + std::to_string(horizon));
    }
    std::vector<std::optional<double>> scenarios{std::nullopt};
    for (double a : ls.alphas) {
        if (!(a >= 0.0 && a <= 1.0)) throw ConfigError("lockdown alpha must lie in [0, 1]");
        scenarios.emplace_back(a);
    }
    std::vector<Overrides> overrides(scenarios.size());
    for (std::size_t s = 1; s < scenarios.size(); ++s) {
        const envs::Intervention iv = envs::LockdownWindow{ls.t_start, ls.t_end, *scenarios[s]};
        overrides[s] = envs::to_overrides(spec, std::span(&iv, 1));
    }

    const std::size_t dims = spec.projection.arity();
    // reduce in replicate order after the parallel pass so results do not depend on workers
    std::vector<std::vector<std::vector<double>>> per(scenarios.size() * ls.mc);
    parallel_for(scenarios.size() * ls.mc, workers, [&](std::size_t job) {
        const std::size_t s = job / ls.mc;
        const std::size_t m = job % ls.mc;
        Observer obs(spec.projection);
        auto& rows = per[job];
        rows.assign(horizon + 1, std::vector<double>(dims));
        run_lean(spec, sim, s == 0 ? nullptr : &overrides[s], horizon, {}, seed, m,
                 [&](std::size_t t, const SystemState& st) { obs.observe_into(st, rows[t]); });
    });

    LockdownResult r;
    r.dims = spec.projection.names();
    for (std::size_t s = 0; s < scenarios.size(); ++s) {
        Curve c;
        c.alpha = scenarios[s];
        c.mean.assign(horizon + 1, std::vector<double>(dims, 0.0));
        for (std::size_t m = 0; m < ls.mc; ++m) {
            const auto& rows = per[s * ls.mc + m];
            for (std::size_t t = 0; t <= horizon; ++t) {
                for (std::size_t d = 0; d < dims; ++d) c.mean[t][d] += rows[t][d];
            }
        }
        for (auto& row : c.mean) {
            for (auto& v : row) v /= static_cast<double>(ls.mc);
        }
        if (s == 0) r.baseline = std::move(c);
        else r.curves.push_back(std::move(c));
    }
    return r;
}

// ---------------------------------------------------------------------------

GridSpec GridSpec::defaults() {
    GridSpec g;
    for (std::int64_t t = 0; t <= 95; t += 5) g.taus.push_back(t);
    for (std::int64_t b = 0; b <= 9500; b += 500) g.deltas.push_back(b);
    return g;
}

void GridSpec::check() const {
    if (taus.empty() || deltas.empty()) throw ConfigError("policy grid needs at least one tau and one delta");
    if (duration < 0) throw ConfigError("lockdown duration must be >= 0");
    if (mc < 1) throw ConfigError("policy grid needs mc >= 1");
    for (auto t : taus) {
        if (t < 0 || t + duration > static_cast<std::int64_t>(horizon)) {
            throw ConfigError("lockdown starting at " + std::to_string(t) + " does not fit in the horizon");
        }
    }
    for (auto d : deltas) {
        if (d < 0) throw ConfigError("bed deltas must be >= 0");
    }
}

std::string GridResult::csv() const {
    std::string out = "tau,delta_beds,overflow,cost,is_argmin\n";
    for (std::size_t i = 0; i < cells.size(); ++i) {
        const auto& c = cells[i];
        out += csv_row({std::to_string(c.tau), std::to_string(c.delta), format_number(c.overflow),
                        format_number(c.cost), i == argmin ? "1" : "0"});
    }
    return out;
}

double grid_cost(double overflow, std::int64_t delta, const GridSpec& grid) {
    return overflow + grid.bed_cost * static_cast<double>(delta) +
           grid.lockdown_day_cost * static_cast<double>(grid.duration);
}

std::size_t grid_argmin(const std::vector<GridCell>& cells) {
    if (cells.empty()) throw SizeError("empty policy grid");
    std::size_t best = 0;
    for (std::size_t i = 1; i < cells.size(); ++i) {
        const auto& a = cells[i];
        const auto& b = cells[best];
        if (std::tie(a.cost, a.delta, a.tau) < std::tie(b.cost, b.delta, b.tau)) best = i;
    }
    return best;
}

double hospital_overflow(const envs::EnvSpec& spec, const Simulator& sim, std::int64_t tau, std::int64_t delta,
                         const GridSpec& grid, std::uint64_t seed, std::size_t workers) {
    require_kind(spec, envs::EnvKind::Hospital, "policy grid");
    const std::array<envs::Intervention, 2> ivs{envs::CapacityDelta{delta},
                                                envs::ArrivalScale{grid.arrival_factor, tau, tau + grid.duration}};
    const Overrides ov = envs::to_overrides(spec, ivs);
    std::vector<double> finals(grid.mc);
    parallel_for(grid.mc, workers, [&](std::size_t m) {
        run_lean(spec, sim, &ov, grid.horizon, {}, seed, m, [&](std::size_t t, const SystemState& st) {
            if (t == grid.horizon) finals[m] = int_at(st, "overflow");
        });
    });
    double sum = 0.0;
    for (double f : finals) sum += f;
    return sum / static_cast<double>(grid.mc);
}

GridResult policy_grid_hospital(const envs::EnvSpec& spec, const Simulator& sim, const GridSpec& grid,
                                std::uint64_t seed, std::size_t workers) {
    require_kind(spec, envs::EnvKind::Hospital, "policy grid");
    grid.check();
    GridResult r;
    for (auto tau : grid.taus) {
        for (auto delta : grid.deltas) r.cells.push_back({tau, delta, 0.0, 0.0});
    }
    parallel_for(r.cells.size(), workers, [&](std::size_t i) {
        auto& c = r.cells[i];
        c.overflow = hospital_overflow(spec, sim, c.tau, c.delta, grid, seed, 1);
        c.cost = grid_cost(c.overflow, c.delta, grid);
    });
    r.argmin = grid_argmin(r.cells);
    return r;
}

// ---------------------------------------------------------------------------

void HeatmapSpec::check() const {
    if (capacity_deltas.empty() || leads.empty()) throw ConfigError("heatmap needs capacity deltas and leads");
    for (auto l : leads) {
        if (l < 1) throw ConfigError("lead times must be >= 1");
    }
    for (auto d : capacity_deltas) {
        if (d < 0) throw ConfigError("capacity deltas must be >= 0");
    }
    if (mc < 1) throw ConfigError("heatmap needs mc >= 1");
}

std::string HeatmapResult::csv() const {
    std::string out = "capacity_delta,lead,holding,backlog,cost\n";
    for (const auto& c : cells) {
        out += csv_row({std::to_string(c.capacity_delta), std::to_string(c.lead), format_number(c.holding),
                        format_number(c.backlog), format_number(c.cost)});
    }
    return out;
}

HeatmapResult heatmap_supply(const envs::EnvSpec& spec, const Simulator& sim, const HeatmapSpec& hs,
                             std::uint64_t seed, std::size_t workers) {
    require_kind(spec, envs::EnvKind::Supply, "supply heatmap");
    hs.check();
    const double c_hold = param_or(spec, hs.c_hold, "holding_cost");
    const double c_back = param_or(spec, hs.c_back, "backlog_cost");
    const std::size_t horizon = horizon_or(hs.horizon, spec);
    const PolicyFn policy = envs::make_policy(hs.policy);

    HeatmapResult r;
    for (auto d : hs.capacity_deltas) {
        for (auto l : hs.leads) r.cells.push_back({d, l, 0.0, 0.0, 0.0});
    }
    const std::size_t jobs = r.cells.size() * hs.mc;
    std::vector<std::pair<double, double>> sums(jobs);
    std::vector<Overrides> ovs;
    for (const auto& c : r.cells) {
        const std::array<envs::Intervention, 2> ivs{envs::CapacityDelta{c.capacity_delta}, envs::LeadTimeOverride{c.lead}};
        ovs.push_back(envs::to_overrides(spec, ivs));
    }
    parallel_for(jobs, workers, [&](std::size_t job) {
        const std::size_t cell = job / hs.mc;
        const std::size_t m = job % hs.mc;
        double inv = 0.0;
        double back = 0.0;
        run_lean(spec, sim, &ovs[cell], horizon, policy, seed, m, [&](std::size_t t, const SystemState& st) {
            if (t == 0) return;
            inv += int_at(st, "inventory");
            back += int_at(st, "backlog");
        });
        sums[job] = {inv, back};
    });
    for (std::size_t i = 0; i < r.cells.size(); ++i) {
        double inv = 0.0;
        double back = 0.0;
        for (std::size_t m = 0; m < hs.mc; ++m) {
            inv += sums[i * hs.mc + m].first;
            back += sums[i * hs.mc + m].second;
        }
        auto& c = r.cells[i];
        c.holding = c_hold * inv / static_cast<double>(hs.mc);
        c.backlog = c_back * back / static_cast<double>(hs.mc);
        c.cost = c.holding + c.backlog + hs.c_cap * static_cast<double>(c.capacity_delta);
    }
    return r;
}

// ---------------------------------------------------------------------------

std::string LeadtimeResult::csv() const {
    std::string out = "lead,t,gt_backlog,candidate_backlog\n";
    for (std::size_t i = 0; i < leads.size(); ++i) {
        for (std::size_t t = 0; t < gt_mean[i].size(); ++t) {
            out += csv_row({std::to_string(leads[i]), std::to_string(t), format_number(gt_mean[i][t]),
                            format_number(candidate_mean[i][t])});
        }
    }
    return out;
}

std::string LeadtimeResult::summary_csv() const {
    std::string out = "lead,gt_terminal,candidate_terminal,gt_peak,pooled_w1\n";
    for (std::size_t i = 0; i < leads.size(); ++i) {
        const double peak = *std::max_element(gt_mean[i].begin(), gt_mean[i].end());
        out += csv_row({std::to_string(leads[i]), format_number(gt_mean[i].back()),
                        format_number(candidate_mean[i].back()), format_number(peak), format_number(pooled_w1[i])});
    }
    return out;
}

LeadtimeResult leadtime_ood(const envs::EnvSpec& spec, const Simulator& gt, const Simulator& candidate,
                            const LeadtimeSpec& ls, std::uint64_t seed, std::size_t workers) {
    require_kind(spec, envs::EnvKind::Supply, "lead-time sweep");
    if (ls.leads.empty()) throw ConfigError("lead-time sweep needs at least one lead");
    if (ls.mc < 1) throw ConfigError("lead-time sweep needs mc >= 1");
    const std::size_t horizon = horizon_or(ls.horizon, spec);
    const PolicyFn policy = envs::make_policy(ls.policy);
    std::vector<Overrides> ovs;
    for (auto l : ls.leads) {
        if (l < 1) throw ConfigError("lead times must be >= 1");
        const envs::Intervention iv = envs::LeadTimeOverride{l};
        ovs.push_back(envs::to_overrides(spec, std::span(&iv, 1)));
    }
    const std::size_t L = ls.leads.size();
    // samples[which][lead][m][t]
    std::array<std::vector<std::vector<std::vector<double>>>, 2> samples;
    for (auto& s : samples) s.assign(L, std::vector<std::vector<double>>(ls.mc));
    parallel_for(2 * L * ls.mc, workers, [&](std::size_t job) {
        const std::size_t which = job / (L * ls.mc);
        const std::size_t i = (job / ls.mc) % L;
        const std::size_t m = job % ls.mc;
        auto& row = samples[which][i][m];
        row.resize(horizon + 1);
        run_lean(spec, which == 0 ? gt : candidate, &ovs[i], horizon, policy, seed, m,
                 [&](std::size_t t, const SystemState& st) { row[t] = int_at(st, "backlog"); });
    });

    LeadtimeResult r;
    r.leads = ls.leads;
    for (std::size_t i = 0; i < L; ++i) {
        std::array<std::vector<double>, 2> means;
        for (std::size_t w = 0; w < 2; ++w) {
            means[w].assign(horizon + 1, 0.0);
            for (const auto& row : samples[w][i]) {
                for (std::size_t t = 0; t <= horizon; ++t) means[w][t] += row[t];
            }
            for (auto& v : means[w]) v /= static_cast<double>(ls.mc);
        }
        double w1 = 0.0;
        for (std::size_t t = 1; t <= horizon; ++t) {
            std::vector<double> a, b;
            for (std::size_t m = 0; m < ls.mc; ++m) {
                a.push_back(samples[0][i][m][t]);
                b.push_back(samples[1][i][m][t]);
            }
            w1 += metrics::wasserstein1_1d(std::move(a), std::move(b));
        }
        r.pooled_w1.push_back(horizon == 0 ? 0.0 : w1 / static_cast<double>(horizon));
        r.gt_mean.push_back(std::move(means[0]));
        r.candidate_mean.push_back(std::move(means[1]));
    }
    return r;
}

} // namespace gsim::experiments
