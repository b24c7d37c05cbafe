#include "gsim/metrics.hpp"

#include "gsim/errors.hpp"
#include "gsim/parallel.hpp"
#include "gsim/text.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace gsim::metrics {

namespace {

std::size_t check_dims(const Samples& s, const char* what) {
    if (s.empty()) return 0;
    const std::size_t d = s.front().size();
    for (const auto& row : s) {
        if (row.size() != d) throw ShapeError(std::string("ragged sample matrix (") + what + ")");
    }
    return d;
}

std::vector<double> column(const Samples& s, std::size_t k) {
    std::vector<double> out;
    out.reserve(s.size());
    for (const auto& row : s) out.push_back(row[k]);
    return out;
}

double sq_dist(const std::vector<double>& x, const std::vector<double>& y) {
    double s = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double d = x[k] - y[k];
        s += d * d;
    }
    return s;
}

double kernel_mean(const Samples& x, const Samples& y, double inv_two_sigma2) {
    double s = 0.0;
    for (const auto& a : x) {
        for (const auto& b : y) s += std::exp(-sq_dist(a, b) * inv_two_sigma2);
    }
    return s / (static_cast<double>(x.size()) * static_cast<double>(y.size()));
}

const StateValue* numeric(const SystemState& s, const std::string& field) {
    const StateValue* v = s.find(field);
    if (v == nullptr) return nullptr;
    const auto k = kind_of(*v);
    return (k == ValueKind::Int || k == ValueKind::Float) ? v : nullptr;
}

std::int64_t state_violations(const SystemState& s, const envs::EnvRules& rules, std::optional<double> conserved) {
    std::int64_t n = 0;
    for (const auto& f : rules.nonnegative) {
        if (const auto* v = numeric(s, f); v != nullptr && numeric_view(*v) < 0) ++n;
    }
    for (const auto& c : rules.capacities) {
        if (const auto* v = numeric(s, c.occupancy); v != nullptr && numeric_view(*v) > c.capacity) ++n;
    }
    if (conserved) {
        double sum = 0.0;
        for (const auto& f : rules.conserved_sum) {
            const auto* v = numeric(s, f);
            if (v == nullptr) return n;
            sum += numeric_view(*v);
        }
        if (sum != *conserved) ++n;
    }
    return n;
}

std::optional<double> conserved_total(const SystemState& s, const envs::EnvRules& rules) {
    if (rules.conserved_sum.empty()) return std::nullopt;
    double sum = 0.0;
    for (const auto& f : rules.conserved_sum) {
        const auto* v = numeric(s, f);
        if (v == nullptr) return std::nullopt;
        sum += numeric_view(*v);
    }
    return sum;
}

std::vector<double> flatten(const Samples& rows) {
    std::vector<double> out;
    for (const auto& r : rows) out.insert(out.end(), r.begin(), r.end());
    return out;
}

} // namespace

double wasserstein1(const Samples& a, const Samples& b) {
    if (a.size() != b.size()) throw ShapeError("wasserstein1: sample counts differ");
    const std::size_t d = check_dims(a, "a");
    if (check_dims(b, "b") != d) throw ShapeError("wasserstein1: dimensions differ");
    if (a.empty() || d == 0) return 0.0;
    double total = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
        auto x = column(a, k);
        auto y = column(b, k);
        std::sort(x.begin(), x.end());
        std::sort(y.begin(), y.end());
        double s = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) s += std::abs(x[i] - y[i]);
        total += s / static_cast<double>(x.size());
    }
    return total / static_cast<double>(d);
}

double wasserstein1_1d(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw SizeError("wasserstein1_1d: empty sample");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    // quantile breakpoints i/n and j/m scaled by n*m to stay in integers
    const std::uint64_t n = a.size();
    const std::uint64_t m = b.size();
    std::uint64_t pos = 0;
    std::size_t i = 0;
    std::size_t j = 0;
    double s = 0.0;
    while (i < n && j < m) {
        const std::uint64_t next_a = (i + 1) * m;
        const std::uint64_t next_b = (j + 1) * n;
        const std::uint64_t next = std::min(next_a, next_b);
        s += static_cast<double>(next - pos) * std::abs(a[i] - b[j]);
        pos = next;
        if (next_a == next) ++i;
        if (next_b == next) ++j;
    }
    return s / (static_cast<double>(n) * static_cast<double>(m));
}

double wasserstein1_pooled(const Samples& a, const Samples& b) {
    const std::size_t d = check_dims(a, "a");
    if (check_dims(b, "b") != d) throw ShapeError("wasserstein1_pooled: dimensions differ");
    if (d == 0) return 0.0;
    double total = 0.0;
    for (std::size_t k = 0; k < d; ++k) total += wasserstein1_1d(column(a, k), column(b, k));
    return total / static_cast<double>(d);
}

double median_bandwidth(const Samples& a, const Samples& b) {
    Samples joint = a;
    joint.insert(joint.end(), b.begin(), b.end());
    std::vector<double> dists;
    dists.reserve(joint.size() * (joint.size() - 1) / 2);
    for (std::size_t i = 0; i < joint.size(); ++i) {
        for (std::size_t j = i + 1; j < joint.size(); ++j) dists.push_back(std::sqrt(sq_dist(joint[i], joint[j])));
    }
    if (dists.empty()) return 1.0;
    const auto mid = dists.begin() + static_cast<std::ptrdiff_t>(dists.size() / 2);
    std::nth_element(dists.begin(), mid, dists.end());
    return *mid > 0.0 ? *mid : 1.0;
}

double mmd_rbf(const Samples& a, const Samples& b, std::optional<double> bandwidth) {
    if (a.empty() || b.empty()) throw SizeError("mmd_rbf: empty sample set");
    if (check_dims(a, "a") != check_dims(b, "b")) throw ShapeError("mmd_rbf: dimensions differ");
    const double sigma = bandwidth ? *bandwidth : median_bandwidth(a, b);
    if (!(sigma > 0.0)) throw DomainError("mmd_rbf: bandwidth must be positive");
    const double g = 1.0 / (2.0 * sigma * sigma);
    const double mmd2 = kernel_mean(a, a, g) + kernel_mean(b, b, g) - 2.0 * kernel_mean(a, b, g);
    return std::sqrt(std::max(0.0, mmd2));
}

std::vector<NamedValue> mse_per_dim(const Samples& predicted, const Samples& observed,
                                    const std::vector<std::string>& names) {
    if (predicted.size() != observed.size()) throw ShapeError("mse_per_dim: row counts differ");
    const std::size_t d = check_dims(predicted, "predicted");
    if (!observed.empty() && check_dims(observed, "observed") != d) throw ShapeError("mse_per_dim: dimensions differ");
    if (!predicted.empty() && names.size() != d) throw ShapeError("mse_per_dim: names do not match dimensions");
    std::vector<NamedValue> out;
    for (std::size_t k = 0; k < names.size(); ++k) {
        double s = 0.0;
        for (std::size_t r = 0; r < predicted.size(); ++r) {
            const double e = predicted[r][k] - observed[r][k];
            s += e * e;
        }
        out.push_back({names[k], predicted.empty() ? 0.0 : s / static_cast<double>(predicted.size())});
    }
    return out;
}

std::int64_t domain_violations(const Trajectory& trajectory, const envs::EnvRules& rules) {
    const auto conserved = conserved_total(trajectory.init, rules);
    std::int64_t n = state_violations(trajectory.init, rules, conserved);
    for (const auto& st : trajectory.steps) n += state_violations(st.next, rules, conserved);
    return n;
}

GraphScore shd_f1(const dsl::DirectedGraph& predicted, const dsl::DirectedGraph& truth) {
    const std::set<std::string> pn(predicted.nodes.begin(), predicted.nodes.end());
    const std::set<std::string> tn(truth.nodes.begin(), truth.nodes.end());
    if (pn != tn || pn.size() != predicted.nodes.size() || tn.size() != truth.nodes.size()) {
        throw SchemaError("shd_f1: graphs have different node sets");
    }
    const std::vector<std::string> nodes(tn.begin(), tn.end());
    auto edge = [](const dsl::DirectedGraph& g, const std::string& from, const std::string& to) {
        return g.has_edge(from, to);
    };
    GraphScore score;
    std::int64_t tp = 0;
    std::int64_t np = 0;
    std::int64_t nt = 0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        for (std::size_t j = i; j < nodes.size(); ++j) {
            const bool p_ij = edge(predicted, nodes[i], nodes[j]);
            const bool t_ij = edge(truth, nodes[i], nodes[j]);
            const bool p_ji = i == j ? p_ij : edge(predicted, nodes[j], nodes[i]);
            const bool t_ji = i == j ? t_ij : edge(truth, nodes[j], nodes[i]);
            if (p_ij != t_ij || p_ji != t_ji) ++score.shd;
            const int k = i == j ? 1 : 2;
            const bool pe[2] = {p_ij, p_ji};
            const bool te[2] = {t_ij, t_ji};
            for (int e = 0; e < k; ++e) {
                np += pe[e];
                nt += te[e];
                tp += pe[e] && te[e];
            }
        }
    }
    if (np == 0 && nt == 0) {
        score.f1 = 100.0;
    } else if (tp == 0) {
        score.f1 = 0.0;
    } else {
        const double p = static_cast<double>(tp) / static_cast<double>(np);
        const double r = static_cast<double>(tp) / static_cast<double>(nt);
        score.f1 = 100.0 * 2.0 * p * r / (p + r);
    }
    return score;
}

double next_state_distance(const Simulator& a, const Simulator& b, const Dataset& test, std::size_t n,
                           std::uint64_t seed, StreamMode mode, std::size_t workers) {
    if (n == 0) throw DomainError("next_state_distance: N must be at least 1");
    std::vector<std::size_t> usable;
    for (std::size_t i = 0; i < test.size(); ++i) {
        if (test.trajectories[i].horizon() > 0) usable.push_back(i);
    }
    if (usable.empty()) return 0.0;
    std::vector<double> dist(usable.size(), 0.0);
    parallel_for(usable.size(), workers, [&](std::size_t u) {
        const std::size_t i = usable[u];
        const Trajectory& tr = test.trajectories[i];
        const Action& action = tr.steps.front().action;
        const SystemState xa = a.init_from(tr.init);
        const SystemState xb = b.init_from(tr.init);
        Samples sa;
        Samples sb;
        sa.reserve(n);
        sb.reserve(n);
        const auto idx = static_cast<std::uint32_t>(i);
        for (std::size_t k = 0; k < n; ++k) {
            const auto kk = static_cast<std::uint32_t>(k);
            const StepContext ca{seed, {3, idx, kk}, 0, nullptr};
            const StepContext cb{seed, {mode == StreamMode::Shared ? 3u : 4u, idx, kk}, 0, nullptr};
            sa.push_back(observe(a.step(xa, action, ca), test.projection));
            sb.push_back(observe(b.step(xb, action, cb), test.projection));
        }
        dist[u] = wasserstein1(sa, sb);
    });
    double s = 0.0;
    for (double d : dist) s += d;
    return s / static_cast<double>(dist.size());
}

void DiagnosticConfig::check() const {
    const double w[] = {w_wasserstein, w_mse, w_mmd, w_violations};
    bool positive = false;
    for (double x : w) {
        if (!(x >= 0.0)) throw ConfigError("diagnostic weights must be nonnegative");
        positive = positive || x > 0.0;
    }
    if (!positive) throw ConfigError("at least one diagnostic weight must be positive");
    if (mc == 0) throw ConfigError("diagnostic mc must be at least 1");
}

double DiagnosticReport::aggregate(const DiagnosticConfig& config) const {
    double mse_mean = 0.0;
    for (const auto& m : mse) mse_mean += m.value;
    if (!mse.empty()) mse_mean /= static_cast<double>(mse.size());
    double total = 0.0;
    if (config.w_wasserstein != 0.0) total += config.w_wasserstein * wasserstein;
    if (config.w_mse != 0.0) total += config.w_mse * mse_mean;
    if (config.w_mmd != 0.0) total += config.w_mmd * mmd;
    if (config.w_violations != 0.0) total += config.w_violations * static_cast<double>(violations);
    return total;
}

std::vector<std::string> DiagnosticReport::csv_header() const {
    std::vector<std::string> h{"wass"};
    for (const auto& m : mse) h.push_back("mse." + m.name);
    h.emplace_back("mmd");
    h.emplace_back("violations");
    for (const auto& p : params.names()) h.push_back("param." + p);
    return h;
}

std::vector<std::string> DiagnosticReport::csv_values() const {
    std::vector<std::string> v{format_number(wasserstein)};
    for (const auto& m : mse) v.push_back(format_number(m.value));
    v.push_back(format_number(mmd));
    v.push_back(std::to_string(violations));
    for (double p : params.values()) v.push_back(format_number(p));
    return v;
}

std::string DiagnosticReport::to_kv() const {
    const auto h = csv_header();
    const auto v = csv_values();
    std::string out;
    for (std::size_t i = 0; i < h.size(); ++i) out += h[i] + "=" + v[i] + "\n";
    return out;
}

Samples observe_trajectory(const Trajectory& trajectory, const ProjectionSpec& projection) {
    Samples rows;
    rows.reserve(trajectory.horizon() + 1);
    for (std::size_t t = 0; t <= trajectory.horizon(); ++t) rows.push_back(observe(trajectory.state_at(t), projection));
    return rows;
}

DiagnosticReport diagnose(const Simulator& simulator, const dsl::ParameterVector& params, const Dataset& validation,
                          const DiagnosticConfig& config) {
    config.check();
    if (validation.size() == 0) throw SizeError("diagnose: empty validation set");
    const std::size_t nv = validation.size();
    const std::size_t mc = config.mc;
    const std::size_t d = validation.projection.arity();

    std::vector<Samples> observed(nv);
    std::vector<std::vector<Samples>> sims(nv, std::vector<Samples>(mc));
    std::vector<std::int64_t> viol(nv, 0);
    parallel_for(nv, config.workers, [&](std::size_t j) {
        const Trajectory& tr = validation.trajectories[j];
        observed[j] = observe_trajectory(tr, validation.projection);
        const auto actions = tr.actions();
        const SystemState init = simulator.init_from(tr.init);
        for (std::size_t m = 0; m < mc; ++m) {
            const std::uint32_t prefix[] = {5, static_cast<std::uint32_t>(j), static_cast<std::uint32_t>(m)};
            const Trajectory sim = rollout(simulator.step, init, actions, config.seed, prefix);
            sims[j][m] = observe_trajectory(sim, validation.projection);
            if (m == 0 && config.rules) viol[j] = domain_violations(sim, *config.rules);
        }
    });

    DiagnosticReport report;
    report.params = params;

    // MSE of the Monte-Carlo mean over t = 1..T
    Samples pred_rows;
    Samples obs_rows;
    for (std::size_t j = 0; j < nv; ++j) {
        const std::size_t horizon = observed[j].size() - 1;
        for (std::size_t t = 1; t <= horizon; ++t) {
            std::vector<double> mean(d, 0.0);
            for (std::size_t m = 0; m < mc; ++m) {
                for (std::size_t k = 0; k < d; ++k) mean[k] += sims[j][m][t][k];
            }
            for (auto& x : mean) x /= static_cast<double>(mc);
            pred_rows.push_back(std::move(mean));
            obs_rows.push_back(observed[j][t]);
        }
    }
    report.mse = mse_per_dim(pred_rows, obs_rows, validation.projection.names());

    // W1 pooled across trajectories at each time step
    const std::size_t horizon = validation.horizon();
    double w = 0.0;
    std::size_t steps = 0;
    for (std::size_t t = 1; t <= horizon; ++t) {
        Samples cand;
        Samples obs;
        for (std::size_t j = 0; j < nv; ++j) {
            if (observed[j].size() <= t) continue;
            obs.push_back(observed[j][t]);
            for (std::size_t m = 0; m < mc; ++m) cand.push_back(sims[j][m][t]);
        }
        if (obs.empty()) continue;
        w += wasserstein1_pooled(cand, obs);
        ++steps;
    }
    report.wasserstein = steps == 0 ? 0.0 : w / static_cast<double>(steps);

    Samples flat_sim;
    Samples flat_obs;
    for (std::size_t j = 0; j < nv; ++j) {
        if (observed[j].size() != horizon + 1) continue;
        flat_sim.push_back(flatten(sims[j][0]));
        flat_obs.push_back(flatten(observed[j]));
    }
    report.mmd = flat_obs.empty() ? 0.0 : mmd_rbf(flat_sim, flat_obs, config.mmd_bandwidth);

    for (auto v : viol) report.violations += v;
    return report;
}

DiagnosticReport diagnose(const dsl::StructuralConfig& config, const dsl::ParameterVector& params,
                          const Dataset& validation, const DiagnosticConfig& diag) {
    const auto values = params.values();
    return diagnose(dsl::make_simulator(config, std::vector<double>(values.begin(), values.end())), params,
                    validation, diag);
}

} // namespace gsim::metrics
