#include "gsim/sbi.hpp"

#include "gsim/errors.hpp"
#include "gsim/interpreter.hpp"
#include "gsim/parallel.hpp"
#include "gsim/rng.hpp"
#include "gsim/text.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace gsim::sbi {

void SbiSettings::check() const {
    if (!(accept_fraction > 0.0 && accept_fraction <= 1.0)) throw ConfigError("accept_fraction must lie in (0, 1]");
    if (static_cast<double>(budget) * accept_fraction < 10.0) {
        throw ConfigError("budget * accept_fraction must be at least 10");
    }
}

std::size_t SbiSettings::accept_count() const {
    const auto n = static_cast<std::size_t>(std::llround(static_cast<double>(budget) * accept_fraction));
    return std::clamp<std::size_t>(n, 1, budget);
}

std::vector<double> flatten_rollout(const Trajectory& trajectory, const ProjectionSpec& projection) {
    std::vector<double> out;
    out.reserve(trajectory.horizon() * projection.arity());
    for (const auto& st : trajectory.steps) {
        const auto o = observe(st.next, projection);
        out.insert(out.end(), o.begin(), o.end());
    }
    return out;
}

SbiResult run_sbi(const SimulatorFactory& factory, const Prior& prior, const Dataset& train,
                  const SbiSettings& settings, std::uint64_t seed) {
    settings.check();
    if (train.size() == 0) throw SizeError("run_sbi: empty training set");
    const std::size_t dim = prior.lower.size();

    std::vector<std::vector<double>> observed;
    for (const auto& tr : train.trajectories) observed.push_back(flatten_rollout(tr, train.projection));
    const std::size_t len = observed.front().size();
    for (const auto& o : observed) {
        if (o.size() != len) throw ShapeError("run_sbi: training trajectories differ in length");
    }
    std::vector<double> mean(len, 0.0);
    std::vector<double> sd(len, 0.0);
    for (const auto& o : observed) {
        for (std::size_t c = 0; c < len; ++c) mean[c] += o[c];
    }
    for (auto& m : mean) m /= static_cast<double>(observed.size());
    for (const auto& o : observed) {
        for (std::size_t c = 0; c < len; ++c) sd[c] += (o[c] - mean[c]) * (o[c] - mean[c]);
    }
    for (auto& s : sd) s = std::max(1e-9, std::sqrt(s / static_cast<double>(observed.size())));

    std::vector<std::vector<double>> draws(settings.budget, std::vector<double>(dim));
    std::vector<double> dist(settings.budget, std::numeric_limits<double>::infinity());
    parallel_for(settings.budget, settings.workers, [&](std::size_t k) {
        RngStream rng(seed, {8, static_cast<std::uint32_t>(k)});
        for (std::size_t i = 0; i < dim; ++i) {
            draws[k][i] = prior.lower[i] + rng.uniform01() * (prior.upper[i] - prior.lower[i]);
        }
        const std::size_t j = k % train.size();
        const Trajectory& tr = train.trajectories[j];
        try {
            const Simulator sim = factory(draws[k]);
            const std::uint32_t prefix[] = {9, static_cast<std::uint32_t>(k)};
            const auto actions = tr.actions();
            const auto sim_obs = flatten_rollout(rollout(sim.step, sim.init_from(tr.init), actions, seed, prefix),
                                                 train.projection);
            if (sim_obs.size() != len) return;
            double s = 0.0;
            for (std::size_t c = 0; c < len; ++c) {
                const double z = (sim_obs[c] - observed[j][c]) / sd[c];
                s += z * z;
            }
            dist[k] = std::isfinite(s) ? std::sqrt(s) : std::numeric_limits<double>::infinity();
        } catch (const Error&) {
        }
    });

    std::vector<std::size_t> order(settings.budget);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return dist[a] < dist[b]; });

    SbiResult result;
    auto& post = result.posterior;
    post.names = prior.names;
    const std::size_t keep = settings.accept_count();
    for (std::size_t r = 0; r < keep; ++r) {
        post.accepted.push_back(draws[order[r]]);
        post.distances.push_back(dist[order[r]]);
        post.draw_index.push_back(order[r]);
    }
    post.threshold = post.distances.back();

    result.point_estimate.assign(dim, 0.0);
    for (const auto& a : post.accepted) {
        for (std::size_t i = 0; i < dim; ++i) result.point_estimate[i] += a[i];
    }
    for (std::size_t i = 0; i < dim; ++i) {
        result.point_estimate[i] = std::clamp(result.point_estimate[i] / static_cast<double>(keep), prior.lower[i],
                                              prior.upper[i]);
    }
    return result;
}

SbiResult run_sbi(const dsl::StructuralConfig& config, const Dataset& train, const SbiSettings& settings,
                  std::uint64_t seed) {
    const dsl::Program program(config);
    const SimulatorFactory factory = [&](std::span<const double> p) {
        Simulator sim;
        sim.step = dsl::make_step_fn(program, std::vector<double>(p.begin(), p.end()));
        sim.prepare = [&config](const SystemState& s) { return dsl::adapt_state(config, s); };
        return sim;
    };
    return run_sbi(factory, Prior{config.param_names(), config.lower_bounds(), config.upper_bounds()}, train,
                   settings, seed);
}

VarianceFlags variance_flags(const PosteriorSamples& samples, std::span<const double> thresholds) {
    const std::size_t n = samples.accepted.size();
    if (n < 2) throw SizeError("variance_flags: need at least 2 samples");
    const std::size_t dim = samples.accepted.front().size();
    if (thresholds.size() != dim) throw ShapeError("variance_flags: one threshold per parameter required");
    VarianceFlags out;
    out.thresholds.assign(thresholds.begin(), thresholds.end());
    for (std::size_t i = 0; i < dim; ++i) {
        double m = 0.0;
        for (const auto& a : samples.accepted) m += a[i];
        m /= static_cast<double>(n);
        double v = 0.0;
        for (const auto& a : samples.accepted) v += (a[i] - m) * (a[i] - m);
        v /= static_cast<double>(n - 1);
        out.variances.push_back(v);
        out.flags.push_back(v > thresholds[i]);
    }
    return out;
}

std::vector<double> default_thresholds(std::span<const double> lower, std::span<const double> upper) {
    std::vector<double> t(lower.size());
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = (upper[i] - lower[i]) * (upper[i] - lower[i]) / 24.0;
    return t;
}

std::string posterior_csv(const PosteriorSamples& samples) {
    std::vector<std::string> header = samples.names;
    header.emplace_back("distance");
    std::string out = csv_row(header);
    for (std::size_t r = 0; r < samples.accepted.size(); ++r) {
        std::vector<std::string> row;
        for (double x : samples.accepted[r]) row.push_back(format_number(x));
        row.push_back(format_number(samples.distances[r]));
        out += csv_row(row);
    }
    return out;
}

} // namespace gsim::sbi
