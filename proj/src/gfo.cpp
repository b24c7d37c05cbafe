#include "gsim/gfo.hpp"

#include "gsim/errors.hpp"
#include "gsim/interpreter.hpp"
#include "gsim/parallel.hpp"
#include "gsim/text.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace gsim::gfo {

namespace {

double normalize(double x, double lo, double hi) { return hi > lo ? (x - lo) / (hi - lo) : 0.0; }
double denormalize(double z, double lo, double hi) { return hi > lo ? lo + z * (hi - lo) : lo; }

std::vector<double> to_unit(std::span<const double> x, std::span<const double> lo, std::span<const double> hi) {
    std::vector<double> z(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) z[k] = normalize(x[k], lo[k], hi[k]);
    return z;
}

std::vector<double> from_unit(std::span<const double> z, std::span<const double> lo, std::span<const double> hi) {
    std::vector<double> x(z.size());
    for (std::size_t k = 0; k < z.size(); ++k) x[k] = std::clamp(denormalize(z[k], lo[k], hi[k]), lo[k], hi[k]);
    return x;
}

double trajectory_mse(const Simulator& sim, const Trajectory& tr, const ProjectionSpec& proj, std::size_t m,
                      std::uint64_t seed, std::uint32_t index) {
    const std::size_t horizon = tr.horizon();
    if (horizon == 0) return 0.0;
    const std::size_t d = proj.arity();
    const SystemState init = sim.init_from(tr.init);
    Observer observer(proj);
    std::vector<double> mean(horizon * d, 0.0);
    std::vector<double> o(d);
    StepContext ctx{seed, {6, index, 0}, 0, nullptr};
    for (std::size_t r = 0; r < m; ++r) {
        ctx.prefix[2] = static_cast<std::uint32_t>(r);
        SystemState cur = init;
        for (std::size_t t = 0; t < horizon; ++t) {
            ctx.t = static_cast<std::int64_t>(t);
            cur = sim.step(cur, tr.steps[t].action, ctx);
            observer.observe_into(cur, o);
            for (std::size_t k = 0; k < d; ++k) mean[t * d + k] += o[k];
        }
    }
    Observer data_observer(proj);
    double s = 0.0;
    for (std::size_t t = 0; t < horizon; ++t) {
        data_observer.observe_into(tr.steps[t].next, o);
        for (std::size_t k = 0; k < d; ++k) {
            const double e = mean[t * d + k] / static_cast<double>(m) - o[k];
            s += e * e;
        }
    }
    return s / static_cast<double>(horizon * d);
}

std::size_t tournament(const std::vector<double>& fit, std::size_t k, RngStream& rng) {
    std::size_t best = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(fit.size()) - 1));
    for (std::size_t i = 1; i < k; ++i) {
        const auto c = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(fit.size()) - 1));
        if (fit[c] < fit[best] || (fit[c] == fit[best] && c < best)) best = c;
    }
    return best;
}

GenerationStats stats(std::size_t g, const std::vector<double>& fit) {
    GenerationStats s{g, *std::min_element(fit.begin(), fit.end()), 0.0};
    s.mean = std::accumulate(fit.begin(), fit.end(), 0.0) / static_cast<double>(fit.size());
    return s;
}

} // namespace

void GaSettings::check() const {
    if (population < 2) throw ConfigError("GA population must be at least 2");
    if (tournament_k < 1) throw ConfigError("tournament size must be at least 1");
    if (!(crossover_rate >= 0.0 && crossover_rate <= 1.0)) throw ConfigError("crossover rate must lie in [0, 1]");
    if (!(sbx_eta >= 0.0)) throw ConfigError("SBX eta must be nonnegative");
    if (!(mutation_stdev >= 0.0)) throw ConfigError("mutation stdev must be nonnegative");
    if (mc_draws < 1) throw ConfigError("mc draws must be at least 1");
    if (elitism >= population) throw ConfigError("elitism must be smaller than the population");
}

double fitness(const Simulator& simulator, const Dataset& train, std::size_t m, std::uint64_t seed,
               std::size_t workers) {
    if (m == 0) throw ConfigError("fitness needs at least one Monte-Carlo draw");
    if (train.size() == 0) throw SizeError("fitness: empty training set");
    std::vector<double> per(train.size(), 0.0);
    try {
        parallel_for(train.size(), workers, [&](std::size_t i) {
            per[i] = trajectory_mse(simulator, train.trajectories[i], train.projection, m, seed,
                                    static_cast<std::uint32_t>(i));
        });
    } catch (const Error&) {
        return kPenaltyFitness;
    }
    const double f = std::accumulate(per.begin(), per.end(), 0.0) / static_cast<double>(per.size());
    return std::isfinite(f) ? std::min(f, kPenaltyFitness) : kPenaltyFitness;
}

double fitness(const dsl::Program& program, std::span<const double> params, const Dataset& train, std::size_t m,
               std::uint64_t seed, std::size_t workers) {
    Simulator sim;
    sim.step = dsl::make_step_fn(program, std::vector<double>(params.begin(), params.end()));
    const dsl::StructuralConfig& cfg = program.config();
    sim.prepare = [&cfg](const SystemState& s) { return dsl::adapt_state(cfg, s); };
    return fitness(sim, train, m, seed, workers);
}

double sbx_spread(double u, double eta) {
    const double e = 1.0 / (eta + 1.0);
    return u <= 0.5 ? std::pow(2.0 * u, e) : std::pow(1.0 / (2.0 * (1.0 - u)), e);
}

std::pair<std::vector<double>, std::vector<double>> sbx_normalized(std::span<const double> a,
                                                                   std::span<const double> b, double eta,
                                                                   RngStream& rng, bool clip) {
    if (a.size() != b.size()) throw ShapeError("sbx: parents differ in length");
    std::vector<double> c1(a.size());
    std::vector<double> c2(a.size());
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double bq = sbx_spread(rng.uniform01(), eta);
        if (a[k] == b[k]) {
            c1[k] = c2[k] = a[k];
            continue;
        }
        c1[k] = 0.5 * ((1.0 + bq) * a[k] + (1.0 - bq) * b[k]);
        c2[k] = 0.5 * ((1.0 - bq) * a[k] + (1.0 + bq) * b[k]);
        if (clip) {
            c1[k] = std::clamp(c1[k], 0.0, 1.0);
            c2[k] = std::clamp(c2[k], 0.0, 1.0);
        }
    }
    return {std::move(c1), std::move(c2)};
}

std::pair<std::vector<double>, std::vector<double>> sbx_crossover(std::span<const double> a,
                                                                  std::span<const double> b, double eta,
                                                                  RngStream& rng, std::span<const double> lower,
                                                                  std::span<const double> upper) {
    auto [c1, c2] = sbx_normalized(to_unit(a, lower, upper), to_unit(b, lower, upper), eta, rng, true);
    return {from_unit(c1, lower, upper), from_unit(c2, lower, upper)};
}

std::vector<double> gaussian_mutate(std::span<const double> params, double stdev, std::span<const double> lower,
                                    std::span<const double> upper, RngStream& rng) {
    if (stdev == 0.0) return {params.begin(), params.end()};
    auto z = to_unit(params, lower, upper);
    for (auto& x : z) x = std::clamp(x + rng.normal(0.0, stdev), 0.0, 1.0);
    return from_unit(z, lower, upper);
}

EsResult minimize(const FitnessFn& fn, const Problem& problem, const GaSettings& settings,
                  const std::optional<std::vector<double>>& warm_start, std::uint64_t seed) {
    settings.check();
    const std::size_t dim = problem.lower.size();
    if (problem.upper.size() != dim) throw ShapeError("GA bounds differ in length");
    for (std::size_t k = 0; k < dim; ++k) {
        if (problem.lower[k] > problem.upper[k]) throw ConfigError("GA bounds have lower > upper");
    }
    auto inside = [&](const std::vector<double>& x) {
        if (x.size() != dim) throw ShapeError("GA seed vector has the wrong length");
        std::vector<double> y(dim);
        for (std::size_t k = 0; k < dim; ++k) y[k] = std::clamp(x[k], problem.lower[k], problem.upper[k]);
        return y;
    };

    const std::size_t n = settings.population;
    std::vector<std::vector<double>> pop(n);
    {
        RngStream rng(seed, {7, 0});
        for (auto& x : pop) {
            x.resize(dim);
            for (std::size_t k = 0; k < dim; ++k) {
                x[k] = problem.lower[k] + rng.uniform01() * (problem.upper[k] - problem.lower[k]);
            }
        }
    }
    if (problem.defaults) pop[0] = inside(*problem.defaults);
    if (warm_start) pop[1] = inside(*warm_start);

    EsResult result;
    std::vector<double> fit(n, 0.0);
    auto evaluate = [&](std::size_t from) {
        parallel_for(n - from, settings.workers, [&](std::size_t i) {
            const double f = fn(pop[from + i]);
            fit[from + i] = std::isfinite(f) ? f : kPenaltyFitness;
        });
        result.evaluations += n - from;
    };
    evaluate(0);
    result.history.push_back(stats(0, fit));

    for (std::size_t g = 1; g <= settings.generations; ++g) {
        RngStream rng(seed, {7, static_cast<std::uint32_t>(g)});
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fit[a] < fit[b]; });

        std::vector<std::vector<double>> next;
        std::vector<double> next_fit;
        next.reserve(n);
        for (std::size_t e = 0; e < settings.elitism; ++e) {
            next.push_back(pop[order[e]]);
            next_fit.push_back(fit[order[e]]);
        }
        while (next.size() < n) {
            const auto& pa = pop[tournament(fit, settings.tournament_k, rng)];
            const auto& pb = pop[tournament(fit, settings.tournament_k, rng)];
            std::vector<double> c1 = pa;
            std::vector<double> c2 = pb;
            if (rng.uniform01() < settings.crossover_rate) {
                std::tie(c1, c2) = sbx_crossover(pa, pb, settings.sbx_eta, rng, problem.lower, problem.upper);
            }
            next.push_back(gaussian_mutate(c1, settings.mutation_stdev, problem.lower, problem.upper, rng));
            if (next.size() < n) {
                next.push_back(gaussian_mutate(c2, settings.mutation_stdev, problem.lower, problem.upper, rng));
            }
        }
        pop = std::move(next);
        std::copy(next_fit.begin(), next_fit.end(), fit.begin());
        evaluate(settings.elitism);
        result.history.push_back(stats(g, fit));
    }

    const auto best = static_cast<std::size_t>(std::min_element(fit.begin(), fit.end()) - fit.begin());
    result.best = pop[best];
    result.best_fitness = fit[best];
    return result;
}

EsResult calibrate_es(const dsl::StructuralConfig& config, const Dataset& train, const GaSettings& settings,
                      const std::optional<std::vector<double>>& warm_start, std::uint64_t seed) {
    const dsl::Program program(config);
    const std::uint64_t mc_seed = derive_seed(seed, {6});
    Problem problem{config.lower_bounds(), config.upper_bounds(), config.defaults()};
    if (config.params.empty()) {
        EsResult r;
        r.best_fitness = fitness(program, {}, train, settings.mc_draws, mc_seed);
        r.history.push_back({0, r.best_fitness, r.best_fitness});
        r.evaluations = 1;
        return r;
    }
    const FitnessFn fn = [&](std::span<const double> p) {
        return fitness(program, p, train, settings.mc_draws, mc_seed);
    };
    return minimize(fn, problem, settings, warm_start, seed);
}

std::string history_csv(const EsResult& result) {
    std::string out = "generation,best,mean\n";
    for (const auto& h : result.history) {
        out += csv_row({std::to_string(h.generation), format_number(h.best), format_number(h.mean)});
    }
    return out;
}

} // namespace gsim::gfo
