#pragma once

#include "gsim/dsl.hpp"
#include "gsim/interpreter.hpp"
#include "gsim/rng.hpp"
#include "gsim/sim.hpp"
#include "gsim/state.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace gsim::gfo {

struct GaSettings {
    std::size_t population = 200;
    std::size_t generations = 10;
    std::size_t tournament_k = 4;
    double crossover_rate = 1.0;
    double sbx_eta = 8.0;
    double mutation_stdev = 0.03; // in normalized [0,1] coordinates
    std::size_t mc_draws = 200;
    std::size_t elitism = 1;
    std::size_t workers = 1;

    /// Throws ConfigError for out-of-range settings.
    void check() const;
};

/// Returned for rollouts that fail or produce non-finite errors.
inline constexpr double kPenaltyFitness = 1e12;

/// Mean over training trajectories of the MSE (over steps 1..T and dimensions) between the
/// pointwise mean of M rollouts under the logged actions and the observed trajectory.
/// Rollout m of trajectory i draws from prefix [6, i, m] under `seed`.
[[nodiscard]] double fitness(const Simulator& simulator, const Dataset& train, std::size_t m, std::uint64_t seed,
                             std::size_t workers = 1);
[[nodiscard]] double fitness(const dsl::Program& program, std::span<const double> params, const Dataset& train,
                             std::size_t m, std::uint64_t seed, std::size_t workers = 1);

/// SBX spread factor for a uniform draw u.
[[nodiscard]] double sbx_spread(double u, double eta);

/// SBX on coordinates already in [0,1]; clipping back into [0,1] can be switched off.
[[nodiscard]] std::pair<std::vector<double>, std::vector<double>>
sbx_normalized(std::span<const double> a, std::span<const double> b, double eta, RngStream& rng, bool clip = true);

/// SBX in the coordinates normalized by [lower, upper]; children are clipped to bounds.
[[nodiscard]] std::pair<std::vector<double>, std::vector<double>>
sbx_crossover(std::span<const double> a, std::span<const double> b, double eta, RngStream& rng,
              std::span<const double> lower, std::span<const double> upper);

/// Adds N(0, stdev) per normalized coordinate, clips to [0,1] and maps back.
[[nodiscard]] std::vector<double> gaussian_mutate(std::span<const double> params, double stdev,
                                                  std::span<const double> lower, std::span<const double> upper,
                                                  RngStream& rng);

struct GenerationStats {
    std::size_t generation = 0;
    double best = 0.0;
    double mean = 0.0;
};

struct EsResult {
    std::vector<double> best;
    double best_fitness = 0.0;
    std::vector<GenerationStats> history; // generation 0 is the initial population
    std::size_t evaluations = 0;
};

using FitnessFn = std::function<double(std::span<const double>)>;

struct Problem {
    std::vector<double> lower;
    std::vector<double> upper;
    std::optional<std::vector<double>> defaults;
};

/// Generic GA: the initial population is uniform within bounds with slot 0 holding the
/// defaults and slot 1 the warm start (when given). Fitness must be deterministic; the
/// function is called concurrently when settings.workers > 1.
[[nodiscard]] EsResult minimize(const FitnessFn& fn, const Problem& problem, const GaSettings& settings,
                                const std::optional<std::vector<double>>& warm_start, std::uint64_t seed);

/// GA over the config's declared parameters with the Monte-Carlo fitness on `train`. All
/// individuals share one MC seed so fitness is a deterministic function of the parameters.
[[nodiscard]] EsResult calibrate_es(const dsl::StructuralConfig& config, const Dataset& train,
                                    const GaSettings& settings, const std::optional<std::vector<double>>& warm_start,
                                    std::uint64_t seed);

/// "generation,best,mean" rows.
[[nodiscard]] std::string history_csv(const EsResult& result);

} // namespace gsim::gfo
