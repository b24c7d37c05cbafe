#pragma once

#include "gsim/dsl.hpp"
#include "gsim/sim.hpp"
#include "gsim/state.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace gsim::sbi {

struct SbiSettings {
    std::size_t budget = 1000;
    double accept_fraction = 0.05;
    std::size_t workers = 1;

    /// Throws ConfigError unless accept_fraction is in (0, 1] and budget * accept_fraction >= 10.
    void check() const;
    [[nodiscard]] std::size_t accept_count() const;
};

struct PosteriorSamples {
    std::vector<std::string> names;
    std::vector<std::vector<double>> accepted;
    std::vector<double> distances; // parallel to accepted, ascending
    std::vector<std::size_t> draw_index;
    double threshold = 0.0;
};

struct SbiResult {
    PosteriorSamples posterior;
    std::vector<double> point_estimate;
};

/// Observations at steps 1..T concatenated (t then dimension).
[[nodiscard]] std::vector<double> flatten_rollout(const Trajectory& trajectory, const ProjectionSpec& projection);

using SimulatorFactory = std::function<Simulator(std::span<const double>)>;

struct Prior {
    std::vector<std::string> names;
    std::vector<double> lower;
    std::vector<double> upper;
};

/// Rejection ABC. Draw k comes from stream (seed, [8, k]), is paired with training trajectory
/// k mod n and rolled out under prefix [9, k] with that trajectory's actions. Distances are
/// Euclidean after per-coordinate standardization over the training set (stdev floored at
/// 1e-9). The accept_count() nearest draws are kept, ties broken by draw index; the point
/// estimate is their mean clipped to the prior bounds.
[[nodiscard]] SbiResult run_sbi(const SimulatorFactory& factory, const Prior& prior, const Dataset& train,
                                const SbiSettings& settings, std::uint64_t seed);
[[nodiscard]] SbiResult run_sbi(const dsl::StructuralConfig& config, const Dataset& train,
                                const SbiSettings& settings, std::uint64_t seed);

struct VarianceFlags {
    std::vector<bool> flags;
    std::vector<double> variances;
    std::vector<double> thresholds;
};

/// flag_i iff the unbiased sample variance of coordinate i exceeds thresholds[i].
/// Throws SizeError with fewer than 2 samples.
[[nodiscard]] VarianceFlags variance_flags(const PosteriorSamples& samples, std::span<const double> thresholds);
/// Default thresholds: half the variance of each uniform prior, (hi - lo)^2 / 24.
[[nodiscard]] std::vector<double> default_thresholds(std::span<const double> lower, std::span<const double> upper);

/// One row per accepted sample: parameter columns then "distance".
[[nodiscard]] std::string posterior_csv(const PosteriorSamples& samples);

} // namespace gsim::sbi
