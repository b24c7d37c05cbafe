#pragma once

#include "gsim/dsl.hpp"
#include "gsim/envs.hpp"
#include "gsim/interpreter.hpp"
#include "gsim/sim.hpp"
#include "gsim/state.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace gsim::metrics {

/// Row-major sample matrix: one row per sample, one column per dimension.
using Samples = std::vector<std::vector<double>>;

/// Mean over dimensions of the 1-D W1 between equally sized sample sets.
/// Throws ShapeError on unequal counts or dimensions.
[[nodiscard]] double wasserstein1(const Samples& a, const Samples& b);

/// 1-D W1 between empirical distributions of any sizes (integral of |F_a^-1 - F_b^-1|).
/// Throws SizeError if either side is empty.
[[nodiscard]] double wasserstein1_1d(std::vector<double> a, std::vector<double> b);

/// Mean over dimensions of wasserstein1_1d; sets may differ in size.
[[nodiscard]] double wasserstein1_pooled(const Samples& a, const Samples& b);

/// Square root of the biased squared MMD with kernel exp(-|x-y|^2 / (2 sigma^2)). Without a
/// bandwidth the median pairwise distance of the joint sample is used (1 if that is 0).
/// Throws DomainError for sigma <= 0, SizeError for empty sets, ShapeError on dim mismatch.
[[nodiscard]] double mmd_rbf(const Samples& a, const Samples& b, std::optional<double> bandwidth = std::nullopt);
[[nodiscard]] double median_bandwidth(const Samples& a, const Samples& b);

struct NamedValue {
    std::string name;
    double value = 0.0;
    friend bool operator==(const NamedValue&, const NamedValue&) = default;
};

/// Column-wise mean squared error. Throws ShapeError on mismatched shapes or names.
[[nodiscard]] std::vector<NamedValue> mse_per_dim(const Samples& predicted, const Samples& observed,
                                                  const std::vector<std::string>& names);

/// Breaches summed over every state of the trajectory (init included): one per negative
/// counter, per occupancy above capacity, and per state whose conserved sum differs from
/// the initial one. Fields the trajectory does not carry are skipped.
[[nodiscard]] std::int64_t domain_violations(const Trajectory& trajectory, const envs::EnvRules& rules);

struct GraphScore {
    std::int64_t shd = 0;
    double f1 = 100.0;
};

/// Nodes are matched by name. Throws SchemaError when the node sets differ.
[[nodiscard]] GraphScore shd_f1(const dsl::DirectedGraph& predicted, const dsl::DirectedGraph& truth);

enum class StreamMode { Shared, Independent };

/// For each test trajectory with at least one step: N next-state samples from (x_0, u_0)
/// under each simulator, projected and compared with wasserstein1; averaged over
/// trajectories. Shared mode gives both simulators the same derived streams.
[[nodiscard]] double next_state_distance(const Simulator& a, const Simulator& b, const Dataset& test,
                                         std::size_t n = 1000, std::uint64_t seed = 0,
                                         StreamMode mode = StreamMode::Independent, std::size_t workers = 1);

struct DiagnosticConfig {
    double w_wasserstein = 1.0;
    double w_mse = 0.0;
    double w_mmd = 0.0;
    double w_violations = 0.0;
    std::size_t mc = 20;
    std::optional<envs::EnvRules> rules;
    std::optional<double> mmd_bandwidth;
    std::uint64_t seed = 0;
    std::size_t workers = 1;

    /// Throws ConfigError unless weights are nonnegative with one positive, and mc >= 1.
    void check() const;
};

struct DiagnosticReport {
    double wasserstein = 0.0;
    std::vector<NamedValue> mse;
    double mmd = 0.0;
    std::int64_t violations = 0;
    dsl::ParameterVector params;
    std::string notes;

    [[nodiscard]] double aggregate(const DiagnosticConfig& config) const;
    /// "key=value" lines: wass, mse.<dim>, mmd, violations, param.<name>.
    [[nodiscard]] std::string to_kv() const;
    [[nodiscard]] std::vector<std::string> csv_header() const;
    [[nodiscard]] std::vector<std::string> csv_values() const;
};

/// Observation matrix of a trajectory, one row per time step (init first).
[[nodiscard]] Samples observe_trajectory(const Trajectory& trajectory, const ProjectionSpec& projection);

/// Rolls the simulator mc times from each validation trajectory (logged actions) and
/// compares with the observations: MSE of the MC mean, W1 pooled per time step and averaged
/// over t = 1..T, MMD between first-replicate and observed flattened trajectories, and
/// violations over the first replicates.
[[nodiscard]] DiagnosticReport diagnose(const Simulator& simulator, const dsl::ParameterVector& params,
                                        const Dataset& validation, const DiagnosticConfig& config);
[[nodiscard]] DiagnosticReport diagnose(const dsl::StructuralConfig& config, const dsl::ParameterVector& params,
                                        const Dataset& validation, const DiagnosticConfig& diag);

} // namespace gsim::metrics
