#pragma once

#include "gsim/dsl.hpp"
#include "gsim/sim.hpp"

#include <memory>
#include <span>
#include <string>
#include <vector>

namespace gsim::dsl {

/// A config compiled to index-resolved rules. Construction throws ConfigError when the
/// config does not validate. Copies share the compiled form and are thread-safe.
class Program {
  public:
    explicit Program(const StructuralConfig& config);

    /// One transition. Throws StepError naming the failing rule.
    [[nodiscard]] SystemState step(std::span<const double> params, const SystemState& state, const Action& action,
                                   const StepContext& ctx) const;

    [[nodiscard]] const StructuralConfig& config() const noexcept;

    struct Impl;

  private:
    std::shared_ptr<const Impl> impl_;
};

[[nodiscard]] SystemState step(const StructuralConfig& config, const ParameterVector& params,
                               const SystemState& state, const Action& action, const StepContext& ctx);

[[nodiscard]] Trajectory rollout(const StructuralConfig& config, const ParameterVector& params,
                                 const SystemState& init, std::span<const Action> actions, std::uint64_t seed,
                                 std::span<const std::uint32_t> prefix = {}, const Overrides* overrides = nullptr);

/// Step function bound to a program and parameter values.
[[nodiscard]] StepFn make_step_fn(const Program& program, std::vector<double> params);
[[nodiscard]] StepFn make_step_fn(const StructuralConfig& config, std::vector<double> params);

/// Simulator over a config; dataset states are adapted field by field (see envs::adapt_state).
[[nodiscard]] Simulator make_simulator(const StructuralConfig& config, std::vector<double> params);

/// Copies fields with matching name and kind from `data` into the config's initial state.
[[nodiscard]] SystemState adapt_state(const StructuralConfig& config, const SystemState& data);

/// adj[j][i] is true iff there is an edge nodes[j] -> nodes[i].
struct DirectedGraph {
    std::vector<std::string> nodes;
    std::vector<std::vector<bool>> adj;

    [[nodiscard]] std::size_t edge_count() const noexcept;
    [[nodiscard]] bool has_edge(std::string_view from, std::string_view to) const;
};

/// Edge j -> i iff some rule that writes field i reads field j. A rule reads the fields its
/// expressions mention plus every field it updates in place (Assign overwrites, so its
/// target is not read).
[[nodiscard]] DirectedGraph dependency_graph(const StructuralConfig& config);

} // namespace gsim::dsl
