#pragma once

#include "gsim/rng.hpp"
#include "gsim/state.hpp"

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace gsim {

enum class OverrideOp { Set, Scale, Add };

/// Rewrites one named parameter while t_begin <= t < t_end.
struct ParamOverride {
    std::string param;
    OverrideOp op = OverrideOp::Set;
    double value = 0.0;
    std::int64_t t_begin = 0;
    std::int64_t t_end = std::numeric_limits<std::int64_t>::max();
};

/// Upper bound on a counter fed by pipeline deliveries; arriving units beyond it are discarded.
struct FieldCap {
    std::string field;
    std::int64_t cap = 0;
};

/// Intervention hooks understood by every simulator. Parameters that a simulator does
/// not declare are ignored.
struct Overrides {
    std::vector<ParamOverride> params;
    std::vector<FieldCap> caps;

    [[nodiscard]] bool empty() const noexcept { return params.empty() && caps.empty(); }
};

/// Applies the overrides active at time t to `values` (aligned with `names`).
void apply_overrides(std::span<const std::string> names, std::vector<double>& values, const Overrides* overrides,
                     std::int64_t t);
[[nodiscard]] std::optional<std::int64_t> field_cap(const Overrides* overrides, std::string_view field);

/// Everything a step needs besides state and action. Rule k at step t draws from
/// derive_stream(seed, prefix ++ [t, k]).
struct StepContext {
    std::uint64_t seed = 0;
    std::vector<std::uint32_t> prefix;
    std::int64_t t = 0;
    const Overrides* overrides = nullptr;

    [[nodiscard]] RngStream rule_stream(std::uint32_t rule) const;
};

using StepFn = std::function<SystemState(const SystemState&, const Action&, const StepContext&)>;
using PolicyFn = std::function<Action(const SystemState&, std::int64_t t, RngStream&)>;

/// Open-loop rollout over logged actions. Horizon 0 returns the init state only.
/// Step errors are rethrown with the step index added.
[[nodiscard]] Trajectory rollout(const StepFn& step, const SystemState& init, std::span<const Action> actions,
                                 std::uint64_t seed, std::span<const std::uint32_t> prefix,
                                 const Overrides* overrides = nullptr);

/// Closed-loop rollout; the policy at step t draws from derive_stream(seed, prefix ++ [t, kPolicyStream]).
[[nodiscard]] Trajectory rollout_policy(const StepFn& step, const SystemState& init, std::size_t horizon,
                                        const PolicyFn& policy, std::uint64_t seed,
                                        std::span<const std::uint32_t> prefix, const Overrides* overrides = nullptr);

inline constexpr std::uint32_t kPolicyStream = 0xFFFF;

/// A step function plus the map from a dataset state into the simulator's own schema
/// (identity when `prepare` is empty).
struct Simulator {
    StepFn step;
    std::function<SystemState(const SystemState&)> prepare;

    [[nodiscard]] SystemState init_from(const SystemState& data) const { return prepare ? prepare(data) : data; }
};

} // namespace gsim
