#pragma once

#include "gsim/dsl.hpp"
#include "gsim/sim.hpp"
#include "gsim/state.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace gsim::envs {

enum class EnvKind { Sir, Supply, Hospital };

[[nodiscard]] std::string_view to_string(EnvKind kind) noexcept;

/// A benchmark instance: ground-truth parameters, uniform priors, horizon and projection.
struct EnvSpec {
    std::string name;
    EnvKind kind = EnvKind::Sir;
    std::vector<std::string> param_names;
    std::vector<double> params;
    std::vector<double> lower;
    std::vector<double> upper;
    std::size_t horizon = 60;
    ProjectionSpec projection;
    /// Inventory ceiling that CapacityDelta extends (supply only).
    std::int64_t base_capacity = 10;

    [[nodiscard]] std::size_t param_index(std::string_view param) const;
    void set_param(std::string_view param, double value);
};

/// Presets: sir, supply, hospital, hospital-large. Throws ConfigError for unknown names.
[[nodiscard]] EnvSpec preset(std::string_view name);
[[nodiscard]] std::vector<std::string> preset_names();

// ---------------------------------------------------------------------------
// Hand-coded simulators. Rule-stream indices match the rule order of gt_config.

[[nodiscard]] SystemState sir_step(std::span<const double> params, const SystemState& state, const StepContext& ctx);
[[nodiscard]] SystemState supply_step(std::span<const double> params, const SystemState& state, const Action& action,
                                      const StepContext& ctx);
[[nodiscard]] SystemState hospital_step(std::span<const double> params, const SystemState& state,
                                        const StepContext& ctx);

/// Hand-coded step bound to the given parameters (spec.params when omitted). Parameter
/// overrides in the step context are applied by name.
[[nodiscard]] StepFn reference_step(const EnvSpec& spec);
[[nodiscard]] StepFn reference_step(const EnvSpec& spec, std::vector<double> params);
[[nodiscard]] Simulator reference_simulator(const EnvSpec& spec);

/// Initial-state distribution: SIR draws S0 ~ U{900..1000}, I0 ~ U{1..20}; supply starts at
/// inventory 20; the hospital starts empty.
[[nodiscard]] SystemState initial_state(const EnvSpec& spec, RngStream& rng);

// ---------------------------------------------------------------------------
// Ground-truth configs in the DSL

[[nodiscard]] std::string gt_config_text(const EnvSpec& spec);
[[nodiscard]] dsl::StructuralConfig gt_config(const EnvSpec& spec);
[[nodiscard]] dsl::StructuralConfig gt_config(std::string_view preset_name);

// ---------------------------------------------------------------------------
// Interventions

struct LockdownWindow {
    std::int64_t t_start = 0;
    std::int64_t t_end = 0;
    double alpha = 1.0;
};
struct LeadTimeOverride {
    std::int64_t lead = 1;
};
/// Extra beds (hospital, added to standard capacity) or extra inventory room (supply).
struct CapacityDelta {
    std::int64_t delta = 0;
};
struct ArrivalScale {
    double factor = 0.3;
    std::int64_t t_start = 0;
    std::int64_t t_end = 0;
};
using Intervention = std::variant<LockdownWindow, LeadTimeOverride, CapacityDelta, ArrivalScale>;

/// Throws ConfigError for invalid windows or values, or interventions the env does not support.
[[nodiscard]] Overrides to_overrides(const EnvSpec& spec, std::span<const Intervention> interventions);

// ---------------------------------------------------------------------------
// Policies and datasets

struct PolicySpec {
    enum class Kind { None, Constant, UniformRandom, BaseStock };
    Kind kind = Kind::None;
    std::int64_t a = 0; // constant value, uniform low, or base-stock level
    std::int64_t b = 0; // uniform high
};

/// "none", "constant:K", "uniform:LO:HI", "base-stock:S". Throws ConfigError.
[[nodiscard]] PolicySpec parse_policy(std::string_view text);
[[nodiscard]] std::string to_string(const PolicySpec& policy);
[[nodiscard]] PolicySpec default_policy(const EnvSpec& spec);
/// Base-stock orders up to S on inventory position (inventory + pipeline - backlog).
[[nodiscard]] PolicyFn make_policy(const PolicySpec& policy);

/// Trajectory i starts from initial_state(spec, stream(seed, [2, i])) and steps with
/// prefix [1, i].
[[nodiscard]] Dataset generate_dataset(const EnvSpec& spec, std::size_t n, std::size_t horizon,
                                       const PolicySpec& policy, std::uint64_t seed, std::size_t workers = 1,
                                       const Overrides* overrides = nullptr);
[[nodiscard]] Dataset generate_with(const StepFn& step, const EnvSpec& spec, std::size_t n, std::size_t horizon,
                                    const PolicySpec& policy, std::uint64_t seed, std::size_t workers = 1,
                                    const Overrides* overrides = nullptr);

// ---------------------------------------------------------------------------
// Domain rules

struct CapacityRule {
    std::string occupancy;
    double capacity = 0.0;
};

struct EnvRules {
    std::vector<std::string> nonnegative;
    std::vector<CapacityRule> capacities;
    std::vector<std::string> conserved_sum; // empty: no conservation rule
};

[[nodiscard]] EnvRules env_rules(const EnvSpec& spec);

} // namespace gsim::envs
