#include "gsim/sim.hpp"

#include "gsim/errors.hpp"

namespace gsim {

void apply_overrides(std::span<const std::string> names, std::vector<double>& values, const Overrides* overrides,
                     std::int64_t t) {
    if (overrides == nullptr) return;
    for (const auto& o : overrides->params) {
        if (t < o.t_begin || t >= o.t_end) continue;
        for (std::size_t i = 0; i < names.size() && i < values.size(); ++i) {
            if (names[i] != o.param) continue;
            switch (o.op) {
            case OverrideOp::Set: values[i] = o.value; break;
            case OverrideOp::Scale: values[i] *= o.value; break;
            case OverrideOp::Add: values[i] += o.value; break;
            }
        }
    }
}

std::optional<std::int64_t> field_cap(const Overrides* overrides, std::string_view field) {
    if (overrides == nullptr) return std::nullopt;
    std::optional<std::int64_t> cap;
    for (const auto& c : overrides->caps) {
        if (c.field == field) cap = cap ? std::min(*cap, c.cap) : c.cap;
    }
    return cap;
}

RngStream StepContext::rule_stream(std::uint32_t rule) const {
    return RngStream::at(seed, prefix, {static_cast<std::uint32_t>(t), rule});
}

namespace {

SystemState checked_step(const StepFn& step, const SystemState& state, const Action& action, const StepContext& ctx) {
    try {
        return step(state, action, ctx);
    } catch (const StepError& e) {
        throw StepError(std::string(e.what()) + " (step " + std::to_string(ctx.t) + ")", e.rule_index());
    }
}

} // namespace

Trajectory rollout(const StepFn& step, const SystemState& init, std::span<const Action> actions, std::uint64_t seed,
                   std::span<const std::uint32_t> prefix, const Overrides* overrides) {
    Trajectory traj;
    traj.init = init;
    traj.steps.reserve(actions.size());
    StepContext ctx{seed, {prefix.begin(), prefix.end()}, 0, overrides};
    const SystemState* cur = &traj.init;
    for (std::size_t t = 0; t < actions.size(); ++t) {
        ctx.t = static_cast<std::int64_t>(t);
        traj.steps.push_back({actions[t], checked_step(step, *cur, actions[t], ctx)});
        cur = &traj.steps.back().next;
    }
    return traj;
}

Trajectory rollout_policy(const StepFn& step, const SystemState& init, std::size_t horizon, const PolicyFn& policy,
                          std::uint64_t seed, std::span<const std::uint32_t> prefix, const Overrides* overrides) {
    Trajectory traj;
    traj.init = init;
    traj.steps.reserve(horizon);
    StepContext ctx{seed, {prefix.begin(), prefix.end()}, 0, overrides};
    const SystemState* cur = &traj.init;
    for (std::size_t t = 0; t < horizon; ++t) {
        ctx.t = static_cast<std::int64_t>(t);
        RngStream prng = ctx.rule_stream(kPolicyStream);
        const Action a = policy ? policy(*cur, ctx.t, prng) : Action{};
        traj.steps.push_back({a, checked_step(step, *cur, a, ctx)});
        cur = &traj.steps.back().next;
    }
    return traj;
}

} // namespace gsim
