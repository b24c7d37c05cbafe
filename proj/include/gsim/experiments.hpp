#pragma once

#include "gsim/envs.hpp"
#include "gsim/sim.hpp"
#include "gsim/state.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace gsim::experiments {

// Every experiment rolls simulator replicate m from initial_state(spec, stream(seed, [11, m]))
// under prefix [12, m]. Replicates are shared across scenarios and across simulators, so
// scenarios differ only through their interventions.

/// One closed-loop rollout with the given interventions (policy applies to supply only).
[[nodiscard]] Trajectory replicate(const envs::EnvSpec& spec, const Simulator& sim, const Overrides* overrides,
                                   std::size_t horizon, const envs::PolicySpec& policy, std::uint64_t seed,
                                   std::size_t m);

// ---------------------------------------------------------------------------
// SIR lockdown curves

struct LockdownSpec {
    std::vector<double> alphas{0.05, 0.1, 0.15, 0.3};
    std::int64_t t_start = 0;
    std::int64_t t_end = 30;
    std::size_t mc = 200;
    std::size_t horizon = 0; // 0: spec.horizon
};

struct Curve {
    std::optional<double> alpha; // empty for the baseline
    std::vector<std::vector<double>> mean; // [t][dimension]

    [[nodiscard]] double peak(std::size_t dim) const;
    /// First time the peak is attained.
    [[nodiscard]] std::size_t peak_time(std::size_t dim) const;
};

struct LockdownResult {
    std::vector<std::string> dims;
    Curve baseline;
    std::vector<Curve> curves; // in LockdownSpec::alphas order

    /// "alpha,t,<dims>" with alpha "none" for the baseline rows.
    [[nodiscard]] std::string csv() const;
};

/// Throws ConfigError for alphas outside [0, 1] or a window outside [0, horizon].
[[nodiscard]] LockdownResult lockdown_sir(const envs::EnvSpec& spec, const Simulator& sim, const LockdownSpec& ls,
                                          std::uint64_t seed, std::size_t workers = 1);

// ---------------------------------------------------------------------------
// Hospital policy grid

struct GridSpec {
    std::vector<std::int64_t> taus;   // lockdown start days
    std::vector<std::int64_t> deltas; // extra standard beds
    std::int64_t duration = 20;
    double bed_cost = 10.0;
    double lockdown_day_cost = 20.0;
    double arrival_factor = 0.3;
    std::size_t mc = 20;
    std::size_t horizon = 120;

    /// taus 0, 5, ..., 95 and deltas 0, 500, ..., 9500.
    [[nodiscard]] static GridSpec defaults();
    void check() const;
};

struct GridCell {
    std::int64_t tau = 0;
    std::int64_t delta = 0;
    double overflow = 0.0; // mean cumulative turned-away count
    double cost = 0.0;
};

struct GridResult {
    std::vector<GridCell> cells; // taus outer, deltas inner
    std::size_t argmin = 0;

    /// "tau,delta_beds,overflow,cost,is_argmin".
    [[nodiscard]] std::string csv() const;
    [[nodiscard]] const GridCell& best() const { return cells.at(argmin); }
};

/// Mean final `overflow` under a lockdown starting at tau plus delta extra beds.
[[nodiscard]] double hospital_overflow(const envs::EnvSpec& spec, const Simulator& sim, std::int64_t tau,
                                       std::int64_t delta, const GridSpec& grid, std::uint64_t seed,
                                       std::size_t workers = 1);
[[nodiscard]] double grid_cost(double overflow, std::int64_t delta, const GridSpec& grid);
/// Ties go to the smaller delta, then the smaller tau.
[[nodiscard]] std::size_t grid_argmin(const std::vector<GridCell>& cells);
[[nodiscard]] GridResult policy_grid_hospital(const envs::EnvSpec& spec, const Simulator& sim, const GridSpec& grid,
                                              std::uint64_t seed, std::size_t workers = 1);

// ---------------------------------------------------------------------------
// Supply cost heatmap and lead-time sweeps

struct HeatmapSpec {
    std::vector<std::int64_t> capacity_deltas{0, 5, 10, 15, 20, 25, 30};
    std::vector<std::int64_t> leads{1, 2, 3, 4, 5, 6};
    std::optional<double> c_hold; // default: the env's holding_cost
    std::optional<double> c_back; // default: the env's backlog_cost
    double c_cap = 0.1;
    envs::PolicySpec policy{envs::PolicySpec::Kind::BaseStock, 20, 0};
    std::size_t mc = 200;
    std::size_t horizon = 0;

    void check() const;
};

struct HeatmapCell {
    std::int64_t capacity_delta = 0;
    std::int64_t lead = 0;
    double holding = 0.0; // mean sum of c_hold * inventory over steps 1..T
    double backlog = 0.0; // mean sum of c_back * backlog over steps 1..T
    double cost = 0.0;
};

struct HeatmapResult {
    std::vector<HeatmapCell> cells; // capacity deltas outer, leads inner
    /// "capacity_delta,lead,holding,backlog,cost".
    [[nodiscard]] std::string csv() const;
};

[[nodiscard]] HeatmapResult heatmap_supply(const envs::EnvSpec& spec, const Simulator& sim, const HeatmapSpec& hs,
                                           std::uint64_t seed, std::size_t workers = 1);

struct LeadtimeSpec {
    std::vector<std::int64_t> leads{1, 2, 3, 4, 5, 6};
    envs::PolicySpec policy{envs::PolicySpec::Kind::BaseStock, 20, 0};
    std::size_t mc = 200;
    std::size_t horizon = 0;
};

struct LeadtimeResult {
    std::vector<std::int64_t> leads;
    std::vector<std::vector<double>> gt_mean;        // [lead][t] mean backlog
    std::vector<std::vector<double>> candidate_mean; // [lead][t]
    /// Per lead: 1-D W1 between the two simulators' backlog samples, averaged over t = 1..T.
    std::vector<double> pooled_w1;

    /// "lead,t,gt_backlog,candidate_backlog".
    [[nodiscard]] std::string csv() const;
    /// "lead,gt_terminal,candidate_terminal,gt_peak,pooled_w1".
    [[nodiscard]] std::string summary_csv() const;
};

[[nodiscard]] LeadtimeResult leadtime_ood(const envs::EnvSpec& spec, const Simulator& gt, const Simulator& candidate,
                                          const LeadtimeSpec& ls, std::uint64_t seed, std::size_t workers = 1);

} // namespace gsim::experiments
