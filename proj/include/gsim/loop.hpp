#pragma once

#include "gsim/envs.hpp"
#include "gsim/gfo.hpp"
#include "gsim/llm.hpp"
#include "gsim/metrics.hpp"
#include "gsim/sbi.hpp"
#include "gsim/state.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace gsim::loop {

enum class Calibrator { Es, Sbi, None };
enum class Mode { Full, ZeroShot, ZeroShotOptim };
enum class StopReason { Budget, EarlyStop, ProviderFailure };

[[nodiscard]] std::string_view to_string(Calibrator c) noexcept;
[[nodiscard]] std::string_view to_string(Mode m) noexcept;
[[nodiscard]] std::string_view to_string(StopReason r) noexcept;
/// "es", "sbi", "none". Throws ConfigError.
[[nodiscard]] Calibrator parse_calibrator(std::string_view text);
/// "full", "zeroshot", "zeroshot-optim". Throws ConfigError.
[[nodiscard]] Mode parse_mode(std::string_view text);

struct LoopSettings {
    std::size_t max_iterations = 5;
    std::size_t patience = 3;
    Calibrator calibrator = Calibrator::Es;
    Mode mode = Mode::Full;
    std::size_t top_k = 2;
    /// Extra provider calls allowed per iteration when a reply cannot be parsed or validated.
    std::size_t corrective_rounds = 3;
    /// Proposals per iteration; the one with the lowest validation loss is kept.
    std::size_t fanout = 1;
    gfo::GaSettings ga;
    sbi::SbiSettings sbi;
    /// Empty: nothing is written.
    std::string run_dir;
    /// Reload completed iterations from run_dir instead of recomputing them.
    bool resume = false;

    void check() const;
    /// Iteration budget and calibrator after applying the mode.
    [[nodiscard]] std::size_t effective_iterations() const noexcept;
    [[nodiscard]] Calibrator effective_calibrator() const noexcept;
};

struct Task {
    envs::EnvSpec spec;
    Dataset train;
    Dataset val;
    /// Prompt task text; task_description(spec) when empty.
    std::string description;
};

struct HistoryEntry {
    std::size_t iteration = 0;
    std::string config_text;
    std::vector<std::string> param_names;
    std::vector<double> params;
    metrics::DiagnosticReport report;
    std::string feedback;
    bool failed = false;
    std::string error;

    /// Validation wasserstein; +inf for failed entries.
    [[nodiscard]] double score() const noexcept;
};

struct LoopResult {
    std::vector<HistoryEntry> history;
    std::optional<std::size_t> best; // index into history
    StopReason stop = StopReason::Budget;
    std::string stop_detail;
    std::size_t provider_calls = 0;
    std::size_t calibrator_calls = 0;

    [[nodiscard]] const HistoryEntry* best_entry() const noexcept;
};

/// Stable text: overall validation wasserstein, per-dimension MSE, fitted parameters and,
/// when nonzero, the domain-rule violation count. Failed entries describe the error.
[[nodiscard]] std::string synthesize_feedback(const HistoryEntry& entry);

/// True iff the best score in the last `patience` entries does not beat the best before them.
[[nodiscard]] bool early_stop(std::span<const double> scores, std::size_t patience);

/// Maps the best earlier parameters onto `config` by name; unmatched names keep defaults.
[[nodiscard]] std::vector<double> map_warm_start(const dsl::StructuralConfig& config,
                                                 const std::vector<std::string>& names,
                                                 const std::vector<double>& values);

/// Propose, calibrate, diagnose and feed back until the budget or patience runs out.
/// Iteration g calibrates under derive_seed(seed, {10, g}); every candidate is diagnosed with
/// `diag` unchanged so scores are comparable.
[[nodiscard]] LoopResult run_loop(const Task& task, llm::Provider& provider, const LoopSettings& settings,
                                  const metrics::DiagnosticConfig& diag, std::uint64_t seed);

/// "iteration,status,val_wasserstein,best_iteration" rows for the history so far.
[[nodiscard]] std::string summary_csv(const LoopResult& result);

} // namespace gsim::loop
