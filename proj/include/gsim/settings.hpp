#pragma once

#include "gsim/experiments.hpp"
#include "gsim/gfo.hpp"
#include "gsim/llm.hpp"
#include "gsim/loop.hpp"
#include "gsim/metrics.hpp"
#include "gsim/sbi.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace gsim::settings {

/// Every tunable default the command-line tool exposes.
struct RunSettings {
    std::uint64_t seed = 0;
    std::size_t parallel = 1;
    gfo::GaSettings ga;
    sbi::SbiSettings sbi;
    loop::LoopSettings loop;
    metrics::DiagnosticConfig diag;
    llm::ProviderConfig provider;
    experiments::LockdownSpec lockdown;
    experiments::GridSpec grid = experiments::GridSpec::defaults();
    experiments::HeatmapSpec heatmap;
    experiments::LeadtimeSpec leadtime;
};

/// Flat config text: one `dotted.key = value` per line; `#` starts a comment. Throws
/// ParseError (with line) on malformed lines or repeated keys.
[[nodiscard]] std::map<std::string, std::string> parse_kv(std::string_view text);

/// Applies parsed keys. Throws ConfigError naming the key on unknown keys or bad values.
void apply(RunSettings& settings, const std::map<std::string, std::string>& kv);
void apply_file(RunSettings& settings, const std::string& path);

/// Sets `mc` on every consumer: GA draws, diagnostics and all experiments.
void set_mc(RunSettings& settings, std::size_t mc);
/// Sets worker counts on every consumer.
void set_parallel(RunSettings& settings, std::size_t workers);

[[nodiscard]] std::vector<std::string> known_keys();

[[nodiscard]] std::vector<std::int64_t> parse_int_list(std::string_view text);
[[nodiscard]] std::vector<double> parse_double_list(std::string_view text);

} // namespace gsim::settings
