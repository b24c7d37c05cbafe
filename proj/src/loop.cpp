#include "gsim/loop.hpp"

#include "gsim/errors.hpp"
#include "gsim/rng.hpp"
#include "gsim/text.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>

namespace gsim::loop {

namespace fs = std::filesystem;

std::string_view to_string(Calibrator c) noexcept {
    switch (c) {
    case Calibrator::Es: return "es";
    case Calibrator::Sbi: return "sbi";
    case Calibrator::None: return "none";
    }
    return "?";
}

std::string_view to_string(Mode m) noexcept {
    switch (m) {
    case Mode::Full: return "full";
    case Mode::ZeroShot: return "zeroshot";
    case Mode::ZeroShotOptim: return "zeroshot-optim";
    }
    return "?";
}

std::string_view to_string(StopReason r) noexcept {
    switch (r) {
    case StopReason::Budget: return "budget";
    case StopReason::EarlyStop: return "early-stop";
    case StopReason::ProviderFailure: return "provider-failure";
    }
    return "?";
}

Calibrator parse_calibrator(std::string_view text) {
    if (text == "es") return Calibrator::Es;
    if (text == "sbi") return Calibrator::Sbi;
    if (text == "none") return Calibrator::None;
    throw ConfigError("unknown calibrator '" + std::string(text) + "' (expected es, sbi, none)");
}

Mode parse_mode(std::string_view text) {
    if (text == "full") return Mode::Full;
    if (text == "zeroshot") return Mode::ZeroShot;
    if (text == "zeroshot-optim") return Mode::ZeroShotOptim;
    throw ConfigError("unknown mode '" + std::string(text) + "' (expected full, zeroshot, zeroshot-optim)");
}

void LoopSettings::check() const {
    if (max_iterations < 1) throw ConfigError("max_iterations must be >= 1");
    if (patience < 1) throw ConfigError("patience must be >= 1");
    if (top_k < 1) throw ConfigError("top_k must be >= 1");
    if (fanout < 1) throw ConfigError("fanout must be >= 1");
    if (resume && run_dir.empty()) throw ConfigError("resume needs a run directory");
    const Calibrator c = effective_calibrator();
    if (c == Calibrator::Es) ga.check();
    if (c == Calibrator::Sbi) sbi.check();
}

std::size_t LoopSettings::effective_iterations() const noexcept {
    return mode == Mode::Full ? max_iterations : 1;
}

Calibrator LoopSettings::effective_calibrator() const noexcept {
    return mode == Mode::ZeroShot ? Calibrator::None : calibrator;
}

double HistoryEntry::score() const noexcept {
    if (failed || !std::isfinite(report.wasserstein)) return std::numeric_limits<double>::infinity();
    return report.wasserstein;
}

const HistoryEntry* LoopResult::best_entry() const noexcept { return best ? &history[*best] : nullptr; }

std::string synthesize_feedback(const HistoryEntry& entry) {
    if (entry.failed) return "The candidate could not be evaluated: " + entry.error + "\n";
    const auto& r = entry.report;
    std::string s = "Val Wasserstein Loss: " + format_sig(r.wasserstein, 3) + "\n";
    if (!r.mse.empty()) {
        s += "Validation MSE by dimension:";
        for (std::size_t i = 0; i < r.mse.size(); ++i) {
            s += (i == 0 ? " " : ", ") + r.mse[i].name + " " + format_sig(r.mse[i].value, 3);
        }
        s += ".\n";
    }
    if (!entry.param_names.empty()) {
        s += "Fitted parameters:";
        for (std::size_t i = 0; i < entry.param_names.size(); ++i) {
            s += (i == 0 ? " " : ", ") + entry.param_names[i] + " = " + format_sig(entry.params[i], 4);
        }
        s += ".\n";
    }
    if (r.violations != 0) s += "Domain rule violations: " + std::to_string(r.violations) + ".\n";
    return s;
}

bool early_stop(std::span<const double> scores, std::size_t patience) {
    if (patience == 0 || scores.size() < patience + 1) return false;
    const auto split = scores.end() - static_cast<std::ptrdiff_t>(patience);
    const double before = *std::min_element(scores.begin(), split);
    const double recent = *std::min_element(split, scores.end());
    return !(recent < before);
}

std::vector<double> map_warm_start(const dsl::StructuralConfig& config, const std::vector<std::string>& names,
                                   const std::vector<double>& values) {
    std::vector<double> out = config.defaults();
    for (std::size_t i = 0; i < config.params.size(); ++i) {
        const auto it = std::find(names.begin(), names.end(), config.params[i].name);
        if (it == names.end()) continue;
        const double v = values[static_cast<std::size_t>(it - names.begin())];
        out[i] = std::clamp(v, config.params[i].min, config.params[i].max);
    }
    return out;
}

std::string summary_csv(const LoopResult& result) {
    std::string out = "iteration,status,val_wasserstein,best_iteration\n";
    double best = std::numeric_limits<double>::infinity();
    std::optional<std::size_t> best_it;
    for (const auto& e : result.history) {
        if (e.score() < best) {
            best = e.score();
            best_it = e.iteration;
        }
        out += csv_row({std::to_string(e.iteration), e.failed ? "failed" : "ok",
                        e.failed ? "inf" : format_number(e.report.wasserstein),
                        best_it ? std::to_string(*best_it) : ""});
    }
    return out;
}

namespace {

std::string iter_dir(const std::string& run_dir, std::size_t g) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "iter_%03zu", g);
    return (fs::path(run_dir) / buf).string();
}

std::string params_csv(const HistoryEntry& e) {
    std::string out = "name,value\n";
    for (std::size_t i = 0; i < e.param_names.size(); ++i) {
        out += csv_row({e.param_names[i], format_number(e.params[i])});
    }
    return out;
}

void write_entry(const std::string& run_dir, const HistoryEntry& e, const std::string& response) {
    const std::string dir = iter_dir(run_dir, e.iteration);
    write_file(dir + "/response.txt", response);
    write_file(dir + "/config.gsim", e.config_text);
    write_file(dir + "/feedback.txt", e.feedback);
    if (!e.failed) {
        write_file(dir + "/params.csv", params_csv(e));
        write_file(dir + "/diagnostics.csv", csv_row(e.report.csv_header()) + csv_row(e.report.csv_values()));
    }
    // written last: its presence marks the iteration complete
    write_file(dir + "/status.txt", e.failed ? "failed\n" + e.error + "\n" : std::string("ok\n"));
}

double parse_double(const std::string& s) {
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw ConfigError("bad number '" + s + "' in run directory");
    return v;
}

std::optional<HistoryEntry> load_entry(const std::string& run_dir, std::size_t g) {
    const std::string dir = iter_dir(run_dir, g);
    if (!fs::exists(dir + "/status.txt")) return std::nullopt;
    HistoryEntry e;
    e.iteration = g;
    const std::string status = read_file(dir + "/status.txt");
    e.config_text = read_file(dir + "/config.gsim");
    e.feedback = read_file(dir + "/feedback.txt");
    if (status.rfind("failed\n", 0) == 0) {
        e.failed = true;
        e.error = status.substr(7);
        if (!e.error.empty() && e.error.back() == '\n') e.error.pop_back();
        return e;
    }
    const auto config = dsl::parse_config(e.config_text);
    const auto lines = split(read_file(dir + "/diagnostics.csv"), '\n');
    if (lines.size() < 2) throw ConfigError("incomplete diagnostics in " + dir);
    const auto header = split(lines[0], ',');
    const auto values = split(lines[1], ',');
    if (header.size() != values.size()) throw ConfigError("malformed diagnostics in " + dir);
    std::vector<double> params;
    for (std::size_t i = 0; i < header.size(); ++i) {
        const std::string& h = header[i];
        if (h == "wass") e.report.wasserstein = parse_double(values[i]);
        else if (h == "mmd") e.report.mmd = parse_double(values[i]);
        else if (h == "violations") e.report.violations = std::stoll(values[i]);
        else if (h.rfind("mse.", 0) == 0) e.report.mse.push_back({h.substr(4), parse_double(values[i])});
        else if (h.rfind("param.", 0) == 0) {
            e.param_names.push_back(h.substr(6));
            params.push_back(parse_double(values[i]));
        }
    }
    e.params = params;
    e.report.params = dsl::ParameterVector(config, params);
    return e;
}

struct Candidate {
    HistoryEntry entry;
    std::string response;
};

std::vector<double> calibrate(const dsl::StructuralConfig& config, const Task& task, const LoopSettings& settings,
                              const std::optional<std::vector<double>>& warm, std::uint64_t seed) {
    switch (settings.effective_calibrator()) {
    case Calibrator::Es: return gfo::calibrate_es(config, task.train, settings.ga, warm, seed).best;
    case Calibrator::Sbi: return sbi::run_sbi(config, task.train, settings.sbi, seed).point_estimate;
    case Calibrator::None: break;
    }
    return config.defaults();
}

} // namespace

LoopResult run_loop(const Task& task, llm::Provider& provider, const LoopSettings& settings,
                    const metrics::DiagnosticConfig& diag, std::uint64_t seed) {
    settings.check();
    diag.check();
    if (task.train.size() == 0) throw SizeError("training split is empty");
    if (task.val.size() == 0) throw SizeError("validation split is empty");

    const std::string description = task.description.empty() ? llm::task_description(task.spec) : task.description;
    const std::size_t budget = settings.effective_iterations();
    const bool calibrating = settings.effective_calibrator() != Calibrator::None;

    LoopResult result;
    auto update_best = [&] {
        result.best.reset();
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < result.history.size(); ++i) {
            if (result.history[i].score() < best) {
                best = result.history[i].score();
                result.best = i;
            }
        }
    };
    auto scores = [&] {
        std::vector<double> s;
        for (const auto& e : result.history) s.push_back(e.score());
        return s;
    };
    auto save_summary = [&] {
        if (!settings.run_dir.empty()) write_file(settings.run_dir + "/summary.csv", summary_csv(result));
    };

    for (std::size_t g = 0; g < budget; ++g) {
        if (settings.resume) {
            if (auto loaded = load_entry(settings.run_dir, g)) {
                result.history.push_back(std::move(*loaded));
                update_best();
                save_summary();
                if (settings.mode == Mode::Full && early_stop(scores(), settings.patience)) {
                    result.stop = StopReason::EarlyStop;
                    return result;
                }
                continue;
            }
        }

        std::vector<llm::HistoryDigest> digests;
        for (const auto& e : result.history) {
            if (e.failed) continue;
            digests.push_back({e.iteration, e.config_text, e.report.wasserstein, e.param_names, e.params});
        }
        const std::string feedback = result.history.empty() ? "" : result.history.back().feedback;
        const auto base_prompt = llm::build_prompt(description, digests, feedback, g, budget, settings.top_k);

        std::optional<Candidate> chosen;
        bool provider_failed = false;
        for (std::size_t f = 0; f < settings.fanout && !provider_failed; ++f) {
            Candidate c;
            c.entry.iteration = g;
            auto prompt = base_prompt;
            std::optional<dsl::StructuralConfig> config;
            std::string last_error;
            for (std::size_t round = 0; round <= settings.corrective_rounds; ++round) {
                try {
                    ++result.provider_calls;
                    c.response = provider.propose(prompt);
                } catch (const ProviderError& e) {
                    provider_failed = true;
                    result.stop_detail = e.what();
                    break;
                }
                try {
                    c.entry.config_text = llm::last_fenced_block(c.response);
                    config = llm::extract_config(c.response);
                    break;
                } catch (const Error& e) {
                    last_error = e.what();
                    prompt.correction = last_error;
                }
            }
            if (provider_failed) break;

            if (!config) {
                c.entry.failed = true;
                c.entry.error = last_error;
            } else {
                try {
                    std::optional<std::vector<double>> mapped;
                    if (calibrating && result.best) {
                        const auto& b = result.history[*result.best];
                        mapped = map_warm_start(*config, b.param_names, b.params);
                    }
                    std::vector<double> fitted = config->defaults();
                    if (calibrating) {
                        ++result.calibrator_calls;
                        fitted = calibrate(*config, task, settings, mapped, derive_seed(seed, {10, static_cast<std::uint32_t>(g)}));
                    }
                    const dsl::ParameterVector pv(*config, fitted);
                    c.entry.param_names = pv.names();
                    c.entry.params.assign(pv.values().begin(), pv.values().end());
                    c.entry.report = metrics::diagnose(*config, pv, task.val, diag);
                } catch (const Error& e) {
                    c.entry.failed = true;
                    c.entry.error = e.what();
                }
            }
            c.entry.feedback = synthesize_feedback(c.entry);
            if (!chosen || c.entry.score() < chosen->entry.score()) chosen = std::move(c);
        }

        if (!chosen) {
            result.stop = StopReason::ProviderFailure;
            save_summary();
            return result;
        }
        if (!settings.run_dir.empty()) write_entry(settings.run_dir, chosen->entry, chosen->response);
        result.history.push_back(std::move(chosen->entry));
        update_best();
        save_summary();
        if (provider_failed) {
            result.stop = StopReason::ProviderFailure;
            return result;
        }
        if (settings.mode == Mode::Full && early_stop(scores(), settings.patience)) {
            result.stop = StopReason::EarlyStop;
            return result;
        }
    }
    result.stop = StopReason::Budget;
    return result;
}

} // namespace gsim::loop
