// gsim command-line tool: datasets, calibration, the refinement loop, evaluation and the
// intervention experiments. Exit codes: 0 success, 1 user error, 2 internal error.

#include "gsim/dataset_io.hpp"
#include "gsim/envs.hpp"
#include "gsim/errors.hpp"
#include "gsim/experiments.hpp"
#include "gsim/interpreter.hpp"
#include "gsim/settings.hpp"
#include "gsim/text.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using namespace gsim;

namespace {

/// Bad input from the user (missing file, inconsistent flags).
class UsageError : public Error {
  public:
    using Error::Error;
};

struct Globals {
    std::uint64_t seed = 0;
    std::string config;
    std::string out;
    std::size_t mc = 0;
    std::size_t parallel = 0;
    CLI::Option* seed_opt = nullptr;
    CLI::Option* mc_opt = nullptr;
    CLI::Option* parallel_opt = nullptr;
};

settings::RunSettings resolve(const Globals& g) {
    settings::RunSettings s;
    if (!g.config.empty()) {
        if (!fs::exists(g.config)) throw UsageError("config file not found: " + g.config);
        settings::apply_file(s, g.config);
    }
    if (g.seed_opt->count() > 0) s.seed = g.seed;
    if (g.mc_opt->count() > 0) settings::set_mc(s, g.mc);
    if (g.parallel_opt->count() > 0) settings::set_parallel(s, g.parallel);
    return s;
}

std::string need_file(const std::string& path, const char* what) {
    if (path.empty()) throw UsageError(std::string("missing ") + what);
    if (!fs::exists(path)) throw UsageError(std::string(what) + " not found: " + path);
    return path;
}

void emit(const std::string& out, const std::string& text) {
    if (out.empty() || out == "-") std::cout << text;
    else write_file(out, text);
}

std::string params_to_csv(const std::vector<std::string>& names, std::span<const double> values) {
    std::string s = "name,value\n";
    for (std::size_t i = 0; i < names.size(); ++i) s += csv_row({names[i], format_number(values[i])});
    return s;
}

/// Values from a "name,value" CSV mapped onto the config; absent names keep defaults.
std::vector<double> load_params(const dsl::StructuralConfig& config, const std::string& path) {
    std::vector<double> values = config.defaults();
    if (path.empty()) return values;
    const auto lines = split(read_file(need_file(path, "params file")), '\n');
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (trim(lines[i]).empty()) continue;
        const auto cols = split(lines[i], ',');
        if (cols.size() != 2) throw UsageError("params file line " + std::to_string(i + 1) + ": expected name,value");
        const auto idx = config.param_index(trim(cols[0]));
        if (!idx) throw UsageError("params file names unknown parameter '" + std::string(trim(cols[0])) + "'");
        values[*idx] = settings::parse_double_list(cols[1]).at(0);
    }
    return values;
}

dsl::StructuralConfig load_config(const std::string& path) {
    return dsl::parse_config(read_file(need_file(path, "config file")));
}

/// Reference simulator, or a DSL config with optional fitted parameters.
Simulator pick_simulator(const envs::EnvSpec& spec, const std::string& dsl_path, const std::string& params_path) {
    if (dsl_path.empty()) return envs::reference_simulator(spec);
    const auto cfg = load_config(dsl_path);
    return dsl::make_simulator(cfg, load_params(cfg, params_path));
}

/// The requested split, or every trajectory when the dataset carries no labels for it.
Dataset split_or_all(const Dataset& d, Split split) {
    auto sub = d.subset(split);
    return sub.size() > 0 ? sub : d;
}

envs::EnvSpec env_for(const std::string& env, const Dataset* data) {
    if (!env.empty()) return envs::preset(env);
    if (data != nullptr && !data->env_name.empty()) return envs::preset(data->env_name);
    throw UsageError("--env is required");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"gsim: stochastic simulator synthesis, calibration and intervention experiments"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    g.seed_opt = app.add_option("--seed", g.seed, "Master seed");
    app.add_option("--config", g.config, "Flat dotted-key settings file");
    app.add_option("--out", g.out, "Output path");
    g.mc_opt = app.add_option("--mc", g.mc, "Monte-Carlo rollouts (GA draws, diagnostics, experiments)");
    g.parallel_opt = app.add_option("--parallel", g.parallel, "Worker threads");

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "Generate a trajectory dataset from a preset");
    std::string gen_env;
    std::size_t gen_n = 300;
    std::size_t gen_horizon = 0;
    std::string gen_policy;
    std::vector<std::size_t> gen_split;
    gen->add_option("--env", gen_env, "Preset: sir, supply, hospital, hospital-large")->required();
    gen->add_option("--n", gen_n, "Number of trajectories");
    gen->add_option("--horizon", gen_horizon, "Steps per trajectory (preset default when omitted)");
    gen->add_option("--policy", gen_policy, "none, constant:K, uniform:LO:HI, base-stock:S");
    gen->add_option("--split", gen_split, "Train, validation and test counts")->expected(3);

    // calibrate
    auto* cal = app.add_subcommand("calibrate", "Fit a config's parameters to a dataset");
    std::string cal_dsl, cal_data, cal_method = "es";
    cal->add_option("--dsl", cal_dsl, "Config file")->required();
    cal->add_option("--data", cal_data, "Dataset (train split used when labeled)")->required();
    cal->add_option("--method", cal_method, "es or sbi")->check(CLI::IsMember({"es", "sbi"}));

    // loop
    auto* lp = app.add_subcommand("loop", "Run the propose-calibrate-diagnose refinement loop");
    std::string lp_env, lp_data, lp_provider = "scripted", lp_script, lp_model, lp_mode, lp_calibrator;
    std::size_t lp_iterations = 0, lp_patience = 0;
    bool lp_resume = false;
    lp->add_option("--env", lp_env, "Preset the data comes from (task text and domain rules)");
    lp->add_option("--data", lp_data, "Dataset with train and val splits")->required();
    lp->add_option("--provider", lp_provider, "scripted or http")->check(CLI::IsMember({"scripted", "http"}));
    lp->add_option("--script", lp_script, "Proposals file for the scripted provider");
    lp->add_option("--model", lp_model, "Model name for the http provider");
    lp->add_option("--mode", lp_mode, "full, zeroshot, zeroshot-optim");
    lp->add_option("--calibrator", lp_calibrator, "es, sbi, none");
    lp->add_option("--iterations", lp_iterations, "Maximum iterations");
    lp->add_option("--patience", lp_patience, "Early-stopping patience");
    lp->add_flag("--resume", lp_resume, "Continue from the run directory given by --out");

    // eval
    auto* ev = app.add_subcommand("eval", "Diagnose a config against a dataset's validation split");
    std::string ev_dsl, ev_params, ev_data, ev_env;
    ev->add_option("--dsl", ev_dsl, "Config file")->required();
    ev->add_option("--params", ev_params, "name,value CSV (declared defaults when omitted)");
    ev->add_option("--data", ev_data, "Dataset")->required();
    ev->add_option("--env", ev_env, "Preset whose domain rules to check");

    // experiment
    auto* ex = app.add_subcommand("experiment", "Intervention experiments");
    ex->require_subcommand(1);
    std::string ex_dsl, ex_params, ex_env;
    auto add_candidate = [&](CLI::App* sub) {
        sub->add_option("--dsl", ex_dsl, "Candidate config (reference simulator when omitted)");
        sub->add_option("--params", ex_params, "Candidate parameters as name,value CSV");
    };
    auto* ex_lock = ex->add_subcommand("lockdown", "SIR curves under lockdowns of several intensities");
    add_candidate(ex_lock);
    auto* ex_grid = ex->add_subcommand("hospital-grid", "Lockdown start x extra beds policy grid");
    add_candidate(ex_grid);
    ex_grid->add_option("--env", ex_env, "Hospital preset (default hospital-large)");
    auto* ex_heat = ex->add_subcommand("supply-heatmap", "Supply cost over capacity and lead time");
    add_candidate(ex_heat);
    auto* ex_lead = ex->add_subcommand("leadtime", "Backlog under lead-time overrides, reference vs candidate");
    add_candidate(ex_lead);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        auto s = resolve(g);
        const std::size_t workers = s.parallel;

        if (gen->parsed()) {
            const auto spec = envs::preset(gen_env);
            const auto policy = gen_policy.empty() ? envs::default_policy(spec) : envs::parse_policy(gen_policy);
            auto data = envs::generate_dataset(spec, gen_n, gen_horizon == 0 ? spec.horizon : gen_horizon, policy,
                                               s.seed, workers);
            if (!gen_split.empty()) data = split_dataset(data, gen_split[0], gen_split[1], gen_split[2], s.seed);
            if (g.out.empty()) throw UsageError("gen-data needs --out");
            save_dataset(g.out, data);
            std::cout << "wrote " << data.size() << " trajectories to " << g.out << "\n";
        } else if (cal->parsed()) {
            const auto cfg = load_config(cal_dsl);
            const auto train = split_or_all(load_dataset(need_file(cal_data, "dataset")), Split::Train);
            std::string params;
            if (cal_method == "es") {
                const auto r = gfo::calibrate_es(cfg, train, s.ga, std::nullopt, s.seed);
                params = params_to_csv(cfg.param_names(), r.best);
                if (!g.out.empty()) write_file((fs::path(g.out) / "history.csv").string(), gfo::history_csv(r));
            } else {
                const auto r = sbi::run_sbi(cfg, train, s.sbi, s.seed);
                params = params_to_csv(cfg.param_names(), r.point_estimate);
                if (!g.out.empty()) write_file((fs::path(g.out) / "posterior.csv").string(), sbi::posterior_csv(r.posterior));
            }
            if (g.out.empty()) std::cout << params;
            else write_file((fs::path(g.out) / "params.csv").string(), params);
        } else if (lp->parsed()) {
            const auto data = load_dataset(need_file(lp_data, "dataset"));
            loop::Task task;
            task.spec = env_for(lp_env, &data);
            task.train = data.subset(Split::Train);
            task.val = data.subset(Split::Val);
            if (task.train.size() == 0 || task.val.size() == 0) {
                throw UsageError("loop needs a dataset with train and val splits (gen-data --split)");
            }
            auto ls = s.loop;
            ls.ga = s.ga;
            ls.sbi = s.sbi;
            if (!lp_mode.empty()) ls.mode = loop::parse_mode(lp_mode);
            if (!lp_calibrator.empty()) ls.calibrator = loop::parse_calibrator(lp_calibrator);
            if (lp_iterations > 0) ls.max_iterations = lp_iterations;
            if (lp_patience > 0) ls.patience = lp_patience;
            ls.resume = ls.resume || lp_resume;
            ls.run_dir = g.out;
            auto pc = s.provider;
            pc.kind = lp_provider == "http" ? llm::ProviderConfig::Kind::Http : llm::ProviderConfig::Kind::Scripted;
            if (!lp_script.empty()) pc.scripted_file = need_file(lp_script, "script file");
            if (!lp_model.empty()) pc.model = lp_model;
            auto diag = s.diag;
            diag.rules = envs::env_rules(task.spec);
            auto provider = llm::make_provider(pc);
            const auto r = loop::run_loop(task, *provider, ls, diag, s.seed);
            std::cout << loop::summary_csv(r);
            std::cout << "stop: " << loop::to_string(r.stop);
            if (!r.stop_detail.empty()) std::cout << " (" << r.stop_detail << ")";
            std::cout << "\n";
            if (const auto* best = r.best_entry()) {
                std::cout << "best iteration " << best->iteration << "\n" << best->feedback;
            } else {
                std::cout << "no usable candidate\n";
                return 1;
            }
        } else if (ev->parsed()) {
            const auto cfg = load_config(ev_dsl);
            const auto data = load_dataset(need_file(ev_data, "dataset"));
            const auto val = split_or_all(data, Split::Val);
            auto diag = s.diag;
            if (!ev_env.empty() || !data.env_name.empty()) {
                const auto spec = env_for(ev_env, &data);
                diag.rules = envs::env_rules(spec);
            }
            const dsl::ParameterVector pv(cfg, load_params(cfg, ev_params));
            const auto report = metrics::diagnose(cfg, pv, val, diag);
            std::cout << report.to_kv();
            if (!g.out.empty()) write_file(g.out, csv_row(report.csv_header()) + csv_row(report.csv_values()));
        } else if (ex->parsed()) {
            if (ex_lock->parsed()) {
                const auto spec = envs::preset("sir");
                const auto r = experiments::lockdown_sir(spec, pick_simulator(spec, ex_dsl, ex_params), s.lockdown,
                                                         s.seed, workers);
                emit(g.out, r.csv());
            } else if (ex_grid->parsed()) {
                const auto spec = envs::preset(ex_env.empty() ? "hospital-large" : ex_env);
                const auto r = experiments::policy_grid_hospital(spec, pick_simulator(spec, ex_dsl, ex_params),
                                                                 s.grid, s.seed, workers);
                emit(g.out, r.csv());
                const auto& b = r.best();
                std::cerr << "argmin: tau=" << b.tau << " delta_beds=" << b.delta << " cost=" << format_number(b.cost)
                          << "\n";
            } else if (ex_heat->parsed()) {
                const auto spec = envs::preset("supply");
                const auto r = experiments::heatmap_supply(spec, pick_simulator(spec, ex_dsl, ex_params), s.heatmap,
                                                           s.seed, workers);
                emit(g.out, r.csv());
            } else if (ex_lead->parsed()) {
                const auto spec = envs::preset("supply");
                const auto gt = envs::reference_simulator(spec);
                const auto cand = ex_dsl.empty() ? dsl::make_simulator(envs::gt_config(spec), spec.params)
                                                 : pick_simulator(spec, ex_dsl, ex_params);
                const auto r = experiments::leadtime_ood(spec, gt, cand, s.leadtime, s.seed, workers);
                emit(g.out, r.csv());
                std::cerr << r.summary_csv();
            }
        }
        return 0;
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const ExtractionError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const SizeError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 2;
    }
}
