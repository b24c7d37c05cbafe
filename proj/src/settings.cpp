#include "gsim/settings.hpp"

#include "gsim/errors.hpp"
#include "gsim/text.hpp"

#include <charconv>
#include <functional>

namespace gsim::settings {

namespace {

double to_double(std::string_view s) {
    double v = 0.0;
    const auto t = trim(s);
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size()) throw ConfigError("not a number: '" + std::string(s) + "'");
    return v;
}

std::int64_t to_int(std::string_view s) {
    std::int64_t v = 0;
    const auto t = trim(s);
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size()) throw ConfigError("not an integer: '" + std::string(s) + "'");
    return v;
}

std::size_t to_size(std::string_view s) {
    const auto v = to_int(s);
    if (v < 0) throw ConfigError("expected a nonnegative integer, got '" + std::string(s) + "'");
    return static_cast<std::size_t>(v);
}

bool to_bool(std::string_view s) {
    const auto t = trim(s);
    if (t == "true" || t == "1" || t == "yes") return true;
    if (t == "false" || t == "0" || t == "no") return false;
    throw ConfigError("not a boolean: '" + std::string(s) + "'");
}

using Setter = std::function<void(RunSettings&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = [] {
        std::map<std::string, Setter> t;
        t["seed"] = [](RunSettings& r, const std::string& v) { r.seed = static_cast<std::uint64_t>(to_size(v)); };
        t["parallel"] = [](RunSettings& r, const std::string& v) { set_parallel(r, to_size(v)); };
        t["mc"] = [](RunSettings& r, const std::string& v) { set_mc(r, to_size(v)); };

        t["ga.population"] = [](RunSettings& r, const std::string& v) { r.ga.population = to_size(v); };
        t["ga.generations"] = [](RunSettings& r, const std::string& v) { r.ga.generations = to_size(v); };
        t["ga.tournament_k"] = [](RunSettings& r, const std::string& v) { r.ga.tournament_k = to_size(v); };
        t["ga.crossover_rate"] = [](RunSettings& r, const std::string& v) { r.ga.crossover_rate = to_double(v); };
        t["ga.sbx_eta"] = [](RunSettings& r, const std::string& v) { r.ga.sbx_eta = to_double(v); };
        t["ga.mutation_stdev"] = [](RunSettings& r, const std::string& v) { r.ga.mutation_stdev = to_double(v); };
        t["ga.mc_draws"] = [](RunSettings& r, const std::string& v) { r.ga.mc_draws = to_size(v); };
        t["ga.elitism"] = [](RunSettings& r, const std::string& v) { r.ga.elitism = to_size(v); };

        t["sbi.budget"] = [](RunSettings& r, const std::string& v) { r.sbi.budget = to_size(v); };
        t["sbi.accept_fraction"] = [](RunSettings& r, const std::string& v) { r.sbi.accept_fraction = to_double(v); };

        t["loop.max_iterations"] = [](RunSettings& r, const std::string& v) { r.loop.max_iterations = to_size(v); };
        t["loop.patience"] = [](RunSettings& r, const std::string& v) { r.loop.patience = to_size(v); };
        t["loop.top_k"] = [](RunSettings& r, const std::string& v) { r.loop.top_k = to_size(v); };
        t["loop.corrective_rounds"] = [](RunSettings& r, const std::string& v) { r.loop.corrective_rounds = to_size(v); };
        t["loop.fanout"] = [](RunSettings& r, const std::string& v) { r.loop.fanout = to_size(v); };
        t["loop.calibrator"] = [](RunSettings& r, const std::string& v) { r.loop.calibrator = loop::parse_calibrator(trim(v)); };
        t["loop.mode"] = [](RunSettings& r, const std::string& v) { r.loop.mode = loop::parse_mode(trim(v)); };

        t["diag.mc"] = [](RunSettings& r, const std::string& v) { r.diag.mc = to_size(v); };
        t["diag.seed"] = [](RunSettings& r, const std::string& v) { r.diag.seed = static_cast<std::uint64_t>(to_size(v)); };
        t["diag.w_wasserstein"] = [](RunSettings& r, const std::string& v) { r.diag.w_wasserstein = to_double(v); };
        t["diag.w_mse"] = [](RunSettings& r, const std::string& v) { r.diag.w_mse = to_double(v); };
        t["diag.w_mmd"] = [](RunSettings& r, const std::string& v) { r.diag.w_mmd = to_double(v); };
        t["diag.w_violations"] = [](RunSettings& r, const std::string& v) { r.diag.w_violations = to_double(v); };
        t["diag.mmd_bandwidth"] = [](RunSettings& r, const std::string& v) { r.diag.mmd_bandwidth = to_double(v); };

        t["provider.kind"] = [](RunSettings& r, const std::string& v) {
            const auto k = trim(v);
            if (k == "http") r.provider.kind = llm::ProviderConfig::Kind::Http;
            else if (k == "scripted") r.provider.kind = llm::ProviderConfig::Kind::Scripted;
            else throw ConfigError("provider.kind must be http or scripted");
        };
        t["provider.base"] = [](RunSettings& r, const std::string& v) { r.provider.base = std::string(trim(v)); };
        t["provider.model"] = [](RunSettings& r, const std::string& v) { r.provider.model = std::string(trim(v)); };
        t["provider.timeout_seconds"] = [](RunSettings& r, const std::string& v) { r.provider.timeout_seconds = to_double(v); };
        t["provider.max_retries"] = [](RunSettings& r, const std::string& v) { r.provider.max_retries = to_size(v); };
        t["provider.backoff_seconds"] = [](RunSettings& r, const std::string& v) { r.provider.backoff_seconds = to_double(v); };
        t["provider.temperature"] = [](RunSettings& r, const std::string& v) { r.provider.temperature = to_double(v); };
        t["provider.scripted_file"] = [](RunSettings& r, const std::string& v) { r.provider.scripted_file = std::string(trim(v)); };

        t["lockdown.alphas"] = [](RunSettings& r, const std::string& v) { r.lockdown.alphas = parse_double_list(v); };
        t["lockdown.t_start"] = [](RunSettings& r, const std::string& v) { r.lockdown.t_start = to_int(v); };
        t["lockdown.t_end"] = [](RunSettings& r, const std::string& v) { r.lockdown.t_end = to_int(v); };
        t["lockdown.horizon"] = [](RunSettings& r, const std::string& v) { r.lockdown.horizon = to_size(v); };

        t["grid.taus"] = [](RunSettings& r, const std::string& v) { r.grid.taus = parse_int_list(v); };
        t["grid.deltas"] = [](RunSettings& r, const std::string& v) { r.grid.deltas = parse_int_list(v); };
        t["grid.duration"] = [](RunSettings& r, const std::string& v) { r.grid.duration = to_int(v); };
        t["grid.bed_cost"] = [](RunSettings& r, const std::string& v) { r.grid.bed_cost = to_double(v); };
        t["grid.lockdown_day_cost"] = [](RunSettings& r, const std::string& v) { r.grid.lockdown_day_cost = to_double(v); };
        t["grid.arrival_factor"] = [](RunSettings& r, const std::string& v) { r.grid.arrival_factor = to_double(v); };
        t["grid.horizon"] = [](RunSettings& r, const std::string& v) { r.grid.horizon = to_size(v); };

        t["heatmap.capacity_deltas"] = [](RunSettings& r, const std::string& v) { r.heatmap.capacity_deltas = parse_int_list(v); };
        t["heatmap.leads"] = [](RunSettings& r, const std::string& v) { r.heatmap.leads = parse_int_list(v); };
        t["heatmap.c_hold"] = [](RunSettings& r, const std::string& v) { r.heatmap.c_hold = to_double(v); };
        t["heatmap.c_back"] = [](RunSettings& r, const std::string& v) { r.heatmap.c_back = to_double(v); };
        t["heatmap.c_cap"] = [](RunSettings& r, const std::string& v) { r.heatmap.c_cap = to_double(v); };
        t["heatmap.policy"] = [](RunSettings& r, const std::string& v) { r.heatmap.policy = envs::parse_policy(trim(v)); };

        t["leadtime.leads"] = [](RunSettings& r, const std::string& v) { r.leadtime.leads = parse_int_list(v); };
        t["leadtime.policy"] = [](RunSettings& r, const std::string& v) { r.leadtime.policy = envs::parse_policy(trim(v)); };

        t["loop.resume"] = [](RunSettings& r, const std::string& v) { r.loop.resume = to_bool(v); };
        return t;
    }();
    return table;
}

} // namespace

std::map<std::string, std::string> parse_kv(std::string_view text) {
    std::map<std::string, std::string> out;
    std::size_t line_no = 0;
    for (const auto& raw : split(text, '\n')) {
        ++line_no;
        std::string_view line = raw;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) throw ParseError("expected 'key = value'", line_no);
        const std::string key(trim(line.substr(0, eq)));
        const std::string value(trim(line.substr(eq + 1)));
        if (key.empty()) throw ParseError("missing key", line_no);
        if (!out.emplace(key, value).second) throw ParseError("key '" + key + "' repeated", line_no);
    }
    return out;
}

void apply(RunSettings& settings, const std::map<std::string, std::string>& kv) {
    const auto& table = setters();
    // global keys first so per-module keys can refine them
    for (const auto* global : {"mc", "parallel"}) {
        if (auto it = kv.find(global); it != kv.end()) table.at(global)(settings, it->second);
    }
    for (const auto& [key, value] : kv) {
        if (key == "mc" || key == "parallel") continue;
        const auto it = table.find(key);
        if (it == table.end()) throw ConfigError("unknown config key '" + key + "'");
        try {
            it->second(settings, value);
        } catch (const ConfigError& e) {
            throw ConfigError(key + ": " + e.what());
        }
    }
}

void apply_file(RunSettings& settings, const std::string& path) { settings::apply(settings, parse_kv(read_file(path))); }

void set_mc(RunSettings& s, std::size_t mc) {
    if (mc < 1) throw ConfigError("mc must be >= 1");
    s.ga.mc_draws = mc;
    s.diag.mc = mc;
    s.lockdown.mc = mc;
    s.grid.mc = mc;
    s.heatmap.mc = mc;
    s.leadtime.mc = mc;
}

void set_parallel(RunSettings& s, std::size_t workers) {
    s.parallel = workers;
    s.ga.workers = workers;
    s.sbi.workers = workers;
    s.diag.workers = workers;
}

std::vector<std::string> known_keys() {
    std::vector<std::string> keys;
    for (const auto& [k, _] : setters()) keys.push_back(k);
    return keys;
}

std::vector<std::int64_t> parse_int_list(std::string_view text) {
    std::vector<std::int64_t> out;
    for (const auto& part : split(text, ',')) out.push_back(to_int(part));
    if (out.empty()) throw ConfigError("empty list");
    return out;
}

std::vector<double> parse_double_list(std::string_view text) {
    std::vector<double> out;
    for (const auto& part : split(text, ',')) out.push_back(to_double(part));
    if (out.empty()) throw ConfigError("empty list");
    return out;
}

} // namespace gsim::settings
