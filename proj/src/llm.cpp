#include <httplib.h>
#include <json.hpp>

#include "gsim/llm.hpp"

#include "gsim/errors.hpp"
#include "gsim/text.hpp"

#include <algorithm>
#include <cstdlib>
#include <thread>

namespace gsim::llm {

namespace {

constexpr const char* kSystem =
    "You design stochastic simulators for a configuration language. Think about the mechanisms "
    "behind the data, then answer with exactly one config in a fenced code block. Parameters must "
    "have defaults and bounds; their values are fitted to data after you answer.";

std::string params_line(const HistoryDigest& h) {
    std::string s;
    for (std::size_t i = 0; i < h.param_names.size() && i < h.params.size(); ++i) {
        if (i != 0) s += ", ";
        s += h.param_names[i] + " = " + format_sig(h.params[i], 6);
    }
    return s.empty() ? "(none)" : s;
}

std::string prior_lines(const envs::EnvSpec& spec) {
    std::string s;
    for (std::size_t i = 0; i < spec.param_names.size(); ++i) {
        s += "  " + spec.param_names[i] + " in [" + format_number(spec.lower[i]) + ", " + format_number(spec.upper[i]) +
             "]\n";
    }
    return s;
}

struct Endpoint {
    std::string origin; // scheme://host[:port]
    std::string path;   // prefix without trailing slash
};

Endpoint split_base(const std::string& base) {
    const auto scheme = base.find("://");
    if (scheme == std::string::npos) throw ConfigError("API base must start with http:// or https://");
    const auto slash = base.find('/', scheme + 3);
    Endpoint e;
    e.origin = base.substr(0, slash);
    e.path = slash == std::string::npos ? "" : base.substr(slash);
    while (!e.path.empty() && e.path.back() == '/') e.path.pop_back();
    return e;
}

bool retryable(int status) { return status == 408 || status == 429 || status >= 500; }

} // namespace

std::string grammar_reference() {
    return R"(Config language reference

config NAME {
  description "optional text";
  action int;                         # only if the rules read `action`
  params {
    NAME = DEFAULT in [LOW, HIGH];
  }
  state {
    NAME : int = VALUE;
    NAME : float = VALUE;
    NAME : pipeline = [];             # (quantity, timer) entries
    NAME : records(attr: int|float|bool|symbol, ...) = [];
  }
  rules {                             # applied in order once per step
    RULE(arg = value, ...);
  }
}

Expressions: numbers, parameters, state fields, `action`, + - * /, exp, log, pow, min, max,
clip(x, lo, hi). Division by zero gives 0; log of a nonpositive number gives -1e9.

Count samplers:
  Binomial(n = E, p = E)   Poisson(rate = E)   NegBinomial(mean = E, dispersion = E)
  Normal(mean = E, stdev = E, floor = INT)    Deterministic(value = E)

Rules:
  CompartmentFlow(from = F, to = F, count = SAMPLER)
      moves up to the source count; adjacent flows all sample from the pre-step state
  Accumulate(field = F, delta = SAMPLER, sign = 1|-1)       result floored at 0
  PipelineAdvance(pipeline = P, deliver_to = F)             timers tick, due entries arrive
  PipelineAppend(pipeline = P, quantity = E, delay = E)
  QueueService(inventory = F, backlog = F, demand = SAMPLER)  serves backlog, then demand
  RecordCountdown(records = L, timer = A, age = A, bed = A, occupancy = {TYPE: F, ...})
  RecordHazard(records = L, prob = E, bed = A, occupancy = {TYPE: F, ...})
  RecordSpawn(records = L, count = SAMPLER, attrs = {A: E or SAMPLER, ...},
              gate = [(TYPE, F, CAPACITY_E), ...], bed = A, overflow = F)
  Assign(field = F, expr = E)

Inside record rules, expressions may also read the record's attributes.
)";
}

std::string task_description(const envs::EnvSpec& spec) {
    std::string s;
    switch (spec.kind) {
    case envs::EnvKind::Sir:
        s = "Model an epidemic in a closed population observed once per day. Observed counts: S "
            "(susceptible), I (infectious), R (removed). There is no control input.\n";
        break;
    case envs::EnvKind::Supply:
        s = "Model a single retailer. Each day it places an integer order (the action); orders arrive "
            "after a delay and random customer demand is served from stock, with unmet demand carried "
            "as backlog. Observed: inventory, backlog, and pipeline (the total quantity in transit, read "
            "from a pipeline field of that name).\n";
        break;
    case envs::EnvKind::Hospital:
        s = "Model a hospital with ICU and standard beds treating patients of three diseases. Patients "
            "arrive daily, occupy a bed for a random length of stay, and may die; arrivals that find no "
            "free bed are turned away. Observed: icu_occupancy, standard_occupancy, and alive (the "
            "number of entries in a records field named patients whose is_alive attribute is true).\n";
        break;
    }
    s += "Trajectories last " + std::to_string(spec.horizon) + " steps.\n";
    s += "The state fields should include the observed names so the data can be matched.\n";
    s += "Plausible parameter ranges of the true system:\n" + prior_lines(spec);
    return s;
}

std::string PromptContext::user_text() const {
    std::string s = task;
    s += "\n" + grammar_reference();
    s += "\nYou are generating code for iteration " + std::to_string(iteration) + " out of " +
         std::to_string(iterations) + ".\n";
    if (!history.empty()) {
        s += "\nEarlier candidates, lowest validation loss last:\n";
        for (const auto& h : history) {
            s += "\n# iteration " + std::to_string(h.iteration) + ", validation loss " + format_sig(h.val_loss, 4) +
                 ", fitted parameters: " + params_line(h) + "\n```\n" + h.config_text;
            if (!h.config_text.empty() && h.config_text.back() != '\n') s += "\n";
            s += "```\n";
        }
    }
    if (!feedback.empty()) s += "\nFeedback on the latest candidate:\n" + feedback + "\n";
    if (!correction.empty()) {
        s += "\nYour previous reply could not be used:\n" + correction + "\nReply again with a corrected config.\n";
    }
    s += "\nAnswer with one fenced config block.\n";
    return s;
}

std::vector<Message> PromptContext::messages() const { return {{"system", system}, {"user", user_text()}}; }

PromptContext build_prompt(const std::string& task, std::vector<HistoryDigest> history, const std::string& feedback,
                           std::size_t iteration, std::size_t iterations, std::size_t top_k) {
    std::stable_sort(history.begin(), history.end(),
                     [](const HistoryDigest& a, const HistoryDigest& b) { return a.val_loss < b.val_loss; });
    if (history.size() > top_k) history.resize(top_k);
    std::reverse(history.begin(), history.end());
    PromptContext p;
    p.system = kSystem;
    p.task = task;
    p.history = std::move(history);
    p.feedback = feedback;
    p.iteration = iteration;
    p.iterations = iterations;
    return p;
}

ScriptedProvider::ScriptedProvider(std::vector<std::string> proposals) : queue_(std::move(proposals)) {}

ScriptedProvider ScriptedProvider::from_text(const std::string& text) {
    std::vector<std::string> items;
    std::string cur;
    for (const auto& line : split(text, '\n')) {
        if (trim(line) == "---") {
            items.push_back(cur);
            cur.clear();
        } else {
            cur += line + "\n";
        }
    }
    if (!trim(cur).empty()) items.push_back(cur);
    return ScriptedProvider(std::move(items));
}

ScriptedProvider ScriptedProvider::from_file(const std::string& path) { return from_text(read_file(path)); }

std::string ScriptedProvider::propose(const PromptContext& prompt) {
    ++calls_;
    prompts_.push_back(prompt);
    if (next_ >= queue_.size()) throw ProviderError("scripted provider has no proposals left");
    return queue_[next_++];
}

HttpProvider::HttpProvider(ProviderConfig config, std::string api_key)
    : config_(std::move(config)), api_key_(std::move(api_key)) {
    if (config_.base.empty()) throw ConfigError("HTTP provider needs an API base URL");
    if (api_key_.empty()) throw ConfigError("HTTP provider needs an API key (GSIM_API_KEY)");
    if (config_.model.empty()) throw ConfigError("HTTP provider needs a model name");
    (void)split_base(config_.base);
}

HttpProvider HttpProvider::from_env(ProviderConfig config) {
    if (const char* base = std::getenv("GSIM_API_BASE"); base != nullptr && *base != '\0') config.base = base;
    const char* key = std::getenv("GSIM_API_KEY");
    return HttpProvider(std::move(config), key != nullptr ? key : "");
}

std::string HttpProvider::request_body(const PromptContext& prompt) const {
    nlohmann::ordered_json body;
    body["model"] = config_.model;
    body["messages"] = nlohmann::ordered_json::array();
    for (const auto& m : prompt.messages()) body["messages"].push_back({{"role", m.role}, {"content", m.content}});
    if (config_.temperature) body["temperature"] = *config_.temperature;
    return body.dump();
}

std::string HttpProvider::propose(const PromptContext& prompt) {
    ++calls_;
    const Endpoint ep = split_base(config_.base);
    httplib::Client client(ep.origin);
    const auto timeout = std::chrono::duration<double>(config_.timeout_seconds);
    client.set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
    client.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
    client.set_write_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
    const httplib::Headers headers{{"Authorization", "Bearer " + api_key_}};
    const std::string body = request_body(prompt);

    std::string last_error;
    for (std::size_t attempt = 0; attempt <= config_.max_retries; ++attempt) {
        if (attempt > 0 && config_.backoff_seconds > 0) {
            std::this_thread::sleep_for(std::chrono::duration<double>(config_.backoff_seconds * static_cast<double>(attempt)));
        }
        ++attempts_;
        auto res = client.Post(ep.path + "/chat/completions", headers, body, "application/json");
        if (!res) {
            last_error = "request failed: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status != 200) {
            last_error = "HTTP status " + std::to_string(res->status);
            if (retryable(res->status)) continue;
            break;
        }
        try {
            const auto j = nlohmann::json::parse(res->body);
            return j.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const nlohmann::json::exception&) {
            last_error = "malformed completion response";
            break;
        }
    }
    throw ProviderError("chat completion failed after " + std::to_string(attempts_) + " attempt(s): " + last_error);
}

std::unique_ptr<Provider> make_provider(const ProviderConfig& config) {
    if (config.kind == ProviderConfig::Kind::Scripted) {
        if (config.scripted_file.empty()) throw ConfigError("scripted provider needs a proposals file");
        return std::make_unique<ScriptedProvider>(ScriptedProvider::from_file(config.scripted_file));
    }
    return std::make_unique<HttpProvider>(HttpProvider::from_env(config));
}

std::string last_fenced_block(const std::string& raw) {
    std::optional<std::string> found;
    std::size_t pos = 0;
    while (true) {
        const auto open = raw.find("```", pos);
        if (open == std::string::npos) break;
        const auto eol = raw.find('\n', open);
        if (eol == std::string::npos) break;
        const auto close = raw.find("```", eol + 1);
        if (close == std::string::npos) break;
        found = raw.substr(eol + 1, close - eol - 1);
        pos = close + 3;
    }
    if (!found) throw ExtractionError("no config block");
    return *found;
}

dsl::StructuralConfig extract_config(const std::string& raw) {
    auto config = dsl::parse_config(last_fenced_block(raw));
    const auto report = dsl::validate(config);
    if (!report.ok()) throw ConfigError("config failed validation:\n" + report.summary());
    return config;
}

} // namespace gsim::llm
