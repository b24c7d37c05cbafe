#pragma once

#include "gsim/dsl.hpp"
#include "gsim/envs.hpp"

#include <chrono>
#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace gsim::llm {

struct Message {
    std::string role;
    std::string content;
};

/// One earlier candidate as shown to the model.
struct HistoryDigest {
    std::size_t iteration = 0;
    std::string config_text;
    double val_loss = 0.0;
    std::vector<std::string> param_names;
    std::vector<double> params;
};

struct PromptContext {
    std::string system;
    std::string task;
    std::vector<HistoryDigest> history; // rendered in this order (lowest loss last)
    std::string feedback;
    std::size_t iteration = 0;
    std::size_t iterations = 5;
    /// Set on corrective rounds: the error the previous reply produced.
    std::string correction;

    [[nodiscard]] std::string user_text() const;
    [[nodiscard]] std::vector<Message> messages() const;
};

/// Reference card for the config language, included in every prompt.
[[nodiscard]] std::string grammar_reference();

/// Domain description for a preset: what is simulated, the observed dimensions, whether
/// an exogenous action exists, and the prior ranges of the ground-truth parameters.
[[nodiscard]] std::string task_description(const envs::EnvSpec& spec);

/// Keeps the top_k lowest-loss entries and orders them with the lowest loss last.
[[nodiscard]] PromptContext build_prompt(const std::string& task, std::vector<HistoryDigest> history,
                                         const std::string& feedback, std::size_t iteration, std::size_t iterations,
                                         std::size_t top_k = 2);

class Provider {
  public:
    virtual ~Provider() = default;
    /// Throws ProviderError when no proposal can be obtained.
    virtual std::string propose(const PromptContext& prompt) = 0;
    [[nodiscard]] std::size_t calls() const noexcept { return calls_; }

  protected:
    std::size_t calls_ = 0;
};

/// Returns queued proposals in order; errors once the queue is exhausted.
class ScriptedProvider : public Provider {
  public:
    explicit ScriptedProvider(std::vector<std::string> proposals);
    /// Proposals separated by lines consisting of "---".
    [[nodiscard]] static ScriptedProvider from_text(const std::string& text);
    [[nodiscard]] static ScriptedProvider from_file(const std::string& path);

    std::string propose(const PromptContext& prompt) override;
    [[nodiscard]] const std::vector<PromptContext>& prompts() const noexcept { return prompts_; }
    [[nodiscard]] std::size_t remaining() const noexcept { return queue_.size() - next_; }

  private:
    std::vector<std::string> queue_;
    std::size_t next_ = 0;
    std::vector<PromptContext> prompts_;
};

struct ProviderConfig {
    enum class Kind { Http, Scripted };
    Kind kind = Kind::Scripted;
    std::string base;   // e.g. https://api.example.com/v1
    std::string model;
    double timeout_seconds = 120.0;
    std::size_t max_retries = 3;
    double backoff_seconds = 1.0;
    std::optional<double> temperature;
    std::string scripted_file;
};

/// OpenAI-compatible chat-completions client. The API key is held in memory only and is
/// never included in error messages.
class HttpProvider : public Provider {
  public:
    HttpProvider(ProviderConfig config, std::string api_key);
    /// Reads GSIM_API_KEY (required) and GSIM_API_BASE (overrides config.base).
    [[nodiscard]] static HttpProvider from_env(ProviderConfig config);

    std::string propose(const PromptContext& prompt) override;
    [[nodiscard]] std::size_t attempts() const noexcept { return attempts_; }
    /// JSON request body for the prompt.
    [[nodiscard]] std::string request_body(const PromptContext& prompt) const;

  private:
    ProviderConfig config_;
    std::string api_key_;
    std::size_t attempts_ = 0;
};

[[nodiscard]] std::unique_ptr<Provider> make_provider(const ProviderConfig& config);

/// Text of the last fenced code block. Throws ExtractionError("no config block").
[[nodiscard]] std::string last_fenced_block(const std::string& raw);

/// Parses and validates the last fenced block. Throws ExtractionError, ParseError or
/// ConfigError; the message is suitable for a corrective prompt.
[[nodiscard]] dsl::StructuralConfig extract_config(const std::string& raw);

} // namespace gsim::llm
