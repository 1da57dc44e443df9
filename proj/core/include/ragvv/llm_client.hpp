#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace ragvv {

inline constexpr double kDefaultTemperature = 0.0;
inline constexpr int kDefaultMaxTokens = 256;

enum class Role { System, User, Assistant };

std::string_view to_string(Role role) noexcept;

struct ChatMessage {
    Role role = Role::User;
    std::string content;

    bool operator==(const ChatMessage&) const = default;
};

struct ChatRequest {
    std::string model;
    std::vector<ChatMessage> messages;
    double temperature = kDefaultTemperature;
    int max_tokens = kDefaultMaxTokens;

    /// Throws DataError unless messages are nonempty, the first non-system
    /// message is from the user, temperature is in [0, 2] and max_tokens > 0.
    void validate() const;
};

nlohmann::json to_json(const ChatRequest& request);

/// Stable hex digest of the canonical request (model, messages, temperature, max_tokens).
/// Scripted fixtures are keyed by it.
std::string request_key(const ChatRequest& request);

/// Single user message, optionally preceded by a system preamble.
ChatRequest make_request(std::string model, std::string prompt, std::string_view system_preamble = {},
                         double temperature = kDefaultTemperature, int max_tokens = kDefaultMaxTokens);

struct TokenUsage {
    int prompt = 0;
    int completion = 0;
};

struct ChatResponse {
    std::string text;
    std::string model;
    std::chrono::microseconds latency{0};
    std::optional<TokenUsage> usage;
};

/// Chat backend. send() throws TransientError for retryable failures,
/// AuthError for rejected or missing credentials, ProviderError otherwise.
class LlmProvider {
public:
    virtual ~LlmProvider() = default;
    virtual ChatResponse send(const ChatRequest& request) = 0;
    [[nodiscard]] virtual std::string name() const = 0;
};

/// Pure lookup provider for offline runs. Unknown keys return `default_text`,
/// or throw ProviderError in strict mode.
class ScriptedProvider final : public LlmProvider {
public:
    explicit ScriptedProvider(std::map<std::string, std::string> fixtures, bool strict = false,
                              std::string default_text = "UNKNOWN");

    /// JSON file: {"responses": {key: text}, "strict": bool, "default": text}.
    static std::shared_ptr<ScriptedProvider> from_file(const std::filesystem::path& path);

    ChatResponse send(const ChatRequest& request) override;
    [[nodiscard]] std::string name() const override { return "scripted"; }

    [[nodiscard]] const std::map<std::string, std::string>& fixtures() const noexcept { return fixtures_; }

private:
    std::map<std::string, std::string> fixtures_;
    bool strict_;
    std::string default_text_;
};

std::shared_ptr<LlmProvider> scripted_provider(std::map<std::string, std::string> fixtures, bool strict = false,
                                               std::string default_text = "UNKNOWN");

struct ChatCompletionsConfig {
    std::string endpoint = "https://api.openai.com/v1/chat/completions";
    std::string api_key_env = "OPENAI_API_KEY";
    std::chrono::milliseconds timeout{60000};
};

/// Client for the chat-completions HTTP JSON shape. The credential is read
/// from the configured environment variable at construction; a missing one
/// throws AuthError before any network traffic.
class ChatCompletionsProvider final : public LlmProvider {
public:
    explicit ChatCompletionsProvider(ChatCompletionsConfig config);

    ChatResponse send(const ChatRequest& request) override;
    [[nodiscard]] std::string name() const override { return "chat-completions"; }

private:
    ChatCompletionsConfig config_;
    std::string api_key_;
};

/// Append-only, thread-safe call log. Records are kept in memory and can be
/// written as line-delimited JSON ordered by (item, call).
class RunLog {
public:
    void append(nlohmann::json record);
    [[nodiscard]] std::vector<nlohmann::json> records() const;
    /// Sorted by "item" then "call" so concurrent runs serialize identically.
    [[nodiscard]] std::string to_ndjson() const;
    void write(const std::filesystem::path& path) const;

private:
    mutable std::mutex mutex_;
    std::vector<nlohmann::json> records_;
};

struct RetryPolicy {
    int max_attempts = 5;
    std::chrono::milliseconds base_delay{1000};
    double factor = 2.0;

    /// Delay before attempt `attempt + 1` after `attempt` failures (1-based).
    [[nodiscard]] std::chrono::milliseconds delay_after(int attempt) const;
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

/// Identifies a call in the run log.
struct CallTag {
    std::string item;
    int call = 0;
};

/// One completion with retry and logging. Transient failures are retried with
/// exponential backoff; exhaustion throws RetryExhaustedError.
ChatResponse complete(const ChatRequest& request, LlmProvider& provider, const RetryPolicy& policy = {},
                      RunLog* log = nullptr, const CallTag& tag = {}, const Sleeper& sleeper = {});

struct ClientOptions {
    RetryPolicy retry;
    int max_in_flight = 4;
    std::chrono::milliseconds min_interval{0};  // per-provider rate limit between request starts
    Sleeper sleeper;                            // defaults to std::this_thread::sleep_for
};

/// Shares one provider across pipeline workers behind an in-flight limiter and rate limiter.
class LlmClient {
public:
    LlmClient(std::shared_ptr<LlmProvider> provider, ClientOptions options = {}, std::shared_ptr<RunLog> log = nullptr);

    ChatResponse complete(const ChatRequest& request, const CallTag& tag = {});

    [[nodiscard]] LlmProvider& provider() const noexcept { return *provider_; }
    [[nodiscard]] const std::shared_ptr<RunLog>& log() const noexcept { return log_; }

private:
    void pace();

    std::shared_ptr<LlmProvider> provider_;
    ClientOptions options_;
    std::shared_ptr<RunLog> log_;
    std::counting_semaphore<> in_flight_;
    std::mutex pace_mutex_;
    std::chrono::steady_clock::time_point next_start_{};
};

}  // namespace ragvv
