#include "ragvv/llm_client.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "http_client.hpp"
#include "ragvv/corpus.hpp"
#include "ragvv/error.hpp"
#include "ragvv/hashing.hpp"
#include "ragvv/timeutil.hpp"

namespace ragvv {

using nlohmann::json;

std::string_view to_string(Role role) noexcept {
    switch (role) {
        case Role::System: return "system";
        case Role::User: return "user";
        case Role::Assistant: return "assistant";
    }
    return "user";
}

void ChatRequest::validate() const {
    if (model.empty()) throw DataError("chat request without a model name");
    if (messages.empty()) throw DataError("chat request without messages");
    for (const auto& m : messages) {
        if (m.role == Role::System) continue;
        if (m.role != Role::User) throw DataError("first non-system message must come from the user");
        break;
    }
    if (std::all_of(messages.begin(), messages.end(), [](const ChatMessage& m) { return m.role == Role::System; })) {
        throw DataError("chat request has no user message");
    }
    if (!(temperature >= 0.0 && temperature <= 2.0)) {
        throw DataError(fmt::format("temperature {} outside [0, 2]", temperature));
    }
    if (max_tokens <= 0) throw DataError("max_tokens must be positive");
}

json to_json(const ChatRequest& request) {
    json messages = json::array();
    for (const auto& m : request.messages) messages.push_back({{"role", to_string(m.role)}, {"content", m.content}});
    return json{{"model", request.model},
                {"messages", std::move(messages)},
                {"temperature", request.temperature},
                {"max_tokens", request.max_tokens}};
}

std::string request_key(const ChatRequest& request) { return content_hash(to_json(request).dump()); }

ChatRequest make_request(std::string model, std::string prompt, std::string_view system_preamble, double temperature,
                         int max_tokens) {
    ChatRequest req;
    req.model = std::move(model);
    if (!system_preamble.empty()) req.messages.push_back({Role::System, std::string(system_preamble)});
    req.messages.push_back({Role::User, std::move(prompt)});
    req.temperature = temperature;
    req.max_tokens = max_tokens;
    return req;
}

ScriptedProvider::ScriptedProvider(std::map<std::string, std::string> fixtures, bool strict, std::string default_text)
    : fixtures_(std::move(fixtures)), strict_(strict), default_text_(std::move(default_text)) {}

std::shared_ptr<ScriptedProvider> ScriptedProvider::from_file(const std::filesystem::path& path) {
    json doc;
    try {
        doc = json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw DataError(fmt::format("{}: malformed fixtures file: {}", path.string(), e.what()));
    }
    std::map<std::string, std::string> fixtures;
    if (const auto it = doc.find("responses"); it != doc.end()) {
        for (const auto& [key, text] : it->items()) fixtures.emplace(key, text.get<std::string>());
    }
    return std::make_shared<ScriptedProvider>(std::move(fixtures), doc.value("strict", false),
                                              doc.value("default", std::string("UNKNOWN")));
}

ChatResponse ScriptedProvider::send(const ChatRequest& request) {
    const auto key = request_key(request);
    ChatResponse response;
    response.model = request.model;
    if (const auto it = fixtures_.find(key); it != fixtures_.end()) {
        response.text = it->second;
    } else if (strict_) {
        throw ProviderError(fmt::format("scripted provider has no fixture for request {}", key));
    } else {
        response.text = default_text_;
    }
    return response;
}

std::shared_ptr<LlmProvider> scripted_provider(std::map<std::string, std::string> fixtures, bool strict,
                                               std::string default_text) {
    return std::make_shared<ScriptedProvider>(std::move(fixtures), strict, std::move(default_text));
}

ChatCompletionsProvider::ChatCompletionsProvider(ChatCompletionsConfig config) : config_(std::move(config)) {
    api_key_ = detail::env_or_empty(config_.api_key_env);
    if (api_key_.empty()) {
        throw AuthError(fmt::format("no API key: set the {} environment variable", config_.api_key_env));
    }
}

ChatResponse ChatCompletionsProvider::send(const ChatRequest& request) {
    const detail::HeaderList headers = {{"Authorization", "Bearer " + api_key_}};
    const auto started = std::chrono::steady_clock::now();
    const auto reply = detail::post_json(config_.endpoint, to_json(request).dump(), headers, config_.timeout);
    const auto latency =
        std::chrono::duration_cast<std::chrono::microseconds>(std::chrono::steady_clock::now() - started);

    if (reply.status == 401 || reply.status == 403) {
        throw AuthError(fmt::format("provider rejected credentials (HTTP {})", reply.status));
    }
    if (reply.status == 429 || reply.status == 408 || reply.status >= 500) {
        throw TransientError(fmt::format("provider returned HTTP {}", reply.status));
    }
    if (reply.status != 200) {
        throw ProviderError(fmt::format("provider returned HTTP {}: {}", reply.status, reply.body));
    }
    ChatResponse response;
    response.latency = latency;
    try {
        const auto body = json::parse(reply.body);
        const auto& message = body.at("choices").at(0).at("message");
        const auto& content = message.at("content");
        response.text = content.is_null() ? std::string{} : content.get<std::string>();
        response.model = body.value("model", request.model);
        if (const auto usage = body.find("usage"); usage != body.end() && usage->is_object()) {
            response.usage = TokenUsage{usage->value("prompt_tokens", 0), usage->value("completion_tokens", 0)};
        }
    } catch (const json::exception& e) {
        throw ProviderError(fmt::format("malformed provider reply: {}", e.what()));
    }
    return response;
}

void RunLog::append(json record) {
    std::lock_guard lock(mutex_);
    records_.push_back(std::move(record));
}

std::vector<json> RunLog::records() const {
    std::lock_guard lock(mutex_);
    return records_;
}

std::string RunLog::to_ndjson() const {
    auto sorted = records();
    std::stable_sort(sorted.begin(), sorted.end(), [](const json& a, const json& b) {
        const auto ia = a.value("item", std::string{});
        const auto ib = b.value("item", std::string{});
        if (ia != ib) return ia < ib;
        return a.value("call", 0) < b.value("call", 0);
    });
    std::string out;
    for (const auto& r : sorted) out += r.dump() + "\n";
    return out;
}

void RunLog::write(const std::filesystem::path& path) const { write_file_atomic(path, to_ndjson()); }

std::chrono::milliseconds RetryPolicy::delay_after(int attempt) const {
    const double scale = std::pow(factor, std::max(0, attempt - 1));
    return std::chrono::milliseconds(static_cast<long long>(static_cast<double>(base_delay.count()) * scale));
}

ChatResponse complete(const ChatRequest& request, LlmProvider& provider, const RetryPolicy& policy, RunLog* log,
                      const CallTag& tag, const Sleeper& sleeper) {
    request.validate();
    const auto key = request_key(request);
    const auto started = std::chrono::steady_clock::now();
    auto record = [&](std::string_view outcome, int attempts, const std::string& error) {
        if (!log) return;
        const auto elapsed = std::chrono::duration_cast<std::chrono::microseconds>(std::chrono::steady_clock::now() - started);
        json entry{{"ts", iso8601_utc(std::chrono::system_clock::now())},
                   {"item", tag.item},
                   {"call", tag.call},
                   {"request_hash", key},
                   {"model", request.model},
                   {"provider", provider.name()},
                   {"attempts", attempts},
                   {"latency_ms", static_cast<double>(elapsed.count()) / 1000.0},
                   {"outcome", outcome}};
        if (!error.empty()) entry["error"] = error;
        log->append(std::move(entry));
    };

    const int max_attempts = std::max(1, policy.max_attempts);
    std::string last_error;
    for (int attempt = 1; attempt <= max_attempts; ++attempt) {
        try {
            const auto attempt_start = std::chrono::steady_clock::now();
            ChatResponse response = provider.send(request);
            if (response.latency.count() == 0) {
                response.latency = std::chrono::duration_cast<std::chrono::microseconds>(
                    std::chrono::steady_clock::now() - attempt_start);
            }
            record("ok", attempt, {});
            return response;
        } catch (const TransientError& e) {
            last_error = e.what();
            spdlog::debug("request {} attempt {}/{} failed: {}", key, attempt, max_attempts, last_error);
            if (attempt == max_attempts) break;
            const auto delay = policy.delay_after(attempt);
            if (sleeper) {
                sleeper(delay);
            } else {
                std::this_thread::sleep_for(delay);
            }
        } catch (const AuthError& e) {
            record("auth_error", attempt, e.what());
            throw;
        } catch (const Error& e) {
            record("error", attempt, e.what());
            throw;
        }
    }
    record("retry_exhausted", max_attempts, last_error);
    throw RetryExhaustedError(fmt::format("request {} failed after {} attempts: {}", key, max_attempts, last_error),
                              max_attempts);
}

LlmClient::LlmClient(std::shared_ptr<LlmProvider> provider, ClientOptions options, std::shared_ptr<RunLog> log)
    : provider_(std::move(provider)),
      options_(std::move(options)),
      log_(std::move(log)),
      in_flight_(std::max<std::ptrdiff_t>(1, options_.max_in_flight)) {
    if (!provider_) throw DataError("LlmClient requires a provider");
}

void LlmClient::pace() {
    if (options_.min_interval.count() <= 0) return;
    std::chrono::steady_clock::time_point slot;
    {
        std::lock_guard lock(pace_mutex_);
        const auto now = std::chrono::steady_clock::now();
        slot = std::max(now, next_start_);
        next_start_ = slot + options_.min_interval;
    }
    std::this_thread::sleep_until(slot);
}

ChatResponse LlmClient::complete(const ChatRequest& request, const CallTag& tag) {
    in_flight_.acquire();
    struct Release {
        std::counting_semaphore<>& s;
        ~Release() { s.release(); }
    } release{in_flight_};
    pace();
    return ragvv::complete(request, *provider_, options_.retry, log_.get(), tag, options_.sleeper);
}

}  // namespace ragvv
