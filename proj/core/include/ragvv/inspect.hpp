#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ragvv/corpus.hpp"
#include "ragvv/llm_client.hpp"
#include "ragvv/retrieval.hpp"

namespace ragvv {

/// Detection rate of human code inspectors, reported alongside accuracy.
inline constexpr double kHumanInspectorRate = 60.0;

struct InspectionPrediction {
    std::string task_id;
    std::size_t variant_index = 0;
    BugLabel truth = BugLabel::BugFree;
    std::optional<int> truth_line;
    PredictedLabel predicted;
    std::optional<int> predicted_line;
    std::string raw_response;
    std::vector<std::string> retrieved_ids;
    std::string request_hash;
    std::optional<bool> judged_match;  // set in judge mode
    bool errored = false;
    std::string error;
};

nlohmann::json to_json(const InspectionPrediction& p);
InspectionPrediction prediction_from_json(const nlohmann::json& j);

struct InspectionMetrics {
    long matches = 0;
    long mismatches = 0;
    long errored = 0;
    long unparseable = 0;
    double accuracy = 0.0;  // percent, full precision
    std::array<long, kBugLabelCount> mismatch_counts{};    // keyed by truth label
    std::array<double, kBugLabelCount> mismatch_rates{};   // percent of all mismatches

    [[nodiscard]] long total() const noexcept { return matches + mismatches; }
};

nlohmann::json to_json(const InspectionMetrics& m);
InspectionMetrics inspection_metrics_from_json(const nlohmann::json& j);

/// Derives accuracy and rates from raw counts; used by score_inspection and
/// for importing existing result tables.
InspectionMetrics metrics_from_counts(long matches, long mismatches,
                                      const std::array<long, kBugLabelCount>& mismatch_counts = {});

std::string build_inspection_prompt(const BugVariant& variant, std::span<const KnowledgeDocument> contexts);

struct ParsedLabel {
    PredictedLabel label;
    std::optional<int> line;

    bool operator==(const ParsedLabel&) const = default;
};

/// Maps free-form model output onto the label vocabulary via a fixed synonym
/// table checked in priority order. Unmatched text is Unparseable.
ParsedLabel parse_bug_label(std::string_view response);

enum class Verdict { Match, Mismatch };

std::string build_judge_prompt(std::string_view prediction_text, BugLabel truth);

/// Interprets a judge reply: leading "yes" is Match, leading "no" is Mismatch,
/// anything else is Mismatch with a warning.
Verdict parse_judge_reply(std::string_view reply);

Verdict judge_with_llm(std::string_view prediction_text, BugLabel truth, LlmClient& judge,
                       const std::string& judge_model, const CallTag& tag = {});

/// Match requires agreeing labels (or a positive judge verdict); with
/// require_line, buggy variants also need the right line.
bool is_match(const InspectionPrediction& p, bool require_line = false);

/// Exact integer counting over non-errored predictions. Throws on empty input.
InspectionMetrics score_inspection(std::span<const InspectionPrediction> predictions, bool require_line = false);

struct InspectionConfig {
    std::string model = "gpt-3.5-turbo";
    bool rag = false;
    std::size_t k = kDefaultTopK;
    std::uint64_t seed = 0;
    bool judge = false;
    std::string judge_model = "gpt-3.5-turbo";
    bool require_line = false;
    int workers = 4;
    double temperature = kDefaultTemperature;
    int max_tokens = kDefaultMaxTokens;
    std::string system_preamble;
};

struct InspectionRun {
    std::vector<InspectionPrediction> predictions;  // sorted by task_id
    InspectionMetrics metrics;
    std::chrono::system_clock::time_point started;
    std::chrono::system_clock::time_point finished;
};

/// Selects one variant per task, optionally retrieves context, queries the
/// model and scores the answers. `retriever` is required iff config.rag;
/// `judge` is required iff config.judge.
InspectionRun run_inspection(std::span<const InspectionTask> tasks, const InspectionConfig& config, LlmClient& llm,
                             const Retriever* retriever = nullptr, LlmClient* judge = nullptr);

/// The exact request run_inspection sends for one task (used to author scripted fixtures).
ChatRequest inspection_request(const InspectionTask& task, const InspectionConfig& config,
                               const Retriever* retriever = nullptr);

}  // namespace ragvv
