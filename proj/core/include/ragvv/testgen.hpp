#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ragvv/corpus.hpp"
#include "ragvv/coverage_runner.hpp"
#include "ragvv/llm_client.hpp"
#include "ragvv/retrieval.hpp"

namespace ragvv {

inline constexpr int kDefaultTestCount = 20;
inline constexpr int kDefaultRoundBudget = 8;
inline constexpr int kDefaultCovTrials = 100;
inline constexpr std::uint64_t kExhaustiveSubsetLimit = 10000;
/// The k values reported in the coverage table.
inline constexpr std::array<int, 3> kReportedK = {1, 2, 5};

struct TestCase {
    int index = 0;
    std::string code;
    int round = 1;

    bool operator==(const TestCase&) const = default;
};

struct PerTestCoverage {
    int index = 0;
    bool syntax_ok = false;
    bool exec_ok = false;
    std::vector<bool> lines;     // width total_lines; bit i is line i + 1
    std::vector<bool> branches;  // width total_branches
};

struct CoverageRecord {
    std::string task_id;
    int total_lines = 0;
    int total_branches = 0;
    std::vector<PerTestCoverage> per_test;
};

/// Builds bitmaps of the task's widths from a runner reply. A line-count
/// disagreement is a RunnerError; branch ids beyond the task's total are dropped.
CoverageRecord to_record(const runner::CoverageResponse& response, const TestGenTask& task);

struct TaskCoverage {
    double line_pct = 0.0;
    double branch_pct = 0.0;
    double syntax_pct = 0.0;
    double exec_pct = 0.0;
};

/// Union coverage over syntactically valid tests plus pass rates.
TaskCoverage compute_coverage(const CoverageRecord& record, const TestGenTask& task);

enum class CovAtKMethod { Auto, Exhaustive, Sampled };

struct CovAtK {
    double line_pct = 0.0;
    double branch_pct = 0.0;
    bool exhaustive = false;
};

/// Mean union coverage of size-k subsets of the valid tests. Auto enumerates
/// every subset when C(n, k) <= kExhaustiveSubsetLimit and otherwise averages
/// `trials` seeded uniform samples drawn without replacement.
CovAtK cov_at_k(const CoverageRecord& record, const TestGenTask& task, int k, int trials = kDefaultCovTrials,
                std::uint64_t seed = 0, CovAtKMethod method = CovAtKMethod::Auto);

std::string build_testgen_prompt(const TestGenTask& task, std::span<const KnowledgeDocument> contexts,
                                 std::span<const TestCase> prior, int wanted);

/// One TestCase per fenced code block, numbered from starting_index. Blocks
/// byte-identical to an already collected test (or an earlier block) are dropped.
std::vector<TestCase> extract_tests(std::string_view response, int starting_index, int round,
                                    std::span<const TestCase> collected = {});

struct TaskResult {
    std::string task_id;
    std::vector<TestCase> tests;
    int rounds = 0;
    std::vector<std::string> retrieved_ids;
    std::vector<std::string> request_hashes;
    std::optional<CoverageRecord> record;
    TaskCoverage coverage;
    std::map<int, CovAtK> cov_at_k;
    bool errored = false;
    std::string error;

    [[nodiscard]] int valid_tests() const;
};

nlohmann::json to_json(const TaskResult& result);

struct CoverageMetrics {
    double syntax_pct = 0.0;
    double exec_pct = 0.0;
    double line_cov_pct = 0.0;
    double branch_cov_pct = 0.0;
    std::map<int, double> line_cov_at_k;
    std::map<int, double> branch_cov_at_k;
    long tasks_scored = 0;
    long tasks_without_tests = 0;
    long tasks_errored = 0;
};

nlohmann::json to_json(const CoverageMetrics& m);
CoverageMetrics coverage_metrics_from_json(const nlohmann::json& j);

/// Unweighted mean over scored tasks. Errored tasks and tasks without a valid
/// test are counted separately and excluded from the means.
CoverageMetrics aggregate_testgen(std::span<const TaskResult> results);

/// Fills coverage and cov@k for a task once its record is known.
void score_task(TaskResult& result, const TestGenTask& task, int trials, std::uint64_t seed);

struct TestGenConfig {
    std::string model = "gpt-3.5-turbo";
    bool rag = false;
    std::size_t k = kDefaultTopK;
    int n_tests = kDefaultTestCount;
    std::uint64_t seed = 0;
    int round_budget = kDefaultRoundBudget;
    int workers = 4;
    double timeout_s = 10.0;
    int cov_trials = kDefaultCovTrials;
    double temperature = kDefaultTemperature;
    int max_tokens = kDefaultMaxTokens;
    std::string system_preamble;
};

using EvaluatorFactory = std::function<std::unique_ptr<runner::CoverageEvaluator>()>;

struct TestGenRun {
    std::vector<TaskResult> results;  // sorted by task_id
    CoverageMetrics metrics;
    std::chrono::system_clock::time_point started;
    std::chrono::system_clock::time_point finished;
};

/// Per task: one single-shot round, then multi-round requests carrying every
/// earlier test until n_tests unique tests exist or the round budget is spent;
/// then one coverage evaluation. Each worker owns one evaluator from `make_evaluator`.
TestGenRun run_testgen(std::span<const TestGenTask> tasks, const TestGenConfig& config, LlmClient& llm,
                       const EvaluatorFactory& make_evaluator, const Retriever* retriever = nullptr);

/// Query text used to retrieve context for a task.
std::string testgen_query(const TestGenTask& task);

}  // namespace ragvv
