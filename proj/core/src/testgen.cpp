#include "ragvv/testgen.hpp"

#include <algorithm>
#include <numeric>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "ragvv/error.hpp"
#include "ragvv/hashing.hpp"
#include "ragvv/parallel.hpp"

namespace ragvv {

using nlohmann::json;

namespace {

std::vector<bool> bitmap(const std::vector<int>& ids, int width) {
    std::vector<bool> bits(static_cast<std::size_t>(width), false);
    for (const int id : ids) {
        if (id >= 1 && id <= width) bits[static_cast<std::size_t>(id - 1)] = true;
    }
    return bits;
}

double percent(std::size_t part, std::size_t whole) {
    return whole == 0 ? 0.0 : 100.0 * static_cast<double>(part) / static_cast<double>(whole);
}

std::vector<std::size_t> valid_indices(const CoverageRecord& record) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < record.per_test.size(); ++i) {
        if (record.per_test[i].syntax_ok) out.push_back(i);
    }
    return out;
}

// Union coverage percentages of the chosen tests against the task's totals.
class UnionCounter {
public:
    UnionCounter(const CoverageRecord& record, const TestGenTask& task)
        : record_(record),
          lines_(static_cast<std::size_t>(task.total_lines)),
          branches_(static_cast<std::size_t>(task.total_branches)) {}

    template <typename Indices>
    std::pair<double, double> operator()(const Indices& chosen) {
        std::fill(lines_.begin(), lines_.end(), false);
        std::fill(branches_.begin(), branches_.end(), false);
        for (const std::size_t i : chosen) {
            const auto& t = record_.per_test[i];
            for (std::size_t b = 0; b < t.lines.size() && b < lines_.size(); ++b) lines_[b] = lines_[b] || t.lines[b];
            for (std::size_t b = 0; b < t.branches.size() && b < branches_.size(); ++b) {
                branches_[b] = branches_[b] || t.branches[b];
            }
        }
        const auto covered_lines = static_cast<std::size_t>(std::count(lines_.begin(), lines_.end(), true));
        const auto covered_branches = static_cast<std::size_t>(std::count(branches_.begin(), branches_.end(), true));
        // A program without branches has nothing left uncovered once any valid test ran.
        const double branch = branches_.empty() ? (chosen.empty() ? 0.0 : 100.0) : percent(covered_branches, branches_.size());
        return {percent(covered_lines, lines_.size()), branch};
    }

private:
    const CoverageRecord& record_;
    std::vector<bool> lines_;
    std::vector<bool> branches_;
};

// C(n, k), saturating just above `cap`.
std::uint64_t binomial_capped(std::uint64_t n, std::uint64_t k, std::uint64_t cap) {
    k = std::min(k, n - k);
    std::uint64_t result = 1;
    for (std::uint64_t i = 1; i <= k; ++i) {
        result = result * (n - k + i) / i;
        if (result > cap) return cap + 1;
    }
    return result;
}

std::string trim_trailing_newlines(std::string s) {
    while (!s.empty() && (s.back() == '\n' || s.back() == '\r')) s.pop_back();
    return s;
}

std::string_view trim_left(std::string_view s) {
    const auto b = s.find_first_not_of(" \t");
    return b == std::string_view::npos ? std::string_view{} : s.substr(b);
}

}  // namespace

CoverageRecord to_record(const runner::CoverageResponse& response, const TestGenTask& task) {
    if (response.total_lines != task.total_lines) {
        throw RunnerError(fmt::format("task '{}': runner counts {} executable lines, dataset says {}", task.task_id,
                                      response.total_lines, task.total_lines));
    }
    if (response.total_branches != task.total_branches) {
        spdlog::warn("task '{}': runner numbers {} branches, dataset says {}; using the dataset total", task.task_id,
                     response.total_branches, task.total_branches);
    }
    CoverageRecord record;
    record.task_id = task.task_id;
    record.total_lines = task.total_lines;
    record.total_branches = task.total_branches;
    for (const auto& t : response.per_test) {
        PerTestCoverage c;
        c.index = t.index;
        c.syntax_ok = t.syntax_ok;
        c.exec_ok = t.syntax_ok && t.exec_ok;
        c.lines = bitmap(t.syntax_ok ? t.covered_lines : std::vector<int>{}, task.total_lines);
        c.branches = bitmap(t.syntax_ok ? t.covered_branches : std::vector<int>{}, task.total_branches);
        record.per_test.push_back(std::move(c));
    }
    return record;
}

TaskCoverage compute_coverage(const CoverageRecord& record, const TestGenTask& task) {
    TaskCoverage out;
    if (record.per_test.empty()) return out;
    const auto valid = valid_indices(record);
    const auto executed = static_cast<std::size_t>(std::count_if(record.per_test.begin(), record.per_test.end(),
                                                                  [](const PerTestCoverage& t) { return t.exec_ok; }));
    out.syntax_pct = percent(valid.size(), record.per_test.size());
    out.exec_pct = percent(executed, record.per_test.size());
    UnionCounter count(record, task);
    std::tie(out.line_pct, out.branch_pct) = count(valid);
    return out;
}

CovAtK cov_at_k(const CoverageRecord& record, const TestGenTask& task, int k, int trials, std::uint64_t seed,
                CovAtKMethod method) {
    const auto pool = valid_indices(record);
    const auto n = pool.size();
    if (k < 1 || static_cast<std::size_t>(k) > n) {
        throw DataError(fmt::format("cov@{}: task '{}' has only {} syntactically valid tests", k, task.task_id, n));
    }
    if (trials < 1) throw DataError("cov@k needs at least one trial");
    const auto kk = static_cast<std::size_t>(k);
    UnionCounter count(record, task);
    CovAtK out;
    const bool exhaustive =
        method == CovAtKMethod::Exhaustive ||
        (method == CovAtKMethod::Auto && binomial_capped(n, kk, kExhaustiveSubsetLimit) <= kExhaustiveSubsetLimit);

    double line_sum = 0.0;
    double branch_sum = 0.0;
    std::size_t samples = 0;
    std::vector<std::size_t> chosen(kk);
    if (exhaustive) {
        std::vector<std::size_t> pick(kk);
        std::iota(pick.begin(), pick.end(), 0);
        for (;;) {
            for (std::size_t i = 0; i < kk; ++i) chosen[i] = pool[pick[i]];
            const auto [l, b] = count(chosen);
            line_sum += l;
            branch_sum += b;
            ++samples;
            // Advance to the next combination in lexicographic order.
            std::size_t i = kk;
            while (i > 0 && pick[i - 1] == n - kk + (i - 1)) --i;
            if (i == 0) break;
            ++pick[i - 1];
            for (std::size_t j = i; j < kk; ++j) pick[j] = pick[j - 1] + 1;
        }
    } else {
        SplitMix64 rng(seed);
        std::vector<std::size_t> scratch = pool;
        for (int t = 0; t < trials; ++t) {
            for (std::size_t i = 0; i < kk; ++i) {
                const auto j = i + static_cast<std::size_t>(rng.below(n - i));
                std::swap(scratch[i], scratch[j]);
                chosen[i] = scratch[i];
            }
            const auto [l, b] = count(chosen);
            line_sum += l;
            branch_sum += b;
            ++samples;
        }
    }
    out.line_pct = line_sum / static_cast<double>(samples);
    out.branch_pct = branch_sum / static_cast<double>(samples);
    out.exhaustive = exhaustive;
    return out;
}

std::string build_testgen_prompt(const TestGenTask& task, std::span<const KnowledgeDocument> contexts,
                                 std::span<const TestCase> prior, int wanted) {
    std::string prompt = fmt::format(
        "You are writing unit tests for a Python function.\n"
        "Function name: {}\n"
        "Description: {}\n\n"
        "Program under test:\n```python\n{}\n```\n\n",
        task.function_name, task.description, trim_trailing_newlines(task.program_code));
    prompt += fmt::format(
        "Write {} unique test cases. Put each test case in its own ```python code block. Each block must be "
        "self-contained, call {} directly (it is already defined; do not redefine or import it) and check the "
        "result with assert statements.\n",
        wanted, task.function_name);
    if (!contexts.empty()) {
        prompt += "\nReference examples of correct code:\n";
        for (std::size_t i = 0; i < contexts.size(); ++i) {
            prompt += fmt::format("\nExample {}:\n{}\n", i + 1, trim_trailing_newlines(contexts[i].content));
        }
    }
    if (!prior.empty()) {
        prompt += "\nPreviously generated test cases:\n";
        for (const auto& t : prior) {
            prompt += fmt::format("\nTest {}:\n```python\n{}\n```\n", t.index, trim_trailing_newlines(t.code));
        }
        prompt += fmt::format("\nWrite {} new test cases that differ from every previous test case.\n", wanted);
    }
    return prompt;
}

std::vector<TestCase> extract_tests(std::string_view response, int starting_index, int round,
                                    std::span<const TestCase> collected) {
    std::vector<TestCase> out;
    std::string block;
    bool inside = false;
    std::size_t pos = 0;
    auto seen = [&](const std::string& code) {
        return std::any_of(collected.begin(), collected.end(), [&](const TestCase& t) { return t.code == code; }) ||
               std::any_of(out.begin(), out.end(), [&](const TestCase& t) { return t.code == code; });
    };
    while (pos < response.size()) {
        const std::size_t eol = response.find('\n', pos);
        const std::size_t end = eol == std::string_view::npos ? response.size() : eol;
        std::string_view line = response.substr(pos, end - pos);
        pos = end + 1;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        const bool fence = trim_left(line).starts_with("```");
        if (!inside) {
            if (fence) {
                inside = true;
                block.clear();
            }
            continue;
        }
        if (fence) {
            inside = false;
            if (block.find_first_not_of(" \t\n") != std::string::npos && !seen(block)) {
                out.push_back({starting_index + static_cast<int>(out.size()), block, round});
            }
            continue;
        }
        block.append(line);
        block.push_back('\n');
    }
    return out;
}

int TaskResult::valid_tests() const {
    if (!record) return 0;
    return static_cast<int>(std::count_if(record->per_test.begin(), record->per_test.end(),
                                          [](const PerTestCoverage& t) { return t.syntax_ok; }));
}

void score_task(TaskResult& result, const TestGenTask& task, int trials, std::uint64_t seed) {
    result.cov_at_k.clear();
    if (!result.record) return;
    result.coverage = compute_coverage(*result.record, task);
    const int valid = result.valid_tests();
    if (valid == 0) return;
    for (const int k : kReportedK) {
        const int kk = std::min(k, valid);
        result.cov_at_k[k] = cov_at_k(*result.record, task, kk, trials, hash64(seed, fmt::format("{}#{}", task.task_id, k)));
    }
}

namespace {

std::vector<int> set_bits(const std::vector<bool>& bits) {
    std::vector<int> ids;
    for (std::size_t i = 0; i < bits.size(); ++i) {
        if (bits[i]) ids.push_back(static_cast<int>(i + 1));
    }
    return ids;
}

}  // namespace

json to_json(const TaskResult& r) {
    json tests = json::array();
    for (const auto& t : r.tests) tests.push_back({{"index", t.index}, {"round", t.round}, {"code", t.code}});
    json j{{"task_id", r.task_id},
           {"rounds", r.rounds},
           {"tests", std::move(tests)},
           {"retrieved_ids", r.retrieved_ids},
           {"request_hashes", r.request_hashes},
           {"errored", r.errored}};
    if (!r.error.empty()) j["error"] = r.error;
    if (r.record) {
        json per_test = json::array();
        for (const auto& t : r.record->per_test) {
            per_test.push_back({{"index", t.index},
                                {"syntax_ok", t.syntax_ok},
                                {"exec_ok", t.exec_ok},
                                {"covered_lines", set_bits(t.lines)},
                                {"covered_branches", set_bits(t.branches)}});
        }
        j["coverage_record"] = {{"total_lines", r.record->total_lines},
                                {"total_branches", r.record->total_branches},
                                {"per_test", std::move(per_test)}};
        j["coverage"] = {{"syntax", r.coverage.syntax_pct},
                         {"execution", r.coverage.exec_pct},
                         {"line", r.coverage.line_pct},
                         {"branch", r.coverage.branch_pct}};
        json at_k = json::object();
        for (const auto& [k, v] : r.cov_at_k) {
            at_k[std::to_string(k)] = {{"line", v.line_pct}, {"branch", v.branch_pct}, {"exhaustive", v.exhaustive}};
        }
        j["cov_at_k"] = std::move(at_k);
    }
    return j;
}

json to_json(const CoverageMetrics& m) {
    json line_k = json::object();
    json branch_k = json::object();
    for (const auto& [k, v] : m.line_cov_at_k) line_k[std::to_string(k)] = v;
    for (const auto& [k, v] : m.branch_cov_at_k) branch_k[std::to_string(k)] = v;
    return json{{"syntax_pct", m.syntax_pct},
                {"exec_pct", m.exec_pct},
                {"line_cov_pct", m.line_cov_pct},
                {"branch_cov_pct", m.branch_cov_pct},
                {"line_cov_at_k", std::move(line_k)},
                {"branch_cov_at_k", std::move(branch_k)},
                {"tasks_scored", m.tasks_scored},
                {"tasks_without_tests", m.tasks_without_tests},
                {"tasks_errored", m.tasks_errored}};
}

CoverageMetrics coverage_metrics_from_json(const json& j) {
    CoverageMetrics m;
    m.syntax_pct = j.at("syntax_pct").get<double>();
    m.exec_pct = j.at("exec_pct").get<double>();
    m.line_cov_pct = j.at("line_cov_pct").get<double>();
    m.branch_cov_pct = j.at("branch_cov_pct").get<double>();
    for (const auto& [k, v] : j.at("line_cov_at_k").items()) m.line_cov_at_k[std::stoi(k)] = v.get<double>();
    for (const auto& [k, v] : j.at("branch_cov_at_k").items()) m.branch_cov_at_k[std::stoi(k)] = v.get<double>();
    m.tasks_scored = j.value("tasks_scored", 0L);
    m.tasks_without_tests = j.value("tasks_without_tests", 0L);
    m.tasks_errored = j.value("tasks_errored", 0L);
    return m;
}

CoverageMetrics aggregate_testgen(std::span<const TaskResult> results) {
    if (results.empty()) throw DataError("aggregate_testgen: no task results");
    CoverageMetrics m;
    for (const int k : kReportedK) {
        m.line_cov_at_k[k] = 0.0;
        m.branch_cov_at_k[k] = 0.0;
    }
    for (const auto& r : results) {
        if (r.errored) {
            ++m.tasks_errored;
            continue;
        }
        if (r.valid_tests() == 0) {
            ++m.tasks_without_tests;
            continue;
        }
        ++m.tasks_scored;
        m.syntax_pct += r.coverage.syntax_pct;
        m.exec_pct += r.coverage.exec_pct;
        m.line_cov_pct += r.coverage.line_pct;
        m.branch_cov_pct += r.coverage.branch_pct;
        for (const int k : kReportedK) {
            const auto it = r.cov_at_k.find(k);
            if (it == r.cov_at_k.end()) continue;
            m.line_cov_at_k[k] += it->second.line_pct;
            m.branch_cov_at_k[k] += it->second.branch_pct;
        }
    }
    if (m.tasks_scored > 0) {
        const auto n = static_cast<double>(m.tasks_scored);
        m.syntax_pct /= n;
        m.exec_pct /= n;
        m.line_cov_pct /= n;
        m.branch_cov_pct /= n;
        for (auto& [k, v] : m.line_cov_at_k) v /= n;
        for (auto& [k, v] : m.branch_cov_at_k) v /= n;
    }
    return m;
}

std::string testgen_query(const TestGenTask& task) {
    return task.description.empty() ? task.program_code : task.description + "\n" + task.program_code;
}

TestGenRun run_testgen(std::span<const TestGenTask> tasks, const TestGenConfig& config, LlmClient& llm,
                       const EvaluatorFactory& make_evaluator, const Retriever* retriever) {
    if (config.rag && !retriever) throw DataError("RAG is enabled but no index is loaded");
    if (config.n_tests < 1) throw DataError("test count N must be at least 1");
    if (config.round_budget < 1) throw DataError("round budget must be at least 1");
    if (!make_evaluator) throw DataError("run_testgen requires a coverage evaluator");

    TestGenRun run;
    run.started = std::chrono::system_clock::now();
    run.results.resize(tasks.size());
    const int workers = std::max(1, config.workers);
    std::vector<std::unique_ptr<runner::CoverageEvaluator>> evaluators(static_cast<std::size_t>(workers));

    parallel_for(tasks.size(), workers, [&](std::size_t worker, std::size_t i) {
        const TestGenTask& task = tasks[i];
        TaskResult& result = run.results[i];
        result.task_id = task.task_id;

        std::vector<KnowledgeDocument> contexts;
        if (config.rag) {
            auto retrieved = retriever->retrieve(testgen_query(task));
            for (const auto& hit : retrieved.hits) result.retrieved_ids.push_back(hit.doc_id);
            contexts = std::move(retrieved.documents);
        }

        try {
            while (static_cast<int>(result.tests.size()) < config.n_tests && result.rounds < config.round_budget) {
                const int round = result.rounds + 1;
                const int wanted = config.n_tests - static_cast<int>(result.tests.size());
                const auto prompt = build_testgen_prompt(task, contexts, result.tests, wanted);
                const auto request =
                    make_request(config.model, prompt, config.system_preamble, config.temperature, config.max_tokens);
                result.request_hashes.push_back(request_key(request));
                const auto response = llm.complete(request, {task.task_id, result.rounds});
                result.rounds = round;
                auto fresh = extract_tests(response.text, static_cast<int>(result.tests.size()), round, result.tests);
                if (fresh.empty()) spdlog::debug("task {} round {}: no fenced test blocks", task.task_id, round);
                for (auto& t : fresh) {
                    if (static_cast<int>(result.tests.size()) >= config.n_tests) break;
                    result.tests.push_back(std::move(t));
                }
            }
        } catch (const RetryExhaustedError& e) {
            result.errored = true;
            result.error = e.what();
        } catch (const ProviderError& e) {
            result.errored = true;
            result.error = e.what();
        }
        if (result.errored) {
            spdlog::warn("task {}: {}", task.task_id, result.error);
            return;
        }
        if (result.tests.empty()) {
            spdlog::warn("task {}: no test cases after {} rounds", task.task_id, result.rounds);
            return;
        }

        runner::CoverageRequest request;
        request.task_id = task.task_id;
        request.program_source = task.program_code;
        request.timeout_s = config.timeout_s;
        for (const auto& t : result.tests) request.tests.push_back({t.index, t.code});
        auto& evaluator = evaluators[worker];
        if (!evaluator) evaluator = make_evaluator();
        try {
            result.record = to_record(evaluator->evaluate(request), task);
        } catch (const RunnerError& e) {
            result.errored = true;
            result.error = e.what();
            spdlog::warn("task {}: {}", task.task_id, result.error);
            return;
        }
        score_task(result, task, config.cov_trials, config.seed);
    });

    std::sort(run.results.begin(), run.results.end(),
              [](const TaskResult& a, const TaskResult& b) { return a.task_id < b.task_id; });
    if (!run.results.empty()) run.metrics = aggregate_testgen(run.results);
    run.finished = std::chrono::system_clock::now();
    return run;
}

}  // namespace ragvv
