#include "test_support.hpp"

#include <atomic>
#include <random>

#include <unistd.h>

#include <fmt/format.h>

#include "ragvv/llm_client.hpp"
#include "ragvv/mutator.hpp"

namespace ragvv::testkit {

namespace fs = std::filesystem;

fs::path data_path(const std::string& name) { return fs::path(RAGVV_TEST_DATA_DIR) / name; }

std::vector<KnowledgeDocument> snippet_corpus() { return load_knowledge_base(data_path("kb.jsonl")); }

std::vector<InspectionTask> fixture_tasks(std::size_t count, std::uint64_t seed) {
    const auto docs = snippet_corpus();
    std::vector<InspectionTask> out;
    for (int copy = 0; out.size() < count && copy < 1000; ++copy) {
        for (const auto& doc : docs) {
            if (out.size() >= count) break;
            if (auto task = generate_fixture_task(code_of(doc), fmt::format("{}#{}", doc.doc_id, copy), seed)) {
                out.push_back(std::move(*task));
            }
        }
    }
    return out;
}

std::map<std::string, std::string> truth_responses(const std::vector<InspectionTask>& tasks,
                                                   const InspectionConfig& config) {
    std::map<std::string, std::string> out;
    for (const auto& task : tasks) {
        const auto sel = select_variant(task, config.seed);
        out[request_key(inspection_request(task, config))] = std::string(to_string(sel.label));
    }
    return out;
}

std::map<std::string, std::string> bug_free_responses(const std::vector<InspectionTask>& tasks,
                                                      const InspectionConfig& config) {
    std::map<std::string, std::string> out;
    for (const auto& task : tasks) out[request_key(inspection_request(task, config))] = "The code is bug-free.";
    return out;
}

std::vector<std::string> fake_runner(std::vector<std::string> extra) {
    std::vector<std::string> argv{RAGVV_FAKE_RUNNER};
    argv.insert(argv.end(), extra.begin(), extra.end());
    return argv;
}

TestGenTask synthetic_task(int total_lines, int total_branches) {
    TestGenTask t;
    t.task_id = "synthetic";
    t.function_name = "f";
    t.program_code = "def f():\n    return 0\n";
    t.description = "synthetic";
    t.total_lines = total_lines;
    t.total_branches = total_branches;
    return t;
}

CoverageRecord synthetic_record(const TestGenTask& task, const std::vector<std::vector<int>>& lines,
                                const std::vector<std::vector<int>>& branches) {
    CoverageRecord r;
    r.task_id = task.task_id;
    r.total_lines = task.total_lines;
    r.total_branches = task.total_branches;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        PerTestCoverage t;
        t.index = static_cast<int>(i);
        t.syntax_ok = true;
        t.exec_ok = true;
        t.lines.assign(static_cast<std::size_t>(task.total_lines), false);
        t.branches.assign(static_cast<std::size_t>(task.total_branches), false);
        for (const int id : lines[i]) t.lines.at(static_cast<std::size_t>(id - 1)) = true;
        if (i < branches.size()) {
            for (const int id : branches[i]) t.branches.at(static_cast<std::size_t>(id - 1)) = true;
        }
        r.per_test.push_back(std::move(t));
    }
    return r;
}

TempDir::TempDir() {
    static std::atomic<int> counter{0};
    std::random_device rd;
    path_ = fs::temp_directory_path() / fmt::format("ragvv-test-{}-{}-{}", ::getpid(), counter++, rd());
    fs::create_directories(path_);
}

TempDir::~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
}

}  // namespace ragvv::testkit
