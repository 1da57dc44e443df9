#include <gtest/gtest.h>

#include <cstdlib>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ragvv/cli.hpp"
#include "ragvv/corpus.hpp"
#include "ragvv/report.hpp"
#include "test_support.hpp"

namespace {

using namespace ragvv;
using ragvv::cli::ExitCode;
namespace fs = std::filesystem;

struct Outcome {
    int code = 0;
    std::string out;
    std::string err;
};

Outcome invoke(std::vector<std::string> args) {
    std::ostringstream out;
    std::ostringstream err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

std::string runner_command(const std::vector<std::string>& extra = {}) {
    std::string cmd;
    for (const auto& a : testkit::fake_runner(extra)) cmd += (cmd.empty() ? "" : " ") + a;
    return cmd;
}

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        kb = testkit::data_path("kb.jsonl").string();
        tasks = (dir / "tasks.jsonl").string();
        fixtures = (dir / "fixtures.json").string();
        const auto gen = invoke({"fixture-gen", "--kb", kb, "--out", tasks, "--seed", "4", "--copies", "2",
                                 "--responses", fixtures});
        ASSERT_EQ(gen.code, 0) << gen.err;
    }

    Outcome inspect(std::vector<std::string> extra) {
        std::vector<std::string> args{"inspect", "--dataset", tasks, "--seed", "4", "--out", (dir / "runs").string()};
        args.insert(args.end(), extra.begin(), extra.end());
        return invoke(args);
    }

    testkit::TempDir dir;
    std::string kb;
    std::string tasks;
    std::string fixtures;
};

TEST(CliBasics, HelpShowsSubcommandsAndDefaults) {
    const auto top = invoke({"--help"});
    EXPECT_EQ(top.code, 0);
    for (const char* sub : {"ingest", "index", "inspect", "testgen", "fixture-gen", "report", "compare"}) {
        EXPECT_NE(top.out.find(sub), std::string::npos) << sub;
    }
    const auto sub = invoke({"inspect", "--help"});
    EXPECT_EQ(sub.code, 0);
    EXPECT_NE(sub.out.find("--k"), std::string::npos);
    EXPECT_NE(sub.out.find("[3]"), std::string::npos);
    EXPECT_NE(sub.out.find("gpt-3.5-turbo"), std::string::npos);
}

TEST(CliBasics, UsageErrors) {
    EXPECT_EQ(invoke({}).code, ExitCode::kUsage);
    EXPECT_EQ(invoke({"frobnicate"}).code, ExitCode::kUsage);
    EXPECT_EQ(invoke({"inspect"}).code, ExitCode::kUsage);
    EXPECT_EQ(invoke({"inspect", "--dataset", "/nonexistent/file"}).code, ExitCode::kUsage);
}

TEST(CliBasics, ExitCodeTable) {
    EXPECT_EQ(cli::exit_code_for(ErrorCategory::Usage), 2);
    EXPECT_EQ(cli::exit_code_for(ErrorCategory::Data), 3);
    EXPECT_EQ(cli::exit_code_for(ErrorCategory::Auth), 4);
    EXPECT_EQ(cli::exit_code_for(ErrorCategory::Provider), 5);
    EXPECT_EQ(cli::exit_code_for(ErrorCategory::ProviderExhausted), 5);
    EXPECT_EQ(cli::exit_code_for(ErrorCategory::Runner), 6);
    EXPECT_EQ(cli::exit_code_for(ErrorCategory::Compare), 7);
    EXPECT_EQ(cli::exit_code_for(ErrorCategory::Internal), 1);
}

TEST(CliBasics, IngestNormalizes) {
    testkit::TempDir dir;
    const auto r = invoke({"ingest", "--input", testkit::data_path("kb.jsonl").string(), "--output",
                           (dir / "kb.jsonl").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(load_knowledge_base(dir / "kb.jsonl"), testkit::snippet_corpus());
}

TEST_F(CliTest, FixtureGenWritesTasks) {
    const auto loaded = load_inspection_tasks(tasks);
    EXPECT_GE(loaded.size(), 40u);
    EXPECT_NE(loaded.front().task_id.find('#'), std::string::npos);
}

TEST_F(CliTest, EchoFixturesScorePerfectlyAndDeterministically) {
    const auto first = inspect({"--fixtures", fixtures, "--run-id", "a"});
    ASSERT_EQ(first.code, 0) << first.err;
    EXPECT_NE(first.out.find("accuracy 100.00%"), std::string::npos);
    const auto second = inspect({"--fixtures", fixtures, "--run-id", "b", "--workers", "1"});
    ASSERT_EQ(second.code, 0) << second.err;
    for (const char* name : {"items.ndjson", "table.csv", "mismatch_rates.csv"}) {
        EXPECT_EQ(read_file(dir / "runs" / "a" / name), read_file(dir / "runs" / "b" / name)) << name;
    }
    for (const char* name : {"report.json", "log.ndjson", "efficiency.csv", "table.md"}) {
        EXPECT_TRUE(fs::exists(dir / "runs" / "a" / name)) << name;
    }
    const auto report = load_report(dir / "runs" / "a");
    EXPECT_EQ(report.inspection().matches, static_cast<long>(load_inspection_tasks(tasks).size()));
    EXPECT_EQ(report.config["seed"], 4);
}

TEST_F(CliTest, DefaultRunIdIsDerived) {
    const auto r = inspect({"--fixtures", fixtures, "--model", "gpt-3.5-turbo"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_TRUE(fs::exists(dir / "runs" / "inspect-gpt-3.5-turbo-base-s4" / "report.json"));
}

TEST_F(CliTest, RagWithoutIndexIsUsageError) {
    const auto r = inspect({"--rag", "on"});
    EXPECT_EQ(r.code, ExitCode::kUsage);
    EXPECT_NE(r.err.find("ragvv index"), std::string::npos);
    EXPECT_EQ(inspect({"--rag", "on", "--index", (dir / "missing.idx").string(), "--kb", kb}).code,
              ExitCode::kData);
}

TEST_F(CliTest, RagRunWithBuiltIndex) {
    const auto idx = (dir / "kb.idx").string();
    const auto built = invoke({"index", "--kb", kb, "--out", idx, "--dim", "128"});
    ASSERT_EQ(built.code, 0) << built.err;
    const auto r = inspect({"--rag", "on", "--index", idx, "--kb", kb, "--dim", "128", "--k", "2", "--run-id", "r"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto line = read_file(dir / "runs" / "r" / "items.ndjson");
    const auto first = nlohmann::json::parse(line.substr(0, line.find('\n')));
    EXPECT_EQ(first["retrieved_ids"].size(), 2u);
    // Index embedded at D=128 cannot be queried with the default dimension.
    EXPECT_EQ(inspect({"--rag", "on", "--index", idx, "--kb", kb}).code, ExitCode::kData);
}

TEST_F(CliTest, CompareAndReport) {
    ASSERT_EQ(inspect({"--fixtures", fixtures, "--run-id", "good"}).code, 0);
    ASSERT_EQ(inspect({"--run-id", "blind"}).code, 0);
    const auto diff = invoke({"compare", (dir / "runs" / "good").string(), (dir / "runs" / "blind").string()});
    ASSERT_EQ(diff.code, 0) << diff.err;
    EXPECT_NE(diff.out.find("accuracy"), std::string::npos);
    const auto as_json = invoke(
        {"compare", (dir / "runs" / "good").string(), (dir / "runs" / "blind").string(), "--json"});
    EXPECT_EQ(nlohmann::json::parse(as_json.out)["a"], "good");

    const auto csv = invoke({"report", (dir / "runs" / "good").string(), (dir / "runs" / "blind").string(), "--format",
                             "csv"});
    ASSERT_EQ(csv.code, 0) << csv.err;
    EXPECT_EQ(csv.out.substr(0, csv.out.find('\n')), "Model,RAG,Matches,Mismatches,Accuracy");
    const auto written = invoke({"report", (dir / "runs" / "good").string(), "--format", "markdown", "--out",
                                 (dir / "tables").string()});
    ASSERT_EQ(written.code, 0) << written.err;
    EXPECT_TRUE(fs::exists(dir / "tables" / "table.md"));
}

TEST_F(CliTest, CompareAcrossDatasetsFails) {
    ASSERT_EQ(inspect({"--fixtures", fixtures, "--run-id", "one"}).code, 0);
    const auto other = (dir / "other.jsonl").string();
    ASSERT_EQ(invoke({"fixture-gen", "--kb", kb, "--out", other, "--seed", "5"}).code, 0);
    ASSERT_EQ(invoke({"inspect", "--dataset", other, "--out", (dir / "runs").string(), "--run-id", "two"}).code, 0);
    const auto r = invoke({"compare", (dir / "runs" / "one").string(), (dir / "runs" / "two").string()});
    EXPECT_EQ(r.code, ExitCode::kCompare);
    EXPECT_EQ(invoke({"compare", (dir / "runs" / "one").string(), (dir / "nowhere").string()}).code, ExitCode::kData);
}

TEST_F(CliTest, MissingCredentialIsAuthError) {
    ::unsetenv("RAGVV_CLI_TEST_KEY");
    const auto r = inspect({"--provider", "openai", "--api-key-env", "RAGVV_CLI_TEST_KEY"});
    EXPECT_EQ(r.code, ExitCode::kAuth);
    EXPECT_NE(r.err.find("RAGVV_CLI_TEST_KEY"), std::string::npos);
}

TEST_F(CliTest, EveryRequestFailingIsProviderError) {
    const auto strict = (dir / "strict.json").string();
    write_file_atomic(strict, R"({"responses": {}, "strict": true})");
    EXPECT_EQ(inspect({"--fixtures", strict}).code, ExitCode::kProvider);
}

TEST_F(CliTest, ConfigFileSuppliesDefaultsAndFlagsWin) {
    const auto cfg = (dir / "ragvv.toml").string();
    write_file_atomic(cfg, "[inspect]\nmodel = \"config-model\"\nworkers = 2\n");
    std::vector<std::string> base{"--config", cfg, "inspect", "--dataset", tasks, "--seed", "4",
                                  "--out", (dir / "runs").string()};
    ASSERT_EQ(invoke(base).code, 0);
    EXPECT_TRUE(fs::exists(dir / "runs" / "inspect-config-model-base-s4"));
    base.insert(base.end(), {"--model", "flag-model"});
    ASSERT_EQ(invoke(base).code, 0);
    EXPECT_TRUE(fs::exists(dir / "runs" / "inspect-flag-model-base-s4"));
    EXPECT_EQ(load_report(dir / "runs" / "inspect-config-model-base-s4").config["workers"], 2);
}

class CliTestgen : public ::testing::Test {
protected:
    Outcome testgen(const std::string& reply, std::vector<std::string> extra = {}) {
        const auto fixtures = (dir / "tg.json").string();
        write_file_atomic(fixtures, nlohmann::json{{"responses", nlohmann::json::object()}, {"default", reply}}.dump());
        std::vector<std::string> args{"testgen", "--dataset", testkit::data_path("testgen_tasks.jsonl").string(),
                                      "--fixtures", fixtures, "--n", "2", "--rounds", "2", "--timeout", "1",
                                      "--out", (dir / "runs").string(), "--run-id", "tg"};
        args.insert(args.end(), extra.begin(), extra.end());
        return invoke(args);
    }

    testkit::TempDir dir;
};

TEST_F(CliTestgen, ScoresWithFakeRunner) {
    const auto r = testgen("```python\nassert True  # covers: 1 2\n```\n", {"--runner", runner_command()});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto report = load_report(dir / "runs" / "tg");
    EXPECT_EQ(report.coverage().tasks_scored, 3);
    // Two of four, six and five lines.
    EXPECT_NEAR(report.coverage().line_cov_pct, (50.0 + 100.0 / 3.0 + 40.0) / 3.0, 1e-9);
    EXPECT_EQ(read_file(dir / "runs" / "tg" / "table.csv").substr(0, 6), "Model,");
}

TEST_F(CliTestgen, RunnerFailures) {
    EXPECT_EQ(testgen("```python\nx\n```\n").code, ExitCode::kUsage);
    EXPECT_EQ(testgen("```python\nx\n```\n", {"--runner", "/nonexistent/runner"}).code, ExitCode::kRunner);
    EXPECT_EQ(testgen("```python\nx\n```\n", {"--runner", runner_command({"--bad-proto"})}).code, ExitCode::kRunner);
    EXPECT_EQ(testgen("```python\n# crash\n```\n", {"--runner", runner_command()}).code, ExitCode::kRunner);
}

TEST(CliSelfTest, PassAndFail) {
    const auto ok = invoke({"runner-selftest", "--runner", runner_command()});
    EXPECT_EQ(ok.code, 0) << ok.err;
    EXPECT_NE(ok.out.find("self-test passed"), std::string::npos);
    EXPECT_EQ(invoke({"runner-selftest", "--runner", runner_command({"--broken"})}).code, ExitCode::kRunner);
}

}  // namespace
