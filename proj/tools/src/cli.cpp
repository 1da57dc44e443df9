#include "ragvv/cli.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "ragvv/corpus.hpp"
#include "ragvv/coverage_runner.hpp"
#include "ragvv/embedder.hpp"
#include "ragvv/inspect.hpp"
#include "ragvv/llm_client.hpp"
#include "ragvv/mutator.hpp"
#include "ragvv/report.hpp"
#include "ragvv/retrieval.hpp"
#include "ragvv/testgen.hpp"
#include "ragvv/vectorstore.hpp"

namespace ragvv::cli {

namespace fs = std::filesystem;
using nlohmann::json;

int exit_code_for(ErrorCategory category) noexcept {
    switch (category) {
        case ErrorCategory::Usage: return kUsage;
        case ErrorCategory::Data: return kData;
        case ErrorCategory::Auth: return kAuth;
        case ErrorCategory::ProviderExhausted:
        case ErrorCategory::Provider: return kProvider;
        case ErrorCategory::Runner: return kRunner;
        case ErrorCategory::Compare: return kCompare;
        case ErrorCategory::Internal: break;
    }
    return kInternal;
}

namespace {

struct EmbedderOptions {
    std::string kind = "hashed";
    std::size_t dim = kDefaultDimension;
    std::string url;
    std::string token_env;
    std::string model = "all-MiniLM-L6-v2";
    std::string cache;
};

struct ProviderOptions {
    std::string provider = "scripted";
    std::string fixtures;
    std::string endpoint = ChatCompletionsConfig{}.endpoint;
    std::string api_key_env = ChatCompletionsConfig{}.api_key_env;
    int retries = RetryPolicy{}.max_attempts;
    int max_in_flight = 4;
    int min_interval_ms = 0;
};

struct RunOptions {
    std::string dataset;
    std::string kb;
    std::string index;
    std::string rag = "off";
    std::size_t k = kDefaultTopK;
    std::string model = "gpt-3.5-turbo";
    std::uint64_t seed = 0;
    std::string out = "runs";
    std::string run_id;
    double temperature = kDefaultTemperature;
    int max_tokens = kDefaultMaxTokens;
    int workers = 4;
    std::string system_preamble;
    ProviderOptions provider;
    EmbedderOptions embedder;

    // inspect
    std::string judge = "off";
    std::string judge_model = "gpt-3.5-turbo";
    bool require_line = false;

    // testgen
    int n = kDefaultTestCount;
    int rounds = kDefaultRoundBudget;
    std::string runner;
    double timeout_s = 10.0;
    int cov_trials = kDefaultCovTrials;
};

struct IngestOptions {
    std::string input;
    std::string output;
};

struct IndexOptions {
    std::string kb;
    std::string out;
    bool include_metadata = false;
    EmbedderOptions embedder;
};

struct FixtureOptions {
    std::string kb;
    std::string out;
    std::uint64_t seed = 0;
    int copies = 1;
    std::size_t limit = 0;
    std::string responses;
    std::string model = "gpt-3.5-turbo";
};

struct ReportOptions {
    std::vector<std::string> runs;
    std::string format = "markdown";
    std::string out;
};

struct CompareOptions {
    std::string a;
    std::string b;
    bool json = false;
};

struct SelfTestOptions {
    std::string runner;
    double timeout_s = 60.0;
};

void add_embedder_options(CLI::App* cmd, EmbedderOptions& o) {
    cmd->add_option("--embedder", o.kind, "Embedding backend")
        ->check(CLI::IsMember({"hashed", "remote"}))
        ->capture_default_str();
    cmd->add_option("--dim", o.dim, "Embedding dimension D")->check(CLI::Range(8, 1 << 16))->capture_default_str();
    cmd->add_option("--embed-url", o.url, "Remote embedding endpoint (remote embedder)");
    cmd->add_option("--embed-token-env", o.token_env, "Environment variable holding the embedding service token");
    cmd->add_option("--embed-model", o.model, "Model name recorded for the remote embedder")->capture_default_str();
    cmd->add_option("--embed-cache", o.cache, "Embedding cache file (read and updated)");
}

void add_provider_options(CLI::App* cmd, ProviderOptions& o) {
    cmd->add_option("--provider", o.provider, "LLM provider")
        ->check(CLI::IsMember({"scripted", "openai"}))
        ->capture_default_str();
    cmd->add_option("--fixtures", o.fixtures, "Scripted provider responses file")->check(CLI::ExistingFile);
    cmd->add_option("--endpoint", o.endpoint, "Chat-completions endpoint URL")->capture_default_str();
    cmd->add_option("--api-key-env", o.api_key_env, "Environment variable holding the API key")->capture_default_str();
    cmd->add_option("--retries", o.retries, "Attempts per request")->check(CLI::Range(1, 20))->capture_default_str();
    cmd->add_option("--max-in-flight", o.max_in_flight, "Concurrent requests per provider")
        ->check(CLI::Range(1, 64))
        ->capture_default_str();
    cmd->add_option("--min-interval-ms", o.min_interval_ms, "Minimum spacing between request starts")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
}

void add_run_options(CLI::App* cmd, RunOptions& o) {
    cmd->add_option("--dataset", o.dataset, "Task file (line-delimited records)")->required()->check(CLI::ExistingFile);
    cmd->add_option("--kb", o.kb, "Knowledge base file")->check(CLI::ExistingFile);
    cmd->add_option("--index", o.index, "Vector index built by `ragvv index`");
    cmd->add_option("--rag", o.rag, "Retrieval augmentation")->check(CLI::IsMember({"on", "off"}))->capture_default_str();
    cmd->add_option("--k", o.k, "Documents retrieved per query")->check(CLI::Range(1, 1000))->capture_default_str();
    cmd->add_option("--model", o.model, "Model name")->capture_default_str();
    cmd->add_option("--seed", o.seed, "Global seed")->capture_default_str();
    cmd->add_option("--out", o.out, "Output root; files go to OUT/RUN_ID")->capture_default_str();
    cmd->add_option("--run-id", o.run_id, "Run identifier (default derived from mode, model, rag and seed)");
    cmd->add_option("--temperature", o.temperature, "Sampling temperature")
        ->check(CLI::Range(0.0, 2.0))
        ->capture_default_str();
    cmd->add_option("--max-tokens", o.max_tokens, "Response token limit")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd->add_option("--workers", o.workers, "Worker threads")->check(CLI::Range(1, 256))->capture_default_str();
    cmd->add_option("--system-preamble", o.system_preamble, "Optional system message");
    add_provider_options(cmd, o.provider);
    add_embedder_options(cmd, o.embedder);
}

std::string default_run_id(std::string_view mode, const RunOptions& o) {
    std::string model;
    for (const char c : o.model) model += std::isalnum(static_cast<unsigned char>(c)) || c == '.' ? c : '-';
    return fmt::format("{}-{}-{}-s{}", mode, model, o.rag == "on" ? "rag" : "base", o.seed);
}

std::shared_ptr<EmbeddingProvider> make_embedder(const EmbedderOptions& o) {
    std::shared_ptr<EmbeddingProvider> base;
    if (o.kind == "remote") {
        if (o.url.empty()) throw UsageError("--embedder remote needs --embed-url");
        RemoteEmbeddingConfig cfg;
        cfg.url = o.url;
        cfg.token_env = o.token_env;
        cfg.model_name = o.model;
        cfg.dimension = o.dim;
        base = std::make_shared<RemoteEmbeddingProvider>(cfg);
    } else {
        base = std::make_shared<HashedEmbeddingProvider>(o.dim);
    }
    if (o.cache.empty()) return base;
    auto cached = std::make_shared<CachedEmbeddingProvider>(base);
    if (fs::exists(o.cache)) cached->load(o.cache);
    return cached;
}

void save_cache(const EmbedderOptions& o, const std::shared_ptr<EmbeddingProvider>& embedder) {
    if (o.cache.empty()) return;
    if (const auto* cached = dynamic_cast<const CachedEmbeddingProvider*>(embedder.get())) cached->save(o.cache);
}

std::shared_ptr<LlmProvider> make_provider(const ProviderOptions& o) {
    if (o.provider == "openai") {
        ChatCompletionsConfig cfg;
        cfg.endpoint = o.endpoint;
        cfg.api_key_env = o.api_key_env;
        return std::make_shared<ChatCompletionsProvider>(cfg);
    }
    if (o.fixtures.empty()) {
        spdlog::warn("scripted provider without --fixtures: every request gets the default reply");
        return scripted_provider({});
    }
    return ScriptedProvider::from_file(o.fixtures);
}

std::unique_ptr<LlmClient> make_client(const ProviderOptions& o, std::shared_ptr<RunLog> log) {
    ClientOptions options;
    options.retry.max_attempts = o.retries;
    options.max_in_flight = o.max_in_flight;
    options.min_interval = std::chrono::milliseconds(o.min_interval_ms);
    return std::make_unique<LlmClient>(make_provider(o), options, std::move(log));
}

// Index, embedder and knowledge base needed to answer retrieval queries.
struct RetrievalSetup {
    std::shared_ptr<EmbeddingProvider> embedder;
    std::optional<VectorIndex> index;
    std::optional<Retriever> retriever;
};

void prepare_retrieval(const RunOptions& o, std::string_view mode, RetrievalSetup& setup) {
    if (o.rag != "on") return;
    if (o.index.empty()) {
        throw UsageError(fmt::format(
            "--rag on needs a vector index. Build one with `ragvv index --kb KB --out INDEX` and rerun {} with "
            "--index INDEX --kb KB",
            mode));
    }
    if (!fs::exists(o.index)) {
        throw DataError(fmt::format("index {} does not exist. Build it with `ragvv index --kb KB --out {}`", o.index,
                                    o.index));
    }
    if (o.kb.empty()) throw UsageError("--rag on needs --kb so retrieved documents can be placed in prompts");
    setup.index = VectorIndex::load(o.index);
    setup.index->attach(load_knowledge_base(o.kb));
    setup.embedder = make_embedder(o.embedder);
    setup.retriever.emplace(*setup.index, *setup.embedder, o.k);
}

json provider_snapshot(const ProviderOptions& o) {
    json j{{"provider", o.provider},
           {"retries", o.retries},
           {"max_in_flight", o.max_in_flight},
           {"min_interval_ms", o.min_interval_ms}};
    if (o.provider == "openai") {
        j["endpoint"] = o.endpoint;
        j["api_key_env"] = o.api_key_env;
    } else {
        j["fixtures"] = o.fixtures;
    }
    return j;
}

json embedder_snapshot(const EmbedderOptions& o) {
    json j{{"embedder", o.kind}, {"dim", o.dim}};
    if (o.kind == "remote") {
        j["embed_url"] = o.url;
        j["embed_model"] = o.model;
        j["embed_token_env"] = o.token_env;
    }
    return j;
}

json run_snapshot(const RunOptions& o) {
    json j{{"dataset", o.dataset},
           {"kb", o.kb},
           {"index", o.index},
           {"rag", o.rag},
           {"k", o.k},
           {"model", o.model},
           {"seed", o.seed},
           {"temperature", o.temperature},
           {"max_tokens", o.max_tokens},
           {"workers", o.workers},
           {"system_preamble", o.system_preamble},
           {"llm", provider_snapshot(o.provider)},
           {"embedding", embedder_snapshot(o.embedder)}};
    return j;
}

void write_ndjson(const fs::path& path, const std::vector<json>& rows) {
    std::string body;
    for (const auto& row : rows) body += row.dump() + "\n";
    write_file_atomic(path, body);
}

void emit_all(RunReport& report, const fs::path& dir, const RunLog& log, const std::vector<json>& items) {
    fs::create_directories(dir);
    write_ndjson(dir / "items.ndjson", items);
    log.write(dir / "log.ndjson");
    report.artifacts = {{"items", "items.ndjson"},       {"log", "log.ndjson"},     {"table_csv", "table.csv"},
                        {"efficiency", "efficiency.csv"}, {"table_md", "table.md"}, {"report", "report.json"}};
    if (report.mode == RunMode::Inspect) report.artifacts["mismatch_rates"] = "mismatch_rates.csv";
    emit_report(report, ReportFormat::Structured, dir);
    emit_report(report, ReportFormat::Csv, dir);
    emit_report(report, ReportFormat::Markdown, dir);
}

int cmd_ingest(const IngestOptions& o, std::ostream& out) {
    const auto docs = load_knowledge_base(o.input);
    write_knowledge_base(o.output, docs);
    out << fmt::format("wrote {} documents to {}\n", docs.size(), o.output);
    return kOk;
}

int cmd_index(const IndexOptions& o, std::ostream& out) {
    const auto docs = load_knowledge_base(o.kb);
    if (docs.empty()) throw DataError(fmt::format("{} holds no documents", o.kb));
    auto embedder = make_embedder(o.embedder);
    const auto index = build_index(docs, *embedder, o.include_metadata);
    index.save(o.out);
    save_cache(o.embedder, embedder);
    out << fmt::format("indexed {} documents with {} into {}\n", index.size(), index.provider_id(), o.out);
    return kOk;
}

int cmd_fixture_gen(const FixtureOptions& o, std::ostream& out) {
    const auto docs = load_knowledge_base(o.kb);
    std::vector<InspectionTask> tasks;
    std::size_t skipped = 0;
    for (const auto& doc : docs) {
        for (int c = 0; c < o.copies; ++c) {
            if (o.limit && tasks.size() >= o.limit) break;
            const auto id = o.copies == 1 ? doc.doc_id : fmt::format("{}#{}", doc.doc_id, c);
            if (auto task = generate_fixture_task(code_of(doc), id, o.seed)) {
                tasks.push_back(std::move(*task));
            } else {
                ++skipped;
                spdlog::info("{}: not usable as a fixture", id);
            }
        }
    }
    if (tasks.empty()) throw DataError(fmt::format("no snippet in {} produced a fixture task", o.kb));
    write_inspection_tasks(o.out, tasks);
    out << fmt::format("wrote {} tasks to {} ({} skipped)\n", tasks.size(), o.out, skipped);

    if (!o.responses.empty()) {
        // Ground-truth answers for the variant each task will present at this seed.
        InspectionConfig config;
        config.model = o.model;
        config.seed = o.seed;
        json responses = json::object();
        for (const auto& task : tasks) {
            const auto selection = select_variant(task, o.seed);
            std::string answer(to_string(selection.label));
            if (selection.variant->defect_line) answer += fmt::format(" line {}", *selection.variant->defect_line);
            responses[request_key(inspection_request(task, config))] = answer;
        }
        write_file_atomic(o.responses, json{{"responses", responses}, {"strict", true}}.dump(2) + "\n");
        out << fmt::format("wrote {} scripted responses to {}\n", tasks.size(), o.responses);
    }
    return kOk;
}

int cmd_inspect(const RunOptions& o, std::ostream& out) {
    if (o.judge == "on" && o.provider.provider == "scripted" && o.provider.fixtures.empty()) {
        spdlog::warn("judge mode with an unscripted provider marks every answer a mismatch");
    }
    const auto tasks = load_inspection_tasks(o.dataset);
    if (tasks.empty()) throw DataError(fmt::format("{} holds no tasks", o.dataset));

    RetrievalSetup retrieval;
    prepare_retrieval(o, "inspect", retrieval);

    auto log = std::make_shared<RunLog>();
    auto llm = make_client(o.provider, log);
    std::unique_ptr<LlmClient> judge;
    if (o.judge == "on") judge = make_client(o.provider, log);

    InspectionConfig config;
    config.model = o.model;
    config.rag = o.rag == "on";
    config.k = o.k;
    config.seed = o.seed;
    config.judge = o.judge == "on";
    config.judge_model = o.judge_model;
    config.require_line = o.require_line;
    config.workers = o.workers;
    config.temperature = o.temperature;
    config.max_tokens = o.max_tokens;
    config.system_preamble = o.system_preamble;

    const auto run = run_inspection(tasks, config, *llm, retrieval.retriever ? &*retrieval.retriever : nullptr,
                                    judge.get());
    if (retrieval.embedder) save_cache(o.embedder, retrieval.embedder);

    RunReport report;
    report.run_id = o.run_id.empty() ? default_run_id("inspect", o) : o.run_id;
    report.mode = RunMode::Inspect;
    report.model = o.model;
    report.rag = config.rag;
    report.k = o.k;
    report.dataset_hash = content_hash(read_file(o.dataset));
    report.config = run_snapshot(o);
    report.config["judge"] = o.judge;
    report.config["judge_model"] = o.judge_model;
    report.config["require_line"] = o.require_line;
    report.metrics = run.metrics;
    set_times(report, run.started, run.finished);

    std::vector<json> items;
    items.reserve(run.predictions.size());
    for (const auto& p : run.predictions) items.push_back(to_json(p));
    const fs::path dir = fs::path(o.out) / report.run_id;
    emit_all(report, dir, *log, items);

    const auto& m = run.metrics;
    out << fmt::format("{}: {} matches, {} mismatches, accuracy {:.2f}% ({} unparseable, {} errored) in {}\n",
                       report.run_id, m.matches, m.mismatches, m.accuracy, m.unparseable, m.errored, dir.string());
    if (m.errored > 0 && m.total() == 0) {
        throw RetryExhaustedError(fmt::format("every request failed; see {}", (dir / "log.ndjson").string()), 0);
    }
    return kOk;
}

int cmd_testgen(const RunOptions& o, std::ostream& out) {
    if (o.runner.empty()) {
        throw UsageError("testgen needs --runner CMD, the command that starts a coverage runner");
    }
    const auto argv = runner::split_command(o.runner);
    const auto tasks = load_testgen_tasks(o.dataset);
    if (tasks.empty()) throw DataError(fmt::format("{} holds no tasks", o.dataset));

    {
        runner::SubprocessRunner probe(argv);
        const auto& hello = probe.handshake();
        spdlog::info("coverage runner ready: {}", hello.dump());
    }

    RetrievalSetup retrieval;
    prepare_retrieval(o, "testgen", retrieval);

    auto log = std::make_shared<RunLog>();
    auto llm = make_client(o.provider, log);

    TestGenConfig config;
    config.model = o.model;
    config.rag = o.rag == "on";
    config.k = o.k;
    config.n_tests = o.n;
    config.seed = o.seed;
    config.round_budget = o.rounds;
    config.workers = o.workers;
    config.timeout_s = o.timeout_s;
    config.cov_trials = o.cov_trials;
    config.temperature = o.temperature;
    config.max_tokens = o.max_tokens;
    config.system_preamble = o.system_preamble;

    const EvaluatorFactory factory = [argv] { return std::make_unique<runner::SubprocessRunner>(argv); };
    const auto run =
        run_testgen(tasks, config, *llm, factory, retrieval.retriever ? &*retrieval.retriever : nullptr);
    if (retrieval.embedder) save_cache(o.embedder, retrieval.embedder);

    RunReport report;
    report.run_id = o.run_id.empty() ? default_run_id("testgen", o) : o.run_id;
    report.mode = RunMode::Testgen;
    report.model = o.model;
    report.rag = config.rag;
    report.k = o.k;
    report.dataset_hash = content_hash(read_file(o.dataset));
    report.config = run_snapshot(o);
    report.config["n"] = o.n;
    report.config["rounds"] = o.rounds;
    report.config["runner"] = o.runner;
    report.config["timeout_s"] = o.timeout_s;
    report.config["cov_trials"] = o.cov_trials;
    report.metrics = run.metrics;
    set_times(report, run.started, run.finished);

    std::vector<json> items;
    items.reserve(run.results.size());
    for (const auto& r : run.results) items.push_back(to_json(r));
    const fs::path dir = fs::path(o.out) / report.run_id;
    emit_all(report, dir, *log, items);

    const auto& m = run.metrics;
    out << fmt::format("{}: {} tasks scored, line {:.2f}%, branch {:.2f}% ({} without tests, {} errored) in {}\n",
                       report.run_id, m.tasks_scored, m.line_cov_pct, m.branch_cov_pct, m.tasks_without_tests,
                       m.tasks_errored, dir.string());
    if (m.tasks_scored == 0 && m.tasks_errored > 0) {
        const bool runner_fault = std::any_of(run.results.begin(), run.results.end(), [](const TaskResult& r) {
            return r.errored && r.record == std::nullopt && !r.tests.empty();
        });
        if (runner_fault) throw RunnerError("every task failed in the coverage runner");
        throw RetryExhaustedError("every task failed at the provider", 0);
    }
    return kOk;
}

int cmd_report(const ReportOptions& o, std::ostream& out) {
    std::vector<RunReport> reports;
    for (const auto& r : o.runs) reports.push_back(load_report(r));
    const auto format = parse_report_format(o.format);
    if (o.out.empty()) {
        if (format == ReportFormat::Structured) {
            for (const auto& r : reports) out << render_structured(r);
        } else if (format == ReportFormat::Csv) {
            out << render_results_csv(reports);
        } else {
            out << render_markdown(reports);
        }
        return kOk;
    }
    if (format == ReportFormat::Structured && reports.size() > 1) {
        for (const auto& r : reports) emit_report(r, format, fs::path(o.out) / r.run_id);
    } else {
        for (const auto& path : emit_reports(reports, format, o.out)) out << path.string() << "\n";
    }
    return kOk;
}

int cmd_compare(const CompareOptions& o, std::ostream& out) {
    const auto diff = compare_runs(load_report(o.a), load_report(o.b));
    out << (o.json ? to_json(diff).dump(2) + "\n" : render_diff(diff));
    return kOk;
}

int cmd_selftest(const SelfTestOptions& o, std::ostream& out) {
    const auto argv = runner::split_command(o.runner);
    if (argv.empty()) throw UsageError("--runner is empty");
    {
        runner::SubprocessRunner probe(argv);
        out << "handshake: " << probe.handshake().dump() << "\n";
    }
    const auto result =
        runner::run_self_test(argv, std::chrono::milliseconds(static_cast<long long>(o.timeout_s * 1000)));
    out << result.output;
    if (result.exit_code != 0) {
        throw RunnerError(fmt::format("runner self-test exited with status {}", result.exit_code));
    }
    out << "self-test passed\n";
    return kOk;
}

void configure_logging(const std::string& level) {
    static const auto logger = [] {
        auto l = spdlog::stderr_color_mt("ragvv");
        spdlog::set_default_logger(l);
        return l;
    }();
    (void)logger;
    spdlog::set_level(spdlog::level::from_str(level));
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Retrieval-augmented verification and validation harness"};
    app.name("ragvv");
    app.require_subcommand(1);
    app.fallthrough();
    app.set_config("--config", "", "TOML config file; [subcommand] sections supply defaults that flags override");
    std::string log_level = "warn";
    app.add_option("--log-level", log_level, "trace|debug|info|warn|error|off")
        ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "critical", "off"}))
        ->capture_default_str();

    IngestOptions ingest;
    auto* c_ingest = app.add_subcommand("ingest", "Normalize a knowledge base into line-delimited records");
    c_ingest->add_option("--input", ingest.input, "Knowledge base (native MBPP records accepted)")
        ->required()
        ->check(CLI::ExistingFile);
    c_ingest->add_option("--output", ingest.output, "Normalized output file")->required();

    IndexOptions index;
    auto* c_index = app.add_subcommand("index", "Embed a knowledge base and save a vector index");
    c_index->add_option("--kb", index.kb, "Knowledge base file")->required()->check(CLI::ExistingFile);
    c_index->add_option("--out", index.out, "Index snapshot path")->required();
    c_index->add_flag("--include-metadata", index.include_metadata, "Embed metadata values along with content");
    add_embedder_options(c_index, index.embedder);

    RunOptions inspect;
    auto* c_inspect = app.add_subcommand("inspect", "Run code inspection over a bug dataset");
    add_run_options(c_inspect, inspect);
    c_inspect->add_option("--judge", inspect.judge, "Score answers with a judge model")
        ->check(CLI::IsMember({"on", "off"}))
        ->capture_default_str();
    c_inspect->add_option("--judge-model", inspect.judge_model, "Judge model name")->capture_default_str();
    c_inspect->add_flag("--require-line", inspect.require_line, "Also require the defect line to match");

    RunOptions testgen;
    auto* c_testgen = app.add_subcommand("testgen", "Generate unit tests and score their coverage");
    add_run_options(c_testgen, testgen);
    c_testgen->add_option("--n", testgen.n, "Tests per task")->check(CLI::Range(1, 1000))->capture_default_str();
    c_testgen->add_option("--rounds", testgen.rounds, "Round budget per task")
        ->check(CLI::Range(1, 100))
        ->capture_default_str();
    c_testgen->add_option("--runner", testgen.runner, "Command that starts the coverage runner");
    c_testgen->add_option("--timeout", testgen.timeout_s, "Per-test timeout in seconds")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    c_testgen->add_option("--cov-trials", testgen.cov_trials, "Samples for cov@k when subsets are too many")
        ->check(CLI::Range(1, 1000000))
        ->capture_default_str();

    FixtureOptions fixture;
    auto* c_fixture = app.add_subcommand("fixture-gen", "Generate inspection tasks by injecting bugs into snippets");
    c_fixture->add_option("--kb", fixture.kb, "Snippet source (knowledge-base records)")
        ->required()
        ->check(CLI::ExistingFile);
    c_fixture->add_option("--out", fixture.out, "Inspection task file to write")->required();
    c_fixture->add_option("--seed", fixture.seed, "Mutation and selection seed")->capture_default_str();
    c_fixture->add_option("--copies", fixture.copies, "Tasks generated per snippet")
        ->check(CLI::Range(1, 1000))
        ->capture_default_str();
    c_fixture->add_option("--limit", fixture.limit, "Stop after this many tasks (0 = no limit)")->capture_default_str();
    c_fixture->add_option("--responses", fixture.responses, "Also write ground-truth scripted responses here");
    c_fixture->add_option("--model", fixture.model, "Model name the scripted responses are keyed to")
        ->capture_default_str();

    ReportOptions report;
    auto* c_report = app.add_subcommand("report", "Render stored run reports as tables");
    c_report->add_option("runs", report.runs, "Run directories or report.json files")->required();
    c_report->add_option("--format", report.format, "structured|csv|markdown")
        ->check(CLI::IsMember({"structured", "csv", "markdown"}))
        ->capture_default_str();
    c_report->add_option("--out", report.out, "Output directory (default: print to stdout)");

    CompareOptions compare;
    auto* c_compare = app.add_subcommand("compare", "Per-metric deltas between two runs (B - A)");
    c_compare->add_option("a", compare.a, "Baseline run directory or report.json")->required();
    c_compare->add_option("b", compare.b, "Candidate run directory or report.json")->required();
    c_compare->add_flag("--json", compare.json, "Print the diff as JSON");

    SelfTestOptions selftest;
    auto* c_selftest = app.add_subcommand("runner-selftest", "Handshake with a coverage runner and run its self-test");
    c_selftest->add_option("--runner", selftest.runner, "Command that starts the coverage runner")->required();
    c_selftest->add_option("--timeout", selftest.timeout_s, "Seconds allowed for the self-test")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err) == 0 ? kOk : kUsage;
    }

    try {
        configure_logging(log_level);
        if (c_ingest->parsed()) return cmd_ingest(ingest, out);
        if (c_index->parsed()) return cmd_index(index, out);
        if (c_inspect->parsed()) return cmd_inspect(inspect, out);
        if (c_testgen->parsed()) return cmd_testgen(testgen, out);
        if (c_fixture->parsed()) return cmd_fixture_gen(fixture, out);
        if (c_report->parsed()) return cmd_report(report, out);
        if (c_compare->parsed()) return cmd_compare(compare, out);
        if (c_selftest->parsed()) return cmd_selftest(selftest, out);
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return exit_code_for(e.category());
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << "\n";
        return kInternal;
    }
    return kUsage;
}

}  // namespace ragvv::cli
