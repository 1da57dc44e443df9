// One PASS/FAIL line per acceptance criterion. Exit status is the number of failures.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "ragvv/cli.hpp"
#include "ragvv/corpus.hpp"
#include "ragvv/embedder.hpp"
#include "ragvv/inspect.hpp"
#include "ragvv/lexer.hpp"
#include "ragvv/mutator.hpp"
#include "ragvv/report.hpp"
#include "ragvv/testgen.hpp"
#include "ragvv/vectorstore.hpp"
#include "test_support.hpp"

namespace {

using namespace ragvv;
namespace fs = std::filesystem;

constexpr double kAccuracyTolerancePp = 0.005;
constexpr double kRateTolerancePp = 0.01;
constexpr double kSampledCovTolerancePp = 2.0;
constexpr double kScoreTolerance = 1e-12;

struct Outcome {
    bool pass = true;
    std::string detail;
};

// Collects failures without stopping at the first one.
class Check {
public:
    void expect(bool ok, const std::string& what) {
        if (!ok && failures_.size() < 5) failures_.push_back(what);
        if (!ok) ++count_;
    }
    void note(std::string text) { notes_.push_back(std::move(text)); }
    [[nodiscard]] Outcome outcome() const {
        Outcome o{count_ == 0, {}};
        std::vector<std::string> parts = notes_;
        for (const auto& f : failures_) parts.push_back("failed: " + f);
        if (count_ > failures_.size()) parts.push_back(fmt::format("{} more failures", count_ - failures_.size()));
        for (std::size_t i = 0; i < parts.size(); ++i) o.detail += (i ? "; " : "") + parts[i];
        return o;
    }

private:
    std::vector<std::string> failures_;
    std::vector<std::string> notes_;
    std::size_t count_ = 0;
};

Outcome metric_math() {
    Check c;
    struct Row {
        long matches;
        long mismatches;
        double accuracy;
    };
    for (const Row& row : {Row{2678, 1332, 66.78}, Row{3632, 378, 90.57}, Row{2943, 1067, 73.39},
                           Row{3388, 622, 84.49}}) {
        // Through score_inspection on explicit predictions, not just the count formula.
        std::vector<InspectionPrediction> preds(static_cast<std::size_t>(row.matches + row.mismatches));
        for (std::size_t i = 0; i < preds.size(); ++i) {
            preds[i].truth = BugLabel::MissingColon;
            preds[i].predicted = i < static_cast<std::size_t>(row.matches) ? BugLabel::MissingColon : BugLabel::BugFree;
        }
        const auto m = score_inspection(preds);
        c.expect(m.matches == row.matches && m.mismatches == row.mismatches,
                 fmt::format("counts {}/{}", row.matches, row.mismatches));
        c.expect(std::abs(m.accuracy - row.accuracy) <= kAccuracyTolerancePp,
                 fmt::format("({}, {}) gave {:.4f}, want {:.2f}", row.matches, row.mismatches, m.accuracy,
                             row.accuracy));
        c.note(fmt::format("{:.2f}", m.accuracy));
    }
    return c.outcome();
}

Outcome mismatch_distribution() {
    Check c;
    using Counts = std::array<long, kBugLabelCount>;
    using Rates = std::array<double, kBugLabelCount>;
    struct Row {
        long matches;
        long total;
        Counts counts;
        Rates rates;
    };
    const std::vector<Row> rows = {
        {2678, 1332, {34, 360, 183, 77, 95, 72, 87, 424}, {2.55, 27.03, 13.74, 5.78, 7.13, 5.41, 6.53, 31.83}},
        {3632, 378, {179, 32, 31, 39, 26, 17, 2, 52}, {47.35, 8.47, 8.2, 10.32, 6.88, 4.5, 0.53, 13.76}},
    };
    for (const auto& row : rows) {
        long sum = 0;
        for (const long n : row.counts) sum += n;
        c.expect(sum == row.total, fmt::format("vector sums to {}, want {}", sum, row.total));
        std::vector<InspectionPrediction> preds;
        for (long i = 0; i < row.matches; ++i) {
            InspectionPrediction p;
            p.truth = BugLabel::MissingComma;
            p.predicted = BugLabel::MissingComma;
            preds.push_back(p);
        }
        for (std::size_t l = 0; l < kBugLabelCount; ++l) {
            for (long i = 0; i < row.counts[l]; ++i) {
                InspectionPrediction p;
                p.truth = kAllBugLabels[l];
                p.predicted = std::nullopt;
                preds.push_back(p);
            }
        }
        const auto m = score_inspection(preds);
        c.expect(m.mismatch_counts == row.counts, "per-label mismatch counts");
        for (std::size_t l = 0; l < kBugLabelCount; ++l) {
            c.expect(std::abs(m.mismatch_rates[l] - row.rates[l]) <= kRateTolerancePp,
                     fmt::format("{} rate {:.4f}, want {:.2f}", column_name(kAllBugLabels[l]), m.mismatch_rates[l],
                                 row.rates[l]));
        }
        c.note(fmt::format("sum {}", sum));
    }
    return c.outcome();
}

Outcome retrieval_exactness() {
    Check c;
    constexpr std::size_t kDim = 384;
    std::mt19937_64 rng(20240601);
    std::normal_distribution<double> gauss;
    auto unit = [&] {
        Vector v(kDim);
        for (auto& x : v) x = gauss(rng);
        return normalize(std::move(v));
    };
    VectorIndex index(kDim);
    std::vector<std::pair<std::string, Vector>> docs;
    for (int i = 0; i < 1000; ++i) {
        docs.emplace_back(fmt::format("doc-{:04d}", i), unit());
        index.add({docs.back().first, docs.back().second, nullptr});
    }
    // Exact duplicates exercise the doc_id tie break.
    for (int i = 0; i < 5; ++i) {
        docs.emplace_back(fmt::format("dup-{}", i), docs[static_cast<std::size_t>(i)].second);
        index.add({docs.back().first, docs.back().second, nullptr});
    }
    std::size_t compared = 0;
    for (int q = 0; q < 100; ++q) {
        const Vector query = q < 5 ? docs[static_cast<std::size_t>(q)].second : unit();
        std::vector<ScoredDoc> oracle;
        oracle.reserve(docs.size());
        for (const auto& [id, v] : docs) {
            double dot = 0;
            for (std::size_t i = 0; i < kDim; ++i) dot += query[i] * v[i];
            oracle.push_back({id, dot});
        }
        std::sort(oracle.begin(), oracle.end(), [](const ScoredDoc& a, const ScoredDoc& b) {
            return a.score != b.score ? a.score > b.score : a.doc_id < b.doc_id;
        });
        for (const std::size_t k : {1u, 3u, 10u}) {
            const auto hits = index.top_k(query, k);
            c.expect(hits.size() == k, fmt::format("query {} k={} size {}", q, k, hits.size()));
            for (std::size_t i = 0; i < std::min(k, hits.size()); ++i) {
                c.expect(hits[i].doc_id == oracle[i].doc_id &&
                             std::abs(hits[i].score - oracle[i].score) <= kScoreTolerance,
                         fmt::format("query {} k={} rank {}: {} vs {}", q, k, i, hits[i].doc_id, oracle[i].doc_id));
            }
            ++compared;
        }
    }
    c.note(fmt::format("{} query and k pairs", compared));
    return c.outcome();
}

Outcome mutator_round_trip() {
    Check c;
    std::size_t snippets = 0;
    std::size_t checked = 0;
    std::size_t not_applicable = 0;
    for (const auto& doc : testkit::snippet_corpus()) {
        const std::string code(code_of(doc));
        if (!lex::has_simple_strings(code) || lex::detokenize(lex::tokenize(code)) != code) continue;
        ++snippets;
        for (const BugLabel label : kDefectLabels) {
            for (std::uint64_t seed = 0; seed < 5; ++seed) {
                const auto r = inject_bug(code, label, seed);
                if (!r) {
                    ++not_applicable;
                    continue;
                }
                ++checked;
                DefectClassification got;
                try {
                    got = classify_defect(code, r->mutated_source);
                } catch (const Error& e) {
                    c.expect(false, fmt::format("{} {} seed {}: {}", doc.doc_id, to_string(label), seed, e.what()));
                    continue;
                }
                c.expect(got == DefectClassification{label, r->defect_line},
                         fmt::format("{} {} seed {}: got {} line {}", doc.doc_id, to_string(label), seed,
                                     to_string(got.label), got.line));
            }
        }
    }
    c.expect(snippets >= 50, fmt::format("only {} lexable snippets", snippets));
    c.note(fmt::format("{} snippets, {} mutations, {} not applicable", snippets, checked, not_applicable));
    return c.outcome();
}

struct CliResult {
    int code = 0;
    std::string out;
    std::string err;
};

CliResult ragvv_cli(const std::vector<std::string>& args) {
    std::ostringstream out;
    std::ostringstream err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

Outcome deterministic_end_to_end() {
    Check c;
    testkit::TempDir dir;
    const auto tasks_path = (dir / "tasks.jsonl").string();
    const auto echo_path = (dir / "echo.json").string();
    const std::string seed = "17";
    const auto gen = ragvv_cli({"fixture-gen", "--kb", testkit::data_path("kb.jsonl").string(), "--out", tasks_path,
                                "--seed", seed, "--copies", "8", "--limit", "200", "--responses", echo_path});
    c.expect(gen.code == 0, "fixture-gen: " + gen.err);
    if (gen.code != 0) return c.outcome();
    const auto tasks = load_inspection_tasks(tasks_path);
    c.expect(tasks.size() == 200, fmt::format("{} fixture tasks", tasks.size()));

    const auto runs = (dir / "runs").string();
    auto inspect = [&](const std::string& fixtures, const std::string& run_id, const std::string& workers) {
        return ragvv_cli({"inspect", "--dataset", tasks_path, "--fixtures", fixtures, "--seed", seed, "--out", runs,
                          "--run-id", run_id, "--workers", workers});
    };
    const auto a = inspect(echo_path, "echo-a", "4");
    const auto b = inspect(echo_path, "echo-b", "1");
    c.expect(a.code == 0 && b.code == 0, "echo runs: " + a.err + b.err);
    if (a.code != 0 || b.code != 0) return c.outcome();
    const auto items_a = read_file(fs::path(runs) / "echo-a" / "items.ndjson");
    const auto items_b = read_file(fs::path(runs) / "echo-b" / "items.ndjson");
    c.expect(!items_a.empty() && items_a == items_b, "items files differ between identical runs");
    const double echo_acc = load_report(fs::path(runs) / "echo-a").inspection().accuracy;
    c.expect(echo_acc == 100.0, fmt::format("echo oracle accuracy {:.4f}", echo_acc));

    const auto bug_free_path = (dir / "bugfree.json").string();
    write_file_atomic(bug_free_path, R"({"responses": {}, "default": "bug-free"})");
    const auto bf = inspect(bug_free_path, "bug-free", "4");
    c.expect(bf.code == 0, "bug-free run: " + bf.err);
    if (bf.code != 0) return c.outcome();
    long selected_bug_free = 0;
    for (const auto& t : tasks) selected_bug_free += select_variant(t, std::stoull(seed)).label == BugLabel::BugFree;
    const double expected = 100.0 * static_cast<double>(selected_bug_free) / static_cast<double>(tasks.size());
    const auto bf_metrics = load_report(fs::path(runs) / "bug-free").inspection();
    c.expect(bf_metrics.matches == selected_bug_free && bf_metrics.accuracy == expected,
             fmt::format("always bug-free accuracy {:.4f}, selections give {:.4f}", bf_metrics.accuracy, expected));
    c.note(fmt::format("echo {:.2f}%, always bug-free {:.2f}% ({} of {})", echo_acc, bf_metrics.accuracy,
                       selected_bug_free, tasks.size()));
    return c.outcome();
}

Outcome cov_at_k_definition() {
    Check c;
    // Five tests over 20 lines and 8 branch arms. Every test covers a shared
    // header plus its own block, so subset coverage varies little within a k.
    const auto task = testkit::synthetic_task(20, 8);
    const auto record = testkit::synthetic_record(
        task,
        {{1, 2, 3, 4, 5, 6}, {1, 2, 7, 8, 9, 10}, {1, 2, 11, 12, 13}, {1, 2, 14, 15, 16, 17}, {1, 2, 18, 19, 20, 3}},
        {{1, 2}, {3, 4}, {5}, {6, 7}, {8, 1}});
    const auto full = compute_coverage(record, task);
    double prev_line = -1;
    double prev_branch = -1;
    for (int k = 1; k <= 5; ++k) {
        const auto ex = cov_at_k(record, task, k, kDefaultCovTrials, 0, CovAtKMethod::Exhaustive);
        c.expect(ex.line_pct >= prev_line && ex.branch_pct >= prev_branch, fmt::format("decrease at k={}", k));
        prev_line = ex.line_pct;
        prev_branch = ex.branch_pct;
        const auto sampled = cov_at_k(record, task, k, 100, 99, CovAtKMethod::Sampled);
        c.expect(std::abs(sampled.line_pct - ex.line_pct) <= kSampledCovTolerancePp &&
                     std::abs(sampled.branch_pct - ex.branch_pct) <= kSampledCovTolerancePp,
                 fmt::format("k={} sampled ({:.2f}, {:.2f}) vs exhaustive ({:.2f}, {:.2f})", k, sampled.line_pct,
                             sampled.branch_pct, ex.line_pct, ex.branch_pct));
        if (k == 5) {
            c.expect(ex.line_pct == full.line_pct && ex.branch_pct == full.branch_pct,
                     fmt::format("cov@5 ({}, {}) vs union ({}, {})", ex.line_pct, ex.branch_pct, full.line_pct,
                                 full.branch_pct));
        }
        c.note(fmt::format("k={} {:.2f}/{:.2f}", k, ex.line_pct, sampled.line_pct));
    }
    return c.outcome();
}

struct Criterion {
    const char* name;
    double limit_s;
    std::function<Outcome()> run;
};

}  // namespace

int main() {
    spdlog::set_level(spdlog::level::err);
    const std::vector<Criterion> criteria = {
        {"metric-math", 1.0, metric_math},
        {"mismatch-distribution", 1.0, mismatch_distribution},
        {"retrieval-exactness", 5.0, retrieval_exactness},
        {"mutator-round-trip", 10.0, mutator_round_trip},
        {"deterministic-end-to-end", 30.0, deterministic_end_to_end},
        {"cov-at-k-definition", 5.0, cov_at_k_definition},
    };
    int failures = 0;
    for (const auto& criterion : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Outcome outcome;
        try {
            outcome = criterion.run();
        } catch (const std::exception& e) {
            outcome = {false, fmt::format("exception: {}", e.what())};
        }
        const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const bool in_time = elapsed < criterion.limit_s;
        const bool pass = outcome.pass && in_time;
        failures += pass ? 0 : 1;
        std::cout << fmt::format("{} {} ({:.3f} s, limit {:.0f} s){}{}\n", pass ? "PASS" : "FAIL", criterion.name,
                                 elapsed, criterion.limit_s, in_time ? "" : " over time limit",
                                 outcome.detail.empty() ? "" : ": " + outcome.detail);
    }
    return failures;
}
