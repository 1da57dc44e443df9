#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "ragvv/inspect.hpp"
#include "ragvv/testgen.hpp"

namespace ragvv {

enum class RunMode { Inspect, Testgen };

std::string to_string(RunMode mode);
RunMode parse_run_mode(std::string_view text);

struct RunReport {
    std::string run_id;
    RunMode mode = RunMode::Inspect;
    std::string model;
    bool rag = false;
    std::size_t k = kDefaultTopK;
    std::string dataset_hash;
    nlohmann::json config = nlohmann::json::object();  // effective configuration
    std::string started;                               // ISO-8601 UTC, millisecond precision
    std::string finished;
    double runtime_s = 0.0;
    std::variant<InspectionMetrics, CoverageMetrics> metrics;
    std::map<std::string, std::string> artifacts;  // name -> path relative to the run directory

    [[nodiscard]] const InspectionMetrics& inspection() const;
    [[nodiscard]] const CoverageMetrics& coverage() const;
};

/// Sets started/finished/runtime_s from wall-clock points truncated to milliseconds.
void set_times(RunReport& report, std::chrono::system_clock::time_point started,
               std::chrono::system_clock::time_point finished);

nlohmann::json to_json(const RunReport& report);
RunReport report_from_json(const nlohmann::json& j);
RunReport load_report(const std::filesystem::path& path);

enum class ReportFormat { Structured, Csv, Markdown };

ReportFormat parse_report_format(std::string_view text);

// Table renderers. Every report in a span must share one mode.
std::string render_structured(const RunReport& report);
std::string render_results_csv(std::span<const RunReport> reports);
std::string render_efficiency_csv(std::span<const RunReport> reports);
std::string render_mismatch_rates_csv(std::span<const RunReport> reports);
std::string render_markdown(std::span<const RunReport> reports);

/// Writes the files for `format` into `dir` and returns their paths.
/// structured: report.json. csv: table.csv, efficiency.csv and, for inspect
/// runs, mismatch_rates.csv. markdown: table.md.
std::vector<std::filesystem::path> emit_report(const RunReport& report, ReportFormat format,
                                               const std::filesystem::path& dir);
std::vector<std::filesystem::path> emit_reports(std::span<const RunReport> reports, ReportFormat format,
                                                const std::filesystem::path& dir);

struct MetricDelta {
    std::string name;
    double a = 0.0;
    double b = 0.0;
    double delta = 0.0;  // b - a
};

struct DiffSummary {
    RunMode mode = RunMode::Inspect;
    std::string run_a;
    std::string run_b;
    std::vector<MetricDelta> metrics;
    std::vector<MetricDelta> mismatch_counts;  // inspect only, one per truth label
    std::vector<MetricDelta> mismatch_rates;   // inspect only

    [[nodiscard]] const MetricDelta& find(std::string_view name) const;
};

/// Per-metric b - a. Throws CompareError when modes or dataset hashes differ.
DiffSummary compare_runs(const RunReport& a, const RunReport& b);

nlohmann::json to_json(const DiffSummary& diff);
std::string render_diff(const DiffSummary& diff);

}  // namespace ragvv
