#include "ragvv/report.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "ragvv/error.hpp"
#include "ragvv/timeutil.hpp"

namespace ragvv {

using nlohmann::json;

namespace {

constexpr int kReportSchema = 1;

std::string pct(double v) { return fmt::format("{:.2f}", v); }

std::string signed_value(double v) {
    // Keep "-0.00" from appearing when a tiny negative rounds away.
    const double shown = std::abs(v) < 0.005 ? 0.0 : v;
    return fmt::format("{:+.2f}", shown);
}

std::string csv_field(std::string_view s) {
    if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (const char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

std::string csv_row(const std::vector<std::string>& fields) {
    std::string line;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) line += ',';
        line += csv_field(fields[i]);
    }
    line += '\n';
    return line;
}

std::string md_row(const std::vector<std::string>& fields) {
    std::string line = "|";
    for (const auto& f : fields) line += " " + f + " |";
    line += '\n';
    return line;
}

std::string md_rule(std::size_t columns) {
    std::string line = "|";
    for (std::size_t i = 0; i < columns; ++i) line += " --- |";
    line += '\n';
    return line;
}

std::string rag_cell(bool rag) { return rag ? "yes" : "no"; }

RunMode common_mode(std::span<const RunReport> reports) {
    if (reports.empty()) throw DataError("no reports to render");
    const RunMode mode = reports.front().mode;
    for (const auto& r : reports) {
        if (r.mode != mode) throw DataError("cannot render inspect and testgen reports in one table");
    }
    return mode;
}

std::vector<std::string> results_header(RunMode mode) {
    if (mode == RunMode::Inspect) return {"Model", "RAG", "Matches", "Mismatches", "Accuracy"};
    std::vector<std::string> h{"Model", "RAG", "syntax", "execution", "line", "branch"};
    for (const int k : kReportedK) h.push_back(fmt::format("Line cov@{}", k));
    for (const int k : kReportedK) h.push_back(fmt::format("Branch cov@{}", k));
    return h;
}

double at_k(const std::map<int, double>& m, int k) {
    const auto it = m.find(k);
    return it == m.end() ? 0.0 : it->second;
}

std::vector<std::string> results_row(const RunReport& r) {
    std::vector<std::string> row{r.model, rag_cell(r.rag)};
    if (r.mode == RunMode::Inspect) {
        const auto& m = r.inspection();
        row.push_back(std::to_string(m.matches));
        row.push_back(std::to_string(m.mismatches));
        row.push_back(pct(m.accuracy));
        return row;
    }
    const auto& m = r.coverage();
    for (const double v : {m.syntax_pct, m.exec_pct, m.line_cov_pct, m.branch_cov_pct}) row.push_back(pct(v));
    for (const int k : kReportedK) row.push_back(pct(at_k(m.line_cov_at_k, k)));
    for (const int k : kReportedK) row.push_back(pct(at_k(m.branch_cov_at_k, k)));
    return row;
}

std::vector<std::string> rates_header() {
    std::vector<std::string> h{"Model", "RAG"};
    for (const auto label : kAllBugLabels) h.emplace_back(column_name(label));
    return h;
}

std::vector<std::string> rates_row(const RunReport& r) {
    std::vector<std::string> row{r.model, rag_cell(r.rag)};
    for (const double v : r.inspection().mismatch_rates) row.push_back(pct(v));
    return row;
}

void require_inspect(std::span<const RunReport> reports) {
    if (common_mode(reports) != RunMode::Inspect) throw DataError("mismatch rates exist only for inspect runs");
}

std::filesystem::path write_into(const std::filesystem::path& dir, const char* name, const std::string& body) {
    const auto path = dir / name;
    write_file_atomic(path, body);
    return path;
}

void push_delta(std::vector<MetricDelta>& out, std::string name, double a, double b) {
    out.push_back({std::move(name), a, b, b - a});
}

}  // namespace

std::string to_string(RunMode mode) { return mode == RunMode::Inspect ? "inspect" : "testgen"; }

RunMode parse_run_mode(std::string_view text) {
    if (text == "inspect") return RunMode::Inspect;
    if (text == "testgen") return RunMode::Testgen;
    throw DataError(fmt::format("unknown run mode '{}'", text));
}

const InspectionMetrics& RunReport::inspection() const {
    if (const auto* m = std::get_if<InspectionMetrics>(&metrics)) return *m;
    throw DataError(fmt::format("run '{}' holds coverage metrics, not inspection metrics", run_id));
}

const CoverageMetrics& RunReport::coverage() const {
    if (const auto* m = std::get_if<CoverageMetrics>(&metrics)) return *m;
    throw DataError(fmt::format("run '{}' holds inspection metrics, not coverage metrics", run_id));
}

void set_times(RunReport& report, std::chrono::system_clock::time_point started,
               std::chrono::system_clock::time_point finished) {
    using std::chrono::milliseconds;
    const auto s = std::chrono::time_point_cast<milliseconds>(started);
    const auto f = std::chrono::time_point_cast<milliseconds>(finished);
    report.started = iso8601_utc(s);
    report.finished = iso8601_utc(f);
    report.runtime_s = static_cast<double>((f - s).count()) / 1000.0;
}

json to_json(const RunReport& r) {
    json metrics = r.mode == RunMode::Inspect ? to_json(r.inspection()) : to_json(r.coverage());
    return json{{"schema", kReportSchema},
                {"run_id", r.run_id},
                {"mode", to_string(r.mode)},
                {"model", r.model},
                {"rag", r.rag},
                {"k", r.k},
                {"dataset_hash", r.dataset_hash},
                {"config", r.config},
                {"started", r.started},
                {"finished", r.finished},
                {"runtime_s", r.runtime_s},
                {"runtime", format_hms(r.runtime_s)},
                {"metrics", std::move(metrics)},
                {"artifacts", r.artifacts}};
}

RunReport report_from_json(const json& j) {
    try {
        if (j.value("schema", 0) != kReportSchema) throw DataError("unsupported report schema");
        RunReport r;
        r.run_id = j.at("run_id").get<std::string>();
        r.mode = parse_run_mode(j.at("mode").get<std::string>());
        r.model = j.at("model").get<std::string>();
        r.rag = j.at("rag").get<bool>();
        r.k = j.at("k").get<std::size_t>();
        r.dataset_hash = j.at("dataset_hash").get<std::string>();
        r.config = j.value("config", json::object());
        r.started = j.at("started").get<std::string>();
        r.finished = j.at("finished").get<std::string>();
        r.runtime_s = j.at("runtime_s").get<double>();
        if (r.mode == RunMode::Inspect) {
            r.metrics = inspection_metrics_from_json(j.at("metrics"));
        } else {
            r.metrics = coverage_metrics_from_json(j.at("metrics"));
        }
        r.artifacts = j.value("artifacts", std::map<std::string, std::string>{});
        return r;
    } catch (const json::exception& e) {
        throw DataError(fmt::format("malformed report: {}", e.what()));
    }
}

RunReport load_report(const std::filesystem::path& path) {
    const auto target = std::filesystem::is_directory(path) ? path / "report.json" : path;
    const auto text = read_file(target);
    try {
        return report_from_json(json::parse(text));
    } catch (const json::parse_error& e) {
        throw DataError(fmt::format("{}: {}", target.string(), e.what()));
    } catch (const DataError& e) {
        throw DataError(fmt::format("{}: {}", target.string(), e.what()));
    }
}

ReportFormat parse_report_format(std::string_view text) {
    if (text == "structured" || text == "json") return ReportFormat::Structured;
    if (text == "csv") return ReportFormat::Csv;
    if (text == "markdown" || text == "md") return ReportFormat::Markdown;
    throw UsageError(fmt::format("unknown report format '{}' (structured|csv|markdown)", text));
}

std::string render_structured(const RunReport& report) { return to_json(report).dump(2) + "\n"; }

std::string render_results_csv(std::span<const RunReport> reports) {
    std::string out = csv_row(results_header(common_mode(reports)));
    for (const auto& r : reports) out += csv_row(results_row(r));
    return out;
}

std::string render_efficiency_csv(std::span<const RunReport> reports) {
    common_mode(reports);
    std::string out = csv_row({"Model", "RAG", "Runtime"});
    for (const auto& r : reports) out += csv_row({r.model, rag_cell(r.rag), format_hms(r.runtime_s)});
    return out;
}

std::string render_mismatch_rates_csv(std::span<const RunReport> reports) {
    require_inspect(reports);
    std::string out = csv_row(rates_header());
    for (const auto& r : reports) out += csv_row(rates_row(r));
    return out;
}

std::string render_markdown(std::span<const RunReport> reports) {
    const RunMode mode = common_mode(reports);
    std::string out;
    const auto header = results_header(mode);
    out += mode == RunMode::Inspect ? "## Code inspection results\n\n" : "## Test generation results\n\n";
    out += md_row(header) + md_rule(header.size());
    for (const auto& r : reports) out += md_row(results_row(r));
    if (mode == RunMode::Inspect) {
        std::vector<std::string> human{"Human inspector", "-", "-", "-", pct(kHumanInspectorRate)};
        out += md_row(human);

        const auto rh = rates_header();
        out += "\n## Mismatch type rate\n\n" + md_row(rh) + md_rule(rh.size());
        for (const auto& r : reports) out += md_row(rates_row(r));
    }
    out += "\n## Efficiency\n\n" + md_row({"Model", "RAG", "Runtime"}) + md_rule(3);
    for (const auto& r : reports) out += md_row({r.model, rag_cell(r.rag), format_hms(r.runtime_s)});
    return out;
}

std::vector<std::filesystem::path> emit_reports(std::span<const RunReport> reports, ReportFormat format,
                                                const std::filesystem::path& dir) {
    const RunMode mode = common_mode(reports);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw DataError(fmt::format("cannot create {}: {}", dir.string(), ec.message()));
    std::vector<std::filesystem::path> written;
    switch (format) {
        case ReportFormat::Structured:
            if (reports.size() != 1) throw UsageError("structured output holds exactly one report");
            written.push_back(write_into(dir, "report.json", render_structured(reports.front())));
            break;
        case ReportFormat::Csv:
            written.push_back(write_into(dir, "table.csv", render_results_csv(reports)));
            written.push_back(write_into(dir, "efficiency.csv", render_efficiency_csv(reports)));
            if (mode == RunMode::Inspect) {
                written.push_back(write_into(dir, "mismatch_rates.csv", render_mismatch_rates_csv(reports)));
            }
            break;
        case ReportFormat::Markdown:
            written.push_back(write_into(dir, "table.md", render_markdown(reports)));
            break;
    }
    return written;
}

std::vector<std::filesystem::path> emit_report(const RunReport& report, ReportFormat format,
                                               const std::filesystem::path& dir) {
    return emit_reports(std::span<const RunReport>(&report, 1), format, dir);
}

const MetricDelta& DiffSummary::find(std::string_view name) const {
    for (const auto* group : {&metrics, &mismatch_counts, &mismatch_rates}) {
        for (const auto& d : *group) {
            if (d.name == name) return d;
        }
    }
    throw DataError(fmt::format("no metric named '{}' in diff", name));
}

DiffSummary compare_runs(const RunReport& a, const RunReport& b) {
    if (a.mode != b.mode) {
        throw CompareError(fmt::format("cannot compare a {} run with a {} run", to_string(a.mode), to_string(b.mode)));
    }
    if (a.dataset_hash != b.dataset_hash) {
        throw CompareError(fmt::format("runs '{}' and '{}' used different datasets ({} vs {})", a.run_id, b.run_id,
                                       a.dataset_hash, b.dataset_hash));
    }
    DiffSummary d;
    d.mode = a.mode;
    d.run_a = a.run_id;
    d.run_b = b.run_id;
    if (a.mode == RunMode::Inspect) {
        const auto& ma = a.inspection();
        const auto& mb = b.inspection();
        push_delta(d.metrics, "accuracy", ma.accuracy, mb.accuracy);
        push_delta(d.metrics, "matches", static_cast<double>(ma.matches), static_cast<double>(mb.matches));
        push_delta(d.metrics, "mismatches", static_cast<double>(ma.mismatches), static_cast<double>(mb.mismatches));
        push_delta(d.metrics, "unparseable", static_cast<double>(ma.unparseable), static_cast<double>(mb.unparseable));
        push_delta(d.metrics, "errored", static_cast<double>(ma.errored), static_cast<double>(mb.errored));
        for (std::size_t i = 0; i < kBugLabelCount; ++i) {
            const std::string name(to_string(kAllBugLabels[i]));
            push_delta(d.mismatch_counts, name, static_cast<double>(ma.mismatch_counts[i]),
                       static_cast<double>(mb.mismatch_counts[i]));
            push_delta(d.mismatch_rates, name, ma.mismatch_rates[i], mb.mismatch_rates[i]);
        }
    } else {
        const auto& ma = a.coverage();
        const auto& mb = b.coverage();
        push_delta(d.metrics, "syntax", ma.syntax_pct, mb.syntax_pct);
        push_delta(d.metrics, "execution", ma.exec_pct, mb.exec_pct);
        push_delta(d.metrics, "line", ma.line_cov_pct, mb.line_cov_pct);
        push_delta(d.metrics, "branch", ma.branch_cov_pct, mb.branch_cov_pct);
        for (const int k : kReportedK) {
            push_delta(d.metrics, fmt::format("line_cov@{}", k), at_k(ma.line_cov_at_k, k), at_k(mb.line_cov_at_k, k));
        }
        for (const int k : kReportedK) {
            push_delta(d.metrics, fmt::format("branch_cov@{}", k), at_k(ma.branch_cov_at_k, k),
                       at_k(mb.branch_cov_at_k, k));
        }
    }
    push_delta(d.metrics, "runtime_s", a.runtime_s, b.runtime_s);
    return d;
}

json to_json(const DiffSummary& diff) {
    auto group = [](const std::vector<MetricDelta>& v) {
        json arr = json::array();
        for (const auto& m : v) arr.push_back({{"name", m.name}, {"a", m.a}, {"b", m.b}, {"delta", m.delta}});
        return arr;
    };
    json j{{"mode", to_string(diff.mode)}, {"a", diff.run_a}, {"b", diff.run_b}, {"metrics", group(diff.metrics)}};
    if (diff.mode == RunMode::Inspect) {
        j["mismatch_counts"] = group(diff.mismatch_counts);
        j["mismatch_rates"] = group(diff.mismatch_rates);
    }
    return j;
}

std::string render_diff(const DiffSummary& diff) {
    std::string out = fmt::format("{} vs {} ({})\n\n", diff.run_a, diff.run_b, to_string(diff.mode));
    auto table = [&out](const char* title, const std::vector<MetricDelta>& rows, bool integral) {
        if (rows.empty()) return;
        out += fmt::format("{}\n", title);
        out += md_row({"Metric", "A", "B", "Delta"}) + md_rule(4);
        for (const auto& m : rows) {
            if (integral) {
                out += md_row({m.name, fmt::format("{:.0f}", m.a), fmt::format("{:.0f}", m.b),
                               fmt::format("{:+.0f}", m.delta)});
            } else {
                out += md_row({m.name, pct(m.a), pct(m.b), signed_value(m.delta)});
            }
        }
        out += '\n';
    };
    table("Metrics", diff.metrics, false);
    table("Mismatch counts", diff.mismatch_counts, true);
    table("Mismatch rates", diff.mismatch_rates, false);
    return out;
}

}  // namespace ragvv
