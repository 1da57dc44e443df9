#include "ragvv/inspect.hpp"

#include <algorithm>
#include <cctype>
#include <regex>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "ragvv/error.hpp"
#include "ragvv/parallel.hpp"

namespace ragvv {

using nlohmann::json;

namespace {

struct Synonyms {
    BugLabel label;
    std::vector<std::string_view> phrases;
};

// Checked top to bottom; the first label with any phrase present wins.
// Mismatched-* precede missing-*, and bug-free comes last so that
// "no bug except the missing colon" resolves to the defect.
const std::vector<Synonyms>& synonym_table() {
    static const std::vector<Synonyms> table = {
        {BugLabel::MismatchedQuotation,
         {"mismatched quotation", "mismatched quote", "mismatching quot", "mismatched string delimiter",
          "inconsistent quot", "quotation mismatch", "quote mismatch", "mismatched single and double quot"}},
        {BugLabel::MismatchedBracket,
         {"mismatched bracket", "mismatched parenthes", "mismatched brace", "mismatching bracket", "bracket mismatch",
          "mismatched closing", "wrong closing bracket", "incorrect closing bracket"}},
        {BugLabel::KeywordAsIdentifier,
         {"keyword as identifier", "keyword as variable", "keyword as name", "keyword as function name",
          "keyword as parameter", "reserved keyword", "reserved word", "keyword used as", "keyword is used as",
          "keyword being used as", "use of keyword"}},
        {BugLabel::MissingColon,
         {"missing colon", "colon is missing", "missing trailing colon", "lacks colon", "without colon", "no colon",
          "expected colon", "forgot colon"}},
        {BugLabel::MissingParenthesis,
         {"missing parenthes", "missing closing parenthes", "missing opening parenthes", "missing paren",
          "parenthesis is missing", "unclosed parenthes", "unbalanced parenthes", "parentheses are unbalanced",
          "never closed", "lacks parenthes"}},
        {BugLabel::MissingQuotation,
         {"missing quot", "missing closing quot", "missing opening quot", "quotation mark is missing",
          "quote is missing", "unterminated string", "unclosed string", "unterminated quot", "lacks quot"}},
        {BugLabel::MissingComma,
         {"missing comma", "comma is missing", "lacks comma", "without comma", "missing separator comma",
          "forgot comma", "expected comma"}},
        {BugLabel::BugFree,
         {"bug free", "no bug", "no bugs", "free of error", "free of bug", "no error", "no syntax error",
          "does not contain any bug", "contains no bug", "does not have any bug", "no defect", "no issue",
          "code is correct"}},
    };
    return table;
}

// Lowercase word sequence with CamelCase split and articles dropped:
// "MissingColon" -> "missing colon", "missing a colon" -> "missing colon".
std::string normalize_text(std::string_view text) {
    std::string spaced;
    spaced.reserve(text.size() + 8);
    for (std::size_t i = 0; i < text.size(); ++i) {
        const auto c = static_cast<unsigned char>(text[i]);
        if (i > 0 && std::isupper(c) && std::islower(static_cast<unsigned char>(text[i - 1]))) spaced.push_back(' ');
        spaced.push_back(std::isalnum(c) ? static_cast<char>(std::tolower(c)) : ' ');
    }
    std::string out;
    std::size_t pos = 0;
    while (pos < spaced.size()) {
        while (pos < spaced.size() && spaced[pos] == ' ') ++pos;
        const std::size_t end = std::min(spaced.find(' ', pos), spaced.size());
        if (end == pos) break;
        const std::string_view word(spaced.data() + pos, end - pos);
        pos = end;
        if (word == "a" || word == "an" || word == "the") continue;
        if (!out.empty()) out.push_back(' ');
        out.append(word);
    }
    return out;
}

bool contains_phrase(std::string_view haystack, std::string_view phrase) {
    // Word-start boundary so "no bug" does not fire inside "piano bug".
    std::size_t pos = 0;
    while ((pos = haystack.find(phrase, pos)) != std::string_view::npos) {
        if (pos == 0 || haystack[pos - 1] == ' ') return true;
        ++pos;
    }
    return false;
}

std::string numbered_listing(std::string_view source) {
    std::vector<std::string_view> lines;
    std::size_t pos = 0;
    while (pos < source.size()) {
        const std::size_t eol = source.find('\n', pos);
        const std::size_t end = eol == std::string_view::npos ? source.size() : eol;
        lines.push_back(source.substr(pos, end - pos));
        pos = end + 1;
    }
    const std::size_t width = std::to_string(lines.size()).size();
    std::string out;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        out += fmt::format("{:>{}} | {}\n", i + 1, width, lines[i]);
    }
    return out;
}

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

}  // namespace

std::string build_inspection_prompt(const BugVariant& variant, std::span<const KnowledgeDocument> contexts) {
    std::string prompt =
        "You are inspecting a Python code snippet for syntax defects.\n"
        "Decide whether the snippet contains a bug. If it does, name exactly one bug type from the list below "
        "and the line number where it occurs. If it does not, answer \"bug-free\".\n"
        "Bug types:\n";
    for (const BugLabel label : kAllBugLabels) prompt += fmt::format("- {}\n", display_name(label));
    prompt += "Answer in the form \"<bug type> on line <N>\" or \"bug-free\".\n\n";
    prompt += "Code:\n```python\n";
    prompt += numbered_listing(variant.source);
    prompt += "```\n";
    if (!contexts.empty()) {
        prompt += "\nReference examples of correct code:\n";
        for (std::size_t i = 0; i < contexts.size(); ++i) {
            prompt += fmt::format("\nExample {}:\n{}\n", i + 1, trim(contexts[i].content));
        }
    }
    return prompt;
}

ParsedLabel parse_bug_label(std::string_view response) {
    ParsedLabel out;
    const auto normalized = normalize_text(response);
    for (const auto& entry : synonym_table()) {
        const bool hit = std::any_of(entry.phrases.begin(), entry.phrases.end(),
                                     [&](std::string_view p) { return contains_phrase(normalized, p); });
        if (hit) {
            out.label = entry.label;
            break;
        }
    }
    static const std::regex line_re(R"(\bline\s*(?:number\s*)?[:#]?\s*(\d+))", std::regex::icase);
    const std::string text(response);
    if (std::smatch m; std::regex_search(text, m, line_re)) {
        try {
            out.line = std::stoi(m[1].str());
        } catch (const std::out_of_range&) {
        }
    }
    return out;
}

std::string build_judge_prompt(std::string_view prediction_text, BugLabel truth) {
    const std::string expected = truth == BugLabel::BugFree
                                     ? std::string("the snippet is bug-free")
                                     : fmt::format("the snippet contains a {} bug", display_name(truth));
    return fmt::format(
        "You are grading a code inspection answer.\n"
        "Ground truth: {}.\n"
        "Does the analysis below reach the same conclusion about the bug type? "
        "Answer with exactly one word: yes or no.\n\n"
        "Analysis:\n{}\n",
        expected, trim(prediction_text));
}

Verdict parse_judge_reply(std::string_view reply) {
    const auto normalized = normalize_text(reply);
    if (normalized == "yes" || normalized.starts_with("yes ")) return Verdict::Match;
    if (normalized == "no" || normalized.starts_with("no ")) return Verdict::Mismatch;
    spdlog::warn("judge reply is neither yes nor no, counting as mismatch: '{}'", trim(reply));
    return Verdict::Mismatch;
}

Verdict judge_with_llm(std::string_view prediction_text, BugLabel truth, LlmClient& judge,
                       const std::string& judge_model, const CallTag& tag) {
    const auto request = make_request(judge_model, build_judge_prompt(prediction_text, truth));
    return parse_judge_reply(judge.complete(request, tag).text);
}

bool is_match(const InspectionPrediction& p, bool require_line) {
    if (p.errored) return false;
    const bool label_ok = p.judged_match ? *p.judged_match : (p.predicted && *p.predicted == p.truth);
    if (!label_ok) return false;
    if (require_line && p.truth != BugLabel::BugFree) return p.predicted_line && p.predicted_line == p.truth_line;
    return true;
}

InspectionMetrics metrics_from_counts(long matches, long mismatches,
                                      const std::array<long, kBugLabelCount>& mismatch_counts) {
    InspectionMetrics m;
    m.matches = matches;
    m.mismatches = mismatches;
    m.mismatch_counts = mismatch_counts;
    const long total = matches + mismatches;
    m.accuracy = total > 0 ? 100.0 * static_cast<double>(matches) / static_cast<double>(total) : 0.0;
    long counted = 0;
    for (const long c : mismatch_counts) counted += c;
    for (std::size_t i = 0; i < kBugLabelCount; ++i) {
        m.mismatch_rates[i] =
            counted > 0 ? 100.0 * static_cast<double>(mismatch_counts[i]) / static_cast<double>(counted) : 0.0;
    }
    return m;
}

InspectionMetrics score_inspection(std::span<const InspectionPrediction> predictions, bool require_line) {
    if (predictions.empty()) throw DataError("score_inspection: no predictions");
    long matches = 0;
    long mismatches = 0;
    long errored = 0;
    long unparseable = 0;
    std::array<long, kBugLabelCount> counts{};
    for (const auto& p : predictions) {
        if (p.errored) {
            ++errored;
            continue;
        }
        if (!p.predicted) ++unparseable;
        if (is_match(p, require_line)) {
            ++matches;
        } else {
            ++mismatches;
            ++counts[index_of(p.truth)];
        }
    }
    auto m = metrics_from_counts(matches, mismatches, counts);
    m.errored = errored;
    m.unparseable = unparseable;
    return m;
}

namespace {

json optional_int(const std::optional<int>& v) { return v ? json(*v) : json(nullptr); }

std::optional<int> read_optional_int(const json& j, const char* key) {
    const auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    return it->get<int>();
}

}  // namespace

json to_json(const InspectionPrediction& p) {
    json j{{"task_id", p.task_id},
           {"variant_index", p.variant_index},
           {"truth", to_string(p.truth)},
           {"truth_line", optional_int(p.truth_line)},
           {"predicted", to_string(p.predicted)},
           {"predicted_line", optional_int(p.predicted_line)},
           {"match", is_match(p)},
           {"raw_response", p.raw_response},
           {"retrieved_ids", p.retrieved_ids},
           {"request_hash", p.request_hash},
           {"errored", p.errored}};
    if (p.judged_match) j["judged_match"] = *p.judged_match;
    if (!p.error.empty()) j["error"] = p.error;
    return j;
}

InspectionPrediction prediction_from_json(const json& j) {
    InspectionPrediction p;
    p.task_id = j.at("task_id").get<std::string>();
    p.variant_index = j.value("variant_index", std::size_t{0});
    p.truth = parse_label(j.at("truth").get<std::string>());
    p.truth_line = read_optional_int(j, "truth_line");
    const auto predicted = j.at("predicted").get<std::string>();
    if (predicted != "Unparseable") p.predicted = parse_label(predicted);
    p.predicted_line = read_optional_int(j, "predicted_line");
    p.raw_response = j.value("raw_response", std::string{});
    p.retrieved_ids = j.value("retrieved_ids", std::vector<std::string>{});
    p.request_hash = j.value("request_hash", std::string{});
    if (j.contains("judged_match")) p.judged_match = j.at("judged_match").get<bool>();
    p.errored = j.value("errored", false);
    p.error = j.value("error", std::string{});
    return p;
}

json to_json(const InspectionMetrics& m) {
    json counts = json::object();
    json rates = json::object();
    for (const BugLabel label : kAllBugLabels) {
        counts[std::string(to_string(label))] = m.mismatch_counts[index_of(label)];
        rates[std::string(to_string(label))] = m.mismatch_rates[index_of(label)];
    }
    return json{{"matches", m.matches},
                {"mismatches", m.mismatches},
                {"errored", m.errored},
                {"unparseable", m.unparseable},
                {"accuracy", m.accuracy},
                {"mismatch_counts", std::move(counts)},
                {"mismatch_rates", std::move(rates)}};
}

InspectionMetrics inspection_metrics_from_json(const json& j) {
    InspectionMetrics m;
    m.matches = j.at("matches").get<long>();
    m.mismatches = j.at("mismatches").get<long>();
    m.errored = j.value("errored", 0L);
    m.unparseable = j.value("unparseable", 0L);
    m.accuracy = j.at("accuracy").get<double>();
    for (const BugLabel label : kAllBugLabels) {
        const std::string key(to_string(label));
        m.mismatch_counts[index_of(label)] = j.at("mismatch_counts").value(key, 0L);
        m.mismatch_rates[index_of(label)] = j.at("mismatch_rates").value(key, 0.0);
    }
    return m;
}

namespace {

struct PreparedItem {
    VariantSelection selection;
    std::vector<std::string> retrieved_ids;
    ChatRequest request;
};

PreparedItem prepare(const InspectionTask& task, const InspectionConfig& config, const Retriever* retriever) {
    PreparedItem item;
    item.selection = select_variant(task, config.seed);
    std::vector<KnowledgeDocument> contexts;
    if (config.rag) {
        if (!retriever) throw DataError("RAG is enabled but no index is loaded");
        auto retrieved = retriever->retrieve(item.selection.variant->source);
        for (const auto& hit : retrieved.hits) item.retrieved_ids.push_back(hit.doc_id);
        contexts = std::move(retrieved.documents);
    }
    item.request = make_request(config.model, build_inspection_prompt(*item.selection.variant, contexts),
                                config.system_preamble, config.temperature, config.max_tokens);
    return item;
}

}  // namespace

ChatRequest inspection_request(const InspectionTask& task, const InspectionConfig& config,
                               const Retriever* retriever) {
    return prepare(task, config, retriever).request;
}

InspectionRun run_inspection(std::span<const InspectionTask> tasks, const InspectionConfig& config, LlmClient& llm,
                             const Retriever* retriever, LlmClient* judge) {
    if (config.rag && !retriever) throw DataError("RAG is enabled but no index is loaded");
    if (config.judge && !judge) throw DataError("judge mode requires a judge client");

    InspectionRun run;
    run.started = std::chrono::system_clock::now();
    run.predictions.resize(tasks.size());

    parallel_for(tasks.size(), config.workers, [&](std::size_t, std::size_t i) {
        const InspectionTask& task = tasks[i];
        auto item = prepare(task, config, retriever);
        InspectionPrediction& p = run.predictions[i];
        p.task_id = task.task_id;
        p.variant_index = item.selection.index;
        p.truth = item.selection.label;
        p.truth_line = item.selection.variant->defect_line;
        p.retrieved_ids = std::move(item.retrieved_ids);
        p.request_hash = request_key(item.request);
        try {
            const auto response = llm.complete(item.request, {task.task_id, 0});
            p.raw_response = response.text;
            const auto parsed = parse_bug_label(response.text);
            p.predicted = parsed.label;
            p.predicted_line = parsed.line;
            if (config.judge) {
                p.judged_match = judge_with_llm(response.text, p.truth, *judge, config.judge_model,
                                                {task.task_id, 1}) == Verdict::Match;
            }
        } catch (const RetryExhaustedError& e) {
            p.errored = true;
            p.error = e.what();
        } catch (const ProviderError& e) {
            p.errored = true;
            p.error = e.what();
        }
        if (p.errored) spdlog::warn("task {}: {}", task.task_id, p.error);
    });

    std::sort(run.predictions.begin(), run.predictions.end(),
              [](const InspectionPrediction& a, const InspectionPrediction& b) { return a.task_id < b.task_id; });
    if (!run.predictions.empty()) run.metrics = score_inspection(run.predictions, config.require_line);
    run.finished = std::chrono::system_clock::now();
    return run;
}

}  // namespace ragvv
