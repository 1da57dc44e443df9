#include "ragvv/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_set>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "ragvv/error.hpp"
#include "ragvv/hashing.hpp"

namespace ragvv {

using nlohmann::json;

namespace {

struct LabelNames {
    BugLabel label;
    std::string_view canonical;
    std::string_view display;
    std::string_view column;
};

constexpr std::array<LabelNames, kBugLabelCount> kLabelNames = {{
    {BugLabel::BugFree, "BugFree", "bug-free", "Bug-free code"},
    {BugLabel::MissingColon, "MissingColon", "missing colon", "Missing colon"},
    {BugLabel::MissingParenthesis, "MissingParenthesis", "missing parenthesis", "Missing parenthesis"},
    {BugLabel::MissingQuotation, "MissingQuotation", "missing quotation", "Missing quotation"},
    {BugLabel::MissingComma, "MissingComma", "missing comma", "Missing comma"},
    {BugLabel::MismatchedQuotation, "MismatchedQuotation", "mismatched quotation", "Mismatched quotation"},
    {BugLabel::MismatchedBracket, "MismatchedBracket", "mismatched bracket", "Mismatched bracket"},
    {BugLabel::KeywordAsIdentifier, "KeywordAsIdentifier", "keyword as identifier", "Keyword as identifier"},
}};

// Iterates non-blank lines, handing each parsed JSON object and its 1-based line number to `fn`.
template <typename Fn>
void for_each_record(std::string_view text, std::string_view origin, Fn&& fn) {
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t eol = text.find('\n', pos);
        const std::size_t end = eol == std::string_view::npos ? text.size() : eol;
        std::string_view line = text.substr(pos, end - pos);
        ++line_no;
        pos = end + 1;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.find_first_not_of(" \t") == std::string_view::npos) {
            if (eol == std::string_view::npos) break;
            continue;
        }
        json record;
        try {
            record = json::parse(line);
        } catch (const json::parse_error& e) {
            throw DataError(fmt::format("{}:{}: malformed record: {}", origin, line_no, e.what()));
        }
        if (!record.is_object()) {
            throw DataError(fmt::format("{}:{}: record is not an object", origin, line_no));
        }
        fn(record, line_no);
        if (eol == std::string_view::npos) break;
    }
}

std::string scalar_to_string(const json& value) {
    if (value.is_string()) return value.get<std::string>();
    return value.dump();
}

std::string required_string(const json& record, std::string_view key, std::string_view where) {
    const auto it = record.find(key);
    if (it == record.end() || it->is_null()) {
        throw DataError(fmt::format("{}: missing field '{}'", where, key));
    }
    if (it->is_string()) return it->get<std::string>();
    if (it->is_number_integer()) return it->dump();
    throw DataError(fmt::format("{}: field '{}' must be a string", where, key));
}

int required_int(const json& record, std::string_view key, std::string_view where) {
    const auto it = record.find(key);
    if (it == record.end() || !it->is_number_integer()) {
        throw DataError(fmt::format("{}: missing integer field '{}'", where, key));
    }
    return it->get<int>();
}

}  // namespace

std::string_view to_string(BugLabel label) noexcept { return kLabelNames[index_of(label)].canonical; }
std::string_view display_name(BugLabel label) noexcept { return kLabelNames[index_of(label)].display; }
std::string_view column_name(BugLabel label) noexcept { return kLabelNames[index_of(label)].column; }

std::string to_string(const PredictedLabel& label) {
    return label ? std::string(to_string(*label)) : std::string("Unparseable");
}

std::optional<BugLabel> try_parse_label(std::string_view name) noexcept {
    for (const auto& names : kLabelNames) {
        if (names.canonical == name) return names.label;
    }
    return std::nullopt;
}

BugLabel parse_label(std::string_view name) {
    if (auto label = try_parse_label(name)) return *label;
    throw DataError(fmt::format("unknown bug label '{}'", name));
}

std::size_t count_lines(std::string_view source) noexcept {
    if (source.empty()) return 0;
    std::size_t n = static_cast<std::size_t>(std::count(source.begin(), source.end(), '\n'));
    if (source.back() != '\n') ++n;
    return n;
}

void validate(const InspectionTask& task) {
    if (task.task_id.empty()) throw DataError("inspection task with empty task_id");
    if (task.variants.size() != kBugLabelCount) {
        throw DataError(fmt::format("task '{}': expected {} variants, found {}", task.task_id, kBugLabelCount,
                                    task.variants.size()));
    }
    std::array<int, kBugLabelCount> seen{};
    for (const auto& v : task.variants) {
        if (++seen[index_of(v.label)] > 1) {
            throw DataError(fmt::format("task '{}': duplicate label {}", task.task_id, to_string(v.label)));
        }
        if (v.source.empty()) {
            throw DataError(fmt::format("task '{}': variant {} has empty source", task.task_id, to_string(v.label)));
        }
        if (v.label == BugLabel::BugFree) {
            if (v.defect_line) {
                throw DataError(fmt::format("task '{}': bug-free variant carries a defect_line", task.task_id));
            }
            continue;
        }
        if (!v.defect_line) {
            throw DataError(
                fmt::format("task '{}': variant {} is missing defect_line", task.task_id, to_string(v.label)));
        }
        const auto lines = count_lines(v.source);
        if (*v.defect_line < 1 || static_cast<std::size_t>(*v.defect_line) > lines) {
            throw DataError(fmt::format("task '{}': variant {} defect_line {} outside 1..{}", task.task_id,
                                        to_string(v.label), *v.defect_line, lines));
        }
    }
}

void validate(const TestGenTask& task) {
    if (task.task_id.empty()) throw DataError("test-generation task with empty task_id");
    if (task.program_code.empty()) throw DataError(fmt::format("task '{}': empty program_code", task.task_id));
    if (task.total_lines < 1) throw DataError(fmt::format("task '{}': total_lines must be positive", task.task_id));
    if (task.total_branches < 0) {
        throw DataError(fmt::format("task '{}': total_branches must be nonnegative", task.task_id));
    }
}

std::vector<KnowledgeDocument> parse_knowledge_base(std::string_view text, std::string_view origin) {
    std::vector<KnowledgeDocument> docs;
    std::unordered_set<std::string> ids;
    for_each_record(text, origin, [&](const json& record, std::size_t line_no) {
        const std::string where = fmt::format("{}:{}", origin, line_no);
        KnowledgeDocument doc;
        doc.doc_id = required_string(record, "task_id", where);
        if (const auto meta = record.find("metadata"); meta != record.end() && !meta->is_null()) {
            if (!meta->is_object()) throw DataError(where + ": metadata must be an object");
            for (const auto& [key, value] : meta->items()) doc.metadata.emplace(key, scalar_to_string(value));
        }
        if (const auto content = record.find("content"); content != record.end()) {
            if (!content->is_string()) throw DataError(where + ": field 'content' must be a string");
            doc.content = content->get<std::string>();
        } else if (record.contains("text") && record.contains("code")) {
            // MBPP layout: description + reference solution, remaining fields kept as metadata.
            const auto description = required_string(record, "text", where);
            const auto code = required_string(record, "code", where);
            doc.content = description + "\n\n" + code;
            for (const auto& [key, value] : record.items()) {
                if (key != "task_id") doc.metadata.emplace(key, scalar_to_string(value));
            }
        } else {
            throw DataError(where + ": missing field 'content'");
        }
        if (doc.doc_id.empty()) throw DataError(where + ": empty task_id");
        if (doc.content.empty()) throw DataError(where + ": empty content");
        if (!ids.insert(doc.doc_id).second) {
            throw DataError(fmt::format("{}: duplicate doc_id '{}'", where, doc.doc_id));
        }
        docs.push_back(std::move(doc));
    });
    return docs;
}

std::vector<InspectionTask> parse_inspection_tasks(std::string_view text, std::string_view origin) {
    std::vector<InspectionTask> tasks;
    std::unordered_set<std::string> ids;
    for_each_record(text, origin, [&](const json& record, std::size_t line_no) {
        InspectionTask task;
        task.task_id = required_string(record, "task_id", fmt::format("{}:{}", origin, line_no));
        const std::string where = fmt::format("{}:{}: task '{}'", origin, line_no, task.task_id);
        const auto variants = record.find("variants");
        if (variants == record.end() || !variants->is_array()) throw DataError(where + ": missing 'variants' array");
        for (const auto& entry : *variants) {
            if (!entry.is_object()) throw DataError(where + ": variant is not an object");
            BugVariant v;
            const auto label_name = required_string(entry, "label", where);
            const auto label = try_parse_label(label_name);
            if (!label) throw DataError(fmt::format("{}: unknown bug label '{}'", where, label_name));
            v.label = *label;
            v.source = required_string(entry, "source", where);
            if (const auto line = entry.find("defect_line"); line != entry.end() && !line->is_null()) {
                if (!line->is_number_integer()) throw DataError(where + ": defect_line must be an integer");
                v.defect_line = line->get<int>();
            }
            task.variants.push_back(std::move(v));
        }
        try {
            validate(task);
        } catch (const DataError& e) {
            throw DataError(fmt::format("{}:{}: {}", origin, line_no, e.what()));
        }
        if (!ids.insert(task.task_id).second) throw DataError(where + ": duplicate task_id");
        tasks.push_back(std::move(task));
    });
    return tasks;
}

std::vector<TestGenTask> parse_testgen_tasks(std::string_view text, std::string_view origin) {
    std::vector<TestGenTask> tasks;
    std::unordered_set<std::string> ids;
    for_each_record(text, origin, [&](const json& record, std::size_t line_no) {
        TestGenTask task;
        task.task_id = required_string(record, "task_id", fmt::format("{}:{}", origin, line_no));
        const std::string where = fmt::format("{}:{}: task '{}'", origin, line_no, task.task_id);
        task.program_code = required_string(record, "program_code", where);
        task.function_name = required_string(record, "function_name", where);
        task.description = record.value("description", std::string{});
        task.total_lines = required_int(record, "total_lines", where);
        task.total_branches = required_int(record, "total_branches", where);
        try {
            validate(task);
        } catch (const DataError& e) {
            throw DataError(fmt::format("{}:{}: {}", origin, line_no, e.what()));
        }
        if (!ids.insert(task.task_id).second) throw DataError(where + ": duplicate task_id");
        tasks.push_back(std::move(task));
    });
    return tasks;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError(fmt::format("cannot open '{}'", path.string()));
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return std::move(buffer).str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError(fmt::format("cannot write '{}'", tmp.string()));
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        if (!out) throw DataError(fmt::format("write failed for '{}'", tmp.string()));
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw DataError(fmt::format("cannot move '{}' into place: {}", path.string(), ec.message()));
}

std::string content_hash(std::string_view bytes) { return to_hex(fnv1a64(bytes)); }

std::vector<KnowledgeDocument> load_knowledge_base(const std::filesystem::path& path) {
    return parse_knowledge_base(read_file(path), path.string());
}

std::vector<InspectionTask> load_inspection_tasks(const std::filesystem::path& path) {
    return parse_inspection_tasks(read_file(path), path.string());
}

std::vector<TestGenTask> load_testgen_tasks(const std::filesystem::path& path) {
    return parse_testgen_tasks(read_file(path), path.string());
}

json to_json(const KnowledgeDocument& doc) {
    json meta = json::object();
    for (const auto& [k, v] : doc.metadata) meta[k] = v;
    return json{{"task_id", doc.doc_id}, {"content", doc.content}, {"metadata", std::move(meta)}};
}

json to_json(const InspectionTask& task) {
    json variants = json::array();
    for (const auto& v : task.variants) {
        json entry{{"label", to_string(v.label)}, {"source", v.source}};
        entry["defect_line"] = v.defect_line ? json(*v.defect_line) : json(nullptr);
        variants.push_back(std::move(entry));
    }
    return json{{"task_id", task.task_id}, {"variants", std::move(variants)}};
}

json to_json(const TestGenTask& task) {
    return json{{"task_id", task.task_id},           {"program_code", task.program_code},
                {"function_name", task.function_name}, {"description", task.description},
                {"total_lines", task.total_lines},     {"total_branches", task.total_branches}};
}

namespace {

template <typename T>
void write_records(const std::filesystem::path& path, const std::vector<T>& items) {
    std::string out;
    for (const auto& item : items) {
        out += to_json(item).dump();
        out += '\n';
    }
    write_file_atomic(path, out);
}

}  // namespace

void write_knowledge_base(const std::filesystem::path& path, const std::vector<KnowledgeDocument>& docs) {
    write_records(path, docs);
}
void write_inspection_tasks(const std::filesystem::path& path, const std::vector<InspectionTask>& tasks) {
    write_records(path, tasks);
}
void write_testgen_tasks(const std::filesystem::path& path, const std::vector<TestGenTask>& tasks) {
    write_records(path, tasks);
}

std::string_view code_of(const KnowledgeDocument& doc) {
    if (const auto it = doc.metadata.find("code"); it != doc.metadata.end()) return it->second;
    return doc.content;
}

VariantSelection select_variant(const InspectionTask& task, std::uint64_t seed) {
    SplitMix64 rng(hash64(seed, task.task_id));
    const auto index = static_cast<std::size_t>(rng.below(task.variants.size()));
    const BugVariant& v = task.variants[index];
    return {index, &v, v.label};
}

}  // namespace ragvv
