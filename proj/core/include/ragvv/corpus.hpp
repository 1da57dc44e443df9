#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace ragvv {

/// One knowledge-base entry that gets embedded and retrieved.
struct KnowledgeDocument {
    std::string doc_id;
    std::string content;
    std::map<std::string, std::string> metadata;

    bool operator==(const KnowledgeDocument&) const = default;
};

/// Closed taxonomy of inspection outcomes: one clean class plus seven syntactic defects.
enum class BugLabel : std::uint8_t {
    BugFree,
    MissingColon,
    MissingParenthesis,
    MissingQuotation,
    MissingComma,
    MismatchedQuotation,
    MismatchedBracket,
    KeywordAsIdentifier,
};

inline constexpr std::size_t kBugLabelCount = 8;

inline constexpr std::array<BugLabel, kBugLabelCount> kAllBugLabels = {
    BugLabel::BugFree,          BugLabel::MissingColon,        BugLabel::MissingParenthesis,
    BugLabel::MissingQuotation, BugLabel::MissingComma,        BugLabel::MismatchedQuotation,
    BugLabel::MismatchedBracket, BugLabel::KeywordAsIdentifier,
};

inline constexpr std::array<BugLabel, kBugLabelCount - 1> kDefectLabels = {
    BugLabel::MissingColon,        BugLabel::MissingParenthesis, BugLabel::MissingQuotation,
    BugLabel::MissingComma,        BugLabel::MismatchedQuotation, BugLabel::MismatchedBracket,
    BugLabel::KeywordAsIdentifier,
};

/// A predicted label; std::nullopt is the Unparseable marker.
using PredictedLabel = std::optional<BugLabel>;

/// Canonical identifier used in files, e.g. "MissingColon".
std::string_view to_string(BugLabel label) noexcept;
/// Human-readable form used in prompts and tables, e.g. "missing colon".
std::string_view display_name(BugLabel label) noexcept;
/// Table heading form, e.g. "Missing colon", "Bug-free code".
std::string_view column_name(BugLabel label) noexcept;
std::string to_string(const PredictedLabel& label);

/// Parses the canonical identifier. Unknown names are a hard error.
BugLabel parse_label(std::string_view name);
std::optional<BugLabel> try_parse_label(std::string_view name) noexcept;

constexpr std::size_t index_of(BugLabel label) noexcept { return static_cast<std::size_t>(label); }

struct BugVariant {
    BugLabel label = BugLabel::BugFree;
    std::string source;
    std::optional<int> defect_line;  // 1-based; present iff label != BugFree

    bool operator==(const BugVariant&) const = default;
};

struct InspectionTask {
    std::string task_id;
    std::vector<BugVariant> variants;  // exactly 8

    bool operator==(const InspectionTask&) const = default;
};

struct TestGenTask {
    std::string task_id;
    std::string program_code;
    std::string function_name;
    std::string description;
    int total_lines = 0;
    int total_branches = 0;

    bool operator==(const TestGenTask&) const = default;
};

std::size_t count_lines(std::string_view source) noexcept;

/// Throws DataError describing the first violated invariant.
void validate(const InspectionTask& task);
void validate(const TestGenTask& task);

/// Reads line-delimited records with keys task_id, content and metadata.
/// Native MBPP records (task_id, text, code, test_list) are also accepted.
std::vector<KnowledgeDocument> load_knowledge_base(const std::filesystem::path& path);
std::vector<InspectionTask> load_inspection_tasks(const std::filesystem::path& path);
std::vector<TestGenTask> load_testgen_tasks(const std::filesystem::path& path);

/// Line-oriented parsing from in-memory text; `origin` names the source in errors.
std::vector<KnowledgeDocument> parse_knowledge_base(std::string_view text, std::string_view origin = "<memory>");
std::vector<InspectionTask> parse_inspection_tasks(std::string_view text, std::string_view origin = "<memory>");
std::vector<TestGenTask> parse_testgen_tasks(std::string_view text, std::string_view origin = "<memory>");

nlohmann::json to_json(const KnowledgeDocument& doc);
nlohmann::json to_json(const InspectionTask& task);
nlohmann::json to_json(const TestGenTask& task);

void write_knowledge_base(const std::filesystem::path& path, const std::vector<KnowledgeDocument>& docs);
void write_inspection_tasks(const std::filesystem::path& path, const std::vector<InspectionTask>& tasks);
void write_testgen_tasks(const std::filesystem::path& path, const std::vector<TestGenTask>& tasks);

/// Code text of a knowledge document for mutation: metadata "code" when present, else content.
std::string_view code_of(const KnowledgeDocument& doc);

struct VariantSelection {
    std::size_t index = 0;
    const BugVariant* variant = nullptr;
    BugLabel label = BugLabel::BugFree;
};

/// Uniform seeded choice among the 8 variants. Pure in (task_id, seed):
/// the stream is seeded by hash64(seed, task_id).
VariantSelection select_variant(const InspectionTask& task, std::uint64_t seed);

std::string read_file(const std::filesystem::path& path);
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);
/// Hex FNV-1a digest of a file's bytes, stored in reports for like-for-like comparisons.
std::string content_hash(std::string_view bytes);

}  // namespace ragvv
