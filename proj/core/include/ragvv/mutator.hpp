#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ragvv/corpus.hpp"
#include "ragvv/error.hpp"

namespace ragvv {

struct MutationResult {
    std::string mutated_source;
    BugLabel label = BugLabel::MissingColon;
    int defect_line = 1;
};

/// Thrown by classify_defect when the two sources differ in more than one edit region
/// or in an edit no operator produces.
class AmbiguousDiff : public Error {
public:
    explicit AmbiguousDiff(const std::string& what) : Error(ErrorCategory::Data, what) {}
};

/// Keywords substituted by KeywordAsIdentifier, chosen by seed modulo the list size.
inline constexpr std::array<std::string_view, 5> kRenameKeywords = {"class", "for", "if", "return", "def"};

/// Introduces one defect of `label` at a seeded-uniform eligible site.
/// Returns std::nullopt (NotApplicable) when the source has no eligible site.
/// `label` must not be BugFree.
std::optional<MutationResult> inject_bug(std::string_view source, BugLabel label, std::uint64_t seed);

/// Number of eligible sites for one operator; 0 means NotApplicable.
/// For KeywordAsIdentifier this counts distinct bound names.
std::size_t count_sites(std::string_view source, BugLabel label);

struct DefectClassification {
    BugLabel label = BugLabel::BugFree;
    int line = 0;

    bool operator==(const DefectClassification&) const = default;
};

/// Recovers the operator class and 1-based line from the diff of two sources.
/// Identical inputs give (BugFree, 0).
DefectClassification classify_defect(std::string_view original, std::string_view mutated);

/// Builds a bug-free + seven-defect inspection task from one clean snippet.
/// NotApplicable when the snippet uses strings the lexer cannot treat reliably
/// or when any operator lacks a site.
std::optional<InspectionTask> generate_fixture_task(std::string_view clean_source, std::string_view task_id,
                                                    std::uint64_t seed);

}  // namespace ragvv
