#include "ragvv/mutator.hpp"

#include <algorithm>
#include <cassert>
#include <set>

#include <fmt/format.h>

#include "ragvv/hashing.hpp"
#include "ragvv/lexer.hpp"

namespace ragvv {

using lex::Token;
using lex::TokenKind;

namespace {

// Byte edit on the source text: replace [offset, offset + length) with `replacement`.
struct Site {
    std::size_t offset = 0;
    std::size_t length = 1;
    std::string replacement;
    int line = 1;
};

constexpr std::array<std::string_view, 10> kHeaderKeywords = {
    "def", "if", "elif", "else", "for", "while", "class", "try", "except", "finally",
};

bool is_header_keyword(const Token& t) {
    if (t.kind != TokenKind::Keyword) return false;
    return t.text == "with" ||
           std::find(kHeaderKeywords.begin(), kHeaderKeywords.end(), t.text) != kHeaderKeywords.end();
}

bool is_opener(const Token& t) {
    return t.kind == TokenKind::Punct && (t.text == "(" || t.text == "[" || t.text == "{");
}

bool is_closer(const Token& t) {
    return t.kind == TokenKind::Punct && (t.text == ")" || t.text == "]" || t.text == "}");
}

// Splits significant tokens into logical lines: a Newline at bracket depth 0 ends a line.
std::vector<std::vector<const Token*>> logical_lines(const std::vector<Token>& tokens) {
    std::vector<std::vector<const Token*>> lines(1);
    int depth = 0;
    for (const auto& t : tokens) {
        if (t.kind == TokenKind::Newline) {
            if (depth <= 0 && !lines.back().empty()) lines.emplace_back();
            continue;
        }
        if (!t.significant()) continue;
        if (is_opener(t)) ++depth;
        if (is_closer(t)) depth = std::max(0, depth - 1);
        lines.back().push_back(&t);
    }
    if (lines.back().empty()) lines.pop_back();
    return lines;
}

std::vector<Site> header_colon_sites(const std::vector<Token>& tokens) {
    std::vector<Site> sites;
    for (const auto& line : logical_lines(tokens)) {
        std::size_t head = 0;
        if (line[0]->is(TokenKind::Keyword, "async") && line.size() > 1) head = 1;
        if (!is_header_keyword(*line[head])) continue;
        int depth = 0;
        for (std::size_t i = head + 1; i < line.size(); ++i) {
            const Token& t = *line[i];
            if (is_opener(t)) ++depth;
            if (is_closer(t)) --depth;
            if (depth == 0 && t.is(TokenKind::Punct, ":")) {
                sites.push_back({t.offset, 1, "", t.line});
                break;
            }
        }
    }
    return sites;
}

std::vector<Site> punct_sites(const std::vector<Token>& tokens, std::initializer_list<std::string_view> texts) {
    std::vector<Site> sites;
    for (const auto& t : tokens) {
        if (t.kind != TokenKind::Punct) continue;
        if (std::find(texts.begin(), texts.end(), t.text) != texts.end()) sites.push_back({t.offset, 1, "", t.line});
    }
    return sites;
}

bool is_quoted_string(const Token& t) {
    return t.kind == TokenKind::StringLiteral && t.terminated && t.text.size() >= 2;
}

char other_quote(char q) { return q == '"' ? '\'' : '"'; }

std::vector<Site> quotation_sites(const std::vector<Token>& tokens) {
    std::vector<Site> sites;
    for (const auto& t : tokens) {
        if (!is_quoted_string(t)) continue;
        sites.push_back({t.offset, 1, "", t.line});
        sites.push_back({t.offset + t.text.size() - 1, 1, "", t.line});
    }
    return sites;
}

std::vector<Site> mismatched_quotation_sites(const std::vector<Token>& tokens) {
    std::vector<Site> sites;
    for (const auto& t : tokens) {
        if (!is_quoted_string(t)) continue;
        sites.push_back({t.offset + t.text.size() - 1, 1, std::string(1, other_quote(t.text.back())), t.line});
    }
    return sites;
}

std::string_view bracket_replacement(std::string_view closer) {
    if (closer == ")") return "]";
    return ")";  // ']' and '}' both become ')'
}

std::vector<Site> bracket_sites(const std::vector<Token>& tokens) {
    std::vector<Site> sites;
    for (const auto& t : tokens) {
        if (is_closer(t)) sites.push_back({t.offset, 1, std::string(bracket_replacement(t.text)), t.line});
    }
    return sites;
}

bool is_assign_op(const Token& t) {
    if (t.kind != TokenKind::Operator) return false;
    static constexpr std::array<std::string_view, 13> ops = {"=",  "+=", "-=", "*=",  "/=",  "//=", "%=",
                                                             "**=", "&=", "|=", "^=", ">>=", "<<="};
    return std::find(ops.begin(), ops.end(), t.text) != ops.end();
}

// Names bound in the snippet, in order of first binding: def/class names,
// parameters, assignment / for / as targets.
std::vector<std::string> bound_names(const std::vector<Token>& tokens) {
    std::vector<std::string> names;
    auto add = [&](const Token& t) {
        if (t.kind != TokenKind::Identifier) return;
        if (std::find(names.begin(), names.end(), t.text) == names.end()) names.push_back(t.text);
    };
    for (const auto& line : logical_lines(tokens)) {
        const std::size_t n = line.size();
        for (std::size_t i = 0; i < n; ++i) {
            const Token& t = *line[i];
            if ((t.is(TokenKind::Keyword, "def") || t.is(TokenKind::Keyword, "class")) && i + 1 < n) {
                add(*line[i + 1]);
                if (t.text == "def" && i + 2 < n && line[i + 2]->is(TokenKind::Punct, "(")) {
                    int depth = 0;
                    for (std::size_t j = i + 2; j < n; ++j) {
                        const Token& p = *line[j];
                        if (is_opener(p)) ++depth;
                        if (is_closer(p) && --depth == 0) break;
                        if (depth != 1 || p.kind != TokenKind::Identifier) continue;
                        const Token& prev = *line[j - 1];
                        const bool after_sep = prev.is(TokenKind::Punct, "(") || prev.is(TokenKind::Punct, ",") ||
                                               prev.is(TokenKind::Operator, "*") || prev.is(TokenKind::Operator, "**");
                        if (!after_sep || j + 1 >= n) continue;
                        const Token& next = *line[j + 1];
                        if (next.is(TokenKind::Punct, ",") || next.is(TokenKind::Punct, ")") ||
                            next.is(TokenKind::Punct, ":") || next.is(TokenKind::Operator, "=")) {
                            add(p);
                        }
                    }
                }
            } else if (t.is(TokenKind::Keyword, "for")) {
                for (std::size_t j = i + 1; j < n && !line[j]->is(TokenKind::Keyword, "in"); ++j) add(*line[j]);
            } else if (t.is(TokenKind::Keyword, "as") && i + 1 < n) {
                add(*line[i + 1]);
            } else if (i == 0 && t.kind == TokenKind::Identifier && n > 1 && is_assign_op(*line[1])) {
                add(t);
            }
        }
    }
    return names;
}

std::string apply(std::string_view source, const Site& site) {
    std::string out;
    out.reserve(source.size() + site.replacement.size());
    out.append(source.substr(0, site.offset));
    out.append(site.replacement);
    out.append(source.substr(site.offset + site.length));
    return out;
}

std::vector<Site> sites_for(const std::vector<Token>& tokens, BugLabel label) {
    switch (label) {
        case BugLabel::MissingColon: return header_colon_sites(tokens);
        case BugLabel::MissingParenthesis: return punct_sites(tokens, {"(", ")"});
        case BugLabel::MissingQuotation: return quotation_sites(tokens);
        case BugLabel::MissingComma: return punct_sites(tokens, {","});
        case BugLabel::MismatchedQuotation: return mismatched_quotation_sites(tokens);
        case BugLabel::MismatchedBracket: return bracket_sites(tokens);
        case BugLabel::BugFree:
        case BugLabel::KeywordAsIdentifier: break;
    }
    return {};
}

std::optional<MutationResult> rename_to_keyword(std::string_view source, const std::vector<Token>& tokens,
                                                std::uint64_t seed, SplitMix64& rng) {
    const auto names = bound_names(tokens);
    if (names.empty()) return std::nullopt;
    const std::string& victim = names[rng.below(names.size())];
    const std::string_view keyword = kRenameKeywords[seed % kRenameKeywords.size()];

    MutationResult result;
    result.label = BugLabel::KeywordAsIdentifier;
    result.defect_line = 0;
    std::size_t copied = 0;
    for (const auto& t : tokens) {
        if (t.kind != TokenKind::Identifier || t.text != victim) continue;
        if (result.defect_line == 0) result.defect_line = t.line;
        result.mutated_source.append(source.substr(copied, t.offset - copied));
        result.mutated_source.append(keyword);
        copied = t.offset + t.text.size();
    }
    result.mutated_source.append(source.substr(copied));
    return result;
}

const Token* token_at(const std::vector<Token>& tokens, std::size_t offset) {
    auto it = std::upper_bound(tokens.begin(), tokens.end(), offset,
                               [](std::size_t off, const Token& t) { return off < t.offset; });
    if (it == tokens.begin()) return nullptr;
    --it;
    if (offset >= it->offset + it->text.size()) return nullptr;
    return &*it;
}

std::optional<DefectClassification> classify_rename(const std::vector<Token>& before, const std::vector<Token>& after) {
    if (before.size() != after.size()) return std::nullopt;
    std::optional<std::pair<std::string, std::string>> mapping;
    int line = 0;
    for (std::size_t i = 0; i < before.size(); ++i) {
        const Token& a = before[i];
        const Token& b = after[i];
        if (a.kind == b.kind && a.text == b.text && a.trailing == b.trailing) continue;
        if (a.kind != TokenKind::Identifier || b.kind != TokenKind::Keyword || a.trailing != b.trailing) {
            return std::nullopt;
        }
        if (!mapping) {
            mapping.emplace(a.text, b.text);
            line = a.line;
        } else if (mapping->first != a.text || mapping->second != b.text) {
            throw AmbiguousDiff(fmt::format("more than one identifier renamed ('{}' and '{}')", mapping->first, a.text));
        }
    }
    if (!mapping) return std::nullopt;
    return DefectClassification{BugLabel::KeywordAsIdentifier, line};
}

}  // namespace

std::size_t count_sites(std::string_view source, BugLabel label) {
    const auto tokens = lex::tokenize(source);
    if (label == BugLabel::KeywordAsIdentifier) return bound_names(tokens).size();
    return sites_for(tokens, label).size();
}

std::optional<MutationResult> inject_bug(std::string_view source, BugLabel label, std::uint64_t seed) {
    if (label == BugLabel::BugFree) throw DataError("inject_bug: BugFree is not a defect class");
    const auto tokens = lex::tokenize(source);
    SplitMix64 rng(hash64(seed, to_string(label)));
    if (label == BugLabel::KeywordAsIdentifier) return rename_to_keyword(source, tokens, seed, rng);

    const auto sites = sites_for(tokens, label);
    if (sites.empty()) return std::nullopt;
    const Site& site = sites[rng.below(sites.size())];
    return MutationResult{apply(source, site), label, site.line};
}

DefectClassification classify_defect(std::string_view original, std::string_view mutated) {
    if (original == mutated) return {BugLabel::BugFree, 0};
    const auto before = lex::tokenize(original);
    const auto after = lex::tokenize(mutated);
    if (auto renamed = classify_rename(before, after)) return *renamed;

    std::size_t prefix = 0;
    const std::size_t limit = std::min(original.size(), mutated.size());
    while (prefix < limit && original[prefix] == mutated[prefix]) ++prefix;
    std::size_t suffix = 0;
    while (suffix < limit - prefix &&
           original[original.size() - 1 - suffix] == mutated[mutated.size() - 1 - suffix]) {
        ++suffix;
    }
    const std::size_t removed = original.size() - prefix - suffix;
    const std::size_t inserted = mutated.size() - prefix - suffix;
    if (removed != 1 || inserted > 1) {
        throw AmbiguousDiff(fmt::format("edit region of {} -> {} bytes at offset {} is not a single edit", removed,
                                        inserted, prefix));
    }
    const Token* token = token_at(before, prefix);
    if (!token) throw AmbiguousDiff(fmt::format("edit at offset {} falls outside any token", prefix));
    const char gone = original[prefix];
    const bool delimiter = is_quoted_string(*token) &&
                           (prefix == token->offset || prefix == token->offset + token->text.size() - 1);
    const bool closing_delimiter = is_quoted_string(*token) && prefix == token->offset + token->text.size() - 1;

    if (inserted == 0) {
        if (token->is(TokenKind::Punct, ":")) return {BugLabel::MissingColon, token->line};
        if (token->is(TokenKind::Punct, "(") || token->is(TokenKind::Punct, ")")) {
            return {BugLabel::MissingParenthesis, token->line};
        }
        if (token->is(TokenKind::Punct, ",")) return {BugLabel::MissingComma, token->line};
        if (delimiter) return {BugLabel::MissingQuotation, token->line};
    } else {
        const char now = mutated[prefix];
        if (closing_delimiter && now == other_quote(gone)) return {BugLabel::MismatchedQuotation, token->line};
        if (is_closer(*token) && (now == ')' || now == ']' || now == '}') && now != gone) {
            return {BugLabel::MismatchedBracket, token->line};
        }
    }
    throw AmbiguousDiff(fmt::format("edit at line {} ('{}') matches no defect operator", token->line, gone));
}

std::optional<InspectionTask> generate_fixture_task(std::string_view clean_source, std::string_view task_id,
                                                    std::uint64_t seed) {
    if (clean_source.empty() || !lex::has_simple_strings(clean_source)) return std::nullopt;
    InspectionTask task;
    task.task_id = std::string(task_id);
    task.variants.push_back({BugLabel::BugFree, std::string(clean_source), std::nullopt});
    for (const BugLabel label : kDefectLabels) {
        auto result = inject_bug(clean_source, label, hash64(seed, task_id));
        if (!result) return std::nullopt;
        task.variants.push_back({label, std::move(result->mutated_source), result->defect_line});
    }
    return task;
}

}  // namespace ragvv
