#include "ragvv/lexer.hpp"

#include <algorithm>
#include <array>

namespace ragvv::lex {

namespace {

// Python 3 hard keywords.
constexpr std::array<std::string_view, 35> kKeywords = {
    "False", "None",   "True",    "and",      "as",       "assert", "async", "await",  "break",
    "class", "continue", "def",   "del",      "elif",     "else",   "except", "finally", "for",
    "from",  "global", "if",      "import",   "in",       "is",     "lambda", "nonlocal", "not",
    "or",    "pass",   "raise",   "return",   "try",      "while",  "with",   "yield",
};

// Longest first so greedy matching picks "**=" over "**".
constexpr std::array<std::string_view, 24> kMultiCharOps = {
    "**=", "//=", ">>=", "<<=", "...", "->", ":=", "==", "!=", "<=", ">=", "**", "//", "<<",
    ">>",  "+=",  "-=",  "*=",  "/=",  "%=", "&=", "|=", "^=", "@=",
};

bool is_ident_start(unsigned char c) noexcept {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_' || c >= 0x80;
}

bool is_ident_char(unsigned char c) noexcept { return is_ident_start(c) || (c >= '0' && c <= '9'); }

bool is_digit(unsigned char c) noexcept { return c >= '0' && c <= '9'; }

bool is_space(char c) noexcept { return c == ' ' || c == '\t' || c == '\f' || c == '\v'; }

bool is_punct(char c) noexcept {
    switch (c) {
        case '(': case ')': case '[': case ']': case '{': case '}':
        case ',': case ':': case ';': case '.':
            return true;
        default:
            return false;
    }
}

class Lexer {
public:
    explicit Lexer(std::string_view src) : src_(src) {}

    std::vector<Token> run() {
        while (pos_ < src_.size()) {
            if (at_line_start_) {
                at_line_start_ = false;
                const std::size_t start = pos_;
                while (pos_ < src_.size() && is_space(src_[pos_])) ++pos_;
                if (pos_ > start) emit(TokenKind::Indent, start);
                continue;
            }
            const char c = src_[pos_];
            const std::size_t start = pos_;
            if (is_space(c)) {
                while (pos_ < src_.size() && is_space(src_[pos_])) ++pos_;
                attach_trailing(start);
            } else if (c == '\\' && continuation_at(pos_) && !tokens_.empty()) {
                pos_ += src_[pos_ + 1] == '\r' ? 3 : 2;
                ++line_;
                line_start_ = pos_;
                attach_trailing(start);
            } else if (c == '\n' || (c == '\r' && pos_ + 1 < src_.size() && src_[pos_ + 1] == '\n')) {
                pos_ += c == '\r' ? 2 : 1;
                emit(TokenKind::Newline, start);
                ++line_;
                line_start_ = pos_;
                at_line_start_ = true;
            } else if (c == '#') {
                while (pos_ < src_.size() && src_[pos_] != '\n' && src_[pos_] != '\r') ++pos_;
                emit(TokenKind::Comment, start);
            } else if (c == '"' || c == '\'') {
                lex_string(c);
            } else if (is_digit(static_cast<unsigned char>(c)) ||
                       (c == '.' && pos_ + 1 < src_.size() && is_digit(static_cast<unsigned char>(src_[pos_ + 1])))) {
                lex_number();
            } else if (is_ident_start(static_cast<unsigned char>(c))) {
                while (pos_ < src_.size() && is_ident_char(static_cast<unsigned char>(src_[pos_]))) ++pos_;
                const auto word = src_.substr(start, pos_ - start);
                emit(is_keyword(word) ? TokenKind::Keyword : TokenKind::Identifier, start);
            } else {
                lex_operator();
            }
        }
        return std::move(tokens_);
    }

private:
    bool continuation_at(std::size_t p) const noexcept {
        if (p + 1 >= src_.size()) return false;
        if (src_[p + 1] == '\n') return true;
        return src_[p + 1] == '\r' && p + 2 < src_.size() && src_[p + 2] == '\n';
    }

    void emit(TokenKind kind, std::size_t start, bool terminated = true) {
        Token t;
        t.kind = kind;
        t.text = std::string(src_.substr(start, pos_ - start));
        t.line = line_;
        t.col = static_cast<int>(start - line_start_);
        t.offset = start;
        t.terminated = terminated;
        tokens_.push_back(std::move(t));
    }

    void attach_trailing(std::size_t start) { tokens_.back().trailing += src_.substr(start, pos_ - start); }

    void lex_string(char quote) {
        const std::size_t start = pos_++;
        bool terminated = false;
        while (pos_ < src_.size()) {
            const char c = src_[pos_];
            if (c == '\n' || c == '\r') break;
            if (c == '\\' && pos_ + 1 < src_.size() && src_[pos_ + 1] != '\n' && src_[pos_ + 1] != '\r') {
                pos_ += 2;
                continue;
            }
            ++pos_;
            if (c == quote) {
                terminated = true;
                break;
            }
        }
        emit(TokenKind::StringLiteral, start, terminated);
    }

    void lex_number() {
        const std::size_t start = pos_;
        while (pos_ < src_.size()) {
            const auto c = static_cast<unsigned char>(src_[pos_]);
            if (is_ident_char(c) || c == '.') {
                ++pos_;
            } else if ((c == '+' || c == '-') && (src_[pos_ - 1] == 'e' || src_[pos_ - 1] == 'E') &&
                       !(src_[start] == '0' && pos_ - start > 1 && (src_[start + 1] == 'x' || src_[start + 1] == 'X'))) {
                ++pos_;
            } else {
                break;
            }
        }
        emit(TokenKind::Number, start);
    }

    void lex_operator() {
        const std::size_t start = pos_;
        const auto rest = src_.substr(pos_);
        for (const auto op : kMultiCharOps) {
            if (rest.starts_with(op)) {
                pos_ += op.size();
                emit(TokenKind::Operator, start);
                return;
            }
        }
        const char c = src_[pos_++];
        emit(is_punct(c) ? TokenKind::Punct : TokenKind::Operator, start);
    }

    std::string_view src_;
    std::size_t pos_ = 0;
    int line_ = 1;
    std::size_t line_start_ = 0;
    bool at_line_start_ = true;
    std::vector<Token> tokens_;
};

}  // namespace

std::string_view to_string(TokenKind kind) noexcept {
    switch (kind) {
        case TokenKind::Keyword: return "Keyword";
        case TokenKind::Identifier: return "Identifier";
        case TokenKind::Number: return "Number";
        case TokenKind::StringLiteral: return "StringLiteral";
        case TokenKind::Operator: return "Operator";
        case TokenKind::Punct: return "Punct";
        case TokenKind::Newline: return "Newline";
        case TokenKind::Indent: return "Indent";
        case TokenKind::Comment: return "Comment";
    }
    return "?";
}

bool is_keyword(std::string_view word) noexcept {
    return std::find(kKeywords.begin(), kKeywords.end(), word) != kKeywords.end();
}

std::vector<Token> tokenize(std::string_view source) { return Lexer(source).run(); }

std::string detokenize(const std::vector<Token>& tokens) {
    std::string out;
    for (const auto& t : tokens) {
        out += t.text;
        out += t.trailing;
    }
    return out;
}

bool has_simple_strings(std::string_view source) {
    if (source.find("\"\"\"") != std::string_view::npos || source.find("'''") != std::string_view::npos) {
        return false;
    }
    const auto tokens = tokenize(source);
    return std::all_of(tokens.begin(), tokens.end(), [](const Token& t) {
        return t.kind != TokenKind::StringLiteral || (t.terminated && t.text.size() >= 2);
    });
}

}  // namespace ragvv::lex
