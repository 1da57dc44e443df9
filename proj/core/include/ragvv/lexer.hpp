#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace ragvv::lex {

enum class TokenKind {
    Keyword,
    Identifier,
    Number,
    StringLiteral,
    Operator,
    Punct,
    Newline,
    Indent,
    Comment,
};

std::string_view to_string(TokenKind kind) noexcept;

/// One lexeme. `trailing` holds the whitespace (and line continuations) that
/// follows the token on the same logical run, so detokenize() is exact.
struct Token {
    TokenKind kind = TokenKind::Operator;
    std::string text;
    int line = 1;         // 1-based
    int col = 0;          // 0-based byte column
    std::size_t offset = 0;
    std::string trailing;
    bool terminated = true;  // string literals only: closing quote found on the same line

    [[nodiscard]] bool is(TokenKind k, std::string_view t) const noexcept { return kind == k && text == t; }
    [[nodiscard]] bool significant() const noexcept {
        return kind != TokenKind::Newline && kind != TokenKind::Indent && kind != TokenKind::Comment;
    }
};

/// Lossless, error-tolerant tokenizer for Python-like source. Never fails:
/// bytes it does not recognize come out as single-character Operator tokens.
std::vector<Token> tokenize(std::string_view source);

std::string detokenize(const std::vector<Token>& tokens);

bool is_keyword(std::string_view word) noexcept;

/// True when every string literal is a terminated single-line literal and no
/// triple-quoted strings occur, i.e. the mutation oracle can be trusted.
bool has_simple_strings(std::string_view source);

}  // namespace ragvv::lex
