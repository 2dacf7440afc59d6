#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "clineage/error.hpp"
#include "clineage/token.hpp"

namespace clineage::sol {

namespace detail {

inline bool is_ident_start(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_' || c == '$';
}
inline bool is_ident_char(char c) { return is_ident_start(c) || (c >= '0' && c <= '9'); }
inline bool is_digit(char c) { return c >= '0' && c <= '9'; }
inline bool is_hex(char c) {
    return is_digit(c) || (c >= 'a' && c <= 'f') || (c >= 'A' && c <= 'F');
}

// Longest first.
inline constexpr std::string_view kOperators[] = {
    ">>>=", "<<=", ">>=", ">>>", "**", "==", "!=", "<=", ">=", "&&", "||", "++", "--",
    "+=", "-=", "*=", "/=", "%=", "|=", "&=", "^=", "=>", "<<", ">>",
    "=", "<", ">", "+", "-", "*", "/", "%", "!", "~", "&", "|", "^", "?", ":", ".",
};

class Lexer {
public:
    explicit Lexer(std::string_view src) : src_(src) {}

    std::vector<Token> run() {
        while (true) {
            skip_trivia();
            if (pos_ >= src_.size()) break;
            lex_one();
        }
        return std::move(out_);
    }

private:
    std::string_view src_;
    std::size_t pos_ = 0;
    std::uint32_t line_ = 1;
    std::uint32_t col_ = 1;
    std::vector<Token> out_;

    char peek(std::size_t ahead = 0) const {
        return pos_ + ahead < src_.size() ? src_[pos_ + ahead] : '\0';
    }

    void advance(std::size_t n = 1) {
        for (std::size_t i = 0; i < n && pos_ < src_.size(); ++i) {
            if (src_[pos_] == '\n') {
                ++line_;
                col_ = 1;
            } else {
                ++col_;
            }
            ++pos_;
        }
    }

    [[noreturn]] void fail(std::uint32_t line, std::uint32_t col, std::size_t start, const char* what) const {
        std::string snippet(src_.substr(start, 24));
        for (auto& c : snippet) {
            if (c == '\n') c = ' ';
        }
        throw Error(ErrorCode::LexError, std::string(what) + " at " + std::to_string(line) + ":" +
                                             std::to_string(col) + " near '" + snippet + "'");
    }

    void skip_trivia() {
        while (pos_ < src_.size()) {
            char c = peek();
            if (c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\f' || c == '\v') {
                advance();
            } else if (c == '/' && peek(1) == '/') {
                while (pos_ < src_.size() && peek() != '\n') advance();
            } else if (c == '/' && peek(1) == '*') {
                auto line = line_, col = col_;
                auto start = pos_;
                advance(2);
                while (pos_ < src_.size() && !(peek() == '*' && peek(1) == '/')) advance();
                if (pos_ >= src_.size()) fail(line, col, start, "unterminated comment");
                advance(2);
            } else {
                break;
            }
        }
    }

    // A directive is only recognized where a new source-unit item can begin.
    bool at_directive_position() const {
        if (out_.empty()) return true;
        const Token& prev = out_.back();
        return prev.is_punct(";") || prev.is_punct("}");
    }

    void push(TokenKind kind, std::size_t start, std::uint32_t line, std::uint32_t col) {
        Token t;
        t.kind = kind;
        t.text = std::string(src_.substr(start, pos_ - start));
        t.line = line;
        t.column = col;
        t.offset = start;
        t.length = pos_ - start;
        out_.push_back(std::move(t));
    }

    void lex_string(std::size_t start, std::uint32_t line, std::uint32_t col) {
        char quote = peek();
        advance();
        while (true) {
            if (pos_ >= src_.size() || peek() == '\n') fail(line, col, start, "unterminated string");
            char c = peek();
            if (c == '\\') {
                advance(2);
                continue;
            }
            advance();
            if (c == quote) break;
        }
        push(TokenKind::StringLiteral, start, line, col);
    }

    TokenKind classify_word(std::string_view w) const {
        if (w == "true" || w == "false") return TokenKind::BoolLiteral;
        // Members after '.' are only builtin behind the fused global heads,
        // or when the member itself is a builtin name (x.send, a.length).
        if (out_.size() >= 2 && out_.back().is_op(".")) {
            const Token& head = out_[out_.size() - 2];
            if (head.kind == TokenKind::Builtin && is_builtin_member(head.text, w)) return TokenKind::Builtin;
            if (is_builtin_name(w) && !is_builtin_head(w)) return TokenKind::Builtin;
            return TokenKind::Identifier;
        }
        if (is_keyword(w)) return TokenKind::Keyword;
        if (is_builtin_name(w)) return TokenKind::Builtin;
        return TokenKind::Identifier;
    }

    void lex_one() {
        const std::size_t start = pos_;
        const auto line = line_;
        const auto col = col_;
        char c = peek();

        if (c == '"' || c == '\'') {
            lex_string(start, line, col);
            return;
        }

        if (is_ident_start(c)) {
            while (is_ident_char(peek())) advance();
            std::string_view word = src_.substr(start, pos_ - start);
            if ((word == "pragma" || word == "import") && at_directive_position()) {
                while (pos_ < src_.size() && peek() != ';') advance();
                advance();
                return;
            }
            if ((word == "hex" || word == "unicode") && (peek() == '"' || peek() == '\'')) {
                lex_string(pos_, line, col);
                out_.back().text = std::string(src_.substr(start, pos_ - start));
                out_.back().offset = start;
                out_.back().length = pos_ - start;
                return;
            }
            push(classify_word(word), start, line, col);
            return;
        }

        if (is_digit(c) || (c == '.' && is_digit(peek(1)))) {
            if (c == '0' && (peek(1) == 'x' || peek(1) == 'X')) {
                advance(2);
                std::size_t digits = 0;
                while (is_hex(peek()) || peek() == '_') {
                    if (peek() != '_') ++digits;
                    advance();
                }
                push(digits == 40 ? TokenKind::AddressLiteral : TokenKind::NumberLiteral, start, line, col);
                return;
            }
            while (is_digit(peek()) || peek() == '_') advance();
            if (peek() == '.' && is_digit(peek(1))) {
                advance();
                while (is_digit(peek()) || peek() == '_') advance();
            }
            if ((peek() == 'e' || peek() == 'E') &&
                (is_digit(peek(1)) || (peek(1) == '-' && is_digit(peek(2))))) {
                advance(2);
                while (is_digit(peek())) advance();
            }
            push(TokenKind::NumberLiteral, start, line, col);
            return;
        }

        std::string_view rest = src_.substr(pos_);
        if (is_punctuation(rest.substr(0, 1))) {
            advance();
            push(TokenKind::Punctuation, start, line, col);
            return;
        }
        for (std::string_view op : kOperators) {
            if (rest.starts_with(op)) {
                advance(op.size());
                push(TokenKind::Operator, start, line, col);
                return;
            }
        }

        // Anything else (stray symbols, non-ASCII) becomes a one-character
        // operator token so that every byte stays covered; UTF-8 sequences are
        // kept whole.
        auto lead = static_cast<unsigned char>(c);
        std::size_t n = lead >= 0xf0 ? 4 : lead >= 0xe0 ? 3 : lead >= 0xc0 ? 2 : 1;
        advance(n);
        push(TokenKind::Operator, start, line, col);
    }
};

} // namespace detail

/// Splits Solidity source into tokens. Comments and pragma/import directives
/// are dropped; every other non-whitespace byte belongs to exactly one token.
inline std::vector<Token> tokenize(std::string_view source) { return detail::Lexer(source).run(); }

} // namespace clineage::sol
