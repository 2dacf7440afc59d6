#pragma once

#include <algorithm>
#include <iterator>
#include <utility>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>

namespace clineage::sol {

enum class TokenKind {
    Keyword,
    Identifier,
    Builtin,
    NumberLiteral,
    StringLiteral,
    AddressLiteral,
    BoolLiteral,
    Operator,
    Punctuation,
};

inline std::string_view to_string(TokenKind kind) {
    switch (kind) {
    case TokenKind::Keyword: return "keyword";
    case TokenKind::Identifier: return "identifier";
    case TokenKind::Builtin: return "builtin";
    case TokenKind::NumberLiteral: return "number-literal";
    case TokenKind::StringLiteral: return "string-literal";
    case TokenKind::AddressLiteral: return "address-literal";
    case TokenKind::BoolLiteral: return "bool-literal";
    case TokenKind::Operator: return "operator";
    case TokenKind::Punctuation: return "punctuation";
    }
    return "operator";
}

struct Token {
    TokenKind kind = TokenKind::Operator;
    std::string text;
    std::uint32_t line = 1;    // 1-based
    std::uint32_t column = 1;  // 1-based, in bytes
    std::size_t offset = 0;    // byte offset into the source
    std::size_t length = 0;    // byte length in the source

    bool is(TokenKind k, std::string_view t) const { return kind == k && text == t; }
    bool is_punct(std::string_view t) const { return kind == TokenKind::Punctuation && text == t; }
    bool is_op(std::string_view t) const { return kind == TokenKind::Operator && text == t; }
    bool is_keyword(std::string_view t) const { return kind == TokenKind::Keyword && text == t; }
    bool is_literal() const {
        return kind == TokenKind::NumberLiteral || kind == TokenKind::StringLiteral ||
               kind == TokenKind::AddressLiteral || kind == TokenKind::BoolLiteral;
    }
};

/// Version tag of the keyword and builtin tables below. Bump it whenever the
/// tables change, since normalized sequences (and trained models) depend on it.
inline constexpr std::string_view kTableVersion = "solidity-0.4/1";

inline constexpr std::string_view kKeywords[] = {
    "abstract", "anonymous", "as", "assembly", "break", "calldata", "constant",
    "constructor", "continue", "contract", "delete", "do", "else", "emit", "enum",
    "event", "external", "for", "function", "if", "import", "indexed", "interface",
    "internal", "is", "library", "mapping", "memory", "modifier", "new", "payable",
    "pragma", "private", "public", "pure", "return", "returns", "storage", "struct",
    "throw", "using", "var", "view", "while",
    // denominations
    "wei", "szabo", "finney", "ether", "seconds", "minutes", "hours", "days", "weeks", "years",
    // elementary type names without a size suffix
    "address", "bool", "string", "byte",
};

/// Names that keep their text through normalization.
inline constexpr std::string_view kBuiltinNames[] = {
    "msg", "tx", "block", "this", "require", "assert", "selfdestruct",
    "transfer", "send", "call", "delegatecall", "balance", "length",
};

/// Members that are builtin only behind a specific global object.
inline constexpr std::pair<std::string_view, std::string_view> kBuiltinMembers[] = {
    {"msg", "sender"}, {"msg", "value"}, {"tx", "origin"},
};

/// Global objects whose builtin member chains are fused into one lexeme.
inline constexpr std::string_view kBuiltinHeads[] = {"msg", "tx", "block", "this"};

inline constexpr std::string_view kPunctuation[] = {"{", "}", "(", ")", "[", "]", ";", ","};

inline constexpr std::string_view kDenominations[] = {
    "wei", "szabo", "finney", "ether", "seconds", "minutes", "hours", "days", "weeks", "years",
};

namespace detail {
inline bool all_digits(std::string_view s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

/// uint, uint8..uint256, int.., bytes, bytes1..bytes32, fixed, ufixed.
inline bool is_sized_type(std::string_view w) {
    auto bits_ok = [](std::string_view suffix) {
        if (suffix.empty()) return true;
        if (!all_digits(suffix) || suffix.size() > 3) return false;
        int n = std::stoi(std::string(suffix));
        return n >= 8 && n <= 256 && n % 8 == 0;
    };
    if (w.starts_with("uint")) return bits_ok(w.substr(4));
    if (w.starts_with("int")) return bits_ok(w.substr(3));
    if (w.starts_with("bytes")) {
        auto suffix = w.substr(5);
        if (suffix.empty()) return true;
        if (!all_digits(suffix) || suffix.size() > 2) return false;
        int n = std::stoi(std::string(suffix));
        return n >= 1 && n <= 32;
    }
    if (w == "fixed" || w == "ufixed") return true;
    return false;
}
} // namespace detail

inline bool is_keyword(std::string_view w) {
    return std::find(std::begin(kKeywords), std::end(kKeywords), w) != std::end(kKeywords) || detail::is_sized_type(w);
}

inline bool is_elementary_type(std::string_view w) {
    return w == "address" || w == "bool" || w == "string" || w == "byte" || w == "var" ||
           detail::is_sized_type(w);
}

inline bool is_builtin_name(std::string_view w) {
    return std::find(std::begin(kBuiltinNames), std::end(kBuiltinNames), w) != std::end(kBuiltinNames);
}

inline bool is_builtin_head(std::string_view w) {
    return std::find(std::begin(kBuiltinHeads), std::end(kBuiltinHeads), w) != std::end(kBuiltinHeads);
}

inline bool is_builtin_member(std::string_view head, std::string_view member) {
    if (head == "block") return true;
    return std::find(std::begin(kBuiltinMembers), std::end(kBuiltinMembers), std::pair{head, member}) !=
           std::end(kBuiltinMembers);
}

inline bool is_punctuation(std::string_view t) {
    return std::find(std::begin(kPunctuation), std::end(kPunctuation), t) != std::end(kPunctuation);
}

inline bool is_denomination(std::string_view t) {
    return std::find(std::begin(kDenominations), std::end(kDenominations), t) != std::end(kDenominations);
}

} // namespace clineage::sol
