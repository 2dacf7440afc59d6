#pragma once

#include <set>
#include <span>
#include <string>
#include <vector>

#include "clineage/address.hpp"
#include "clineage/ast.hpp"
#include "clineage/parser.hpp"
#include "clineage/serialize.hpp"
#include "clineage/token.hpp"

namespace clineage::sol {

struct NormalizedTokenSequence {
    std::vector<std::string> tokens;
    Address origin;
};

inline constexpr std::string_view kPlaceholders[] = {"ID", "FUNC", "MOD", "EVT", "TYPE", "NUM", "STR", "ADDR", "BOOL"};

inline bool is_placeholder(std::string_view lexeme) {
    return std::find(std::begin(kPlaceholders), std::end(kPlaceholders), lexeme) != std::end(kPlaceholders);
}

/// Declared names by role, gathered from the AST.
struct NameRoles {
    std::set<std::string> functions;
    std::set<std::string> modifiers;
    std::set<std::string> events;
    std::set<std::string> types;

    std::string_view role_of(const std::string& name) const {
        if (functions.contains(name)) return "FUNC";
        if (modifiers.contains(name)) return "MOD";
        if (events.contains(name)) return "EVT";
        if (types.contains(name)) return "TYPE";
        return "ID";
    }
};

inline NameRoles collect_roles(const AstNode& ast) {
    NameRoles roles;
    walk(ast, [&](const AstNode& n) {
        switch (n.kind) {
        case NodeKind::ContractDef:
            roles.types.insert(n.attrs.name);
            for (const auto& b : n.attrs.bases) roles.types.insert(b);
            break;
        case NodeKind::StructDef:
        case NodeKind::EnumDef: roles.types.insert(n.attrs.name); break;
        case NodeKind::FunctionDef:
            if (!n.attrs.name.empty() && !n.attrs.is_constructor) roles.functions.insert(n.attrs.name);
            break;
        case NodeKind::ModifierDef: roles.modifiers.insert(n.attrs.name); break;
        case NodeKind::EventDef: roles.events.insert(n.attrs.name); break;
        default: break;
        }
        // Declarations never nest inside expressions.
        return n.kind == NodeKind::SourceUnit || n.kind == NodeKind::ContractDef;
    });
    return roles;
}

inline std::vector<std::string> normalize_lexemes(std::span<const Token> tokens, const NameRoles& roles) {
    std::vector<const Token*> kept;
    kept.reserve(tokens.size());
    for (const auto& t : tokens) {
        if (t.kind != TokenKind::Punctuation) kept.push_back(&t);
    }

    std::vector<std::string> out;
    out.reserve(kept.size());
    for (std::size_t i = 0; i < kept.size(); ++i) {
        const Token& t = *kept[i];
        const bool after_dot = i > 0 && kept[i - 1]->is_op(".");
        switch (t.kind) {
        case TokenKind::NumberLiteral: out.emplace_back("NUM"); break;
        case TokenKind::StringLiteral: out.emplace_back("STR"); break;
        case TokenKind::AddressLiteral: out.emplace_back("ADDR"); break;
        case TokenKind::BoolLiteral: out.emplace_back("BOOL"); break;
        case TokenKind::Identifier: out.emplace_back(roles.role_of(t.text)); break;
        case TokenKind::Builtin: {
            if (!after_dot && roles.functions.contains(t.text)) {
                out.emplace_back("FUNC");
                break;
            }
            std::string lexeme = t.text;
            if (!after_dot && is_builtin_head(t.text)) {
                // Fuse head.member.member... while the members stay builtin.
                while (i + 2 < kept.size() && kept[i + 1]->is_op(".") &&
                       kept[i + 2]->kind == TokenKind::Builtin) {
                    lexeme += "." + kept[i + 2]->text;
                    i += 2;
                }
            }
            out.push_back(std::move(lexeme));
            break;
        }
        default: out.push_back(t.text); break;
        }
    }
    return out;
}

/// Strips semantically irrelevant detail: delimiters are dropped, literals
/// become their class placeholder and identifiers their declared role.
inline NormalizedTokenSequence normalize(std::span<const Token> tokens, const AstNode& ast, Address origin = {}) {
    return {normalize_lexemes(tokens, collect_roles(ast)), std::move(origin)};
}

/// tokenize -> parse -> in-order serialization -> normalize.
inline NormalizedTokenSequence normalize_unit(const ParsedUnit& unit, Address origin = {}) {
    auto serialized = serialize_inorder(unit.root, unit.tokens);
    return normalize(serialized, unit.root, std::move(origin));
}

inline NormalizedTokenSequence normalize_source(std::string source, Address origin = {}) {
    return normalize_unit(parse_source(std::move(source)), std::move(origin));
}

} // namespace clineage::sol
