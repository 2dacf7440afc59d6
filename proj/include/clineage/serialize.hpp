#pragma once

#include <span>
#include <vector>

#include "clineage/ast.hpp"
#include "clineage/token.hpp"

namespace clineage::sol {

namespace detail {

inline void emit_inorder(const AstNode& node, std::span<const Token> tokens, std::vector<Token>& out) {
    if (tokens.empty()) return;
    std::size_t pos = node.span.first;
    const std::size_t end = std::min(node.span.last, tokens.size() - 1);
    auto emit_own = [&](std::size_t upto) {
        for (; pos < upto && pos <= end; ++pos) {
            if (tokens[pos].kind != TokenKind::Punctuation) out.push_back(tokens[pos]);
        }
    };
    // Children are stored in source order and never overlap, so a binary node
    // yields left operand, its operator, then the right operand.
    for (const auto& child : node.children) {
        emit_own(child.span.first);
        emit_inorder(child, tokens, out);
        pos = child.span.last + 1;
    }
    emit_own(end + 1);
}

} // namespace detail

/// In-order traversal of the AST back to tokens. Delimiter punctuation is
/// structural and is not emitted.
inline std::vector<Token> serialize_inorder(const AstNode& ast, std::span<const Token> tokens) {
    std::vector<Token> out;
    if (ast.kind == NodeKind::SourceUnit && ast.children.empty()) return out;
    detail::emit_inorder(ast, tokens, out);
    return out;
}

} // namespace clineage::sol
