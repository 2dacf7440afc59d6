#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace clineage::sol {

enum class NodeKind {
    SourceUnit,
    ContractDef,
    FunctionDef,
    ModifierDef,
    EventDef,
    StructDef,
    EnumDef,
    UsingFor,
    StateVarDecl,
    Block,
    IfStmt,
    ForStmt,
    WhileStmt,
    ReturnStmt,
    ExprStmt,
    LocalVarDecl,
    EmitStmt,
    Call,
    MemberAccess,
    Index,
    Assign,
    BinaryOp,
    UnaryOp,
    IdentifierRef,
    Literal,
};

inline std::string_view to_string(NodeKind k) {
    switch (k) {
    case NodeKind::SourceUnit: return "SourceUnit";
    case NodeKind::ContractDef: return "ContractDef";
    case NodeKind::FunctionDef: return "FunctionDef";
    case NodeKind::ModifierDef: return "ModifierDef";
    case NodeKind::EventDef: return "EventDef";
    case NodeKind::StructDef: return "StructDef";
    case NodeKind::EnumDef: return "EnumDef";
    case NodeKind::UsingFor: return "UsingFor";
    case NodeKind::StateVarDecl: return "StateVarDecl";
    case NodeKind::Block: return "Block";
    case NodeKind::IfStmt: return "IfStmt";
    case NodeKind::ForStmt: return "ForStmt";
    case NodeKind::WhileStmt: return "WhileStmt";
    case NodeKind::ReturnStmt: return "ReturnStmt";
    case NodeKind::ExprStmt: return "ExprStmt";
    case NodeKind::LocalVarDecl: return "LocalVarDecl";
    case NodeKind::EmitStmt: return "EmitStmt";
    case NodeKind::Call: return "Call";
    case NodeKind::MemberAccess: return "MemberAccess";
    case NodeKind::Index: return "Index";
    case NodeKind::Assign: return "Assign";
    case NodeKind::BinaryOp: return "BinaryOp";
    case NodeKind::UnaryOp: return "UnaryOp";
    case NodeKind::IdentifierRef: return "IdentifierRef";
    case NodeKind::Literal: return "Literal";
    }
    return "?";
}

/// Inclusive range of token indices.
struct TokenSpan {
    std::size_t first = 0;
    std::size_t last = 0;

    bool contains(const TokenSpan& o) const { return first <= o.first && o.last <= last; }
};

struct Param {
    std::string type;
    std::string name;
};

/// Kind-specific payload. Only the fields relevant to a node's kind are set.
struct Attributes {
    std::string name;           // declared name, identifier, member name, literal text
    std::string op;             // operator of BinaryOp/UnaryOp/Assign; literal class of Literal
    std::string type;           // declared type of StateVarDecl/LocalVarDecl
    std::string contract_kind;  // contract | library | interface
    std::string visibility;     // public | external | internal | private | ""
    std::string mutability;     // pure | view | constant | payable | ""
    std::vector<std::string> bases;
    std::vector<std::string> modifiers;  // modifier invocations on a function
    std::vector<std::string> members;    // struct fields / enum values
    std::vector<Param> params;
    std::vector<Param> returns;
    bool payable = false;
    bool is_constructor = false;
    bool has_body = false;
    bool postfix = false;   // UnaryOp
    bool opaque = false;    // ExprStmt produced by error recovery
    bool do_while = false;  // WhileStmt
    // ForStmt/WhileStmt slots as child indices, -1 when absent.
    int init = -1;
    int cond = -1;
    int post = -1;
    int body = -1;
};

struct AstNode {
    NodeKind kind = NodeKind::SourceUnit;
    TokenSpan span;
    Attributes attrs;
    std::vector<AstNode> children;

    const AstNode* slot(int index) const {
        return index < 0 ? nullptr : &children[static_cast<std::size_t>(index)];
    }
};

/// Pre-order walk. The visitor returns false to skip a node's subtree.
template <class Visitor>
void walk(const AstNode& node, Visitor&& visit) {
    if (!visit(node)) return;
    for (const auto& child : node.children) walk(child, visit);
}

template <class Pred>
bool any_of_subtree(const AstNode& node, Pred&& pred) {
    bool found = false;
    walk(node, [&](const AstNode& n) {
        if (found) return false;
        if (pred(n)) {
            found = true;
            return false;
        }
        return true;
    });
    return found;
}

} // namespace clineage::sol
