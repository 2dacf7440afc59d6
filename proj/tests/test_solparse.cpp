#include <algorithm>
#include <map>
#include <random>

#include <gtest/gtest.h>

#include "clineage/normalize.hpp"
#include "clineage/parser.hpp"
#include "clineage/serialize.hpp"
#include "support.hpp"

using namespace clineage;
using namespace clineage::sol;

namespace {

std::vector<std::pair<std::string, std::string>> kinds_and_text(const std::vector<Token>& toks) {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& t : toks) out.emplace_back(std::string(to_string(t.kind)), t.text);
    return out;
}

std::vector<std::string> texts(const std::vector<Token>& toks) {
    std::vector<std::string> out;
    for (const auto& t : toks) out.push_back(t.text);
    return out;
}

const AstNode* find_first(const AstNode& root, NodeKind kind) {
    const AstNode* found = nullptr;
    walk(root, [&](const AstNode& n) {
        if (found) return false;
        if (n.kind == kind) {
            found = &n;
            return false;
        }
        return true;
    });
    return found;
}

std::vector<std::string> normalized(const std::string& src) { return normalize_source(src).tokens; }

const std::vector<std::string> kFixtures = {"victim_v1.sol", "victim_v2.sol", "victim_v3.sol", "payout_v1.sol",
                                            "payout_v2.sol", "token_v1.sol",  "token_v2.sol",  "registry.sol",
                                            "kill_switch.sol", "registry_v2.sol"};

} // namespace

TEST(Tokenize, Empty) { EXPECT_TRUE(tokenize("").empty()); }

TEST(Tokenize, SimpleDeclaration) {
    using P = std::pair<std::string, std::string>;
    std::vector<P> expected = {{"keyword", "uint"},
                               {"identifier", "a"},
                               {"operator", "="},
                               {"number-literal", "1"},
                               {"punctuation", ";"}};
    EXPECT_EQ(kinds_and_text(tokenize("uint a = 1;")), expected);
}

TEST(Tokenize, CommentsAndPragmaDropped) {
    EXPECT_TRUE(tokenize("/* x */ pragma solidity ^0.4.25;").empty());
    EXPECT_TRUE(tokenize("// only a comment\nimport \"./a.sol\";\n").empty());
}

TEST(Tokenize, PositionsAreOneBased) {
    auto toks = tokenize("contract A {\n  uint x;\n}");
    ASSERT_GE(toks.size(), 4u);
    EXPECT_EQ(toks[0].line, 1u);
    EXPECT_EQ(toks[0].column, 1u);
    EXPECT_EQ(toks[3].text, "uint");
    EXPECT_EQ(toks[3].line, 2u);
    EXPECT_EQ(toks[3].column, 3u);
}

TEST(Tokenize, LiteralClasses) {
    auto toks = tokenize("x = 0x" + std::string(40, 'a') + "; y = 0x1f; z = \"s\"; w = true;");
    std::map<std::string, std::string> kind_of;
    for (const auto& t : toks) kind_of[t.text] = std::string(to_string(t.kind));
    EXPECT_EQ(kind_of["0x" + std::string(40, 'a')], "address-literal");
    EXPECT_EQ(kind_of["0x1f"], "number-literal");
    EXPECT_EQ(kind_of["\"s\""], "string-literal");
    EXPECT_EQ(kind_of["true"], "bool-literal");
}

TEST(Tokenize, UnterminatedIsLexError) {
    for (const char* src : {"string s = \"abc", "uint a; /* never closed"}) {
        try {
            tokenize(src);
            FAIL() << src;
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), ErrorCode::LexError);
        }
    }
}

// Property: every non-whitespace, non-comment byte is covered by exactly one token.
TEST(Tokenize, CoversSourceOnFixtures) {
    for (const auto& name : kFixtures) {
        const auto src = testsupport::read_sol(name);
        auto toks = tokenize(src);
        for (std::size_t i = 0; i < toks.size(); ++i) {
            EXPECT_EQ(src.substr(toks[i].offset, toks[i].length), toks[i].text) << name;
            if (i > 0) { EXPECT_GE(toks[i].offset, toks[i - 1].offset + toks[i - 1].length) << name; }
        }
    }
}

TEST(Parse, MinimalContract) {
    auto u = parse_source("contract A {}");
    EXPECT_EQ(u.root.kind, NodeKind::SourceUnit);
    ASSERT_EQ(u.root.children.size(), 1u);
    EXPECT_EQ(u.root.children[0].kind, NodeKind::ContractDef);
    EXPECT_EQ(u.root.children[0].attrs.name, "A");
    EXPECT_TRUE(u.root.children[0].children.empty());
    EXPECT_EQ(u.recoveries, 0u);
}

TEST(Parse, PayoutLoop) {
    auto u = parse_source(
        "contract P { address[] member; function pay() public {"
        " for(uint i = 0; i < member.length; i++){ member[i].send(1 wei); } } }");
    EXPECT_EQ(u.recoveries, 0u);
    const AstNode* loop = find_first(u.root, NodeKind::ForStmt);
    ASSERT_NE(loop, nullptr);
    const AstNode* cond = loop->slot(loop->attrs.cond);
    ASSERT_NE(cond, nullptr);
    EXPECT_EQ(cond->kind, NodeKind::BinaryOp);
    EXPECT_EQ(cond->attrs.op, "<");
    ASSERT_EQ(cond->children.size(), 2u);
    EXPECT_EQ(cond->children[0].kind, NodeKind::IdentifierRef);
    EXPECT_EQ(cond->children[0].attrs.name, "i");
    EXPECT_EQ(cond->children[1].kind, NodeKind::MemberAccess);
    EXPECT_EQ(cond->children[1].attrs.name, "length");
    ASSERT_EQ(cond->children[1].children.size(), 1u);
    EXPECT_EQ(cond->children[1].children[0].attrs.name, "member");
    const AstNode* body = loop->slot(loop->attrs.body);
    ASSERT_NE(body, nullptr);
    EXPECT_TRUE(any_of_subtree(*body, [](const AstNode& n) {
        return n.kind == NodeKind::Call && !n.children.empty() && n.children[0].kind == NodeKind::MemberAccess &&
               n.children[0].attrs.name == "send";
    }));
}

TEST(Parse, AssemblyIsRecovered) {
    auto u = parse_source(testsupport::read_sol("registry.sol"));
    EXPECT_EQ(u.recoveries, 1u);
    const AstNode* opaque = nullptr;
    walk(u.root, [&](const AstNode& n) {
        if (n.kind == NodeKind::ExprStmt && n.attrs.opaque) opaque = &n;
        return true;
    });
    ASSERT_NE(opaque, nullptr);
    EXPECT_EQ(u.tokens[opaque->span.first].text, "assembly");
}

TEST(Parse, UnclosedBraceIsFatal) {
    try {
        parse_source("contract A { function f() public {");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ParseFatal);
    }
}

TEST(Parse, CapitalizedDenomination) {
    auto u = parse_source("contract A { function f() public { msg.sender.transfer(1 Ether); } }");
    EXPECT_EQ(u.recoveries, 0u);
}

TEST(Parse, FunctionAttributes) {
    auto u = parse_source(
        "contract A { modifier onlyOwner() { _; } "
        "function f(uint a) external payable onlyOwner returns (bool ok) { return true; } }");
    const AstNode* f = find_first(u.root, NodeKind::FunctionDef);
    ASSERT_NE(f, nullptr);
    EXPECT_EQ(f->attrs.name, "f");
    EXPECT_EQ(f->attrs.visibility, "external");
    EXPECT_TRUE(f->attrs.payable);
    ASSERT_EQ(f->attrs.modifiers.size(), 1u);
    EXPECT_EQ(f->attrs.modifiers[0], "onlyOwner");
    ASSERT_EQ(f->attrs.returns.size(), 1u);
    EXPECT_EQ(f->attrs.returns[0].type, "bool");
    ASSERT_EQ(f->attrs.params.size(), 1u);
    EXPECT_EQ(f->attrs.params[0].name, "a");
}

// Property: parent spans cover their children, and children appear in source order.
TEST(Parse, SpansNestOnFixtures) {
    for (const auto& name : kFixtures) {
        auto u = parse_source(testsupport::read_sol(name));
        walk(u.root, [&](const AstNode& n) {
            for (std::size_t i = 0; i < n.children.size(); ++i) {
                const auto& c = n.children[i];
                EXPECT_LE(n.span.first, c.span.first) << name;
                EXPECT_GE(n.span.last, c.span.last) << name;
                if (i > 0) { EXPECT_GT(c.span.first, n.children[i - 1].span.last) << name; }
            }
            return true;
        });
    }
}

TEST(Parse, FixturesNeverAbort) {
    for (const auto& name : kFixtures) {
        EXPECT_NO_THROW(parse_source(testsupport::read_sol(name))) << name;
    }
}

TEST(Serialize, ContractOnly) {
    auto u = parse_source("contract A {}");
    EXPECT_EQ(texts(serialize_inorder(u.root, u.tokens)), (std::vector<std::string>{"contract", "A"}));
}

TEST(Serialize, BinaryOpInOrder) {
    auto u = parse_source("contract A { function f() public { while (i < member.length) {} } }");
    const AstNode* loop = find_first(u.root, NodeKind::WhileStmt);
    ASSERT_NE(loop, nullptr);
    const AstNode* cond = loop->slot(loop->attrs.cond);
    ASSERT_NE(cond, nullptr);
    EXPECT_EQ(texts(serialize_inorder(*cond, u.tokens)),
              (std::vector<std::string>{"i", "<", "member", ".", "length"}));
}

TEST(Serialize, TwoContractsConcatenate) {
    auto u = parse_source("contract A {} contract B {}");
    EXPECT_EQ(texts(serialize_inorder(u.root, u.tokens)),
              (std::vector<std::string>{"contract", "A", "contract", "B"}));
}

// Property: serialization is a re-listing of the non-punctuation tokens.
TEST(Serialize, PermutationFreeOnFixtures) {
    for (const auto& name : kFixtures) {
        auto u = parse_source(testsupport::read_sol(name));
        std::vector<std::string> expected;
        for (const auto& t : u.tokens) {
            if (t.kind != TokenKind::Punctuation) expected.push_back(t.text);
        }
        EXPECT_EQ(texts(serialize_inorder(u.root, u.tokens)), expected) << name;
    }
}

TEST(Normalize, MsgSenderExample) {
    const std::vector<std::string> expected = {"uint", "ID", "=", "ID", "msg.sender"};
    EXPECT_EQ(normalized("uint amount = userBalance[msg.sender];"), expected);
    EXPECT_EQ(normalized("uint a = b[msg.sender];"), expected);
}

TEST(Normalize, Empty) { EXPECT_TRUE(normalized("").empty()); }

TEST(Normalize, Roles) {
    const auto seq = normalized(
        "contract Bank { event Paid(uint v); modifier only() { _; } "
        "function pay(uint v) public only { emit Paid(v); pay(2); tx.origin; } }");
    const std::vector<std::string> expected = {
        "contract", "TYPE", "event", "EVT", "uint", "ID", "modifier", "MOD", "ID", "function", "FUNC", "uint", "ID",
        "public", "MOD", "emit", "EVT", "ID", "FUNC", "NUM", "tx.origin"};
    EXPECT_EQ(seq, expected);
}

// Property: no punctuation, no raw identifiers.
TEST(Normalize, AlphabetOnFixtures) {
    for (const auto& name : kFixtures) {
        auto u = parse_source(testsupport::read_sol(name));
        std::set<std::string> identifiers;
        for (const auto& t : u.tokens) {
            if (t.kind == TokenKind::Identifier) identifiers.insert(t.text);
        }
        for (const auto& lex : normalize_unit(u).tokens) {
            EXPECT_FALSE(is_punctuation(lex)) << name << " " << lex;
            if (!is_placeholder(lex)) { EXPECT_FALSE(identifiers.contains(lex)) << name << " " << lex; }
        }
    }
}

// Property: consistent identifier renaming plus literal rewrites leave the sequence unchanged.
TEST(Normalize, RenameAndLiteralInvariance) {
    std::mt19937_64 rng(1234);
    for (const auto& name : kFixtures) {
        const auto src = testsupport::read_sol(name);
        const auto base = normalized(src);
        for (int round = 0; round < 20; ++round) {
            const auto rewritten = testsupport::rewrite_source(src, rng);
            ASSERT_NE(rewritten, src);
            EXPECT_EQ(normalized(rewritten), base) << name << "\n" << rewritten;
        }
    }
}

// Property: writing each identifier as its placeholder and normalizing again is a fixed point.
TEST(Normalize, PlaceholderSourceIsFixedPoint) {
    for (const auto& name : kFixtures) {
        const auto src = testsupport::read_sol(name);
        auto u = parse_source(src);
        const auto roles = collect_roles(u.root);
        std::string printed;
        std::size_t pos = 0;
        for (const auto& t : u.tokens) {
            if (t.kind != TokenKind::Identifier) continue;
            printed.append(src, pos, t.offset - pos);
            printed += std::string(roles.role_of(t.text));
            pos = t.offset + t.length;
        }
        printed.append(src, pos);
        const auto first = normalize_unit(u).tokens;
        const auto second = normalized(printed);
        EXPECT_EQ(first.size(), second.size()) << name;
        auto a = first, b = second;
        std::sort(a.begin(), a.end());
        std::sort(b.begin(), b.end());
        EXPECT_EQ(a, b) << name;
    }
}
