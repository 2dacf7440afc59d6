#pragma once

#include <cctype>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "clineage/ast.hpp"
#include "clineage/error.hpp"
#include "clineage/lexer.hpp"
#include "clineage/token.hpp"

namespace clineage::sol {

struct ParseResult {
    AstNode root;
    std::size_t recoveries = 0;
};

namespace detail {

struct ParseFailure {
    std::size_t at;
};

class Parser {
public:
    explicit Parser(std::span<const Token> toks) : toks_(toks) {}

    ParseResult run() {
        check_braces();
        ParseResult result;
        AstNode unit;
        unit.kind = NodeKind::SourceUnit;
        unit.span = {0, toks_.empty() ? 0 : toks_.size() - 1};
        while (!eof()) {
            const std::size_t start = pos_;
            try {
                if (at_contract_start()) {
                    unit.children.push_back(parse_contract());
                    continue;
                }
                throw ParseFailure{pos_};
            } catch (const ParseFailure&) {
                pos_ = start;
                unit.children.push_back(recover(start));
            }
        }
        result.root = std::move(unit);
        result.recoveries = recoveries_;
        return result;
    }

private:
    std::span<const Token> toks_;
    std::size_t pos_ = 0;
    std::size_t recoveries_ = 0;
    std::size_t depth_ = 0;
    std::string contract_name_;

    static constexpr std::size_t kMaxDepth = 400;

    bool eof() const { return pos_ >= toks_.size(); }

    const Token& peek(std::size_t ahead = 0) const {
        static const Token sentinel{TokenKind::Punctuation, "<eof>"};
        return pos_ + ahead < toks_.size() ? toks_[pos_ + ahead] : sentinel;
    }

    [[noreturn]] void fail() const { throw ParseFailure{pos_}; }

    const Token& take() {
        if (eof()) fail();
        return toks_[pos_++];
    }

    void expect_punct(std::string_view p) {
        if (!peek().is_punct(p)) fail();
        ++pos_;
    }

    void expect_op(std::string_view p) {
        if (!peek().is_op(p)) fail();
        ++pos_;
    }

    bool accept_punct(std::string_view p) {
        if (!peek().is_punct(p)) return false;
        ++pos_;
        return true;
    }

    bool accept_keyword(std::string_view k) {
        if (!peek().is_keyword(k)) return false;
        ++pos_;
        return true;
    }

    bool is_name_token(const Token& t) const {
        return t.kind == TokenKind::Identifier || t.kind == TokenKind::Builtin;
    }

    std::string take_name() {
        if (!is_name_token(peek())) fail();
        return take().text;
    }

    AstNode make(NodeKind kind, std::size_t first) const {
        AstNode n;
        n.kind = kind;
        n.span = {first, pos_ == 0 ? 0 : pos_ - 1};
        return n;
    }

    void close(AstNode& n) const { n.span.last = pos_ == 0 ? 0 : pos_ - 1; }

    void check_braces() const {
        long depth = 0;
        for (const auto& t : toks_) {
            if (t.is_punct("{")) ++depth;
            else if (t.is_punct("}") && depth > 0) --depth;
        }
        if (depth > 0) {
            throw Error(ErrorCode::ParseFatal, std::to_string(depth) + " unclosed '{' at end of input");
        }
    }

    /// Panic mode: skip to the next ';' at brace depth 0, or through the '}'
    /// matching a '{' opened inside the region. A '}' closing an enclosing
    /// scope is left for the caller.
    AstNode recover(std::size_t start) {
        ++recoveries_;
        long depth = 0;
        pos_ = start;
        while (!eof()) {
            const Token& t = peek();
            if (t.is_punct("{")) {
                ++depth;
            } else if (t.is_punct("}")) {
                if (depth == 0) {
                    if (pos_ == start) ++pos_;
                    break;
                }
                --depth;
                if (depth == 0) {
                    ++pos_;
                    break;
                }
            } else if (t.is_punct(";") && depth == 0) {
                ++pos_;
                break;
            }
            ++pos_;
        }
        AstNode n = make(NodeKind::ExprStmt, start);
        n.attrs.opaque = true;
        return n;
    }

    bool at_contract_start() const {
        const Token& t = peek();
        if (t.is_keyword("abstract") && peek(1).is_keyword("contract")) return true;
        return t.is_keyword("contract") || t.is_keyword("library") || t.is_keyword("interface");
    }

    // ---- declarations -------------------------------------------------

    AstNode parse_contract() {
        const std::size_t first = pos_;
        accept_keyword("abstract");
        AstNode c = make(NodeKind::ContractDef, first);
        c.attrs.contract_kind = take().text;
        c.attrs.name = take_name();
        contract_name_ = c.attrs.name;
        if (accept_keyword("is")) {
            do {
                std::string base = take_name();
                while (peek().is_op(".")) {
                    ++pos_;
                    base += "." + take_name();
                }
                if (peek().is_punct("(")) skip_balanced("(", ")");
                c.attrs.bases.push_back(std::move(base));
            } while (accept_punct(","));
        }
        expect_punct("{");
        while (!peek().is_punct("}")) {
            if (eof()) fail();
            const std::size_t start = pos_;
            try {
                c.children.push_back(parse_member());
            } catch (const ParseFailure&) {
                c.children.push_back(recover(start));
            }
        }
        expect_punct("}");
        close(c);
        return c;
    }

    void skip_balanced(std::string_view open, std::string_view closer) {
        expect_punct(open);
        long depth = 1;
        while (depth > 0) {
            const Token& t = take();
            if (t.is_punct(open)) ++depth;
            else if (t.is_punct(closer)) --depth;
        }
    }

    AstNode parse_member() {
        const Token& t = peek();
        if (t.is_keyword("function")) return parse_function(false);
        if (t.is_keyword("constructor")) return parse_function(true);
        if (t.is_keyword("modifier")) return parse_modifier();
        if (t.is_keyword("event")) return parse_event();
        if (t.is_keyword("struct")) return parse_struct();
        if (t.is_keyword("enum")) return parse_enum();
        if (t.is_keyword("using")) return parse_using();
        return parse_state_var();
    }

    std::vector<Param> parse_params() {
        std::vector<Param> out;
        expect_punct("(");
        if (accept_punct(")")) return out;
        do {
            Param p;
            p.type = parse_type();
            while (peek().is_keyword("indexed") || peek().is_keyword("memory") ||
                   peek().is_keyword("storage") || peek().is_keyword("calldata")) {
                ++pos_;
            }
            if (is_name_token(peek())) p.name = take().text;
            out.push_back(std::move(p));
        } while (accept_punct(","));
        expect_punct(")");
        return out;
    }

    AstNode parse_function(bool constructor_kw) {
        const std::size_t first = pos_;
        ++pos_;
        AstNode f = make(NodeKind::FunctionDef, first);
        if (constructor_kw) {
            f.attrs.is_constructor = true;
        } else if (is_name_token(peek())) {
            f.attrs.name = take().text;
            f.attrs.is_constructor = f.attrs.name == contract_name_;
        }
        f.attrs.params = parse_params();
        while (true) {
            const Token& t = peek();
            if (t.is_keyword("public") || t.is_keyword("external") || t.is_keyword("internal") ||
                t.is_keyword("private")) {
                f.attrs.visibility = take().text;
            } else if (t.is_keyword("pure") || t.is_keyword("view") || t.is_keyword("constant")) {
                f.attrs.mutability = take().text;
            } else if (t.is_keyword("payable")) {
                ++pos_;
                f.attrs.payable = true;
                f.attrs.mutability = "payable";
            } else if (t.is_keyword("returns")) {
                ++pos_;
                f.attrs.returns = parse_params();
            } else if (is_name_token(t)) {
                f.attrs.modifiers.push_back(take().text);
                if (peek().is_punct("(")) skip_balanced("(", ")");
            } else {
                break;
            }
        }
        if (!accept_punct(";")) {
            f.children.push_back(parse_block());
            f.attrs.has_body = true;
            f.attrs.body = 0;
        }
        close(f);
        return f;
    }

    AstNode parse_modifier() {
        const std::size_t first = pos_;
        ++pos_;
        AstNode m = make(NodeKind::ModifierDef, first);
        m.attrs.name = take_name();
        if (peek().is_punct("(")) m.attrs.params = parse_params();
        m.children.push_back(parse_block());
        m.attrs.has_body = true;
        m.attrs.body = 0;
        close(m);
        return m;
    }

    AstNode parse_event() {
        const std::size_t first = pos_;
        ++pos_;
        AstNode e = make(NodeKind::EventDef, first);
        e.attrs.name = take_name();
        e.attrs.params = parse_params();
        accept_keyword("anonymous");
        expect_punct(";");
        close(e);
        return e;
    }

    AstNode parse_struct() {
        const std::size_t first = pos_;
        ++pos_;
        AstNode s = make(NodeKind::StructDef, first);
        s.attrs.name = take_name();
        expect_punct("{");
        while (!accept_punct("}")) {
            Param field;
            field.type = parse_type();
            field.name = take_name();
            expect_punct(";");
            s.attrs.members.push_back(field.name);
            s.attrs.params.push_back(std::move(field));
        }
        close(s);
        return s;
    }

    AstNode parse_enum() {
        const std::size_t first = pos_;
        ++pos_;
        AstNode e = make(NodeKind::EnumDef, first);
        e.attrs.name = take_name();
        expect_punct("{");
        if (!peek().is_punct("}")) {
            do {
                e.attrs.members.push_back(take_name());
            } while (accept_punct(","));
        }
        expect_punct("}");
        close(e);
        return e;
    }

    AstNode parse_using() {
        const std::size_t first = pos_;
        ++pos_;
        AstNode u = make(NodeKind::UsingFor, first);
        u.attrs.name = take_name();
        if (!peek().is_keyword("for")) fail();
        ++pos_;
        if (peek().is_op("*")) {
            ++pos_;
            u.attrs.type = "*";
        } else {
            u.attrs.type = parse_type();
        }
        expect_punct(";");
        close(u);
        return u;
    }

    AstNode parse_state_var() {
        const std::size_t first = pos_;
        AstNode v = make(NodeKind::StateVarDecl, first);
        v.attrs.type = parse_type();
        while (true) {
            const Token& t = peek();
            if (t.is_keyword("public") || t.is_keyword("private") || t.is_keyword("internal")) {
                v.attrs.visibility = take().text;
            } else if (t.is_keyword("constant")) {
                v.attrs.mutability = take().text;
            } else if (t.kind == TokenKind::Identifier && t.text == "immutable") {
                v.attrs.mutability = take().text;
            } else {
                break;
            }
        }
        v.attrs.name = take_name();
        if (peek().is_op("=")) {
            ++pos_;
            v.children.push_back(parse_expression());
        }
        expect_punct(";");
        close(v);
        return v;
    }

    /// Type names are returned as compact text, e.g. "mapping(address=>uint256)".
    std::string parse_type() {
        std::string out;
        const Token& t = peek();
        if (t.is_keyword("mapping")) {
            ++pos_;
            expect_punct("(");
            out = "mapping(" + parse_type();
            expect_op("=>");
            out += "=>" + parse_type();
            expect_punct(")");
            out += ")";
        } else if (t.kind == TokenKind::Keyword && is_elementary_type(t.text)) {
            out = take().text;
            if (out == "address" && peek().is_keyword("payable")) {
                ++pos_;
                out += " payable";
            }
        } else if (t.kind == TokenKind::Identifier) {
            out = take().text;
            while (peek().is_op(".") && peek(1).kind == TokenKind::Identifier) {
                pos_ += 1;
                out += "." + take().text;
            }
        } else {
            fail();
        }
        while (peek().is_punct("[")) {
            ++pos_;
            out += "[";
            while (!peek().is_punct("]")) {
                if (eof()) fail();
                out += take().text;
            }
            ++pos_;
            out += "]";
        }
        return out;
    }

    // ---- statements ---------------------------------------------------

    AstNode parse_block() {
        const std::size_t first = pos_;
        expect_punct("{");
        AstNode b = make(NodeKind::Block, first);
        while (!peek().is_punct("}")) {
            if (eof()) fail();
            const std::size_t start = pos_;
            try {
                b.children.push_back(parse_statement());
            } catch (const ParseFailure&) {
                b.children.push_back(recover(start));
            }
        }
        ++pos_;
        close(b);
        return b;
    }

    AstNode parse_statement() {
        const Token& t = peek();
        const std::size_t first = pos_;
        if (t.is_punct("{")) return parse_block();
        if (t.is_keyword("if")) {
            ++pos_;
            AstNode s = make(NodeKind::IfStmt, first);
            expect_punct("(");
            s.children.push_back(parse_expression());
            s.attrs.cond = 0;
            expect_punct(")");
            s.children.push_back(parse_statement());
            s.attrs.body = 1;
            if (accept_keyword("else")) s.children.push_back(parse_statement());
            close(s);
            return s;
        }
        if (t.is_keyword("for")) return parse_for();
        if (t.is_keyword("while")) {
            ++pos_;
            AstNode s = make(NodeKind::WhileStmt, first);
            expect_punct("(");
            s.children.push_back(parse_expression());
            s.attrs.cond = 0;
            expect_punct(")");
            s.children.push_back(parse_statement());
            s.attrs.body = 1;
            close(s);
            return s;
        }
        if (t.is_keyword("do")) {
            ++pos_;
            AstNode s = make(NodeKind::WhileStmt, first);
            s.attrs.do_while = true;
            s.children.push_back(parse_statement());
            s.attrs.body = 0;
            if (!accept_keyword("while")) fail();
            expect_punct("(");
            s.children.push_back(parse_expression());
            s.attrs.cond = 1;
            expect_punct(")");
            expect_punct(";");
            close(s);
            return s;
        }
        if (t.is_keyword("return")) {
            ++pos_;
            AstNode s = make(NodeKind::ReturnStmt, first);
            if (!peek().is_punct(";")) s.children.push_back(parse_expression());
            expect_punct(";");
            close(s);
            return s;
        }
        if (t.is_keyword("emit")) {
            ++pos_;
            AstNode s = make(NodeKind::EmitStmt, first);
            AstNode call = parse_expression();
            if (call.kind != NodeKind::Call) fail();
            s.children.push_back(std::move(call));
            expect_punct(";");
            close(s);
            return s;
        }
        if (t.is_keyword("throw") || t.is_keyword("break") || t.is_keyword("continue")) {
            ++pos_;
            AstNode s = make(NodeKind::ExprStmt, first);
            s.attrs.op = t.text;
            expect_punct(";");
            close(s);
            return s;
        }
        if (t.is_keyword("assembly")) fail();

        if (auto decl = try_local_decl()) return std::move(*decl);

        AstNode s = make(NodeKind::ExprStmt, first);
        s.children.push_back(parse_expression());
        expect_punct(";");
        close(s);
        return s;
    }

    AstNode parse_for() {
        const std::size_t first = pos_;
        ++pos_;
        AstNode s = make(NodeKind::ForStmt, first);
        expect_punct("(");
        if (!accept_punct(";")) {
            if (auto decl = try_local_decl()) {
                s.children.push_back(std::move(*decl));
            } else {
                const std::size_t at = pos_;
                AstNode init = make(NodeKind::ExprStmt, at);
                init.children.push_back(parse_expression());
                expect_punct(";");
                close(init);
                s.children.push_back(std::move(init));
            }
            s.attrs.init = static_cast<int>(s.children.size()) - 1;
        }
        if (!accept_punct(";")) {
            s.children.push_back(parse_expression());
            s.attrs.cond = static_cast<int>(s.children.size()) - 1;
            expect_punct(";");
        }
        if (!accept_punct(")")) {
            s.children.push_back(parse_expression());
            s.attrs.post = static_cast<int>(s.children.size()) - 1;
            expect_punct(")");
        }
        s.children.push_back(parse_statement());
        s.attrs.body = static_cast<int>(s.children.size()) - 1;
        close(s);
        return s;
    }

    /// Backtracking attempt at `Type [location] name [= expr];`.
    std::optional<AstNode> try_local_decl() {
        const std::size_t first = pos_;
        const Token& t = peek();
        const bool type_like = t.is_keyword("mapping") || t.kind == TokenKind::Identifier ||
                               (t.kind == TokenKind::Keyword && is_elementary_type(t.text));
        if (!type_like) return std::nullopt;
        AstNode d;
        try {
            d = make(NodeKind::LocalVarDecl, first);
            d.attrs.type = parse_type();
            while (peek().is_keyword("memory") || peek().is_keyword("storage") || peek().is_keyword("calldata")) {
                ++pos_;
            }
            if (!is_name_token(peek())) fail();
            d.attrs.name = take().text;
            if (!peek().is_op("=") && !peek().is_punct(";")) fail();
        } catch (const ParseFailure&) {
            pos_ = first;
            return std::nullopt;
        }
        if (peek().is_op("=")) {
            ++pos_;
            d.children.push_back(parse_expression());
        }
        expect_punct(";");
        close(d);
        return d;
    }

    // ---- expressions --------------------------------------------------

    struct DepthGuard {
        std::size_t& depth;
        explicit DepthGuard(std::size_t& d, const Parser& p) : depth(d) {
            if (++depth > kMaxDepth) {
                --depth;
                p.fail();
            }
        }
        ~DepthGuard() { --depth; }
    };

    static bool is_assign_op(const Token& t) {
        static constexpr std::string_view ops[] = {"=", "+=", "-=", "*=", "/=", "%=", "|=",
                                                   "&=", "^=", "<<=", ">>=", ">>>="};
        if (t.kind != TokenKind::Operator) return false;
        for (auto op : ops) {
            if (t.text == op) return true;
        }
        return false;
    }

    static int binary_precedence(const Token& t) {
        if (t.kind != TokenKind::Operator) return -1;
        const std::string& o = t.text;
        if (o == "||") return 1;
        if (o == "&&") return 2;
        if (o == "|") return 3;
        if (o == "^") return 4;
        if (o == "&") return 5;
        if (o == "==" || o == "!=") return 6;
        if (o == "<" || o == ">" || o == "<=" || o == ">=") return 7;
        if (o == "<<" || o == ">>" || o == ">>>") return 8;
        if (o == "+" || o == "-") return 9;
        if (o == "*" || o == "/" || o == "%") return 10;
        if (o == "**") return 11;
        return -1;
    }

    AstNode parse_expression() {
        DepthGuard guard(depth_, *this);
        const std::size_t first = pos_;
        AstNode lhs = parse_ternary();
        if (is_assign_op(peek())) {
            AstNode a = make(NodeKind::Assign, first);
            a.attrs.op = take().text;
            a.children.push_back(std::move(lhs));
            a.children.push_back(parse_expression());
            close(a);
            return a;
        }
        return lhs;
    }

    AstNode parse_ternary() {
        const std::size_t first = pos_;
        AstNode cond = parse_binary(1);
        if (!peek().is_op("?")) return cond;
        ++pos_;
        AstNode t = make(NodeKind::BinaryOp, first);
        t.attrs.op = "?:";
        t.children.push_back(std::move(cond));
        t.children.push_back(parse_expression());
        expect_op(":");
        t.children.push_back(parse_expression());
        close(t);
        return t;
    }

    AstNode parse_binary(int min_prec) {
        DepthGuard guard(depth_, *this);
        const std::size_t first = pos_;
        AstNode lhs = parse_unary();
        while (true) {
            int prec = binary_precedence(peek());
            if (prec < min_prec) break;
            AstNode b = make(NodeKind::BinaryOp, first);
            b.attrs.op = take().text;
            // ** is right-associative
            AstNode rhs = parse_binary(b.attrs.op == "**" ? prec : prec + 1);
            b.children.push_back(std::move(lhs));
            b.children.push_back(std::move(rhs));
            close(b);
            lhs = std::move(b);
        }
        return lhs;
    }

    AstNode parse_unary() {
        DepthGuard guard(depth_, *this);
        const std::size_t first = pos_;
        const Token& t = peek();
        if ((t.kind == TokenKind::Operator &&
             (t.text == "!" || t.text == "~" || t.text == "-" || t.text == "+" || t.text == "++" || t.text == "--")) ||
            t.is_keyword("delete")) {
            AstNode u = make(NodeKind::UnaryOp, first);
            u.attrs.op = take().text;
            u.children.push_back(parse_unary());
            close(u);
            return u;
        }
        return parse_postfix();
    }

    AstNode parse_postfix() {
        const std::size_t first = pos_;
        AstNode e = parse_primary();
        while (true) {
            const Token& t = peek();
            if (t.is_op(".")) {
                ++pos_;
                const Token& m = peek();
                if (m.kind != TokenKind::Identifier && m.kind != TokenKind::Builtin && m.kind != TokenKind::Keyword) fail();
                AstNode ma = make(NodeKind::MemberAccess, first);
                ma.attrs.name = take().text;
                ma.children.push_back(std::move(e));
                close(ma);
                e = std::move(ma);
            } else if (t.is_punct("[")) {
                ++pos_;
                AstNode ix = make(NodeKind::Index, first);
                ix.children.push_back(std::move(e));
                if (!peek().is_punct("]")) ix.children.push_back(parse_expression());
                expect_punct("]");
                close(ix);
                e = std::move(ix);
            } else if (t.is_punct("(")) {
                ++pos_;
                AstNode call = make(NodeKind::Call, first);
                call.children.push_back(std::move(e));
                if (peek().is_punct("{")) fail();  // named arguments are outside the subset
                if (!peek().is_punct(")")) {
                    do {
                        call.children.push_back(parse_expression());
                    } while (accept_punct(","));
                }
                expect_punct(")");
                close(call);
                e = std::move(call);
            } else if (t.is_op("++") || t.is_op("--")) {
                AstNode u = make(NodeKind::UnaryOp, first);
                u.attrs.op = take().text;
                u.attrs.postfix = true;
                u.children.push_back(std::move(e));
                close(u);
                e = std::move(u);
            } else {
                break;
            }
        }
        return e;
    }

    /// Denominations are keywords; a capitalized spelling such as `1 Ether`
    /// is tolerated as well.
    static bool is_denomination_token(const Token& t) {
        if (t.kind == TokenKind::Keyword) return is_denomination(t.text);
        if (t.kind != TokenKind::Identifier || t.text.empty()) return false;
        std::string lower = t.text;
        for (auto& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        return lower != t.text && is_denomination(lower);
    }

    AstNode parse_primary() {
        const std::size_t first = pos_;
        const Token& t = peek();
        if (t.is_literal()) {
            AstNode lit = make(NodeKind::Literal, first);
            lit.attrs.name = t.text;
            lit.attrs.op = std::string(to_string(t.kind));
            ++pos_;
            if (t.kind == TokenKind::NumberLiteral && is_denomination_token(peek())) ++pos_;
            close(lit);
            return lit;
        }
        if (t.kind == TokenKind::Identifier || t.kind == TokenKind::Builtin ||
            (t.kind == TokenKind::Keyword && is_elementary_type(t.text))) {
            AstNode id = make(NodeKind::IdentifierRef, first);
            id.attrs.name = take().text;
            if (id.attrs.name == "address" && peek().is_keyword("payable")) ++pos_;
            close(id);
            return id;
        }
        if (t.is_keyword("new")) {
            ++pos_;
            AstNode u = make(NodeKind::UnaryOp, first);
            u.attrs.op = "new";
            const std::size_t type_start = pos_;
            AstNode ty = make(NodeKind::IdentifierRef, type_start);
            ty.attrs.name = parse_type();
            close(ty);
            u.children.push_back(std::move(ty));
            close(u);
            return u;
        }
        if (t.is_punct("(")) {
            ++pos_;
            AstNode inner = parse_expression();
            if (!peek().is_punct(")")) fail();  // tuples are outside the subset
            ++pos_;
            return inner;
        }
        fail();
    }
};

} // namespace detail

/// Builds the AST for a token list. Regions outside the supported grammar
/// become opaque ExprStmt nodes and are counted in `recoveries`; only an
/// unclosed '{' at end of input is fatal.
inline ParseResult parse(std::span<const Token> tokens) { return detail::Parser(tokens).run(); }

/// Tokens plus their AST, the unit the normalizer and detectors work on.
struct ParsedUnit {
    std::string source;
    std::vector<Token> tokens;
    AstNode root;
    std::size_t recoveries = 0;
};

inline ParsedUnit parse_source(std::string source) {
    ParsedUnit u;
    u.tokens = tokenize(source);
    auto r = parse(u.tokens);
    u.root = std::move(r.root);
    u.recoveries = r.recoveries;
    u.source = std::move(source);
    return u;
}

} // namespace clineage::sol
