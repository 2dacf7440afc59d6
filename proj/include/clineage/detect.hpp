#pragma once

#include <algorithm>
#include <array>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "clineage/address.hpp"
#include "clineage/ast.hpp"
#include "clineage/lineage.hpp"
#include "clineage/parser.hpp"

namespace clineage::detect {

using sol::AstNode;
using sol::NodeKind;
using sol::ParsedUnit;

enum class Detector { UnmatchedERC20, LimitsOfPermission, UncheckedExternalCall, NestedCall };

inline constexpr std::array kDetectors = {Detector::UnmatchedERC20, Detector::LimitsOfPermission,
                                          Detector::UncheckedExternalCall, Detector::NestedCall};

inline std::string_view to_string(Detector d) {
    switch (d) {
    case Detector::UnmatchedERC20: return "UnmatchedERC20";
    case Detector::LimitsOfPermission: return "LimitsOfPermission";
    case Detector::UncheckedExternalCall: return "UncheckedExternalCall";
    case Detector::NestedCall: return "NestedCall";
    }
    return "?";
}

inline std::optional<Detector> detector_from_string(std::string_view s) {
    for (auto d : kDetectors) {
        if (to_string(d) == s) return d;
    }
    return std::nullopt;
}

struct Finding {
    Address contract;
    Detector detector = Detector::UnmatchedERC20;
    std::uint32_t line = 1;
    std::string snippet;
    std::string message;
    std::string subtype;

    friend bool operator==(const Finding&, const Finding&) = default;
};

namespace detail {

class Context {
public:
    Context(const ParsedUnit& unit, Address contract) : unit_(unit), contract_(std::move(contract)) {
        std::size_t pos = 0;
        const std::string_view src = unit.source;
        while (pos <= src.size()) {
            auto nl = src.find('\n', pos);
            if (nl == std::string_view::npos) nl = src.size();
            lines_.push_back(src.substr(pos, nl - pos));
            pos = nl + 1;
        }
    }

    std::uint32_t line_of(const AstNode& n) const {
        if (unit_.tokens.empty()) return 1;
        return unit_.tokens[std::min(n.span.first, unit_.tokens.size() - 1)].line;
    }

    Finding make(Detector d, const AstNode& at, std::string message, std::string subtype = {}) const {
        const auto line = line_of(at);
        std::string_view text = line - 1 < lines_.size() ? lines_[line - 1] : std::string_view{};
        const auto b = text.find_first_not_of(" \t\r");
        const auto e = text.find_last_not_of(" \t\r");
        std::string snippet = b == std::string_view::npos ? std::string{} : std::string(text.substr(b, e - b + 1));
        return {contract_, d, line, std::move(snippet), std::move(message), std::move(subtype)};
    }

    const AstNode& root() const { return unit_.root; }

private:
    const ParsedUnit& unit_;
    Address contract_;
    std::vector<std::string_view> lines_;
};

inline std::vector<const AstNode*> contracts(const AstNode& root) {
    std::vector<const AstNode*> out;
    for (const auto& c : root.children) {
        if (c.kind == NodeKind::ContractDef) out.push_back(&c);
    }
    return out;
}

inline bool is_ident(const AstNode& n, std::string_view name) {
    return n.kind == NodeKind::IdentifierRef && n.attrs.name == name;
}

/// `head.member`, e.g. msg.sender.
inline bool is_builtin_pair(const AstNode& n, std::string_view head, std::string_view member) {
    return n.kind == NodeKind::MemberAccess && n.attrs.name == member && is_ident(n.children[0], head);
}

inline bool references(const AstNode& n, std::string_view head, std::string_view member) {
    return sol::any_of_subtree(n, [&](const AstNode& x) { return is_builtin_pair(x, head, member); });
}

/// Strips `.value(..)` / `.gas(..)` option calls and returns the member
/// access naming the actual call, e.g. `a.call` in `a.call.value(1)(d)`.
inline const AstNode* call_target(const AstNode& call) {
    const AstNode* e = &call.children[0];
    while (true) {
        if (e->kind == NodeKind::Call) {
            e = &e->children[0];
        } else if (e->kind == NodeKind::MemberAccess && (e->attrs.name == "value" || e->attrs.name == "gas") &&
                   (e->children[0].kind == NodeKind::MemberAccess || e->children[0].kind == NodeKind::Call)) {
            e = &e->children[0];
        } else {
            return e;
        }
    }
}

inline std::string_view call_member(const AstNode& call) {
    const AstNode* t = call_target(call);
    return t->kind == NodeKind::MemberAccess ? std::string_view(t->attrs.name) : std::string_view{};
}

inline std::size_t arg_count(const AstNode& call) { return call.children.size() - 1; }

/// A bare function type without data location or payable marker, with
/// uint/int spelled in full.
inline std::string canonical_type(std::string t) {
    if (t == "uint") return "uint256";
    if (t == "int") return "int256";
    if (t == "address payable") return "address";
    return t;
}

} // namespace detail

// ---- UnmatchedERC20 ------------------------------------------------------

struct Erc20Signature {
    std::string_view name;
    std::vector<std::string_view> params;
    std::string_view returns;
};

inline const std::vector<Erc20Signature>& erc20_surface() {
    static const std::vector<Erc20Signature> s = {
        {"totalSupply", {}, "uint256"},
        {"balanceOf", {"address"}, "uint256"},
        {"transfer", {"address", "uint256"}, "bool"},
        {"transferFrom", {"address", "address", "uint256"}, "bool"},
        {"approve", {"address", "uint256"}, "bool"},
        {"allowance", {"address", "address"}, "uint256"},
    };
    return s;
}

inline constexpr std::size_t kTokenGate = 3;

namespace detail {

struct Surface {
    const AstNode* node;
    std::vector<std::string> params;
    std::vector<std::string> returns;
};

/// Public state variables expose a getter: mapping keys become parameters.
inline Surface getter_surface(const AstNode& var) {
    Surface s{&var, {}, {}};
    std::string t = var.attrs.type;
    while (t.rfind("mapping(", 0) == 0) {
        // mapping(K=>V): K never contains "=>" in the subset
        const auto arrow = t.find("=>");
        s.params.push_back(canonical_type(t.substr(8, arrow - 8)));
        t = t.substr(arrow + 2, t.size() - arrow - 3);
    }
    s.returns.push_back(canonical_type(t));
    return s;
}

inline std::vector<std::string> param_types(const std::vector<sol::Param>& ps) {
    std::vector<std::string> out;
    for (const auto& p : ps) out.push_back(canonical_type(p.type));
    return out;
}

} // namespace detail

inline std::vector<Finding> detect_unmatched_erc20(const ParsedUnit& unit, const Address& contract = {}) {
    detail::Context ctx(unit, contract);
    std::vector<Finding> out;
    for (const AstNode* c : detail::contracts(unit.root)) {
        std::map<std::string, std::vector<detail::Surface>> decls;
        for (const auto& m : c->children) {
            if (m.kind == NodeKind::FunctionDef && !m.attrs.is_constructor && !m.attrs.name.empty()) {
                decls[m.attrs.name].push_back({&m, detail::param_types(m.attrs.params), detail::param_types(m.attrs.returns)});
            } else if (m.kind == NodeKind::StateVarDecl && m.attrs.visibility == "public") {
                decls[m.attrs.name].push_back(detail::getter_surface(m));
            }
        }
        std::size_t named = 0;
        for (const auto& sig : erc20_surface()) named += decls.contains(std::string(sig.name));
        if (named < kTokenGate) continue;

        for (const auto& sig : erc20_surface()) {
            const std::string name(sig.name);
            auto it = decls.find(name);
            if (it == decls.end()) {
                out.push_back(ctx.make(Detector::UnmatchedERC20, *c, "ERC20 function " + name + " is missing", "missing-function"));
                continue;
            }
            const std::vector<std::string> want_params(sig.params.begin(), sig.params.end());
            const detail::Surface* match = nullptr;
            for (const auto& s : it->second) {
                if (s.params == want_params) {
                    match = &s;
                    break;
                }
            }
            if (!match) {
                const auto& s = it->second.front();
                out.push_back(ctx.make(Detector::UnmatchedERC20, *s.node,
                                       name + " parameters do not match the ERC20 signature", "signature-mismatch"));
                continue;
            }
            if (match->returns.empty() && sig.returns == "bool") {
                out.push_back(ctx.make(Detector::UnmatchedERC20, *match->node, name + " does not return a boolean value",
                                       "missing-bool-return"));
            } else if (match->returns.size() != 1 || match->returns.front() != sig.returns) {
                out.push_back(ctx.make(Detector::UnmatchedERC20, *match->node,
                                       name + " should return " + std::string(sig.returns), "wrong-return-type"));
            }
        }
    }
    return out;
}

// ---- LimitsOfPermission --------------------------------------------------

namespace detail {

inline bool is_sensitive_op(const AstNode& n) {
    if (n.kind != NodeKind::Call) return false;
    const AstNode& callee = n.children[0];
    if (is_ident(callee, "selfdestruct") || is_ident(callee, "suicide")) return true;
    if (callee.kind == NodeKind::MemberAccess && (callee.attrs.name == "transfer" || callee.attrs.name == "send")) {
        return arg_count(n) == 1;
    }
    // a.call.value(v)(...) : the outer call's callee is the value() call
    if (callee.kind == NodeKind::Call) {
        const AstNode& opt = callee.children[0];
        return opt.kind == NodeKind::MemberAccess && opt.attrs.name == "value" &&
               opt.children[0].kind == NodeKind::MemberAccess && opt.children[0].attrs.name == "call";
    }
    return false;
}

/// Conditions that act as guards: require/assert arguments and if conditions.
template <class Visit>
void for_each_guard_condition(const AstNode& body, Visit&& visit) {
    sol::walk(body, [&](const AstNode& n) {
        if (n.kind == NodeKind::Call && (is_ident(n.children[0], "require") || is_ident(n.children[0], "assert"))) {
            for (std::size_t i = 1; i < n.children.size(); ++i) visit(n.children[i]);
        } else if (n.kind == NodeKind::IfStmt) {
            visit(n.children[0]);
        }
        return true;
    });
}

enum class Guard { None, TxOrigin, Sender };

inline Guard guard_in(const AstNode& body) {
    Guard g = Guard::None;
    for_each_guard_condition(body, [&](const AstNode& cond) {
        if (references(cond, "msg", "sender")) g = Guard::Sender;
        else if (g == Guard::None && references(cond, "tx", "origin")) g = Guard::TxOrigin;
    });
    return g;
}

} // namespace detail

inline std::vector<Finding> detect_permission(const ParsedUnit& unit, const Address& contract = {}) {
    detail::Context ctx(unit, contract);
    std::map<std::string, const AstNode*> modifiers;
    for (const AstNode* c : detail::contracts(unit.root)) {
        for (const auto& m : c->children) {
            if (m.kind == NodeKind::ModifierDef) modifiers.emplace(m.attrs.name, &m);
        }
    }
    std::vector<Finding> out;
    for (const AstNode* c : detail::contracts(unit.root)) {
        for (const auto& f : c->children) {
            if (f.kind != NodeKind::FunctionDef || !f.attrs.has_body || f.attrs.is_constructor) continue;
            const auto& vis = f.attrs.visibility;
            if (vis == "internal" || vis == "private") continue;
            const AstNode* op = nullptr;
            sol::walk(*f.slot(f.attrs.body), [&](const AstNode& n) {
                if (op) return false;
                if (detail::is_sensitive_op(n)) op = &n;
                return true;
            });
            if (!op) continue;

            detail::Guard g = detail::guard_in(*f.slot(f.attrs.body));
            for (const auto& name : f.attrs.modifiers) {
                auto it = modifiers.find(name);
                if (it == modifiers.end()) continue;
                const AstNode& mbody = *it->second;
                if (detail::references(mbody, "msg", "sender")) g = detail::Guard::Sender;
                else if (g == detail::Guard::None && detail::references(mbody, "tx", "origin")) g = detail::Guard::TxOrigin;
            }
            const std::string fname = f.attrs.name.empty() ? "fallback function" : "function " + f.attrs.name;
            if (g == detail::Guard::TxOrigin) {
                out.push_back(ctx.make(Detector::LimitsOfPermission, *op,
                                       fname + " guards a sensitive operation with tx.origin instead of msg.sender",
                                       "weak-guard-tx-origin"));
            } else if (g == detail::Guard::None) {
                out.push_back(ctx.make(Detector::LimitsOfPermission, *op,
                                       fname + " performs a sensitive operation without checking msg.sender",
                                       "missing-guard"));
            }
        }
    }
    return out;
}

// ---- UncheckedExternalCall -----------------------------------------------

inline std::vector<Finding> detect_unchecked_call(const ParsedUnit& unit, const Address& contract = {}) {
    detail::Context ctx(unit, contract);
    std::vector<Finding> out;
    sol::walk(unit.root, [&](const AstNode& n) {
        if (n.kind == NodeKind::ExprStmt && !n.children.empty() && n.children[0].kind == NodeKind::Call) {
            const auto member = detail::call_member(n.children[0]);
            if (member == "send" || member == "call" || member == "delegatecall") {
                out.push_back(ctx.make(Detector::UncheckedExternalCall, n,
                                       "return value of " + std::string(member) + " is not checked"));
            }
        }
        return true;
    });
    return out;
}

// ---- NestedCall ----------------------------------------------------------

namespace detail {

inline bool is_external_call(const AstNode& n) {
    if (n.kind != NodeKind::Call) return false;
    const auto member = call_member(n);
    if (member == "send" || member == "call" || member == "transfer" || member == "delegatecall") return true;
    const AstNode& callee = n.children[0];
    return callee.kind == NodeKind::MemberAccess && callee.children[0].kind == NodeKind::Index;
}

inline bool unbounded_condition(const AstNode& cond, const std::set<std::string>& names) {
    return sol::any_of_subtree(cond, [&](const AstNode& x) {
        if (x.kind == NodeKind::MemberAccess && x.attrs.name == "length") return true;
        return x.kind == NodeKind::IdentifierRef && names.contains(x.attrs.name);
    });
}

} // namespace detail

inline std::vector<Finding> detect_nested_call(const ParsedUnit& unit, const Address& contract = {}) {
    detail::Context ctx(unit, contract);
    std::vector<Finding> out;
    for (const AstNode* c : detail::contracts(unit.root)) {
        std::set<std::string> state;
        for (const auto& m : c->children) {
            if (m.kind == NodeKind::StateVarDecl) state.insert(m.attrs.name);
        }
        for (const auto& f : c->children) {
            if ((f.kind != NodeKind::FunctionDef && f.kind != NodeKind::ModifierDef) || !f.attrs.has_body) continue;
            std::set<std::string> names = state;
            for (const auto& p : f.attrs.params) {
                if (!p.name.empty()) names.insert(p.name);
            }
            sol::walk(f, [&](const AstNode& n) {
                if (n.kind != NodeKind::ForStmt && n.kind != NodeKind::WhileStmt) return true;
                const AstNode* cond = n.slot(n.attrs.cond);
                const AstNode* body = n.slot(n.attrs.body);
                if (cond && body && detail::unbounded_condition(*cond, names) &&
                    sol::any_of_subtree(*body, detail::is_external_call)) {
                    out.push_back(ctx.make(Detector::NestedCall, n,
                                           "loop with an external call has no constant iteration bound"));
                }
                return true;
            });
        }
    }
    return out;
}

// ---- aggregation -----------------------------------------------------------

inline void sort_findings(std::vector<Finding>& fs) {
    std::stable_sort(fs.begin(), fs.end(), [](const Finding& a, const Finding& b) {
        return std::tie(a.line, a.detector) < std::tie(b.line, b.detector);
    });
}

inline std::vector<Finding> run_all(const ParsedUnit& unit, const Address& contract = {}) {
    std::vector<Finding> out;
    for (auto* fn : {detect_unmatched_erc20, detect_permission, detect_unchecked_call, detect_nested_call}) {
        auto part = fn(unit, contract);
        out.insert(out.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
    }
    sort_findings(out);
    return out;
}

struct PairFindingDelta {
    lineage::UpgradePair pair;
    std::vector<Finding> fixed;
    std::vector<Finding> introduced;
    std::vector<Finding> persistent;
};

/// Multiset difference keyed by (detector, subtype). Lines are ignored since
/// upgrades shift code around.
inline PairFindingDelta pair_delta(std::span<const Finding> pred, std::span<const Finding> succ,
                                   lineage::UpgradePair pair = {}) {
    using Key = std::pair<Detector, std::string>;
    std::map<Key, std::vector<const Finding*>> p, s;
    for (const auto& f : pred) p[{f.detector, f.subtype}].push_back(&f);
    for (const auto& f : succ) s[{f.detector, f.subtype}].push_back(&f);
    PairFindingDelta d{std::move(pair), {}, {}, {}};
    for (const auto& [key, ps] : p) {
        const std::size_t keep = s.contains(key) ? std::min(ps.size(), s[key].size()) : 0;
        for (std::size_t i = 0; i < ps.size(); ++i) (i < keep ? d.persistent : d.fixed).push_back(*ps[i]);
    }
    for (const auto& [key, ss] : s) {
        const std::size_t skip = p.contains(key) ? std::min(ss.size(), p[key].size()) : 0;
        for (std::size_t i = skip; i < ss.size(); ++i) d.introduced.push_back(*ss[i]);
    }
    sort_findings(d.fixed);
    sort_findings(d.introduced);
    sort_findings(d.persistent);
    return d;
}

inline nlohmann::json to_json(const Finding& f) {
    return {{"contract", f.contract.str()},
            {"detector", to_string(f.detector)},
            {"subtype", f.subtype},
            {"line", f.line},
            {"snippet", f.snippet},
            {"message", f.message}};
}

inline Finding finding_from_json(const nlohmann::json& j) {
    Finding f;
    auto addr = Address::parse(j.at("contract").get<std::string>());
    auto det = detector_from_string(j.at("detector").get<std::string>());
    if (!addr || !det) throw Error(ErrorCode::SchemaViolation, "findings: bad contract or detector");
    f.contract = *addr;
    f.detector = *det;
    f.subtype = j.at("subtype").get<std::string>();
    f.line = j.at("line").get<std::uint32_t>();
    f.snippet = j.at("snippet").get<std::string>();
    f.message = j.at("message").get<std::string>();
    return f;
}

inline nlohmann::json to_json(std::span<const Finding> fs) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& f : fs) arr.push_back(to_json(f));
    return arr;
}

inline nlohmann::json to_json(const PairFindingDelta& d) {
    return {{"predecessor", d.pair.predecessor.str()},
            {"successor", d.pair.successor.str()},
            {"fixed", to_json(d.fixed)},
            {"introduced", to_json(d.introduced)},
            {"persistent", to_json(d.persistent)}};
}

inline PairFindingDelta delta_from_json(const nlohmann::json& j) {
    PairFindingDelta d;
    auto pred = Address::parse(j.at("predecessor").get<std::string>());
    auto succ = Address::parse(j.at("successor").get<std::string>());
    if (!pred || !succ) throw Error(ErrorCode::SchemaViolation, "deltas: bad address");
    d.pair.predecessor = *pred;
    d.pair.successor = *succ;
    for (const auto& f : j.at("fixed")) d.fixed.push_back(finding_from_json(f));
    for (const auto& f : j.at("introduced")) d.introduced.push_back(finding_from_json(f));
    for (const auto& f : j.at("persistent")) d.persistent.push_back(finding_from_json(f));
    return d;
}

/// `<address>:<line>: [<detector>] <message>`
inline std::string to_text(const Finding& f) {
    return f.contract.str() + ":" + std::to_string(f.line) + ": [" + std::string(to_string(f.detector)) + "] " + f.message;
}

} // namespace clineage::detect
