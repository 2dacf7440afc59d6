#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "clineage/address.hpp"
#include "clineage/error.hpp"
#include "clineage/hash.hpp"

namespace clineage::corpus {

enum class TxKind { Create, Call, Destruct };

inline std::string_view to_string(TxKind kind) {
    switch (kind) {
    case TxKind::Create: return "create";
    case TxKind::Call: return "call";
    case TxKind::Destruct: return "destruct";
    }
    return "call";
}

struct TransactionRecord {
    std::string hash;
    Address contract;
    Address sender;
    std::int64_t timestamp = 0;
    std::uint64_t block = 0;
    std::uint64_t tx_index = 0;
    TxKind kind = TxKind::Call;
};

/// Chain position of a transaction. Ordering is (block, tx_index); the
/// timestamp rides along for display and never participates in comparisons.
struct CreationTime {
    std::uint64_t block = 0;
    std::uint64_t tx_index = 0;
    std::int64_t timestamp = 0;

    friend bool operator<(const CreationTime& a, const CreationTime& b) {
        return std::tie(a.block, a.tx_index) < std::tie(b.block, b.tx_index);
    }
    friend bool operator==(const CreationTime& a, const CreationTime& b) {
        return a.block == b.block && a.tx_index == b.tx_index;
    }
};

struct ContractRecord {
    Address address;
    std::string name;
    std::string source;
    bool is_destructed = false;
    Address creator;
    CreationTime created_at;
    std::optional<Address> destructor;
};

struct Corpus {
    std::map<Address, ContractRecord> contracts;
    std::map<Address, std::vector<TransactionRecord>> transactions;
    /// One line per excluded contract or dropped transaction.
    std::vector<std::string> diagnostics;

    const ContractRecord* find(const Address& a) const {
        auto it = contracts.find(a);
        return it == contracts.end() ? nullptr : &it->second;
    }
};

inline bool tx_before(const TransactionRecord& a, const TransactionRecord& b) {
    return std::tie(a.block, a.tx_index, a.hash) < std::tie(b.block, b.tx_index, b.hash);
}

inline Address creator_of(std::span<const TransactionRecord> txs) {
    const TransactionRecord* found = nullptr;
    for (const auto& tx : txs) {
        if (tx.kind != TxKind::Create) continue;
        if (found) throw Error(ErrorCode::MultipleCreations, tx.contract.str());
        found = &tx;
    }
    if (!found) throw Error(ErrorCode::MissingCreation, txs.empty() ? "no transactions" : txs.front().contract.str());
    return found->sender;
}

/// txs must already be sorted by (block, tx_index).
inline std::optional<Address> destructor_of(std::span<const TransactionRecord> txs) {
    for (std::size_t i = 0; i < txs.size(); ++i) {
        if (txs[i].kind != TxKind::Destruct) continue;
        if (i + 1 != txs.size()) throw Error(ErrorCode::DestructNotLast, txs[i].contract.str());
        return txs[i].sender;
    }
    return std::nullopt;
}

namespace detail {

using nlohmann::json;

[[noreturn]] inline void schema_error(const std::string& path, std::size_t index, const std::string& field) {
    throw Error(ErrorCode::SchemaViolation, path + ": [" + std::to_string(index) + "]." + field);
}

inline const json& require_field(const json& obj, const char* key, const std::string& path, std::size_t index) {
    auto it = obj.find(key);
    if (it == obj.end()) schema_error(path, index, key);
    return *it;
}

inline std::string require_string(const json& obj, const char* key, const std::string& path, std::size_t index) {
    const json& v = require_field(obj, key, path, index);
    if (!v.is_string()) schema_error(path, index, key);
    return v.get<std::string>();
}

inline Address require_address(const json& obj, const char* key, const std::string& path, std::size_t index) {
    auto a = Address::parse(require_string(obj, key, path, index));
    if (!a) schema_error(path, index, key);
    return *a;
}

inline std::uint64_t require_unsigned(const json& obj, const char* key, const std::string& path, std::size_t index) {
    const json& v = require_field(obj, key, path, index);
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(v.get<std::int64_t>());
    schema_error(path, index, key);
}

inline bool is_tx_hash(const std::string& h) {
    if (h.size() != 66 || h[0] != '0' || h[1] != 'x') return false;
    return std::all_of(h.begin() + 2, h.end(), [](char c) {
        return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f') || (c >= 'A' && c <= 'F');
    });
}

inline json parse_array_file(const std::string& path) {
    std::string text = read_file(path);
    json doc = json::parse(text, nullptr, false);
    if (doc.is_discarded()) throw Error(ErrorCode::SchemaViolation, path + ": not valid JSON");
    if (!doc.is_array()) throw Error(ErrorCode::SchemaViolation, path + ": top level must be an array");
    return doc;
}

} // namespace detail

inline std::vector<TransactionRecord> parse_transactions(const std::string& path) {
    using namespace detail;
    json doc = parse_array_file(path);
    std::vector<TransactionRecord> out;
    out.reserve(doc.size());
    for (std::size_t i = 0; i < doc.size(); ++i) {
        const json& o = doc[i];
        if (!o.is_object()) schema_error(path, i, "<object>");
        TransactionRecord tx;
        tx.hash = require_string(o, "hash", path, i);
        if (!is_tx_hash(tx.hash)) schema_error(path, i, "hash");
        std::transform(tx.hash.begin(), tx.hash.end(), tx.hash.begin(),
                       [](char c) { return (c >= 'A' && c <= 'F') ? static_cast<char>(c - 'A' + 'a') : c; });
        tx.contract = require_address(o, "contract", path, i);
        tx.sender = require_address(o, "from", path, i);
        const json& ts = require_field(o, "timestamp", path, i);
        if (!ts.is_number_integer()) schema_error(path, i, "timestamp");
        tx.timestamp = ts.get<std::int64_t>();
        tx.block = require_unsigned(o, "block", path, i);
        tx.tx_index = require_unsigned(o, "tx_index", path, i);
        std::string kind = require_string(o, "kind", path, i);
        if (kind == "create") tx.kind = TxKind::Create;
        else if (kind == "call") tx.kind = TxKind::Call;
        else if (kind == "destruct") tx.kind = TxKind::Destruct;
        else schema_error(path, i, "kind");
        out.push_back(std::move(tx));
    }
    return out;
}

/// Loads the two fixture files and derives creator, creation time and
/// destructor for every contract. Contracts whose lifecycle cannot be derived
/// are excluded with an `EXCLUDE <address> <reason>` diagnostic.
inline Corpus load_corpus(const std::string& contracts_path, const std::string& transactions_path) {
    using namespace detail;
    json doc = parse_array_file(contracts_path);

    std::map<Address, ContractRecord> declared;
    for (std::size_t i = 0; i < doc.size(); ++i) {
        const json& o = doc[i];
        if (!o.is_object()) schema_error(contracts_path, i, "<object>");
        ContractRecord rec;
        rec.address = require_address(o, "address", contracts_path, i);
        rec.name = require_string(o, "name", contracts_path, i);
        rec.source = require_string(o, "source", contracts_path, i);
        const json& flag = require_field(o, "is_destructed", contracts_path, i);
        if (!flag.is_boolean()) schema_error(contracts_path, i, "is_destructed");
        rec.is_destructed = flag.get<bool>();
        if (declared.contains(rec.address)) throw Error(ErrorCode::DuplicateAddress, rec.address.str());
        declared.emplace(rec.address, std::move(rec));
    }

    Corpus corpus;
    std::map<Address, std::vector<TransactionRecord>> by_contract;
    for (auto& tx : parse_transactions(transactions_path)) {
        if (!declared.contains(tx.contract)) {
            corpus.diagnostics.push_back("ORPHAN " + tx.hash + " " + tx.contract.str());
            continue;
        }
        by_contract[tx.contract].push_back(std::move(tx));
    }

    for (auto& [addr, rec] : declared) {
        auto& txs = by_contract[addr];
        std::sort(txs.begin(), txs.end(), tx_before);
        auto exclude = [&](std::string_view reason) {
            corpus.diagnostics.push_back("EXCLUDE " + addr.str() + " " + std::string(reason));
        };
        std::optional<Address> destructor;
        try {
            rec.creator = creator_of(txs);
            destructor = destructor_of(txs);
        } catch (const Error& e) {
            switch (e.code()) {
            case ErrorCode::MissingCreation: exclude("missing-creation"); break;
            case ErrorCode::MultipleCreations: exclude("multiple-creations"); break;
            default: exclude("destruct-not-last"); break;
            }
            continue;
        }
        if (txs.front().kind != TxKind::Create) {
            exclude("create-not-first");
            continue;
        }
        if (destructor.has_value() != rec.is_destructed) {
            exclude("destructed-flag-mismatch");
            continue;
        }
        rec.created_at = {txs.front().block, txs.front().tx_index, txs.front().timestamp};
        rec.destructor = destructor;
        corpus.transactions.emplace(addr, std::move(txs));
        corpus.contracts.emplace(addr, std::move(rec));
    }
    return corpus;
}

/// Derived lifecycle facts without sources, for the ingest summary.
inline nlohmann::json summary_json(const Corpus& corpus) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& [addr, rec] : corpus.contracts) {
        arr.push_back({
            {"address", addr.str()},
            {"name", rec.name},
            {"is_destructed", rec.is_destructed},
            {"creator", rec.creator.str()},
            {"created_block", rec.created_at.block},
            {"created_tx_index", rec.created_at.tx_index},
            {"created_timestamp", rec.created_at.timestamp},
            {"destructor", rec.destructor ? nlohmann::json(rec.destructor->str()) : nlohmann::json(nullptr)},
            {"transactions", corpus.transactions.at(addr).size()},
        });
    }
    return arr;
}

} // namespace clineage::corpus
