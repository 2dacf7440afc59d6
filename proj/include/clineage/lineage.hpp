#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "clineage/corpus.hpp"
#include "clineage/embed.hpp"
#include "clineage/error.hpp"

namespace clineage::lineage {

using corpus::ContractRecord;
using corpus::Corpus;

struct CreatorGroup {
    Address creator;
    /// Ascending by (block, tx_index), ties by address.
    std::vector<const ContractRecord*> members;
};

struct CandidatePair {
    Address predecessor;
    Address successor;
    std::optional<double> similarity;
    bool successor_destructed = false;

    friend bool operator==(const CandidatePair&, const CandidatePair&) = default;
};

/// A candidate pair whose similarity cleared the threshold.
using UpgradePair = CandidatePair;

struct LineageConfig {
    double threshold = 0.6;

    void validate() const {
        if (!(threshold >= 0.0 && threshold <= 1.0)) {
            throw Error(ErrorCode::InvalidArgument, "threshold must be within [0, 1]");
        }
    }
};

inline bool created_before(const ContractRecord* a, const ContractRecord* b) {
    if (a->created_at == b->created_at) return a->address < b->address;
    return a->created_at < b->created_at;
}

inline std::vector<CreatorGroup> group_by_creator(const Corpus& corpus) {
    std::map<Address, CreatorGroup> by_creator;
    for (const auto& [addr, rec] : corpus.contracts) {
        auto& g = by_creator[rec.creator];
        g.creator = rec.creator;
        g.members.push_back(&rec);
    }
    std::vector<CreatorGroup> out;
    out.reserve(by_creator.size());
    for (auto& [creator, g] : by_creator) {
        std::sort(g.members.begin(), g.members.end(), created_before);
        out.push_back(std::move(g));
    }
    return out;
}

/// Keeps the groups holding at least one destructed contract.
inline std::vector<CreatorGroup> filter_groups(std::vector<CreatorGroup> groups) {
    std::erase_if(groups, [](const CreatorGroup& g) {
        return std::none_of(g.members.begin(), g.members.end(), [](const ContractRecord* r) { return r->is_destructed; });
    });
    return groups;
}

/// Pairs every destructed member with each member created after it.
inline std::vector<CandidatePair> candidate_pairs(const CreatorGroup& group) {
    std::vector<CandidatePair> out;
    const auto& m = group.members;
    for (std::size_t i = 0; i < m.size(); ++i) {
        if (!m[i]->is_destructed) continue;
        for (std::size_t j = i + 1; j < m.size(); ++j) {
            out.push_back({m[i]->address, m[j]->address, std::nullopt, m[j]->is_destructed});
        }
    }
    return out;
}

/// Fills in cosine similarity of mean-pooled document vectors. Pairs with a
/// missing or empty normalized sequence are dropped and reported in
/// `diagnostics`. Output order follows input order.
inline std::vector<CandidatePair> score_pairs(std::span<const CandidatePair> pairs, const embed::EmbeddingModel& model,
                                              const std::map<Address, sol::NormalizedTokenSequence>& normalized,
                                              std::vector<std::string>* diagnostics = nullptr,
                                              unsigned threads = 1) {
    std::map<Address, embed::DocVector> vectors;
    for (const auto& p : pairs) {
        for (const Address* a : {&p.predecessor, &p.successor}) {
            if (vectors.contains(*a)) continue;
            auto it = normalized.find(*a);
            if (it == normalized.end() || it->second.tokens.empty()) continue;
            vectors.emplace(*a, embed::DocVector{});
        }
    }
    std::vector<std::map<Address, embed::DocVector>::iterator> slots;
    for (auto it = vectors.begin(); it != vectors.end(); ++it) slots.push_back(it);
    auto compute = [&](std::size_t begin, std::size_t step) {
        for (std::size_t i = begin; i < slots.size(); i += step) {
            slots[i]->second = embed::doc_vector(model, normalized.at(slots[i]->first));
        }
    };
    threads = std::max(1u, threads);
    if (threads == 1) {
        compute(0, 1);
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(compute, t, threads);
        for (auto& th : pool) th.join();
    }

    std::vector<CandidatePair> out;
    for (const auto& p : pairs) {
        auto a = vectors.find(p.predecessor);
        auto b = vectors.find(p.successor);
        if (a == vectors.end() || b == vectors.end()) {
            if (diagnostics) {
                diagnostics->push_back("DROP " + p.predecessor.str() + " " + p.successor.str() + " empty-normalized-sequence");
            }
            continue;
        }
        CandidatePair scored = p;
        try {
            scored.similarity = embed::cosine(a->second.values, b->second.values);
        } catch (const Error& e) {
            if (diagnostics) diagnostics->push_back("DROP " + p.predecessor.str() + " " + p.successor.str() + " " + e.what());
            continue;
        }
        out.push_back(scored);
    }
    return out;
}

/// Strictly greater than the threshold.
inline std::vector<UpgradePair> filter_threshold(std::span<const CandidatePair> pairs, const LineageConfig& config) {
    config.validate();
    std::vector<UpgradePair> out;
    for (const auto& p : pairs) {
        if (p.similarity && *p.similarity > config.threshold) out.push_back(p);
    }
    return out;
}

inline void sort_pairs(std::vector<UpgradePair>& pairs) {
    std::sort(pairs.begin(), pairs.end(), [](const auto& a, const auto& b) {
        return std::tie(a.predecessor, a.successor) < std::tie(b.predecessor, b.successor);
    });
}

/// Similarity rounded to six decimal places for the pairs file.
inline double round6(double v) { return std::round(v * 1e6) / 1e6; }

inline nlohmann::json pairs_to_json(std::vector<UpgradePair> pairs) {
    sort_pairs(pairs);
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& p : pairs) {
        arr.push_back({
            {"predecessor", p.predecessor.str()},
            {"successor", p.successor.str()},
            {"similarity", round6(p.similarity.value_or(0.0))},
            {"successor_destructed", p.successor_destructed},
        });
    }
    return arr;
}

inline std::vector<UpgradePair> pairs_from_json(const nlohmann::json& arr) {
    if (!arr.is_array()) throw Error(ErrorCode::SchemaViolation, "pairs: top level must be an array");
    std::vector<UpgradePair> out;
    for (const auto& o : arr) {
        auto pred = Address::parse(o.at("predecessor").get<std::string>());
        auto succ = Address::parse(o.at("successor").get<std::string>());
        if (!pred || !succ) throw Error(ErrorCode::SchemaViolation, "pairs: bad address");
        out.push_back({*pred, *succ, o.at("similarity").get<double>(), o.value("successor_destructed", false)});
    }
    return out;
}

} // namespace clineage::lineage
