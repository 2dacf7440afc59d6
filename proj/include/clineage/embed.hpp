#pragma once

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_map>
#include <vector>

#include "clineage/address.hpp"
#include "clineage/error.hpp"
#include "clineage/hash.hpp"
#include "clineage/normalize.hpp"

namespace clineage::embed {

using sol::NormalizedTokenSequence;

struct EmbedConfig {
    std::uint32_t dimension = 100;
    std::uint32_t window = 5;
    std::uint32_t epochs = 5;
    std::uint32_t negative_samples = 5;
    double learning_rate = 0.05;  // linearly decayed to 0 over training
    std::uint32_t min_count = 1;
    std::uint32_t ngram_min = 3;
    std::uint32_t ngram_max = 6;
    std::uint64_t bucket_count = std::uint64_t{1} << 21;
    std::uint64_t seed = 0;

    friend bool operator==(const EmbedConfig&, const EmbedConfig&) = default;

    void validate() const {
        auto bad = [](const std::string& what) { throw Error(ErrorCode::DegenerateConfig, what); };
        if (dimension < 2) bad("dimension must be >= 2");
        if (window == 0) bad("window must be positive");
        if (epochs == 0) bad("epochs must be positive");
        if (negative_samples == 0) bad("negative_samples must be positive");
        if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) bad("learning_rate must be positive");
        if (min_count == 0) bad("min_count must be positive");
        if (ngram_min > ngram_max) bad("ngram_min must not exceed ngram_max");
        if (ngram_max > 0 && ngram_min == 0) bad("ngram_min must be positive");
        if (bucket_count == 0) bad("bucket_count must be positive");
    }
};

/// Execution knobs that do not change the model definition.
struct TrainOptions {
    /// 1 is the deterministic path. More threads train lock-free in parallel
    /// and results then vary from run to run.
    unsigned threads = 1;
    /// Called after every epoch with the epoch number (1-based).
    std::function<void(std::uint32_t, const class EmbeddingModel&)> on_epoch;
};

/// Character n-grams of `<token>` with lengths in [minn, maxn], counted in
/// UTF-8 code points. Single boundary characters are excluded.
inline std::vector<std::string> char_ngrams(std::string_view token, std::uint32_t minn, std::uint32_t maxn) {
    std::vector<std::string> out;
    if (maxn == 0) return out;
    const std::string word = "<" + std::string(token) + ">";
    for (std::size_t i = 0; i < word.size(); ++i) {
        if ((static_cast<unsigned char>(word[i]) & 0xC0) == 0x80) continue;
        std::string gram;
        std::size_t j = i;
        for (std::uint32_t n = 1; j < word.size() && n <= maxn; ++n) {
            gram.push_back(word[j++]);
            while (j < word.size() && (static_cast<unsigned char>(word[j]) & 0xC0) == 0x80) gram.push_back(word[j++]);
            if (n >= minn && !(n == 1 && (i == 0 || j == word.size()))) out.push_back(gram);
        }
    }
    return out;
}

inline std::vector<std::uint64_t> ngram_buckets(std::string_view token, const EmbedConfig& cfg) {
    std::vector<std::uint64_t> out;
    for (const auto& g : char_ngrams(token, cfg.ngram_min, cfg.ngram_max)) out.push_back(fnv1a32(g) % cfg.bucket_count);
    return out;
}

/// Subword skip-gram model. The n-gram table is conceptually a dense
/// bucket_count x dimension matrix; only rows reached by vocabulary n-grams
/// are materialized, every other row equals its seeded initial value.
class EmbeddingModel {
public:
    EmbeddingModel() = default;

    const EmbedConfig& config() const { return config_; }
    std::size_t vocab_size() const { return words_.size(); }
    const std::vector<std::string>& words() const { return words_; }
    const std::vector<std::uint64_t>& counts() const { return counts_; }

    std::optional<std::uint32_t> index_of(std::string_view token) const {
        auto it = index_.find(std::string(token));
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }

    std::span<const float> word_row(std::uint32_t index) const {
        return {word_vectors_.data() + std::size_t{index} * config_.dimension, config_.dimension};
    }

    /// Stored bucket ids, ascending.
    const std::vector<std::uint64_t>& stored_buckets() const { return buckets_; }

    /// Row `bucket` of the n-gram matrix.
    std::vector<float> ngram_row(std::uint64_t bucket) const {
        auto it = std::lower_bound(buckets_.begin(), buckets_.end(), bucket);
        if (it != buckets_.end() && *it == bucket) {
            const float* row = ngram_store_.data() + std::size_t(it - buckets_.begin()) * config_.dimension;
            return {row, row + config_.dimension};
        }
        return initial_row(config_, kNgramTag, bucket);
    }

    std::span<const float> word_matrix() const { return word_vectors_; }
    std::span<const float> ngram_store() const { return ngram_store_; }

    bool all_finite() const {
        auto finite = [](float v) { return std::isfinite(v); };
        return std::all_of(word_vectors_.begin(), word_vectors_.end(), finite) &&
               std::all_of(ngram_store_.begin(), ngram_store_.end(), finite);
    }

    static constexpr std::uint64_t kWordTag = 0x776f7264;   // "word"
    static constexpr std::uint64_t kNgramTag = 0x6e6772616d; // "ngram"

    /// Seeded uniform initialization in [-1/dim, 1/dim], a pure function of
    /// (seed, table, row).
    static std::vector<float> initial_row(const EmbedConfig& cfg, std::uint64_t tag, std::uint64_t row) {
        Rng rng(splitmix64(derive_seed(cfg.seed, "embed-init") ^ splitmix64(tag * 0x100000001b3ull + row)));
        const double bound = 1.0 / cfg.dimension;
        std::vector<float> out(cfg.dimension);
        for (auto& v : out) v = static_cast<float>((rng.unit() * 2.0 - 1.0) * bound);
        return out;
    }

    /// Assembles a model from its persisted parts. Buckets must be ascending
    /// and unique; both matrices must match the dimension.
    static EmbeddingModel from_parts(EmbedConfig cfg, std::vector<std::string> words, std::vector<std::uint64_t> counts,
                                     std::vector<float> word_vectors, std::vector<std::uint64_t> buckets,
                                     std::vector<float> ngram_store) {
        cfg.validate();
        if (words.size() != counts.size() || word_vectors.size() != words.size() * cfg.dimension ||
            ngram_store.size() != buckets.size() * cfg.dimension ||
            !std::is_sorted(buckets.begin(), buckets.end()) ||
            std::adjacent_find(buckets.begin(), buckets.end()) != buckets.end()) {
            throw Error(ErrorCode::BadModelFile, "inconsistent model parts");
        }
        EmbeddingModel m;
        m.config_ = cfg;
        m.words_ = std::move(words);
        m.counts_ = std::move(counts);
        m.word_vectors_ = std::move(word_vectors);
        m.buckets_ = std::move(buckets);
        m.ngram_store_ = std::move(ngram_store);
        for (std::uint32_t i = 0; i < m.words_.size(); ++i) {
            if (!m.index_.emplace(m.words_[i], i).second) throw Error(ErrorCode::BadModelFile, "duplicate word");
        }
        return m;
    }

private:
    friend class Trainer;

    EmbedConfig config_;
    std::vector<std::string> words_;
    std::vector<std::uint64_t> counts_;
    std::unordered_map<std::string, std::uint32_t> index_;
    std::vector<float> word_vectors_;
    std::vector<std::uint64_t> buckets_;
    std::vector<float> ngram_store_;
};

namespace detail {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Plain and relaxed-atomic element access. The atomic flavour is only used by
// the parallel trainer, where rows are shared without locks.
struct PlainAccess {
    static float load(const float& x) { return x; }
    static void add(float& x, float d) { x += d; }
};
struct AtomicAccess {
    static float load(const float& x) {
        return std::atomic_ref<float>(const_cast<float&>(x)).load(std::memory_order_relaxed);
    }
    static void add(float& x, float d) {
        std::atomic_ref<float> r(x);
        r.store(r.load(std::memory_order_relaxed) + d, std::memory_order_relaxed);
    }
};

} // namespace detail

class Trainer {
public:
    Trainer(const EmbedConfig& cfg, std::span<const NormalizedTokenSequence> docs) : cfg_(cfg) {
        cfg_.validate();
        build_vocab(docs);
        build_subwords();
        build_negative_table();
        output_.assign(model_.words_.size() * cfg_.dimension, 0.0f);
    }

    EmbeddingModel run(const TrainOptions& opts) {
        const unsigned threads = std::max(1u, opts.threads);
        const std::uint64_t total = std::uint64_t{cfg_.epochs} * total_tokens_;
        std::atomic<std::uint64_t> processed{0};
        Rng order_rng(derive_seed(cfg_.seed, "embed-order"));

        for (std::uint32_t epoch = 0; epoch < cfg_.epochs; ++epoch) {
            std::vector<std::size_t> order(docs_.size());
            for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
            for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[order_rng.below(i)]);

            if (threads == 1) {
                Rng rng(splitmix64(derive_seed(cfg_.seed, "embed-sample") + epoch));
                for (std::size_t d : order) train_doc<detail::PlainAccess>(docs_[d], rng, processed, total);
            } else {
                std::vector<std::thread> pool;
                for (unsigned t = 0; t < threads; ++t) {
                    pool.emplace_back([&, t] {
                        Rng rng(splitmix64(derive_seed(cfg_.seed, "embed-sample") + epoch * 1000003ull + t));
                        for (std::size_t k = t; k < order.size(); k += threads) {
                            train_doc<detail::AtomicAccess>(docs_[order[k]], rng, processed, total);
                        }
                    });
                }
                for (auto& th : pool) th.join();
            }

            if (!model_.all_finite()) {
                throw Error(ErrorCode::NumericalDivergence, "non-finite vector after epoch " + std::to_string(epoch + 1));
            }
            if (opts.on_epoch) opts.on_epoch(epoch + 1, model_);
        }
        return std::move(model_);
    }

private:
    EmbedConfig cfg_;
    EmbeddingModel model_;
    std::vector<std::vector<std::uint32_t>> docs_;     // vocabulary ids
    std::vector<std::vector<float*>> components_;      // rows summed for each word
    std::vector<std::uint32_t> negatives_;
    std::vector<float> output_;
    std::uint64_t total_tokens_ = 0;

    static constexpr std::size_t kNegativeTableSize = 1'000'000;

    void build_vocab(std::span<const NormalizedTokenSequence> docs) {
        std::map<std::string, std::uint64_t> counts;
        for (const auto& d : docs) {
            for (const auto& t : d.tokens) ++counts[t];
        }
        std::vector<std::pair<std::string, std::uint64_t>> entries;
        for (auto& [w, c] : counts) {
            if (c >= cfg_.min_count) entries.emplace_back(w, c);
        }
        if (entries.empty()) throw Error(ErrorCode::EmptyCorpus, "no token reaches min_count");
        std::stable_sort(entries.begin(), entries.end(),
                         [](const auto& a, const auto& b) { return a.second > b.second; });

        auto& m = model_;
        m.config_ = cfg_;
        for (std::uint32_t i = 0; i < entries.size(); ++i) {
            m.words_.push_back(entries[i].first);
            m.counts_.push_back(entries[i].second);
            m.index_.emplace(entries[i].first, i);
        }
        m.word_vectors_.resize(entries.size() * cfg_.dimension);
        for (std::uint32_t i = 0; i < entries.size(); ++i) {
            auto row = EmbeddingModel::initial_row(cfg_, EmbeddingModel::kWordTag, i);
            std::copy(row.begin(), row.end(), m.word_vectors_.begin() + std::size_t{i} * cfg_.dimension);
        }

        for (const auto& d : docs) {
            std::vector<std::uint32_t> ids;
            for (const auto& t : d.tokens) {
                auto it = m.index_.find(t);
                if (it != m.index_.end()) ids.push_back(it->second);
            }
            total_tokens_ += ids.size();
            if (ids.size() > 0) docs_.push_back(std::move(ids));
        }
    }

    void build_subwords() {
        auto& m = model_;
        std::vector<std::vector<std::uint64_t>> per_word;
        std::vector<std::uint64_t> all;
        for (const auto& w : m.words_) {
            per_word.push_back(ngram_buckets(w, cfg_));
            all.insert(all.end(), per_word.back().begin(), per_word.back().end());
        }
        std::sort(all.begin(), all.end());
        all.erase(std::unique(all.begin(), all.end()), all.end());
        m.buckets_ = all;
        m.ngram_store_.resize(all.size() * cfg_.dimension);
        for (std::size_t i = 0; i < all.size(); ++i) {
            auto row = EmbeddingModel::initial_row(cfg_, EmbeddingModel::kNgramTag, all[i]);
            std::copy(row.begin(), row.end(), m.ngram_store_.begin() + i * cfg_.dimension);
        }
        components_.resize(m.words_.size());
        for (std::size_t w = 0; w < m.words_.size(); ++w) {
            components_[w].push_back(m.word_vectors_.data() + w * cfg_.dimension);
            for (auto b : per_word[w]) {
                auto pos = std::size_t(std::lower_bound(all.begin(), all.end(), b) - all.begin());
                components_[w].push_back(m.ngram_store_.data() + pos * cfg_.dimension);
            }
        }
    }

    void build_negative_table() {
        double z = 0.0;
        for (auto c : model_.counts_) z += std::sqrt(static_cast<double>(c));
        for (std::uint32_t i = 0; i < model_.counts_.size(); ++i) {
            const double share = std::sqrt(static_cast<double>(model_.counts_[i])) / z;
            const auto n = static_cast<std::size_t>(share * kNegativeTableSize);
            negatives_.insert(negatives_.end(), std::max<std::size_t>(n, 1), i);
        }
        Rng rng(derive_seed(cfg_.seed, "embed-negatives"));
        for (std::size_t i = negatives_.size(); i > 1; --i) std::swap(negatives_[i - 1], negatives_[rng.below(i)]);
    }

    template <class Access>
    void train_doc(const std::vector<std::uint32_t>& doc, Rng& rng, std::atomic<std::uint64_t>& processed,
                   std::uint64_t total) {
        const std::size_t dim = cfg_.dimension;
        std::vector<float> hidden(dim), grad(dim);
        for (std::size_t w = 0; w < doc.size(); ++w) {
            const double progress =
                static_cast<double>(processed.fetch_add(1, std::memory_order_relaxed)) / static_cast<double>(total);
            const double lr = cfg_.learning_rate * std::max(0.0, 1.0 - progress);
            const auto boundary = static_cast<std::size_t>(rng.below(cfg_.window)) + 1;

            const auto& rows = components_[doc[w]];
            std::fill(hidden.begin(), hidden.end(), 0.0f);
            for (const float* row : rows) {
                for (std::size_t k = 0; k < dim; ++k) hidden[k] += Access::load(row[k]);
            }

            for (std::size_t c = (w >= boundary ? w - boundary : 0); c <= w + boundary && c < doc.size(); ++c) {
                if (c == w) continue;
                std::fill(grad.begin(), grad.end(), 0.0f);
                update_target<Access>(doc[c], 1.0, hidden, grad, lr);
                if (model_.words_.size() > 1) {
                    for (std::uint32_t n = 0; n < cfg_.negative_samples; ++n) {
                        std::uint32_t neg;
                        do {
                            neg = negatives_[rng.below(negatives_.size())];
                        } while (neg == doc[c]);
                        update_target<Access>(neg, 0.0, hidden, grad, lr);
                    }
                }
                // Each component takes an equal share of the gradient, as in fastText.
                const float share = 1.0f / static_cast<float>(rows.size());
                for (const float* crow : rows) {
                    float* row = const_cast<float*>(crow);
                    for (std::size_t k = 0; k < dim; ++k) Access::add(row[k], grad[k] * share);
                }
            }
        }
    }

    template <class Access>
    void update_target(std::uint32_t target, double label, const std::vector<float>& hidden, std::vector<float>& grad,
                       double lr) {
        const std::size_t dim = cfg_.dimension;
        float* out = output_.data() + std::size_t{target} * dim;
        double dot = 0.0;
        for (std::size_t k = 0; k < dim; ++k) dot += static_cast<double>(Access::load(out[k])) * hidden[k];
        const auto alpha = static_cast<float>(lr * (label - detail::sigmoid(dot)));
        for (std::size_t k = 0; k < dim; ++k) {
            grad[k] += alpha * Access::load(out[k]);
            Access::add(out[k], alpha * hidden[k]);
        }
    }
};

/// Skip-gram with negative sampling over subword-composed token vectors.
inline EmbeddingModel train(std::span<const NormalizedTokenSequence> docs, const EmbedConfig& config,
                            const TrainOptions& opts = {}) {
    config.validate();
    const bool any = std::any_of(docs.begin(), docs.end(), [](const auto& d) { return !d.tokens.empty(); });
    if (!any) throw Error(ErrorCode::EmptyCorpus, "no non-empty document");
    return Trainer(config, docs).run(opts);
}

/// Word vector plus n-gram vectors for known tokens, n-gram vectors alone for
/// unknown ones.
inline std::vector<double> token_vector(const EmbeddingModel& model, std::string_view token) {
    const auto& cfg = model.config();
    std::vector<double> v(cfg.dimension, 0.0);
    if (auto idx = model.index_of(token)) {
        auto row = model.word_row(*idx);
        for (std::size_t k = 0; k < v.size(); ++k) v[k] += row[k];
    }
    for (auto b : ngram_buckets(token, cfg)) {
        auto row = model.ngram_row(b);
        for (std::size_t k = 0; k < v.size(); ++k) v[k] += row[k];
    }
    return v;
}

struct DocVector {
    std::vector<double> values;
    Address origin;
};

/// Mean of the token vectors; order-invariant by construction.
inline DocVector doc_vector(const EmbeddingModel& model, const NormalizedTokenSequence& doc) {
    if (doc.tokens.empty()) throw Error(ErrorCode::EmptyDocument, doc.origin.str());
    std::map<std::string_view, std::size_t> multiplicity;
    for (const auto& t : doc.tokens) ++multiplicity[t];
    std::vector<double> sum(model.config().dimension, 0.0);
    for (const auto& [tok, n] : multiplicity) {
        auto tv = token_vector(model, tok);
        for (std::size_t k = 0; k < sum.size(); ++k) sum[k] += static_cast<double>(n) * tv[k];
    }
    for (auto& x : sum) x /= static_cast<double>(doc.tokens.size());
    return {std::move(sum), doc.origin};
}

inline double cosine(std::span<const double> u, std::span<const double> v) {
    if (u.size() != v.size()) throw Error(ErrorCode::DimensionMismatch, std::to_string(u.size()) + " vs " + std::to_string(v.size()));
    double dot = 0.0, nu = 0.0, nv = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k) {
        dot += u[k] * v[k];
        nu += u[k] * u[k];
        nv += v[k] * v[k];
    }
    if (nu == 0.0 || nv == 0.0) throw Error(ErrorCode::ZeroVector, "cosine of a zero vector");
    return std::clamp(dot / (std::sqrt(nu) * std::sqrt(nv)), -1.0, 1.0);
}

} // namespace clineage::embed
