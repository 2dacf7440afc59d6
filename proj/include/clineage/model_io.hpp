#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>
#include <vector>

#include "clineage/embed.hpp"
#include "clineage/error.hpp"

// Model file layout, all integers and floats little-endian:
//
//   magic            8 bytes  "CLNEMB01"
//   dimension        u32
//   window           u32
//   epochs           u32
//   negative_samples u32
//   learning_rate    f64
//   min_count        u32
//   ngram_min        u32
//   ngram_max        u32
//   bucket_count     u64
//   seed             u64
//   vocab_size       u64
//   vocab_size x { byte_length u32, utf8 bytes, count u64 }
//   word matrix      vocab_size x dimension f32, row-major
//   stored_rows      u64
//   stored_rows x { bucket u64, dimension f32 }
//
// N-gram rows that are not stored hold their seeded initial value.

namespace clineage::embed {

inline constexpr std::string_view kModelMagic = "CLNEMB01";

namespace detail {

class ByteWriter {
public:
    void raw(std::string_view s) { out_.append(s); }
    void u32(std::uint32_t v) { le(v, 4); }
    void u64(std::uint64_t v) { le(v, 8); }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    std::string take() { return std::move(out_); }

private:
    std::string out_;
    void le(std::uint64_t v, int n) {
        for (int i = 0; i < n; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
};

class ByteReader {
public:
    explicit ByteReader(std::string_view in) : in_(in) {}

    std::string_view raw(std::size_t n) {
        need(n);
        auto s = in_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
    std::uint64_t u64() { return le(8); }
    float f32() { return std::bit_cast<float>(u32()); }
    double f64() { return std::bit_cast<double>(u64()); }
    bool done() const { return pos_ == in_.size(); }
    std::size_t remaining() const { return in_.size() - pos_; }

private:
    std::string_view in_;
    std::size_t pos_ = 0;

    void need(std::size_t n) const {
        if (in_.size() - pos_ < n) throw Error(ErrorCode::BadModelFile, "truncated model file");
    }
    std::uint64_t le(int n) {
        need(static_cast<std::size_t>(n));
        std::uint64_t v = 0;
        for (int i = 0; i < n; ++i) v |= std::uint64_t(static_cast<unsigned char>(in_[pos_ + i])) << (8 * i);
        pos_ += static_cast<std::size_t>(n);
        return v;
    }
};

} // namespace detail

inline std::string serialize_model(const EmbeddingModel& model) {
    detail::ByteWriter w;
    const auto& c = model.config();
    w.raw(kModelMagic);
    w.u32(c.dimension);
    w.u32(c.window);
    w.u32(c.epochs);
    w.u32(c.negative_samples);
    w.f64(c.learning_rate);
    w.u32(c.min_count);
    w.u32(c.ngram_min);
    w.u32(c.ngram_max);
    w.u64(c.bucket_count);
    w.u64(c.seed);
    w.u64(model.vocab_size());
    for (std::size_t i = 0; i < model.vocab_size(); ++i) {
        const auto& word = model.words()[i];
        w.u32(static_cast<std::uint32_t>(word.size()));
        w.raw(word);
        w.u64(model.counts()[i]);
    }
    for (float v : model.word_matrix()) w.f32(v);
    const auto& buckets = model.stored_buckets();
    auto store = model.ngram_store();
    w.u64(buckets.size());
    for (std::size_t i = 0; i < buckets.size(); ++i) {
        w.u64(buckets[i]);
        for (std::size_t k = 0; k < c.dimension; ++k) w.f32(store[i * c.dimension + k]);
    }
    return w.take();
}

inline EmbeddingModel deserialize_model(std::string_view bytes) {
    detail::ByteReader r(bytes);
    if (r.raw(kModelMagic.size()) != kModelMagic) throw Error(ErrorCode::BadModelFile, "bad magic");
    EmbedConfig c;
    c.dimension = r.u32();
    c.window = r.u32();
    c.epochs = r.u32();
    c.negative_samples = r.u32();
    c.learning_rate = r.f64();
    c.min_count = r.u32();
    c.ngram_min = r.u32();
    c.ngram_max = r.u32();
    c.bucket_count = r.u64();
    c.seed = r.u64();
    try {
        c.validate();
    } catch (const Error& e) {
        throw Error(ErrorCode::BadModelFile, e.what());
    }

    const std::uint64_t vocab = r.u64();
    if (vocab > r.remaining()) throw Error(ErrorCode::BadModelFile, "vocabulary size exceeds file");
    std::vector<std::string> words;
    std::vector<std::uint64_t> counts;
    for (std::uint64_t i = 0; i < vocab; ++i) {
        auto len = r.u32();
        words.emplace_back(r.raw(len));
        counts.push_back(r.u64());
    }
    if (vocab * c.dimension * 4 > r.remaining()) throw Error(ErrorCode::BadModelFile, "truncated word matrix");
    std::vector<float> word_vectors(vocab * c.dimension);
    for (auto& v : word_vectors) v = r.f32();
    const std::uint64_t rows = r.u64();
    if (rows * (8 + std::uint64_t{c.dimension} * 4) > r.remaining()) throw Error(ErrorCode::BadModelFile, "truncated n-gram rows");
    std::vector<std::uint64_t> buckets;
    std::vector<float> store(rows * c.dimension);
    for (std::uint64_t i = 0; i < rows; ++i) {
        buckets.push_back(r.u64());
        if (buckets.back() >= c.bucket_count) throw Error(ErrorCode::BadModelFile, "bucket out of range");
        for (std::size_t k = 0; k < c.dimension; ++k) store[i * c.dimension + k] = r.f32();
    }
    if (!r.done()) throw Error(ErrorCode::BadModelFile, "trailing bytes");
    return EmbeddingModel::from_parts(c, std::move(words), std::move(counts), std::move(word_vectors),
                                      std::move(buckets), std::move(store));
}

} // namespace clineage::embed
