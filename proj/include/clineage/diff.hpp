#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "clineage/lineage.hpp"

namespace clineage::diff {

struct Range {
    std::size_t begin = 0;
    std::size_t end = 0;

    std::size_t size() const { return end - begin; }
    bool empty() const { return begin == end; }
    friend bool operator==(const Range&, const Range&) = default;
};

enum class HunkKind { Equal, Delete, Insert, Replace };

inline std::string_view to_string(HunkKind k) {
    switch (k) {
    case HunkKind::Equal: return "equal";
    case HunkKind::Delete: return "delete";
    case HunkKind::Insert: return "insert";
    case HunkKind::Replace: return "replace";
    }
    return "?";
}

struct DiffHunk {
    HunkKind kind = HunkKind::Equal;
    Range pred;
    Range succ;
    friend bool operator==(const DiffHunk&, const DiffHunk&) = default;
};

enum class Granularity { Line, NormalizedToken };

inline std::string_view to_string(Granularity g) { return g == Granularity::Line ? "line" : "normalized-token"; }

struct DiffReport {
    lineage::UpgradePair pair;
    Granularity granularity = Granularity::Line;
    std::vector<DiffHunk> hunks;
    std::size_t lcs_length = 0;
};

/// Index pairs (i, j) with a[i] == b[j], strictly increasing in both.
using Alignment = std::vector<std::pair<std::size_t, std::size_t>>;

namespace detail {

/// Maps symbols to dense ids shared between the two sequences.
template <typename T>
std::pair<std::vector<std::uint32_t>, std::vector<std::uint32_t>> intern(std::span<const T> a, std::span<const T> b) {
    std::unordered_map<T, std::uint32_t> ids;
    auto map = [&](std::span<const T> s) {
        std::vector<std::uint32_t> out;
        out.reserve(s.size());
        for (const auto& x : s) out.push_back(ids.try_emplace(x, static_cast<std::uint32_t>(ids.size())).first->second);
        return out;
    };
    auto ia = map(a);
    auto ib = map(b);
    return {std::move(ia), std::move(ib)};
}

using Ids = std::span<const std::uint32_t>;

/// LCS length table for suffixes, one row at a time from the bottom.
/// `row[j]` ends up as the LCS length of a[i:] and b[j:].
inline void suffix_row_step(Ids a, std::size_t i, Ids b, const std::vector<std::uint32_t>& below,
                            std::vector<std::uint32_t>& row) {
    const std::size_t m = b.size();
    row[m] = 0;
    for (std::size_t j = m; j-- > 0;) {
        row[j] = a[i] == b[j] ? below[j + 1] + 1 : std::max(below[j], row[j + 1]);
    }
}

/// Budget for the traceback bit table, in cells. 20,000 x 20,000 fits.
inline constexpr std::size_t kBitTableCells = std::size_t{400'000'000} + 1;

/// Exact traceback with the tie-break: on a mismatch with equal options,
/// advance in b so that a's earliest symbols stay matchable.
inline void align_bit_table(Ids a, Ids b, std::size_t a_off, std::size_t b_off, Alignment& out) {
    const std::size_t n = a.size(), m = b.size();
    if (n == 0 || m == 0) return;
    const std::size_t stride = (m + 63) / 64;
    // bit set: advance b (L[i][j+1] >= L[i+1][j]); clear: advance a.
    std::vector<std::uint64_t> skip_b(n * stride, 0);
    std::vector<std::uint32_t> below(m + 1, 0), row(m + 1, 0);
    for (std::size_t i = n; i-- > 0;) {
        row[m] = 0;
        for (std::size_t j = m; j-- > 0;) {
            if (a[i] == b[j]) {
                row[j] = below[j + 1] + 1;
            } else if (row[j + 1] >= below[j]) {
                row[j] = row[j + 1];
                skip_b[i * stride + j / 64] |= std::uint64_t{1} << (j % 64);
            } else {
                row[j] = below[j];
            }
        }
        std::swap(below, row);
    }
    std::size_t i = 0, j = 0;
    while (i < n && j < m) {
        if (a[i] == b[j]) {
            out.emplace_back(a_off + i, b_off + j);
            ++i;
            ++j;
        } else if (skip_b[i * stride + j / 64] >> (j % 64) & 1) {
            ++j;
        } else {
            ++i;
        }
    }
}

/// Linear-space fallback for inputs beyond the bit table budget.
inline void align_hirschberg(Ids a, Ids b, std::size_t a_off, std::size_t b_off, Alignment& out) {
    const std::size_t n = a.size(), m = b.size();
    if (n == 0 || m == 0) return;
    if (n * m < kBitTableCells) {
        align_bit_table(a, b, a_off, b_off, out);
        return;
    }
    const std::size_t mid = n / 2;
    // Forward LCS lengths of a[:mid] against every prefix of b.
    std::vector<std::uint32_t> fwd(m + 1, 0), prev(m + 1, 0);
    for (std::size_t i = 0; i < mid; ++i) {
        fwd[0] = 0;
        for (std::size_t j = 0; j < m; ++j) {
            fwd[j + 1] = a[i] == b[j] ? prev[j] + 1 : std::max(prev[j + 1], fwd[j]);
        }
        std::swap(fwd, prev);
    }
    std::vector<std::uint32_t> left = prev;
    // Backward LCS lengths of a[mid:] against every suffix of b.
    std::vector<std::uint32_t> below(m + 1, 0), row(m + 1, 0);
    for (std::size_t i = n; i-- > mid;) {
        suffix_row_step(a, i, b, below, row);
        std::swap(below, row);
    }
    std::size_t best_k = 0;
    std::uint32_t best = 0;
    for (std::size_t k = 0; k <= m; ++k) {
        const std::uint32_t v = left[k] + below[k];
        if (v > best) {
            best = v;
            best_k = k;
        }
    }
    align_hirschberg(a.subspan(0, mid), b.subspan(0, best_k), a_off, b_off, out);
    align_hirschberg(a.subspan(mid), b.subspan(best_k), a_off + mid, b_off + best_k, out);
}

inline Alignment align_ids(Ids a, Ids b) {
    Alignment out;
    std::size_t pre = 0;
    while (pre < a.size() && pre < b.size() && a[pre] == b[pre]) {
        out.emplace_back(pre, pre);
        ++pre;
    }
    // Stripping a common suffix can move a match later in `a`, so it is only
    // done when the table would not fit anyway.
    if ((a.size() - pre) * (b.size() - pre) < kBitTableCells) {
        align_bit_table(a.subspan(pre), b.subspan(pre), pre, pre, out);
        return out;
    }
    std::size_t suf = 0;
    while (suf < a.size() - pre && suf < b.size() - pre && a[a.size() - 1 - suf] == b[b.size() - 1 - suf]) ++suf;
    auto ma = a.subspan(pre, a.size() - pre - suf);
    auto mb = b.subspan(pre, b.size() - pre - suf);
    if (ma.size() * mb.size() < kBitTableCells) {
        align_bit_table(ma, mb, pre, pre, out);
    } else {
        align_hirschberg(ma, mb, pre, pre, out);
    }
    for (std::size_t k = suf; k-- > 0;) out.emplace_back(a.size() - 1 - k, b.size() - 1 - k);
    return out;
}

} // namespace detail

/// Matched index pairs of one longest common subsequence.
template <typename T>
Alignment align(std::span<const T> a, std::span<const T> b) {
    auto [ia, ib] = detail::intern(a, b);
    return detail::align_ids(ia, ib);
}

/// One longest common subsequence. Among several, the one whose matches sit
/// earliest in `a`.
template <typename T>
std::vector<T> lcs(std::span<const T> a, std::span<const T> b) {
    std::vector<T> out;
    for (auto [i, j] : align(a, b)) out.push_back(a[i]);
    return out;
}

template <typename T>
std::vector<T> lcs(const std::vector<T>& a, const std::vector<T>& b) {
    return lcs(std::span<const T>(a), std::span<const T>(b));
}

inline std::string lcs(std::string_view a, std::string_view b) {
    auto r = lcs(std::span<const char>(a.data(), a.size()), std::span<const char>(b.data(), b.size()));
    return {r.begin(), r.end()};
}

/// Length only, O(min(n, m)) memory.
template <typename T>
std::size_t lcs_length(std::span<const T> a, std::span<const T> b) {
    if (a.size() < b.size()) std::swap(a, b);
    std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (std::size_t j = 0; j < b.size(); ++j) {
            cur[j + 1] = a[i] == b[j] ? prev[j] + 1 : std::max(prev[j + 1], cur[j]);
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

template <typename T>
std::size_t lcs_length(const std::vector<T>& a, const std::vector<T>& b) {
    return lcs_length(std::span<const T>(a), std::span<const T>(b));
}

/// Longest common contiguous run. Ties resolve to the earliest start in `a`,
/// then in `b`.
template <typename T>
std::vector<T> longest_common_substring(std::span<const T> a, std::span<const T> b) {
    std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
    std::size_t best = 0, best_end_a = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (std::size_t j = 0; j < b.size(); ++j) {
            cur[j + 1] = a[i] == b[j] ? prev[j] + 1 : 0;
            if (cur[j + 1] > best) {
                best = cur[j + 1];
                best_end_a = i + 1;
            }
        }
        std::swap(prev, cur);
    }
    return {a.begin() + static_cast<std::ptrdiff_t>(best_end_a - best), a.begin() + static_cast<std::ptrdiff_t>(best_end_a)};
}

inline std::vector<DiffHunk> hunks_from_alignment(const Alignment& al, std::size_t n, std::size_t m) {
    std::vector<DiffHunk> out;
    auto push = [&](HunkKind kind, Range p, Range s) {
        if (kind == HunkKind::Equal && !out.empty() && out.back().kind == HunkKind::Equal &&
            out.back().pred.end == p.begin && out.back().succ.end == s.begin) {
            out.back().pred.end = p.end;
            out.back().succ.end = s.end;
            return;
        }
        out.push_back({kind, p, s});
    };
    auto gap = [&](std::size_t i0, std::size_t i1, std::size_t j0, std::size_t j1) {
        if (i0 < i1 && j0 < j1) push(HunkKind::Replace, {i0, i1}, {j0, j1});
        else if (i0 < i1) push(HunkKind::Delete, {i0, i1}, {j0, j0});
        else if (j0 < j1) push(HunkKind::Insert, {i0, i0}, {j0, j1});
    };
    std::size_t i = 0, j = 0;
    for (auto [ai, bj] : al) {
        gap(i, ai, j, bj);
        push(HunkKind::Equal, {ai, ai + 1}, {bj, bj + 1});
        i = ai + 1;
        j = bj + 1;
    }
    gap(i, n, j, m);
    return out;
}

template <typename T>
std::vector<DiffHunk> diff_hunks(std::span<const T> a, std::span<const T> b) {
    return hunks_from_alignment(align(a, b), a.size(), b.size());
}

template <typename T>
std::vector<DiffHunk> diff_hunks(const std::vector<T>& a, const std::vector<T>& b) {
    return diff_hunks(std::span<const T>(a), std::span<const T>(b));
}

/// Rebuilds the predecessor (`first`) or successor sequence from hunks.
template <typename T>
std::vector<T> reconstruct(std::span<const DiffHunk> hunks, std::span<const T> a, std::span<const T> b, bool first) {
    std::vector<T> out;
    for (const auto& h : hunks) {
        if (first && h.kind != HunkKind::Insert) {
            out.insert(out.end(), a.begin() + static_cast<std::ptrdiff_t>(h.pred.begin), a.begin() + static_cast<std::ptrdiff_t>(h.pred.end));
        } else if (!first && h.kind != HunkKind::Delete) {
            out.insert(out.end(), b.begin() + static_cast<std::ptrdiff_t>(h.succ.begin), b.begin() + static_cast<std::ptrdiff_t>(h.succ.end));
        }
    }
    return out;
}

inline std::size_t equal_length(std::span<const DiffHunk> hunks) {
    std::size_t n = 0;
    for (const auto& h : hunks) {
        if (h.kind == HunkKind::Equal) n += h.pred.size();
    }
    return n;
}

struct Region {
    Range pred;
    Range succ;
    /// Non-equal hunks covered by the region, in order.
    std::vector<DiffHunk> changes;
};

/// Non-equal hunks widened by `context` symbols of equal content on both
/// sides. Neighbours separated by fewer than 2 * context equal symbols merge.
inline std::vector<Region> changed_regions(const DiffReport& report, std::size_t context) {
    std::vector<Region> out;
    const auto& hs = report.hunks;
    for (std::size_t k = 0; k < hs.size(); ++k) {
        const auto& h = hs[k];
        if (h.kind == HunkKind::Equal) continue;
        const std::size_t before = k > 0 && hs[k - 1].kind == HunkKind::Equal ? std::min(context, hs[k - 1].pred.size()) : 0;
        const std::size_t after = k + 1 < hs.size() && hs[k + 1].kind == HunkKind::Equal ? std::min(context, hs[k + 1].pred.size()) : 0;
        Region r{{h.pred.begin - before, h.pred.end + after}, {h.succ.begin - before, h.succ.end + after}, {h}};
        if (!out.empty() && k >= 2 && hs[k - 1].kind == HunkKind::Equal && out.back().changes.back() == hs[k - 2] &&
            hs[k - 1].pred.size() < 2 * context) {
            auto& prev = out.back();
            prev.pred.end = r.pred.end;
            prev.succ.end = r.succ.end;
            prev.changes.push_back(h);
            continue;
        }
        out.push_back(std::move(r));
    }
    return out;
}

/// Source lines trimmed of surrounding whitespace. A trailing newline does
/// not start an extra line.
inline std::vector<std::string> split_lines(std::string_view text) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        auto line = text.substr(pos, nl - pos);
        const auto b = line.find_first_not_of(" \t\r\f\v");
        const auto e = line.find_last_not_of(" \t\r\f\v");
        out.emplace_back(b == std::string_view::npos ? std::string_view{} : line.substr(b, e - b + 1));
        pos = nl + 1;
    }
    return out;
}

inline DiffReport diff_sequences(const lineage::UpgradePair& pair, Granularity g, std::span<const std::string> pred,
                                 std::span<const std::string> succ) {
    DiffReport r{pair, g, diff_hunks(pred, succ), 0};
    r.lcs_length = equal_length(r.hunks);
    return r;
}

inline nlohmann::json to_json(const DiffReport& r) {
    nlohmann::json hunks = nlohmann::json::array();
    for (const auto& h : r.hunks) {
        hunks.push_back({{"kind", to_string(h.kind)},
                         {"pred", {h.pred.begin, h.pred.end}},
                         {"succ", {h.succ.begin, h.succ.end}}});
    }
    return {{"predecessor", r.pair.predecessor.str()},
            {"successor", r.pair.successor.str()},
            {"similarity", lineage::round6(r.pair.similarity.value_or(0.0))},
            {"granularity", to_string(r.granularity)},
            {"lcs_length", r.lcs_length},
            {"hunks", std::move(hunks)}};
}

inline DiffReport report_from_json(const nlohmann::json& j) {
    DiffReport r;
    auto pred = Address::parse(j.at("predecessor").get<std::string>());
    auto succ = Address::parse(j.at("successor").get<std::string>());
    if (!pred || !succ) throw Error(ErrorCode::SchemaViolation, "diff: bad address");
    r.pair = {*pred, *succ, j.at("similarity").get<double>(), false};
    r.granularity = j.at("granularity").get<std::string>() == "line" ? Granularity::Line : Granularity::NormalizedToken;
    r.lcs_length = j.at("lcs_length").get<std::size_t>();
    for (const auto& h : j.at("hunks")) {
        const auto kind = h.at("kind").get<std::string>();
        DiffHunk hk;
        hk.kind = kind == "equal" ? HunkKind::Equal
                  : kind == "delete" ? HunkKind::Delete
                  : kind == "insert" ? HunkKind::Insert
                                     : HunkKind::Replace;
        hk.pred = {h.at("pred")[0].get<std::size_t>(), h.at("pred")[1].get<std::size_t>()};
        hk.succ = {h.at("succ")[0].get<std::size_t>(), h.at("succ")[1].get<std::size_t>()};
        r.hunks.push_back(hk);
    }
    return r;
}

/// Unified-diff text with `context` lines around each change.
inline std::string unified(const DiffReport& r, std::span<const std::string> pred, std::span<const std::string> succ,
                           std::size_t context = 3) {
    std::ostringstream os;
    os << "--- " << r.pair.predecessor << '\n' << "+++ " << r.pair.successor << '\n';
    auto header = [](std::size_t begin, std::size_t len) {
        // Empty ranges name the line before them, as diff(1) does.
        return std::to_string(len == 0 ? begin : begin + 1) + "," + std::to_string(len);
    };
    for (const auto& region : changed_regions(r, context)) {
        os << "@@ -" << header(region.pred.begin, region.pred.size()) << " +" << header(region.succ.begin, region.succ.size())
           << " @@\n";
        std::size_t i = region.pred.begin, j = region.succ.begin;
        for (const auto& h : region.changes) {
            for (; i < h.pred.begin; ++i, ++j) os << ' ' << pred[i] << '\n';
            for (; i < h.pred.end; ++i) os << '-' << pred[i] << '\n';
            for (; j < h.succ.end; ++j) os << '+' << succ[j] << '\n';
        }
        for (; i < region.pred.end; ++i, ++j) os << ' ' << pred[i] << '\n';
    }
    return os.str();
}

} // namespace clineage::diff
