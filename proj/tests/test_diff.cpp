#include <algorithm>
#include <random>

#include <gtest/gtest.h>

#include "clineage/diff.hpp"
#include "support.hpp"

using namespace clineage;
using namespace clineage::diff;

namespace {

using Seq = std::vector<char>;

Seq S(std::string_view s) { return Seq(s.begin(), s.end()); }

bool is_subsequence(const Seq& sub, const Seq& s) {
    std::size_t k = 0;
    for (char c : s) {
        if (k < sub.size() && sub[k] == c) ++k;
    }
    return k == sub.size();
}

// Longest subsequence of `a` that is also a subsequence of `b`, by enumerating all 2^|a| masks.
std::size_t brute_lcs(const Seq& a, const Seq& b) {
    std::size_t best = 0;
    for (unsigned mask = 0; mask < (1u << a.size()); ++mask) {
        Seq sub;
        for (std::size_t i = 0; i < a.size(); ++i) {
            if (mask & (1u << i)) sub.push_back(a[i]);
        }
        if (sub.size() > best && is_subsequence(sub, b)) best = sub.size();
    }
    return best;
}

std::vector<Seq> all_sequences(std::size_t max_len, std::string_view alphabet) {
    std::vector<Seq> out = {{}};
    std::vector<Seq> frontier = {{}};
    for (std::size_t len = 1; len <= max_len; ++len) {
        std::vector<Seq> next;
        for (const auto& s : frontier) {
            for (char c : alphabet) {
                auto t = s;
                t.push_back(c);
                next.push_back(t);
            }
        }
        out.insert(out.end(), next.begin(), next.end());
        frontier = std::move(next);
    }
    return out;
}

Seq random_seq(std::mt19937_64& rng, std::size_t max_len, std::string_view alphabet) {
    Seq s(rng() % (max_len + 1));
    for (auto& c : s) c = alphabet[rng() % alphabet.size()];
    return s;
}

// Independent checks on a hunk list: tiling, equal-content, and cross reconstruction
// where equal content for `a` is taken from `b` and vice versa.
void check_hunks(const Seq& a, const Seq& b, const std::vector<DiffHunk>& hunks) {
    std::size_t i = 0, j = 0;
    Seq ra, rb;
    for (std::size_t k = 0; k < hunks.size(); ++k) {
        const auto& h = hunks[k];
        ASSERT_EQ(h.pred.begin, i);
        ASSERT_EQ(h.succ.begin, j);
        ASSERT_LE(h.pred.end, a.size());
        ASSERT_LE(h.succ.end, b.size());
        switch (h.kind) {
        case HunkKind::Equal:
            ASSERT_EQ(h.pred.size(), h.succ.size());
            ASSERT_GT(h.pred.size(), 0u);
            for (std::size_t t = 0; t < h.pred.size(); ++t) {
                ra.push_back(b[h.succ.begin + t]);
                rb.push_back(a[h.pred.begin + t]);
            }
            break;
        case HunkKind::Delete:
            ASSERT_TRUE(h.succ.empty());
            ASSERT_FALSE(h.pred.empty());
            ra.insert(ra.end(), a.begin() + h.pred.begin, a.begin() + h.pred.end);
            break;
        case HunkKind::Insert:
            ASSERT_TRUE(h.pred.empty());
            ASSERT_FALSE(h.succ.empty());
            rb.insert(rb.end(), b.begin() + h.succ.begin, b.begin() + h.succ.end);
            break;
        case HunkKind::Replace:
            ASSERT_FALSE(h.pred.empty());
            ASSERT_FALSE(h.succ.empty());
            ra.insert(ra.end(), a.begin() + h.pred.begin, a.begin() + h.pred.end);
            rb.insert(rb.end(), b.begin() + h.succ.begin, b.begin() + h.succ.end);
            break;
        }
        if (k > 0 && h.kind != HunkKind::Equal) ASSERT_EQ(hunks[k - 1].kind, HunkKind::Equal);
        i = h.pred.end;
        j = h.succ.end;
    }
    ASSERT_EQ(i, a.size());
    ASSERT_EQ(j, b.size());
    EXPECT_EQ(ra, a);
    EXPECT_EQ(rb, b);
}

// All alignments achieving the LCS length, as the list of matched indices in `a`.
void lcs_a_indices(const Seq& a, const Seq& b, std::size_t i, std::size_t j, std::vector<std::size_t>& cur,
                   std::vector<std::vector<std::size_t>>& out) {
    if (i == a.size() || j == b.size()) {
        out.push_back(cur);
        return;
    }
    lcs_a_indices(a, b, i + 1, j, cur, out);
    for (std::size_t k = j; k < b.size(); ++k) {
        if (a[i] != b[k]) continue;
        cur.push_back(i);
        lcs_a_indices(a, b, i + 1, k + 1, cur, out);
        cur.pop_back();
    }
}

} // namespace

TEST(Lcs, Examples) {
    EXPECT_EQ(lcs("ABCBDAB", "ABCBDAB"), "ABCBDAB");
    EXPECT_EQ(lcs("ABCBDAB", ""), "");
    EXPECT_EQ(lcs("", ""), "");
    EXPECT_EQ(lcs("ABCBDAB", "BDCABA").size(), 4u);
    EXPECT_EQ(brute_lcs(S("BDCABA"), S("ABCBDAB")), 4u);
    EXPECT_TRUE(is_subsequence(S(lcs("ABCBDAB", "BDCABA")), S("ABCBDAB")));
    EXPECT_TRUE(is_subsequence(S(lcs("ABCBDAB", "BDCABA")), S("BDCABA")));
}

TEST(Lcs, WorksOnStrings) {
    std::vector<std::string> a = {"uint", "ID", "=", "NUM"};
    std::vector<std::string> b = {"uint", "ID", "=", "ID", "msg.sender"};
    EXPECT_EQ(lcs(a, b), (std::vector<std::string>{"uint", "ID", "="}));
    EXPECT_EQ(lcs_length(a, b), 3u);
}

// Exhaustive oracle on short sequences; the acceptance binary covers length 8.
TEST(Lcs, MatchesBruteForceExhaustive) {
    const auto seqs = all_sequences(5, "abc");
    for (const auto& a : seqs) {
        for (const auto& b : seqs) {
            const auto want = brute_lcs(a, b);
            const auto got = lcs(a, b);
            ASSERT_EQ(got.size(), want);
            ASSERT_EQ(lcs_length(a, b), want);
            ASSERT_TRUE(is_subsequence(got, a) && is_subsequence(got, b));
        }
    }
}

// Property: among all longest alignments, the returned one has the
// lexicographically smallest index list in `a`.
TEST(Lcs, EarliestMatchesInA) {
    const auto seqs = all_sequences(4, "ab");
    for (const auto& a : seqs) {
        for (const auto& b : seqs) {
            std::vector<std::vector<std::size_t>> all;
            std::vector<std::size_t> cur;
            lcs_a_indices(a, b, 0, 0, cur, all);
            const std::size_t best = std::max_element(all.begin(), all.end(), [](auto& x, auto& y) {
                                         return x.size() < y.size();
                                     })->size();
            std::vector<std::vector<std::size_t>> longest;
            for (auto& x : all) {
                if (x.size() == best) longest.push_back(x);
            }
            const auto want = *std::min_element(longest.begin(), longest.end());
            std::vector<std::size_t> got;
            for (auto [i, j] : align(std::span<const char>(a), std::span<const char>(b))) got.push_back(i);
            ASSERT_EQ(got, want) << std::string(a.begin(), a.end()) << " / " << std::string(b.begin(), b.end());
        }
    }
}

TEST(Lcs, Properties) {
    std::mt19937_64 rng(21);
    for (int round = 0; round < 2000; ++round) {
        auto a = random_seq(rng, 12, "abcd");
        auto b = random_seq(rng, 12, "abcd");
        const auto n = lcs_length(a, b);
        EXPECT_EQ(n, lcs_length(b, a));
        EXPECT_LE(n, std::min(a.size(), b.size()));
        EXPECT_EQ(n == std::min(a.size(), b.size()), is_subsequence(a.size() <= b.size() ? a : b, a.size() <= b.size() ? b : a));
    }
}

TEST(Lcs, HirschbergAgreesWithTable) {
    std::mt19937_64 rng(4);
    for (int round = 0; round < 300; ++round) {
        std::vector<std::uint32_t> a(rng() % 60), b(rng() % 60);
        for (auto& x : a) x = static_cast<std::uint32_t>(rng() % 4);
        for (auto& x : b) x = static_cast<std::uint32_t>(rng() % 4);
        Alignment al;
        detail::align_hirschberg(a, b, 0, 0, al);
        ASSERT_EQ(al.size(), lcs_length(a, b));
        for (std::size_t k = 0; k < al.size(); ++k) {
            ASSERT_EQ(a[al[k].first], b[al[k].second]);
            if (k > 0) ASSERT_TRUE(al[k].first > al[k - 1].first && al[k].second > al[k - 1].second);
        }
    }
}

TEST(Substring, Contiguous) {
    auto a = S("xabcdy"), b = S("zzabcqq");
    EXPECT_EQ(longest_common_substring(std::span<const char>(a), std::span<const char>(b)), S("abc"));
    auto c = S("abXcd"), d = S("cdYab");
    EXPECT_EQ(longest_common_substring(std::span<const char>(c), std::span<const char>(d)), S("ab"));
    auto e = S("");
    EXPECT_TRUE(longest_common_substring(std::span<const char>(a), std::span<const char>(e)).empty());
}

TEST(Hunks, Examples) {
    auto same = diff_hunks(S("pqr"), S("pqr"));
    ASSERT_EQ(same.size(), 1u);
    EXPECT_EQ(same[0], (DiffHunk{HunkKind::Equal, {0, 3}, {0, 3}}));

    auto del = diff_hunks(S("pq"), S(""));
    ASSERT_EQ(del.size(), 1u);
    EXPECT_EQ(del[0], (DiffHunk{HunkKind::Delete, {0, 2}, {0, 0}}));

    auto rep = diff_hunks(S("pqr"), S("pxr"));
    const std::vector<DiffHunk> expected = {{HunkKind::Equal, {0, 1}, {0, 1}},
                                            {HunkKind::Replace, {1, 2}, {1, 2}},
                                            {HunkKind::Equal, {2, 3}, {2, 3}}};
    EXPECT_EQ(rep, expected);
    EXPECT_TRUE(diff_hunks(S(""), S("")).empty());
}

// Property: hunks tile both inputs and reconstruct them exactly.
TEST(Hunks, RoundTripRandom) {
    std::mt19937_64 rng(99);
    for (int round = 0; round < 1000; ++round) {
        auto a = random_seq(rng, 20, "abc");
        auto b = random_seq(rng, 20, "abc");
        auto hunks = diff_hunks(a, b);
        check_hunks(a, b, hunks);
        EXPECT_EQ(equal_length(hunks), lcs_length(a, b));
        EXPECT_EQ(reconstruct<char>(hunks, a, b, true), a);
        EXPECT_EQ(reconstruct<char>(hunks, a, b, false), b);
    }
}

TEST(Regions, Examples) {
    DiffReport only_equal;
    only_equal.hunks = diff_hunks(S("abc"), S("abc"));
    EXPECT_TRUE(changed_regions(only_equal, 3).empty());

    DiffReport one;
    one.hunks = diff_hunks(S("pqr"), S("pxr"));
    auto r0 = changed_regions(one, 0);
    ASSERT_EQ(r0.size(), 1u);
    EXPECT_EQ(r0[0].pred, (Range{1, 2}));
    EXPECT_EQ(r0[0].succ, (Range{1, 2}));

    // Two changes separated by 3 equal symbols: merged at context 2 (3 < 4), split at context 1 (3 >= 2).
    DiffReport two;
    two.hunks = diff_hunks(S("aXbcdYe"), S("aZbcdWe"));
    ASSERT_EQ(two.hunks.size(), 5u);
    auto merged = changed_regions(two, 2);
    ASSERT_EQ(merged.size(), 1u);
    EXPECT_EQ(merged[0].changes.size(), 2u);
    EXPECT_EQ(merged[0].pred, (Range{0, 7}));
    auto split = changed_regions(two, 1);
    ASSERT_EQ(split.size(), 2u);
    EXPECT_EQ(split[0].pred, (Range{0, 3}));
    EXPECT_EQ(split[1].pred, (Range{4, 7}));
}

TEST(Lines, SplitAndTrim) {
    EXPECT_EQ(split_lines("  a \n\tb\n"), (std::vector<std::string>{"a", "b"}));
    EXPECT_EQ(split_lines("a\n\nb"), (std::vector<std::string>{"a", "", "b"}));
    EXPECT_TRUE(split_lines("").empty());
}

TEST(Report, JsonRoundTripAndUnified) {
    const auto pred = split_lines(testsupport::read_sol("victim_v1.sol"));
    const auto succ = split_lines(testsupport::read_sol("victim_v2.sol"));
    lineage::UpgradePair pair{*Address::parse(testsupport::addr(1)), *Address::parse(testsupport::addr(2)), 0.75, false};
    auto r = diff_sequences(pair, Granularity::Line, pred, succ);
    EXPECT_EQ(r.lcs_length, lcs_length(pred, succ));
    auto j = to_json(r);
    EXPECT_EQ(j["granularity"], "line");
    auto back = report_from_json(j);
    EXPECT_EQ(back.hunks, r.hunks);
    EXPECT_EQ(back.lcs_length, r.lcs_length);
    EXPECT_EQ(to_json(back), j);

    const auto text = unified(r, pred, succ);
    EXPECT_EQ(text.rfind("--- " + pair.predecessor.str() + "\n+++ " + pair.successor.str() + "\n@@ -", 0), 0u);
    // Applying the unified text's +/- lines to pred yields succ.
    std::vector<std::string> minus, plus;
    std::istringstream in(text);
    std::string line;
    std::getline(in, line);
    std::getline(in, line);
    while (std::getline(in, line)) {
        if (line.starts_with("@@")) continue;
        if (line[0] != '+') minus.push_back(line.substr(1));
        if (line[0] != '-') plus.push_back(line.substr(1));
    }
    std::size_t changed_pred = 0, changed_succ = 0;
    for (const auto& h : r.hunks) {
        if (h.kind != HunkKind::Equal) {
            changed_pred += h.pred.size();
            changed_succ += h.succ.size();
        }
    }
    EXPECT_GE(minus.size(), changed_pred);
    EXPECT_GE(plus.size(), changed_succ);
}

TEST(Report, UnifiedHeaders) {
    std::vector<std::string> a = {"x", "y", "z"}, b = {"x", "z"};
    lineage::UpgradePair pair{*Address::parse(testsupport::addr(1)), *Address::parse(testsupport::addr(2)), 1.0, false};
    auto r = diff_sequences(pair, Granularity::Line, a, b);
    const std::string expected = "--- " + pair.predecessor.str() + "\n+++ " + pair.successor.str() +
                                 "\n@@ -1,3 +1,2 @@\n x\n-y\n z\n";
    EXPECT_EQ(unified(r, a, b), expected);
    EXPECT_EQ(unified(r, a, b, 0), "--- " + pair.predecessor.str() + "\n+++ " + pair.successor.str() +
                                       "\n@@ -2,1 +1,0 @@\n-y\n");
}
