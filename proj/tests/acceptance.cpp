// One PASS/FAIL line per acceptance criterion; exits nonzero if any fails.

#include <algorithm>
#include <array>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include "clineage/cli.hpp"
#include "clineage/clineage.hpp"
#include "support.hpp"

using namespace clineage;
using testsupport::TempDir;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool ok = true;
    std::string detail;

    void fail(const std::string& why) {
        if (ok) detail = why;
        ok = false;
    }
};

int failures = 0;

void criterion(const std::string& name, double budget_s, const std::function<void(Outcome&)>& body) {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        body(o);
    } catch (const std::exception& e) {
        o.fail(std::string("exception: ") + e.what());
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (o.ok && s >= budget_s) o.fail("over time budget");
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2fs / %.0fs", s, budget_s);
    std::cout << (o.ok ? "PASS " : "FAIL ") << name << " [" << buf << "]";
    if (!o.detail.empty()) std::cout << " " << o.detail;
    std::cout << std::endl;
    if (!o.ok) ++failures;
}

Address A(unsigned n) { return *Address::parse(testsupport::addr(n)); }

int run_cli(std::vector<std::string> args) {
    args.insert(args.begin(), "clineage");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    return cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
}

std::string fixture(const char* name) { return (testsupport::fixture_dir() / name).string(); }

bool pipeline(const fs::path& out) {
    return run_cli({"--seed", "42", "pipeline", "run", "--contracts", fixture("contracts.json"), "--txs",
                    fixture("transactions.json"), "--out", out.string()}) == 0;
}

// ---- criteria ---------------------------------------------------------------

void pair_oracle(Outcome& o) {
    corpus::Corpus c;
    const std::vector<std::pair<std::string, bool>> members = {{"a", false}, {"b", true}, {"c", false}, {"d", true}, {"e", false}};
    // Inserted out of time order on purpose.
    for (std::size_t i : {3u, 0u, 4u, 1u, 2u}) {
        corpus::ContractRecord r;
        r.address = A(static_cast<unsigned>(100 - i));  // address order opposes time order
        r.name = members[i].first;
        r.is_destructed = members[i].second;
        r.creator = A(7);
        r.created_at = {10 * (i + 1), 0, 0};
        c.contracts.emplace(r.address, r);
    }
    std::set<std::pair<std::string, std::string>> got;
    for (const auto& g : lineage::filter_groups(lineage::group_by_creator(c))) {
        for (const auto& p : lineage::candidate_pairs(g)) got.emplace(c.find(p.predecessor)->name, c.find(p.successor)->name);
    }
    const std::set<std::pair<std::string, std::string>> want = {{"b", "c"}, {"b", "d"}, {"b", "e"}, {"d", "e"}};
    if (got != want) o.fail("pair set differs, got " + std::to_string(got.size()) + " pairs");
}

void rename_chain(Outcome& o) {
    const std::vector<std::string> names = {"victim_v1.sol", "payout_v1.sol", "token_v2.sol", "registry.sol", "kill_switch.sol"};
    std::vector<sol::NormalizedTokenSequence> docs;
    for (const auto& n : names) docs.push_back(sol::normalize_source(testsupport::read_sol(n)));
    embed::EmbedConfig cfg;
    cfg.seed = 42;
    const auto model = embed::train(docs, cfg);

    std::mt19937_64 rng(42);
    double worst = 0.0;
    std::size_t checked = 0;
    for (std::size_t f = 0; f < names.size(); ++f) {
        const std::string original = testsupport::read_sol(names[f]);
        for (int k = 0; k < 50; ++k) {
            const std::string rewritten = testsupport::rewrite_source(original, rng);
            if (rewritten == original) {
                o.fail(names[f] + ": rewrite changed nothing");
                return;
            }
            const auto norm = sol::normalize_source(rewritten);
            if (norm.tokens != docs[f].tokens) {
                o.fail(names[f] + ": normalized sequence differs after rewrite " + std::to_string(k));
                return;
            }
            std::map<Address, sol::NormalizedTokenSequence> by_addr = {{A(1), docs[f]}, {A(2), norm}};
            std::vector<lineage::CandidatePair> cands = {{A(1), A(2), std::nullopt, false}};
            auto scored = lineage::score_pairs(cands, model, by_addr);
            if (scored.size() != 1 || !scored[0].similarity) {
                o.fail(names[f] + ": pair not scored");
                return;
            }
            worst = std::max(worst, std::abs(*scored[0].similarity - 1.0));
            ++checked;
        }
    }
    if (worst > 1e-9) o.fail("max |similarity - 1| = " + std::to_string(worst));
    if (o.ok) o.detail = std::to_string(checked) + " rewrites";
}

void threshold(Outcome& o) {
    std::vector<lineage::CandidatePair> pairs = {{A(1), A(2), 0.60, false}, {A(3), A(4), 0.61, false}};
    const auto kept = lineage::filter_threshold(pairs, lineage::LineageConfig{});
    if (kept.size() != 1 || kept[0].predecessor != A(3)) o.fail("expected only the 0.61 pair");
}

/// Every sequence over {0,1,2} of length <= kMaxLen, ordered by length.
constexpr std::size_t kMaxLen = 8;

void lcs_oracle(Outcome& o) {
    std::vector<std::vector<std::uint8_t>> seqs;
    std::array<std::size_t, kMaxLen + 2> offset{};
    for (std::size_t len = 0; len <= kMaxLen; ++len) {
        offset[len] = seqs.size();
        std::size_t count = 1;
        for (std::size_t i = 0; i < len; ++i) count *= 3;
        for (std::size_t v = 0; v < count; ++v) {
            std::vector<std::uint8_t> s(len);
            std::size_t x = v;
            for (std::size_t i = len; i-- > 0;) {
                s[i] = static_cast<std::uint8_t>(x % 3);
                x /= 3;
            }
            seqs.push_back(std::move(s));
        }
    }
    offset[kMaxLen + 1] = seqs.size();
    const std::size_t n = seqs.size();
    const std::size_t words = (n + 63) / 64;

    // Brute force: the set of all subsequences of each sequence, as a bitset
    // over sequence ids. A common subsequence of maximum length is the highest
    // id in the intersection.
    std::vector<std::uint64_t> subs(n * words, 0);
    for (std::size_t id = 0; id < n; ++id) {
        const auto& s = seqs[id];
        for (std::uint32_t mask = 0; mask < (1u << s.size()); ++mask) {
            std::size_t v = 0;
            for (std::size_t i = 0; i < s.size(); ++i) {
                if (mask >> i & 1) v = v * 3 + s[i];
            }
            const std::size_t sid = offset[static_cast<std::size_t>(std::popcount(mask))] + v;
            subs[id * words + sid / 64] |= std::uint64_t{1} << (sid % 64);
        }
    }
    auto length_of = [&](std::size_t sid) {
        return static_cast<std::size_t>(std::upper_bound(offset.begin(), offset.end(), sid) - offset.begin() - 1);
    };

    std::size_t pairs = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint64_t* a = &subs[i * words];
        const std::span<const std::uint8_t> sa(seqs[i]);
        for (std::size_t j = 0; j < n; ++j) {
            const std::uint64_t* b = &subs[j * words];
            std::size_t w = words;
            std::uint64_t hit = 0;
            while (w-- > 0 && !(hit = a[w] & b[w])) {}
            const std::size_t brute = length_of(w * 64 + 63 - static_cast<std::size_t>(std::countl_zero(hit)));
            const std::size_t dp = diff::lcs_length(sa, std::span<const std::uint8_t>(seqs[j]));
            if (dp != brute) {
                o.fail("length mismatch at pair " + std::to_string(i) + "," + std::to_string(j));
                return;
            }
            ++pairs;
        }
    }

    // The alignment itself: a valid common subsequence of the oracle length.
    std::size_t aligned = 0;
    for (std::size_t i = 0; i < offset[7]; ++i) {
        for (std::size_t j = 0; j < offset[7]; ++j) {
            const std::span<const std::uint8_t> sa(seqs[i]), sb(seqs[j]);
            const auto al = diff::align(sa, sb);
            bool valid = al.size() == diff::lcs_length(sa, sb);
            for (std::size_t k = 0; valid && k < al.size(); ++k) {
                const auto [x, y] = al[k];
                valid = x < sa.size() && y < sb.size() && sa[x] == sb[y] &&
                        (k == 0 || (x > al[k - 1].first && y > al[k - 1].second));
            }
            if (!valid) {
                o.fail("invalid alignment at pair " + std::to_string(i) + "," + std::to_string(j));
                return;
            }
            ++aligned;
        }
    }

    // Hunk round trip on random pairs.
    std::mt19937_64 rng(42);
    for (int round = 0; round < 1000; ++round) {
        const std::size_t alphabet = 2 + rng() % 6;
        auto random_seq = [&] {
            std::vector<std::string> s(rng() % 120);
            for (auto& x : s) x = std::string(1, static_cast<char>('a' + rng() % alphabet));
            return s;
        };
        auto a = random_seq();
        auto b = a;
        if (round % 2 == 0) {
            b = random_seq();
        } else {
            for (std::size_t e = rng() % 10; e-- > 0;) {
                const std::size_t at = b.empty() ? 0 : rng() % (b.size() + 1);
                if (rng() % 2 && at < b.size()) b.erase(b.begin() + static_cast<std::ptrdiff_t>(at));
                else b.insert(b.begin() + static_cast<std::ptrdiff_t>(at), std::string(1, 'z'));
            }
        }
        const auto hunks = diff::diff_hunks(a, b);
        std::vector<std::string> ra, rb, from_a;
        for (const auto& h : hunks) {
            ra.insert(ra.end(), a.begin() + static_cast<std::ptrdiff_t>(h.pred.begin), a.begin() + static_cast<std::ptrdiff_t>(h.pred.end));
            rb.insert(rb.end(), b.begin() + static_cast<std::ptrdiff_t>(h.succ.begin), b.begin() + static_cast<std::ptrdiff_t>(h.succ.end));
            if (h.kind == diff::HunkKind::Equal) {
                from_a.insert(from_a.end(), a.begin() + static_cast<std::ptrdiff_t>(h.pred.begin), a.begin() + static_cast<std::ptrdiff_t>(h.pred.end));
            } else {
                from_a.insert(from_a.end(), b.begin() + static_cast<std::ptrdiff_t>(h.succ.begin), b.begin() + static_cast<std::ptrdiff_t>(h.succ.end));
            }
        }
        if (ra != a || rb != b || from_a != b || diff::equal_length(hunks) != diff::lcs_length(a, b)) {
            o.fail("hunk round trip failed on random pair " + std::to_string(round));
            return;
        }
    }
    o.detail = std::to_string(pairs) + " exhaustive pairs, " + std::to_string(aligned) + " alignments, 1000 round trips";
}

void detector_golden(Outcome& o) {
    auto c = corpus::load_corpus(fixture("contracts.json"), fixture("transactions.json"));
    auto golden = nlohmann::json::parse(read_file(fixture("golden_findings.json")));
    std::multiset<std::tuple<std::string, std::string, std::uint32_t, std::string>> want, got;
    for (const auto& g : golden) want.emplace(g["contract"], g["detector"], g["line"], g["subtype"]);
    for (const auto& [addr, rec] : c.contracts) {
        for (const auto& f : detect::run_all(sol::parse_source(rec.source), addr)) {
            got.emplace(f.contract.str(), std::string(detect::to_string(f.detector)), f.line, f.subtype);
        }
    }
    std::size_t fp = 0, fn = 0;
    for (const auto& g : got) fp += want.count(g) == 0;
    for (const auto& w : want) fn += got.count(w) == 0;
    if (got != want) o.fail(std::to_string(fp) + " false positives, " + std::to_string(fn) + " false negatives");
    for (const auto& f : detect::run_all(sol::parse_source(testsupport::read_sol("victim_v2.sol")))) {
        if (f.snippet.find("//good") != std::string::npos) o.fail("finding on the //good line");
    }
    if (o.ok) o.detail = std::to_string(want.size()) + " golden findings";
}

void embedding_determinism(Outcome& o) {
    TempDir a, b;
    for (const TempDir* d : {&a, &b}) {
        const auto ws = d->path().string();
        if (run_cli({"-w", ws, "ingest", "--contracts", fixture("contracts.json"), "--txs", fixture("transactions.json")}) != 0 ||
            run_cli({"-w", ws, "normalize"}) != 0 || run_cli({"-w", ws, "--seed", "42", "train"}) != 0) {
            o.fail("training run failed");
            return;
        }
    }
    const std::string bytes = read_file((a / workspace::files::kModel).string());
    if (bytes != read_file((b / workspace::files::kModel).string())) o.fail("model files differ");
    const auto model = embed::deserialize_model(bytes);
    if (!model.all_finite()) o.fail("non-finite parameter");
    auto c = corpus::load_corpus(fixture("contracts.json"), fixture("transactions.json"));
    double worst = 0.0;
    for (const auto& [addr, rec] : c.contracts) {
        const auto doc = sol::normalize_source(rec.source, addr);
        if (doc.tokens.empty()) continue;
        const auto v = embed::doc_vector(model, doc);
        if (!std::all_of(v.values.begin(), v.values.end(), [](double x) { return std::isfinite(x); })) o.fail("non-finite doc vector");
        worst = std::max(worst, std::abs(embed::cosine(v.values, v.values) - 1.0));
    }
    for (const auto& w : model.words()) {
        const auto v = embed::token_vector(model, w);
        if (!std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); })) o.fail("non-finite token vector " + w);
    }
    if (worst > 1e-9) o.fail("self-cosine off by " + std::to_string(worst));
}

void triage_protocol(Outcome& o) {
    std::vector<lineage::UpgradePair> pairs;
    for (unsigned i = 0; i < 10; ++i) pairs.push_back({A(2 * i + 1), A(2 * i + 2), 0.9, false});
    auto s = triage::create_session(pairs, 42, 0.20);
    std::vector<std::string> first;
    for (const auto& c : s.cards) {
        if (c.iteration == 1) first.push_back(c.id);
    }
    if (first.size() != 2) o.fail(std::to_string(first.size()) + " iteration-1 cards");
    for (int rerun = 0; rerun < 5; ++rerun) {
        std::vector<std::string> again;
        for (const auto& c : triage::create_session(pairs, 42, 0.20).cards) {
            if (c.iteration == 1) again.push_back(c.id);
        }
        if (again != first) o.fail("sample differs across reruns");
    }

    auto blocked = [&] {
        try {
            triage::advance_phase(s, "alice");
        } catch (const Error& e) {
            return e.code() == ErrorCode::UnresolvedCards;
        }
        return false;
    };
    if (!blocked()) o.fail("advanced with no card resolved");
    const auto cat = triage::create_category(s, "Access control", "", "alice");
    triage::label_card(s, first[0], cat, "alice");
    if (!blocked()) o.fail("advanced with one iteration-1 card open");
    triage::exclude_card(s, first[1], "not an upgrade", "bob");
    triage::advance_phase(s, "alice");
    const auto cat2 = triage::create_category(s, "Reentrancy fix", "", "bob");
    std::string last;
    for (const auto& c : std::vector<triage::Card>(s.cards)) {
        if (c.iteration != 2) continue;
        triage::label_card(s, c.id, c.id.back() % 2 ? cat : cat2, "bob");
        last = c.id;
    }
    triage::exclude_card(s, last, "duplicate deployment", "carol");  // relabel
    triage::advance_phase(s, "alice");
    if (s.phase != triage::Phase::Complete) o.fail("session not complete");

    const auto replayed = triage::replay(triage::initial_state(s), s.audit_log);
    if (triage::to_json(replayed) != triage::to_json(s)) o.fail("replay differs from final state");
    if (o.ok) o.detail = "sample {" + first[0] + ", " + first[1] + "}, " + std::to_string(s.audit_log.size()) + " audit entries replayed";
}

void end_to_end(Outcome& o) {
    TempDir a, b;
    if (!pipeline(a.path()) || !pipeline(b.path())) {
        o.fail("pipeline run failed");
        return;
    }
    for (const char* f : {workspace::files::kPairs, workspace::files::kFindings, workspace::files::kDiffs,
                          workspace::files::kPatch, workspace::files::kDeltas}) {
        if (read_file((a / f).string()) != read_file((b / f).string())) o.fail(std::string(f) + " differs");
    }
    const auto pairs = nlohmann::json::parse(read_file((a / workspace::files::kPairs).string()));
    if (pairs.empty()) o.fail("no pairs produced");
    if (o.ok) o.detail = std::to_string(pairs.size()) + " pairs";
}

} // namespace

int main() {
    criterion("pair-generation oracle", 1, pair_oracle);
    criterion("rename-chain invariance", 30, rename_chain);
    criterion("threshold semantics", 1, threshold);
    criterion("LCS oracle equivalence and hunk round trip", 120, lcs_oracle);
    criterion("detector golden suite", 30, detector_golden);
    criterion("embedding determinism and sanity", 60, embedding_determinism);
    criterion("triage protocol", 5, triage_protocol);
    criterion("end-to-end determinism", 60, end_to_end);
    std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
    return failures == 0 ? 0 : 1;
}
