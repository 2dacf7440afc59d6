#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <fcntl.h>
#include <unistd.h>

#include <json.hpp>

#include "clineage/detect.hpp"
#include "clineage/error.hpp"
#include "clineage/hash.hpp"
#include "clineage/lineage.hpp"

namespace clineage::triage {

using nlohmann::json;

enum class Phase { Iteration1, Iteration2, Complete };

inline std::string_view to_string(Phase p) {
    switch (p) {
    case Phase::Iteration1: return "iteration1";
    case Phase::Iteration2: return "iteration2";
    case Phase::Complete: return "complete";
    }
    return "?";
}

inline Phase phase_from_string(std::string_view s) {
    if (s == "iteration1") return Phase::Iteration1;
    if (s == "iteration2") return Phase::Iteration2;
    if (s == "complete") return Phase::Complete;
    throw Error(ErrorCode::SchemaViolation, "session: unknown phase " + std::string(s));
}

struct CardState {
    enum class Kind { Unlabeled, Labeled, Excluded };
    Kind kind = Kind::Unlabeled;
    std::string category_id;  // Labeled
    std::string reason;       // Excluded

    friend bool operator==(const CardState&, const CardState&) = default;
};

inline std::string_view to_string(CardState::Kind k) {
    switch (k) {
    case CardState::Kind::Unlabeled: return "unlabeled";
    case CardState::Kind::Labeled: return "labeled";
    case CardState::Kind::Excluded: return "excluded";
    }
    return "?";
}

struct Card {
    std::string id;
    lineage::UpgradePair pair;
    detect::PairFindingDelta deltas;
    int iteration = 2;
    CardState state;

    bool resolved() const { return state.kind != CardState::Kind::Unlabeled; }
};

struct Category {
    std::string id;
    std::string title;
    std::string description;
    int created_in_iteration = 1;

    friend bool operator==(const Category&, const Category&) = default;
};

struct AuditEntry {
    std::string timestamp;
    std::string actor;
    json action;

    friend bool operator==(const AuditEntry&, const AuditEntry&) = default;
};

using Clock = std::function<std::string()>;

/// UTC wall clock, ISO 8601 with seconds.
inline std::string utc_now() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

struct TriageSession {
    std::uint64_t seed = 0;
    double sample_fraction = 0.20;
    Phase phase = Phase::Iteration1;
    std::vector<Card> cards;
    std::vector<Category> categories;
    std::vector<AuditEntry> audit_log;
    /// Bumped on every mutation; clients echo it to detect stale writes.
    std::uint64_t revision = 0;
    Clock clock = utc_now;

    const Card* find_card(std::string_view id) const {
        for (const auto& c : cards) {
            if (c.id == id) return &c;
        }
        return nullptr;
    }
    const Category* find_category(std::string_view id) const {
        for (const auto& c : categories) {
            if (c.id == id) return &c;
        }
        return nullptr;
    }
};

inline constexpr double kDefaultSampleFraction = 0.20;

/// max(1, round(fraction * n)) for n >= 1.
inline std::size_t sample_size(std::size_t n, double fraction) {
    if (n == 0) return 0;
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n))));
}

inline std::string card_id(std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "card-%04zu", index + 1);
    return buf;
}

/// Indices of the iteration-1 sample: a seeded partial Fisher-Yates shuffle.
inline std::vector<std::size_t> sample_indices(std::size_t n, double fraction, std::uint64_t seed) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(derive_seed(seed, "triage"));
    const std::size_t k = sample_size(n, fraction);
    for (std::size_t i = 0; i < k; ++i) {
        std::swap(idx[i], idx[i + rng.below(n - i)]);
    }
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    return idx;
}

inline TriageSession create_session(std::span<const lineage::UpgradePair> pairs, std::uint64_t seed,
                                    double sample_fraction = kDefaultSampleFraction,
                                    std::span<const detect::PairFindingDelta> deltas = {}) {
    if (pairs.empty()) throw Error(ErrorCode::NoPairs, "no upgrade pairs to sort");
    if (!(sample_fraction > 0.0 && sample_fraction < 1.0)) {
        throw Error(ErrorCode::BadFraction, "sample fraction must be within (0, 1)");
    }
    TriageSession s;
    s.seed = seed;
    s.sample_fraction = sample_fraction;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        Card c;
        c.id = card_id(i);
        c.pair = pairs[i];
        c.deltas.pair = pairs[i];
        for (const auto& d : deltas) {
            if (d.pair.predecessor == pairs[i].predecessor && d.pair.successor == pairs[i].successor) {
                c.deltas = d;
                c.deltas.pair = pairs[i];
                break;
            }
        }
        s.cards.push_back(std::move(c));
    }
    for (std::size_t i : sample_indices(pairs.size(), sample_fraction, seed)) s.cards[i].iteration = 1;
    return s;
}

namespace detail {

inline Card& card_or_throw(TriageSession& s, std::string_view id) {
    for (auto& c : s.cards) {
        if (c.id == id) return c;
    }
    throw Error(ErrorCode::UnknownCard, std::string(id));
}

inline void check_card_phase(const TriageSession& s, const Card& c) {
    if (s.phase == Phase::Complete) throw Error(ErrorCode::PhaseViolation, "session is complete");
    const int current = s.phase == Phase::Iteration1 ? 1 : 2;
    if (c.iteration != current) {
        throw Error(ErrorCode::PhaseViolation,
                    c.id + " belongs to iteration " + std::to_string(c.iteration) + ", phase is " + std::string(to_string(s.phase)));
    }
}

inline json state_json(const CardState& st) {
    json j = {{"kind", to_string(st.kind)}};
    if (st.kind == CardState::Kind::Labeled) j["category_id"] = st.category_id;
    if (st.kind == CardState::Kind::Excluded) j["reason"] = st.reason;
    return j;
}

inline CardState state_from_json(const json& j) {
    CardState st;
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "labeled") {
        st.kind = CardState::Kind::Labeled;
        st.category_id = j.at("category_id").get<std::string>();
    } else if (kind == "excluded") {
        st.kind = CardState::Kind::Excluded;
        st.reason = j.at("reason").get<std::string>();
    } else if (kind != "unlabeled") {
        throw Error(ErrorCode::SchemaViolation, "session: unknown card state " + kind);
    }
    return st;
}

inline void record(TriageSession& s, std::string actor, json action) {
    s.audit_log.push_back({s.clock(), std::move(actor), std::move(action)});
    ++s.revision;
}

inline std::string trim(std::string_view v) {
    const auto b = v.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = v.find_last_not_of(" \t\r\n");
    return std::string(v.substr(b, e - b + 1));
}

} // namespace detail

inline void label_card(TriageSession& s, std::string_view card, std::string_view category, std::string actor) {
    Card& c = detail::card_or_throw(s, card);
    if (!s.find_category(category)) throw Error(ErrorCode::UnknownCategory, std::string(category));
    detail::check_card_phase(s, c);
    json action = {{"op", "label"}, {"card", c.id}, {"category_id", category}, {"previous", detail::state_json(c.state)}};
    c.state = {CardState::Kind::Labeled, std::string(category), {}};
    detail::record(s, std::move(actor), std::move(action));
}

inline void exclude_card(TriageSession& s, std::string_view card, std::string_view reason, std::string actor) {
    Card& c = detail::card_or_throw(s, card);
    const std::string why = detail::trim(reason);
    if (why.empty()) throw Error(ErrorCode::EmptyReason, c.id);
    detail::check_card_phase(s, c);
    json action = {{"op", "exclude"}, {"card", c.id}, {"reason", why}, {"previous", detail::state_json(c.state)}};
    c.state = {CardState::Kind::Excluded, {}, why};
    detail::record(s, std::move(actor), std::move(action));
}

/// Returns the new category id.
inline std::string create_category(TriageSession& s, std::string_view title, std::string_view description, std::string actor) {
    if (s.phase == Phase::Complete) throw Error(ErrorCode::SessionComplete, "cannot add categories");
    const std::string t = detail::trim(title);
    if (t.empty()) throw Error(ErrorCode::EmptyTitle, "category title is empty");
    for (const auto& c : s.categories) {
        if (c.title == t) throw Error(ErrorCode::DuplicateTitle, t);
    }
    Category cat{"cat-" + std::to_string(s.categories.size() + 1), t, std::string(description),
                 s.phase == Phase::Iteration1 ? 1 : 2};
    s.categories.push_back(cat);
    detail::record(s, std::move(actor),
                   {{"op", "create_category"}, {"category_id", cat.id}, {"title", cat.title}, {"description", cat.description}});
    return cat.id;
}

inline std::size_t unresolved(const TriageSession& s, std::optional<int> iteration) {
    return static_cast<std::size_t>(std::count_if(s.cards.begin(), s.cards.end(), [&](const Card& c) {
        return !c.resolved() && (!iteration || c.iteration == *iteration);
    }));
}

inline void advance_phase(TriageSession& s, std::string actor = "system") {
    if (s.phase == Phase::Complete) throw Error(ErrorCode::SessionComplete, "already complete");
    const std::size_t open = s.phase == Phase::Iteration1 ? unresolved(s, 1) : unresolved(s, std::nullopt);
    if (open > 0) throw Error(ErrorCode::UnresolvedCards, std::to_string(open));
    const Phase from = s.phase;
    s.phase = from == Phase::Iteration1 ? Phase::Iteration2 : Phase::Complete;
    detail::record(s, std::move(actor), {{"op", "advance"}, {"from", to_string(from)}, {"to", to_string(s.phase)}});
}

/// The session as created: same cards and sample, no decisions.
inline TriageSession initial_state(const TriageSession& s) {
    TriageSession fresh;
    fresh.seed = s.seed;
    fresh.sample_fraction = s.sample_fraction;
    fresh.cards = s.cards;
    for (auto& c : fresh.cards) c.state = {};
    fresh.clock = s.clock;
    return fresh;
}

/// Re-applies audit entries through the public operations, keeping the
/// recorded timestamps.
inline TriageSession replay(const TriageSession& initial, std::span<const AuditEntry> log) {
    TriageSession s = initial;
    for (const auto& e : log) {
        const std::string stamp = e.timestamp;
        s.clock = [stamp] { return stamp; };
        const auto op = e.action.at("op").get<std::string>();
        if (op == "label") {
            label_card(s, e.action.at("card").get<std::string>(), e.action.at("category_id").get<std::string>(), e.actor);
        } else if (op == "exclude") {
            exclude_card(s, e.action.at("card").get<std::string>(), e.action.at("reason").get<std::string>(), e.actor);
        } else if (op == "create_category") {
            create_category(s, e.action.at("title").get<std::string>(), e.action.at("description").get<std::string>(), e.actor);
        } else if (op == "advance") {
            advance_phase(s, e.actor);
        } else {
            throw Error(ErrorCode::SchemaViolation, "audit: unknown op " + op);
        }
    }
    s.clock = initial.clock;
    return s;
}

// ---- counts and report --------------------------------------------------

struct Counts {
    std::size_t total = 0, labeled = 0, excluded = 0, unlabeled = 0, iteration1 = 0, iteration2 = 0;
};

inline Counts counts(const TriageSession& s) {
    Counts c;
    for (const auto& card : s.cards) {
        ++c.total;
        (card.iteration == 1 ? c.iteration1 : c.iteration2)++;
        switch (card.state.kind) {
        case CardState::Kind::Labeled: ++c.labeled; break;
        case CardState::Kind::Excluded: ++c.excluded; break;
        case CardState::Kind::Unlabeled: ++c.unlabeled; break;
        }
    }
    return c;
}

inline json counts_json(const Counts& c) {
    return {{"total", c.total},         {"labeled", c.labeled},       {"excluded", c.excluded},
            {"unlabeled", c.unlabeled}, {"iteration1", c.iteration1}, {"iteration2", c.iteration2}};
}

inline constexpr std::size_t kExemplars = 3;
inline constexpr std::string_view kDraftWatermark = "DRAFT: session not complete, counts may change";

inline json delta_summary(std::span<const Card* const> cards) {
    std::map<std::string, std::map<std::string, std::size_t>> tally;
    for (const char* bucket : {"fixed", "introduced", "persistent"}) tally[bucket];
    for (const Card* c : cards) {
        for (const auto& f : c->deltas.fixed) tally["fixed"][std::string(detect::to_string(f.detector))]++;
        for (const auto& f : c->deltas.introduced) tally["introduced"][std::string(detect::to_string(f.detector))]++;
        for (const auto& f : c->deltas.persistent) tally["persistent"][std::string(detect::to_string(f.detector))]++;
    }
    json out = json::object();
    for (const auto& [bucket, by_detector] : tally) out[bucket] = by_detector;
    return out;
}

inline json export_report(const TriageSession& s, bool draft = false) {
    if (s.phase != Phase::Complete && !draft) {
        throw Error(ErrorCode::SessionIncomplete, "phase is " + std::string(to_string(s.phase)) + "; use a draft export");
    }
    const Counts c = counts(s);
    const std::size_t considered = c.total - c.excluded;
    json cats = json::array();
    for (const auto& cat : s.categories) {
        std::vector<const Card*> members;
        for (const auto& card : s.cards) {
            if (card.state.kind == CardState::Kind::Labeled && card.state.category_id == cat.id) members.push_back(&card);
        }
        json exemplars = json::array();
        for (std::size_t i = 0; i < members.size() && i < kExemplars; ++i) exemplars.push_back(members[i]->id);
        const double pct = considered == 0 ? 0.0 : 100.0 * static_cast<double>(members.size()) / static_cast<double>(considered);
        cats.push_back({{"id", cat.id},
                        {"title", cat.title},
                        {"description", cat.description},
                        {"created_in_iteration", cat.created_in_iteration},
                        {"count", members.size()},
                        {"percentage", std::round(pct * 100.0) / 100.0},
                        {"exemplars", std::move(exemplars)},
                        {"delta_summary", delta_summary(members)}});
    }
    json excluded = json::array();
    for (const auto& card : s.cards) {
        if (card.state.kind == CardState::Kind::Excluded) excluded.push_back({{"card", card.id}, {"reason", card.state.reason}});
    }
    json report = {{"phase", to_string(s.phase)},
                   {"seed", s.seed},
                   {"revision", s.revision},
                   {"counts", counts_json(c)},
                   {"categories", std::move(cats)},
                   {"excluded", std::move(excluded)},
                   {"draft", s.phase != Phase::Complete}};
    if (s.phase != Phase::Complete) report["watermark"] = kDraftWatermark;
    return report;
}

// ---- persistence ------------------------------------------------------------

inline json card_summary(const TriageSession& s, const Card& c) {
    json j = {{"id", c.id},
              {"predecessor", c.pair.predecessor.str()},
              {"successor", c.pair.successor.str()},
              {"similarity", lineage::round6(c.pair.similarity.value_or(0.0))},
              {"iteration", c.iteration},
              {"state", detail::state_json(c.state)}};
    if (c.state.kind == CardState::Kind::Labeled) {
        if (const auto* cat = s.find_category(c.state.category_id)) j["category_title"] = cat->title;
    }
    return j;
}

inline json to_json(const TriageSession& s) {
    json cards = json::array();
    for (const auto& c : s.cards) {
        cards.push_back({{"id", c.id},
                         {"pair", lineage::pairs_to_json({c.pair})[0]},
                         {"deltas", detect::to_json(c.deltas)},
                         {"iteration", c.iteration},
                         {"state", detail::state_json(c.state)}});
    }
    json cats = json::array();
    for (const auto& c : s.categories) {
        cats.push_back({{"id", c.id}, {"title", c.title}, {"description", c.description}, {"created_in_iteration", c.created_in_iteration}});
    }
    json audit = json::array();
    for (const auto& e : s.audit_log) audit.push_back({{"timestamp", e.timestamp}, {"actor", e.actor}, {"action", e.action}});
    return {{"format", "clineage-triage/1"},
            {"seed", s.seed},
            {"sample_fraction", s.sample_fraction},
            {"phase", to_string(s.phase)},
            {"revision", s.revision},
            {"cards", std::move(cards)},
            {"categories", std::move(cats)},
            {"audit_log", std::move(audit)}};
}

inline TriageSession session_from_json(const json& j) {
    try {
        TriageSession s;
        s.seed = j.at("seed").get<std::uint64_t>();
        s.sample_fraction = j.at("sample_fraction").get<double>();
        s.phase = phase_from_string(j.at("phase").get<std::string>());
        s.revision = j.at("revision").get<std::uint64_t>();
        for (const auto& c : j.at("cards")) {
            Card card;
            card.id = c.at("id").get<std::string>();
            card.pair = lineage::pairs_from_json(json::array({c.at("pair")}))[0];
            card.deltas = detect::delta_from_json(c.at("deltas"));
            card.deltas.pair = card.pair;
            card.iteration = c.at("iteration").get<int>();
            card.state = detail::state_from_json(c.at("state"));
            s.cards.push_back(std::move(card));
        }
        for (const auto& c : j.at("categories")) {
            s.categories.push_back({c.at("id").get<std::string>(), c.at("title").get<std::string>(),
                                    c.at("description").get<std::string>(), c.at("created_in_iteration").get<int>()});
        }
        for (const auto& e : j.at("audit_log")) {
            s.audit_log.push_back({e.at("timestamp").get<std::string>(), e.at("actor").get<std::string>(), e.at("action")});
        }
        return s;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::SchemaViolation, std::string("session: ") + e.what());
    }
}

/// Writes to a sibling temp file, then renames over the target.
inline void write_atomic(const std::filesystem::path& path, std::string_view bytes) {
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorCode::FileUnreadable, "cannot write " + tmp);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        out.flush();
        if (!out) throw Error(ErrorCode::FileUnreadable, "short write to " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

inline void save_session(const TriageSession& s, const std::filesystem::path& path) {
    write_atomic(path, to_json(s).dump(2) + "\n");
}

inline TriageSession load_session(const std::filesystem::path& path) {
    json j;
    try {
        j = json::parse(read_file(path.string()));
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::SchemaViolation, path.string() + ": " + e.what());
    }
    return session_from_json(j);
}

/// Advisory lock file `<session>.lock`, held for the lifetime of the object.
class SessionLock {
public:
    explicit SessionLock(const std::filesystem::path& session) : path_(session.string() + ".lock") {
        const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
        if (fd < 0) throw Error(ErrorCode::SessionLocked, path_ + " exists; another service may be running");
        const std::string pid = std::to_string(::getpid()) + "\n";
        [[maybe_unused]] auto n = ::write(fd, pid.data(), pid.size());
        ::close(fd);
    }
    SessionLock(const SessionLock&) = delete;
    SessionLock& operator=(const SessionLock&) = delete;
    ~SessionLock() { std::remove(path_.c_str()); }

    const std::string& path() const { return path_; }

private:
    std::string path_;
};

} // namespace clineage::triage
