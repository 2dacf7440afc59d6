#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <string_view>

#include <httplib.h>
#include <json.hpp>

#include "clineage/triage.hpp"

namespace clineage::triage {

struct Response {
    int status = 200;
    json body;
};

/// Extra card fields for the detail view, e.g. sources and changed regions.
using CardDetail = std::function<json(const Card&)>;

/// HTTP-facing wrapper around one session. Mutations are serialized and
/// persisted before they become visible; reads may run concurrently.
class TriageService {
public:
    explicit TriageService(TriageSession session, std::filesystem::path file = {}, CardDetail detail = {})
        : session_(std::move(session)), file_(std::move(file)), detail_(std::move(detail)) {}

    Response handle(std::string_view method, std::string_view path, const std::map<std::string, std::string>& query,
                    std::string_view body) {
        try {
            if (method == "GET") return get(path, query);
            if (method == "POST") return post(path, body);
            return error(405, "MethodNotAllowed", std::string(method));
        } catch (const Error& e) {
            return from_error(e);
        }
    }

    TriageSession snapshot() const {
        std::shared_lock lock(mutex_);
        return session_;
    }

    /// Routes every /api request to handle(). A non-empty `static_dir` is
    /// served at "/".
    void mount(httplib::Server& server, const std::string& static_dir = {}) {
        auto forward = [this](const httplib::Request& req, httplib::Response& res) {
            std::map<std::string, std::string> query;
            for (const auto& [k, v] : req.params) query.emplace(k, v);
            Response r = handle(req.method, req.path, query, req.body);
            res.status = r.status;
            res.set_content(r.body.dump(), "application/json");
        };
        server.Get(R"(/api/.*)", forward);
        server.Post(R"(/api/.*)", forward);
        if (!static_dir.empty()) server.set_mount_point("/", static_dir);
    }

private:
    mutable std::shared_mutex mutex_;
    TriageSession session_;
    std::filesystem::path file_;
    CardDetail detail_;

    static Response error(int status, std::string_view code, std::string message, std::uint64_t revision = 0) {
        return {status, {{"error", code}, {"message", std::move(message)}, {"revision", revision}}};
    }

    Response from_error(const Error& e) const {
        int status = 400;
        switch (e.code()) {
        case ErrorCode::UnknownCard:
        case ErrorCode::UnknownCategory: status = 404; break;
        case ErrorCode::PhaseViolation:
        case ErrorCode::SessionComplete:
        case ErrorCode::SessionIncomplete:
        case ErrorCode::UnresolvedCards:
        case ErrorCode::DuplicateTitle: status = 422; break;
        case ErrorCode::FileUnreadable: status = 500; break;
        default: break;
        }
        std::shared_lock lock(mutex_);
        return error(status, to_string(e.code()), e.what(), session_.revision);
    }

    static std::vector<std::string_view> segments(std::string_view path) {
        std::vector<std::string_view> out;
        std::size_t pos = 0;
        while (pos < path.size()) {
            if (path[pos] == '/') {
                ++pos;
                continue;
            }
            const auto next = path.find('/', pos);
            const auto end = next == std::string_view::npos ? path.size() : next;
            out.push_back(path.substr(pos, end - pos));
            pos = end;
        }
        return out;
    }

    Response get(std::string_view path, const std::map<std::string, std::string>& query) {
        const auto seg = segments(path);
        std::shared_lock lock(mutex_);
        if (seg.size() == 2 && seg[1] == "session") {
            json cats = json::array();
            for (const auto& c : session_.categories) {
                cats.push_back({{"id", c.id}, {"title", c.title}, {"description", c.description},
                                {"created_in_iteration", c.created_in_iteration}});
            }
            return {200,
                    {{"revision", session_.revision},
                     {"phase", to_string(session_.phase)},
                     {"counts", counts_json(counts(session_))},
                     {"categories", std::move(cats)},
                     {"sample_fraction", session_.sample_fraction},
                     {"seed", session_.seed}}};
        }
        if (seg.size() == 2 && seg[1] == "cards") {
            std::optional<int> iteration;
            std::string state;
            if (auto it = query.find("iteration"); it != query.end() && !it->second.empty()) {
                if (it->second != "1" && it->second != "2") {
                    return error(400, "InvalidArgument", "iteration must be 1 or 2", session_.revision);
                }
                iteration = it->second == "1" ? 1 : 2;
            }
            if (auto it = query.find("state"); it != query.end()) state = it->second;
            if (!state.empty() && state != "unlabeled" && state != "labeled" && state != "excluded") {
                return error(400, "InvalidArgument", "unknown state filter " + state, session_.revision);
            }
            json out = json::array();
            for (const auto& c : session_.cards) {
                if (iteration && c.iteration != *iteration) continue;
                if (!state.empty() && to_string(c.state.kind) != state) continue;
                out.push_back(card_summary(session_, c));
            }
            return {200, {{"revision", session_.revision}, {"cards", std::move(out)}}};
        }
        if (seg.size() == 3 && seg[1] == "cards") {
            const Card* c = session_.find_card(seg[2]);
            if (!c) return error(404, "UnknownCard", std::string(seg[2]), session_.revision);
            json j = card_summary(session_, *c);
            j["deltas"] = detect::to_json(c->deltas);
            if (detail_) j.update(detail_(*c));
            j["revision"] = session_.revision;
            return {200, std::move(j)};
        }
        if (seg.size() == 2 && seg[1] == "report") {
            auto it = query.find("draft");
            const bool draft = it != query.end() && (it->second == "true" || it->second == "1");
            return {200, export_report(session_, draft)};
        }
        return error(404, "NotFound", std::string(path), session_.revision);
    }

    template <class Op>
    Response mutate(const json& body, Op&& op) {
        std::unique_lock lock(mutex_);
        if (body.contains("revision") && body["revision"].get<std::uint64_t>() != session_.revision) {
            return error(409, "StaleRevision", "session changed since revision " + body["revision"].dump(), session_.revision);
        }
        TriageSession next = session_;
        json extra = op(next);
        if (!file_.empty()) save_session(next, file_);
        session_ = std::move(next);
        json out = {{"revision", session_.revision}, {"phase", to_string(session_.phase)}};
        if (!extra.is_null()) out.update(extra);
        return {200, std::move(out)};
    }

    static std::string text_field(const json& body, const char* key, bool required = true) {
        if (!body.contains(key)) {
            if (required) throw Error(ErrorCode::InvalidArgument, std::string("missing field ") + key);
            return {};
        }
        if (!body[key].is_string()) throw Error(ErrorCode::InvalidArgument, std::string(key) + " must be a string");
        return body[key].get<std::string>();
    }

    Response post(std::string_view path, std::string_view raw) {
        json body = json::object();
        if (!raw.empty()) {
            body = json::parse(raw, nullptr, false);
            if (body.is_discarded() || !body.is_object()) {
                std::shared_lock lock(mutex_);
                return error(400, "InvalidArgument", "body must be a JSON object", session_.revision);
            }
        }
        if (body.contains("revision") && !body["revision"].is_number_unsigned()) {
            throw Error(ErrorCode::InvalidArgument, "revision must be a non-negative integer");
        }
        const auto seg = segments(path);
        const std::string actor = body.contains("actor") ? text_field(body, "actor") : "anonymous";
        if (seg.size() == 4 && seg[1] == "cards" && seg[3] == "label") {
            const std::string card(seg[2]);
            const std::string cat = text_field(body, "category_id");
            return mutate(body, [&](TriageSession& s) {
                label_card(s, card, cat, actor);
                return json{{"card", card_summary(s, *s.find_card(card))}};
            });
        }
        if (seg.size() == 4 && seg[1] == "cards" && seg[3] == "exclude") {
            const std::string card(seg[2]);
            const std::string reason = text_field(body, "reason");
            return mutate(body, [&](TriageSession& s) {
                exclude_card(s, card, reason, actor);
                return json{{"card", card_summary(s, *s.find_card(card))}};
            });
        }
        if (seg.size() == 2 && seg[1] == "categories") {
            const std::string title = text_field(body, "title");
            const std::string description = text_field(body, "description", false);
            return mutate(body, [&](TriageSession& s) {
                const auto id = create_category(s, title, description, actor);
                return json{{"category", {{"id", id}, {"title", s.find_category(id)->title}}}};
            });
        }
        if (seg.size() == 3 && seg[1] == "phase" && seg[2] == "advance") {
            return mutate(body, [&](TriageSession& s) {
                advance_phase(s, actor);
                return json();
            });
        }
        std::shared_lock lock(mutex_);
        return error(404, "NotFound", std::string(path), session_.revision);
    }
};

} // namespace clineage::triage
