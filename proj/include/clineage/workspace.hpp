#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "clineage/error.hpp"
#include "clineage/hash.hpp"
#include "clineage/triage.hpp"

namespace clineage::workspace {

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr const char* kEnvVar = "CONTRACT_LINEAGE_WORKSPACE";

namespace files {
inline constexpr const char* kContracts = "corpus/contracts.json";
inline constexpr const char* kTransactions = "corpus/transactions.json";
inline constexpr const char* kSummary = "corpus/summary.json";
inline constexpr const char* kNormalized = "normalized.json";
inline constexpr const char* kModel = "model.bin";
inline constexpr const char* kPairs = "pairs.json";
inline constexpr const char* kDiffs = "diffs.json";
inline constexpr const char* kPatch = "diffs.patch";
inline constexpr const char* kFindings = "findings.json";
inline constexpr const char* kDeltas = "deltas.json";
inline constexpr const char* kSession = "session.json";
inline constexpr const char* kManifest = "manifest.json";
} // namespace files

/// What a stage read and wrote, keyed by workspace-relative path.
struct StageRecord {
    json config = json::object();
    std::map<std::string, std::string> inputs;
    std::map<std::string, std::string> outputs;
};

/// A workspace directory plus its manifest. The manifest records each
/// stage's config and the sha256 of every file it consumed or produced;
/// it carries no timestamps, so reruns leave it byte-identical.
class Workspace {
public:
    explicit Workspace(fs::path root) : root_(std::move(root)) {
        if (fs::exists(path(files::kManifest))) load_manifest();
    }

    const fs::path& root() const { return root_; }
    fs::path path(const std::string& rel) const { return root_ / rel; }
    bool has(const std::string& rel) const { return fs::exists(path(rel)); }

    std::string read(const std::string& rel) const { return read_file(path(rel).string()); }

    void write(const std::string& rel, std::string_view bytes) const {
        fs::create_directories(path(rel).parent_path());
        triage::write_atomic(path(rel), bytes);
    }

    std::string digest(const std::string& rel) const { return sha256_file(path(rel).string()); }

    const std::map<std::string, StageRecord>& stages() const { return stages_; }

    /// Which stage last wrote `rel`, if any.
    std::optional<std::string> producer(const std::string& rel) const {
        for (const auto& [name, rec] : stages_) {
            if (rec.outputs.contains(rel)) return name;
        }
        return std::nullopt;
    }

    /// Throws StaleUpstream unless every input exists and was produced by an
    /// up-to-date stage whose recorded output digest still matches the file.
    void require_fresh(const std::vector<std::string>& inputs) const {
        for (const auto& rel : inputs) check_input(rel, 0);
    }

    void record(const std::string& stage, json config, const std::vector<std::string>& inputs,
                const std::vector<std::string>& outputs) {
        StageRecord r;
        r.config = std::move(config);
        for (const auto& f : inputs) r.inputs[f] = has(f) ? digest(f) : "";
        for (const auto& f : outputs) r.outputs[f] = digest(f);
        // A file has one producer; drop claims from an earlier stage.
        for (auto& [name, rec] : stages_) {
            if (name == stage) continue;
            for (const auto& f : outputs) rec.outputs.erase(f);
        }
        stages_[stage] = std::move(r);
        save_manifest();
    }

    json manifest_json() const {
        json stages = json::object();
        for (const auto& [name, rec] : stages_) {
            stages[name] = {{"config", rec.config}, {"inputs", rec.inputs}, {"outputs", rec.outputs}};
        }
        return {{"format", "clineage-manifest/1"}, {"stages", std::move(stages)}};
    }

private:
    fs::path root_;
    std::map<std::string, StageRecord> stages_;

    void load_manifest() {
        json j;
        try {
            j = json::parse(read(files::kManifest));
            for (const auto& [name, s] : j.at("stages").items()) {
                StageRecord r;
                r.config = s.at("config");
                r.inputs = s.at("inputs").get<std::map<std::string, std::string>>();
                r.outputs = s.at("outputs").get<std::map<std::string, std::string>>();
                stages_[name] = std::move(r);
            }
        } catch (const json::exception& e) {
            throw Error(ErrorCode::SchemaViolation, "manifest.json: " + std::string(e.what()));
        }
    }

    void save_manifest() const { write(files::kManifest, manifest_json().dump(2) + "\n"); }

    void check_input(const std::string& rel, int depth) const {
        if (depth > 32) throw Error(ErrorCode::StaleUpstream, "manifest dependency cycle at " + rel);
        if (!has(rel)) throw Error(ErrorCode::StaleUpstream, rel + " is missing; run the stage that produces it");
        auto stage = producer(rel);
        if (!stage) throw Error(ErrorCode::StaleUpstream, rel + " is not recorded in the manifest");
        const auto& rec = stages_.at(*stage);
        if (rec.outputs.at(rel) != digest(rel)) {
            throw Error(ErrorCode::StaleUpstream, rel + " changed since stage " + *stage + " wrote it");
        }
        for (const auto& [in, sha] : rec.inputs) {
            if (!producer(in)) continue;  // external input
            if (!has(in) || digest(in) != sha) {
                throw Error(ErrorCode::StaleUpstream, "stage " + *stage + " is out of date: " + in + " changed");
            }
            check_input(in, depth + 1);
        }
    }
};

} // namespace clineage::workspace
