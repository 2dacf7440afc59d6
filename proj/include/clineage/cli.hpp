#pragma once

#include <cstdlib>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <httplib.h>
#include <json.hpp>

#include "clineage/corpus.hpp"
#include "clineage/detect.hpp"
#include "clineage/diff.hpp"
#include "clineage/embed.hpp"
#include "clineage/lineage.hpp"
#include "clineage/model_io.hpp"
#include "clineage/normalize.hpp"
#include "clineage/triage.hpp"
#include "clineage/triage_server.hpp"
#include "clineage/workspace.hpp"

namespace clineage::cli {

using nlohmann::json;
using workspace::Workspace;
namespace files = workspace::files;

inline constexpr std::uint64_t kDefaultSeed = 42;
inline constexpr std::size_t kRegionContext = 3;

struct Streams {
    std::ostream& out;
    std::ostream& err;
};

// ---- workspace readers ------------------------------------------------------

inline corpus::Corpus load_workspace_corpus(const Workspace& ws) {
    return corpus::load_corpus(ws.path(files::kContracts).string(), ws.path(files::kTransactions).string());
}

inline std::map<Address, sol::NormalizedTokenSequence> load_normalized(const Workspace& ws) {
    std::map<Address, sol::NormalizedTokenSequence> out;
    const json j = json::parse(ws.read(files::kNormalized));
    for (const auto& [addr, toks] : j.at("sequences").items()) {
        auto a = Address::parse(addr);
        if (!a) throw Error(ErrorCode::SchemaViolation, "normalized.json: bad address " + addr);
        out[*a] = {toks.get<std::vector<std::string>>(), *a};
    }
    return out;
}

inline std::vector<lineage::UpgradePair> load_pairs(const Workspace& ws) {
    return lineage::pairs_from_json(json::parse(ws.read(files::kPairs)));
}

inline std::vector<detect::PairFindingDelta> load_deltas(const Workspace& ws) {
    std::vector<detect::PairFindingDelta> out;
    for (const auto& d : json::parse(ws.read(files::kDeltas))) out.push_back(detect::delta_from_json(d));
    return out;
}

inline const corpus::ContractRecord& contract_or_throw(const corpus::Corpus& c, const Address& a) {
    auto it = c.contracts.find(a);
    if (it == c.contracts.end()) throw Error(ErrorCode::UnknownAddress, a.str() + " is not in the corpus");
    return it->second;
}

/// Source text for a corpus address, or the contents of a file path.
inline std::string source_of(const Workspace& ws, const std::string& what) {
    if (auto a = Address::parse(what)) return contract_or_throw(load_workspace_corpus(ws), *a).source;
    return read_file(what);
}

inline void print_diagnostics(const std::vector<std::string>& diags, std::ostream& err) {
    for (const auto& d : diags) err << d << '\n';
}

// ---- stages ------------------------------------------------------------------

inline void stage_ingest(Workspace& ws, const std::string& contracts, const std::string& txs, Streams io) {
    // Validate before copying anything into the workspace.
    const auto c = corpus::load_corpus(contracts, txs);
    if (c.contracts.empty()) throw Error(ErrorCode::EmptyCorpus, "no usable contracts in " + contracts);
    ws.write(files::kContracts, read_file(contracts));
    ws.write(files::kTransactions, read_file(txs));
    json summary = {{"contracts", corpus::summary_json(c)}, {"diagnostics", c.diagnostics}};
    ws.write(files::kSummary, summary.dump(2) + "\n");
    print_diagnostics(c.diagnostics, io.err);
    std::size_t destructed = 0;
    for (const auto& [a, r] : c.contracts) destructed += r.is_destructed;
    io.err << "ingest: " << c.contracts.size() << " contracts, " << destructed << " destructed\n";
    ws.record("ingest", json::object(), {contracts, txs}, {files::kContracts, files::kTransactions, files::kSummary});
}

inline void stage_normalize(Workspace& ws, bool force, Streams io) {
    if (!force) ws.require_fresh({files::kContracts, files::kTransactions});
    const auto c = load_workspace_corpus(ws);
    json seqs = json::object();
    std::vector<std::string> diags;
    for (const auto& [addr, rec] : c.contracts) {
        try {
            const auto unit = sol::parse_source(rec.source);
            if (unit.recoveries > 0) diags.push_back("RECOVERED " + addr.str() + " " + std::to_string(unit.recoveries));
            seqs[addr.str()] = sol::normalize_unit(unit, addr).tokens;
        } catch (const Error& e) {
            diags.push_back("SKIP " + addr.str() + " " + e.what());
        }
    }
    json out = {{"table_version", sol::kTableVersion}, {"sequences", std::move(seqs)}, {"diagnostics", diags}};
    ws.write(files::kNormalized, out.dump(1) + "\n");
    print_diagnostics(diags, io.err);
    ws.record("normalize", {{"table_version", sol::kTableVersion}}, {files::kContracts, files::kTransactions},
              {files::kNormalized});
}

inline json embed_config_json(const embed::EmbedConfig& c) {
    return {{"dimension", c.dimension}, {"window", c.window},       {"epochs", c.epochs},
            {"negative_samples", c.negative_samples}, {"learning_rate", c.learning_rate},
            {"min_count", c.min_count}, {"ngram_min", c.ngram_min}, {"ngram_max", c.ngram_max},
            {"bucket_count", c.bucket_count}, {"seed", c.seed}};
}

/// Training documents: every contract ("all") or only members of creator
/// groups that contain a destructed contract ("grouped").
inline void stage_train(Workspace& ws, const embed::EmbedConfig& cfg, const std::string& scope, unsigned threads, bool force,
                        Streams io) {
    cfg.validate();
    if (scope != "all" && scope != "grouped") throw Error(ErrorCode::InvalidArgument, "train scope must be all or grouped");
    std::vector<std::string> inputs = {files::kNormalized};
    if (scope == "grouped") inputs.insert(inputs.end(), {files::kContracts, files::kTransactions});
    if (!force) ws.require_fresh(inputs);
    std::set<Address> keep;
    if (scope == "grouped") {
        const auto c = load_workspace_corpus(ws);
        for (const auto& grp : lineage::filter_groups(lineage::group_by_creator(c))) {
            for (const auto* m : grp.members) keep.insert(m->address);
        }
    }
    std::vector<sol::NormalizedTokenSequence> docs;
    for (auto& [addr, seq] : load_normalized(ws)) {
        if (seq.tokens.empty() || (scope == "grouped" && !keep.contains(addr))) continue;
        docs.push_back(std::move(seq));
    }
    embed::TrainOptions opts;
    opts.threads = threads;
    opts.on_epoch = [&](std::uint32_t epoch, const embed::EmbeddingModel&) { io.err << "train: epoch " << epoch << " done\n"; };
    const auto model = embed::train(docs, cfg, opts);
    ws.write(files::kModel, embed::serialize_model(model));
    json config = embed_config_json(cfg);
    config["threads"] = threads;
    config["scope"] = scope;
    ws.record("train", std::move(config), inputs, {files::kModel});
}

inline void stage_pair(Workspace& ws, const lineage::LineageConfig& cfg, unsigned threads, bool force, Streams io) {
    cfg.validate();
    if (!force) ws.require_fresh({files::kContracts, files::kTransactions, files::kNormalized, files::kModel});
    const auto c = load_workspace_corpus(ws);
    const auto normalized = load_normalized(ws);
    const auto model = embed::deserialize_model(ws.read(files::kModel));
    std::vector<lineage::CandidatePair> candidates;
    for (const auto& g : lineage::filter_groups(lineage::group_by_creator(c))) {
        auto part = lineage::candidate_pairs(g);
        candidates.insert(candidates.end(), part.begin(), part.end());
    }
    std::vector<std::string> diags;
    const auto scored = lineage::score_pairs(candidates, model, normalized, &diags, threads);
    const auto kept = lineage::filter_threshold(scored, cfg);
    ws.write(files::kPairs, lineage::pairs_to_json(kept).dump(2) + "\n");
    print_diagnostics(diags, io.err);
    io.err << "pair: " << candidates.size() << " candidates, " << kept.size() << " above threshold\n";
    ws.record("pair", {{"threshold", cfg.threshold}},
              {files::kContracts, files::kTransactions, files::kNormalized, files::kModel}, {files::kPairs});
}

inline diff::DiffReport diff_pair(const lineage::UpgradePair& p, diff::Granularity g, const corpus::Corpus& c,
                                  const std::map<Address, sol::NormalizedTokenSequence>* normalized,
                                  std::vector<std::string>* pred_out = nullptr, std::vector<std::string>* succ_out = nullptr) {
    std::vector<std::string> a, b;
    if (g == diff::Granularity::Line) {
        a = diff::split_lines(contract_or_throw(c, p.predecessor).source);
        b = diff::split_lines(contract_or_throw(c, p.successor).source);
    } else {
        auto fetch = [&](const Address& x) {
            auto it = normalized->find(x);
            return it == normalized->end() ? std::vector<std::string>{} : it->second.tokens;
        };
        a = fetch(p.predecessor);
        b = fetch(p.successor);
    }
    auto r = diff::diff_sequences(p, g, a, b);
    if (pred_out) *pred_out = std::move(a);
    if (succ_out) *succ_out = std::move(b);
    return r;
}

inline void stage_diff(Workspace& ws, diff::Granularity g, const std::string& format, bool force, Streams io) {
    std::vector<std::string> inputs = {files::kContracts, files::kTransactions, files::kPairs};
    if (g == diff::Granularity::NormalizedToken) inputs.push_back(files::kNormalized);
    if (!force) ws.require_fresh(inputs);
    const auto c = load_workspace_corpus(ws);
    std::optional<std::map<Address, sol::NormalizedTokenSequence>> normalized;
    if (g == diff::Granularity::NormalizedToken) normalized = load_normalized(ws);
    json reports = json::array();
    std::string patch;
    for (const auto& p : load_pairs(ws)) {
        std::vector<std::string> a, b;
        const auto r = diff_pair(p, g, c, normalized ? &*normalized : nullptr, &a, &b);
        reports.push_back(diff::to_json(r));
        patch += diff::unified(r, a, b, kRegionContext);
    }
    const std::string structured = reports.dump(1) + "\n";
    ws.write(files::kDiffs, structured);
    ws.write(files::kPatch, patch);
    if (format == "unified") io.out << patch;
    else if (format == "structured") io.out << structured;
    ws.record("diff", {{"granularity", diff::to_string(g)}, {"context", kRegionContext}}, inputs, {files::kDiffs, files::kPatch});
}

inline std::map<Address, std::vector<detect::Finding>> detect_corpus(const corpus::Corpus& c, std::vector<std::string>& diags) {
    std::map<Address, std::vector<detect::Finding>> out;
    for (const auto& [addr, rec] : c.contracts) {
        try {
            out[addr] = detect::run_all(sol::parse_source(rec.source), addr);
        } catch (const Error& e) {
            diags.push_back("SKIP " + addr.str() + " " + e.what());
            out[addr] = {};
        }
    }
    return out;
}

inline void print_findings(std::span<const detect::Finding> fs, const std::string& format, std::ostream& out) {
    if (format == "json") {
        out << detect::to_json(fs).dump(2) << '\n';
        return;
    }
    for (const auto& f : fs) out << detect::to_text(f) << '\n';
}

inline void stage_detect(Workspace& ws, const std::string& format, bool force, Streams io) {
    if (!force) ws.require_fresh({files::kContracts, files::kTransactions, files::kPairs});
    const auto c = load_workspace_corpus(ws);
    std::vector<std::string> diags;
    const auto by_contract = detect_corpus(c, diags);
    std::vector<detect::Finding> all;
    for (const auto& [addr, fs] : by_contract) all.insert(all.end(), fs.begin(), fs.end());
    json deltas = json::array();
    for (const auto& p : load_pairs(ws)) {
        const auto& pf = by_contract.at(contract_or_throw(c, p.predecessor).address);
        const auto& sf = by_contract.at(contract_or_throw(c, p.successor).address);
        deltas.push_back(detect::to_json(detect::pair_delta(pf, sf, p)));
    }
    ws.write(files::kFindings, detect::to_json(all).dump(2) + "\n");
    ws.write(files::kDeltas, deltas.dump(2) + "\n");
    print_diagnostics(diags, io.err);
    if (!format.empty()) print_findings(all, format, io.out);
    ws.record("detect", json::object(), {files::kContracts, files::kTransactions, files::kPairs},
              {files::kFindings, files::kDeltas});
}

inline void stage_triage_init(Workspace& ws, std::uint64_t seed, double fraction, bool force, Streams io) {
    if (!force) {
        ws.require_fresh({files::kPairs, files::kDeltas});
        if (ws.has(files::kSession) && !triage::load_session(ws.path(files::kSession)).audit_log.empty()) {
            throw Error(ErrorCode::InvalidArgument, "session.json already holds triage decisions; pass --force to replace it");
        }
    }
    const auto pairs = load_pairs(ws);
    const auto deltas = load_deltas(ws);
    const auto session = triage::create_session(pairs, seed, fraction, deltas);
    triage::save_session(session, ws.path(files::kSession));
    io.err << "triage: " << session.cards.size() << " cards, " << triage::counts(session).iteration1
           << " in iteration 1\n";
    ws.record("triage", {{"seed", seed}, {"sample_fraction", fraction}}, {files::kPairs, files::kDeltas}, {files::kSession});
}

/// Card detail for the web view: both sources and line regions with context.
inline triage::CardDetail workspace_card_detail(const Workspace& ws) {
    auto c = std::make_shared<corpus::Corpus>(load_workspace_corpus(ws));
    return [c](const triage::Card& card) {
        std::vector<std::string> a, b;
        const auto r = diff_pair(card.pair, diff::Granularity::Line, *c, nullptr, &a, &b);
        json regions = json::array();
        for (const auto& region : diff::changed_regions(r, kRegionContext)) {
            json changes = json::array();
            for (const auto& h : region.changes) {
                changes.push_back({{"kind", diff::to_string(h.kind)}, {"pred", {h.pred.begin, h.pred.end}}, {"succ", {h.succ.begin, h.succ.end}}});
            }
            regions.push_back({{"pred", {region.pred.begin, region.pred.end}},
                               {"succ", {region.succ.begin, region.succ.end}},
                               {"pred_lines", std::vector<std::string>(a.begin() + static_cast<std::ptrdiff_t>(region.pred.begin), a.begin() + static_cast<std::ptrdiff_t>(region.pred.end))},
                               {"succ_lines", std::vector<std::string>(b.begin() + static_cast<std::ptrdiff_t>(region.succ.begin), b.begin() + static_cast<std::ptrdiff_t>(region.succ.end))},
                               {"changes", std::move(changes)}});
        }
        return json{{"predecessor_source", c->contracts.at(card.pair.predecessor).source},
                    {"successor_source", c->contracts.at(card.pair.successor).source},
                    {"granularity", "line"},
                    {"lcs_length", r.lcs_length},
                    {"regions", std::move(regions)}};
    };
}

// ---- command line ----------------------------------------------------------

inline int exit_code_for(const Error& e) {
    return e.code() == ErrorCode::NumericalDivergence ? 2 : 1;
}

struct Globals {
    std::string workspace;
    std::uint64_t seed = kDefaultSeed;
    bool force = false;
    std::string format;
};

inline std::string default_workspace() {
    const char* env = std::getenv(workspace::kEnvVar);
    return env && *env ? env : ".";
}

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    Streams io{out, err};
    CLI::App app{"Reconstructs upgrade lineages of destructed Ethereum contracts", "clineage"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    g.workspace = default_workspace();
    app.add_option("-w,--workspace", g.workspace, "Workspace directory (default: $" + std::string(workspace::kEnvVar) + " or .)");
    app.add_option("--seed", g.seed, "Seed for all randomness")->capture_default_str();
    app.add_flag("--force", g.force, "Run even if upstream outputs are stale");
    app.add_option("--format", g.format, "Output format: text|json for detect, unified|structured for diff");

    std::function<void()> action;

    auto* ingest = app.add_subcommand("ingest", "Validate and copy a corpus into the workspace");
    std::string contracts_path, txs_path;
    ingest->add_option("--contracts", contracts_path, "Contracts JSON file")->required();
    ingest->add_option("--txs", txs_path, "Transactions JSON file")->required();
    ingest->callback([&] {
        action = [&] {
            Workspace ws(g.workspace);
            stage_ingest(ws, contracts_path, txs_path, io);
        };
    });

    auto* normalize = app.add_subcommand("normalize", "Parse and normalize every contract");
    std::string dump_tokens, dump_normalized;
    normalize->add_option("--dump-tokens", dump_tokens, "Print the tokens of a corpus address or .sol file");
    normalize->add_option("--dump-normalized", dump_normalized, "Print the normalized lexemes of a corpus address or .sol file");
    normalize->callback([&] {
        action = [&] {
            Workspace ws(g.workspace);
            if (dump_tokens.empty() && dump_normalized.empty()) {
                stage_normalize(ws, g.force, io);
                return;
            }
            if (!dump_tokens.empty()) {
                for (const auto& t : sol::tokenize(source_of(ws, dump_tokens))) {
                    out << sol::to_string(t.kind) << '\t' << t.text << '\t' << t.line << ':' << t.column << '\n';
                }
            }
            if (!dump_normalized.empty()) {
                for (const auto& lexeme : sol::normalize_source(source_of(ws, dump_normalized)).tokens) out << lexeme << '\n';
            }
        };
    });

    embed::EmbedConfig ecfg;
    unsigned train_threads = 1;
    std::string train_scope = "all";
    auto add_embed_options = [&](CLI::App* sub) {
        sub->add_option("--dim", ecfg.dimension, "Vector dimension")->capture_default_str();
        sub->add_option("--epochs", ecfg.epochs, "Training epochs")->capture_default_str();
        sub->add_option("--window", ecfg.window, "Context window")->capture_default_str();
        sub->add_option("--neg", ecfg.negative_samples, "Negative samples")->capture_default_str();
        sub->add_option("--lr", ecfg.learning_rate, "Initial learning rate")->capture_default_str();
        sub->add_option("--min-count", ecfg.min_count, "Minimum token count")->capture_default_str();
        sub->add_option("--minn", ecfg.ngram_min, "Shortest character n-gram")->capture_default_str();
        sub->add_option("--maxn", ecfg.ngram_max, "Longest character n-gram")->capture_default_str();
        sub->add_option("--buckets", ecfg.bucket_count, "N-gram hash buckets")->capture_default_str();
        sub->add_option("--train-scope", train_scope, "Training documents: all or grouped")->capture_default_str();
        sub->add_option("--train-threads", train_threads, "Training threads; only 1 is reproducible")->capture_default_str();
    };
    auto* train = app.add_subcommand("train", "Train the subword embedding model");
    add_embed_options(train);
    train->callback([&] {
        action = [&] {
            Workspace ws(g.workspace);
            ecfg.seed = g.seed;
            stage_train(ws, ecfg, train_scope, train_threads, g.force, io);
        };
    });

    lineage::LineageConfig lcfg;
    unsigned threads = std::max(1u, std::thread::hardware_concurrency());
    auto* pair = app.add_subcommand("pair", "Score candidate pairs and keep those above the threshold");
    pair->add_option("--threshold", lcfg.threshold, "Similarity threshold (strictly greater)")->capture_default_str();
    pair->add_option("--threads", threads, "Worker threads");
    pair->callback([&] {
        action = [&] {
            Workspace ws(g.workspace);
            stage_pair(ws, lcfg, threads, g.force, io);
        };
    });

    std::string granularity = "line";
    auto parse_granularity = [&] {
        if (granularity == "line") return diff::Granularity::Line;
        if (granularity == "token") return diff::Granularity::NormalizedToken;
        throw Error(ErrorCode::InvalidArgument, "granularity must be line or token");
    };
    auto* diffc = app.add_subcommand("diff", "Diff every upgrade pair");
    diffc->add_option("--granularity", granularity, "line or token")->capture_default_str();
    diffc->callback([&] {
        action = [&] {
            if (!g.format.empty() && g.format != "unified" && g.format != "structured") {
                throw Error(ErrorCode::InvalidArgument, "diff --format must be unified or structured");
            }
            Workspace ws(g.workspace);
            stage_diff(ws, parse_granularity(), g.format, g.force, io);
        };
    });

    auto* detectc = app.add_subcommand("detect", "Run the four detectors");
    std::string contract;
    detectc->add_option("--contract", contract, "Only print findings for this contract");
    detectc->callback([&] {
        action = [&] {
            if (!g.format.empty() && g.format != "text" && g.format != "json") {
                throw Error(ErrorCode::InvalidArgument, "detect --format must be text or json");
            }
            Workspace ws(g.workspace);
            if (!contract.empty()) {
                auto a = Address::parse(contract);
                if (!a) throw Error(ErrorCode::InvalidArgument, "bad address " + contract);
                const auto c = load_workspace_corpus(ws);
                const auto& rec = contract_or_throw(c, *a);
                print_findings(detect::run_all(sol::parse_source(rec.source), rec.address),
                               g.format.empty() ? "text" : g.format, out);
                return;
            }
            stage_detect(ws, g.format, g.force, io);
        };
    });

    auto* triagec = app.add_subcommand("triage", "Card sorting session");
    triagec->require_subcommand(1);
    double fraction = triage::kDefaultSampleFraction;
    auto* tinit = triagec->add_subcommand("init", "Create the session from pairs and deltas");
    tinit->add_option("--fraction", fraction, "Iteration-1 sample fraction")->capture_default_str();
    tinit->callback([&] {
        action = [&] {
            Workspace ws(g.workspace);
            stage_triage_init(ws, g.seed, fraction, g.force, io);
        };
    });
    auto* serve = triagec->add_subcommand("serve", "Serve the session over HTTP");
    int port = 8080;
    std::string host = "127.0.0.1", session_path, static_dir;
    serve->add_option("--port", port, "TCP port")->capture_default_str();
    serve->add_option("--host", host, "Bind address")->capture_default_str();
    serve->add_option("--session", session_path, "Session file (default: <workspace>/session.json)");
    serve->add_option("--static", static_dir, "Directory of web assets served at /");
    serve->callback([&] {
        action = [&] {
            Workspace ws(g.workspace);
            const std::filesystem::path file = session_path.empty() ? ws.path(files::kSession) : std::filesystem::path(session_path);
            triage::SessionLock lock(file);
            triage::CardDetail detail;
            if (ws.has(files::kContracts)) detail = workspace_card_detail(ws);
            triage::TriageService service(triage::load_session(file), file, detail);
            httplib::Server server;
            service.mount(server, static_dir);
            if (!server.bind_to_port(host, port)) throw Error(ErrorCode::InvalidArgument, "cannot bind " + host + ":" + std::to_string(port));
            err << "triage: serving " << file.string() << " on http://" << host << ":" << port << '\n';
            server.listen_after_bind();
        };
    });

    auto* report = app.add_subcommand("report", "Export the triage report");
    bool draft = false;
    std::string report_out;
    report->add_flag("--draft", draft, "Allow export before the session is complete");
    report->add_option("--out", report_out, "Write the report to a file instead of stdout");
    report->callback([&] {
        action = [&] {
            Workspace ws(g.workspace);
            const auto doc = triage::export_report(triage::load_session(ws.path(files::kSession)), draft).dump(2) + "\n";
            if (report_out.empty()) out << doc;
            else triage::write_atomic(report_out, doc);
        };
    });

    auto* model = app.add_subcommand("model", "Model utilities");
    model->require_subcommand(1);
    auto* inspect = model->add_subcommand("inspect", "Summarize the trained model");
    std::string token;
    std::size_t top = 20;
    inspect->add_option("--token", token, "Also print this token's vector");
    inspect->add_option("--top", top, "How many vocabulary entries to list")->capture_default_str();
    inspect->callback([&] {
        action = [&] {
            Workspace ws(g.workspace);
            const auto m = embed::deserialize_model(ws.read(files::kModel));
            json vocab = json::array();
            for (std::size_t i = 0; i < m.vocab_size() && i < top; ++i) vocab.push_back({m.words()[i], m.counts()[i]});
            json doc = {{"config", embed_config_json(m.config())},
                        {"vocab_size", m.vocab_size()},
                        {"stored_ngram_rows", m.stored_buckets().size()},
                        {"all_finite", m.all_finite()},
                        {"sha256", ws.digest(files::kModel)},
                        {"top_tokens", std::move(vocab)}};
            if (!token.empty()) doc["vector"] = embed::token_vector(m, token);
            out << doc.dump(2) << '\n';
        };
    });

    auto* lcsc = app.add_subcommand("lcs", "Longest common subsequence of two strings or files");
    std::string lhs, rhs;
    bool contiguous = false, from_files = false;
    lcsc->add_option("a", lhs, "First input")->required();
    lcsc->add_option("b", rhs, "Second input")->required();
    lcsc->add_flag("--contiguous", contiguous, "Longest common substring instead");
    lcsc->add_flag("--files", from_files, "Treat inputs as files compared line by line");
    lcsc->callback([&] {
        action = [&] {
            if (from_files) {
                const auto a = diff::split_lines(read_file(lhs));
                const auto b = diff::split_lines(read_file(rhs));
                const auto r = contiguous ? diff::longest_common_substring<std::string>(a, b) : diff::lcs(a, b);
                out << r.size() << '\n';
                for (const auto& line : r) out << line << '\n';
            } else {
                const auto r = contiguous ? [&] {
                    auto v = diff::longest_common_substring(std::span<const char>(lhs.data(), lhs.size()),
                                                            std::span<const char>(rhs.data(), rhs.size()));
                    return std::string(v.begin(), v.end());
                }()
                                          : diff::lcs(std::string_view(lhs), std::string_view(rhs));
                out << r.size() << '\n' << r << '\n';
            }
        };
    });

    auto* pipeline = app.add_subcommand("pipeline", "Whole-pipeline commands");
    pipeline->require_subcommand(1);
    auto* prun = pipeline->add_subcommand("run", "ingest, normalize, train, pair, diff, detect, triage init");
    std::string out_dir;
    prun->add_option("--contracts", contracts_path, "Contracts JSON file")->required();
    prun->add_option("--txs", txs_path, "Transactions JSON file")->required();
    prun->add_option("--out", out_dir, "Workspace directory (overrides --workspace)");
    prun->add_option("--threshold", lcfg.threshold, "Similarity threshold")->capture_default_str();
    prun->add_option("--fraction", fraction, "Iteration-1 sample fraction")->capture_default_str();
    prun->add_option("--granularity", granularity, "Diff granularity, line or token")->capture_default_str();
    prun->add_option("--threads", threads, "Worker threads for scoring");
    add_embed_options(prun);
    prun->callback([&] {
        action = [&] {
            lcfg.validate();
            ecfg.seed = g.seed;
            ecfg.validate();
            const auto gran = parse_granularity();
            Workspace ws(out_dir.empty() ? g.workspace : out_dir);
            stage_ingest(ws, contracts_path, txs_path, io);
            stage_normalize(ws, g.force, io);
            stage_train(ws, ecfg, train_scope, train_threads, g.force, io);
            stage_pair(ws, lcfg, threads, g.force, io);
            stage_diff(ws, gran, "", g.force, io);
            stage_detect(ws, "", g.force, io);
            stage_triage_init(ws, g.seed, fraction, g.force, io);
        };
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        if (dynamic_cast<const CLI::ExtrasError*>(&e) || dynamic_cast<const CLI::RequiredError*>(&e)) {
            if (app.get_subcommands().empty()) {
                err << "error: UnknownCommand: expected one of ingest, normalize, train, pair, diff, detect, triage, "
                       "report, model, lcs, pipeline\n";
                return 1;
            }
        }
        app.exit(e, out, err);
        return 1;
    }
    try {
        if (action) action();
        return 0;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return exit_code_for(e);
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << '\n';
        return 2;
    }
}

} // namespace clineage::cli
