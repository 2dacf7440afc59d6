#pragma once

#include <atomic>
#include <cctype>
#include <filesystem>
#include <map>
#include <fstream>
#include <random>
#include <string>

#include <json.hpp>

#include "clineage/hash.hpp"
#include "clineage/lexer.hpp"

namespace testsupport {

namespace fs = std::filesystem;

inline fs::path fixture_dir() { return fs::path(CLINEAGE_FIXTURE_DIR); }
inline fs::path sol_fixture(const std::string& name) { return fixture_dir() / "sol" / name; }
inline std::string read_sol(const std::string& name) { return clineage::read_file(sol_fixture(name).string()); }

/// Removed with its contents on destruction.
class TempDir {
public:
    TempDir() {
        static std::atomic<unsigned> counter{0};
        std::random_device rd;
        path_ = fs::temp_directory_path() /
                ("clineage-test-" + std::to_string(rd()) + "-" + std::to_string(counter++));
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const fs::path& path() const { return path_; }
    fs::path operator/(const std::string& rel) const { return path_ / rel; }

private:
    fs::path path_;
};

inline void write_text(const fs::path& p, const std::string& text) {
    fs::create_directories(p.parent_path());
    std::ofstream(p, std::ios::binary) << text;
}

inline std::string addr(unsigned n, char fill = '0') {
    std::string hex = std::to_string(n);
    return "0x" + std::string(40 - hex.size(), fill) + hex;
}

inline nlohmann::json contract(const std::string& address, const std::string& source, bool destructed,
                               const std::string& name = "C") {
    return {{"address", address}, {"name", name}, {"source", source}, {"is_destructed", destructed}};
}

inline nlohmann::json tx(const std::string& hash_seed, const std::string& contract, const std::string& from,
                         std::uint64_t block, std::uint64_t index, const std::string& kind) {
    return {{"hash", "0x" + clineage::sha256_hex(hash_seed)},
            {"contract", contract},
            {"from", from},
            {"timestamp", 1500000000 + static_cast<std::int64_t>(block) * 15},
            {"block", block},
            {"tx_index", index},
            {"kind", kind}};
}

/// Renames every user identifier consistently and replaces every literal by
/// another literal of the same class, splicing by token offsets.
inline std::string rewrite_source(const std::string& source, std::mt19937_64& rng) {
    using clineage::sol::TokenKind;
    const auto tokens = clineage::sol::tokenize(source);
    std::map<std::string, std::string> rename;
    auto fresh = [&] { return "v" + std::to_string(rename.size()) + "_" + std::to_string(rng() % 100000); };
    auto hex = [&](std::size_t n) {
        std::string out;
        for (std::size_t i = 0; i < n; ++i) out.push_back("0123456789abcdef"[rng() % 16]);
        return out;
    };
    std::string out;
    std::size_t pos = 0;
    for (const auto& t : tokens) {
        std::string repl;
        switch (t.kind) {
        case TokenKind::Identifier: {
            std::string lower = t.text;
            for (auto& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
            if (lower != t.text && clineage::sol::is_denomination(lower)) continue;  // `1 Ether`
            auto it = rename.find(t.text);
            if (it == rename.end()) it = rename.emplace(t.text, fresh()).first;
            repl = it->second;
            break;
        }
        case TokenKind::NumberLiteral: repl = std::to_string(1 + rng() % 1000000); break;
        case TokenKind::StringLiteral: repl = "\"s" + std::to_string(rng() % 1000) + "\""; break;
        case TokenKind::AddressLiteral: repl = "0x" + hex(40); break;
        case TokenKind::BoolLiteral: repl = t.text == "true" ? "false" : "true"; break;
        default: continue;
        }
        out.append(source, pos, t.offset - pos);
        out += repl;
        pos = t.offset + t.length;
    }
    out.append(source, pos);
    return out;
}

} // namespace testsupport
