#pragma once

#include <compare>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>

namespace clineage {

/// A 20-byte account or contract address in canonical form: "0x" followed by
/// 40 lowercase hex digits. Construction goes through parse(), which accepts
/// any hex case and lowercases it.
class Address {
public:
    Address() = default;

    static std::optional<Address> parse(std::string_view text) {
        if (text.size() != 42 || text[0] != '0' || (text[1] != 'x' && text[1] != 'X')) {
            return std::nullopt;
        }
        std::string canon = "0x";
        for (char c : text.substr(2)) {
            if (c >= '0' && c <= '9') {
                canon.push_back(c);
            } else if (c >= 'a' && c <= 'f') {
                canon.push_back(c);
            } else if (c >= 'A' && c <= 'F') {
                canon.push_back(static_cast<char>(c - 'A' + 'a'));
            } else {
                return std::nullopt;
            }
        }
        Address a;
        a.value_ = std::move(canon);
        return a;
    }

    const std::string& str() const noexcept { return value_; }
    bool empty() const noexcept { return value_.empty(); }

    friend auto operator<=>(const Address&, const Address&) = default;
    friend bool operator==(const Address&, const Address&) = default;

    friend std::ostream& operator<<(std::ostream& os, const Address& a) { return os << a.value_; }

private:
    std::string value_;
};

} // namespace clineage
