#pragma once

#include <charconv>
#include <cstdint>
#include <string>
#include <system_error>

namespace volheston {

// Shortest round-trip decimal form (std::to_chars general).
inline std::string format_double(double x) {
    char buf[40];
    auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

// FNV-1a over the canonicalized configuration text.
inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[i] = digits[v & 0xFULL];
        v >>= 4;
    }
    return s;
}

} // namespace volheston
