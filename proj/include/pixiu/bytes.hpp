#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace pixiu {

using Bytes = std::vector<uint8_t>;
using BytesView = std::span<const uint8_t>;

inline Bytes to_bytes(std::string_view s) {
    return Bytes(s.begin(), s.end());
}

inline std::string to_string(BytesView b) {
    return std::string(b.begin(), b.end());
}

std::string hex_encode(BytesView data);
Bytes hex_decode(std::string_view hex);  // throws std::invalid_argument on bad input

// True if `needle` occurs as a contiguous subsequence of `haystack`.
bool contains_window(BytesView haystack, BytesView needle);

}  // namespace pixiu
