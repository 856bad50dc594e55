#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>
#include <vector>

namespace adanas {

inline constexpr uint64_t kFnvOffsetBasis = 0xcbf29ce484222325ULL;
inline constexpr uint64_t kFnvPrime = 0x100000001b3ULL;

// FNV-1a over raw bytes. Used for parameter checksums and config/dataset hashes.
inline uint64_t fnv1a(const void* bytes, size_t n, uint64_t h = kFnvOffsetBasis) {
    const auto* p = static_cast<const unsigned char*>(bytes);
    for (size_t i = 0; i < n; ++i) {
        h ^= static_cast<uint64_t>(p[i]);
        h *= kFnvPrime;
    }
    return h;
}

inline uint64_t fnv1a(std::string_view s, uint64_t h = kFnvOffsetBasis) {
    return fnv1a(s.data(), s.size(), h);
}

// Feeds a double's little-endian byte image into the hash so checksums are
// stable across platforms.
inline uint64_t fnv1a_f64(double v, uint64_t h) {
    uint64_t bits = 0;
    std::memcpy(&bits, &v, sizeof(bits));
    unsigned char le[8];
    for (int i = 0; i < 8; ++i) le[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
    return fnv1a(le, 8, h);
}

inline uint64_t fnv1a_f64_span(const std::vector<double>& vs, uint64_t h = kFnvOffsetBasis) {
    for (double v : vs) h = fnv1a_f64(v, h);
    return h;
}

std::string hex_u64(uint64_t v);
uint64_t parse_hex_u64(std::string_view s);

} // namespace adanas
