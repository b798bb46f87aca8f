#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

namespace lenslab {

inline constexpr uint64_t kFnvBasis = 0xcbf29ce484222325ULL;

inline uint64_t fnv1a64(const void* bytes, size_t len, uint64_t h = kFnvBasis) {
    const auto* p = static_cast<const unsigned char*>(bytes);
    for (size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline uint64_t fnv1a64(const std::string& s, uint64_t h = kFnvBasis) {
    return fnv1a64(s.data(), s.size(), h);
}

std::string fingerprint_hex(uint64_t fp);

} // namespace lenslab
