#pragma once

#include <cstdint>
#include <cstring>

#include "lsmkv/common.hpp"

namespace lsmkv {

// MurmurHash64A (Austin Appleby, public domain), seeded.
inline uint64_t murmur64a(const void* data, std::size_t len, uint64_t seed) {
    const uint64_t m = 0xc6a4a7935bd1e995ull;
    const int r = 47;
    uint64_t h = seed ^ (uint64_t(len) * m);

    const auto* p = static_cast<const unsigned char*>(data);
    const unsigned char* end = p + (len / 8) * 8;
    while (p != end) {
        uint64_t k;
        std::memcpy(&k, p, 8);
        p += 8;
        k *= m;
        k ^= k >> r;
        k *= m;
        h ^= k;
        h *= m;
    }

    std::size_t tail = len & 7u;
    if (tail != 0) {
        uint64_t k = 0;
        for (std::size_t i = tail; i-- > 0;)
            k = (k << 8) | p[i];
        h ^= k;
        h *= m;
    }

    h ^= h >> r;
    h *= m;
    h ^= h >> r;
    return h;
}

inline uint64_t murmur64a(const Bytes& data, uint64_t seed) {
    return murmur64a(data.data(), data.size(), seed);
}

}  // namespace lsmkv
