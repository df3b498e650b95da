#pragma once

#include <cstdint>
#include <random>

#include "lsmkv/common.hpp"

namespace lsmkv {

// splitmix64 finalizer; good enough to decorrelate nearby seeds.
inline uint64_t mix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

// Derives an independent stream seed from a base seed and a stream index.
// Used so that trial i / probe i gets its own deterministic RNG stream,
// which makes serial and parallel execution produce identical results.
inline uint64_t derive_seed(uint64_t base, uint64_t stream) {
    return mix64(base ^ mix64(stream ^ 0xa5a5a5a55a5a5a5aull));
}

inline std::mt19937_64 make_rng(uint64_t seed) {
    return std::mt19937_64(mix64(seed));
}

inline Bytes random_bytes(std::mt19937_64& rng, std::size_t len) {
    Bytes out(len, '\0');
    std::size_t i = 0;
    while (i < len) {
        uint64_t v = rng();
        for (int b = 0; b < 8 && i < len; ++b, ++i) {
            out[i] = char(v & 0xff);
            v >>= 8;
        }
    }
    return out;
}

}  // namespace lsmkv
