#pragma once

#include <cstdint>

namespace lsmkv {

// Every public knob of a store. Echoed into the manifest; the permutation
// key is deliberately NOT part of this (it never touches disk).
struct PublicParams {
    uint64_t memtable_capacity = 4096;  // entries
    uint32_t size_ratio = 4;            // level i capacity multiplier
    double bloom_bits_per_key = 10.0;
    uint32_t bloom_k_hashes = 4;
    uint32_t block_size = 4096;  // bytes
    bool hardened = false;
    uint32_t lambda_bits = 128;
    // Filters are keyed by a public per-store seed, like production engines;
    // an adversary is assumed to know it.
    uint64_t bloom_hash_seed = 0x5cb1a7a1e53b42d7ull;

    bool operator==(const PublicParams&) const = default;
};

}  // namespace lsmkv
