#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>

#include "lsmkv/common.hpp"

namespace lsmkv::prp {

// 128-bit permutation blocks: every raw key (<= 15 bytes) maps injectively
// into one block, and a keyed permutation (AES-128, single block) maps
// blocks to blocks. Values never pass through the permutation.
inline constexpr std::size_t kBlockLen = 16;
inline constexpr std::size_t kMaxRawKeyLen = kBlockLen - 1;
inline constexpr unsigned kLambdaBits = 128;

using Block = std::array<uint8_t, kBlockLen>;

struct Key {
    std::array<uint8_t, kBlockLen> bytes{};

    bool operator==(const Key&) const = default;
};

// Fresh key from the system CSPRNG.
Key keygen();
// Deterministic key for tests and seeded benchmarks.
Key keygen(uint64_t seed);

Key key_from_hex(const std::string& hex);
std::string key_to_hex(const Key& key);

Block forward(const Key& key, const Block& input);
Block inverse(const Key& key, const Block& output);

// Injective padding: block = raw || 0x80 || 0x00... with the final byte
// holding the raw length (a 15-byte raw key occupies the full prefix and
// only the length byte marks it).
Block pad(const Bytes& raw);       // throws KeyTooLong
Bytes unpad(const Block& block);   // throws CorruptBlock

Block permute_key(const Key& key, const Bytes& raw);
Bytes unpermute_key(const Key& key, const Block& block);

// The permuted block as a byte string, ready to use as a storage key.
Bytes permute_key_bytes(const Key& key, const Bytes& raw);

inline Block block_from_bytes(const Bytes& b) {
    if (b.size() != kBlockLen) throw InvalidParams("block must be 16 bytes");
    Block out;
    for (std::size_t i = 0; i < kBlockLen; ++i) out[i] = uint8_t(b[i]);
    return out;
}

inline Bytes block_to_bytes(const Block& b) {
    return Bytes(reinterpret_cast<const char*>(b.data()), b.size());
}

}  // namespace lsmkv::prp
