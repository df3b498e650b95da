#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "lsmkv/common.hpp"
#include "lsmkv/hash.hpp"
#include "lsmkv/parallel.hpp"
#include "lsmkv/prp.hpp"

namespace lsmkv::bloom {

struct Params {
    uint32_t m_bits = 0;
    uint32_t k_hashes = 0;
    uint64_t hash_seed = 0;

    bool operator==(const Params&) const = default;
};

// Two independent 64-bit hashes of the key; position i is (a + i*b) mod m.
inline std::pair<uint64_t, uint64_t> base_hashes(const Params& p,
                                                 const void* key,
                                                 std::size_t len) {
    uint64_t a = murmur64a(key, len, p.hash_seed);
    uint64_t b = murmur64a(key, len, p.hash_seed ^ 0x9e3779b97f4a7c15ull);
    return {a, b};
}

inline uint32_t position(uint64_t a, uint64_t b, uint32_t i, uint32_t m) {
    return uint32_t((a + uint64_t(i) * b) % m);
}

class Filter {
public:
    explicit Filter(Params params);

    const Params& params() const { return params_; }

    void insert(const void* key, std::size_t len);
    void insert(const Bytes& key) { insert(key.data(), key.size()); }

    bool query(const void* key, std::size_t len) const;
    bool query(const Bytes& key) const { return query(key.data(), key.size()); }

    std::vector<uint32_t> positions(const Bytes& key) const;

    bool test_bit(uint32_t bit) const {
        return (words_[bit >> 6] >> (bit & 63u)) & 1u;
    }

    uint32_t set_count() const { return set_count_; }
    uint64_t n_inserted() const { return n_inserted_; }
    double fill_fraction() const {
        return params_.m_bits == 0 ? 0.0
                                   : double(set_count_) / double(params_.m_bits);
    }
    bool saturated() const { return set_count_ == params_.m_bits; }

    const std::vector<uint64_t>& words() const { return words_; }

    // Wire format: [u32 m_bits][u32 k_hashes][u64 hash_seed][words], all
    // little-endian, words packed with bit i at word i/64, bit i%64.
    Bytes serialize() const;
    static Filter deserialize(const char* data, std::size_t len);

    static std::size_t serialized_size(uint32_t m_bits) {
        return 16 + 8 * std::size_t((m_bits + 63) / 64);
    }

private:
    friend class Saturator;

    bool set_bit(uint32_t bit) {
        uint64_t& w = words_[bit >> 6];
        uint64_t mask = 1ull << (bit & 63u);
        if (w & mask) return false;
        w |= mask;
        ++set_count_;
        return true;
    }

    Params params_;
    std::vector<uint64_t> words_;
    uint32_t set_count_ = 0;
    uint64_t n_inserted_ = 0;
};

// Mutable access to a filter's bits for attack modelling: inserts a key
// through the same hash family the filter uses, without the inserted-count
// bookkeeping meaning anything beyond the attack itself.
class Saturator {
public:
    explicit Saturator(Filter& f) : f_(f) {}
    void insert_raw(const Bytes& key) { f_.insert(key); }

private:
    Filter& f_;
};

// Expected false-positive probability after n distinct insertions:
// (1 - (1 - 1/m)^(k*n))^k.
double theoretical_fpr(const Params& params, uint64_t n);

// Expected number of uniformly random insertions to saturate the filter:
// floor(m * ln(m) / k). Diverges from the coupon-collector mean for tiny m;
// Monte-Carlo measurement arbitrates (see measure_random_saturation).
uint64_t expected_random_saturation(const Params& params);

// Fraction of `probes` uniformly random (non-inserted, by namespace) keys
// the filter answers true for.
double measure_fpr(const Filter& filter, std::size_t probes, uint64_t seed,
                   Exec exec = Exec::serial);

struct SaturationTrials {
    double mean = 0.0;
    double stddev = 0.0;
    std::vector<uint64_t> insertions;  // one entry per trial
};

// Monte-Carlo oracle: insert random keys into a fresh filter until every
// bit is set, once per trial.
SaturationTrials measure_random_saturation(const Params& params,
                                           std::size_t trials, uint64_t seed,
                                           Exec exec = Exec::serial);

// Keyed wrappers: the filter only ever sees the permuted block.
void secure_insert(Filter& filter, const prp::Key& key, const Bytes& raw);
bool secure_query(const Filter& filter, const prp::Key& key, const Bytes& raw);

}  // namespace lsmkv::bloom
