#include "lsmkv/bloom.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <numeric>

#include "lsmkv/rng.hpp"

namespace lsmkv::bloom {

Filter::Filter(Params params) : params_(params) {
    if (params_.k_hashes < 1) throw InvalidParams("k_hashes must be >= 1");
    if (params_.m_bits < params_.k_hashes)
        throw InvalidParams("m_bits must be >= k_hashes");
    words_.assign((params_.m_bits + 63) / 64, 0);
}

void Filter::insert(const void* key, std::size_t len) {
    auto [a, b] = base_hashes(params_, key, len);
    for (uint32_t i = 0; i < params_.k_hashes; ++i)
        set_bit(position(a, b, i, params_.m_bits));
    ++n_inserted_;
}

bool Filter::query(const void* key, std::size_t len) const {
    auto [a, b] = base_hashes(params_, key, len);
    for (uint32_t i = 0; i < params_.k_hashes; ++i)
        if (!test_bit(position(a, b, i, params_.m_bits))) return false;
    return true;
}

std::vector<uint32_t> Filter::positions(const Bytes& key) const {
    auto [a, b] = base_hashes(params_, key.data(), key.size());
    std::vector<uint32_t> out(params_.k_hashes);
    for (uint32_t i = 0; i < params_.k_hashes; ++i)
        out[i] = position(a, b, i, params_.m_bits);
    return out;
}

Bytes Filter::serialize() const {
    Bytes out;
    out.reserve(serialized_size(params_.m_bits));
    put_u32le(out, params_.m_bits);
    put_u32le(out, params_.k_hashes);
    put_u64le(out, params_.hash_seed);
    for (uint64_t w : words_) put_u64le(out, w);
    return out;
}

Filter Filter::deserialize(const char* data, std::size_t len) {
    if (len < 16) throw CorruptBlock("bloom block too short");
    Params p;
    p.m_bits = get_u32le(data);
    p.k_hashes = get_u32le(data + 4);
    p.hash_seed = get_u64le(data + 8);
    if (p.k_hashes < 1 || p.m_bits < p.k_hashes)
        throw CorruptBlock("bloom block has invalid parameters");
    std::size_t nwords = (p.m_bits + 63) / 64;
    if (len < 16 + 8 * nwords) throw CorruptBlock("bloom block truncated");
    Filter f(p);
    uint32_t count = 0;
    for (std::size_t i = 0; i < nwords; ++i) {
        f.words_[i] = get_u64le(data + 16 + 8 * i);
        count += uint32_t(std::popcount(f.words_[i]));
    }
    if (p.m_bits % 64 != 0) {
        uint64_t tail_mask = (1ull << (p.m_bits % 64)) - 1;
        if (f.words_[nwords - 1] & ~tail_mask)
            throw CorruptBlock("bloom block has bits beyond m_bits");
    }
    f.set_count_ = count;
    return f;
}

double theoretical_fpr(const Params& params, uint64_t n) {
    if (n == 0) return 0.0;
    double m = double(params.m_bits);
    double k = double(params.k_hashes);
    if (params.m_bits == 1) return 1.0;
    double miss = std::exp(double(n) * k * std::log1p(-1.0 / m));
    return std::pow(1.0 - miss, k);
}

uint64_t expected_random_saturation(const Params& params) {
    double m = double(params.m_bits);
    return uint64_t(std::floor(m * std::log(m) / double(params.k_hashes)));
}

double measure_fpr(const Filter& filter, std::size_t probes, uint64_t seed,
                   Exec exec) {
    if (probes == 0) return 0.0;
    std::vector<uint8_t> hit(probes, 0);
    for_each_index(probes, exec, [&](std::size_t i) {
        uint64_t s = derive_seed(seed, i);
        char key[16];
        uint64_t u0 = mix64(s + 1), u1 = mix64(s + 2);
        std::memcpy(key, &u0, 8);
        std::memcpy(key + 8, &u1, 8);
        hit[i] = filter.query(key, sizeof key) ? 1 : 0;
    });
    uint64_t positives = std::accumulate(hit.begin(), hit.end(), uint64_t(0));
    return double(positives) / double(probes);
}

SaturationTrials measure_random_saturation(const Params& params,
                                           std::size_t trials, uint64_t seed,
                                           Exec exec) {
    SaturationTrials out;
    out.insertions.assign(trials, 0);
    for_each_index(trials, exec, [&](std::size_t t) {
        Filter f(params);
        auto rng = make_rng(derive_seed(seed, t));
        uint64_t count = 0;
        while (!f.saturated()) {
            Bytes key = random_bytes(rng, 16);
            f.insert(key);
            ++count;
        }
        out.insertions[t] = count;
    });
    if (trials == 0) return out;
    double sum = 0.0;
    for (uint64_t c : out.insertions) sum += double(c);
    out.mean = sum / double(trials);
    double var = 0.0;
    for (uint64_t c : out.insertions) {
        double d = double(c) - out.mean;
        var += d * d;
    }
    out.stddev = trials > 1 ? std::sqrt(var / double(trials - 1)) : 0.0;
    return out;
}

void secure_insert(Filter& filter, const prp::Key& key, const Bytes& raw) {
    prp::Block block = prp::permute_key(key, raw);
    filter.insert(block.data(), block.size());
}

bool secure_query(const Filter& filter, const prp::Key& key, const Bytes& raw) {
    prp::Block block = prp::permute_key(key, raw);
    return filter.query(block.data(), block.size());
}

}  // namespace lsmkv::bloom
