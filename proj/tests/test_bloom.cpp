// Bloom filter unit tests: hash-family contract, completeness/soundness,
// fill accounting, saturation estimates (checked against Monte-Carlo
// oracles), wire format, and the keyed-permutation wrappers.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "doctest.h"
#include "lsmkv/adversary.hpp"
#include "lsmkv/bloom.hpp"
#include "lsmkv/rng.hpp"

using lsmkv::Bytes;
using lsmkv::bloom::Filter;
using lsmkv::bloom::Params;

namespace {

Bytes counter_key(uint64_t v) { return lsmkv::u64_be_key(v); }

// Finds a key whose k hash positions are all distinct (or all equal when
// `want_distinct` is false), searching counter keys from `start`.
Bytes find_key(const Params& p, bool want_distinct, uint64_t start = 0) {
    for (uint64_t v = start; v < start + 1'000'000; ++v) {
        Bytes key = counter_key(v);
        auto [a, b] = lsmkv::bloom::base_hashes(p, key.data(), key.size());
        bool distinct = true;
        bool equal = true;
        for (uint32_t i = 1; i < p.k_hashes; ++i) {
            uint32_t p0 = lsmkv::bloom::position(a, b, 0, p.m_bits);
            uint32_t pi = lsmkv::bloom::position(a, b, i, p.m_bits);
            if (pi == p0) distinct = false;
            if (pi != p0) equal = false;
        }
        if (want_distinct ? distinct : equal) return key;
    }
    throw std::runtime_error("no key found with requested hash structure");
}

}  // namespace

TEST_CASE("construction validates parameters and starts empty") {
    CHECK_THROWS_AS(Filter({0, 1, 1}), lsmkv::InvalidParams);
    CHECK_THROWS_AS(Filter({8, 0, 1}), lsmkv::InvalidParams);
    CHECK_THROWS_AS(Filter({3, 4, 1}), lsmkv::InvalidParams);

    Filter f({8, 2, 99});
    CHECK(f.set_count() == 0);
    CHECK(f.fill_fraction() == 0.0);
    CHECK(f.n_inserted() == 0);
    CHECK_FALSE(f.saturated());
    for (uint32_t bit = 0; bit < 8; ++bit) CHECK_FALSE(f.test_bit(bit));
    for (uint64_t v = 0; v < 64; ++v) CHECK_FALSE(f.query(counter_key(v)));
}

TEST_CASE("positions follow the double-hashing contract") {
    Params p{1024, 4, 0x5cb1a7a1e53b42d7ull};
    auto rng = lsmkv::make_rng(1);
    for (int i = 0; i < 200; ++i) {
        Bytes key = lsmkv::random_bytes(rng, 1 + i % 24);
        auto [a, b] = lsmkv::bloom::base_hashes(p, key.data(), key.size());
        Filter f(p);
        auto pos = f.positions(key);
        REQUIRE(pos.size() == p.k_hashes);
        for (uint32_t j = 0; j < p.k_hashes; ++j)
            CHECK(pos[j] == uint32_t((a + uint64_t(j) * b) % p.m_bits));
    }

    // Deterministic for a fixed seed, different for a different seed.
    Params p2 = p;
    p2.hash_seed ^= 0x1234567;
    Filter f1(p), f1b(p), f2(p2);
    Bytes key = counter_key(42);
    CHECK(f1.positions(key) == f1b.positions(key));
    CHECK(f1.positions(key) != f2.positions(key));
}

TEST_CASE("insert sets exactly the hashed bits and is idempotent") {
    Params p{8, 2, 7};
    Filter f(p);
    Bytes x = counter_key(5);
    auto pos = f.positions(x);
    f.insert(x);
    for (uint32_t bit = 0; bit < 8; ++bit) {
        bool expect = (bit == pos[0]) || (bit == pos[1]);
        CHECK(f.test_bit(bit) == expect);
    }
    uint32_t count_after_one = f.set_count();
    CHECK(count_after_one == (pos[0] == pos[1] ? 1u : 2u));
    CHECK(f.query(x));

    f.insert(x);
    CHECK(f.set_count() == count_after_one);
    CHECK(f.n_inserted() == 2);  // call count, not distinct-key count

    // Bit packing: word i/64, bit i%64.
    for (uint32_t bit : pos)
        CHECK(((f.words()[bit >> 6] >> (bit & 63u)) & 1u) == 1u);
}

TEST_CASE("no false negatives over random workloads") {
    auto rng = lsmkv::make_rng(11);
    for (Params p : {Params{64, 2, 1}, Params{1024, 4, 2}, Params{777, 5, 3}}) {
        Filter f(p);
        std::vector<Bytes> inserted;
        for (int i = 0; i < 2000; ++i) {
            Bytes key = lsmkv::random_bytes(rng, 1 + (rng() % 20));
            f.insert(key);
            inserted.push_back(key);
        }
        for (const Bytes& key : inserted) CHECK(f.query(key));
    }
}

TEST_CASE("fill fraction is monotone and k distinct positions fill k/m") {
    Params p{1024, 4, 5};
    Bytes key = find_key(p, /*want_distinct=*/true);
    Filter f(p);
    f.insert(key);
    CHECK(f.fill_fraction() == doctest::Approx(4.0 / 1024.0));

    double last = 0.0;
    auto rng = lsmkv::make_rng(12);
    for (int i = 0; i < 3000; ++i) {
        f.insert(lsmkv::random_bytes(rng, 8));
        double fill = f.fill_fraction();
        CHECK(fill >= last);
        last = fill;
    }
}

TEST_CASE("a lone set bit cannot satisfy a key with distinct positions") {
    Params p{64, 2, 17};
    Bytes one_bit_key = find_key(p, /*want_distinct=*/false);
    Filter f(p);
    f.insert(one_bit_key);
    REQUIRE(f.set_count() == 1);

    // Any non-inserted key with two distinct positions has at least one
    // unset bit, so the query must answer false.
    int checked = 0;
    for (uint64_t v = 1000; checked < 50; ++v) {
        Bytes key = counter_key(v);
        auto pos = f.positions(key);
        if (pos[0] == pos[1]) continue;
        CHECK_FALSE(f.query(key));
        ++checked;
    }
}

TEST_CASE("saturated filter answers true for every key") {
    Params p{8, 2, 3};
    Filter f(p);
    // Drive to saturation with whatever keys add fresh bits.
    for (uint64_t v = 0; !f.saturated(); ++v) {
        Bytes key = counter_key(v);
        auto pos = f.positions(key);
        if (!f.test_bit(pos[0]) || !f.test_bit(pos[1])) f.insert(key);
    }
    CHECK(f.fill_fraction() == 1.0);
    auto rng = lsmkv::make_rng(13);
    for (int i = 0; i < 1000; ++i)
        CHECK(f.query(lsmkv::random_bytes(rng, 12)));
    CHECK(lsmkv::bloom::measure_fpr(f, 10'000, 77) == 1.0);
}

TEST_CASE("theoretical FPR formula edge cases and limits") {
    Params p{1024, 4, 1};
    CHECK(lsmkv::bloom::theoretical_fpr(p, 0) == 0.0);

    // Monotone in n.
    double prev = 0.0;
    for (uint64_t n : {1, 10, 100, 1000, 10000}) {
        double v = lsmkv::bloom::theoretical_fpr(p, n);
        CHECK(v >= prev);
        CHECK(v <= 1.0);
        prev = v;
    }

    // Tends to 0 as m grows with n, k fixed.
    double last = 1.0;
    for (uint32_t mexp = 10; mexp <= 20; ++mexp) {
        double v = lsmkv::bloom::theoretical_fpr({1u << mexp, 4, 1}, 100);
        CHECK(v < last);
        last = v;
    }
    CHECK(last < 1e-8);
}

TEST_CASE("theoretical FPR matches measurement within 0.01") {
    Params p{1024, 4, 0x5cb1a7a1e53b42d7ull};
    Filter f(p);
    auto rng = lsmkv::make_rng(21);
    for (int i = 0; i < 100; ++i) f.insert(lsmkv::random_bytes(rng, 16));
    double theo = lsmkv::bloom::theoretical_fpr(p, 100);
    double meas = lsmkv::bloom::measure_fpr(f, 100'000, 4242);
    CHECK(std::abs(theo - meas) <= 0.01);

    CHECK(lsmkv::bloom::measure_fpr(Filter(p), 10'000, 1) == 0.0);  // fresh
}

TEST_CASE("soundness: measured FPR stays near theoretical at low load") {
    auto rng = lsmkv::make_rng(22);
    for (uint32_t m : {512u, 2048u, 8192u}) {
        Params p{m, 4, rng()};
        Filter f(p);
        uint64_t n = m / 10;
        for (uint64_t i = 0; i < n; ++i) f.insert(lsmkv::random_bytes(rng, 16));
        double meas = lsmkv::bloom::measure_fpr(f, 20'000, rng());
        CHECK(meas <= lsmkv::bloom::theoretical_fpr(p, n) + 0.02);
    }
}

TEST_CASE("random-saturation formula values") {
    CHECK(lsmkv::bloom::expected_random_saturation({256, 1, 0}) == 1419);
    CHECK(lsmkv::bloom::expected_random_saturation({2, 1, 0}) == 1);
    // k = m reduces the formula to floor(ln m).
    CHECK(lsmkv::bloom::expected_random_saturation({1024, 1024, 0}) == 6);
}

TEST_CASE("Monte-Carlo saturation mean lands within 15% of the estimate") {
    Params p{256, 1, 0};
    auto trials = lsmkv::bloom::measure_random_saturation(p, 100, 5);
    double estimate = 1419.0;
    CHECK(trials.mean >= estimate * 0.85);
    CHECK(trials.mean <= estimate * 1.15);
    CHECK(trials.insertions.size() == 100);
    for (uint64_t c : trials.insertions) CHECK(c >= 256);  // needs >= m inserts
}

TEST_CASE("tiny-filter saturation diverges from the formula") {
    // The closed-form estimate gives 1 for (m=2, k=1); the true mean is the
    // coupon-collector value 2*(1/2 + 1) = 3. The measurement arbitrates.
    Params p{2, 1, 0};
    CHECK(lsmkv::bloom::expected_random_saturation(p) == 1);
    auto trials = lsmkv::bloom::measure_random_saturation(p, 2000, 6);
    CHECK(trials.mean > 2.6);
    CHECK(trials.mean < 3.4);
}

TEST_CASE("serialization round-trips and rejects corruption") {
    Params p{1000, 3, 0xfeedbeef12345678ull};
    Filter f(p);
    auto rng = lsmkv::make_rng(31);
    for (int i = 0; i < 200; ++i) f.insert(lsmkv::random_bytes(rng, 10));

    Bytes wire = f.serialize();
    CHECK(wire.size() == Filter::serialized_size(p.m_bits));
    Filter g = Filter::deserialize(wire.data(), wire.size());
    CHECK(g.params() == p);
    CHECK(g.words() == f.words());
    CHECK(g.set_count() == f.set_count());
    for (uint64_t v = 0; v < 500; ++v)
        CHECK(g.query(counter_key(v)) == f.query(counter_key(v)));

    SUBCASE("too short") {
        CHECK_THROWS_AS(Filter::deserialize(wire.data(), 8),
                        lsmkv::CorruptBlock);
    }
    SUBCASE("truncated words") {
        CHECK_THROWS_AS(Filter::deserialize(wire.data(), wire.size() - 1),
                        lsmkv::CorruptBlock);
    }
    SUBCASE("invalid parameters in header") {
        Bytes bad = wire;
        bad[4] = bad[5] = bad[6] = bad[7] = '\0';  // k_hashes = 0
        CHECK_THROWS_AS(Filter::deserialize(bad.data(), bad.size()),
                        lsmkv::CorruptBlock);
    }
    SUBCASE("stray bits beyond m_bits") {
        Bytes bad = wire;
        bad[bad.size() - 1] = char(0x80);  // bit 1023 of the last word; m=1000
        CHECK_THROWS_AS(Filter::deserialize(bad.data(), bad.size()),
                        lsmkv::CorruptBlock);
    }
}

TEST_CASE("keyed wrappers preserve completeness and state layout") {
    Params p{1024, 4, 9};
    lsmkv::prp::Key key = lsmkv::prp::keygen(55);
    Filter f(p);
    auto rng = lsmkv::make_rng(32);
    std::vector<Bytes> raws;
    for (int i = 0; i < 300; ++i) raws.push_back(lsmkv::random_bytes(rng, 8));
    for (const Bytes& r : raws) lsmkv::bloom::secure_insert(f, key, r);
    for (const Bytes& r : raws) CHECK(lsmkv::bloom::secure_query(f, key, r));

    // Identical state to inserting the permuted blocks through the plain path.
    Filter g(p);
    for (const Bytes& r : raws)
        g.insert(lsmkv::prp::block_to_bytes(lsmkv::prp::permute_key(key, r)));
    CHECK(g.words() == f.words());
}

TEST_CASE("crafted keys lose their structure under the keyed path") {
    Params p{1024, 4, 0x5cb1a7a1e53b42d7ull};
    lsmkv::adversary::AttackBudget budget;
    budget.rng_seed = 3;
    auto craft = lsmkv::adversary::craft_saturating_keys(p, budget);

    // Through the plain path the list saturates the filter outright.
    Filter plain(p);
    for (const Bytes& k : craft.keys) plain.insert(k);
    CHECK(plain.fill_fraction() == 1.0);

    // Through the keyed path the same list behaves like random keys: its
    // mean fill over 50 permutation keys stays within 3 sigma of the mean
    // fill of equally many random insertions.
    const int trials = 50;
    std::vector<double> random_fill(trials), secure_fill(trials);
    auto rng = lsmkv::make_rng(33);
    for (int t = 0; t < trials; ++t) {
        Filter fr(p);
        for (std::size_t i = 0; i < craft.keys.size(); ++i)
            fr.insert(lsmkv::random_bytes(rng, 16));
        random_fill[t] = fr.fill_fraction();

        Filter fs(p);
        lsmkv::prp::Key pk = lsmkv::prp::keygen(1000 + uint64_t(t));
        for (const Bytes& k : craft.keys)
            lsmkv::bloom::secure_insert(fs, pk, k);
        secure_fill[t] = fs.fill_fraction();
    }
    auto mean = [](const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v) s += x;
        return s / double(v.size());
    };
    double mu_r = mean(random_fill);
    double mu_s = mean(secure_fill);
    double var = 0.0;
    for (double x : random_fill) var += (x - mu_r) * (x - mu_r);
    double sigma = std::sqrt(var / double(trials - 1));
    CHECK(std::abs(mu_s - mu_r) <= 3.0 * sigma);
    CHECK(mu_s < 0.9);  // far from the 1.0 the plain path reaches
}

TEST_CASE("FPR measurement is deterministic and execution-mode independent") {
    Params p{4096, 4, 14};
    Filter f(p);
    auto rng = lsmkv::make_rng(34);
    for (int i = 0; i < 400; ++i) f.insert(lsmkv::random_bytes(rng, 16));
    double serial = lsmkv::bloom::measure_fpr(f, 50'000, 9, lsmkv::Exec::serial);
    double again = lsmkv::bloom::measure_fpr(f, 50'000, 9, lsmkv::Exec::serial);
    double parallel =
        lsmkv::bloom::measure_fpr(f, 50'000, 9, lsmkv::Exec::parallel);
    CHECK(serial == again);
    CHECK(serial == parallel);
}
