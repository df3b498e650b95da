#include "lsmkv/adversary.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <limits>
#include <unordered_set>

#include "lsmkv/rng.hpp"

namespace fs = std::filesystem;

namespace lsmkv::adversary {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

// How many rejected candidates to tolerate at a freshness threshold before
// relaxing it. Larger windows keep the key list closer to the m/k optimum
// but pay for it in search time, which grows steeply with m; the default
// shrinks the window for very large filters so saturating them stays
// tractable (callers that only care about saturation, not list length,
// pass a small explicit window instead).
uint64_t default_patience(uint32_t m) {
    if (m <= (1u << 21)) return 1u << 16;
    return std::max<uint64_t>(4000, (uint64_t(1) << 37) / m);
}

// Greedy candidate search shared by the saturating attack (max_keys == 0:
// run until the shadow filter is full) and the crafted-choose phase of the
// store game (stop after max_keys accepted keys).
CraftResult craft_keys_internal(const bloom::Params& params,
                                const AttackBudget& budget,
                                uint64_t max_keys) {
    if (params.k_hashes == 0 || params.m_bits < params.k_hashes)
        throw InvalidParams("craft: need k >= 1 and m >= k");

    CraftResult result;
    auto start = Clock::now();

    bloom::Filter shadow(params);
    const uint32_t m = params.m_bits;
    const uint32_t k = params.k_hashes;
    const uint64_t patience =
        budget.patience > 0 ? budget.patience : default_patience(m);
    uint32_t threshold = k;
    uint64_t since_accept = 0;

    uint64_t counter = mix64(budget.rng_seed ^ 0x7a3c9d5b1ef08642ull);
    std::vector<uint32_t> pos(k);

    while (!shadow.saturated() &&
           (max_keys == 0 || result.keys.size() < max_keys)) {
        if (result.candidates_tried >= budget.max_candidates)
            throw BudgetExhausted("craft: candidate budget exhausted at " +
                                  std::to_string(result.candidates_tried) +
                                  " with " + std::to_string(shadow.set_count()) +
                                  "/" + std::to_string(m) + " bits set");
        Bytes cand = u64_be_key(counter++);
        ++result.candidates_tried;

        auto [a, b] = bloom::base_hashes(params, cand.data(), cand.size());
        uint32_t fresh = 0;
        for (uint32_t i = 0; i < k; ++i) {
            pos[i] = bloom::position(a, b, i, m);
            if (shadow.test_bit(pos[i])) continue;
            bool dup = false;
            for (uint32_t j = 0; j < i; ++j)
                if (pos[j] == pos[i]) { dup = true; break; }
            if (!dup) ++fresh;
        }

        uint32_t remaining = m - shadow.set_count();
        uint32_t required = std::min<uint32_t>(threshold, remaining);
        if (fresh >= required) {
            shadow.insert(cand);
            result.keys.push_back(std::move(cand));
            since_accept = 0;
        } else if (++since_accept >= patience) {
            if (threshold > 1) --threshold;
            since_accept = 0;
        }
    }

    result.seconds = seconds_since(start);
    return result;
}

std::pair<double, double> wilson_ci(std::size_t wins, std::size_t n) {
    if (n == 0) return {0.0, 1.0};
    const double z = 1.959963984540054;  // 95%
    const double z2 = z * z;
    double p = double(wins) / double(n);
    double denom = 1.0 + z2 / double(n);
    double center = (p + z2 / (2.0 * double(n))) / denom;
    double half = z *
                  std::sqrt(p * (1.0 - p) / double(n) +
                            z2 / (4.0 * double(n) * double(n))) /
                  denom;
    return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

bool contains(const std::vector<Bytes>& v, const Bytes& x) {
    return std::find(v.begin(), v.end(), x) != v.end();
}

// The state oracles must never expose permutation-key material; scan every
// serialized view for the key bytes before handing state to the adversary.
void assert_no_key_material(const Bytes& view, const prp::Key& key) {
    Bytes needle(reinterpret_cast<const char*>(key.bytes.data()),
                 key.bytes.size());
    if (view.find(needle) != Bytes::npos)
        throw Error("oracle state view contains permutation key material");
}

GameResult finish_result(const GameConfig& cfg, std::vector<uint8_t>& wins,
                         std::vector<uint8_t>& forfeits,
                         std::vector<Transcript>&& samples) {
    GameResult res;
    res.trials = cfg.trials;
    for (std::size_t i = 0; i < cfg.trials; ++i) {
        res.wins += wins[i];
        res.forfeits += forfeits[i];
    }
    res.win_rate = cfg.trials == 0 ? 0.0 : double(res.wins) / double(cfg.trials);
    std::tie(res.ci_low, res.ci_high) = wilson_ci(res.wins, res.trials);
    res.samples = std::move(samples);
    return res;
}

std::vector<Bytes> random_distinct_keys(std::mt19937_64& rng, uint64_t n) {
    std::vector<Bytes> out;
    out.reserve(n);
    std::unordered_set<uint64_t> seen;
    while (out.size() < n) {
        uint64_t v = rng();
        if (seen.insert(v).second) out.push_back(u64_be_key(v));
    }
    return out;
}

// Candidate keys live in their own namespace (9 bytes, 'q' prefix) so they
// can never collide with 8-byte committed keys.
Bytes probe_candidate(uint64_t counter) {
    Bytes out = "q";
    out += u64_be_key(counter);
    return out;
}

}  // namespace

CraftResult craft_saturating_keys(const bloom::Params& params,
                                  const AttackBudget& budget) {
    return craft_keys_internal(params, budget, 0);
}

std::vector<TimingRow> saturation_timing(const std::vector<uint32_t>& m_values,
                                         uint32_t k,
                                         const AttackBudget& budget) {
    std::vector<TimingRow> rows;
    rows.reserve(m_values.size());
    for (uint32_t m : m_values) {
        bloom::Params p{m, k, derive_seed(budget.rng_seed, m)};
        AttackBudget b = budget;
        b.rng_seed = derive_seed(budget.rng_seed, mix64(m) + 1);
        CraftResult r = craft_keys_internal(p, b, 0);
        rows.push_back(TimingRow{m, k, r.keys.size(), r.candidates_tried,
                                 r.seconds});
    }
    return rows;
}

bool transcript_win(const Transcript& t) {
    return !t.forfeited && t.oracle_accepted && !contains(t.chosen, t.answer) &&
           !contains(t.queried, t.answer);
}

// ---------------------------------------------------------------------------
// Filter game
// ---------------------------------------------------------------------------

bool BloomOracles::raw_query(const Bytes& raw) const {
    return key_ ? bloom::secure_query(filter_, *key_, raw)
                : filter_.query(raw);
}

bool BloomOracles::query(const Bytes& raw) {
    if (queried_.size() >= budget_) forfeited_ = true;
    queried_.push_back(raw);
    if (forfeited_) return false;
    return raw_query(raw);
}

std::vector<Bytes> StateReadingBloomAdversary::choose(std::mt19937_64& rng,
                                                      const GameConfig& cfg) {
    return random_distinct_keys(rng, cfg.n);
}

Bytes StateReadingBloomAdversary::find_candidate(BloomOracles& oracles,
                                                 std::mt19937_64& rng,
                                                 const GameConfig& cfg) {
    const bloom::Filter& state = oracles.state();
    uint64_t counter = rng();
    Bytes cand;
    for (uint64_t i = 0; i < cfg.max_candidates; ++i) {
        cand = probe_candidate(counter++);
        if (state.query(cand)) return cand;
    }
    return cand;  // search budget exhausted; almost surely a losing answer
}

GameResult smash_bloom_game(BloomAdversary& adversary, const GameConfig& cfg,
                            const bloom::Params& params) {
    std::vector<uint8_t> wins(cfg.trials, 0), forfeits(cfg.trials, 0);
    std::size_t n_samples = std::min(cfg.transcript_samples, cfg.trials);
    std::vector<Transcript> samples(n_samples);

    for_each_index(cfg.trials, cfg.exec, [&](std::size_t i) {
        auto challenger_rng = make_rng(derive_seed(cfg.rng_seed, 2 * i));
        auto adversary_rng = make_rng(derive_seed(cfg.rng_seed, 2 * i + 1));

        bloom::Params p = params;
        p.hash_seed = challenger_rng();  // fresh public construction coins
        std::optional<prp::Key> key;
        if (cfg.hardened) key = prp::keygen(challenger_rng());

        auto chosen = adversary.choose(adversary_rng, cfg);
        if (chosen.size() > cfg.n) chosen.resize(cfg.n);

        bloom::Filter filter(p);
        for (const auto& s : chosen) {
            if (key)
                bloom::secure_insert(filter, *key, s);
            else
                filter.insert(s);
        }
        if (key) assert_no_key_material(filter.serialize(), *key);

        BloomOracles oracles(filter, key, cfg.t);
        Bytes answer = adversary.find_candidate(oracles, adversary_rng, cfg);

        // Scoring membership check; does not count against the budget.
        bool accepted = key ? bloom::secure_query(filter, *key, answer)
                            : filter.query(answer);
        bool fresh =
            !contains(chosen, answer) && !contains(oracles.queried(), answer);
        bool win = !oracles.forfeited() && fresh && accepted;

        wins[i] = win ? 1 : 0;
        forfeits[i] = oracles.forfeited() ? 1 : 0;
        if (i < n_samples)
            samples[i] = Transcript{i,        std::move(chosen),
                                    oracles.queried(), answer,
                                    accepted, oracles.forfeited(),
                                    win};
    });

    return finish_result(cfg, wins, forfeits, std::move(samples));
}

// ---------------------------------------------------------------------------
// Store game
// ---------------------------------------------------------------------------

bool LsmOracles::query(const Bytes& raw) {
    if (queried_.size() >= budget_) forfeited_ = true;
    queried_.push_back(raw);
    if (forfeited_) return false;
    return store_.bloom_any_positive(raw);
}

const std::vector<bloom::Filter>& LsmOracles::snapshots() {
    if (!snapshots_) snapshots_ = store_.bloom_snapshots();
    return *snapshots_;
}

std::vector<std::pair<Bytes, std::optional<Bytes>>>
CraftedInsertLsmAdversary::choose(std::mt19937_64& rng, const GameConfig& cfg,
                                  const PublicParams& store_params) {
    // The committed keys will be flushed into one run of n entries; that
    // run's filter geometry follows from the public sizing rule.
    uint64_t m64 = uint64_t(
        std::ceil(store_params.bloom_bits_per_key * double(cfg.n)));
    uint32_t k = store_params.bloom_k_hashes;
    uint32_t m = uint32_t(std::min<uint64_t>(
        std::max<uint64_t>(m64, k), std::numeric_limits<uint32_t>::max()));
    bloom::Params target{m, k, store_params.bloom_hash_seed};

    AttackBudget budget;
    budget.rng_seed = rng();
    budget.max_candidates = cfg.max_candidates * 64;
    CraftResult crafted = craft_keys_internal(target, budget, cfg.n);

    std::vector<std::pair<Bytes, std::optional<Bytes>>> out;
    out.reserve(cfg.n);
    std::unordered_set<Bytes> seen;
    for (auto& key : crafted.keys) {
        seen.insert(key);
        out.emplace_back(std::move(key), std::make_optional<Bytes>("v"));
    }
    while (out.size() < cfg.n) {  // filter already saturated: pad randomly
        Bytes key = u64_be_key(rng());
        if (seen.insert(key).second)
            out.emplace_back(std::move(key), std::make_optional<Bytes>("v"));
    }
    return out;
}

Bytes CraftedInsertLsmAdversary::find_candidate(LsmOracles& oracles,
                                                std::mt19937_64& rng,
                                                const GameConfig& cfg) {
    const auto& snapshots = oracles.snapshots();
    uint64_t counter = rng();
    Bytes cand;
    for (uint64_t i = 0; i < cfg.max_candidates; ++i) {
        cand = probe_candidate(counter++);
        for (const auto& f : snapshots)
            if (f.query(cand)) return cand;
    }
    return cand;
}

GameResult smash_lsm_game(LsmAdversary& adversary, const GameConfig& cfg,
                          const PublicParams& store_params,
                          const std::string& base_dir) {
    fs::create_directories(base_dir);

    std::vector<uint8_t> wins(cfg.trials, 0), forfeits(cfg.trials, 0);
    std::size_t n_samples = std::min(cfg.transcript_samples, cfg.trials);
    std::vector<Transcript> samples(n_samples);

    for_each_index(cfg.trials, cfg.exec, [&](std::size_t i) {
        auto challenger_rng = make_rng(derive_seed(cfg.rng_seed, 2 * i));
        auto adversary_rng = make_rng(derive_seed(cfg.rng_seed, 2 * i + 1));

        PublicParams p = store_params;
        p.hardened = cfg.hardened;
        p.bloom_hash_seed = challenger_rng();
        std::optional<prp::Key> key;
        if (cfg.hardened) key = prp::keygen(challenger_rng());

        std::string dir = base_dir + "/trial_" + std::to_string(i);
        fs::remove_all(dir);
        {
            auto store = lsm::Store::open(dir, p, key);

            auto chosen_pairs = adversary.choose(adversary_rng, cfg, p);
            if (chosen_pairs.size() > cfg.n) chosen_pairs.resize(cfg.n);
            std::vector<Bytes> chosen_keys;
            chosen_keys.reserve(chosen_pairs.size());
            for (const auto& [k, v] : chosen_pairs) {
                if (v)
                    store.put(k, *v);
                else
                    store.del(k);
                chosen_keys.push_back(k);
            }
            store.flush();

            if (key)
                for (const auto& f : store.bloom_snapshots())
                    assert_no_key_material(f.serialize(), *key);

            LsmOracles oracles(store, cfg.t);
            Bytes answer =
                adversary.find_candidate(oracles, adversary_rng, cfg);

            bool accepted = store.bloom_any_positive(answer);
            bool fresh = !contains(chosen_keys, answer) &&
                         !contains(oracles.queried(), answer);
            bool win = !oracles.forfeited() && fresh && accepted;

            wins[i] = win ? 1 : 0;
            forfeits[i] = oracles.forfeited() ? 1 : 0;
            if (i < n_samples)
                samples[i] = Transcript{i,        std::move(chosen_keys),
                                        oracles.queried(), answer,
                                        accepted, oracles.forfeited(),
                                        win};
        }
        fs::remove_all(dir);
    });

    return finish_result(cfg, wins, forfeits, std::move(samples));
}

// ---------------------------------------------------------------------------
// Deleted-insertions scenario
// ---------------------------------------------------------------------------

namespace {

ScenarioStage measure_stage(lsm::Store& store, const std::string& name,
                            uint64_t probe_seed,
                            const std::unordered_set<Bytes>& inserted) {
    ScenarioStage stage;
    stage.name = name;

    auto stats = store.stats(/*fpr_probes=*/20000, derive_seed(probe_seed, 1));
    stage.run_count = stats.run_count;
    stage.runs = stats.runs;

    const std::size_t probes = 4000;
    auto rng = make_rng(derive_seed(probe_seed, 2));
    store.reset_io();
    for (std::size_t i = 0; i < probes; ++i) {
        Bytes key;
        do {
            key = u64_be_key(rng());
        } while (inserted.count(key) != 0);
        store.get(key);
    }
    stage.mean_zero_result_pages =
        double(store.io().pages_read) / double(probes);
    store.reset_io();
    return stage;
}

}  // namespace

ScenarioReport deleted_insertion_scenario(const std::string& dir,
                                          bool hardened, uint64_t rng_seed,
                                          const AttackBudget& budget) {
    // Deliberately under-provisioned filters: fewer bits per key than hash
    // functions, so one batch of insertions can cover every filter bit. The
    // batch is large enough that a keyed filter's false-positive rate
    // concentrates well inside the +0.02 reporting margin around its
    // theoretical value (the per-filter spread shrinks like 1/sqrt(m)).
    PublicParams params;
    params.memtable_capacity = 8192;
    params.size_ratio = 4;
    params.bloom_bits_per_key = 3.0;
    params.bloom_k_hashes = 4;
    params.hardened = hardened;

    std::optional<prp::Key> key;
    if (hardened) key = prp::keygen(derive_seed(rng_seed, 0x6b6579));

    fs::remove_all(dir);
    auto store = lsm::Store::open(dir, params, key);

    ScenarioReport report;
    report.hardened = hardened;
    report.params = store.params();

    const uint64_t batch = 4096;
    uint32_t m = uint32_t(std::ceil(params.bloom_bits_per_key * double(batch)));
    bloom::Params target{m, params.bloom_k_hashes, params.bloom_hash_seed};

    AttackBudget b = budget;
    b.rng_seed = derive_seed(rng_seed, 1);
    CraftResult crafted = craft_saturating_keys(target, b);
    if (crafted.keys.size() > batch)
        throw Error("scenario: crafted key set exceeds one batch");
    report.crafted_keys = crafted.keys.size();
    report.filler_keys = batch - crafted.keys.size();

    std::vector<Bytes> keys = crafted.keys;
    std::unordered_set<Bytes> inserted(keys.begin(), keys.end());
    auto rng = make_rng(derive_seed(rng_seed, 2));
    while (keys.size() < batch) {
        Bytes k = u64_be_key(rng());
        if (inserted.insert(k).second) keys.push_back(k);
    }

    for (const auto& k : keys) store.put(k, "v" + k);
    store.flush();
    report.stages.push_back(measure_stage(store, "after-attack-insert",
                                          derive_seed(rng_seed, 10),
                                          inserted));

    for (const auto& k : keys) store.del(k);
    report.stages.push_back(measure_stage(store, "after-delete-all",
                                          derive_seed(rng_seed, 11),
                                          inserted));

    store.compact_all();
    report.stages.push_back(measure_stage(store, "after-recompaction",
                                          derive_seed(rng_seed, 12),
                                          inserted));

    return report;
}

}  // namespace lsmkv::adversary
