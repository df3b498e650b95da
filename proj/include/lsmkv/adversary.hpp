#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "lsmkv/bloom.hpp"
#include "lsmkv/common.hpp"
#include "lsmkv/lsm.hpp"
#include "lsmkv/parallel.hpp"
#include "lsmkv/params.hpp"

namespace lsmkv::adversary {

struct AttackBudget {
    uint64_t max_candidates = 50'000'000;
    uint64_t rng_seed = 1;
    // Misses tolerated at a freshness threshold before relaxing it; 0 picks
    // a size-dependent default trading key-list optimality against search
    // time.
    uint64_t patience = 0;
};

struct CraftResult {
    std::vector<Bytes> keys;
    uint64_t candidates_tried = 0;
    double seconds = 0.0;
};

// Greedy brute force over counter-derived 8-byte big-endian candidate keys.
// A candidate is accepted iff it sets at least min(threshold, remaining)
// previously-unset bits on a shadow filter; the threshold starts at k and
// relaxes after a patience window without an accept, so the returned list
// saturates the filter with length ceil(m/k) plus a small end-game slack.
CraftResult craft_saturating_keys(const bloom::Params& params,
                                  const AttackBudget& budget = {});

struct TimingRow {
    uint32_t m_bits = 0;
    uint32_t k_hashes = 0;
    uint64_t keys = 0;
    uint64_t candidates_tried = 0;
    double seconds = 0.0;
};

std::vector<TimingRow> saturation_timing(const std::vector<uint32_t>& m_values,
                                         uint32_t k,
                                         const AttackBudget& budget = {});

// ---------------------------------------------------------------------------
// Security games. Two phases: the adversary first commits to the contents of
// the structure, then probes it through a budgeted membership oracle plus an
// unbudgeted state-read oracle, and finally names one key. It wins iff that
// key is fresh (not inserted, not previously queried) and the membership
// oracle accepts it. Exceeding the query budget forfeits the trial.
// ---------------------------------------------------------------------------

struct GameConfig {
    uint64_t n = 100;  // committed set size
    uint64_t t = 0;    // query-oracle budget
    std::size_t trials = 1000;
    uint64_t rng_seed = 1;
    uint64_t max_candidates = 200'000;  // adversary-side search budget
    bool hardened = false;
    Exec exec = Exec::parallel;
    std::size_t transcript_samples = 4;
};

struct Transcript {
    std::size_t trial = 0;
    std::vector<Bytes> chosen;
    std::vector<Bytes> queried;
    Bytes answer;
    bool oracle_accepted = false;
    bool forfeited = false;
    bool win = false;
};

// Step-4 re-evaluation from the transcript alone.
bool transcript_win(const Transcript& t);

struct GameResult {
    std::size_t trials = 0;
    std::size_t wins = 0;
    std::size_t forfeits = 0;
    double win_rate = 0.0;
    double ci_low = 0.0;   // 95% Wilson interval
    double ci_high = 0.0;
    std::vector<Transcript> samples;
};

// Query/state oracles over a standalone filter.
class BloomOracles {
public:
    BloomOracles(const bloom::Filter& filter,
                 const std::optional<prp::Key>& key, uint64_t budget)
        : filter_(filter), key_(key), budget_(budget) {}

    // Budgeted membership oracle; an over-budget call forfeits the trial
    // and answers false.
    bool query(const Bytes& raw);
    // Unbudgeted state read.
    const bloom::Filter& state() const { return filter_; }

    const std::vector<Bytes>& queried() const { return queried_; }
    bool forfeited() const { return forfeited_; }

private:
    bool raw_query(const Bytes& raw) const;

    const bloom::Filter& filter_;
    const std::optional<prp::Key>& key_;
    uint64_t budget_;
    std::vector<Bytes> queried_;
    bool forfeited_ = false;
};

class BloomAdversary {
public:
    virtual ~BloomAdversary() = default;
    virtual std::vector<Bytes> choose(std::mt19937_64& rng,
                                      const GameConfig& cfg) = 0;
    virtual Bytes find_candidate(BloomOracles& oracles, std::mt19937_64& rng,
                                 const GameConfig& cfg) = 0;
};

// Baseline: commits to random keys, reads the filter state, and brute-force
// searches counter-derived candidates its local model claims are false
// positives. Uses zero membership queries.
class StateReadingBloomAdversary : public BloomAdversary {
public:
    std::vector<Bytes> choose(std::mt19937_64& rng,
                              const GameConfig& cfg) override;
    Bytes find_candidate(BloomOracles& oracles, std::mt19937_64& rng,
                         const GameConfig& cfg) override;
};

GameResult smash_bloom_game(BloomAdversary& adversary, const GameConfig& cfg,
                            const bloom::Params& params);

// Oracles over a live store: membership is "any run filter claims the key"
// through the store's key transform; state is the filter snapshot list.
class LsmOracles {
public:
    LsmOracles(const lsm::Store& store, uint64_t budget)
        : store_(store), budget_(budget) {}

    bool query(const Bytes& raw);
    const std::vector<bloom::Filter>& snapshots();

    const std::vector<Bytes>& queried() const { return queried_; }
    bool forfeited() const { return forfeited_; }

private:
    const lsm::Store& store_;
    uint64_t budget_;
    std::vector<Bytes> queried_;
    std::optional<std::vector<bloom::Filter>> snapshots_;
    bool forfeited_ = false;
};

class LsmAdversary {
public:
    virtual ~LsmAdversary() = default;
    virtual std::vector<std::pair<Bytes, std::optional<Bytes>>> choose(
        std::mt19937_64& rng, const GameConfig& cfg,
        const PublicParams& store_params) = 0;
    virtual Bytes find_candidate(LsmOracles& oracles, std::mt19937_64& rng,
                                 const GameConfig& cfg) = 0;
};

// Baseline: commits crafted keys aimed at the run filter its insertions
// will produce (parameters are public), then searches the read state for a
// key some filter claims. Uses zero membership queries.
class CraftedInsertLsmAdversary : public LsmAdversary {
public:
    std::vector<std::pair<Bytes, std::optional<Bytes>>> choose(
        std::mt19937_64& rng, const GameConfig& cfg,
        const PublicParams& store_params) override;
    Bytes find_candidate(LsmOracles& oracles, std::mt19937_64& rng,
                         const GameConfig& cfg) override;
};

// Runs trials against stores built under base_dir/trial_<i>; each trial owns
// a private directory and RNG stream and is removed afterwards.
GameResult smash_lsm_game(LsmAdversary& adversary, const GameConfig& cfg,
                          const PublicParams& store_params,
                          const std::string& base_dir);

// ---------------------------------------------------------------------------
// Deleted-insertions scenario: crafted keys are inserted (and flushed into a
// run whose filter they saturate in the plain store), then all of them are
// deleted. Filters keep charging lookups for data that is gone until the
// runs are rewritten by a full compaction.
// ---------------------------------------------------------------------------

struct ScenarioStage {
    std::string name;
    uint32_t run_count = 0;
    double mean_zero_result_pages = 0.0;
    std::vector<lsm::RunStat> runs;  // measured_fpr populated
};

struct ScenarioReport {
    bool hardened = false;
    PublicParams params;
    uint64_t crafted_keys = 0;
    uint64_t filler_keys = 0;
    std::vector<ScenarioStage> stages;
};

ScenarioReport deleted_insertion_scenario(const std::string& dir,
                                          bool hardened, uint64_t rng_seed,
                                          const AttackBudget& budget = {});

}  // namespace lsmkv::adversary
