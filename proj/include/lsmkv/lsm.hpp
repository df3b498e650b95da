#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "lsmkv/common.hpp"
#include "lsmkv/params.hpp"
#include "lsmkv/prp.hpp"
#include "lsmkv/storage.hpp"

namespace lsmkv::lsm {

struct IoStats {
    uint64_t memtable_probes = 0;
    uint64_t bf_probes = 0;
    uint64_t bf_false_positives = 0;
    uint64_t run_probes = 0;   // read_point calls
    uint64_t pages_read = 0;   // data blocks fetched
};

enum class GetOutcome { found, tombstone, absent };

struct ProbeRecord {
    uint32_t level = 0;
    uint32_t run_index = 0;
    bool bf_positive = false;
    uint32_t pages_read = 0;
};

struct GetTrace {
    bool memtable_hit = false;
    GetOutcome outcome = GetOutcome::absent;
    uint32_t pages_read = 0;
    std::vector<ProbeRecord> probes;
};

struct GetResult {
    bool found = false;
    Bytes value;
};

struct RunStat {
    uint32_t level = 0;
    uint32_t index = 0;
    uint64_t entries = 0;
    uint32_t m_bits = 0;
    uint32_t k_hashes = 0;
    double fill_fraction = 0.0;
    double theoretical_fpr = 0.0;
    double measured_fpr = -1.0;  // negative when not measured
};

struct Stats {
    IoStats io;
    uint64_t memtable_entries = 0;
    uint64_t total_run_entries = 0;
    uint32_t run_count = 0;
    std::vector<RunStat> runs;
};

struct RunRef {
    uint32_t level = 0;  // 1-based
    uint32_t index = 0;  // 0 = most recent within the level
};

// Leveled LSM store: one memtable, at most one settled run per level
// (transiently two during compaction), size ratio T between level
// capacities. Single logical writer; point reads go memtable first, then
// runs by level and recency under Bloom filter protection.
//
// In hardened mode every raw key is passed through a keyed permutation
// before it touches the memtable, runs, or filters; values are unchanged.
// The permutation key lives in memory only.
class Store {
public:
    // Creates the directory if needed. When a manifest exists its
    // parameters win over `params`; a hardened store requires prp_key.
    static Store open(const std::string& dir, const PublicParams& params = {},
                      std::optional<prp::Key> prp_key = std::nullopt);

    void put(const Bytes& key, const Bytes& value);
    void del(const Bytes& key);
    GetResult get(const Bytes& key);
    GetResult get_traced(const Bytes& key, GetTrace& trace);

    // Forces the memtable out to a level-1 run (no-op when empty).
    void flush();
    // Flush plus a full merge of everything into the bottom-most populated
    // level, dropping annihilated tombstones.
    void compact_all();
    // Flush and persist the manifest; the store remains usable.
    void save();

    Stats stats(std::size_t fpr_probes = 0, uint64_t fpr_seed = 1) const;
    const IoStats& io() const { return io_; }
    void reset_io() { io_ = IoStats{}; }

    const PublicParams& params() const { return params_; }
    const std::string& dir() const { return dir_; }
    uint64_t next_sequence() const { return next_sequence_; }
    uint64_t memtable_entries() const { return memtable_.size(); }
    uint64_t total_run_entries() const;
    uint32_t run_count() const;

    // Probe order (level-major, most recent first within a level).
    std::vector<RunRef> run_refs() const;
    const storage::RunHandle& run(RunRef ref) const;
    // Mutable filter access; exists for attack modelling in the harness.
    bloom::Filter& run_filter(RunRef ref);

    // Restricted oracle surface for the security games: does any run's
    // filter claim the key (after the store's key transform)? Reads no
    // data blocks and updates no counters.
    bool bloom_any_positive(const Bytes& key) const;
    // Snapshot of all run filters in probe order. Contains public filter
    // parameters and bit contents only; the permutation key is not part of
    // the filter type and cannot leak through this view.
    std::vector<bloom::Filter> bloom_snapshots() const;

    // Expected disk pages touched by a lookup, from per-run theoretical
    // false-positive rates. Memtable access cost multiplies the sum; page
    // costs are uniform (unit) across levels.
    double expected_zero_result_cost() const;
    double expected_key_in_run_cost(uint32_t level, uint32_t index) const;

    bool hardened() const { return params_.hardened; }

private:
    Store() = default;

    Bytes transform_key(const Bytes& raw) const;
    void flush_memtable();
    void maybe_compact(uint32_t level);
    uint64_t level_capacity(uint32_t level) const;
    bool deepest_populated(uint32_t level) const;
    std::string next_run_file_name();
    bloom::Params bloom_params_for(uint64_t n) const;
    void refresh_run_positions();
    storage::RunHandle write_entries_as_run(
        const std::vector<storage::Entry>& entries, uint32_t level);

    struct MemEntry {
        std::optional<Bytes> value;
        uint64_t sequence = 0;
    };

    std::string dir_;
    PublicParams params_;
    std::optional<prp::Key> prp_key_;
    std::map<Bytes, MemEntry> memtable_;
    // levels_[0] is level 1; runs most-recent-first.
    std::vector<std::vector<storage::RunHandle>> levels_;
    uint64_t next_sequence_ = 0;
    uint64_t next_run_id_ = 1;
    mutable IoStats io_;
};

inline constexpr double kMemtableAccessCost = 1.0;
inline constexpr double kRunPageCost = 1.0;

}  // namespace lsmkv::lsm
