#include "lsmkv/lsm.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "lsmkv/bloom.hpp"

namespace fs = std::filesystem;

namespace lsmkv::lsm {

namespace {

void validate_params(const PublicParams& p) {
    if (p.memtable_capacity < 1)
        throw InvalidParams("memtable_capacity must be >= 1");
    if (p.size_ratio < 2) throw InvalidParams("size_ratio must be >= 2");
    if (!(p.bloom_bits_per_key > 0.0))
        throw InvalidParams("bloom_bits_per_key must be positive");
    if (p.bloom_k_hashes < 1) throw InvalidParams("bloom_k_hashes must be >= 1");
    if (p.block_size < 64) throw InvalidParams("block_size too small");
    if (p.lambda_bits != prp::kLambdaBits)
        throw InvalidParams("lambda_bits must be 128");
}

}  // namespace

Store Store::open(const std::string& dir, const PublicParams& params,
                  std::optional<prp::Key> prp_key) {
    Store s;
    s.dir_ = dir;
    fs::create_directories(dir);

    auto manifest = storage::load_manifest(dir);
    if (manifest) {
        s.params_ = manifest->params;
        s.next_sequence_ = manifest->next_sequence;
        s.next_run_id_ = manifest->next_run_id;
        for (std::size_t l = 0; l < manifest->levels.size(); ++l) {
            std::vector<storage::RunHandle> level;
            for (std::size_t i = 0; i < manifest->levels[l].size(); ++i) {
                const storage::RunMeta& rm = manifest->levels[l][i];
                fs::path p = fs::path(dir) / rm.file;
                if (!fs::exists(p))
                    throw OpenFailed("manifest references missing run " +
                                     rm.file);
                level.push_back(storage::open_run(p.string(), uint32_t(l + 1),
                                                  uint32_t(i), rm.entries));
            }
            s.levels_.push_back(std::move(level));
        }
    } else {
        s.params_ = params;
    }
    validate_params(s.params_);

    if (s.params_.hardened) {
        if (!prp_key)
            throw InvalidParams("hardened store requires a permutation key");
        s.prp_key_ = *prp_key;
    }
    return s;
}

Bytes Store::transform_key(const Bytes& raw) const {
    if (raw.empty()) throw InvalidParams("key must be nonempty");
    if (!params_.hardened) return raw;
    return prp::permute_key_bytes(*prp_key_, raw);
}

void Store::put(const Bytes& key, const Bytes& value) {
    Bytes k = transform_key(key);
    std::size_t entry_size = 8 + k.size() + value.size();
    if (entry_size > storage::max_entry_size(params_.block_size))
        throw InvalidParams("entry exceeds max entry size");
    memtable_[std::move(k)] = MemEntry{value, next_sequence_++};
    if (memtable_.size() >= params_.memtable_capacity) flush_memtable();
}

void Store::del(const Bytes& key) {
    Bytes k = transform_key(key);
    memtable_[std::move(k)] = MemEntry{std::nullopt, next_sequence_++};
    if (memtable_.size() >= params_.memtable_capacity) flush_memtable();
}

GetResult Store::get(const Bytes& key) {
    GetTrace trace;
    return get_traced(key, trace);
}

GetResult Store::get_traced(const Bytes& key, GetTrace& trace) {
    trace = GetTrace{};
    Bytes k = transform_key(key);

    ++io_.memtable_probes;
    auto it = memtable_.find(k);
    if (it != memtable_.end()) {
        trace.memtable_hit = true;
        if (it->second.value) {
            trace.outcome = GetOutcome::found;
            return {true, *it->second.value};
        }
        trace.outcome = GetOutcome::tombstone;
        return {false, {}};
    }

    for (uint32_t l = 0; l < levels_.size(); ++l) {
        for (uint32_t i = 0; i < levels_[l].size(); ++i) {
            const storage::RunHandle& run = levels_[l][i];
            ++io_.bf_probes;
            bool positive = run.filter.query(k);
            if (!positive) {
                trace.probes.push_back({l + 1, i, false, 0});
                continue;
            }
            ++io_.run_probes;
            storage::PointResult pr = storage::read_point(run, k);
            io_.pages_read += pr.pages_read;
            trace.pages_read += pr.pages_read;
            trace.probes.push_back({l + 1, i, true, pr.pages_read});
            if (pr.status == storage::PointStatus::found) {
                trace.outcome = GetOutcome::found;
                return {true, std::move(pr.value)};
            }
            if (pr.status == storage::PointStatus::tombstone) {
                trace.outcome = GetOutcome::tombstone;
                return {false, {}};
            }
            ++io_.bf_false_positives;
        }
    }
    trace.outcome = GetOutcome::absent;
    return {false, {}};
}

void Store::flush() { flush_memtable(); }

void Store::compact_all() {
    flush_memtable();
    std::vector<const storage::RunHandle*> inputs;
    for (const auto& level : levels_)
        for (const auto& run : level) inputs.push_back(&run);
    if (inputs.empty()) return;

    std::vector<storage::Entry> merged = storage::merge_runs(inputs, true);
    uint32_t bottom = uint32_t(levels_.size());
    std::vector<std::string> dead;
    for (const auto& level : levels_)
        for (const auto& run : level) dead.push_back(run.path);
    levels_.clear();
    for (const std::string& p : dead) fs::remove(p);
    if (!merged.empty()) {
        levels_.resize(bottom);
        levels_[bottom - 1].push_back(write_entries_as_run(merged, bottom));
    }
    refresh_run_positions();
}

void Store::save() {
    flush_memtable();
    storage::Manifest m;
    m.next_sequence = next_sequence_;
    m.next_run_id = next_run_id_;
    m.params = params_;
    for (const auto& level : levels_) {
        std::vector<storage::RunMeta> lm;
        for (const auto& run : level)
            lm.push_back({fs::path(run.path).filename().string(),
                          run.entry_count});
        m.levels.push_back(std::move(lm));
    }
    storage::save_manifest(dir_, m);
}

uint64_t Store::total_run_entries() const {
    uint64_t n = 0;
    for (const auto& level : levels_)
        for (const auto& run : level) n += run.entry_count;
    return n;
}

uint32_t Store::run_count() const {
    uint32_t n = 0;
    for (const auto& level : levels_) n += uint32_t(level.size());
    return n;
}

std::vector<RunRef> Store::run_refs() const {
    std::vector<RunRef> refs;
    for (uint32_t l = 0; l < levels_.size(); ++l)
        for (uint32_t i = 0; i < levels_[l].size(); ++i)
            refs.push_back({l + 1, i});
    return refs;
}

const storage::RunHandle& Store::run(RunRef ref) const {
    if (ref.level < 1 || ref.level > levels_.size() ||
        ref.index >= levels_[ref.level - 1].size())
        throw InvalidParams("no such run");
    return levels_[ref.level - 1][ref.index];
}

bloom::Filter& Store::run_filter(RunRef ref) {
    if (ref.level < 1 || ref.level > levels_.size() ||
        ref.index >= levels_[ref.level - 1].size())
        throw InvalidParams("no such run");
    return levels_[ref.level - 1][ref.index].filter;
}

bool Store::bloom_any_positive(const Bytes& key) const {
    Bytes k = transform_key(key);
    for (const auto& level : levels_)
        for (const auto& run : level)
            if (run.filter.query(k)) return true;
    return false;
}

std::vector<bloom::Filter> Store::bloom_snapshots() const {
    std::vector<bloom::Filter> out;
    for (const auto& level : levels_)
        for (const auto& run : level) out.push_back(run.filter);
    return out;
}

Stats Store::stats(std::size_t fpr_probes, uint64_t fpr_seed) const {
    Stats st;
    st.io = io_;
    st.memtable_entries = memtable_.size();
    st.total_run_entries = total_run_entries();
    st.run_count = run_count();
    for (uint32_t l = 0; l < levels_.size(); ++l) {
        for (uint32_t i = 0; i < levels_[l].size(); ++i) {
            const storage::RunHandle& run = levels_[l][i];
            RunStat rs;
            rs.level = l + 1;
            rs.index = i;
            rs.entries = run.entry_count;
            rs.m_bits = run.filter.params().m_bits;
            rs.k_hashes = run.filter.params().k_hashes;
            rs.fill_fraction = run.filter.fill_fraction();
            rs.theoretical_fpr =
                bloom::theoretical_fpr(run.filter.params(), run.entry_count);
            if (fpr_probes > 0)
                rs.measured_fpr = bloom::measure_fpr(
                    run.filter, fpr_probes,
                    fpr_seed + rs.level * 1000 + rs.index);
            st.runs.push_back(rs);
        }
    }
    return st;
}

double Store::expected_zero_result_cost() const {
    double sum = 0.0;
    for (const auto& level : levels_)
        for (const auto& run : level)
            sum += bloom::theoretical_fpr(run.filter.params(),
                                          run.entry_count) *
                   kRunPageCost;
    return kMemtableAccessCost * sum;
}

double Store::expected_key_in_run_cost(uint32_t level, uint32_t index) const {
    double sum = 0.0;
    for (uint32_t l = 0; l < levels_.size(); ++l) {
        for (uint32_t i = 0; i < levels_[l].size(); ++i) {
            const storage::RunHandle& run = levels_[l][i];
            if (l + 1 == level && i == index)
                return kMemtableAccessCost * (sum + kRunPageCost);
            sum += bloom::theoretical_fpr(run.filter.params(),
                                          run.entry_count) *
                   kRunPageCost;
        }
    }
    throw InvalidParams("no such run in cost scenario");
}

bloom::Params Store::bloom_params_for(uint64_t n) const {
    uint64_t m = uint64_t(std::ceil(params_.bloom_bits_per_key * double(n)));
    if (m < params_.bloom_k_hashes) m = params_.bloom_k_hashes;
    if (m > 0xffffffffull) throw InvalidParams("bloom filter too large");
    return bloom::Params{uint32_t(m), params_.bloom_k_hashes,
                         params_.bloom_hash_seed};
}

std::string Store::next_run_file_name() {
    char buf[32];
    std::snprintf(buf, sizeof buf, "run_%08llu.sst",
                  static_cast<unsigned long long>(next_run_id_++));
    return buf;
}

storage::RunHandle Store::write_entries_as_run(
    const std::vector<storage::Entry>& entries, uint32_t level) {
    return storage::write_run(entries, level, 0, dir_, next_run_file_name(),
                              bloom_params_for(entries.size()),
                              params_.block_size);
}

void Store::flush_memtable() {
    if (memtable_.empty()) return;
    std::vector<storage::Entry> entries;
    entries.reserve(memtable_.size());
    for (auto& [k, v] : memtable_)
        entries.push_back({k, v.value, v.sequence});
    if (levels_.empty()) levels_.resize(1);
    storage::RunHandle run = write_entries_as_run(entries, 1);
    auto& l1 = levels_[0];
    l1.insert(l1.begin(), std::move(run));
    memtable_.clear();
    refresh_run_positions();
    maybe_compact(1);
}

uint64_t Store::level_capacity(uint32_t level) const {
    uint64_t cap = params_.memtable_capacity;
    for (uint32_t i = 0; i < level; ++i) {
        if (cap > UINT64_MAX / params_.size_ratio) return UINT64_MAX;
        cap *= params_.size_ratio;
    }
    return cap;
}

bool Store::deepest_populated(uint32_t level) const {
    for (std::size_t l = level; l < levels_.size(); ++l)
        if (!levels_[l].empty()) return false;
    return true;
}

void Store::refresh_run_positions() {
    for (uint32_t l = 0; l < levels_.size(); ++l)
        for (uint32_t i = 0; i < levels_[l].size(); ++i) {
            levels_[l][i].level = l + 1;
            levels_[l][i].index = i;
        }
}

void Store::maybe_compact(uint32_t start_level) {
    for (uint32_t level = start_level; level <= levels_.size();) {
        auto& runs = levels_[level - 1];
        uint64_t total = 0;
        for (const auto& run : runs) total += run.entry_count;
        bool over = total > level_capacity(level);
        if (runs.size() <= 1 && !over) break;

        if (over) {
            if (levels_.size() < level + 1) levels_.resize(level + 1);
            std::vector<const storage::RunHandle*> inputs;
            for (const auto& run : levels_[level - 1]) inputs.push_back(&run);
            for (const auto& run : levels_[level]) inputs.push_back(&run);
            bool drop = deepest_populated(level + 1);
            std::vector<storage::Entry> merged =
                storage::merge_runs(inputs, drop);
            std::vector<std::string> dead;
            for (const auto& run : levels_[level - 1]) dead.push_back(run.path);
            for (const auto& run : levels_[level]) dead.push_back(run.path);
            levels_[level - 1].clear();
            levels_[level].clear();
            for (const std::string& p : dead) fs::remove(p);
            if (!merged.empty())
                levels_[level].push_back(
                    write_entries_as_run(merged, level + 1));
            refresh_run_positions();
            ++level;
        } else {
            std::vector<const storage::RunHandle*> inputs;
            for (const auto& run : runs) inputs.push_back(&run);
            bool drop = deepest_populated(level);
            std::vector<storage::Entry> merged =
                storage::merge_runs(inputs, drop);
            std::vector<std::string> dead;
            for (const auto& run : runs) dead.push_back(run.path);
            runs.clear();
            for (const std::string& p : dead) fs::remove(p);
            if (!merged.empty())
                runs.push_back(write_entries_as_run(merged, level));
            refresh_run_positions();
            break;
        }
    }
    while (!levels_.empty() && levels_.back().empty()) levels_.pop_back();
}

}  // namespace lsmkv::lsm
