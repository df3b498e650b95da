#include "lsmkv/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <unordered_set>

#include "lsmkv/rng.hpp"

namespace fs = std::filesystem;

namespace lsmkv::harness {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

double mean_of(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double s = 0.0;
    for (double x : v) s += x;
    return s / double(v.size());
}

double stddev_of(const std::vector<double>& v, double mean) {
    if (v.size() < 2) return 0.0;
    double s = 0.0;
    for (double x : v) s += (x - mean) * (x - mean);
    return std::sqrt(s / double(v.size() - 1));
}

double percentile(std::vector<double> v, double p) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    double idx = p * double(v.size() - 1);
    std::size_t lo = std::size_t(std::floor(idx));
    std::size_t hi = std::size_t(std::ceil(idx));
    double frac = idx - double(lo);
    return v[lo] * (1.0 - frac) + v[hi] * frac;
}

uint64_t be64(const Bytes& key) {
    uint64_t v = 0;
    for (std::size_t i = 0; i < 8; ++i) v = (v << 8) | uint8_t(key[i]);
    return v;
}

// Zero-result probes are drawn from the intersection of the runs' key
// ranges so a probe can never short-circuit a run on a min/max bound check;
// the filter alone decides whether a page is read. Hardened runs store
// permuted blocks, where raw-space bounds mean nothing; probes then come
// from the whole space (the transform scatters them anyway).
struct ProbeRange {
    uint64_t lo = 0;
    uint64_t hi = ~uint64_t(0);
};

ProbeRange zero_probe_range(const lsm::Store& store) {
    ProbeRange r;
    if (store.hardened()) return r;
    bool any = false;
    uint64_t lo = 0, hi = ~uint64_t(0);
    for (const auto& ref : store.run_refs()) {
        const auto& h = store.run(ref);
        if (h.min_key.size() != 8 || h.max_key.size() != 8) return r;
        lo = std::max(lo, be64(h.min_key));
        hi = std::min(hi, be64(h.max_key));
        any = true;
    }
    if (any && lo <= hi) {
        r.lo = lo;
        r.hi = hi;
    }
    return r;
}

struct ZeroMeasure {
    double pages_per_op = 0.0;
    double fp_per_op = 0.0;
    double found_per_op = 0.0;
    double seconds = 0.0;
};

ZeroMeasure measure_zero(lsm::Store& store, std::size_t ops, uint64_t seed,
                         const std::unordered_set<uint64_t>& members,
                         std::vector<double>* lat_ns = nullptr) {
    ZeroMeasure zm;
    if (ops == 0) return zm;
    auto rng = make_rng(seed);
    ProbeRange range = zero_probe_range(store);
    std::uniform_int_distribution<uint64_t> dist(range.lo, range.hi);
    store.reset_io();
    auto t0 = Clock::now();
    std::size_t found = 0;
    for (std::size_t i = 0; i < ops; ++i) {
        uint64_t v;
        do {
            v = dist(rng);
        } while (members.count(v) != 0);
        if (lat_ns) {
            auto op0 = Clock::now();
            if (store.get(u64_be_key(v)).found) ++found;
            lat_ns->push_back(seconds_since(op0) * 1e9);
        } else {
            if (store.get(u64_be_key(v)).found) ++found;
        }
    }
    zm.seconds = seconds_since(t0);
    zm.pages_per_op = double(store.io().pages_read) / double(ops);
    zm.fp_per_op = double(store.io().bf_false_positives) / double(ops);
    zm.found_per_op = double(found) / double(ops);
    store.reset_io();
    return zm;
}

// The crafted positions presuppose that the filter hashes the attacker's
// bytes directly. A hardened store hashes the keyed permutation of every
// key instead, so the attacker's precomputed positions correspond to no
// input it can construct: the injection lands only on a plain store.
std::size_t inject_attack(lsm::Store& store, const lsm::RunRef& ref,
                          const std::vector<Bytes>& crafted) {
    if (store.hardened()) return 0;
    bloom::Saturator sat(store.run_filter(ref));
    for (const auto& key : crafted) sat.insert_raw(key);
    return crafted.size();
}

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

uint64_t parse_u64(const std::string& v, const std::string& what) {
    try {
        std::size_t pos = 0;
        uint64_t out = std::stoull(v, &pos, 0);
        if (pos != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw InvalidParams("spec: bad integer for " + what + ": '" + v + "'");
    }
}

double parse_f64(const std::string& v, const std::string& what) {
    try {
        std::size_t pos = 0;
        double out = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw InvalidParams("spec: bad number for " + what + ": '" + v + "'");
    }
}

bool parse_bool(const std::string& v, const std::string& what) {
    if (v == "true" || v == "yes" || v == "1") return true;
    if (v == "false" || v == "no" || v == "0") return false;
    throw InvalidParams("spec: bad boolean for " + what + ": '" + v + "'");
}

PhaseKind parse_phase_kind(const std::string& v) {
    if (v == "uniform-insert") return PhaseKind::uniform_insert;
    if (v == "crafted-insert") return PhaseKind::crafted_insert;
    if (v == "zero-result-lookup") return PhaseKind::zero_result_lookup;
    if (v == "existing-lookup") return PhaseKind::existing_lookup;
    if (v == "delete") return PhaseKind::delete_uniform;
    throw InvalidParams("spec: unknown phase kind '" + v + "'");
}

}  // namespace

std::string phase_kind_name(PhaseKind kind) {
    switch (kind) {
        case PhaseKind::uniform_insert: return "uniform-insert";
        case PhaseKind::crafted_insert: return "crafted-insert";
        case PhaseKind::zero_result_lookup: return "zero-result-lookup";
        case PhaseKind::existing_lookup: return "existing-lookup";
        case PhaseKind::delete_uniform: return "delete";
    }
    return "unknown";
}

WorkloadSpec parse_spec_text(const std::string& text) {
    WorkloadSpec spec;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw InvalidParams("spec line " + std::to_string(lineno) +
                                ": expected key = value");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty())
            throw InvalidParams("spec line " + std::to_string(lineno) +
                                ": empty key or value");

        if (key == "name") {
            spec.name = value;
        } else if (key == "repeats") {
            spec.repeats = std::size_t(parse_u64(value, key));
        } else if (key == "seed") {
            spec.rng_seed = parse_u64(value, key);
        } else if (key == "prp_seed") {
            spec.prp_seed = parse_u64(value, key);
        } else if (key == "max_candidates") {
            spec.max_craft_candidates = parse_u64(value, key);
        } else if (key == "hardened") {
            spec.params.hardened = parse_bool(value, key);
        } else if (key == "bits_per_key") {
            spec.params.bloom_bits_per_key = parse_f64(value, key);
        } else if (key == "k_hashes") {
            spec.params.bloom_k_hashes = uint32_t(parse_u64(value, key));
        } else if (key == "size_ratio") {
            spec.params.size_ratio = uint32_t(parse_u64(value, key));
        } else if (key == "memtable_cap") {
            spec.params.memtable_capacity = parse_u64(value, key);
        } else if (key == "block_size") {
            spec.params.block_size = uint32_t(parse_u64(value, key));
        } else if (key == "bloom_hash_seed") {
            spec.params.bloom_hash_seed = parse_u64(value, key);
        } else if (key == "phase") {
            std::size_t colon = value.find(':');
            if (colon == std::string::npos)
                throw InvalidParams("spec line " + std::to_string(lineno) +
                                    ": phase needs kind:number");
            Phase phase;
            phase.kind = parse_phase_kind(trim(value.substr(0, colon)));
            std::string num = trim(value.substr(colon + 1));
            if (phase.kind == PhaseKind::crafted_insert) {
                phase.intensity = parse_f64(num, "phase intensity");
                if (phase.intensity < 0.0 || phase.intensity > 1.0)
                    throw InvalidParams("spec: crafted-insert intensity must "
                                        "be within [0, 1]");
            } else {
                phase.count = parse_u64(num, "phase count");
            }
            spec.phases.push_back(phase);
        } else {
            throw InvalidParams("spec: unknown key '" + key + "'");
        }
    }
    if (spec.repeats == 0) throw InvalidParams("spec: repeats must be >= 1");
    return spec;
}

WorkloadSpec parse_spec_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw OpenFailed("cannot open spec file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_spec_text(ss.str());
}

WorkloadReport run_workload(const WorkloadSpec& spec, const std::string& dir) {
    WorkloadReport report;
    report.spec = spec;
    if (spec.phases.empty()) return report;  // nothing to run, nothing touched
    report.samples.resize(spec.repeats);
    fs::create_directories(dir);

    for (std::size_t r = 0; r < spec.repeats; ++r) {
        std::string rep_dir = dir + "/rep" + std::to_string(r);
        fs::remove_all(rep_dir);
        uint64_t repeat_seed = derive_seed(spec.rng_seed, 0xA11CE + r);

        std::optional<prp::Key> key;
        if (spec.params.hardened)
            key = prp::keygen(spec.prp_seed != 0
                                  ? spec.prp_seed
                                  : derive_seed(repeat_seed, 0x6b6579));
        auto store = lsm::Store::open(rep_dir, spec.params, key);

        std::vector<uint64_t> member_vec;
        std::unordered_set<uint64_t> member_set;
        auto insert_rng = make_rng(derive_seed(repeat_seed, 1));
        auto delete_rng = make_rng(derive_seed(repeat_seed, 2));
        auto existing_rng = make_rng(derive_seed(repeat_seed, 3));
        const uint64_t zero_seed = derive_seed(repeat_seed, 4);
        bool dirty = false;
        bool attacked = false;
        std::set<std::string> attacked_paths;
        uint64_t craft_counter = 0;

        auto settle_for_lookups = [&]() {
            if (!dirty || attacked) return;
            store.save();
            store = lsm::Store::open(rep_dir, spec.params, key);
            dirty = false;
        };

        std::vector<double> lat_ns;
        for (const Phase& phase : spec.phases) {
            PhaseSample sample;
            lat_ns.clear();
            switch (phase.kind) {
                case PhaseKind::uniform_insert: {
                    auto t0 = Clock::now();
                    for (uint64_t i = 0; i < phase.count; ++i) {
                        uint64_t v;
                        do {
                            v = insert_rng();
                        } while (!member_set.insert(v).second);
                        member_vec.push_back(v);
                        auto op0 = Clock::now();
                        store.put(u64_be_key(v), u64_be_key(v));
                        lat_ns.push_back(seconds_since(op0) * 1e9);
                    }
                    sample.seconds = seconds_since(t0);
                    dirty = true;
                    break;
                }
                case PhaseKind::delete_uniform: {
                    auto t0 = Clock::now();
                    for (uint64_t i = 0; i < phase.count && !member_vec.empty();
                         ++i) {
                        std::size_t idx =
                            std::size_t(delete_rng() % member_vec.size());
                        uint64_t v = member_vec[idx];
                        auto op0 = Clock::now();
                        store.del(u64_be_key(v));
                        lat_ns.push_back(seconds_since(op0) * 1e9);
                        member_vec[idx] = member_vec.back();
                        member_vec.pop_back();
                        member_set.erase(v);
                    }
                    sample.seconds = seconds_since(t0);
                    dirty = true;
                    break;
                }
                case PhaseKind::existing_lookup: {
                    settle_for_lookups();
                    store.reset_io();
                    auto t0 = Clock::now();
                    std::size_t found = 0, ops = 0;
                    for (uint64_t i = 0; i < phase.count && !member_vec.empty();
                         ++i) {
                        uint64_t v = member_vec[std::size_t(
                            existing_rng() % member_vec.size())];
                        auto op0 = Clock::now();
                        if (store.get(u64_be_key(v)).found) ++found;
                        lat_ns.push_back(seconds_since(op0) * 1e9);
                        ++ops;
                    }
                    sample.seconds = seconds_since(t0);
                    if (ops > 0) {
                        sample.pages_per_op =
                            double(store.io().pages_read) / double(ops);
                        sample.bf_fp_per_op =
                            double(store.io().bf_false_positives) /
                            double(ops);
                        sample.found_per_op = double(found) / double(ops);
                    }
                    store.reset_io();
                    break;
                }
                case PhaseKind::zero_result_lookup: {
                    settle_for_lookups();
                    ZeroMeasure zm = measure_zero(store, phase.count,
                                                  zero_seed, member_set,
                                                  &lat_ns);
                    sample.pages_per_op = zm.pages_per_op;
                    sample.bf_fp_per_op = zm.fp_per_op;
                    sample.found_per_op = zm.found_per_op;
                    sample.seconds = zm.seconds;
                    break;
                }
                case PhaseKind::crafted_insert: {
                    auto t0 = Clock::now();
                    store.save();
                    if (!attacked) {
                        store = lsm::Store::open(rep_dir, spec.params, key);
                        dirty = false;
                    }
                    auto refs = store.run_refs();
                    // prune attack bookkeeping to runs that still exist
                    std::set<std::string> live;
                    for (const auto& ref : refs) live.insert(store.run(ref).path);
                    for (auto it = attacked_paths.begin();
                         it != attacked_paths.end();)
                        it = live.count(*it) ? std::next(it)
                                             : attacked_paths.erase(it);

                    std::size_t target = std::size_t(
                        std::llround(phase.intensity * double(refs.size())));
                    target = std::min(target, refs.size());
                    for (const auto& ref : refs) {
                        if (attacked_paths.size() >= target) break;
                        const std::string& path = store.run(ref).path;
                        if (attacked_paths.count(path)) continue;
                        adversary::AttackBudget budget;
                        budget.max_candidates = spec.max_craft_candidates;
                        budget.rng_seed =
                            derive_seed(repeat_seed, 0x33 + craft_counter++);
                        // saturation is all that matters here; trade list
                        // optimality for search speed on big filters
                        budget.patience = 4000;
                        auto crafted = adversary::craft_saturating_keys(
                            store.run(ref).filter.params(), budget);
                        sample.crafted_keys += crafted.keys.size();
                        if (inject_attack(store, ref, crafted.keys) > 0)
                            attacked = true;
                        attacked_paths.insert(path);
                    }
                    sample.seconds = seconds_since(t0);
                    break;
                }
            }
            if (!lat_ns.empty()) {
                sample.lat_p50_ns = percentile(lat_ns, 0.50);
                sample.lat_p95_ns = percentile(lat_ns, 0.95);
                sample.lat_p99_ns = percentile(lat_ns, 0.99);
            }
            sample.run_count_after = store.run_count();
            sample.expected_zero_cost_after = store.expected_zero_result_cost();
            report.samples[r].push_back(sample);
        }

        if (r + 1 == spec.repeats)
            report.final_runs =
                store.stats(20000, derive_seed(repeat_seed, 99)).runs;
    }

    // Aggregate per phase across repeats.
    for (std::size_t p = 0; p < spec.phases.size(); ++p) {
        PhaseStats st;
        st.phase = spec.phases[p];
        st.label = phase_kind_name(st.phase.kind);
        st.ops = st.phase.count;
        std::vector<double> pages, fps, founds, secs, runs, costs;
        std::vector<double> p50s, p95s, p99s;
        for (std::size_t r = 0; r < spec.repeats; ++r) {
            const PhaseSample& s = report.samples[r][p];
            pages.push_back(s.pages_per_op);
            fps.push_back(s.bf_fp_per_op);
            founds.push_back(s.found_per_op);
            secs.push_back(s.seconds);
            p50s.push_back(s.lat_p50_ns);
            p95s.push_back(s.lat_p95_ns);
            p99s.push_back(s.lat_p99_ns);
            runs.push_back(double(s.run_count_after));
            costs.push_back(s.expected_zero_cost_after);
            st.crafted_keys_max = std::max(st.crafted_keys_max, s.crafted_keys);
        }
        st.pages_per_op_mean = mean_of(pages);
        st.pages_per_op_stddev = stddev_of(pages, st.pages_per_op_mean);
        st.bf_fp_per_op_mean = mean_of(fps);
        st.found_per_op_mean = mean_of(founds);
        st.seconds_median = percentile(secs, 0.5);
        st.lat_p50_ns = percentile(p50s, 0.5);
        st.lat_p95_ns = percentile(p95s, 0.5);
        st.lat_p99_ns = percentile(p99s, 0.5);
        st.run_count_after_mean = mean_of(runs);
        st.expected_zero_cost_after_mean = mean_of(costs);
        report.phases.push_back(std::move(st));
    }
    return report;
}

DegradeResult degrade_benchmark(const DegradeConfig& cfg) {
    if (cfg.repeats == 0) throw InvalidParams("degrade: repeats must be >= 1");
    if (cfg.keys == 0) throw InvalidParams("degrade: keys must be >= 1");
    if (cfg.intensities.empty())
        throw InvalidParams("degrade: need at least one intensity");

    std::vector<double> intensities = cfg.intensities;
    std::sort(intensities.begin(), intensities.end());
    for (double x : intensities)
        if (x < 0.0 || x > 1.0)
            throw InvalidParams("degrade: intensities must be within [0, 1]");

    DegradeResult res;
    res.hardened = cfg.params.hardened;

    std::optional<prp::Key> key;
    if (cfg.params.hardened)
        key = prp::keygen(cfg.prp_seed != 0
                              ? cfg.prp_seed
                              : derive_seed(cfg.rng_seed, 0x6b6579));

    fs::remove_all(cfg.dir);

    std::unordered_set<uint64_t> members;
    members.reserve(std::size_t(double(cfg.keys) * 1.4));
    {
        auto store = lsm::Store::open(cfg.dir, cfg.params, key);
        auto rng = make_rng(derive_seed(cfg.rng_seed, 1));
        while (members.size() < cfg.keys) {
            uint64_t v = rng();
            if (!members.insert(v).second) continue;
            store.put(u64_be_key(v), u64_be_key(v));
        }
        store.save();
    }

    // Craft every run's saturating key set once; reopens see the same
    // run files, so the key lists stay valid across repeats.
    std::vector<std::vector<Bytes>> crafted;
    {
        auto store = lsm::Store::open(cfg.dir, cfg.params, key);
        res.run_count = store.run_count();
        res.entries = store.total_run_entries();
        res.expected_pre_cost = store.expected_zero_result_cost();
        auto refs = store.run_refs();
        crafted.resize(refs.size());
        for (std::size_t i = 0; i < refs.size(); ++i) {
            adversary::AttackBudget budget;
            budget.max_candidates = cfg.max_craft_candidates;
            budget.rng_seed = derive_seed(cfg.rng_seed, 0xC0 + i);
            // saturation is all that matters here; trade list optimality
            // for search speed on big filters
            budget.patience = 4000;
            auto r = adversary::craft_saturating_keys(
                store.run(refs[i]).filter.params(), budget);
            res.crafted_keys_total += r.keys.size();
            res.craft_seconds_total += r.seconds;
            crafted[i] = std::move(r.keys);
        }
    }

    res.points.resize(intensities.size());
    res.post_pages.assign(intensities.size(), {});
    std::vector<std::vector<double>> post_fp(intensities.size());
    std::vector<double> pre_fp;

    for (std::size_t r = 0; r < cfg.repeats; ++r) {
        auto store = lsm::Store::open(cfg.dir, cfg.params, key);
        auto refs = store.run_refs();
        uint64_t probe_seed = derive_seed(cfg.rng_seed, 2000 + r);

        ZeroMeasure pre = measure_zero(store, cfg.lookups, probe_seed, members);
        res.pre_pages.push_back(pre.pages_per_op);
        pre_fp.push_back(pre.fp_per_op);

        std::size_t attacked = 0;
        for (std::size_t ii = 0; ii < intensities.size(); ++ii) {
            std::size_t target = std::size_t(
                std::llround(intensities[ii] * double(refs.size())));
            target = std::min(target, refs.size());
            target = std::max(target, attacked);
            for (; attacked < target; ++attacked)
                inject_attack(store, refs[attacked], crafted[attacked]);

            ZeroMeasure m =
                measure_zero(store, cfg.lookups, probe_seed, members);
            res.post_pages[ii].push_back(m.pages_per_op);
            post_fp[ii].push_back(m.fp_per_op);

            res.points[ii].intensity = intensities[ii];
            res.points[ii].runs_attacked = uint32_t(target);
        }
    }

    res.pre_pages_mean = mean_of(res.pre_pages);
    res.pre_pages_stddev = stddev_of(res.pre_pages, res.pre_pages_mean);
    res.pre_fp_per_op_mean = mean_of(pre_fp);
    for (std::size_t ii = 0; ii < intensities.size(); ++ii) {
        res.points[ii].pages_mean = mean_of(res.post_pages[ii]);
        res.points[ii].pages_stddev =
            stddev_of(res.post_pages[ii], res.points[ii].pages_mean);
        res.points[ii].bf_fp_per_op_mean = mean_of(post_fp[ii]);
    }
    return res;
}

namespace {

struct SideRaw {
    std::vector<double> insert_ns;  // per-op ns, one entry per batch
    std::vector<double> lookup_ns;
    uint64_t lookup_pages = 0;
    uint64_t lookup_found = 0;
    uint64_t lookups = 0;
};

void build_and_measure(SideRaw& raw, const OverheadConfig& cfg,
                       const PublicParams& params,
                       const std::optional<prp::Key>& key,
                       const std::string& dir, uint64_t rep) {
    fs::remove_all(dir);
    auto store = lsm::Store::open(dir, params, key);

    std::vector<uint64_t> member_vec;
    member_vec.reserve(cfg.keys);
    std::unordered_set<uint64_t> member_set;
    member_set.reserve(std::size_t(double(cfg.keys) * 1.4));
    auto key_rng = make_rng(derive_seed(cfg.rng_seed, 10 + rep));

    const std::size_t batch = std::max<std::size_t>(cfg.batch, 1);
    uint64_t remaining = cfg.keys;
    while (remaining > 0) {
        uint64_t n = std::min<uint64_t>(batch, remaining);
        auto t0 = Clock::now();
        for (uint64_t i = 0; i < n; ++i) {
            uint64_t v;
            do {
                v = key_rng();
            } while (!member_set.insert(v).second);
            member_vec.push_back(v);
            store.put(u64_be_key(v), u64_be_key(v));
        }
        double dt = seconds_since(t0);
        if (n == batch) raw.insert_ns.push_back(dt * 1e9 / double(n));
        remaining -= n;
    }
    store.save();

    auto lookup_rng = make_rng(derive_seed(cfg.rng_seed, 20 + rep));
    store.reset_io();
    uint64_t left = cfg.lookups;
    while (left > 0 && !member_vec.empty()) {
        uint64_t n = std::min<uint64_t>(batch, left);
        auto t0 = Clock::now();
        for (uint64_t i = 0; i < n; ++i) {
            uint64_t v = member_vec[std::size_t(lookup_rng() %
                                                member_vec.size())];
            if (store.get(u64_be_key(v)).found) ++raw.lookup_found;
        }
        double dt = seconds_since(t0);
        if (n == batch) raw.lookup_ns.push_back(dt * 1e9 / double(n));
        left -= n;
        raw.lookups += n;
    }
    raw.lookup_pages += store.io().pages_read;
    store.reset_io();
}

OverheadSide finish_side(const SideRaw& raw) {
    OverheadSide side;
    side.insert_ns_p50 = percentile(raw.insert_ns, 0.5);
    side.insert_ns_p90 = percentile(raw.insert_ns, 0.9);
    side.lookup_ns_p50 = percentile(raw.lookup_ns, 0.5);
    side.lookup_ns_p90 = percentile(raw.lookup_ns, 0.9);
    if (raw.lookups > 0) {
        side.lookup_pages_per_op =
            double(raw.lookup_pages) / double(raw.lookups);
        side.lookup_found_rate =
            double(raw.lookup_found) / double(raw.lookups);
    }
    return side;
}

}  // namespace

OverheadResult overhead_benchmark(const OverheadConfig& cfg) {
    if (cfg.repeats == 0)
        throw InvalidParams("overhead: repeats must be >= 1");
    fs::create_directories(cfg.dir);

    SideRaw plain_raw, hardened_raw, aa_raw;
    for (std::size_t r = 0; r < cfg.repeats; ++r) {
        PublicParams plain_params = cfg.params;
        plain_params.hardened = false;
        PublicParams hard_params = cfg.params;
        hard_params.hardened = true;
        auto key = prp::keygen(derive_seed(cfg.rng_seed, 0x5e00 + r));

        build_and_measure(plain_raw, cfg, plain_params, std::nullopt,
                          cfg.dir + "/plain" + std::to_string(r), r);
        build_and_measure(hardened_raw, cfg, hard_params, key,
                          cfg.dir + "/hardened" + std::to_string(r), r);
        build_and_measure(aa_raw, cfg, plain_params, std::nullopt,
                          cfg.dir + "/plain_again" + std::to_string(r), r);
    }

    OverheadResult res;
    res.plain = finish_side(plain_raw);
    res.hardened = finish_side(hardened_raw);
    OverheadSide aa = finish_side(aa_raw);
    if (res.plain.insert_ns_p50 > 0.0) {
        res.insert_overhead =
            res.hardened.insert_ns_p50 / res.plain.insert_ns_p50 - 1.0;
        res.aa_insert_delta =
            std::abs(aa.insert_ns_p50 - res.plain.insert_ns_p50) /
            res.plain.insert_ns_p50;
    }
    if (res.plain.lookup_ns_p50 > 0.0)
        res.lookup_overhead =
            res.hardened.lookup_ns_p50 / res.plain.lookup_ns_p50 - 1.0;
    res.pages_gap =
        res.hardened.lookup_pages_per_op - res.plain.lookup_pages_per_op;
    return res;
}

namespace {

// CSV consumers re-parse these files; emit doubles at full precision so
// every numeric field survives a round trip exactly.
void full_precision(std::ostream& out) {
    out << std::setprecision(std::numeric_limits<double>::max_digits10);
}

}  // namespace

void write_workload_csv(const WorkloadReport& report, std::ostream& out) {
    full_precision(out);
    out << "phase_index,phase,ops,pages_per_op_mean,pages_per_op_stddev,"
           "bf_fp_per_op_mean,found_per_op_mean,seconds_median,"
           "lat_p50_ns,lat_p95_ns,lat_p99_ns,"
           "run_count_after,expected_zero_cost_after,crafted_keys\n";
    for (std::size_t p = 0; p < report.phases.size(); ++p) {
        const PhaseStats& st = report.phases[p];
        out << p << ',' << st.label << ',' << st.ops << ','
            << st.pages_per_op_mean << ',' << st.pages_per_op_stddev << ','
            << st.bf_fp_per_op_mean << ',' << st.found_per_op_mean << ','
            << st.seconds_median << ',' << st.lat_p50_ns << ','
            << st.lat_p95_ns << ',' << st.lat_p99_ns << ','
            << st.run_count_after_mean << ','
            << st.expected_zero_cost_after_mean << ',' << st.crafted_keys_max
            << '\n';
    }
}

void write_workload_samples_csv(const WorkloadReport& report,
                                std::ostream& out) {
    full_precision(out);
    out << "phase_index,phase,repeat,metric,value\n";
    for (std::size_t r = 0; r < report.samples.size(); ++r) {
        for (std::size_t p = 0; p < report.samples[r].size(); ++p) {
            const PhaseSample& s = report.samples[r][p];
            auto row = [&](const char* metric, double value) {
                out << p << ',' << phase_kind_name(report.spec.phases[p].kind)
                    << ',' << r << ',' << metric << ',' << value << '\n';
            };
            row("pages_per_op", s.pages_per_op);
            row("bf_fp_per_op", s.bf_fp_per_op);
            row("found_per_op", s.found_per_op);
            row("seconds", s.seconds);
            row("lat_p50_ns", s.lat_p50_ns);
            row("lat_p95_ns", s.lat_p95_ns);
            row("lat_p99_ns", s.lat_p99_ns);
            row("run_count_after", double(s.run_count_after));
            row("expected_zero_cost_after", s.expected_zero_cost_after);
            row("crafted_keys", double(s.crafted_keys));
        }
    }
}

void write_degrade_csv(const DegradeResult& result, std::ostream& out) {
    full_precision(out);
    out << "intensity,runs_attacked,pages_per_lookup_mean,"
           "pages_per_lookup_stddev,bf_fp_per_lookup_mean\n";
    out << "0,0," << result.pre_pages_mean << ',' << result.pre_pages_stddev
        << ',' << result.pre_fp_per_op_mean << '\n';
    for (const IntensityPoint& pt : result.points)
        out << pt.intensity << ',' << pt.runs_attacked << ',' << pt.pages_mean
            << ',' << pt.pages_stddev << ',' << pt.bf_fp_per_op_mean << '\n';
}

void write_degrade_series(const DegradeResult& result, std::ostream& out) {
    full_precision(out);
    out << "# zero-result lookup cost vs fraction of runs attacked\n";
    out << "# intensity  pages_per_lookup_mean\n";
    out << 0.0 << "  " << result.pre_pages_mean << '\n';
    for (const IntensityPoint& pt : result.points)
        out << pt.intensity << "  " << pt.pages_mean << '\n';
}

void write_overhead_csv(const OverheadResult& result, std::ostream& out) {
    full_precision(out);
    out << "metric,value\n";
    auto side = [&](const char* prefix, const OverheadSide& s) {
        out << prefix << "_insert_ns_p50," << s.insert_ns_p50 << '\n'
            << prefix << "_insert_ns_p90," << s.insert_ns_p90 << '\n'
            << prefix << "_lookup_ns_p50," << s.lookup_ns_p50 << '\n'
            << prefix << "_lookup_ns_p90," << s.lookup_ns_p90 << '\n'
            << prefix << "_lookup_pages_per_op," << s.lookup_pages_per_op
            << '\n'
            << prefix << "_lookup_found_rate," << s.lookup_found_rate << '\n';
    };
    side("plain", result.plain);
    side("hardened", result.hardened);
    out << "insert_overhead," << result.insert_overhead << '\n'
        << "lookup_overhead," << result.lookup_overhead << '\n'
        << "pages_gap," << result.pages_gap << '\n'
        << "aa_insert_delta," << result.aa_insert_delta << '\n';
}

void write_scenario_csv(const adversary::ScenarioReport& report,
                        std::ostream& out) {
    full_precision(out);
    out << "stage,run_count,mean_zero_result_pages,max_run_measured_fpr,"
           "max_run_theoretical_fpr\n";
    for (const auto& stage : report.stages) {
        double max_meas = 0.0, max_theo = 0.0;
        for (const auto& run : stage.runs) {
            max_meas = std::max(max_meas, run.measured_fpr);
            max_theo = std::max(max_theo, run.theoretical_fpr);
        }
        out << stage.name << ',' << stage.run_count << ','
            << stage.mean_zero_result_pages << ',' << max_meas << ','
            << max_theo << '\n';
    }
}

void write_timing_csv(const std::vector<adversary::TimingRow>& rows,
                      std::ostream& out) {
    full_precision(out);
    out << "m_bits,k_hashes,keys,candidates_tried,seconds\n";
    for (const auto& row : rows)
        out << row.m_bits << ',' << row.k_hashes << ',' << row.keys << ','
            << row.candidates_tried << ',' << row.seconds << '\n';
}

}  // namespace lsmkv::harness
