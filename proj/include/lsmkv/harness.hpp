#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "lsmkv/adversary.hpp"
#include "lsmkv/lsm.hpp"
#include "lsmkv/params.hpp"

namespace lsmkv::harness {

// ---------------------------------------------------------------------------
// Generic phased workloads
// ---------------------------------------------------------------------------

enum class PhaseKind {
    uniform_insert,     // count random distinct keys
    crafted_insert,     // attack a fraction of the runs' filters
    zero_result_lookup, // count lookups guaranteed absent
    existing_lookup,    // count lookups of random live keys
    delete_uniform,     // count deletes of random live keys
};

std::string phase_kind_name(PhaseKind kind);

struct Phase {
    PhaseKind kind = PhaseKind::uniform_insert;
    uint64_t count = 0;      // operations (ignored for crafted_insert)
    double intensity = 1.0;  // crafted_insert: fraction of runs attacked
};

struct WorkloadSpec {
    std::string name = "workload";
    PublicParams params;
    std::size_t repeats = 5;
    uint64_t rng_seed = 1;
    uint64_t prp_seed = 0;  // 0: derived from rng_seed
    uint64_t max_craft_candidates = uint64_t(1) << 40;
    std::vector<Phase> phases;
};

// Flat key=value format, '#' comments. Repeatable `phase = kind:number`
// lines build the phase list (number is an op count, or the attacked-run
// fraction for crafted-insert).
WorkloadSpec parse_spec_text(const std::string& text);
WorkloadSpec parse_spec_file(const std::string& path);

struct PhaseSample {
    double pages_per_op = 0.0;
    double bf_fp_per_op = 0.0;
    double found_per_op = 0.0;
    double seconds = 0.0;
    double lat_p50_ns = 0.0;  // per-op wall clock within the phase
    double lat_p95_ns = 0.0;
    double lat_p99_ns = 0.0;
    uint32_t run_count_after = 0;
    double expected_zero_cost_after = 0.0;
    uint64_t crafted_keys = 0;
};

struct PhaseStats {
    Phase phase;
    std::string label;
    uint64_t ops = 0;
    double pages_per_op_mean = 0.0;
    double pages_per_op_stddev = 0.0;
    double bf_fp_per_op_mean = 0.0;
    double found_per_op_mean = 0.0;
    double seconds_median = 0.0;
    double lat_p50_ns = 0.0;  // medians of the per-repeat percentiles
    double lat_p95_ns = 0.0;
    double lat_p99_ns = 0.0;
    double run_count_after_mean = 0.0;
    double expected_zero_cost_after_mean = 0.0;
    uint64_t crafted_keys_max = 0;
};

struct WorkloadReport {
    WorkloadSpec spec;
    std::vector<PhaseStats> phases;
    // samples[repeat][phase]
    std::vector<std::vector<PhaseSample>> samples;
    // Layout snapshot of the last repeat's store after its final phase,
    // including per-run measured false-positive rates.
    std::vector<lsm::RunStat> final_runs;
};

// Runs the phases once per repeat against a fresh store under
// dir/rep<i>. Within a repeat, all zero-result phases replay the same
// candidate probe stream so before/after comparisons are paired; insert,
// delete and existing-lookup streams continue across phases so keys are
// never re-drawn. Lookup phases that follow data mutations persist and
// reopen the store first, except when a crafted-insert attack is live (a
// reopen rebuilds filter state from disk and would erase it). A spec with
// no phases yields an empty report and touches nothing on disk.
WorkloadReport run_workload(const WorkloadSpec& spec, const std::string& dir);

// ---------------------------------------------------------------------------
// Degradation / mitigation benchmark
// ---------------------------------------------------------------------------

struct DegradeConfig {
    std::string dir;
    PublicParams params;  // params.hardened selects the store under attack
    uint64_t prp_seed = 0;
    uint64_t keys = 1'000'000;
    std::size_t lookups = 20'000;
    std::size_t repeats = 5;
    std::vector<double> intensities{0.25, 0.5, 0.75, 1.0};
    uint64_t rng_seed = 1;
    uint64_t max_craft_candidates = uint64_t(1) << 40;
};

struct IntensityPoint {
    double intensity = 0.0;
    uint32_t runs_attacked = 0;
    double pages_mean = 0.0;
    double pages_stddev = 0.0;
    double bf_fp_per_op_mean = 0.0;
};

struct DegradeResult {
    bool hardened = false;
    uint32_t run_count = 0;
    uint64_t entries = 0;
    double expected_pre_cost = 0.0;  // estimator, zero-result
    double pre_pages_mean = 0.0;
    double pre_pages_stddev = 0.0;
    double pre_fp_per_op_mean = 0.0;
    std::vector<IntensityPoint> points;
    uint64_t crafted_keys_total = 0;
    double craft_seconds_total = 0.0;
    std::vector<double> pre_pages;                // [repeat]
    std::vector<std::vector<double>> post_pages;  // [intensity][repeat]
};

// Builds the store once, then for each repeat: reopen (filters rebuilt
// from disk), measure the zero-result baseline, and sweep the attack over
// an increasing fraction of runs, re-measuring with the same probe stream
// after each step. Crafted keys are computed per run from its public
// filter parameters; the injection only lands on a plain store — a
// hardened store hashes the keyed permutation of each key, so the
// attacker's precomputed bit positions do not correspond to any input it
// can construct.
DegradeResult degrade_benchmark(const DegradeConfig& cfg);

// ---------------------------------------------------------------------------
// Hardening overhead
// ---------------------------------------------------------------------------

struct OverheadConfig {
    std::string dir;
    PublicParams params;  // hardened flag ignored; both modes are run
    uint64_t keys = 200'000;
    std::size_t lookups = 50'000;
    std::size_t repeats = 5;
    std::size_t batch = 1024;  // ops per timing batch
    uint64_t rng_seed = 1;
};

struct OverheadSide {
    double insert_ns_p50 = 0.0;
    double insert_ns_p90 = 0.0;
    double lookup_ns_p50 = 0.0;
    double lookup_ns_p90 = 0.0;
    double lookup_pages_per_op = 0.0;
    double lookup_found_rate = 0.0;
};

struct OverheadResult {
    OverheadSide plain;
    OverheadSide hardened;
    double insert_overhead = 0.0;  // hardened/plain p50 - 1
    double lookup_overhead = 0.0;
    double pages_gap = 0.0;        // hardened - plain pages per lookup
    double aa_insert_delta = 0.0;  // plain-vs-plain rerun noise floor
};

// Same key stream through a plain and a hardened store; batch-timed
// inserts and existing-key lookups, medians over all batches of all
// repeats. A plain-vs-plain rerun bounds the measurement noise.
OverheadResult overhead_benchmark(const OverheadConfig& cfg);

// ---------------------------------------------------------------------------
// CSV emission
// ---------------------------------------------------------------------------

void write_workload_csv(const WorkloadReport& report, std::ostream& out);
// Long form: exactly one row per (phase, repeat, metric) triple.
void write_workload_samples_csv(const WorkloadReport& report,
                                std::ostream& out);
void write_degrade_csv(const DegradeResult& result, std::ostream& out);
// Two-column plot series (attack intensity vs mean pages per lookup),
// baseline first; lines starting with '#' are comments.
void write_degrade_series(const DegradeResult& result, std::ostream& out);
void write_overhead_csv(const OverheadResult& result, std::ostream& out);
void write_scenario_csv(const adversary::ScenarioReport& report,
                        std::ostream& out);
void write_timing_csv(const std::vector<adversary::TimingRow>& rows,
                      std::ostream& out);

}  // namespace lsmkv::harness
