// Benchmark-harness tests: the key=value workload spec parser, phased
// workload execution (pairing, reproducibility, zero-result guarantees,
// reopen fidelity, latency percentile ordering), the tiny-scale degradation
// and mitigation shapes, the hardening overhead comparison, and the CSV /
// plot-series emitters including exact numeric round-trips.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "lsmkv/harness.hpp"
#include "lsmkv/lsm.hpp"

namespace fs = std::filesystem;
using namespace lsmkv;
namespace harness = lsmkv::harness;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) {
        path = fs::temp_directory_path() / ("lsmkv_harness_" + name);
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string str() const { return path.string(); }
};

std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) out.push_back(line);
    return out;
}

std::vector<std::string> fields_of(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream in(line);
    std::string item;
    while (std::getline(in, item, ',')) out.push_back(item);
    return out;
}

const std::string kAttackSpecText =
    "name = attack-shape\n"
    "repeats = 2\n"
    "seed = 11\n"
    "memtable_cap = 256\n"
    "size_ratio = 4\n"
    "phase = uniform-insert:3000\n"
    "phase = zero-result-lookup:800\n"
    "phase = crafted-insert:1.0\n"
    "phase = zero-result-lookup:800\n";

// Deterministic per-sample fields only (latency and wall-clock vary).
bool same_measurements(const harness::WorkloadReport& a,
                       const harness::WorkloadReport& b) {
    if (a.samples.size() != b.samples.size()) return false;
    for (std::size_t r = 0; r < a.samples.size(); ++r) {
        if (a.samples[r].size() != b.samples[r].size()) return false;
        for (std::size_t p = 0; p < a.samples[r].size(); ++p) {
            const auto& x = a.samples[r][p];
            const auto& y = b.samples[r][p];
            if (x.pages_per_op != y.pages_per_op) return false;
            if (x.bf_fp_per_op != y.bf_fp_per_op) return false;
            if (x.found_per_op != y.found_per_op) return false;
            if (x.run_count_after != y.run_count_after) return false;
            if (x.expected_zero_cost_after != y.expected_zero_cost_after)
                return false;
            if (x.crafted_keys != y.crafted_keys) return false;
        }
    }
    return true;
}

}  // namespace

// ---------------------------------------------------------------------------
// Spec parsing
// ---------------------------------------------------------------------------

TEST_CASE("spec text parses every recognized key") {
    auto spec = harness::parse_spec_text(
        "# a demo spec\n"
        "name = demo run\n"
        "repeats = 7\n"
        "seed = 99  # trailing comment\n"
        "prp_seed = 5\n"
        "max_candidates = 1234\n"
        "hardened = true\n"
        "bits_per_key = 8.5\n"
        "k_hashes = 3\n"
        "size_ratio = 5\n"
        "memtable_cap = 512\n"
        "block_size = 8192\n"
        "bloom_hash_seed = 77\n"
        "\n"
        "phase = uniform-insert:1000\n"
        "phase = crafted-insert:0.5\n"
        "phase = zero-result-lookup:200\n"
        "phase = existing-lookup:300\n"
        "phase = delete:400\n");
    CHECK(spec.name == "demo run");
    CHECK(spec.repeats == 7);
    CHECK(spec.rng_seed == 99);
    CHECK(spec.prp_seed == 5);
    CHECK(spec.max_craft_candidates == 1234);
    CHECK(spec.params.hardened);
    CHECK(spec.params.bloom_bits_per_key == 8.5);
    CHECK(spec.params.bloom_k_hashes == 3);
    CHECK(spec.params.size_ratio == 5);
    CHECK(spec.params.memtable_capacity == 512);
    CHECK(spec.params.block_size == 8192);
    CHECK(spec.params.bloom_hash_seed == 77);

    REQUIRE(spec.phases.size() == 5);
    CHECK(spec.phases[0].kind == harness::PhaseKind::uniform_insert);
    CHECK(spec.phases[0].count == 1000);
    CHECK(spec.phases[1].kind == harness::PhaseKind::crafted_insert);
    CHECK(spec.phases[1].intensity == 0.5);
    CHECK(spec.phases[2].kind == harness::PhaseKind::zero_result_lookup);
    CHECK(spec.phases[3].kind == harness::PhaseKind::existing_lookup);
    CHECK(spec.phases[4].kind == harness::PhaseKind::delete_uniform);
    CHECK(spec.phases[4].count == 400);

    // Kind labels round-trip through the parser.
    for (const auto& phase : spec.phases) {
        auto echo = harness::parse_spec_text(
            "phase = " + harness::phase_kind_name(phase.kind) + ":1\n");
        REQUIRE(echo.phases.size() == 1);
        CHECK(echo.phases[0].kind == phase.kind);
    }
}

TEST_CASE("spec text rejects malformed input") {
    using harness::parse_spec_text;
    CHECK_THROWS_AS(parse_spec_text("just words\n"), InvalidParams);
    CHECK_THROWS_AS(parse_spec_text("= 5\n"), InvalidParams);
    CHECK_THROWS_AS(parse_spec_text("seed =\n"), InvalidParams);
    CHECK_THROWS_AS(parse_spec_text("mystery = 1\n"), InvalidParams);
    CHECK_THROWS_AS(parse_spec_text("seed = twelve\n"), InvalidParams);
    CHECK_THROWS_AS(parse_spec_text("seed = 12tail\n"), InvalidParams);
    CHECK_THROWS_AS(parse_spec_text("hardened = maybe\n"), InvalidParams);
    CHECK_THROWS_AS(parse_spec_text("bits_per_key = ten\n"), InvalidParams);
    CHECK_THROWS_AS(parse_spec_text("phase = uniform-insert\n"),
                    InvalidParams);
    CHECK_THROWS_AS(parse_spec_text("phase = sideways-insert:5\n"),
                    InvalidParams);
    CHECK_THROWS_AS(parse_spec_text("phase = crafted-insert:1.5\n"),
                    InvalidParams);
    CHECK_THROWS_AS(parse_spec_text("phase = crafted-insert:-0.25\n"),
                    InvalidParams);
    CHECK_THROWS_AS(parse_spec_text("repeats = 0\nphase = delete:1\n"),
                    InvalidParams);
    CHECK_THROWS_AS(harness::parse_spec_file("/nonexistent/path/x.spec"),
                    OpenFailed);
}

TEST_CASE("a spec without phases runs to an empty report without touching "
          "disk") {
    auto spec = harness::parse_spec_text("name = idle\nrepeats = 3\n");
    CHECK(spec.phases.empty());

    std::string dir =
        (fs::temp_directory_path() / "lsmkv_harness_never_created").string();
    fs::remove_all(dir);
    auto report = harness::run_workload(spec, dir);
    CHECK(report.phases.empty());
    CHECK(report.samples.empty());
    CHECK(report.final_runs.empty());
    CHECK_FALSE(fs::exists(dir));
}

// ---------------------------------------------------------------------------
// Workload execution
// ---------------------------------------------------------------------------

TEST_CASE("plain workload: attack shape, pairing and reproducibility") {
    TempDir dir("attack_shape");
    auto spec = harness::parse_spec_text(kAttackSpecText);
    auto report = harness::run_workload(spec, dir.str() + "/a");

    REQUIRE(report.phases.size() == 4);
    REQUIRE(report.samples.size() == 2);
    const auto& pre = report.phases[1];
    const auto& post = report.phases[3];

    // Healthy filters answer almost every absent-key probe without I/O;
    // saturated filters force one page from every run.
    CHECK(pre.pages_per_op_mean < 0.5);
    CHECK(pre.found_per_op_mean == 0.0);
    CHECK(post.found_per_op_mean == 0.0);
    CHECK(report.phases[2].crafted_keys_max > 0);
    for (std::size_t r = 0; r < report.samples.size(); ++r) {
        const auto& pre_s = report.samples[r][1];
        const auto& post_s = report.samples[r][3];
        CHECK(post_s.pages_per_op == double(post_s.run_count_after));
        CHECK(post_s.pages_per_op > pre_s.pages_per_op);
        // The cost estimator is analytic — a function of each run's public
        // (m, k, n) only — so poisoned in-memory filters do not move it;
        // the measured pages expose the attack instead.
        CHECK(post_s.expected_zero_cost_after ==
              pre_s.expected_zero_cost_after);
        CHECK(post_s.expected_zero_cost_after < 0.5);
    }

    // The same spec and directory reproduce every I/O measurement.
    auto again = harness::run_workload(spec, dir.str() + "/b");
    CHECK(same_measurements(report, again));

    // Percentile ordering holds for every sample and for the aggregates.
    for (const auto& rep : report.samples)
        for (const auto& s : rep) {
            CHECK(s.lat_p50_ns <= s.lat_p95_ns);
            CHECK(s.lat_p95_ns <= s.lat_p99_ns);
        }
    for (const auto& st : report.phases) {
        CHECK(st.lat_p50_ns <= st.lat_p95_ns);
        CHECK(st.lat_p95_ns <= st.lat_p99_ns);
    }
    CHECK(report.phases[0].lat_p50_ns > 0.0);  // inserts really were timed
}

TEST_CASE("hardened workload: the attack phase changes nothing") {
    TempDir dir("hardened_shape");
    auto spec = harness::parse_spec_text(kAttackSpecText +
                                         std::string("hardened = true\n"));
    auto report = harness::run_workload(spec, dir.str());

    REQUIRE(report.phases.size() == 4);
    for (std::size_t r = 0; r < report.samples.size(); ++r) {
        const auto& pre_s = report.samples[r][1];
        const auto& post_s = report.samples[r][3];
        // Identical probe stream, untouched filters: bitwise-equal metrics.
        CHECK(post_s.pages_per_op == pre_s.pages_per_op);
        CHECK(post_s.bf_fp_per_op == pre_s.bf_fp_per_op);
        CHECK(pre_s.found_per_op == 0.0);
        CHECK(post_s.pages_per_op < 0.5);
    }
}

TEST_CASE("lookup phases reflect the persisted store only") {
    TempDir dir("reopen_fidelity");
    auto spec = harness::parse_spec_text(
        "repeats = 2\n"
        "seed = 4\n"
        "memtable_cap = 256\n"
        "phase = uniform-insert:2000\n"
        "phase = existing-lookup:1000\n"
        "phase = zero-result-lookup:500\n");
    auto report = harness::run_workload(spec, dir.str());

    // Every live key is found; the memtable was flushed before lookups, so
    // reopening the directory shows the exact state the metrics describe.
    CHECK(report.phases[1].found_per_op_mean == 1.0);
    REQUIRE_FALSE(report.final_runs.empty());

    auto store = lsm::Store::open(dir.str() + "/rep1", spec.params);
    auto st = store.stats();
    CHECK(st.memtable_entries == 0);
    REQUIRE(st.runs.size() == report.final_runs.size());
    uint64_t total = 0;
    for (std::size_t i = 0; i < st.runs.size(); ++i) {
        CHECK(st.runs[i].entries == report.final_runs[i].entries);
        CHECK(st.runs[i].fill_fraction == report.final_runs[i].fill_fraction);
        total += st.runs[i].entries;
    }
    CHECK(total == 2000);
    for (const auto& run : report.final_runs) {
        CHECK(run.measured_fpr >= 0.0);  // probing was requested
        CHECK(run.measured_fpr <= run.theoretical_fpr + 0.05);
    }
}

TEST_CASE("deleting everything leaves nothing for existing lookups") {
    TempDir dir("delete_all");
    auto spec = harness::parse_spec_text(
        "repeats = 1\n"
        "seed = 6\n"
        "memtable_cap = 128\n"
        "phase = uniform-insert:1000\n"
        "phase = delete:1000\n"
        "phase = existing-lookup:500\n");
    auto report = harness::run_workload(spec, dir.str());
    const auto& lookup = report.samples[0][2];
    CHECK(lookup.found_per_op == 0.0);
    CHECK(lookup.pages_per_op == 0.0);  // no live keys, no lookups issued
}

// ---------------------------------------------------------------------------
// Degradation benchmark
// ---------------------------------------------------------------------------

namespace {

harness::DegradeConfig tiny_degrade(const std::string& dir, bool hardened) {
    harness::DegradeConfig cfg;
    cfg.dir = dir;
    cfg.params.memtable_capacity = 1024;
    cfg.params.hardened = hardened;
    // 26 exact memtable flushes settle into three runs (1024 / 5120 / 20480),
    // giving the sweep a visible staircase.
    cfg.keys = 26624;
    cfg.lookups = 2000;
    cfg.repeats = 3;
    cfg.intensities = {0.5, 1.0};
    cfg.rng_seed = 17;
    return cfg;
}

}  // namespace

TEST_CASE("plain degradation sweep: staircase up to one page per run") {
    TempDir dir("degrade_plain");
    auto res = harness::degrade_benchmark(tiny_degrade(dir.str(), false));

    CHECK_FALSE(res.hardened);
    CHECK(res.entries == 26624);
    CHECK(res.run_count == 3);
    CHECK(res.crafted_keys_total > 0);
    REQUIRE(res.points.size() == 2);
    REQUIRE(res.pre_pages.size() == 3);
    REQUIRE(res.post_pages.size() == 2);
    for (const auto& per_intensity : res.post_pages)
        CHECK(per_intensity.size() == 3);

    // Healthy baseline matches the estimator within Monte-Carlo noise.
    CHECK(res.pre_pages_mean < 0.5);
    CHECK(std::abs(res.pre_pages_mean - res.expected_pre_cost) <= 0.02);

    // Monotone staircase; the full attack costs exactly one page per run.
    double prev = res.pre_pages_mean;
    for (const auto& pt : res.points) {
        CHECK(pt.pages_mean >= prev);
        prev = pt.pages_mean;
    }
    CHECK(res.points.back().runs_attacked == res.run_count);
    CHECK(res.points.back().pages_mean == double(res.run_count));
    CHECK(res.points.back().pages_stddev == 0.0);
    CHECK(res.points[0].runs_attacked <= res.points[1].runs_attacked);
}

TEST_CASE("hardened degradation sweep: attack is a no-op per repeat") {
    TempDir dir("degrade_hardened");
    auto res = harness::degrade_benchmark(tiny_degrade(dir.str(), true));
    CHECK(res.hardened);
    REQUIRE(res.pre_pages.size() == 3);
    for (std::size_t ii = 0; ii < res.post_pages.size(); ++ii)
        for (std::size_t r = 0; r < res.post_pages[ii].size(); ++r)
            CHECK(res.post_pages[ii][r] == res.pre_pages[r]);
    CHECK(res.pre_pages_mean < 0.5);
}

TEST_CASE("degradation config validation") {
    harness::DegradeConfig cfg = tiny_degrade("/tmp/unused", false);
    cfg.repeats = 0;
    CHECK_THROWS_AS(harness::degrade_benchmark(cfg), InvalidParams);
    cfg = tiny_degrade("/tmp/unused", false);
    cfg.keys = 0;
    CHECK_THROWS_AS(harness::degrade_benchmark(cfg), InvalidParams);
    cfg = tiny_degrade("/tmp/unused", false);
    cfg.intensities = {};
    CHECK_THROWS_AS(harness::degrade_benchmark(cfg), InvalidParams);
    cfg = tiny_degrade("/tmp/unused", false);
    cfg.intensities = {0.5, 1.25};
    CHECK_THROWS_AS(harness::degrade_benchmark(cfg), InvalidParams);
}

// ---------------------------------------------------------------------------
// Overhead benchmark
// ---------------------------------------------------------------------------

TEST_CASE("hardening costs compute on inserts but no pages on lookups") {
    TempDir dir("overhead");
    harness::OverheadConfig cfg;
    cfg.dir = dir.str();
    cfg.keys = 30000;
    cfg.lookups = 10000;
    cfg.repeats = 2;
    cfg.batch = 512;
    cfg.rng_seed = 23;
    auto res = harness::overhead_benchmark(cfg);

    CHECK(res.plain.lookup_found_rate == 1.0);
    CHECK(res.hardened.lookup_found_rate == 1.0);
    CHECK(res.plain.insert_ns_p50 > 0.0);
    CHECK(res.plain.insert_ns_p50 <= res.plain.insert_ns_p90);
    CHECK(res.hardened.insert_ns_p50 <= res.hardened.insert_ns_p90);

    // The permutation adds real per-insert work, clearly above the
    // plain-vs-plain rerun noise floor; page counts stay at parity.
    CHECK(res.insert_overhead > 0.0);
    CHECK(res.insert_overhead > res.aa_insert_delta);
    CHECK(res.plain.lookup_pages_per_op >= 1.0);
    CHECK(std::abs(res.pages_gap) <= 0.02);

    harness::OverheadConfig bad = cfg;
    bad.repeats = 0;
    CHECK_THROWS_AS(harness::overhead_benchmark(bad), InvalidParams);
}

// ---------------------------------------------------------------------------
// CSV and plot-series emission
// ---------------------------------------------------------------------------

TEST_CASE("workload CSV shapes and exact sample round-trip") {
    TempDir dir("csv_shapes");
    auto spec = harness::parse_spec_text(
        "repeats = 2\n"
        "seed = 3\n"
        "memtable_cap = 256\n"
        "phase = uniform-insert:1500\n"
        "phase = zero-result-lookup:400\n"
        "phase = existing-lookup:400\n");
    auto report = harness::run_workload(spec, dir.str());

    std::ostringstream agg;
    harness::write_workload_csv(report, agg);
    auto agg_lines = lines_of(agg.str());
    REQUIRE(agg_lines.size() == 1 + report.phases.size());
    std::size_t header_cols = fields_of(agg_lines[0]).size();
    for (const auto& line : agg_lines)
        CHECK(fields_of(line).size() == header_cols);

    std::ostringstream samples;
    harness::write_workload_samples_csv(report, samples);
    auto rows = lines_of(samples.str());
    const std::size_t metrics = 10;
    REQUIRE(rows.size() == 1 + spec.phases.size() * spec.repeats * metrics);
    CHECK(rows[0] == "phase_index,phase,repeat,metric,value");

    // Every emitted value parses back to the exact source double.
    std::size_t checked = 0;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        auto f = fields_of(rows[i]);
        REQUIRE(f.size() == 5);
        std::size_t p = std::stoul(f[0]);
        std::size_t r = std::stoul(f[2]);
        double v = std::stod(f[4]);
        const auto& s = report.samples[r][p];
        if (f[3] == "pages_per_op") {
            CHECK(v == s.pages_per_op);
            ++checked;
        } else if (f[3] == "seconds") {
            CHECK(v == s.seconds);
            ++checked;
        } else if (f[3] == "lat_p99_ns") {
            CHECK(v == s.lat_p99_ns);
            ++checked;
        } else if (f[3] == "expected_zero_cost_after") {
            CHECK(v == s.expected_zero_cost_after);
            ++checked;
        }
    }
    CHECK(checked == spec.phases.size() * spec.repeats * 4);
}

TEST_CASE("degrade CSV and plot series round-trip and stay monotone") {
    TempDir dir("degrade_csv");
    auto res = harness::degrade_benchmark(tiny_degrade(dir.str(), false));

    std::ostringstream csv;
    harness::write_degrade_csv(res, csv);
    auto rows = lines_of(csv.str());
    REQUIRE(rows.size() == 2 + res.points.size());
    auto baseline = fields_of(rows[1]);
    REQUIRE(baseline.size() == 5);
    CHECK(std::stod(baseline[2]) == res.pre_pages_mean);
    CHECK(std::stod(baseline[3]) == res.pre_pages_stddev);
    CHECK(std::stod(baseline[4]) == res.pre_fp_per_op_mean);
    auto last = fields_of(rows.back());
    CHECK(std::stod(last[2]) == res.points.back().pages_mean);

    std::ostringstream series;
    harness::write_degrade_series(res, series);
    std::vector<std::pair<double, double>> pts;
    for (const auto& line : lines_of(series.str())) {
        if (line[0] == '#') continue;
        std::istringstream in(line);
        double x = 0.0, y = 0.0;
        in >> x >> y;
        REQUIRE(in);
        pts.emplace_back(x, y);
    }
    REQUIRE(pts.size() == 1 + res.points.size());
    CHECK(pts[0].first == 0.0);
    CHECK(pts[0].second == res.pre_pages_mean);
    for (std::size_t i = 1; i < pts.size(); ++i) {
        CHECK(pts[i].first > pts[i - 1].first);    // intensity strictly up
        CHECK(pts[i].second >= pts[i - 1].second);  // cost never falls
    }
}

TEST_CASE("overhead CSV lists every metric once") {
    TempDir dir("overhead_csv");
    harness::OverheadConfig cfg;
    cfg.dir = dir.str();
    cfg.keys = 4000;
    cfg.lookups = 2000;
    cfg.repeats = 1;
    cfg.batch = 256;
    auto res = harness::overhead_benchmark(cfg);

    std::ostringstream csv;
    harness::write_overhead_csv(res, csv);
    auto rows = lines_of(csv.str());
    REQUIRE(rows.size() == 1 + 6 + 6 + 4);
    CHECK(rows[0] == "metric,value");
    for (std::size_t i = 1; i < rows.size(); ++i)
        CHECK(fields_of(rows[i]).size() == 2);
    auto find_value = [&](const std::string& name) {
        for (const auto& row : rows) {
            auto f = fields_of(row);
            if (f[0] == name) return std::stod(f[1]);
        }
        FAIL("missing metric ", name);
        return 0.0;
    };
    CHECK(find_value("plain_insert_ns_p50") == res.plain.insert_ns_p50);
    CHECK(find_value("insert_overhead") == res.insert_overhead);
    CHECK(find_value("pages_gap") == res.pages_gap);
    CHECK(find_value("aa_insert_delta") == res.aa_insert_delta);
}
