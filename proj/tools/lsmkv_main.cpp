// Command-line front end: a small key-value store with per-run filters, a
// filter-saturation attack toolkit, security games, scenario and benchmark
// drivers. Exit codes: 0 success (including NOT_FOUND lookups), 1 usage
// error, 2 runtime failure.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "lsmkv/adversary.hpp"
#include "lsmkv/bloom.hpp"
#include "lsmkv/common.hpp"
#include "lsmkv/harness.hpp"
#include "lsmkv/lsm.hpp"
#include "lsmkv/params.hpp"
#include "lsmkv/prp.hpp"
#include "lsmkv/rng.hpp"
#include "lsmkv/storage.hpp"

using nlohmann::json;
using namespace lsmkv;

namespace {

void add_param_flags(CLI::App* cmd, PublicParams& p,
                     bool with_hardened = true) {
    cmd->add_option("--memtable-cap", p.memtable_capacity,
                    "memtable entries before a flush")
        ->capture_default_str();
    cmd->add_option("--size-ratio", p.size_ratio, "level size ratio")
        ->capture_default_str();
    cmd->add_option("--bits-per-key", p.bloom_bits_per_key,
                    "filter bits per key")
        ->capture_default_str();
    cmd->add_option("--k-hashes", p.bloom_k_hashes,
                    "hash functions per filter")
        ->capture_default_str();
    cmd->add_option("--block-size", p.block_size, "data block size in bytes")
        ->capture_default_str();
    cmd->add_option("--bloom-hash-seed", p.bloom_hash_seed,
                    "public filter hash seed")
        ->capture_default_str();
    if (with_hardened)
        cmd->add_flag("--hardened", p.hardened,
                      "pass keys through the keyed permutation");
}

// Resolving the permutation key: an existing hardened store requires the
// key it was created with; a fresh hardened store gets a generated one,
// printed once so the store can be reopened later.
std::optional<prp::Key> resolve_prp(const std::string& dir,
                                    const PublicParams& params,
                                    const std::string& hex) {
    auto manifest = storage::load_manifest(dir);
    bool hardened = manifest ? manifest->params.hardened : params.hardened;
    if (!hardened) return std::nullopt;
    if (!hex.empty()) return prp::key_from_hex(hex);
    if (manifest)
        throw InvalidParams("store at " + dir +
                            " is hardened; pass --prp-key-hex");
    auto key = prp::keygen();
    std::cerr << "generated permutation key (required to reopen this store): "
              << prp::key_to_hex(key) << "\n";
    return key;
}

Bytes decode_arg(const std::string& arg, bool hex) {
    return hex ? from_hex(arg) : Bytes(arg);
}

std::string printable_or_hex(const Bytes& b, bool hex) {
    if (hex) return to_hex(b);
    for (char c : b)
        if (uint8_t(c) < 0x20 || uint8_t(c) > 0x7e) return "0x" + to_hex(b);
    return std::string(b);
}

json run_stat_json(const lsm::RunStat& r) {
    return json{{"level", r.level},
                {"index", r.index},
                {"entries", r.entries},
                {"m_bits", r.m_bits},
                {"k_hashes", r.k_hashes},
                {"fill_fraction", r.fill_fraction},
                {"theoretical_fpr", r.theoretical_fpr},
                {"measured_fpr", r.measured_fpr}};
}

json game_json(const adversary::GameResult& r, double epsilon,
               const std::string& game, bool hardened) {
    return json{{"game", game},
                {"hardened", hardened},
                {"trials", r.trials},
                {"wins", r.wins},
                {"forfeits", r.forfeits},
                {"win_rate", r.win_rate},
                {"ci95_low", r.ci_low},
                {"ci95_high", r.ci_high},
                {"theoretical_fpr", epsilon}};
}

void print_game(const adversary::GameResult& r, double epsilon,
                const std::string& game, bool hardened, bool as_json) {
    if (as_json) {
        std::cout << game_json(r, epsilon, game, hardened).dump(2) << "\n";
        return;
    }
    std::cout << game << (hardened ? " (hardened)" : " (plain)") << ": wins "
              << r.wins << "/" << r.trials << "  win_rate " << r.win_rate
              << "  ci95 [" << r.ci_low << ", " << r.ci_high << "]"
              << "  forfeits " << r.forfeits
              << "  reference_fpr " << epsilon << "\n";
}

std::vector<uint32_t> parse_u32_list(const std::string& csv) {
    std::vector<uint32_t> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(uint32_t(std::stoul(item)));
    return out;
}

std::vector<double> parse_f64_list(const std::string& csv) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(std::stod(item));
    return out;
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path);
    out << text;
    if (!out) throw IoError("short write to " + path);
}

// Benchmark artifact bundle: <out_dir>/<stem>.csv plus <stem>.json.
void emit_bundle(const std::string& out_dir, const std::string& stem,
                 const std::string& csv, const json& summary) {
    std::filesystem::create_directories(out_dir);
    write_text_file(out_dir + "/" + stem + ".csv", csv);
    write_text_file(out_dir + "/" + stem + ".json", summary.dump(2) + "\n");
}

json degrade_json(const harness::DegradeResult& res) {
    json j{{"hardened", res.hardened},
           {"run_count", res.run_count},
           {"entries", res.entries},
           {"expected_pre_cost", res.expected_pre_cost},
           {"pre_pages_mean", res.pre_pages_mean},
           {"pre_pages_stddev", res.pre_pages_stddev},
           {"pre_fp_per_op_mean", res.pre_fp_per_op_mean},
           {"crafted_keys_total", res.crafted_keys_total},
           {"craft_seconds_total", res.craft_seconds_total},
           {"points", json::array()}};
    for (const auto& pt : res.points)
        j["points"].push_back(json{{"intensity", pt.intensity},
                                   {"runs_attacked", pt.runs_attacked},
                                   {"pages_mean", pt.pages_mean},
                                   {"pages_stddev", pt.pages_stddev},
                                   {"bf_fp_per_op_mean",
                                    pt.bf_fp_per_op_mean}});
    return j;
}

json overhead_json(const harness::OverheadResult& res) {
    auto side = [](const harness::OverheadSide& s) {
        return json{{"insert_ns_p50", s.insert_ns_p50},
                    {"insert_ns_p90", s.insert_ns_p90},
                    {"lookup_ns_p50", s.lookup_ns_p50},
                    {"lookup_ns_p90", s.lookup_ns_p90},
                    {"lookup_pages_per_op", s.lookup_pages_per_op},
                    {"lookup_found_rate", s.lookup_found_rate}};
    };
    return json{{"plain", side(res.plain)},
                {"hardened", side(res.hardened)},
                {"insert_overhead", res.insert_overhead},
                {"lookup_overhead", res.lookup_overhead},
                {"pages_gap", res.pages_gap},
                {"aa_insert_delta", res.aa_insert_delta}};
}

json workload_json(const harness::WorkloadReport& report) {
    json j{{"name", report.spec.name},
           {"repeats", report.spec.repeats},
           {"hardened", report.spec.params.hardened},
           {"phases", json::array()},
           {"final_runs", json::array()}};
    for (const auto& st : report.phases)
        j["phases"].push_back(json{
            {"label", st.label},
            {"ops", st.ops},
            {"pages_per_op_mean", st.pages_per_op_mean},
            {"pages_per_op_stddev", st.pages_per_op_stddev},
            {"bf_fp_per_op_mean", st.bf_fp_per_op_mean},
            {"found_per_op_mean", st.found_per_op_mean},
            {"seconds_median", st.seconds_median},
            {"lat_p50_ns", st.lat_p50_ns},
            {"lat_p95_ns", st.lat_p95_ns},
            {"lat_p99_ns", st.lat_p99_ns},
            {"run_count_after_mean", st.run_count_after_mean},
            {"expected_zero_cost_after_mean",
             st.expected_zero_cost_after_mean},
            {"crafted_keys_max", st.crafted_keys_max}});
    for (const auto& r : report.final_runs)
        j["final_runs"].push_back(run_stat_json(r));
    return j;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"lsmkv: log-structured KV store with filter hardening"};
    app.require_subcommand(1);
    app.set_config("--config", "", "flat key=value configuration file");

    // ---- db ----------------------------------------------------------
    auto* db = app.add_subcommand("db", "store operations");
    db->require_subcommand(1);

    struct DbOpts {
        std::string dir = "./lsmkv-data";
        std::string prp_hex;
        PublicParams params;
        bool hex = false;
        bool as_json = false;
        std::string key, value;
        std::size_t fpr_probes = 0;
        uint64_t seed = 1;
        uint32_t level = 1, index = 0;
        std::size_t limit = 32;
    } dbo;

    auto add_db_common = [&](CLI::App* cmd, bool with_params) {
        cmd->add_option("--dir", dbo.dir, "store directory")
            ->capture_default_str();
        cmd->add_option("--prp-key-hex", dbo.prp_hex,
                        "permutation key (32 hex chars)");
        cmd->add_flag("--hex", dbo.hex, "keys/values are hex encoded");
        if (with_params) add_param_flags(cmd, dbo.params);
    };

    auto* db_put = db->add_subcommand("put", "insert or overwrite a key");
    add_db_common(db_put, true);
    db_put->add_option("key", dbo.key)->required();
    db_put->add_option("value", dbo.value)->required();
    db_put->callback([&] {
        auto key = resolve_prp(dbo.dir, dbo.params, dbo.prp_hex);
        auto store = lsm::Store::open(dbo.dir, dbo.params, key);
        store.put(decode_arg(dbo.key, dbo.hex), decode_arg(dbo.value, dbo.hex));
        store.save();
    });

    auto* db_get = db->add_subcommand("get", "look up a key");
    add_db_common(db_get, true);
    db_get->add_option("key", dbo.key)->required();
    db_get->callback([&] {
        auto key = resolve_prp(dbo.dir, dbo.params, dbo.prp_hex);
        auto store = lsm::Store::open(dbo.dir, dbo.params, key);
        auto res = store.get(decode_arg(dbo.key, dbo.hex));
        if (res.found)
            std::cout << printable_or_hex(res.value, dbo.hex) << "\n";
        else
            std::cout << "NOT_FOUND\n";
    });

    auto* db_del = db->add_subcommand("del", "delete a key");
    add_db_common(db_del, true);
    db_del->add_option("key", dbo.key)->required();
    db_del->callback([&] {
        auto key = resolve_prp(dbo.dir, dbo.params, dbo.prp_hex);
        auto store = lsm::Store::open(dbo.dir, dbo.params, key);
        store.del(decode_arg(dbo.key, dbo.hex));
        store.save();
    });

    auto* db_compact = db->add_subcommand("compact",
                                          "merge everything into one run");
    add_db_common(db_compact, true);
    db_compact->callback([&] {
        auto key = resolve_prp(dbo.dir, dbo.params, dbo.prp_hex);
        auto store = lsm::Store::open(dbo.dir, dbo.params, key);
        store.compact_all();
        store.save();
    });

    auto* db_stats = db->add_subcommand("stats", "structure and filter stats");
    add_db_common(db_stats, true);
    db_stats->add_option("--fpr-probes", dbo.fpr_probes,
                         "measure per-run FPR with this many probes");
    db_stats->add_option("--seed", dbo.seed, "probe seed")
        ->capture_default_str();
    db_stats->add_flag("--json", dbo.as_json, "emit JSON");
    db_stats->callback([&] {
        auto key = resolve_prp(dbo.dir, dbo.params, dbo.prp_hex);
        auto store = lsm::Store::open(dbo.dir, dbo.params, key);
        auto stats = store.stats(dbo.fpr_probes, dbo.seed);
        if (dbo.as_json) {
            json j{{"dir", store.dir()},
                   {"hardened", store.hardened()},
                   {"memtable_entries", stats.memtable_entries},
                   {"total_run_entries", stats.total_run_entries},
                   {"run_count", stats.run_count},
                   {"expected_zero_result_pages",
                    store.expected_zero_result_cost()},
                   {"runs", json::array()}};
            for (const auto& r : stats.runs) j["runs"].push_back(run_stat_json(r));
            std::cout << j.dump(2) << "\n";
            return;
        }
        std::cout << "dir: " << store.dir()
                  << (store.hardened() ? " (hardened)\n" : " (plain)\n")
                  << "memtable entries: " << stats.memtable_entries << "\n"
                  << "run entries:      " << stats.total_run_entries << "\n"
                  << "runs:             " << stats.run_count << "\n"
                  << "expected zero-result pages: "
                  << store.expected_zero_result_cost() << "\n";
        for (const auto& r : stats.runs) {
            std::cout << "  L" << r.level << "[" << r.index << "] entries "
                      << r.entries << "  m " << r.m_bits << "  k "
                      << r.k_hashes << "  fill " << r.fill_fraction
                      << "  fpr " << r.theoretical_fpr;
            if (r.measured_fpr >= 0.0)
                std::cout << "  measured " << r.measured_fpr;
            std::cout << "\n";
        }
    });

    auto* db_dump = db->add_subcommand("dump-run", "print a run's entries");
    add_db_common(db_dump, true);
    db_dump->add_option("--level", dbo.level, "run level (1-based)")
        ->required();
    db_dump->add_option("--index", dbo.index, "run index within the level")
        ->capture_default_str();
    db_dump->add_option("--limit", dbo.limit, "max entries to print")
        ->capture_default_str();
    db_dump->callback([&] {
        auto key = resolve_prp(dbo.dir, dbo.params, dbo.prp_hex);
        auto store = lsm::Store::open(dbo.dir, dbo.params, key);
        const auto& handle = store.run(lsm::RunRef{dbo.level, dbo.index});
        auto entries = storage::scan_run(handle);
        std::cout << "run L" << dbo.level << "[" << dbo.index << "] "
                  << handle.path << " entries " << entries.size() << "\n";
        std::size_t shown = 0;
        for (const auto& e : entries) {
            if (shown++ >= dbo.limit) {
                std::cout << "  ...\n";
                break;
            }
            std::cout << "  " << to_hex(e.key) << " -> "
                      << (e.tombstone() ? std::string("<deleted>")
                                        : to_hex(*e.value))
                      << "\n";
        }
    });

    // ---- attack ------------------------------------------------------
    auto* attack = app.add_subcommand("attack", "filter saturation toolkit");
    attack->require_subcommand(1);

    struct AttackOpts {
        uint32_t m = 1024, k = 4;
        uint64_t hash_seed = PublicParams{}.bloom_hash_seed;
        uint64_t seed = 1;
        uint64_t max_candidates = 50'000'000;
        uint64_t patience = 0;
        std::string out;
        std::string m_list = "1024,4096,16384,65536";
        bool as_json = false;
    } ao;

    auto* saturate = attack->add_subcommand(
        "saturate", "craft keys that drive one filter to all-ones");
    saturate->add_option("--m", ao.m, "filter bits")->capture_default_str();
    saturate->add_option("--k", ao.k, "hash functions")->capture_default_str();
    saturate->add_option("--hash-seed", ao.hash_seed, "filter hash seed")
        ->capture_default_str();
    saturate->add_option("--seed", ao.seed, "search seed")
        ->capture_default_str();
    saturate->add_option("--max-candidates", ao.max_candidates,
                         "give up after this many candidates")
        ->capture_default_str();
    saturate->add_option("--patience", ao.patience,
                         "freshness-threshold relaxation window (0 = auto)");
    saturate->add_option("--out", ao.out, "write keys as hex lines here");
    saturate->add_flag("--json", ao.as_json, "emit JSON");
    saturate->callback([&] {
        bloom::Params p{ao.m, ao.k, ao.hash_seed};
        adversary::AttackBudget budget{ao.max_candidates, ao.seed,
                                       ao.patience};
        auto res = adversary::craft_saturating_keys(p, budget);
        if (!ao.out.empty()) {
            std::ostringstream lines;
            for (const auto& key : res.keys) lines << to_hex(key) << "\n";
            write_text_file(ao.out, lines.str());
        }
        if (ao.as_json) {
            std::cout << json{{"m_bits", ao.m},
                              {"k_hashes", ao.k},
                              {"keys", res.keys.size()},
                              {"ideal", (ao.m + ao.k - 1) / ao.k},
                              {"candidates_tried", res.candidates_tried},
                              {"seconds", res.seconds}}
                             .dump(2)
                      << "\n";
            return;
        }
        std::cout << "keys " << res.keys.size() << " (ideal "
                  << (ao.m + ao.k - 1) / ao.k << ")  candidates "
                  << res.candidates_tried << "  seconds " << res.seconds
                  << "\n";
    });

    auto* timing = attack->add_subcommand(
        "timing", "saturation cost across filter sizes (CSV)");
    timing->add_option("--m-list", ao.m_list, "comma separated filter sizes")
        ->capture_default_str();
    timing->add_option("--k", ao.k, "hash functions")->capture_default_str();
    timing->add_option("--seed", ao.seed, "search seed")
        ->capture_default_str();
    timing->add_option("--max-candidates", ao.max_candidates,
                       "per-size candidate budget")
        ->capture_default_str();
    timing->add_option("--out", ao.out, "write CSV here instead of stdout");
    timing->callback([&] {
        adversary::AttackBudget budget{ao.max_candidates, ao.seed};
        auto rows = adversary::saturation_timing(parse_u32_list(ao.m_list),
                                                 ao.k, budget);
        std::ostringstream csv;
        harness::write_timing_csv(rows, csv);
        if (ao.out.empty())
            std::cout << csv.str();
        else
            write_text_file(ao.out, csv.str());
    });

    // ---- game --------------------------------------------------------
    auto* game = app.add_subcommand("game", "membership security games");
    game->require_subcommand(1);

    struct GameOpts {
        adversary::GameConfig cfg;
        uint32_t m = 1024, k = 4;
        PublicParams params;
        std::string dir = "./lsmkv-game";
        bool serial = false;
        bool as_json = false;
    } go;
    go.params.bloom_bits_per_key = 10.24;  // single run of 100 -> m = 1024

    auto add_game_common = [&](CLI::App* cmd) {
        cmd->add_option("--n", go.cfg.n, "committed set size")
            ->capture_default_str();
        cmd->add_option("--t", go.cfg.t, "query budget")->capture_default_str();
        cmd->add_option("--trials", go.cfg.trials, "independent trials")
            ->capture_default_str();
        cmd->add_option("--seed", go.cfg.rng_seed, "game seed")
            ->capture_default_str();
        cmd->add_option("--max-candidates", go.cfg.max_candidates,
                        "adversary search budget")
            ->capture_default_str();
        cmd->add_flag("--hardened", go.cfg.hardened,
                      "play against the hardened construction");
        cmd->add_flag("--serial", go.serial, "disable parallel trials");
        cmd->add_flag("--json", go.as_json, "emit JSON");
    };

    auto* smash_bloom = game->add_subcommand(
        "smash-bloom", "fresh false positive vs a standalone filter");
    add_game_common(smash_bloom);
    smash_bloom->add_option("--m", go.m, "filter bits")->capture_default_str();
    smash_bloom->add_option("--k", go.k, "hash functions")
        ->capture_default_str();
    smash_bloom->callback([&] {
        go.cfg.exec = go.serial ? Exec::serial : Exec::parallel;
        bloom::Params p{go.m, go.k, PublicParams{}.bloom_hash_seed};
        adversary::StateReadingBloomAdversary adv;
        auto res = adversary::smash_bloom_game(adv, go.cfg, p);
        double eps = bloom::theoretical_fpr(p, go.cfg.n);
        print_game(res, eps, "smash-bloom", go.cfg.hardened, go.as_json);
    });

    auto* smash_lsm = game->add_subcommand(
        "smash-lsm", "fresh false positive vs a live store");
    add_game_common(smash_lsm);
    add_param_flags(smash_lsm, go.params, /*with_hardened=*/false);
    smash_lsm->add_option("--dir", go.dir, "scratch directory for trials")
        ->capture_default_str();
    smash_lsm->callback([&] {
        go.cfg.exec = go.serial ? Exec::serial : Exec::parallel;
        adversary::CraftedInsertLsmAdversary adv;
        auto res = adversary::smash_lsm_game(adv, go.cfg, go.params, go.dir);
        uint32_t m = uint32_t(
            std::ceil(go.params.bloom_bits_per_key * double(go.cfg.n)));
        double eps = bloom::theoretical_fpr(
            bloom::Params{m, go.params.bloom_k_hashes, 0}, go.cfg.n);
        print_game(res, eps, "smash-lsm", go.cfg.hardened, go.as_json);
    });

    // ---- scenario ----------------------------------------------------
    auto* scenario = app.add_subcommand("scenario", "end-to-end attack demos");
    scenario->require_subcommand(1);

    struct ScenarioOpts {
        std::string dir = "./lsmkv-scenario";
        std::string out;
        uint64_t seed = 1;
        bool hardened = false;
        bool as_json = false;
    } so;

    auto* deleted = scenario->add_subcommand(
        "deleted-inserts",
        "saturate via inserts, delete everything, then recompact");
    deleted->add_option("--dir", so.dir, "store directory")
        ->capture_default_str();
    deleted->add_option("--seed", so.seed, "scenario seed")
        ->capture_default_str();
    deleted->add_option("--out", so.out, "write stage CSV here");
    deleted->add_flag("--hardened", so.hardened, "run the hardened store");
    deleted->add_flag("--json", so.as_json, "emit JSON");
    deleted->callback([&] {
        auto report =
            adversary::deleted_insertion_scenario(so.dir, so.hardened, so.seed);
        if (!so.out.empty()) {
            std::ostringstream csv;
            harness::write_scenario_csv(report, csv);
            write_text_file(so.out, csv.str());
        }
        if (so.as_json) {
            json j{{"hardened", report.hardened},
                   {"crafted_keys", report.crafted_keys},
                   {"filler_keys", report.filler_keys},
                   {"stages", json::array()}};
            for (const auto& st : report.stages) {
                json stage{{"name", st.name},
                           {"run_count", st.run_count},
                           {"mean_zero_result_pages",
                            st.mean_zero_result_pages},
                           {"runs", json::array()}};
                for (const auto& r : st.runs)
                    stage["runs"].push_back(run_stat_json(r));
                j["stages"].push_back(stage);
            }
            std::cout << j.dump(2) << "\n";
            return;
        }
        std::cout << (report.hardened ? "hardened" : "plain")
                  << " store, crafted " << report.crafted_keys << " + filler "
                  << report.filler_keys << " keys\n";
        for (const auto& st : report.stages) {
            double max_meas = 0.0;
            for (const auto& r : st.runs)
                max_meas = std::max(max_meas, r.measured_fpr);
            std::cout << "  " << st.name << ": runs " << st.run_count
                      << "  zero-result pages/op "
                      << st.mean_zero_result_pages << "  max run FPR "
                      << max_meas << "\n";
        }
    });

    // ---- bench -------------------------------------------------------
    auto* bench = app.add_subcommand("bench", "benchmark drivers");
    bench->require_subcommand(1);

    struct BenchOpts {
        harness::DegradeConfig degrade;
        harness::OverheadConfig overhead;
        std::string spec_path;
        std::string dir = "./lsmkv-bench";
        std::string out;
        std::string out_dir;
        std::string intensities = "0.25,0.5,0.75,1.0";
        bool as_json = false;
    } bo;
    bo.degrade.keys = 200'000;  // CLI demo default; criteria runs use 1M

    auto add_degrade_opts = [&](CLI::App* cmd) {
        cmd->add_option("--dir", bo.degrade.dir, "store directory")
            ->capture_default_str();
        cmd->add_option("--keys", bo.degrade.keys, "keys to load")
            ->capture_default_str();
        cmd->add_option("--lookups", bo.degrade.lookups,
                        "zero-result lookups per measurement")
            ->capture_default_str();
        cmd->add_option("--repeats", bo.degrade.repeats, "probe-seed repeats")
            ->capture_default_str();
        cmd->add_option("--intensities", bo.intensities,
                        "comma separated run fractions")
            ->capture_default_str();
        cmd->add_option("--seed", bo.degrade.rng_seed, "benchmark seed")
            ->capture_default_str();
        cmd->add_option("--prp-seed", bo.degrade.prp_seed,
                        "permutation key seed (0 = derive from --seed)");
        cmd->add_option("--out", bo.out, "write CSV here instead of stdout");
        cmd->add_option("--out-dir", bo.out_dir,
                        "write CSV, JSON summary and plot series here");
        cmd->add_flag("--json", bo.as_json, "emit JSON to stdout");
        add_param_flags(cmd, bo.degrade.params);
    };

    auto run_degrade = [&](bool force_hardened, const char* stem) {
        if (bo.degrade.dir.empty()) bo.degrade.dir = "./lsmkv-bench-degrade";
        if (force_hardened) bo.degrade.params.hardened = true;
        bo.degrade.intensities = parse_f64_list(bo.intensities);
        auto res = harness::degrade_benchmark(bo.degrade);
        json j = degrade_json(res);
        std::ostringstream csv;
        harness::write_degrade_csv(res, csv);
        if (!bo.out_dir.empty()) {
            emit_bundle(bo.out_dir, stem, csv.str(), j);
            std::ostringstream series;
            harness::write_degrade_series(res, series);
            write_text_file(bo.out_dir + "/" + stem + ".dat", series.str());
        }
        if (!bo.out.empty()) write_text_file(bo.out, csv.str());
        if (bo.as_json)
            std::cout << j.dump(2) << "\n";
        else if (bo.out.empty() && bo.out_dir.empty())
            std::cout << csv.str();
        std::cerr << "runs " << res.run_count << "  entries " << res.entries
                  << "  baseline pages/op " << res.pre_pages_mean
                  << "  full-attack pages/op "
                  << (res.points.empty() ? 0.0 : res.points.back().pages_mean)
                  << "\n";
    };

    auto* degrade = bench->add_subcommand(
        "degrade", "zero-result cost vs fraction of runs attacked");
    add_degrade_opts(degrade);
    degrade->callback([&] { run_degrade(false, "degrade"); });

    auto* secure = bench->add_subcommand(
        "secure", "the degrade suite against the hardened store");
    add_degrade_opts(secure);
    secure->callback([&] { run_degrade(true, "secure"); });

    auto* overhead = bench->add_subcommand(
        "overhead", "plain vs hardened latency and page parity");
    overhead->add_option("--dir", bo.overhead.dir, "scratch directory")
        ->capture_default_str();
    overhead->add_option("--keys", bo.overhead.keys, "keys per store")
        ->capture_default_str();
    overhead->add_option("--lookups", bo.overhead.lookups,
                         "existing-key lookups")
        ->capture_default_str();
    overhead->add_option("--repeats", bo.overhead.repeats, "build repeats")
        ->capture_default_str();
    overhead->add_option("--batch", bo.overhead.batch, "ops per timing batch")
        ->capture_default_str();
    overhead->add_option("--seed", bo.overhead.rng_seed, "benchmark seed")
        ->capture_default_str();
    overhead->add_option("--out", bo.out, "write CSV here instead of stdout");
    overhead->add_option("--out-dir", bo.out_dir,
                         "write CSV and JSON summary here");
    overhead->add_flag("--json", bo.as_json, "emit JSON to stdout");
    add_param_flags(overhead, bo.overhead.params);
    overhead->callback([&] {
        if (bo.overhead.dir.empty()) bo.overhead.dir = "./lsmkv-bench-overhead";
        auto res = harness::overhead_benchmark(bo.overhead);
        json j = overhead_json(res);
        std::ostringstream csv;
        harness::write_overhead_csv(res, csv);
        if (!bo.out_dir.empty()) emit_bundle(bo.out_dir, "overhead", csv.str(), j);
        if (!bo.out.empty()) write_text_file(bo.out, csv.str());
        if (bo.as_json)
            std::cout << j.dump(2) << "\n";
        else if (bo.out.empty() && bo.out_dir.empty())
            std::cout << csv.str();
    });

    auto* custom = bench->add_subcommand("custom",
                                         "run a phased workload spec file");
    custom->add_option("--spec", bo.spec_path, "key=value workload file")
        ->required();
    custom->add_option("--dir", bo.dir, "scratch directory")
        ->capture_default_str();
    custom->add_option("--out", bo.out, "write CSV here instead of stdout");
    custom->add_option("--out-dir", bo.out_dir,
                       "write aggregate CSV, per-repeat samples CSV and "
                       "JSON summary here");
    custom->add_flag("--json", bo.as_json, "emit JSON to stdout");
    custom->callback([&] {
        auto spec = harness::parse_spec_file(bo.spec_path);
        auto report = harness::run_workload(spec, bo.dir);
        json j = workload_json(report);
        std::ostringstream csv;
        harness::write_workload_csv(report, csv);
        if (!bo.out_dir.empty()) {
            emit_bundle(bo.out_dir, "workload", csv.str(), j);
            std::ostringstream samples;
            harness::write_workload_samples_csv(report, samples);
            write_text_file(bo.out_dir + "/workload_samples.csv",
                            samples.str());
        }
        if (!bo.out.empty()) write_text_file(bo.out, csv.str());
        if (bo.as_json)
            std::cout << j.dump(2) << "\n";
        else if (bo.out.empty() && bo.out_dir.empty())
            std::cout << csv.str();
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
