#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lsmkv/bloom.hpp"
#include "lsmkv/common.hpp"
#include "lsmkv/params.hpp"

namespace lsmkv::storage {

inline constexpr char kHeaderMagic[4] = {'L', 'S', 'M', 'A'};
inline constexpr char kFooterMagic[4] = {'L', 'S', 'M', 'Z'};
inline constexpr uint32_t kFormatVersion = 1;
inline constexpr std::size_t kHeaderSize = 8;
inline constexpr std::size_t kFooterSize = 24;
inline constexpr uint32_t kTombstoneLen = 0xffffffffu;
inline constexpr uint32_t kDefaultBlockSize = 4096;

inline constexpr std::size_t max_entry_size(uint32_t block_size) {
    return std::size_t(block_size) - 16;
}

struct Entry {
    Bytes key;
    std::optional<Bytes> value;  // nullopt marks a tombstone
    uint64_t sequence = 0;

    bool tombstone() const { return !value.has_value(); }
    std::size_t encoded_size() const {
        return 8 + key.size() + (value ? value->size() : 0);
    }
};

struct FenceRec {
    Bytes first_key;
    uint64_t offset = 0;
    uint32_t len = 0;
};

// Move-only owner of a read fd.
class FileHandle {
public:
    FileHandle() = default;
    explicit FileHandle(int fd) : fd_(fd) {}
    FileHandle(FileHandle&& o) noexcept : fd_(o.fd_) { o.fd_ = -1; }
    FileHandle& operator=(FileHandle&& o) noexcept;
    FileHandle(const FileHandle&) = delete;
    FileHandle& operator=(const FileHandle&) = delete;
    ~FileHandle();

    int get() const { return fd_; }
    bool valid() const { return fd_ >= 0; }

private:
    int fd_ = -1;
};

// One immutable sorted run on disk. Filter and fence pointers live in
// memory for the handle's lifetime; data blocks are read on demand.
struct RunHandle {
    uint32_t level = 0;
    uint32_t index = 0;
    std::string path;
    uint32_t block_size = kDefaultBlockSize;
    uint64_t entry_count = 0;
    Bytes min_key;
    Bytes max_key;
    bloom::Filter filter{bloom::Params{1, 1, 0}};
    std::vector<FenceRec> fence;
    FileHandle file;
};

enum class PointStatus { found, tombstone, absent };

struct PointResult {
    PointStatus status = PointStatus::absent;
    Bytes value;
    uint32_t pages_read = 0;
};

// Writes a run file from sorted, per-key-deduplicated, nonempty entries.
RunHandle write_run(const std::vector<Entry>& entries, uint32_t level,
                    uint32_t index, const std::string& dir,
                    const std::string& file_name,
                    const bloom::Params& bloom_params,
                    uint32_t block_size = kDefaultBlockSize);

// Opens an existing run, validating the footer checksum and loading the
// filter and fence pointers. entry_count, if known (manifest), avoids a
// full data scan.
RunHandle open_run(const std::string& path, uint32_t level, uint32_t index,
                   std::optional<uint64_t> entry_count = std::nullopt);

// Fence-guided point lookup; reads at most one data block. Does NOT consult
// the filter -- that is the caller's cost model to account for.
PointResult read_point(const RunHandle& run, const Bytes& key);

// Full scan in key order, verifying block checksums.
std::vector<Entry> scan_run(const RunHandle& run);

// Merges runs ordered most-recent-first, keeping the entry from the most
// recent input per key. drop_tombstones is only legal when merging into the
// bottom-most populated level.
std::vector<Entry> merge_runs(const std::vector<const RunHandle*>& inputs,
                              bool drop_tombstones);

struct RunMeta {
    std::string file;
    uint64_t entries = 0;
};

struct Manifest {
    uint32_t version = kFormatVersion;
    uint64_t next_sequence = 0;
    uint64_t next_run_id = 1;
    PublicParams params;
    // levels[0] is level 1; runs within a level are most-recent-first.
    std::vector<std::vector<RunMeta>> levels;
};

inline constexpr const char* kManifestName = "MANIFEST.json";

// Written to a temp file and renamed into place.
void save_manifest(const std::string& dir, const Manifest& manifest);
std::optional<Manifest> load_manifest(const std::string& dir);

}  // namespace lsmkv::storage
