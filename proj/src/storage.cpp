#include "lsmkv/storage.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <filesystem>
#include <fstream>

#include <json.hpp>

namespace fs = std::filesystem;

namespace lsmkv::storage {

FileHandle& FileHandle::operator=(FileHandle&& o) noexcept {
    if (this != &o) {
        if (fd_ >= 0) ::close(fd_);
        fd_ = o.fd_;
        o.fd_ = -1;
    }
    return *this;
}

FileHandle::~FileHandle() {
    if (fd_ >= 0) ::close(fd_);
}

namespace {

void read_exact(int fd, void* buf, std::size_t len, uint64_t offset,
                const std::string& path) {
    std::size_t done = 0;
    auto* p = static_cast<char*>(buf);
    while (done < len) {
        ssize_t r = ::pread(fd, p + done, len - done, off_t(offset + done));
        if (r < 0) {
            if (errno == EINTR) continue;
            throw IoError("read failed on " + path + ": " + std::strerror(errno));
        }
        if (r == 0) throw CorruptRun("unexpected end of file in " + path);
        done += std::size_t(r);
    }
}

Bytes read_data_block(const RunHandle& run, uint64_t offset) {
    Bytes buf(run.block_size, '\0');
    read_exact(run.file.get(), buf.data(), run.block_size, offset, run.path);
    uint32_t stored = get_u32le(buf.data() + run.block_size - 4);
    uint32_t actual = crc32(buf.data(), run.block_size - 4);
    if (stored != actual)
        throw CorruptRun("data block checksum mismatch in " + run.path);
    return buf;
}

// Calls fn(key_ptr, key_len, tombstone, val_ptr, val_len) per entry until fn
// returns false or the payload's entries are exhausted.
template <typename Fn>
void parse_block_payload(const char* p, std::size_t len, const std::string& path,
                         Fn&& fn) {
    std::size_t pos = 0;
    while (pos + 8 <= len) {
        uint32_t klen = get_u32le(p + pos);
        if (klen == 0) return;  // zero padding marks the end of entries
        uint32_t vraw = get_u32le(p + pos + 4);
        bool tomb = vraw == kTombstoneLen;
        uint32_t vlen = tomb ? 0 : vraw;
        if (pos + 8 + uint64_t(klen) + vlen > len)
            throw CorruptRun("entry overruns block in " + path);
        if (!fn(p + pos + 8, klen, tomb, p + pos + 8 + klen, vlen)) return;
        pos += 8 + std::size_t(klen) + vlen;
    }
}

FileHandle open_readonly(const std::string& path) {
    int fd = ::open(path.c_str(), O_RDONLY | O_CLOEXEC);
    if (fd < 0)
        throw OpenFailed("cannot open " + path + ": " + std::strerror(errno));
    return FileHandle(fd);
}

Bytes last_key_in_block(const RunHandle& run, uint64_t offset) {
    Bytes block = read_data_block(run, offset);
    Bytes last;
    parse_block_payload(block.data(), run.block_size - 4, run.path,
                        [&](const char* k, uint32_t klen, bool, const char*,
                            uint32_t) {
                            last.assign(k, klen);
                            return true;
                        });
    if (last.empty()) throw CorruptRun("empty data block in " + run.path);
    return last;
}

uint64_t count_entries(const RunHandle& run) {
    uint64_t n = 0;
    for (const FenceRec& rec : run.fence) {
        Bytes block = read_data_block(run, rec.offset);
        parse_block_payload(block.data(), run.block_size - 4, run.path,
                            [&](const char*, uint32_t, bool, const char*,
                                uint32_t) {
                                ++n;
                                return true;
                            });
    }
    return n;
}

}  // namespace

RunHandle write_run(const std::vector<Entry>& entries, uint32_t level,
                    uint32_t index, const std::string& dir,
                    const std::string& file_name,
                    const bloom::Params& bloom_params, uint32_t block_size) {
    if (entries.empty()) throw EmptyRun("refusing to write an empty run");
    if (block_size < 64) throw InvalidParams("block_size too small");
    const std::size_t payload_cap = block_size - 4;
    const std::size_t entry_cap = max_entry_size(block_size);

    for (std::size_t i = 0; i < entries.size(); ++i) {
        const Entry& e = entries[i];
        if (e.key.empty()) throw InvalidParams("empty key in run entries");
        if (e.encoded_size() > entry_cap)
            throw InvalidParams("entry exceeds max entry size");
        if (i > 0 && !(entries[i - 1].key < e.key))
            throw InvalidParams("run entries must be strictly sorted by key");
    }

    std::string path = (fs::path(dir) / file_name).string();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot create " + path);

    Bytes header;
    header.append(kHeaderMagic, 4);
    put_u32le(header, kFormatVersion);
    out.write(header.data(), std::streamsize(header.size()));

    bloom::Filter filter(bloom_params);
    std::vector<FenceRec> fence;
    Bytes block;
    block.reserve(block_size);
    uint64_t offset = kHeaderSize;

    auto seal_block = [&]() {
        block.resize(payload_cap, '\0');
        uint32_t crc = crc32(block.data(), payload_cap);
        put_u32le(block, crc);
        out.write(block.data(), std::streamsize(block.size()));
        offset += block_size;
        block.clear();
    };

    for (const Entry& e : entries) {
        filter.insert(e.key);
        std::size_t enc = e.encoded_size();
        if (!block.empty() && block.size() + enc > payload_cap) seal_block();
        if (block.empty()) fence.push_back({e.key, offset, block_size});
        put_u32le(block, uint32_t(e.key.size()));
        put_u32le(block, e.tombstone() ? kTombstoneLen
                                       : uint32_t(e.value->size()));
        block.append(e.key);
        if (!e.tombstone()) block.append(*e.value);
    }
    if (!block.empty()) seal_block();

    uint64_t bloom_off = offset;
    Bytes bloom_bytes = filter.serialize();
    out.write(bloom_bytes.data(), std::streamsize(bloom_bytes.size()));

    uint64_t fence_off = bloom_off + bloom_bytes.size();
    Bytes fence_bytes;
    put_u32le(fence_bytes, uint32_t(fence.size()));
    for (const FenceRec& rec : fence) {
        put_u32le(fence_bytes, uint32_t(rec.first_key.size()));
        fence_bytes.append(rec.first_key);
        put_u64le(fence_bytes, rec.offset);
        put_u32le(fence_bytes, rec.len);
    }
    out.write(fence_bytes.data(), std::streamsize(fence_bytes.size()));

    Bytes footer_fields;
    put_u64le(footer_fields, bloom_off);
    put_u64le(footer_fields, fence_off);
    Bytes footer = footer_fields;
    put_u32le(footer, crc32(footer_fields.data(), footer_fields.size()));
    footer.append(kFooterMagic, 4);
    out.write(footer.data(), std::streamsize(footer.size()));
    out.close();
    if (!out) throw IoError("write failed on " + path);

    RunHandle run;
    run.level = level;
    run.index = index;
    run.path = path;
    run.block_size = block_size;
    run.entry_count = entries.size();
    run.min_key = entries.front().key;
    run.max_key = entries.back().key;
    run.filter = std::move(filter);
    run.fence = std::move(fence);
    run.file = open_readonly(path);
    return run;
}

RunHandle open_run(const std::string& path, uint32_t level, uint32_t index,
                   std::optional<uint64_t> entry_count) {
    RunHandle run;
    run.level = level;
    run.index = index;
    run.path = path;
    run.file = open_readonly(path);

    struct stat st{};
    if (::fstat(run.file.get(), &st) != 0)
        throw OpenFailed("cannot stat " + path);
    uint64_t size = uint64_t(st.st_size);
    if (size < kHeaderSize + kFooterSize)
        throw CorruptRun("run file truncated: " + path);

    char header[kHeaderSize];
    read_exact(run.file.get(), header, sizeof header, 0, path);
    if (std::memcmp(header, kHeaderMagic, 4) != 0)
        throw CorruptRun("bad header magic in " + path);
    if (get_u32le(header + 4) != kFormatVersion)
        throw CorruptRun("unsupported format version in " + path);

    char footer[kFooterSize];
    read_exact(run.file.get(), footer, sizeof footer, size - kFooterSize, path);
    if (std::memcmp(footer + 20, kFooterMagic, 4) != 0)
        throw CorruptRun("bad footer magic in " + path);
    if (get_u32le(footer + 16) != crc32(footer, 16))
        throw CorruptRun("footer checksum mismatch in " + path);
    uint64_t bloom_off = get_u64le(footer);
    uint64_t fence_off = get_u64le(footer + 8);
    if (bloom_off < kHeaderSize || bloom_off > fence_off ||
        fence_off > size - kFooterSize)
        throw CorruptRun("footer offsets out of range in " + path);

    Bytes bloom_bytes(fence_off - bloom_off, '\0');
    read_exact(run.file.get(), bloom_bytes.data(), bloom_bytes.size(),
               bloom_off, path);
    try {
        run.filter =
            bloom::Filter::deserialize(bloom_bytes.data(), bloom_bytes.size());
    } catch (const CorruptBlock& e) {
        throw CorruptRun("bad bloom block in " + path + ": " + e.what());
    }

    Bytes fence_bytes(size - kFooterSize - fence_off, '\0');
    read_exact(run.file.get(), fence_bytes.data(), fence_bytes.size(),
               fence_off, path);
    if (fence_bytes.size() < 4) throw CorruptRun("fence block truncated");
    uint32_t count = get_u32le(fence_bytes.data());
    std::size_t pos = 4;
    run.fence.reserve(count);
    for (uint32_t i = 0; i < count; ++i) {
        if (pos + 4 > fence_bytes.size())
            throw CorruptRun("fence block truncated in " + path);
        uint32_t klen = get_u32le(fence_bytes.data() + pos);
        pos += 4;
        if (pos + klen + 12 > fence_bytes.size())
            throw CorruptRun("fence block truncated in " + path);
        FenceRec rec;
        rec.first_key.assign(fence_bytes.data() + pos, klen);
        pos += klen;
        rec.offset = get_u64le(fence_bytes.data() + pos);
        rec.len = get_u32le(fence_bytes.data() + pos + 8);
        pos += 12;
        run.fence.push_back(std::move(rec));
    }
    if (run.fence.empty()) throw CorruptRun("run has no data blocks: " + path);

    run.block_size = run.fence[0].len;
    if (run.block_size < 64) throw CorruptRun("bad block size in " + path);
    for (std::size_t i = 0; i < run.fence.size(); ++i) {
        if (run.fence[i].len != run.block_size ||
            run.fence[i].offset != kHeaderSize + i * uint64_t(run.block_size))
            throw CorruptRun("inconsistent fence records in " + path);
    }
    if (bloom_off != kHeaderSize + run.fence.size() * uint64_t(run.block_size))
        throw CorruptRun("data region size mismatch in " + path);

    run.min_key = run.fence.front().first_key;
    run.max_key = last_key_in_block(run, run.fence.back().offset);
    run.entry_count = entry_count ? *entry_count : count_entries(run);
    return run;
}

PointResult read_point(const RunHandle& run, const Bytes& key) {
    PointResult res;
    if (key < run.min_key || key > run.max_key) return res;

    auto it = std::upper_bound(
        run.fence.begin(), run.fence.end(), key,
        [](const Bytes& k, const FenceRec& rec) { return k < rec.first_key; });
    if (it == run.fence.begin()) return res;
    const FenceRec& rec = *std::prev(it);

    Bytes block = read_data_block(run, rec.offset);
    res.pages_read = 1;
    parse_block_payload(
        block.data(), run.block_size - 4, run.path,
        [&](const char* k, uint32_t klen, bool tomb, const char* v,
            uint32_t vlen) {
            int cmp = std::basic_string_view<char>(k, klen).compare(key);
            if (cmp > 0) return false;
            if (cmp == 0) {
                res.status =
                    tomb ? PointStatus::tombstone : PointStatus::found;
                if (!tomb) res.value.assign(v, vlen);
                return false;
            }
            return true;
        });
    return res;
}

std::vector<Entry> scan_run(const RunHandle& run) {
    std::vector<Entry> out;
    out.reserve(run.entry_count);
    for (const FenceRec& rec : run.fence) {
        Bytes block = read_data_block(run, rec.offset);
        parse_block_payload(block.data(), run.block_size - 4, run.path,
                            [&](const char* k, uint32_t klen, bool tomb,
                                const char* v, uint32_t vlen) {
                                Entry e;
                                e.key.assign(k, klen);
                                if (!tomb) e.value = Bytes(v, vlen);
                                out.push_back(std::move(e));
                                return true;
                            });
    }
    return out;
}

namespace {

// Sequential reader over a run's entries, one block resident at a time.
class RunScanner {
public:
    explicit RunScanner(const RunHandle& run) : run_(run) {}

    bool valid() const { return valid_; }
    const Entry& current() const { return current_; }

    void advance() {
        if (block_pos_ >= block_entries_.size()) load_next_block();
        if (block_pos_ < block_entries_.size()) {
            current_ = std::move(block_entries_[block_pos_++]);
            valid_ = true;
        } else {
            valid_ = false;
        }
    }

private:
    void load_next_block() {
        block_entries_.clear();
        block_pos_ = 0;
        while (block_entries_.empty() && block_i_ < run_.fence.size()) {
            Bytes block = read_data_block(run_, run_.fence[block_i_].offset);
            parse_block_payload(block.data(), run_.block_size - 4, run_.path,
                                [&](const char* k, uint32_t klen, bool tomb,
                                    const char* v, uint32_t vlen) {
                                    Entry e;
                                    e.key.assign(k, klen);
                                    if (!tomb) e.value = Bytes(v, vlen);
                                    block_entries_.push_back(std::move(e));
                                    return true;
                                });
            ++block_i_;
        }
    }

    const RunHandle& run_;
    std::size_t block_i_ = 0;
    std::vector<Entry> block_entries_;
    std::size_t block_pos_ = 0;
    Entry current_;
    bool valid_ = false;
};

}  // namespace

std::vector<Entry> merge_runs(const std::vector<const RunHandle*>& inputs,
                              bool drop_tombstones) {
    std::vector<RunScanner> scanners;
    scanners.reserve(inputs.size());
    for (const RunHandle* run : inputs) {
        scanners.emplace_back(*run);
        scanners.back().advance();
    }

    std::vector<Entry> out;
    while (true) {
        int best = -1;
        for (int i = 0; i < int(scanners.size()); ++i) {
            if (!scanners[i].valid()) continue;
            if (best < 0 ||
                scanners[i].current().key < scanners[best].current().key)
                best = i;
        }
        if (best < 0) break;

        Entry winner = scanners[best].current();
        for (int i = best; i < int(scanners.size()); ++i) {
            if (scanners[i].valid() && scanners[i].current().key == winner.key)
                scanners[i].advance();
        }
        if (!(drop_tombstones && winner.tombstone()))
            out.push_back(std::move(winner));
    }
    return out;
}

void save_manifest(const std::string& dir, const Manifest& manifest) {
    nlohmann::json j;
    j["version"] = manifest.version;
    j["next_sequence"] = manifest.next_sequence;
    j["next_run_id"] = manifest.next_run_id;
    j["params"] = {
        {"memtable_capacity", manifest.params.memtable_capacity},
        {"size_ratio", manifest.params.size_ratio},
        {"bloom_bits_per_key", manifest.params.bloom_bits_per_key},
        {"bloom_k_hashes", manifest.params.bloom_k_hashes},
        {"block_size", manifest.params.block_size},
        {"hardened", manifest.params.hardened},
        {"lambda_bits", manifest.params.lambda_bits},
        {"bloom_hash_seed", manifest.params.bloom_hash_seed},
    };
    nlohmann::json levels = nlohmann::json::array();
    for (const auto& level : manifest.levels) {
        nlohmann::json jl = nlohmann::json::array();
        for (const RunMeta& rm : level)
            jl.push_back({{"file", rm.file}, {"entries", rm.entries}});
        levels.push_back(std::move(jl));
    }
    j["levels"] = std::move(levels);

    fs::path tmp = fs::path(dir) / (std::string(kManifestName) + ".tmp");
    fs::path final_path = fs::path(dir) / kManifestName;
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot create " + tmp.string());
        out << j.dump(2) << "\n";
        out.close();
        if (!out) throw IoError("write failed on " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, final_path, ec);
    if (ec) throw IoError("rename failed for " + final_path.string());
}

std::optional<Manifest> load_manifest(const std::string& dir) {
    fs::path path = fs::path(dir) / kManifestName;
    if (!fs::exists(path)) return std::nullopt;
    std::ifstream in(path, std::ios::binary);
    if (!in) throw OpenFailed("cannot open " + path.string());
    nlohmann::json j;
    try {
        in >> j;
        Manifest m;
        m.version = j.at("version").get<uint32_t>();
        m.next_sequence = j.at("next_sequence").get<uint64_t>();
        m.next_run_id = j.at("next_run_id").get<uint64_t>();
        const auto& p = j.at("params");
        m.params.memtable_capacity = p.at("memtable_capacity").get<uint64_t>();
        m.params.size_ratio = p.at("size_ratio").get<uint32_t>();
        m.params.bloom_bits_per_key = p.at("bloom_bits_per_key").get<double>();
        m.params.bloom_k_hashes = p.at("bloom_k_hashes").get<uint32_t>();
        m.params.block_size = p.at("block_size").get<uint32_t>();
        m.params.hardened = p.at("hardened").get<bool>();
        m.params.lambda_bits = p.at("lambda_bits").get<uint32_t>();
        m.params.bloom_hash_seed = p.at("bloom_hash_seed").get<uint64_t>();
        for (const auto& jl : j.at("levels")) {
            std::vector<RunMeta> level;
            for (const auto& jr : jl)
                level.push_back({jr.at("file").get<std::string>(),
                                 jr.at("entries").get<uint64_t>()});
            m.levels.push_back(std::move(level));
        }
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw OpenFailed("malformed manifest " + path.string() + ": " +
                         e.what());
    }
}

}  // namespace lsmkv::storage
