#pragma once

#include <cstddef>
#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>

namespace lsmkv {

// Keys and values are arbitrary byte strings.
using Bytes = std::string;

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InvalidParams : Error { using Error::Error; };
struct KeyTooLong : Error { using Error::Error; };
struct CorruptBlock : Error { using Error::Error; };
struct CorruptRun : Error { using Error::Error; };
struct EmptyRun : Error { using Error::Error; };
struct OpenFailed : Error { using Error::Error; };
struct BudgetExhausted : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };

std::string to_hex(const Bytes& data);
Bytes from_hex(const std::string& hex);

uint32_t crc32(const void* data, std::size_t len, uint32_t seed = 0);

inline void put_u32le(Bytes& out, uint32_t v) {
    char b[4];
    b[0] = char(v & 0xff);
    b[1] = char((v >> 8) & 0xff);
    b[2] = char((v >> 16) & 0xff);
    b[3] = char((v >> 24) & 0xff);
    out.append(b, 4);
}

inline void put_u64le(Bytes& out, uint64_t v) {
    put_u32le(out, uint32_t(v & 0xffffffffu));
    put_u32le(out, uint32_t(v >> 32));
}

inline uint32_t get_u32le(const char* p) {
    return uint32_t(uint8_t(p[0])) | uint32_t(uint8_t(p[1])) << 8 |
           uint32_t(uint8_t(p[2])) << 16 | uint32_t(uint8_t(p[3])) << 24;
}

inline uint64_t get_u64le(const char* p) {
    return uint64_t(get_u32le(p)) | uint64_t(get_u32le(p + 4)) << 32;
}

// 8-byte big-endian encoding, the canonical fixed-width integer key.
inline Bytes u64_be_key(uint64_t v) {
    Bytes k(8, '\0');
    for (int i = 7; i >= 0; --i) {
        k[std::size_t(i)] = char(v & 0xff);
        v >>= 8;
    }
    return k;
}

}  // namespace lsmkv
