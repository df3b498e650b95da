#include "lsmkv/prp.hpp"

#include <openssl/evp.h>
#include <openssl/rand.h>

#include "lsmkv/rng.hpp"

namespace lsmkv::prp {

namespace {

struct CipherCtx {
    EVP_CIPHER_CTX* ctx = nullptr;
    CipherCtx() : ctx(EVP_CIPHER_CTX_new()) {}
    ~CipherCtx() { EVP_CIPHER_CTX_free(ctx); }
};

Block run_cipher(const Key& key, const Block& input, bool encrypt) {
    thread_local CipherCtx tls;
    EVP_CIPHER_CTX* ctx = tls.ctx;
    if (ctx == nullptr) throw Error("cipher context allocation failed");

    if (EVP_CipherInit_ex(ctx, EVP_aes_128_ecb(), nullptr, key.bytes.data(),
                          nullptr, encrypt ? 1 : 0) != 1)
        throw Error("cipher init failed");
    EVP_CIPHER_CTX_set_padding(ctx, 0);

    Block out{};
    int len = 0;
    if (EVP_CipherUpdate(ctx, out.data(), &len, input.data(),
                         int(input.size())) != 1 ||
        len != int(kBlockLen))
        throw Error("cipher update failed");
    int fin = 0;
    if (EVP_CipherFinal_ex(ctx, out.data() + len, &fin) != 1 || fin != 0)
        throw Error("cipher final failed");
    return out;
}

}  // namespace

Key keygen() {
    Key key;
    if (RAND_bytes(key.bytes.data(), int(key.bytes.size())) != 1)
        throw Error("system randomness unavailable");
    return key;
}

Key keygen(uint64_t seed) {
    Key key;
    auto rng = make_rng(seed);
    Bytes b = random_bytes(rng, kBlockLen);
    for (std::size_t i = 0; i < kBlockLen; ++i) key.bytes[i] = uint8_t(b[i]);
    return key;
}

Key key_from_hex(const std::string& hex) {
    Bytes raw = from_hex(hex);
    if (raw.size() != kBlockLen)
        throw InvalidParams("prp key must be 16 bytes (32 hex digits)");
    Key key;
    for (std::size_t i = 0; i < kBlockLen; ++i) key.bytes[i] = uint8_t(raw[i]);
    return key;
}

std::string key_to_hex(const Key& key) {
    return to_hex(Bytes(reinterpret_cast<const char*>(key.bytes.data()),
                        key.bytes.size()));
}

Block forward(const Key& key, const Block& input) {
    return run_cipher(key, input, true);
}

Block inverse(const Key& key, const Block& output) {
    return run_cipher(key, output, false);
}

Block pad(const Bytes& raw) {
    if (raw.size() > kMaxRawKeyLen)
        throw KeyTooLong("raw key exceeds 15 bytes");
    Block block{};
    for (std::size_t i = 0; i < raw.size(); ++i) block[i] = uint8_t(raw[i]);
    if (raw.size() < kMaxRawKeyLen) block[raw.size()] = 0x80;
    block[kBlockLen - 1] = uint8_t(raw.size());
    return block;
}

Bytes unpad(const Block& block) {
    unsigned len = block[kBlockLen - 1];
    if (len > kMaxRawKeyLen) throw CorruptBlock("bad length byte");
    if (len < kMaxRawKeyLen) {
        if (block[len] != 0x80) throw CorruptBlock("missing pad marker");
        for (std::size_t i = len + 1; i < kBlockLen - 1; ++i)
            if (block[i] != 0x00) throw CorruptBlock("nonzero pad fill");
    }
    return Bytes(reinterpret_cast<const char*>(block.data()), len);
}

Block permute_key(const Key& key, const Bytes& raw) {
    return forward(key, pad(raw));
}

Bytes unpermute_key(const Key& key, const Block& block) {
    return unpad(inverse(key, block));
}

Bytes permute_key_bytes(const Key& key, const Bytes& raw) {
    return block_to_bytes(permute_key(key, raw));
}

}  // namespace lsmkv::prp
