#pragma once

// Self-contained reference implementations of SHA-256, HMAC-SHA-256 and
// AES-256-CBC with PKCS#7 padding, written straight from FIPS 180-4,
// RFC 2104 and FIPS 197. Test-only: these exist so the library's crypto can
// be cross-checked against code that shares nothing with it.

#include <cstdint>
#include <optional>
#include <vector>

namespace refcrypto {

using Bytes = std::vector<uint8_t>;

Bytes sha256(const Bytes& data);
Bytes hmac_sha256(const Bytes& key, const Bytes& data);

// Raw single-block AES-256 (16-byte block, 32-byte key).
void aes256_encrypt_block(const uint8_t key[32], const uint8_t in[16], uint8_t out[16]);
void aes256_decrypt_block(const uint8_t key[32], const uint8_t in[16], uint8_t out[16]);

// CBC mode with PKCS#7 padding.
Bytes aes256_cbc_encrypt(const Bytes& key, const Bytes& iv, const Bytes& plaintext);
std::optional<Bytes> aes256_cbc_decrypt(const Bytes& key, const Bytes& iv, const Bytes& ciphertext);

}  // namespace refcrypto
