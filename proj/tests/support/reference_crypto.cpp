#include "reference_crypto.hpp"

#include <cstring>
#include <stdexcept>

namespace refcrypto {

// ---------------------------------------------------------------------------
// SHA-256 (FIPS 180-4)
// ---------------------------------------------------------------------------

namespace {

constexpr uint32_t kSha256K[64] = {
    0x428a2f98, 0x71374491, 0xb5c0fbcf, 0xe9b5dba5, 0x3956c25b, 0x59f111f1,
    0x923f82a4, 0xab1c5ed5, 0xd807aa98, 0x12835b01, 0x243185be, 0x550c7dc3,
    0x72be5d74, 0x80deb1fe, 0x9bdc06a7, 0xc19bf174, 0xe49b69c1, 0xefbe4786,
    0x0fc19dc6, 0x240ca1cc, 0x2de92c6f, 0x4a7484aa, 0x5cb0a9dc, 0x76f988da,
    0x983e5152, 0xa831c66d, 0xb00327c8, 0xbf597fc7, 0xc6e00bf3, 0xd5a79147,
    0x06ca6351, 0x14292967, 0x27b70a85, 0x2e1b2138, 0x4d2c6dfc, 0x53380d13,
    0x650a7354, 0x766a0abb, 0x81c2c92e, 0x92722c85, 0xa2bfe8a1, 0xa81a664b,
    0xc24b8b70, 0xc76c51a3, 0xd192e819, 0xd6990624, 0xf40e3585, 0x106aa070,
    0x19a4c116, 0x1e376c08, 0x2748774c, 0x34b0bcb5, 0x391c0cb3, 0x4ed8aa4a,
    0x5b9cca4f, 0x682e6ff3, 0x748f82ee, 0x78a5636f, 0x84c87814, 0x8cc70208,
    0x90befffa, 0xa4506ceb, 0xbef9a3f7, 0xc67178f2};

inline uint32_t rotr(uint32_t x, int n) { return (x >> n) | (x << (32 - n)); }

void sha256_compress(uint32_t state[8], const uint8_t block[64]) {
  uint32_t w[64];
  for (int i = 0; i < 16; ++i) {
    w[i] = (static_cast<uint32_t>(block[4 * i]) << 24) |
           (static_cast<uint32_t>(block[4 * i + 1]) << 16) |
           (static_cast<uint32_t>(block[4 * i + 2]) << 8) |
           static_cast<uint32_t>(block[4 * i + 3]);
  }
  for (int i = 16; i < 64; ++i) {
    uint32_t s0 = rotr(w[i - 15], 7) ^ rotr(w[i - 15], 18) ^ (w[i - 15] >> 3);
    uint32_t s1 = rotr(w[i - 2], 17) ^ rotr(w[i - 2], 19) ^ (w[i - 2] >> 10);
    w[i] = w[i - 16] + s0 + w[i - 7] + s1;
  }
  uint32_t a = state[0], b = state[1], c = state[2], d = state[3];
  uint32_t e = state[4], f = state[5], g = state[6], h = state[7];
  for (int i = 0; i < 64; ++i) {
    uint32_t s1 = rotr(e, 6) ^ rotr(e, 11) ^ rotr(e, 25);
    uint32_t ch = (e & f) ^ (~e & g);
    uint32_t t1 = h + s1 + ch + kSha256K[i] + w[i];
    uint32_t s0 = rotr(a, 2) ^ rotr(a, 13) ^ rotr(a, 22);
    uint32_t maj = (a & b) ^ (a & c) ^ (b & c);
    uint32_t t2 = s0 + maj;
    h = g;
    g = f;
    f = e;
    e = d + t1;
    d = c;
    c = b;
    b = a;
    a = t1 + t2;
  }
  state[0] += a;
  state[1] += b;
  state[2] += c;
  state[3] += d;
  state[4] += e;
  state[5] += f;
  state[6] += g;
  state[7] += h;
}

}  // namespace

Bytes sha256(const Bytes& data) {
  uint32_t state[8] = {0x6a09e667, 0xbb67ae85, 0x3c6ef372, 0xa54ff53a,
                       0x510e527f, 0x9b05688c, 0x1f83d9ab, 0x5be0cd19};
  uint64_t bit_len = static_cast<uint64_t>(data.size()) * 8;

  size_t full = data.size() / 64;
  for (size_t i = 0; i < full; ++i) {
    sha256_compress(state, data.data() + 64 * i);
  }

  uint8_t tail[128] = {0};
  size_t rem = data.size() % 64;
  std::memcpy(tail, data.data() + 64 * full, rem);
  tail[rem] = 0x80;
  size_t tail_len = (rem < 56) ? 64 : 128;
  for (int i = 0; i < 8; ++i) {
    tail[tail_len - 1 - i] = static_cast<uint8_t>(bit_len >> (8 * i));
  }
  sha256_compress(state, tail);
  if (tail_len == 128) sha256_compress(state, tail + 64);

  Bytes out(32);
  for (int i = 0; i < 8; ++i) {
    out[4 * i] = static_cast<uint8_t>(state[i] >> 24);
    out[4 * i + 1] = static_cast<uint8_t>(state[i] >> 16);
    out[4 * i + 2] = static_cast<uint8_t>(state[i] >> 8);
    out[4 * i + 3] = static_cast<uint8_t>(state[i]);
  }
  return out;
}

Bytes hmac_sha256(const Bytes& key, const Bytes& data) {
  Bytes k = key;
  if (k.size() > 64) k = sha256(k);
  k.resize(64, 0x00);

  Bytes inner(64), outer(64);
  for (size_t i = 0; i < 64; ++i) {
    inner[i] = k[i] ^ 0x36;
    outer[i] = k[i] ^ 0x5c;
  }
  Bytes inner_msg = inner;
  inner_msg.insert(inner_msg.end(), data.begin(), data.end());
  Bytes inner_hash = sha256(inner_msg);
  Bytes outer_msg = outer;
  outer_msg.insert(outer_msg.end(), inner_hash.begin(), inner_hash.end());
  return sha256(outer_msg);
}

// ---------------------------------------------------------------------------
// AES-256 (FIPS 197)
// ---------------------------------------------------------------------------

namespace {

constexpr uint8_t kSbox[256] = {
    0x63, 0x7c, 0x77, 0x7b, 0xf2, 0x6b, 0x6f, 0xc5, 0x30, 0x01, 0x67, 0x2b,
    0xfe, 0xd7, 0xab, 0x76, 0xca, 0x82, 0xc9, 0x7d, 0xfa, 0x59, 0x47, 0xf0,
    0xad, 0xd4, 0xa2, 0xaf, 0x9c, 0xa4, 0x72, 0xc0, 0xb7, 0xfd, 0x93, 0x26,
    0x36, 0x3f, 0xf7, 0xcc, 0x34, 0xa5, 0xe5, 0xf1, 0x71, 0xd8, 0x31, 0x15,
    0x04, 0xc7, 0x23, 0xc3, 0x18, 0x96, 0x05, 0x9a, 0x07, 0x12, 0x80, 0xe2,
    0xeb, 0x27, 0xb2, 0x75, 0x09, 0x83, 0x2c, 0x1a, 0x1b, 0x6e, 0x5a, 0xa0,
    0x52, 0x3b, 0xd6, 0xb3, 0x29, 0xe3, 0x2f, 0x84, 0x53, 0xd1, 0x00, 0xed,
    0x20, 0xfc, 0xb1, 0x5b, 0x6a, 0xcb, 0xbe, 0x39, 0x4a, 0x4c, 0x58, 0xcf,
    0xd0, 0xef, 0xaa, 0xfb, 0x43, 0x4d, 0x33, 0x85, 0x45, 0xf9, 0x02, 0x7f,
    0x50, 0x3c, 0x9f, 0xa8, 0x51, 0xa3, 0x40, 0x8f, 0x92, 0x9d, 0x38, 0xf5,
    0xbc, 0xb6, 0xda, 0x21, 0x10, 0xff, 0xf3, 0xd2, 0xcd, 0x0c, 0x13, 0xec,
    0x5f, 0x97, 0x44, 0x17, 0xc4, 0xa7, 0x7e, 0x3d, 0x64, 0x5d, 0x19, 0x73,
    0x60, 0x81, 0x4f, 0xdc, 0x22, 0x2a, 0x90, 0x88, 0x46, 0xee, 0xb8, 0x14,
    0xde, 0x5e, 0x0b, 0xdb, 0xe0, 0x32, 0x3a, 0x0a, 0x49, 0x06, 0x24, 0x5c,
    0xc2, 0xd3, 0xac, 0x62, 0x91, 0x95, 0xe4, 0x79, 0xe7, 0xc8, 0x37, 0x6d,
    0x8d, 0xd5, 0x4e, 0xa9, 0x6c, 0x56, 0xf4, 0xea, 0x65, 0x7a, 0xae, 0x08,
    0xba, 0x78, 0x25, 0x2e, 0x1c, 0xa6, 0xb4, 0xc6, 0xe8, 0xdd, 0x74, 0x1f,
    0x4b, 0xbd, 0x8b, 0x8a, 0x70, 0x3e, 0xb5, 0x66, 0x48, 0x03, 0xf6, 0x0e,
    0x61, 0x35, 0x57, 0xb9, 0x86, 0xc1, 0x1d, 0x9e, 0xe1, 0xf8, 0x98, 0x11,
    0x69, 0xd9, 0x8e, 0x94, 0x9b, 0x1e, 0x87, 0xe9, 0xce, 0x55, 0x28, 0xdf,
    0x8c, 0xa1, 0x89, 0x0d, 0xbf, 0xe6, 0x42, 0x68, 0x41, 0x99, 0x2d, 0x0f,
    0xb0, 0x54, 0xbb, 0x16};

uint8_t kInvSbox[256];
bool g_inv_sbox_ready = false;

void init_inv_sbox() {
  if (g_inv_sbox_ready) return;
  for (int i = 0; i < 256; ++i) kInvSbox[kSbox[i]] = static_cast<uint8_t>(i);
  g_inv_sbox_ready = true;
}

inline uint8_t xtime(uint8_t x) {
  return static_cast<uint8_t>((x << 1) ^ ((x & 0x80) ? 0x1b : 0x00));
}

uint8_t gmul(uint8_t a, uint8_t b) {
  uint8_t p = 0;
  for (int i = 0; i < 8; ++i) {
    if (b & 1) p ^= a;
    a = xtime(a);
    b >>= 1;
  }
  return p;
}

// 60 round-key words for AES-256 (14 rounds + initial).
void key_expansion(const uint8_t key[32], uint32_t w[60]) {
  for (int i = 0; i < 8; ++i) {
    w[i] = (static_cast<uint32_t>(key[4 * i]) << 24) |
           (static_cast<uint32_t>(key[4 * i + 1]) << 16) |
           (static_cast<uint32_t>(key[4 * i + 2]) << 8) |
           static_cast<uint32_t>(key[4 * i + 3]);
  }
  uint32_t rcon = 0x01000000;
  for (int i = 8; i < 60; ++i) {
    uint32_t temp = w[i - 1];
    if (i % 8 == 0) {
      temp = (temp << 8) | (temp >> 24);  // RotWord
      temp = (static_cast<uint32_t>(kSbox[(temp >> 24) & 0xff]) << 24) |
             (static_cast<uint32_t>(kSbox[(temp >> 16) & 0xff]) << 16) |
             (static_cast<uint32_t>(kSbox[(temp >> 8) & 0xff]) << 8) |
             static_cast<uint32_t>(kSbox[temp & 0xff]);
      temp ^= rcon;
      rcon = static_cast<uint32_t>(xtime(static_cast<uint8_t>(rcon >> 24))) << 24;
    } else if (i % 8 == 4) {
      temp = (static_cast<uint32_t>(kSbox[(temp >> 24) & 0xff]) << 24) |
             (static_cast<uint32_t>(kSbox[(temp >> 16) & 0xff]) << 16) |
             (static_cast<uint32_t>(kSbox[(temp >> 8) & 0xff]) << 8) |
             static_cast<uint32_t>(kSbox[temp & 0xff]);
    }
    w[i] = w[i - 8] ^ temp;
  }
}

void add_round_key(uint8_t state[16], const uint32_t* w) {
  for (int c = 0; c < 4; ++c) {
    state[4 * c] ^= static_cast<uint8_t>(w[c] >> 24);
    state[4 * c + 1] ^= static_cast<uint8_t>(w[c] >> 16);
    state[4 * c + 2] ^= static_cast<uint8_t>(w[c] >> 8);
    state[4 * c + 3] ^= static_cast<uint8_t>(w[c]);
  }
}

void sub_bytes(uint8_t s[16]) {
  for (int i = 0; i < 16; ++i) s[i] = kSbox[s[i]];
}

void inv_sub_bytes(uint8_t s[16]) {
  for (int i = 0; i < 16; ++i) s[i] = kInvSbox[s[i]];
}

// State layout: s[4*c + r] = row r, column c (matches FIPS byte order).
void shift_rows(uint8_t s[16]) {
  uint8_t t[16];
  for (int c = 0; c < 4; ++c) {
    for (int r = 0; r < 4; ++r) {
      t[4 * c + r] = s[4 * ((c + r) % 4) + r];
    }
  }
  std::memcpy(s, t, 16);
}

void inv_shift_rows(uint8_t s[16]) {
  uint8_t t[16];
  for (int c = 0; c < 4; ++c) {
    for (int r = 0; r < 4; ++r) {
      t[4 * ((c + r) % 4) + r] = s[4 * c + r];
    }
  }
  std::memcpy(s, t, 16);
}

void mix_columns(uint8_t s[16]) {
  for (int c = 0; c < 4; ++c) {
    uint8_t* col = s + 4 * c;
    uint8_t a0 = col[0], a1 = col[1], a2 = col[2], a3 = col[3];
    col[0] = static_cast<uint8_t>(gmul(a0, 2) ^ gmul(a1, 3) ^ a2 ^ a3);
    col[1] = static_cast<uint8_t>(a0 ^ gmul(a1, 2) ^ gmul(a2, 3) ^ a3);
    col[2] = static_cast<uint8_t>(a0 ^ a1 ^ gmul(a2, 2) ^ gmul(a3, 3));
    col[3] = static_cast<uint8_t>(gmul(a0, 3) ^ a1 ^ a2 ^ gmul(a3, 2));
  }
}

void inv_mix_columns(uint8_t s[16]) {
  for (int c = 0; c < 4; ++c) {
    uint8_t* col = s + 4 * c;
    uint8_t a0 = col[0], a1 = col[1], a2 = col[2], a3 = col[3];
    col[0] = static_cast<uint8_t>(gmul(a0, 14) ^ gmul(a1, 11) ^ gmul(a2, 13) ^ gmul(a3, 9));
    col[1] = static_cast<uint8_t>(gmul(a0, 9) ^ gmul(a1, 14) ^ gmul(a2, 11) ^ gmul(a3, 13));
    col[2] = static_cast<uint8_t>(gmul(a0, 13) ^ gmul(a1, 9) ^ gmul(a2, 14) ^ gmul(a3, 11));
    col[3] = static_cast<uint8_t>(gmul(a0, 11) ^ gmul(a1, 13) ^ gmul(a2, 9) ^ gmul(a3, 14));
  }
}

}  // namespace

void aes256_encrypt_block(const uint8_t key[32], const uint8_t in[16], uint8_t out[16]) {
  uint32_t w[60];
  key_expansion(key, w);
  uint8_t s[16];
  std::memcpy(s, in, 16);
  add_round_key(s, w);
  for (int round = 1; round < 14; ++round) {
    sub_bytes(s);
    shift_rows(s);
    mix_columns(s);
    add_round_key(s, w + 4 * round);
  }
  sub_bytes(s);
  shift_rows(s);
  add_round_key(s, w + 4 * 14);
  std::memcpy(out, s, 16);
}

void aes256_decrypt_block(const uint8_t key[32], const uint8_t in[16], uint8_t out[16]) {
  init_inv_sbox();
  uint32_t w[60];
  key_expansion(key, w);
  uint8_t s[16];
  std::memcpy(s, in, 16);
  add_round_key(s, w + 4 * 14);
  for (int round = 13; round >= 1; --round) {
    inv_shift_rows(s);
    inv_sub_bytes(s);
    add_round_key(s, w + 4 * round);
    inv_mix_columns(s);
  }
  inv_shift_rows(s);
  inv_sub_bytes(s);
  add_round_key(s, w);
  std::memcpy(out, s, 16);
}

Bytes aes256_cbc_encrypt(const Bytes& key, const Bytes& iv, const Bytes& plaintext) {
  if (key.size() != 32 || iv.size() != 16) throw std::invalid_argument("bad key/iv size");
  size_t pad = 16 - plaintext.size() % 16;
  Bytes padded = plaintext;
  padded.insert(padded.end(), pad, static_cast<uint8_t>(pad));

  Bytes out(padded.size());
  uint8_t chain[16];
  std::memcpy(chain, iv.data(), 16);
  for (size_t off = 0; off < padded.size(); off += 16) {
    uint8_t block[16];
    for (int i = 0; i < 16; ++i) block[i] = padded[off + i] ^ chain[i];
    aes256_encrypt_block(key.data(), block, out.data() + off);
    std::memcpy(chain, out.data() + off, 16);
  }
  return out;
}

std::optional<Bytes> aes256_cbc_decrypt(const Bytes& key, const Bytes& iv, const Bytes& ciphertext) {
  if (key.size() != 32 || iv.size() != 16) throw std::invalid_argument("bad key/iv size");
  if (ciphertext.empty() || ciphertext.size() % 16 != 0) return std::nullopt;

  Bytes out(ciphertext.size());
  uint8_t chain[16];
  std::memcpy(chain, iv.data(), 16);
  for (size_t off = 0; off < ciphertext.size(); off += 16) {
    uint8_t block[16];
    aes256_decrypt_block(key.data(), ciphertext.data() + off, block);
    for (int i = 0; i < 16; ++i) out[off + i] = block[i] ^ chain[i];
    std::memcpy(chain, ciphertext.data() + off, 16);
  }
  uint8_t pad = out.back();
  if (pad == 0 || pad > 16 || pad > out.size()) return std::nullopt;
  for (size_t i = out.size() - pad; i < out.size(); ++i) {
    if (out[i] != pad) return std::nullopt;
  }
  out.resize(out.size() - pad);
  return out;
}

}  // namespace refcrypto
