#include "proxauth/rng.hpp"

#include <openssl/hmac.h>

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace proxauth {

namespace {
void hmac_sha256_into(const uint8_t* key, size_t key_len, const uint8_t* data,
                      size_t data_len, uint8_t out[32]) {
  unsigned int out_len = 32;
  HMAC(EVP_sha256(), key, static_cast<int>(key_len), data, data_len, out, &out_len);
}
}  // namespace

Csprng::Csprng(uint64_t seed, std::string_view stream) {
  Bytes seed_material;
  append_u64_le(seed_material, seed);
  seed_material.insert(seed_material.end(), stream.begin(), stream.end());
  Bytes k = sha256(seed_material);
  std::memcpy(key_.data(), k.data(), key_.size());
}

void Csprng::refill() {
  uint8_t ctr[8];
  for (int i = 0; i < 8; ++i) ctr[i] = static_cast<uint8_t>(counter_ >> (8 * i));
  hmac_sha256_into(key_.data(), key_.size(), ctr, sizeof(ctr), block_.data());
  ++counter_;
  pos_ = 0;
}

void Csprng::fill(std::span<uint8_t> out) {
  size_t done = 0;
  while (done < out.size()) {
    if (pos_ == block_.size()) refill();
    size_t take = std::min(block_.size() - pos_, out.size() - done);
    std::memcpy(out.data() + done, block_.data() + pos_, take);
    pos_ += take;
    done += take;
  }
}

Bytes Csprng::bytes(size_t n) {
  Bytes out(n);
  fill(out);
  return out;
}

uint64_t Csprng::next_u64() {
  uint8_t buf[8];
  fill(buf);
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(buf[i]) << (8 * i);
  return v;
}

uint64_t Csprng::uniform(uint64_t bound) {
  if (bound == 0) throw std::invalid_argument("Csprng::uniform: bound must be > 0");
  // Rejection sampling to avoid modulo bias.
  uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
  uint64_t v;
  do {
    v = next_u64();
  } while (v >= limit);
  return v % bound;
}

double Csprng::unit_double() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Csprng::gaussian() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u, v, s;
  do {
    u = 2.0 * unit_double() - 1.0;
    v = 2.0 * unit_double() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  double m = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * m;
  has_spare_ = true;
  return u * m;
}

}  // namespace proxauth
