#include "proxauth/biometric.hpp"

#include <bit>
#include <cmath>
#include <stdexcept>

namespace proxauth::biometric {

Bytes FaceEmbedding::to_bytes() const {
  Bytes out;
  out.reserve(kEmbeddingDim * 8);
  for (double d : v) {
    append_u64_le(out, std::bit_cast<uint64_t>(d));
  }
  return out;
}

std::optional<FaceEmbedding> FaceEmbedding::from_bytes(ByteView b) {
  if (b.size() != kEmbeddingDim * 8) return std::nullopt;
  FaceEmbedding e;
  for (size_t i = 0; i < kEmbeddingDim; ++i) {
    uint64_t bits = 0;
    for (int j = 0; j < 8; ++j) {
      bits |= static_cast<uint64_t>(b[8 * i + j]) << (8 * j);
    }
    e.v[i] = std::bit_cast<double>(bits);
  }
  return e;
}

double FaceEmbedding::norm() const {
  double s = 0.0;
  for (double d : v) s += d * d;
  return std::sqrt(s);
}

namespace {
FaceEmbedding normalize(FaceEmbedding e) {
  double n = e.norm();
  if (n == 0.0 || !std::isfinite(n)) {
    throw std::invalid_argument("cannot normalize degenerate embedding");
  }
  for (double& d : e.v) d /= n;
  return e;
}
}  // namespace

FaceEmbedding random_identity(Csprng& rng) {
  FaceEmbedding e;
  for (double& d : e.v) d = rng.gaussian();
  return normalize(e);
}

FaceEmbedding capture(const IdentityProfile& profile, Csprng& rng) {
  if (profile.noise_sigma < 0.0) {
    throw std::invalid_argument("noise_sigma must be >= 0");
  }
  if (profile.noise_sigma == 0.0) return profile.ground_truth;
  FaceEmbedding e = profile.ground_truth;
  for (double& d : e.v) d += profile.noise_sigma * rng.gaussian();
  return normalize(e);
}

double distance(const FaceEmbedding& a, const FaceEmbedding& b) {
  double s = 0.0;
  for (size_t i = 0; i < kEmbeddingDim; ++i) {
    double d = a.v[i] - b.v[i];
    s += d * d;
  }
  double out = std::sqrt(s);
  if (!std::isfinite(out)) throw std::invalid_argument("non-finite embedding");
  return out;
}

bool verify(const FaceEmbedding& login, const FaceEmbedding& reg, double threshold) {
  if (threshold <= 0.0) throw std::invalid_argument("threshold must be > 0");
  return distance(login, reg) <= threshold;
}

FbUrl EmbeddingStore::store(const FaceEmbedding& e, Csprng& rng) {
  // Serial keeps ids unique even across identical vectors; random suffix keeps
  // them non-guessable in transcripts.
  std::string id = "fb-" + std::to_string(next_serial_++) + "-" + hex_encode(rng.bytes(8));
  entries_[id] = e;
  return FbUrl{id};
}

Expected<FaceEmbedding> EmbeddingStore::fetch(const FbUrl& url) const {
  auto it = entries_.find(url.id);
  if (it == entries_.end()) {
    return Error(Err::NotFound, "no embedding stored under " + url.id);
  }
  return it->second;
}

bool EmbeddingStore::erase(const FbUrl& url) {
  return entries_.erase(url.id) > 0;
}

}  // namespace proxauth::biometric
