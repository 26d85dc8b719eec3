#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>

#include "proxauth/bytes.hpp"
#include "proxauth/errors.hpp"
#include "proxauth/rng.hpp"

namespace proxauth::biometric {

inline constexpr size_t kEmbeddingDim = 128;
inline constexpr double kDefaultThreshold = 1.0;

/// Unit-norm 128-dimensional feature vector standing in for a face-recognition
/// network output. Two captures of the same face land close in Euclidean
/// distance; independent identities land near sqrt(2).
struct FaceEmbedding {
  std::array<double, kEmbeddingDim> v{};

  bool operator==(const FaceEmbedding&) const = default;

  /// 128 little-endian 64-bit floats, bit-exact.
  Bytes to_bytes() const;
  static std::optional<FaceEmbedding> from_bytes(ByteView b);

  double norm() const;
};

/// A simulated person: a fixed ground-truth embedding plus per-capture
/// Gaussian sensor noise.
struct IdentityProfile {
  FaceEmbedding ground_truth;
  double noise_sigma = 0.0;
};

/// Opaque reference to a stored embedding.
struct FbUrl {
  std::string id;

  bool operator==(const FbUrl&) const = default;
  auto operator<=>(const FbUrl&) const = default;
};

/// Random identity: uniform direction on the unit sphere.
FaceEmbedding random_identity(Csprng& rng);

/// One capture: ground truth plus N(0, sigma^2) per component, re-normalized.
FaceEmbedding capture(const IdentityProfile& profile, Csprng& rng);

/// Euclidean distance. Throws std::invalid_argument on NaN input; dimensions
/// are fixed by the type.
double distance(const FaceEmbedding& a, const FaceEmbedding& b);

/// True iff distance(login, reg) <= threshold.
bool verify(const FaceEmbedding& login, const FaceEmbedding& reg, double threshold);

/// Server-side embedding store, keyed by freshly issued FbUrls. Stores exact
/// binary vectors; fetch returns them bit-for-bit.
class EmbeddingStore {
 public:
  FbUrl store(const FaceEmbedding& e, Csprng& rng);
  Expected<FaceEmbedding> fetch(const FbUrl& url) const;
  bool erase(const FbUrl& url);
  size_t size() const { return entries_.size(); }

 private:
  std::map<std::string, FaceEmbedding> entries_;
  uint64_t next_serial_ = 0;
};

}  // namespace proxauth::biometric
