#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string_view>

#include "proxauth/bytes.hpp"

namespace proxauth {

/// Deterministic byte source: an HMAC-SHA-256 counter generator keyed from
/// (seed, stream label). Every random value in the system flows through one
/// of these, so a run is fully reproducible from its seed. Distinct stream
/// labels give independent streams off the same seed.
class Csprng {
 public:
  explicit Csprng(uint64_t seed, std::string_view stream = {});

  void fill(std::span<uint8_t> out);
  Bytes bytes(size_t n);

  uint64_t next_u64();

  /// Uniform integer in [0, bound). bound must be > 0.
  uint64_t uniform(uint64_t bound);

  /// Uniform double in [0, 1) with 53 bits of precision.
  double unit_double();

  /// Standard normal deviate (Marsaglia polar method).
  double gaussian();

 private:
  void refill();

  std::array<uint8_t, 32> key_{};
  std::array<uint8_t, 32> block_{};
  uint64_t counter_ = 0;
  size_t pos_ = sizeof(block_);
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace proxauth
