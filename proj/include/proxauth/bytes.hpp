#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace proxauth {

using Bytes = std::vector<uint8_t>;
using ByteView = std::span<const uint8_t>;

inline Bytes to_bytes(std::string_view s) {
  return Bytes(s.begin(), s.end());
}

inline std::string to_string(ByteView b) {
  return std::string(b.begin(), b.end());
}

std::string hex_encode(ByteView data);

/// Decodes a hex string (even length, [0-9a-fA-F]). Empty input yields an
/// empty buffer; malformed input yields nullopt.
std::optional<Bytes> hex_decode(std::string_view hex);

/// Constant-time equality. Returns false for length mismatch.
bool ct_equal(ByteView a, ByteView b);

Bytes concat(ByteView a, ByteView b);
Bytes concat(ByteView a, ByteView b, ByteView c);

/// SHA-256 digest (32 bytes).
Bytes sha256(ByteView data);

/// Hex-encoded SHA-256, used for transcript digests.
std::string sha256_hex(ByteView data);

void append_u32_be(Bytes& out, uint32_t v);
std::optional<uint32_t> read_u32_be(ByteView in, size_t offset);

void append_u64_le(Bytes& out, uint64_t v);

/// True if `needle` occurs as a contiguous substring of `haystack`.
bool contains_bytes(ByteView haystack, ByteView needle);

}  // namespace proxauth
