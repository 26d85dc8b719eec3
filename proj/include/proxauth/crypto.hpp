#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "proxauth/bytes.hpp"
#include "proxauth/errors.hpp"
#include "proxauth/rng.hpp"

namespace proxauth::crypto {

/// 32-byte shared secret (SK, AID and their successors all have this shape).
struct SecretKey {
  std::array<uint8_t, 32> v{};

  bool operator==(const SecretKey&) const = default;
  Bytes bytes() const { return Bytes(v.begin(), v.end()); }
  static std::optional<SecretKey> from_bytes(ByteView b);
};

struct Salt {
  std::array<uint8_t, 16> v{};

  bool operator==(const Salt&) const = default;
  Bytes bytes() const { return Bytes(v.begin(), v.end()); }
  static std::optional<Salt> from_bytes(ByteView b);
};

struct SessionId {
  std::array<uint8_t, 16> v{};

  bool operator==(const SessionId&) const = default;
  auto operator<=>(const SessionId&) const = default;
  Bytes bytes() const { return Bytes(v.begin(), v.end()); }
  static std::optional<SessionId> from_bytes(ByteView b);
};

/// Single-use 16-byte replay token issued with a MATCH message.
struct ReplayToken {
  std::array<uint8_t, 16> v{};

  bool operator==(const ReplayToken&) const = default;
  auto operator<=>(const ReplayToken&) const = default;
  Bytes bytes() const { return Bytes(v.begin(), v.end()); }
  static std::optional<ReplayToken> from_bytes(ByteView b);
};

/// Encryption/MAC key pair derived for one envelope context.
struct KeyPair {
  std::array<uint8_t, 32> enc_key{};
  std::array<uint8_t, 32> mac_key{};

  bool operator==(const KeyPair&) const = default;
};

/// Ten decimal digits, leading zeros allowed.
struct Nonce10 {
  std::string digits;

  bool operator==(const Nonce10&) const = default;
  static std::optional<Nonce10> parse(std::string_view s);
};

/// Wire unit of every confidential payload: iv ‖ mac ‖ ciphertext.
/// The MAC covers iv ‖ ct and is verified before any decryption.
struct EncryptedEnvelope {
  std::array<uint8_t, 16> iv{};
  std::array<uint8_t, 32> mac{};
  Bytes ct;

  bool operator==(const EncryptedEnvelope&) const = default;

  /// Binary layout: bytes [0..16) iv, [16..48) mac, [48..) ct.
  Bytes to_bytes() const;
  static std::optional<EncryptedEnvelope> parse(ByteView wire);
};

/// Fixed protocol salts for contexts where the scheme keys an envelope off a
/// single secret value (a nonce, an app identifier, a Bluetooth address).
/// 16 bytes each; distinct values keep the derivations domain-separated.
extern const Salt kNonceSalt;
extern const Salt kAppIdSalt;
extern const Salt kBtSalt;

SecretKey gen_secret(Csprng& rng);
Salt gen_salt(Csprng& rng);
SessionId gen_session_id(Csprng& rng);
ReplayToken gen_token(Csprng& rng);
Nonce10 gen_nonce10(Csprng& rng);

/// Decimal increment over ten digits, wrapping at 10^10 and re-padding with
/// leading zeros ("9999999999" -> "0000000000").
Nonce10 increment(const Nonce10& n);

/// Session key pair from a shared secret and a fresh nonce:
///   enc_key = HMAC-SHA-256(key = k, data = digits(n))
///   mac_key = HMAC-SHA-256(key = k, data = digits(n + 1))
KeyPair derive_keys(const SecretKey& k, const Nonce10& n);

/// Password/secret-material KDF:
///   enc_key = HMAC-SHA-256(key = material, data = salt ‖ 0x00)
///   mac_key = HMAC-SHA-256(key = material, data = salt ‖ 0x01)
/// Deterministic; rejects empty material.
Expected<KeyPair> derive_key_from_password(ByteView secret_material, const Salt& salt);

/// Envelope keys bound to a Bluetooth address and a session context.
/// The address canonical form ("AA:BB:CC:DD:EE:FF") concatenated with the
/// context feeds derive_key_from_password under kBtSalt. Note: a Bluetooth
/// address carries only 48 bits of entropy; this stretches it but cannot
/// add entropy. The construction mirrors the protocol, which treats the
/// address as key material for the proximity leg.
KeyPair derive_bt_key(std::string_view bt_canonical, ByteView context);

/// Keys for envelopes the protocol writes as bare E_AID(...) / E_N1(...).
KeyPair keys_from_secret(const SecretKey& k);
KeyPair keys_from_nonce(const Nonce10& n);

/// AES-256-CBC with PKCS#7 padding under enc_key, then
/// HMAC-SHA-256(mac_key, iv ‖ ct). Fresh random IV per call.
EncryptedEnvelope seal(const KeyPair& keys, ByteView plaintext, Csprng& rng);

/// MAC check first (constant-time); only then decrypt.
/// MacMismatch: tag failed — tampering or wrong key, nothing decrypted.
/// BadPadding: decryption after a valid MAC produced invalid padding, which
/// indicates an implementation fault rather than an attack.
Expected<Bytes> open_envelope(const KeyPair& keys, const EncryptedEnvelope& env);

/// HMAC-SHA-256, exposed for verifiers (password hashing, transcripts).
Bytes hmac_sha256(ByteView key, ByteView data);

}  // namespace proxauth::crypto
