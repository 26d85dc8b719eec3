#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "proxauth/biometric.hpp"
#include "proxauth/bytes.hpp"
#include "proxauth/crypto.hpp"
#include "proxauth/errors.hpp"

namespace proxauth::messages {

inline constexpr int kProtocolVersion = 1;

/// Fixed confirmation token the app seals under a freshly received AID to
/// prove decryption succeeded. Identical constant on both sides.
inline constexpr std::string_view kFixedToken = "REG-CONFIRM-V1";
inline constexpr std::string_view kMatchTag = "MATCH";
inline constexpr std::string_view kOkBody = "OK";

// ---------------------------------------------------------------------------
// Sealed payload codecs (canonical, length-prefixed binary)
// ---------------------------------------------------------------------------

/// Plaintext of the auth-string envelope the phone stages for the NFC tap:
/// (email, login-time embedding reference, session id).
struct AuthString {
  std::string em;
  biometric::FbUrl login_fburl;
  crypto::SessionId sid;

  bool operator==(const AuthString&) const = default;
};

/// Each field as 4-byte big-endian length followed by raw bytes, in order
/// (em, login_fburl, sid). Injective and prefix-free per field.
Bytes encode_auth_string(const AuthString& a);
Expected<AuthString> decode_auth_string(ByteView b);

/// Plaintext of the envelope the server seals for the desktop after a
/// biometric match: the MATCH tag plus the single-use replay token.
struct MatchMessage {
  crypto::ReplayToken token;

  bool operator==(const MatchMessage&) const = default;
};

Bytes encode_match_message(const MatchMessage& m);
Expected<MatchMessage> decode_match_message(ByteView b);

// ---------------------------------------------------------------------------
// Transport messages (self-describing JSON with hex-wrapped binary)
// ---------------------------------------------------------------------------

enum class Kind {
  RegisterRequest,
  RegisterChallenge,
  RegisterConfirm,
  RegisterResult,
  BiometricUpload,
  BiometricUploadAck,
  LoginContextUpdate,
  LoginContextAck,
  LoginIdentify,
  LoginSalt,
  AuthStringTransfer,
  AuthStringSubmit,
  MatchNotify,
  ProximityProof,
  RotationOffer,
  RotationOk,
  LoginResult,
};

inline constexpr size_t kKindCount = 17;

std::string_view kind_name(Kind k);
std::optional<Kind> kind_from_name(std::string_view name);

/// One protocol arrow. `body` is a flat map of string fields; binary fields
/// are hex-encoded. The schema for each kind pins the exact field set; decode
/// rejects anything else.
struct ProtocolMessage {
  Kind kind;
  std::string sender;
  std::string receiver;
  std::map<std::string, std::string> body;

  bool operator==(const ProtocolMessage&) const = default;

  std::string field(const std::string& name) const;
  std::optional<Bytes> hex_field(const std::string& name) const;
  std::optional<crypto::EncryptedEnvelope> envelope_field(const std::string& name) const;
  bool flag(const std::string& name) const { return field(name) == "1"; }
};

Bytes encode_message(const ProtocolMessage& m);
Expected<ProtocolMessage> decode_message(ByteView wire);

/// Field value types a schema can require.
enum class FieldType { Text, Hex, Envelope, BtAddr, Nonce10, Bool, Hex16 };

struct FieldSpec {
  std::string_view name;
  FieldType type;
  bool required = true;
};

struct KindSchema {
  Kind kind;
  std::vector<FieldSpec> fields;
};

const std::vector<KindSchema>& message_schemas();

// ---------------------------------------------------------------------------
// Protocol step table
// ---------------------------------------------------------------------------

enum class Phase { Registration, Login };

inline constexpr int kRegistrationSteps = 8;
inline constexpr int kLoginSteps = 16;

/// One protocol step: either a local computation or the transmission of one
/// or more message kinds. Covers all 8 registration steps and 16 login steps.
struct StepSpec {
  Phase phase;
  int index;  // 1-based within the phase
  std::string_view summary;
  std::vector<Kind> kinds;  // empty for local steps
};

const std::vector<StepSpec>& protocol_steps();

/// Cross-checks the step table against the schema table: every step present
/// exactly once, every message kind reachable from some step, every kind in
/// the table carrying a schema. Throws std::logic_error on any gap; called at
/// harness startup and from tests.
void validate_protocol_tables();

}  // namespace proxauth::messages
