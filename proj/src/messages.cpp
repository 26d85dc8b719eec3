#include "proxauth/messages.hpp"

#include <nlohmann/json.hpp>

#include <set>
#include <stdexcept>

#include "proxauth/sim.hpp"

namespace proxauth::messages {

using nlohmann::json;

namespace {

void append_field(Bytes& out, ByteView field) {
  append_u32_be(out, static_cast<uint32_t>(field.size()));
  out.insert(out.end(), field.begin(), field.end());
}

std::optional<Bytes> take_field(ByteView in, size_t& offset) {
  auto len = read_u32_be(in, offset);
  if (!len) return std::nullopt;
  offset += 4;
  if (offset + *len > in.size()) return std::nullopt;
  Bytes field(in.begin() + offset, in.begin() + offset + *len);
  offset += *len;
  return field;
}

}  // namespace

Bytes encode_auth_string(const AuthString& a) {
  Bytes out;
  append_field(out, to_bytes(a.em));
  append_field(out, to_bytes(a.login_fburl.id));
  append_field(out, a.sid.v);
  return out;
}

Expected<AuthString> decode_auth_string(ByteView b) {
  size_t offset = 0;
  auto em = take_field(b, offset);
  if (!em) return Error(Err::MalformedAuthString, "truncated em field");
  auto fburl = take_field(b, offset);
  if (!fburl) return Error(Err::MalformedAuthString, "truncated fburl field");
  auto sid_bytes = take_field(b, offset);
  if (!sid_bytes) return Error(Err::MalformedAuthString, "truncated sid field");
  if (offset != b.size()) return Error(Err::MalformedAuthString, "trailing bytes");
  auto sid = crypto::SessionId::from_bytes(*sid_bytes);
  if (!sid) return Error(Err::MalformedAuthString, "sid must be 16 bytes");
  return AuthString{to_string(*em), biometric::FbUrl{to_string(*fburl)}, *sid};
}

Bytes encode_match_message(const MatchMessage& m) {
  Bytes out;
  append_field(out, to_bytes(kMatchTag));
  append_field(out, m.token.v);
  return out;
}

Expected<MatchMessage> decode_match_message(ByteView b) {
  size_t offset = 0;
  auto tag = take_field(b, offset);
  if (!tag || to_string(*tag) != kMatchTag) {
    return Error(Err::MalformedMessage, "missing MATCH tag");
  }
  auto token_bytes = take_field(b, offset);
  if (!token_bytes) return Error(Err::MalformedMessage, "truncated token");
  if (offset != b.size()) return Error(Err::MalformedMessage, "trailing bytes");
  auto token = crypto::ReplayToken::from_bytes(*token_bytes);
  if (!token) return Error(Err::MalformedMessage, "token must be 16 bytes");
  return MatchMessage{*token};
}

namespace {

struct KindName {
  Kind kind;
  std::string_view name;
};

constexpr KindName kKindNames[] = {
    {Kind::RegisterRequest, "RegisterRequest"},
    {Kind::RegisterChallenge, "RegisterChallenge"},
    {Kind::RegisterConfirm, "RegisterConfirm"},
    {Kind::RegisterResult, "RegisterResult"},
    {Kind::BiometricUpload, "BiometricUpload"},
    {Kind::BiometricUploadAck, "BiometricUploadAck"},
    {Kind::LoginContextUpdate, "LoginContextUpdate"},
    {Kind::LoginContextAck, "LoginContextAck"},
    {Kind::LoginIdentify, "LoginIdentify"},
    {Kind::LoginSalt, "LoginSalt"},
    {Kind::AuthStringTransfer, "AuthStringTransfer"},
    {Kind::AuthStringSubmit, "AuthStringSubmit"},
    {Kind::MatchNotify, "MatchNotify"},
    {Kind::ProximityProof, "ProximityProof"},
    {Kind::RotationOffer, "RotationOffer"},
    {Kind::RotationOk, "RotationOk"},
    {Kind::LoginResult, "LoginResult"},
};

static_assert(sizeof(kKindNames) / sizeof(kKindNames[0]) == kKindCount);

}  // namespace

std::string_view kind_name(Kind k) {
  for (const auto& kn : kKindNames) {
    if (kn.kind == k) return kn.name;
  }
  return "?";
}

std::optional<Kind> kind_from_name(std::string_view name) {
  for (const auto& kn : kKindNames) {
    if (kn.name == name) return kn.kind;
  }
  return std::nullopt;
}

std::string ProtocolMessage::field(const std::string& name) const {
  auto it = body.find(name);
  return it == body.end() ? std::string() : it->second;
}

std::optional<Bytes> ProtocolMessage::hex_field(const std::string& name) const {
  auto it = body.find(name);
  if (it == body.end()) return std::nullopt;
  return hex_decode(it->second);
}

std::optional<crypto::EncryptedEnvelope> ProtocolMessage::envelope_field(
    const std::string& name) const {
  auto raw = hex_field(name);
  if (!raw) return std::nullopt;
  return crypto::EncryptedEnvelope::parse(*raw);
}

const std::vector<KindSchema>& message_schemas() {
  static const std::vector<KindSchema> schemas = {
      {Kind::RegisterRequest,
       {{"em", FieldType::Text},
        {"pwd", FieldType::Text},
        {"app_id", FieldType::Text},
        {"embedding", FieldType::Hex}}},
      {Kind::RegisterChallenge,
       {{"salt", FieldType::Hex16}, {"enc_aid", FieldType::Envelope}}},
      {Kind::RegisterConfirm,
       {{"em", FieldType::Text}, {"confirm", FieldType::Envelope}}},
      {Kind::RegisterResult,
       {{"ok", FieldType::Bool}, {"error", FieldType::Text, false}}},
      {Kind::BiometricUpload,
       {{"em", FieldType::Text}, {"embedding", FieldType::Hex}}},
      {Kind::BiometricUploadAck,
       {{"ok", FieldType::Bool},
        {"fburl", FieldType::Text, false},
        {"error", FieldType::Text, false}}},
      {Kind::LoginContextUpdate,
       {{"em", FieldType::Text},
        {"n1", FieldType::Nonce10},
        {"bt1", FieldType::BtAddr}}},
      {Kind::LoginContextAck,
       {{"ok", FieldType::Bool}, {"error", FieldType::Text, false}}},
      {Kind::LoginIdentify,
       {{"em", FieldType::Text}, {"identifier", FieldType::Envelope}}},
      {Kind::LoginSalt,
       {{"ok", FieldType::Bool},
        {"salt", FieldType::Hex16, false},
        {"error", FieldType::Text, false}}},
      {Kind::AuthStringTransfer, {{"auth", FieldType::Envelope}}},
      {Kind::AuthStringSubmit,
       {{"auth", FieldType::Envelope}, {"bt2", FieldType::BtAddr}}},
      {Kind::MatchNotify,
       {{"sid", FieldType::Hex16},
        {"bt1", FieldType::BtAddr},
        {"match", FieldType::Envelope}}},
      {Kind::ProximityProof,
       {{"sid", FieldType::Hex16}, {"proof", FieldType::Envelope}}},
      {Kind::RotationOffer,
       {{"salt", FieldType::Hex16}, {"enc_aid_next", FieldType::Envelope}}},
      {Kind::RotationOk,
       {{"em", FieldType::Text}, {"ok_env", FieldType::Envelope}}},
      {Kind::LoginResult,
       {{"ok", FieldType::Bool},
        {"sid", FieldType::Hex16, false},
        {"error", FieldType::Text, false}}},
  };
  return schemas;
}

namespace {

const KindSchema& schema_for(Kind k) {
  for (const auto& s : message_schemas()) {
    if (s.kind == k) return s;
  }
  throw std::logic_error("no schema for message kind");
}

Status check_field(const FieldSpec& spec, const std::string& value) {
  auto fail = [&](const std::string& why) {
    return Status(Error(Err::MalformedMessage,
                        "field '" + std::string(spec.name) + "': " + why));
  };
  switch (spec.type) {
    case FieldType::Text:
      return Status::success();
    case FieldType::Bool:
      if (value != "0" && value != "1") return fail("expected 0 or 1");
      return Status::success();
    case FieldType::Hex: {
      if (!hex_decode(value)) return fail("invalid hex");
      return Status::success();
    }
    case FieldType::Hex16: {
      auto raw = hex_decode(value);
      if (!raw || raw->size() != 16) return fail("expected 16 hex-encoded bytes");
      return Status::success();
    }
    case FieldType::Envelope: {
      auto raw = hex_decode(value);
      if (!raw || !crypto::EncryptedEnvelope::parse(*raw)) {
        return fail("not a valid envelope");
      }
      return Status::success();
    }
    case FieldType::BtAddr:
      if (!sim::BluetoothAddress::parse(value)) return fail("not a bluetooth address");
      return Status::success();
    case FieldType::Nonce10:
      if (!crypto::Nonce10::parse(value)) return fail("expected 10 decimal digits");
      return Status::success();
  }
  return fail("unknown field type");
}

Status validate_body(const KindSchema& schema,
                     const std::map<std::string, std::string>& body) {
  for (const auto& spec : schema.fields) {
    auto it = body.find(std::string(spec.name));
    if (it == body.end()) {
      if (spec.required) {
        return Status(Error(Err::MalformedMessage,
                            "missing field '" + std::string(spec.name) + "'"));
      }
      continue;
    }
    if (auto st = check_field(spec, it->second); !st.ok()) return st;
  }
  for (const auto& [name, _] : body) {
    bool known = false;
    for (const auto& spec : schema.fields) {
      if (spec.name == name) {
        known = true;
        break;
      }
    }
    if (!known) {
      return Status(Error(Err::MalformedMessage, "unknown field '" + name + "'"));
    }
  }
  return Status::success();
}

}  // namespace

Bytes encode_message(const ProtocolMessage& m) {
  if (auto st = validate_body(schema_for(m.kind), m.body); !st.ok()) {
    throw std::logic_error("encode_message: " + st.error().to_string());
  }
  json j;
  j["v"] = kProtocolVersion;
  j["kind"] = std::string(kind_name(m.kind));
  j["from"] = m.sender;
  j["to"] = m.receiver;
  j["body"] = json::object();
  for (const auto& [k, v] : m.body) j["body"][k] = v;
  // nlohmann::json keeps object keys sorted, so dumps are canonical.
  std::string s = j.dump();
  return to_bytes(s);
}

Expected<ProtocolMessage> decode_message(ByteView wire) {
  if (wire.empty()) return Error(Err::MalformedMessage, "empty message");
  json j = json::parse(wire.begin(), wire.end(), nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    return Error(Err::MalformedMessage, "not a JSON object");
  }
  for (const auto& key : {"v", "kind", "from", "to", "body"}) {
    if (!j.contains(key)) {
      return Error(Err::MalformedMessage, std::string("missing '") + key + "'");
    }
  }
  if (j.size() != 5) return Error(Err::MalformedMessage, "unexpected top-level field");
  if (!j["v"].is_number_integer() || j["v"].get<int>() != kProtocolVersion) {
    return Error(Err::MalformedMessage, "unsupported version");
  }
  if (!j["kind"].is_string() || !j["from"].is_string() || !j["to"].is_string() ||
      !j["body"].is_object()) {
    return Error(Err::MalformedMessage, "wrong field types");
  }
  auto kind = kind_from_name(j["kind"].get<std::string>());
  if (!kind) {
    return Error(Err::MalformedMessage, "unknown kind '" + j["kind"].get<std::string>() + "'");
  }
  ProtocolMessage m;
  m.kind = *kind;
  m.sender = j["from"].get<std::string>();
  m.receiver = j["to"].get<std::string>();
  for (const auto& [k, v] : j["body"].items()) {
    if (!v.is_string()) {
      return Error(Err::MalformedMessage, "field '" + k + "': expected string");
    }
    m.body[k] = v.get<std::string>();
  }
  if (auto st = validate_body(schema_for(m.kind), m.body); !st.ok()) {
    return st.error();
  }
  return m;
}

const std::vector<StepSpec>& protocol_steps() {
  static const std::vector<StepSpec> steps = {
      // Registration phase (first device <-> server).
      {Phase::Registration, 1, "user enters em/pwd, app captures face biometric", {}},
      {Phase::Registration, 2, "app submits signup details and biometric", {Kind::RegisterRequest}},
      {Phase::Registration, 3, "server checks email uniqueness, generates AID and salt, seals AID", {}},
      {Phase::Registration, 4, "server returns salt and sealed AID", {Kind::RegisterChallenge}},
      {Phase::Registration, 5, "app stores sealed AID, transiently decrypts it", {}},
      {Phase::Registration, 6, "app seals fixed confirmation token under AID", {Kind::RegisterConfirm}},
      {Phase::Registration, 7, "server verifies confirmation token", {}},
      {Phase::Registration, 8, "server commits the account record and reports the result", {Kind::RegisterResult}},
      // Login phase (first device, second device, server).
      {Phase::Login, 1, "app captures+uploads login biometric, generates N1, reports (N1, BT1)",
       {Kind::BiometricUpload, Kind::BiometricUploadAck, Kind::LoginContextUpdate, Kind::LoginContextAck}},
      {Phase::Login, 2, "app sends nonce-wrapped sealed AID as device identifier", {Kind::LoginIdentify}},
      {Phase::Login, 3, "server verifies the identifier against the stored AID", {}},
      {Phase::Login, 4, "server releases the registration salt", {Kind::LoginSalt}},
      {Phase::Login, 5, "app transiently decrypts AID and seals the auth string", {}},
      {Phase::Login, 6, "NFC tap transfers the auth string; staged copy deleted", {Kind::AuthStringTransfer}},
      {Phase::Login, 7, "desktop submits auth string with its BT address", {Kind::AuthStringSubmit}},
      {Phase::Login, 8, "server opens auth string, matches biometrics, saves SID", {}},
      {Phase::Login, 9, "server sends MATCH + replay token sealed to the desktop", {Kind::MatchNotify}},
      {Phase::Login, 10, "desktop scans for BT1 in its proximity", {}},
      {Phase::Login, 11, "desktop seals the token to BT1 as proximity proof", {Kind::ProximityProof}},
      {Phase::Login, 12, "server verifies proof, grants desktop session, generates AID'",
       {Kind::LoginResult}},
      {Phase::Login, 13, "server offers rotation: salt + AID' sealed under AID", {Kind::RotationOffer}},
      {Phase::Login, 14, "app replaces its sealed AID blob with sealed AID'", {}},
      {Phase::Login, 15, "app confirms with OK sealed under the old AID", {Kind::RotationOk}},
      {Phase::Login, 16, "server checks OK with old AID, swaps in AID', reports result",
       {Kind::LoginResult}},
  };
  return steps;
}

void validate_protocol_tables() {
  std::set<std::pair<int, int>> seen;
  std::set<Kind> reachable;
  for (const auto& step : protocol_steps()) {
    int phase = step.phase == Phase::Registration ? 0 : 1;
    int limit = step.phase == Phase::Registration ? kRegistrationSteps : kLoginSteps;
    if (step.index < 1 || step.index > limit) {
      throw std::logic_error("protocol step index out of range");
    }
    if (!seen.insert({phase, step.index}).second) {
      throw std::logic_error("duplicate protocol step");
    }
    for (Kind k : step.kinds) reachable.insert(k);
  }
  if (seen.size() != static_cast<size_t>(kRegistrationSteps + kLoginSteps)) {
    throw std::logic_error("protocol step table has gaps");
  }
  for (const auto& kn : kKindNames) {
    if (!reachable.contains(kn.kind)) {
      throw std::logic_error("message kind not reachable from any protocol step: " +
                             std::string(kn.name));
    }
    schema_for(kn.kind);  // throws if a schema is missing
  }
  if (message_schemas().size() != kKindCount) {
    throw std::logic_error("schema table size mismatch");
  }
}

}  // namespace proxauth::messages
