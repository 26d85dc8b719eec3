#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <nlohmann/json.hpp>

#include <set>

#include "proxauth/messages.hpp"
#include "proxauth/rng.hpp"

using namespace proxauth;
using messages::AuthString;
using messages::Kind;
using messages::ProtocolMessage;

namespace {

std::string random_hex(Csprng& rng, size_t n) { return hex_encode(rng.bytes(n)); }

std::string random_envelope_hex(Csprng& rng) {
  crypto::KeyPair keys;
  rng.fill(keys.enc_key);
  rng.fill(keys.mac_key);
  return hex_encode(crypto::seal(keys, rng.bytes(rng.uniform(64)), rng).to_bytes());
}

// Schema-driven random body, used to roundtrip every message kind.
ProtocolMessage random_message(Kind kind, Csprng& rng) {
  ProtocolMessage m;
  m.kind = kind;
  m.sender = "a";
  m.receiver = "b";
  for (const auto& schema : messages::message_schemas()) {
    if (schema.kind != kind) continue;
    for (const auto& f : schema.fields) {
      if (!f.required && rng.uniform(2) == 0) continue;
      std::string name(f.name);
      switch (f.type) {
        case messages::FieldType::Text:
          m.body[name] = "v" + std::to_string(rng.uniform(1000));
          break;
        case messages::FieldType::Hex:
          m.body[name] = random_hex(rng, rng.uniform(40));
          break;
        case messages::FieldType::Hex16:
          m.body[name] = random_hex(rng, 16);
          break;
        case messages::FieldType::Envelope:
          m.body[name] = random_envelope_hex(rng);
          break;
        case messages::FieldType::BtAddr:
          m.body[name] = "AA:BB:CC:DD:EE:0" + std::to_string(rng.uniform(10));
          break;
        case messages::FieldType::Nonce10:
          m.body[name] = crypto::gen_nonce10(rng).digits;
          break;
        case messages::FieldType::Bool:
          m.body[name] = rng.uniform(2) ? "1" : "0";
          break;
      }
    }
  }
  return m;
}

}  // namespace

TEST_CASE("auth string: hand-computed fixture for the length-prefixed layout") {
  AuthString a;
  a.em = "a@b.c";
  a.login_fburl.id = "f1";
  a.sid = crypto::SessionId{};  // 16 zero bytes

  Bytes expected;
  // 4-byte big-endian length then bytes, fields in order (em, fburl, sid).
  expected.insert(expected.end(), {0x00, 0x00, 0x00, 0x05});
  expected.insert(expected.end(), {'a', '@', 'b', '.', 'c'});
  expected.insert(expected.end(), {0x00, 0x00, 0x00, 0x02});
  expected.insert(expected.end(), {'f', '1'});
  expected.insert(expected.end(), {0x00, 0x00, 0x00, 0x10});
  expected.insert(expected.end(), 16, 0x00);

  CHECK(messages::encode_auth_string(a) == expected);
}

TEST_CASE("auth string: roundtrip including empty email; sid injectivity") {
  Csprng rng(1);
  for (int i = 0; i < 500; ++i) {
    AuthString a;
    size_t em_len = rng.uniform(30);
    for (size_t j = 0; j < em_len; ++j) {
      a.em.push_back(static_cast<char>('a' + rng.uniform(26)));
    }
    a.login_fburl.id = "fb-" + std::to_string(rng.next_u64());
    rng.fill(a.sid.v);

    Bytes wire = messages::encode_auth_string(a);
    auto back = messages::decode_auth_string(wire);
    REQUIRE(back.ok());
    CHECK(*back == a);

    AuthString b = a;
    rng.fill(b.sid.v);
    if (b.sid != a.sid) {
      CHECK(messages::encode_auth_string(b) != wire);
    }
  }
}

TEST_CASE("auth string: malformed inputs are rejected with MalformedAuthString") {
  AuthString a{"x@y.z", biometric::FbUrl{"f"}, crypto::SessionId{}};
  Bytes wire = messages::encode_auth_string(a);

  auto truncated = messages::decode_auth_string(ByteView(wire).subspan(0, wire.size() - 3));
  REQUIRE_FALSE(truncated.ok());
  CHECK(truncated.code() == Err::MalformedAuthString);

  Bytes trailing = wire;
  trailing.push_back(0x00);
  CHECK_FALSE(messages::decode_auth_string(trailing).ok());

  CHECK_FALSE(messages::decode_auth_string(Bytes{0xff, 0xff}).ok());
  CHECK_FALSE(messages::decode_auth_string({}).ok());

  // sid of the wrong width
  Bytes bad;
  bad.insert(bad.end(), {0, 0, 0, 0});
  bad.insert(bad.end(), {0, 0, 0, 0});
  bad.insert(bad.end(), {0, 0, 0, 2, 0xaa, 0xbb});
  CHECK_FALSE(messages::decode_auth_string(bad).ok());
}

TEST_CASE("match message: roundtrip and tag enforcement") {
  crypto::ReplayToken t;
  for (size_t i = 0; i < t.v.size(); ++i) t.v[i] = static_cast<uint8_t>(i);
  Bytes wire = messages::encode_match_message({t});
  auto back = messages::decode_match_message(wire);
  REQUIRE(back.ok());
  CHECK(back->token == t);

  wire[4] = 'X';  // first tag byte after the length prefix
  CHECK_FALSE(messages::decode_match_message(wire).ok());
}

TEST_CASE("transport codec: every kind roundtrips with random payloads") {
  Csprng rng(2);
  for (const auto& schema : messages::message_schemas()) {
    for (int i = 0; i < 20; ++i) {
      ProtocolMessage m = random_message(schema.kind, rng);
      Bytes wire = messages::encode_message(m);
      auto back = messages::decode_message(wire);
      REQUIRE_MESSAGE(back.ok(), "kind ", messages::kind_name(schema.kind), ": ",
                      back.ok() ? "" : back.error().to_string());
      CHECK(*back == m);
    }
  }
}

TEST_CASE("transport codec: strict schema") {
  Csprng rng(3);
  ProtocolMessage m = random_message(Kind::LoginSalt, rng);

  SUBCASE("unknown extra field is rejected") {
    m.body["surprise"] = "1";
    Bytes wire;
    // encode_message enforces the schema too; build the wire form by hand.
    nlohmann::json j;
    j["v"] = messages::kProtocolVersion;
    j["kind"] = "LoginSalt";
    j["from"] = m.sender;
    j["to"] = m.receiver;
    j["body"] = m.body;
    wire = to_bytes(j.dump());
    auto r = messages::decode_message(wire);
    REQUIRE_FALSE(r.ok());
    CHECK(r.code() == Err::MalformedMessage);
    CHECK(r.error().detail.find("surprise") != std::string::npos);
  }

  SUBCASE("missing required field names the offender") {
    nlohmann::json j;
    j["v"] = messages::kProtocolVersion;
    j["kind"] = "LoginIdentify";
    j["from"] = "a";
    j["to"] = "b";
    j["body"] = {{"em", "x"}};
    auto r = messages::decode_message(to_bytes(j.dump()));
    REQUIRE_FALSE(r.ok());
    CHECK(r.error().detail.find("identifier") != std::string::npos);
  }

  SUBCASE("empty payload is rejected") {
    auto r = messages::decode_message({});
    REQUIRE_FALSE(r.ok());
    CHECK(r.code() == Err::MalformedMessage);
  }

  SUBCASE("unknown kind is rejected") {
    nlohmann::json j;
    j["v"] = messages::kProtocolVersion;
    j["kind"] = "TotallyNewKind";
    j["from"] = "a";
    j["to"] = "b";
    j["body"] = nlohmann::json::object();
    CHECK_FALSE(messages::decode_message(to_bytes(j.dump())).ok());
  }

  SUBCASE("wrong version is rejected") {
    nlohmann::json j;
    j["v"] = 2;
    j["kind"] = "LoginSalt";
    j["from"] = "a";
    j["to"] = "b";
    j["body"] = {{"ok", "1"}};
    CHECK_FALSE(messages::decode_message(to_bytes(j.dump())).ok());
  }

  SUBCASE("field type violations are rejected") {
    nlohmann::json j;
    j["v"] = messages::kProtocolVersion;
    j["kind"] = "LoginContextUpdate";
    j["from"] = "a";
    j["to"] = "b";
    j["body"] = {{"em", "x"}, {"n1", "123"}, {"bt1", "AA:BB:CC:DD:EE:01"}};
    auto r = messages::decode_message(to_bytes(j.dump()));
    REQUIRE_FALSE(r.ok());
    CHECK(r.error().detail.find("n1") != std::string::npos);
  }
}

TEST_CASE("canonical encoding: double encode is byte-identical") {
  Csprng rng(4);
  for (int i = 0; i < 50; ++i) {
    ProtocolMessage m = random_message(Kind::MatchNotify, rng);
    CHECK(messages::encode_message(m) == messages::encode_message(m));
  }
}

TEST_CASE("protocol step table covers both phases and every message kind") {
  CHECK_NOTHROW(messages::validate_protocol_tables());

  int reg = 0, login = 0;
  std::set<Kind> reachable;
  for (const auto& s : messages::protocol_steps()) {
    if (s.phase == messages::Phase::Registration) ++reg;
    else ++login;
    for (Kind k : s.kinds) reachable.insert(k);
  }
  CHECK(reg == messages::kRegistrationSteps);
  CHECK(login == messages::kLoginSteps);
  CHECK(reachable.size() == messages::kKindCount);
  CHECK(messages::message_schemas().size() == messages::kKindCount);
}
