#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "proxauth/server.hpp"

using namespace proxauth;
using crypto::EncryptedEnvelope;
using crypto::KeyPair;
using server::SessionState;
using server::VerifierServer;

namespace {

constexpr const char* kEm = "alice@example.com";
constexpr const char* kApp = "phone-alice";
const sim::BluetoothAddress kBt1 = sim::BluetoothAddress::parse("AA:BB:CC:DD:EE:01").value();
const sim::BluetoothAddress kBt2 = sim::BluetoothAddress::parse("AA:BB:CC:DD:EE:02").value();

// Device-side state a test drives by hand against the verifier.
struct Phone {
  crypto::SecretKey sk;
  biometric::FaceEmbedding face;
  EncryptedEnvelope blob;  // sealed AID as stored on the device

  crypto::SecretKey open_aid(const crypto::Salt& salt) const {
    auto keys = crypto::derive_key_from_password(sk.v, salt).value();
    return crypto::SecretKey::from_bytes(crypto::open_envelope(keys, blob).value()).value();
  }
};

struct Fixture {
  Csprng rng{12345, "test-server"};
  server::ServerConfig cfg;
  std::unique_ptr<VerifierServer> verifier;
  Phone phone;

  explicit Fixture(bool single_use = true) {
    cfg.token_single_use = single_use;
    verifier = std::make_unique<VerifierServer>("server", cfg, 777);
    phone.sk = crypto::gen_secret(rng);
    phone.face = biometric::random_identity(rng);
    verifier->provision_app_secret(kApp, phone.sk);
  }

  void register_phone() {
    auto reg = verifier->register_user(kEm, "pw", phone.face, kApp);
    REQUIRE(reg.ok());
    phone.blob = reg->enc_aid;
    crypto::SecretKey aid = phone.open_aid(reg->salt);
    EncryptedEnvelope confirm = crypto::seal(crypto::keys_from_secret(aid),
                                             to_bytes(messages::kFixedToken), rng);
    REQUIRE(verifier->confirm_registration(kEm, confirm).ok());
  }

  // Runs ALP steps 1-2 (context + identifier) and returns the salt.
  crypto::Salt begin(const crypto::Nonce10& n1, uint64_t now) {
    REQUIRE(verifier->update_login_context(kEm, n1, kBt1, now, kApp).ok());
    EncryptedEnvelope outer =
        crypto::seal(crypto::keys_from_nonce(n1), phone.blob.to_bytes(), rng);
    auto salt = verifier->begin_login(kEm, outer, now);
    REQUIRE(salt.ok());
    return *salt;
  }

  // Builds the sealed auth string for a given captured login embedding.
  EncryptedEnvelope auth_string(const crypto::Salt& salt,
                                const biometric::FaceEmbedding& login_face,
                                crypto::SessionId sid, uint64_t /*now*/) {
    auto url = verifier->upload_login_embedding(kEm, login_face);
    REQUIRE(url.ok());
    crypto::SecretKey aid = phone.open_aid(salt);
    Bytes plain = messages::encode_auth_string({kEm, *url, sid});
    auto keys = crypto::derive_key_from_password(aid.v, salt).value();
    return crypto::seal(keys, plain, rng);
  }

  SessionState state() const { return verifier->store().find(kEm)->state; }
};

}  // namespace

TEST_CASE("registration: challenge opens to a 32-byte AID, duplicates rejected") {
  Fixture f;
  auto reg = f.verifier->register_user(kEm, "pw", f.phone.face, kApp);
  REQUIRE(reg.ok());
  auto keys = crypto::derive_key_from_password(f.phone.sk.v, reg->salt).value();
  auto aid_bytes = crypto::open_envelope(keys, reg->enc_aid);
  REQUIRE(aid_bytes.ok());
  CHECK(aid_bytes->size() == 32);

  auto dup = f.verifier->register_user(kEm, "pw2", f.phone.face, kApp);
  REQUIRE_FALSE(dup.ok());
  CHECK(dup.code() == Err::DuplicateEmail);

  // Unprovisioned app instance cannot register at all.
  auto strange = f.verifier->register_user("bob@example.com", "pw", f.phone.face, "rogue");
  REQUIRE_FALSE(strange.ok());
}

TEST_CASE("confirm_registration: wrong AID aborts, replayed confirm is InvalidState") {
  Fixture f;
  auto reg = f.verifier->register_user(kEm, "pw", f.phone.face, kApp);
  REQUIRE(reg.ok());
  f.phone.blob = reg->enc_aid;

  SUBCASE("envelope sealed under the wrong AID aborts the registration") {
    crypto::SecretKey wrong = crypto::gen_secret(f.rng);
    EncryptedEnvelope bad = crypto::seal(crypto::keys_from_secret(wrong),
                                         to_bytes(messages::kFixedToken), f.rng);
    auto st = f.verifier->confirm_registration(kEm, bad);
    REQUIRE_FALSE(st.ok());
    CHECK(st.code() == Err::MacMismatch);
    // Aborted: the record is gone, a fresh registration is possible.
    CHECK_FALSE(f.verifier->store().contains(kEm));
    CHECK(f.verifier->register_user(kEm, "pw", f.phone.face, kApp).ok());
  }

  SUBCASE("wrong plaintext token aborts too") {
    crypto::SecretKey aid = f.phone.open_aid(reg->salt);
    EncryptedEnvelope bad =
        crypto::seal(crypto::keys_from_secret(aid), to_bytes("NOT-THE-TOKEN"), f.rng);
    auto st = f.verifier->confirm_registration(kEm, bad);
    REQUIRE_FALSE(st.ok());
    CHECK_FALSE(f.verifier->store().contains(kEm));
  }

  SUBCASE("replayed confirm after success is InvalidState") {
    crypto::SecretKey aid = f.phone.open_aid(reg->salt);
    EncryptedEnvelope confirm = crypto::seal(crypto::keys_from_secret(aid),
                                             to_bytes(messages::kFixedToken), f.rng);
    REQUIRE(f.verifier->confirm_registration(kEm, confirm).ok());
    auto again = f.verifier->confirm_registration(kEm, confirm);
    REQUIRE_FALSE(again.ok());
    CHECK(again.code() == Err::InvalidState);
  }
}

TEST_CASE("update_login_context: happy path, double call, unknown email") {
  Fixture f;
  f.register_phone();
  auto n1 = crypto::gen_nonce10(f.rng);

  CHECK(f.verifier->update_login_context(kEm, n1, kBt1, 0, kApp).ok());
  const auto* rec = f.verifier->store().find(kEm);
  CHECK(rec->n1 == n1);
  CHECK(rec->bt1 == kBt1);
  CHECK(rec->state == SessionState::LoginBegun);

  auto again = f.verifier->update_login_context(kEm, n1, kBt1, 1, kApp);
  REQUIRE_FALSE(again.ok());
  CHECK(again.code() == Err::SessionAlreadyActive);

  auto unknown = f.verifier->update_login_context("nobody@x", n1, kBt1, 0, kApp);
  REQUIRE_FALSE(unknown.ok());
  CHECK(unknown.code() == Err::UnknownEmail);
}

TEST_CASE("begin_login: honest identifier succeeds, garbage and stale nonces fail") {
  Fixture f;
  f.register_phone();

  SUBCASE("honest flow returns the registration salt") {
    auto n1 = crypto::gen_nonce10(f.rng);
    crypto::Salt salt = f.begin(n1, 0);
    CHECK(salt == f.verifier->store().find(kEm)->salt);
  }

  SUBCASE("attacker without SK seals garbage and fails identification") {
    auto n1 = crypto::gen_nonce10(f.rng);
    REQUIRE(f.verifier->update_login_context(kEm, n1, kBt1, 0, kApp).ok());
    crypto::SecretKey junk_sk = crypto::gen_secret(f.rng);
    crypto::Salt junk_salt = crypto::gen_salt(f.rng);
    auto junk_keys = crypto::derive_key_from_password(junk_sk.v, junk_salt).value();
    EncryptedEnvelope inner = crypto::seal(junk_keys, crypto::gen_secret(f.rng).v, f.rng);
    EncryptedEnvelope outer =
        crypto::seal(crypto::keys_from_nonce(n1), inner.to_bytes(), f.rng);
    auto r = f.verifier->begin_login(kEm, outer, 0);
    REQUIRE_FALSE(r.ok());
    CHECK(r.code() == Err::IdentificationFailed);
    CHECK(f.state() == SessionState::Idle);
  }

  SUBCASE("identifier replayed from an earlier session dies on the stale nonce") {
    // Session 1 completes the identification step.
    auto n1_a = crypto::gen_nonce10(f.rng);
    REQUIRE(f.verifier->update_login_context(kEm, n1_a, kBt1, 0, kApp).ok());
    EncryptedEnvelope identifier_a =
        crypto::seal(crypto::keys_from_nonce(n1_a), f.phone.blob.to_bytes(), f.rng);
    REQUIRE(f.verifier->begin_login(kEm, identifier_a, 0).ok());

    // Session 1 dies; session 2 begins with a fresh nonce.
    f.verifier->store().find(kEm)->deadline_ms = 10;
    f.verifier->expire_sessions(10);
    auto n1_b = crypto::gen_nonce10(f.rng);
    REQUIRE(f.verifier->update_login_context(kEm, n1_b, kBt1, 20, kApp).ok());

    auto replayed = f.verifier->begin_login(kEm, identifier_a, 20);
    REQUIRE_FALSE(replayed.ok());
    CHECK(replayed.code() == Err::IdentificationFailed);
  }
}

TEST_CASE("verify_auth_string: match, cross-identity rejection, expiry") {
  Fixture f;
  f.register_phone();
  auto n1 = crypto::gen_nonce10(f.rng);
  crypto::Salt salt = f.begin(n1, 0);
  crypto::SessionId sid = crypto::gen_session_id(f.rng);

  SUBCASE("honest auth string yields a MATCH envelope for bt2") {
    biometric::IdentityProfile profile{f.phone.face, 0.02};
    EncryptedEnvelope env =
        f.auth_string(salt, biometric::capture(profile, f.rng), sid, 0);
    auto r = f.verifier->verify_auth_string(env, kBt2, 10, "desktop");
    REQUIRE(r.ok());
    CHECK(r->em == kEm);
    CHECK(r->sid == sid);
    CHECK(r->bt1 == kBt1);
    CHECK(f.state() == SessionState::AwaitingProximity);

    // The envelope opens for the desktop with bt2-derived keys.
    auto keys = crypto::derive_bt_key(kBt2.str(), sid.v);
    auto opened = crypto::open_envelope(keys, r->match_env);
    REQUIRE(opened.ok());
    auto match = messages::decode_match_message(*opened);
    REQUIRE(match.ok());
    CHECK(match->token == *f.verifier->store().find(kEm)->token);
  }

  SUBCASE("different identity fails the biometric check") {
    biometric::FaceEmbedding stranger = biometric::random_identity(f.rng);
    EncryptedEnvelope env = f.auth_string(salt, stranger, sid, 0);
    auto r = f.verifier->verify_auth_string(env, kBt2, 10, "desktop");
    REQUIRE_FALSE(r.ok());
    CHECK(r.code() == Err::BiometricMismatch);
    CHECK(f.state() == SessionState::Idle);
  }

  SUBCASE("no user in the right state gives NoMatchingUser") {
    crypto::KeyPair junk;
    f.rng.fill(junk.enc_key);
    f.rng.fill(junk.mac_key);
    EncryptedEnvelope env = crypto::seal(junk, to_bytes("nope"), f.rng);
    auto r = f.verifier->verify_auth_string(env, kBt2, 10, "desktop");
    REQUIRE_FALSE(r.ok());
    CHECK(r.code() == Err::NoMatchingUser);
  }

  SUBCASE("submission after the deadline expires the session") {
    EncryptedEnvelope env = f.auth_string(salt, f.phone.face, sid, 0);
    uint64_t deadline = *f.verifier->store().find(kEm)->deadline_ms;
    auto r = f.verifier->verify_auth_string(env, kBt2, deadline, "desktop");
    REQUIRE_FALSE(r.ok());
    CHECK(r.code() == Err::SessionExpired);
    CHECK(f.state() == SessionState::Idle);
  }
}

namespace {

// Drives the flow to AwaitingProximity and returns the MATCH outcome.
server::MatchOutcome to_proximity(Fixture& f, crypto::SessionId sid) {
  auto n1 = crypto::gen_nonce10(f.rng);
  crypto::Salt salt = f.begin(n1, 0);
  EncryptedEnvelope env = f.auth_string(salt, f.phone.face, sid, 0);
  auto r = f.verifier->verify_auth_string(env, kBt2, 0, "desktop");
  REQUIRE(r.ok());
  return *r;
}

crypto::ReplayToken token_of(const server::MatchOutcome& m) {
  auto keys = crypto::derive_bt_key(kBt2.str(), m.sid.v);
  auto opened = crypto::open_envelope(keys, m.match_env);
  REQUIRE(opened.ok());
  return messages::decode_match_message(*opened)->token;
}

}  // namespace

TEST_CASE("verify_proximity_token: honest proof, replay, wrong key") {
  Fixture f;
  f.register_phone();
  crypto::SessionId sid = crypto::gen_session_id(f.rng);
  auto match = to_proximity(f, sid);
  crypto::ReplayToken token = token_of(match);

  SUBCASE("honest bt1-sealed token rotates the AID") {
    auto bt1_keys = crypto::derive_bt_key(kBt1.str(), sid.v);
    EncryptedEnvelope proof = crypto::seal(bt1_keys, token.v, f.rng);
    crypto::SecretKey old_aid = f.verifier->store().find(kEm)->aid;

    auto r = f.verifier->verify_proximity_token(proof, 1);
    REQUIRE(r.ok());
    CHECK_FALSE(r->regrant);
    CHECK(f.state() == SessionState::AwaitingRotationAck);

    auto next = crypto::open_envelope(crypto::keys_from_secret(old_aid), r->rotation_env);
    REQUIRE(next.ok());
    CHECK(next->size() == 32);
    CHECK(*next != old_aid.bytes());

    SUBCASE("the same proof a second time is TokenAlreadyConsumed") {
      auto again = f.verifier->verify_proximity_token(proof, 2);
      REQUIRE_FALSE(again.ok());
      CHECK(again.code() == Err::TokenAlreadyConsumed);
    }
  }

  SUBCASE("proof sealed with bt2 keys instead of bt1 is TokenMismatch") {
    auto bt2_keys = crypto::derive_bt_key(kBt2.str(), sid.v);
    EncryptedEnvelope proof = crypto::seal(bt2_keys, token.v, f.rng);
    auto r = f.verifier->verify_proximity_token(proof, 1);
    REQUIRE_FALSE(r.ok());
    CHECK(r.code() == Err::TokenMismatch);
  }

  SUBCASE("a wrong token value under the right keys is TokenMismatch") {
    auto bt1_keys = crypto::derive_bt_key(kBt1.str(), sid.v);
    EncryptedEnvelope proof = crypto::seal(bt1_keys, crypto::gen_token(f.rng).v, f.rng);
    auto r = f.verifier->verify_proximity_token(proof, 1);
    REQUIRE_FALSE(r.ok());
    CHECK(r.code() == Err::TokenMismatch);
  }
}

TEST_CASE("verify_ok: rotation replaces the AID only under the old key") {
  Fixture f;
  f.register_phone();
  crypto::SessionId sid = crypto::gen_session_id(f.rng);
  auto match = to_proximity(f, sid);
  crypto::ReplayToken token = token_of(match);
  crypto::SecretKey old_aid = f.verifier->store().find(kEm)->aid;

  auto bt1_keys = crypto::derive_bt_key(kBt1.str(), sid.v);
  auto prox = f.verifier->verify_proximity_token(
      crypto::seal(bt1_keys, token.v, f.rng), 1);
  REQUIRE(prox.ok());
  crypto::SecretKey aid_next = crypto::SecretKey::from_bytes(
      crypto::open_envelope(crypto::keys_from_secret(old_aid), prox->rotation_env)
          .value()).value();

  SUBCASE("OK under the old AID completes the login and swaps in AID'") {
    EncryptedEnvelope ok = crypto::seal(crypto::keys_from_secret(old_aid),
                                        to_bytes(messages::kOkBody), f.rng);
    auto r = f.verifier->verify_ok(kEm, ok, 2);
    REQUIRE(r.ok());
    CHECK(r->sid == sid);
    CHECK(f.state() == SessionState::Idle);
    CHECK(f.verifier->store().find(kEm)->aid == aid_next);
    CHECK(f.verifier->store().find(kEm)->aid_generation == 1);
    // Login-time embeddings do not outlive the session; only the
    // registration-time one stays.
    CHECK(f.verifier->embeddings().size() == 1);

    // Post-rotation: a login with the old AID blob must fail, the new one
    // must succeed. The device-side blob is rebuilt per AID for the check.
    auto salt = f.verifier->store().find(kEm)->salt;
    auto pw_keys = crypto::derive_key_from_password(f.phone.sk.v, salt).value();

    auto n1 = crypto::gen_nonce10(f.rng);
    REQUIRE(f.verifier->update_login_context(kEm, n1, kBt1, 3, kApp).ok());
    EncryptedEnvelope stale_outer = crypto::seal(
        crypto::keys_from_nonce(n1), f.phone.blob.to_bytes(), f.rng);
    auto stale = f.verifier->begin_login(kEm, stale_outer, 3);
    REQUIRE_FALSE(stale.ok());
    CHECK(stale.code() == Err::IdentificationFailed);

    f.phone.blob = crypto::seal(pw_keys, aid_next.v, f.rng);
    auto n2 = crypto::gen_nonce10(f.rng);
    REQUIRE(f.verifier->update_login_context(kEm, n2, kBt1, 4, kApp).ok());
    EncryptedEnvelope fresh_outer = crypto::seal(
        crypto::keys_from_nonce(n2), f.phone.blob.to_bytes(), f.rng);
    CHECK(f.verifier->begin_login(kEm, fresh_outer, 4).ok());
  }

  SUBCASE("OK sealed under AID' is rejected; the old AID stays live") {
    EncryptedEnvelope ok = crypto::seal(crypto::keys_from_secret(aid_next),
                                        to_bytes(messages::kOkBody), f.rng);
    auto r = f.verifier->verify_ok(kEm, ok, 2);
    REQUIRE_FALSE(r.ok());
    CHECK(r.code() == Err::LoginFailed);
    CHECK(f.verifier->store().find(kEm)->aid == old_aid);
    CHECK(f.state() == SessionState::Idle);
  }

  SUBCASE("verify_ok without a session is InvalidState") {
    EncryptedEnvelope ok = crypto::seal(crypto::keys_from_secret(old_aid),
                                        to_bytes(messages::kOkBody), f.rng);
    REQUIRE(f.verifier->verify_ok(kEm, ok, 2).ok());
    auto again = f.verifier->verify_ok(kEm, ok, 3);
    REQUIRE_FALSE(again.ok());
    CHECK(again.code() == Err::InvalidState);
  }
}

TEST_CASE("expire_sessions: closed-interval deadline, token invalidated") {
  Fixture f;
  f.register_phone();
  auto n1 = crypto::gen_nonce10(f.rng);
  f.begin(n1, 0);
  uint64_t deadline = *f.verifier->store().find(kEm)->deadline_ms;

  CHECK(f.verifier->expire_sessions(deadline - 1) == 0);
  // A deadline exactly equal to now counts as expired.
  CHECK(f.verifier->expire_sessions(deadline) == 1);
  CHECK(f.state() == SessionState::Idle);
  CHECK_FALSE(f.verifier->store().find(kEm)->n1.has_value());
  CHECK(f.verifier->expire_sessions(deadline + 1) == 0);
}

TEST_CASE("single-use disabled: a consumed token re-grants the session") {
  Fixture f(/*single_use=*/false);
  f.register_phone();
  crypto::SessionId sid = crypto::gen_session_id(f.rng);
  auto match = to_proximity(f, sid);
  crypto::ReplayToken token = token_of(match);

  auto bt1_keys = crypto::derive_bt_key(kBt1.str(), sid.v);
  EncryptedEnvelope proof = crypto::seal(bt1_keys, token.v, f.rng);
  REQUIRE(f.verifier->verify_proximity_token(proof, 1).ok());

  auto replay = f.verifier->verify_proximity_token(proof, 2);
  REQUIRE(replay.ok());
  CHECK(replay->regrant);
  CHECK(replay->em == kEm);
}

TEST_CASE("state transitions only follow the login phase order") {
  Fixture f;
  f.register_phone();
  crypto::SessionId sid = crypto::gen_session_id(f.rng);
  auto match = to_proximity(f, sid);
  auto token = token_of(match);
  auto bt1_keys = crypto::derive_bt_key(kBt1.str(), sid.v);
  REQUIRE(f.verifier->verify_proximity_token(
      crypto::seal(bt1_keys, token.v, f.rng), 1).ok());
  crypto::SecretKey old_aid = f.verifier->store().find(kEm)->aid;
  REQUIRE(f.verifier->verify_ok(kEm,
                                crypto::seal(crypto::keys_from_secret(old_aid),
                                             to_bytes(messages::kOkBody), f.rng),
                                2).ok());

  auto legal = [](SessionState from, SessionState to) {
    using S = SessionState;
    if (from == to) return true;
    switch (from) {
      case S::Idle: return to == S::LoginBegun;
      case S::LoginBegun: return to == S::AwaitingProximity || to == S::Idle;
      case S::AwaitingProximity: return to == S::AwaitingRotationAck || to == S::Idle;
      case S::AwaitingRotationAck: return to == S::AwaitingOk || to == S::Idle;
      case S::AwaitingOk: return to == S::Idle;
    }
    return false;
  };
  REQUIRE_FALSE(f.verifier->transitions().empty());
  for (const auto& t : f.verifier->transitions()) {
    CHECK_MESSAGE(legal(t.from, t.to), "illegal transition ",
                  server::session_state_name(t.from), " -> ",
                  server::session_state_name(t.to));
  }
}

TEST_CASE("file-backed store: atomic per-user documents survive reload") {
  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / "proxauth-store-test";
  fs::remove_all(dir);

  Fixture f;
  f.verifier->store().set_data_dir(dir.string());
  f.register_phone();
  crypto::SecretKey aid = f.verifier->store().find(kEm)->aid;

  server::ServerStore reloaded;
  reloaded.set_data_dir(dir.string());
  CHECK(reloaded.load_all() == 1);
  REQUIRE(reloaded.contains(kEm));
  CHECK(reloaded.find(kEm)->aid == aid);
  CHECK(reloaded.find(kEm)->em == kEm);
  fs::remove_all(dir);
}
