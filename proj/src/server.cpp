#include "proxauth/server.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

namespace proxauth::server {

namespace fs = std::filesystem;
using crypto::EncryptedEnvelope;
using crypto::KeyPair;
using nlohmann::json;

std::string_view session_state_name(SessionState s) {
  switch (s) {
    case SessionState::Idle: return "Idle";
    case SessionState::LoginBegun: return "LoginBegun";
    case SessionState::AwaitingProximity: return "AwaitingProximity";
    case SessionState::AwaitingRotationAck: return "AwaitingRotationAck";
    case SessionState::AwaitingOk: return "AwaitingOk";
  }
  return "?";
}

json UserRecord::to_json() const {
  json j;
  j["em"] = em;
  j["app_id"] = app_id;
  j["sk"] = hex_encode(sk.v);
  j["pwd_salt"] = hex_encode(pwd_salt);
  j["pwd_hash"] = hex_encode(pwd_hash);
  j["aid"] = hex_encode(aid.v);
  j["aid_generation"] = aid_generation;
  j["salt"] = hex_encode(salt.v);
  j["reg_fburl"] = reg_fburl.id;
  j["state"] = std::string(session_state_name(state));
  if (n1) j["n1"] = n1->digits;
  if (bt1) j["bt1"] = bt1->str();
  if (sid) j["sid"] = hex_encode(sid->v);
  if (token) j["token"] = hex_encode(token->v);
  if (aid_next) j["aid_next"] = hex_encode(aid_next->v);
  if (deadline_ms) j["deadline_ms"] = *deadline_ms;
  return j;
}

void ServerStore::set_data_dir(const std::string& dir) {
  data_dir_ = dir;
  if (!dir.empty()) fs::create_directories(dir);
}

UserRecord* ServerStore::find(const std::string& em) {
  auto it = records_.find(em);
  return it == records_.end() ? nullptr : &it->second;
}

const UserRecord* ServerStore::find(const std::string& em) const {
  auto it = records_.find(em);
  return it == records_.end() ? nullptr : &it->second;
}

void ServerStore::put(UserRecord rec) {
  std::string em = rec.em;
  records_[em] = std::move(rec);
  persist(records_[em]);
}

void ServerStore::persist(const UserRecord& rec) const {
  if (data_dir_.empty()) return;
  // One document per user, atomic replace-on-write.
  fs::path final_path = fs::path(data_dir_) / (sha256_hex(to_bytes(rec.em)).substr(0, 16) + ".json");
  fs::path tmp_path = final_path;
  tmp_path += ".tmp";
  {
    std::ofstream out(tmp_path, std::ios::trunc);
    out << rec.to_json().dump(2) << "\n";
  }
  fs::rename(tmp_path, final_path);
}

size_t ServerStore::load_all() {
  if (data_dir_.empty() || !fs::exists(data_dir_)) return 0;
  size_t loaded = 0;
  for (const auto& entry : fs::directory_iterator(data_dir_)) {
    if (entry.path().extension() != ".json") continue;
    std::ifstream in(entry.path());
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) continue;
    UserRecord rec;
    rec.em = j.value("em", "");
    rec.app_id = j.value("app_id", "");
    auto sk = hex_decode(j.value("sk", ""));
    auto aid = hex_decode(j.value("aid", ""));
    auto salt = hex_decode(j.value("salt", ""));
    if (rec.em.empty() || !sk || !aid || !salt) continue;
    auto sk_v = crypto::SecretKey::from_bytes(*sk);
    auto aid_v = crypto::SecretKey::from_bytes(*aid);
    auto salt_v = crypto::Salt::from_bytes(*salt);
    if (!sk_v || !aid_v || !salt_v) continue;
    rec.sk = *sk_v;
    rec.aid = *aid_v;
    rec.salt = *salt_v;
    rec.aid_generation = j.value("aid_generation", 0);
    rec.pwd_salt = hex_decode(j.value("pwd_salt", "")).value_or(Bytes{});
    rec.pwd_hash = hex_decode(j.value("pwd_hash", "")).value_or(Bytes{});
    rec.reg_fburl.id = j.value("reg_fburl", "");
    records_[rec.em] = std::move(rec);  // sessions do not survive restarts
    ++loaded;
  }
  return loaded;
}

VerifierServer::VerifierServer(std::string name, ServerConfig config, uint64_t rng_seed)
    : name_(std::move(name)), config_(config), rng_(rng_seed, "server:" + name_) {}

void VerifierServer::provision_app_secret(const std::string& app_id,
                                          const crypto::SecretKey& sk) {
  provisioned_[app_id] = sk;
}

std::optional<crypto::SecretKey> VerifierServer::provisioned_secret(
    const std::string& app_id) const {
  auto it = provisioned_.find(app_id);
  if (it == provisioned_.end()) return std::nullopt;
  return it->second;
}

void VerifierServer::set_state(UserRecord& rec, SessionState next) {
  if (rec.state != next) {
    transitions_.push_back({rec.em, rec.state, next});
    rec.state = next;
  }
}

void VerifierServer::reset_session(UserRecord& rec) {
  // Login-time captures never outlive the session.
  for (const auto& url : rec.login_uploads) embeddings_.erase(url);
  rec.login_uploads.clear();
  rec.login_fburl.reset();
  rec.n1.reset();
  rec.bt1.reset();
  rec.sid.reset();
  rec.token.reset();
  rec.last_token.reset();
  rec.aid_next.reset();
  rec.deadline_ms.reset();
  rec.fd_principal.clear();
  rec.desktop.clear();
  set_state(rec, SessionState::Idle);
  store_.persist(rec);
}

void VerifierServer::touch_deadline(UserRecord& rec, uint64_t now) {
  rec.deadline_ms = now + config_.session_deadline_ms;
}

bool VerifierServer::expired(const UserRecord& rec, uint64_t now) const {
  // Closed interval: a deadline equal to `now` counts as expired.
  return rec.deadline_ms && now >= *rec.deadline_ms;
}

KeyPair VerifierServer::record_pw_keys(const UserRecord& rec) const {
  return crypto::derive_key_from_password(rec.sk.v, rec.salt).value();
}

void VerifierServer::declare_aid_secret(const UserRecord& rec) {
  if (oracle_) {
    oracle_->declare_secret("aid:" + rec.em + ":" + std::to_string(rec.aid_generation),
                            rec.aid.v);
  }
}

Expected<RegisterOutcome> VerifierServer::register_user(
    const std::string& em, const std::string& pwd,
    const biometric::FaceEmbedding& embedding, const std::string& app_id) {
  if (store_.contains(em) || pending_.contains(em)) {
    return Error(Err::DuplicateEmail, "email already registered");
  }
  auto sk = provisioned_secret(app_id);
  if (!sk) {
    return Error(Err::InvalidState, "no shared secret provisioned for this app instance");
  }

  UserRecord rec;
  rec.em = em;
  rec.app_id = app_id;
  rec.sk = *sk;
  rec.pwd_salt = rng_.bytes(16);
  rec.pwd_hash = crypto::hmac_sha256(rec.pwd_salt, to_bytes(pwd));
  rec.aid = crypto::gen_secret(rng_);
  rec.salt = crypto::gen_salt(rng_);
  rec.reg_fburl = embeddings_.store(embedding, rng_);

  KeyPair keys = crypto::derive_key_from_password(rec.sk.v, rec.salt).value();
  EncryptedEnvelope enc_aid = crypto::seal(keys, rec.aid.v, rng_);

  if (oracle_) {
    declare_aid_secret(rec);
    oracle_->declare_secret("salt:" + em, rec.salt.v);
    std::string key_id = oracle_->note_pw_key(rec.sk.v, rec.salt);
    oracle_->note_envelope(enc_aid, key_id, name_,
                           adversary::Term::atom("aid:" + em + ":0", rec.aid.bytes()));
  }

  pending_[em] = PendingRegistration{std::move(rec)};
  return RegisterOutcome{pending_[em].record.salt, enc_aid};
}

Status VerifierServer::confirm_registration(const std::string& em,
                                            const EncryptedEnvelope& env) {
  auto it = pending_.find(em);
  if (it == pending_.end()) {
    return Status(Error(Err::InvalidState, "no registration pending"));
  }
  UserRecord& rec = it->second.record;
  auto opened = crypto::open_envelope(crypto::keys_from_secret(rec.aid), env);
  if (!opened) {
    embeddings_.erase(rec.reg_fburl);
    pending_.erase(it);
    return Status(Error(Err::MacMismatch, "confirmation failed; registration aborted"));
  }
  if (to_string(*opened) != messages::kFixedToken) {
    embeddings_.erase(rec.reg_fburl);
    pending_.erase(it);
    return Status(Error(Err::InvalidState, "wrong confirmation token; registration aborted"));
  }
  store_.put(std::move(rec));
  pending_.erase(it);
  return Status::success();
}

Expected<biometric::FbUrl> VerifierServer::upload_login_embedding(
    const std::string& em, const biometric::FaceEmbedding& embedding) {
  UserRecord* rec = store_.find(em);
  if (rec == nullptr) return Error(Err::UnknownEmail);
  biometric::FbUrl url = embeddings_.store(embedding, rng_);
  rec->login_uploads.push_back(url);
  return url;
}

Status VerifierServer::update_login_context(const std::string& em, const crypto::Nonce10& n1,
                                            const sim::BluetoothAddress& bt1, uint64_t now,
                                            const std::string& fd_principal) {
  UserRecord* rec = store_.find(em);
  if (rec == nullptr) return Status(Error(Err::UnknownEmail));
  if (expired(*rec, now)) reset_session(*rec);
  if (rec->state != SessionState::Idle) {
    return Status(Error(Err::SessionAlreadyActive));
  }
  rec->n1 = n1;
  rec->bt1 = bt1;
  rec->fd_principal = fd_principal;
  touch_deadline(*rec, now);
  set_state(*rec, SessionState::LoginBegun);
  store_.persist(*rec);
  return Status::success();
}

Expected<crypto::Salt> VerifierServer::begin_login(const std::string& em,
                                                   const EncryptedEnvelope& outer,
                                                   uint64_t now) {
  UserRecord* rec = store_.find(em);
  if (rec == nullptr) return Error(Err::UnknownEmail);
  if (rec->state != SessionState::LoginBegun || !rec->n1) {
    return Error(Err::InvalidState, "no login context for this account");
  }
  if (expired(*rec, now)) {
    reset_session(*rec);
    return Error(Err::SessionExpired);
  }

  auto fail = [&]() -> Error {
    reset_session(*rec);
    return Error(Err::IdentificationFailed);
  };

  // Outer layer is keyed off the nonce reported in this session's context;
  // a stale identifier from an earlier session dies here.
  auto inner_bytes = crypto::open_envelope(crypto::keys_from_nonce(*rec->n1), outer);
  if (!inner_bytes) return fail();
  auto inner = EncryptedEnvelope::parse(*inner_bytes);
  if (!inner) return fail();
  auto aid_bytes = crypto::open_envelope(record_pw_keys(*rec), *inner);
  if (!aid_bytes) return fail();
  if (!ct_equal(*aid_bytes, rec->aid.v)) return fail();

  touch_deadline(*rec, now);
  store_.persist(*rec);
  return rec->salt;
}

Expected<MatchOutcome> VerifierServer::verify_auth_string(const EncryptedEnvelope& env,
                                                          const sim::BluetoothAddress& bt2,
                                                          uint64_t now,
                                                          const std::string& desktop) {
  // The desktop does not send an email; identify the account by trial-opening
  // against active sessions. Only success/failure is observable.
  for (auto& [em, rec] : store_.records()) {
    if (rec.state != SessionState::LoginBegun) continue;
    KeyPair keys = crypto::derive_key_from_password(rec.aid.v, rec.salt).value();
    auto opened = crypto::open_envelope(keys, env);
    if (!opened) continue;

    if (expired(rec, now)) {
      reset_session(rec);
      return Error(Err::SessionExpired);
    }
    auto auth = messages::decode_auth_string(*opened);
    if (!auth || auth->em != rec.em) {
      return Error(Err::NoMatchingUser);
    }
    auto reg = embeddings_.fetch(rec.reg_fburl);
    auto login = embeddings_.fetch(auth->login_fburl);
    if (!reg || !login) {
      reset_session(rec);
      return Error(Err::BiometricMismatch, "unknown biometric reference");
    }
    double dist = biometric::distance(*login, *reg);
    char dist_str[32];
    std::snprintf(dist_str, sizeof(dist_str), "%.6f", dist);
    if (!biometric::verify(*login, *reg, config_.biometric_threshold)) {
      reset_session(rec);
      return Error(Err::BiometricMismatch, std::string("distance ") + dist_str);
    }

    rec.sid = auth->sid;
    rec.login_fburl = auth->login_fburl;
    rec.token = crypto::gen_token(rng_);
    rec.last_token.reset();
    rec.desktop = desktop;
    touch_deadline(rec, now);
    set_state(rec, SessionState::AwaitingProximity);

    Bytes match_plain = messages::encode_match_message({*rec.token});
    KeyPair bt2_keys = crypto::derive_bt_key(bt2.str(), rec.sid->v);
    EncryptedEnvelope match_env = crypto::seal(bt2_keys, match_plain, rng_);

    if (oracle_) {
      oracle_->declare_secret(
          "token:" + em + ":" + std::to_string(oracle_->next_serial()), rec.token->v);
      std::string key_id = oracle_->note_bt_key(bt2.str(), rec.sid->v);
      oracle_->note_envelope(
          match_env, key_id, name_,
          adversary::Term::pair(
              adversary::Term::atom("tag", to_bytes(messages::kMatchTag)),
              adversary::Term::atom("token:" + em, rec.token->bytes())));
    }
    store_.persist(rec);
    return MatchOutcome{em, *rec.sid, *rec.bt1, match_env};
  }
  return Error(Err::NoMatchingUser);
}

Expected<ProximityOutcome> VerifierServer::verify_proximity_token(
    const EncryptedEnvelope& env, uint64_t now) {
  for (auto& [em, rec] : store_.records()) {
    if (!rec.sid || !rec.bt1) continue;
    if (rec.state != SessionState::AwaitingProximity &&
        rec.state != SessionState::AwaitingRotationAck &&
        rec.state != SessionState::AwaitingOk) {
      continue;
    }
    KeyPair bt1_keys = crypto::derive_bt_key(rec.bt1->str(), rec.sid->v);
    auto opened = crypto::open_envelope(bt1_keys, env);
    if (!opened) continue;

    auto token = crypto::ReplayToken::from_bytes(*opened);
    if (!token) return Error(Err::TokenMismatch, "malformed token payload");

    if (expired(rec, now)) {
      reset_session(rec);
      return Error(Err::SessionExpired);
    }

    bool is_active = rec.state == SessionState::AwaitingProximity && rec.token &&
                     *token == *rec.token && !consumed_tokens_.contains(token->bytes());
    if (is_active) {
      consumed_tokens_.insert(token->bytes());
      rec.last_token = *rec.token;
      rec.token.reset();
      rec.aid_next = crypto::gen_secret(rng_);
      touch_deadline(rec, now);
      set_state(rec, SessionState::AwaitingRotationAck);

      EncryptedEnvelope rotation_env =
          crypto::seal(crypto::keys_from_secret(rec.aid), rec.aid_next->v, rng_);
      if (oracle_) {
        oracle_->declare_secret(
            "aid:" + em + ":" + std::to_string(rec.aid_generation + 1), rec.aid_next->v);
        std::string key_id = oracle_->note_pw_key(rec.aid.v, crypto::kAppIdSalt);
        oracle_->note_envelope(
            rotation_env, key_id, name_,
            adversary::Term::atom("aid:" + em + ":" +
                                      std::to_string(rec.aid_generation + 1),
                                  rec.aid_next->bytes()));
      }
      store_.persist(rec);
      return ProximityOutcome{em, *rec.sid, false, rec.salt, rotation_env};
    }

    if (rec.last_token && *token == *rec.last_token) {
      if (config_.token_single_use) {
        return Error(Err::TokenAlreadyConsumed);
      }
      // Single-use accounting disabled: the proof is accepted again and the
      // submitting desktop is granted the session.
      return ProximityOutcome{em, *rec.sid, true, rec.salt, {}};
    }
    return Error(Err::TokenMismatch);
  }
  return Error(Err::TokenMismatch, "no session accepts this proof");
}

Expected<LoginSuccessOutcome> VerifierServer::verify_ok(const std::string& em,
                                                        const EncryptedEnvelope& env,
                                                        uint64_t now) {
  UserRecord* rec = store_.find(em);
  if (rec == nullptr) return Error(Err::UnknownEmail);
  if (rec->state != SessionState::AwaitingRotationAck &&
      rec->state != SessionState::AwaitingOk) {
    return Error(Err::InvalidState);
  }
  if (expired(*rec, now)) {
    reset_session(*rec);
    return Error(Err::SessionExpired);
  }

  // The challenge must open under the *old* AID; the rotated one is not yet
  // live on the server side.
  auto opened = crypto::open_envelope(crypto::keys_from_secret(rec->aid), env);
  if (!opened || to_string(*opened) != messages::kOkBody) {
    rec->aid_next.reset();
    reset_session(*rec);
    return Error(Err::LoginFailed, "rotation aborted; previous AID remains live");
  }

  if (oracle_) oracle_->note_ok_accepted(em, env);

  crypto::SessionId sid_out = rec->sid.value();
  rec->aid = rec->aid_next.value();
  rec->aid_generation += 1;
  reset_session(*rec);
  store_.persist(*rec);
  login_successes_.push_back({em, sid_out});
  return LoginSuccessOutcome{em, sid_out};
}

size_t VerifierServer::expire_sessions(uint64_t now) {
  size_t count = 0;
  for (auto& [em, rec] : store_.records()) {
    if (rec.state != SessionState::Idle && expired(rec, now)) {
      reset_session(rec);
      ++count;
    }
  }
  return count;
}

// ---------------------------------------------------------------------------
// Simulation adapter
// ---------------------------------------------------------------------------

namespace {

messages::ProtocolMessage make_reply(messages::Kind kind, const std::string& from,
                                     const std::string& to,
                                     std::map<std::string, std::string> body) {
  messages::ProtocolMessage m;
  m.kind = kind;
  m.sender = from;
  m.receiver = to;
  m.body = std::move(body);
  return m;
}

}  // namespace

void VerifierServer::on_event(sim::Simulation& sim, const sim::Event& ev) {
  using messages::Kind;
  if (ev.channel != sim::ChannelKind::Https) {
    sim.note({{"type", "note"}, {"what", "server_ignored_channel"},
              {"ch", std::string(channel_name(ev.channel))}});
    return;
  }
  auto decoded = messages::decode_message(ev.payload);
  if (!decoded) {
    sim.note({{"type", "note"}, {"what", "server_rejected_message"},
              {"error", decoded.error().to_string()}});
    return;
  }
  const messages::ProtocolMessage& m = *decoded;
  uint64_t now = sim.now();
  auto https = sim.timings().https_ms;
  auto reply = [&](messages::ProtocolMessage out, uint64_t latency) {
    sim.send(sim::ChannelKind::Https, name_, ev.from, messages::encode_message(out), latency);
  };
  auto note_error = [&](const Error& e) {
    sim.note({{"type", "note"}, {"what", "server_op_error"},
              {"kind", std::string(messages::kind_name(m.kind))},
              {"error", std::string(err_name(e.code))},
              {"detail", e.detail}});
  };

  switch (m.kind) {
    case Kind::RegisterRequest: {
      auto emb_bytes = m.hex_field("embedding");
      std::optional<biometric::FaceEmbedding> emb;
      if (emb_bytes) emb = biometric::FaceEmbedding::from_bytes(*emb_bytes);
      if (!emb) {
        reply(make_reply(Kind::RegisterResult, name_, ev.from,
                         {{"ok", "0"}, {"error", "MalformedMessage"}}),
              https);
        return;
      }
      auto res = register_user(m.field("em"), m.field("pwd"), *emb, m.field("app_id"));
      if (!res) {
        note_error(res.error());
        reply(make_reply(Kind::RegisterResult, name_, ev.from,
                         {{"ok", "0"}, {"error", std::string(err_name(res.code()))}}),
              https);
        return;
      }
      reply(make_reply(Kind::RegisterChallenge, name_, ev.from,
                       {{"salt", hex_encode(res->salt.v)},
                        {"enc_aid", hex_encode(res->enc_aid.to_bytes())}}),
            https);
      return;
    }
    case Kind::RegisterConfirm: {
      auto env = m.envelope_field("confirm");
      Status st = env ? confirm_registration(m.field("em"), *env)
                      : Status(Error(Err::MalformedMessage));
      if (st.ok()) {
        reply(make_reply(Kind::RegisterResult, name_, ev.from, {{"ok", "1"}}), https);
      } else {
        note_error(st.error());
        reply(make_reply(Kind::RegisterResult, name_, ev.from,
                         {{"ok", "0"}, {"error", std::string(err_name(st.code()))}}),
              https);
      }
      return;
    }
    case Kind::BiometricUpload: {
      auto emb_bytes = m.hex_field("embedding");
      std::optional<biometric::FaceEmbedding> emb;
      if (emb_bytes) emb = biometric::FaceEmbedding::from_bytes(*emb_bytes);
      if (!emb) {
        reply(make_reply(Kind::BiometricUploadAck, name_, ev.from,
                         {{"ok", "0"}, {"error", "MalformedMessage"}}),
              https);
        return;
      }
      auto res = upload_login_embedding(m.field("em"), *emb);
      if (!res) {
        note_error(res.error());
        reply(make_reply(Kind::BiometricUploadAck, name_, ev.from,
                         {{"ok", "0"}, {"error", std::string(err_name(res.code()))}}),
              https);
        return;
      }
      reply(make_reply(Kind::BiometricUploadAck, name_, ev.from,
                       {{"ok", "1"}, {"fburl", res->id}}),
            https);
      return;
    }
    case Kind::LoginContextUpdate: {
      auto n1 = crypto::Nonce10::parse(m.field("n1"));
      auto bt1 = sim::BluetoothAddress::parse(m.field("bt1"));
      Status st = (n1 && bt1)
                      ? update_login_context(m.field("em"), *n1, *bt1, now, ev.from)
                      : Status(Error(Err::MalformedMessage));
      if (st.ok()) {
        reply(make_reply(Kind::LoginContextAck, name_, ev.from, {{"ok", "1"}}), https);
      } else {
        note_error(st.error());
        reply(make_reply(Kind::LoginContextAck, name_, ev.from,
                         {{"ok", "0"}, {"error", std::string(err_name(st.code()))}}),
              https);
      }
      return;
    }
    case Kind::LoginIdentify: {
      auto env = m.envelope_field("identifier");
      if (!env) {
        reply(make_reply(Kind::LoginSalt, name_, ev.from,
                         {{"ok", "0"}, {"error", "MalformedMessage"}}),
              https);
        return;
      }
      auto res = begin_login(m.field("em"), *env, now);
      if (!res) {
        note_error(res.error());
        reply(make_reply(Kind::LoginSalt, name_, ev.from,
                         {{"ok", "0"}, {"error", std::string(err_name(res.code()))}}),
              https);
        return;
      }
      reply(make_reply(Kind::LoginSalt, name_, ev.from,
                       {{"ok", "1"}, {"salt", hex_encode(res->v)}}),
            https);
      return;
    }
    case Kind::AuthStringSubmit: {
      auto env = m.envelope_field("auth");
      auto bt2 = sim::BluetoothAddress::parse(m.field("bt2"));
      if (!env || !bt2) return;
      auto res = verify_auth_string(*env, *bt2, now, ev.from);
      if (!res) {
        note_error(res.error());
        reply(make_reply(Kind::LoginResult, name_, ev.from,
                         {{"ok", "0"}, {"error", std::string(err_name(res.code()))}}),
              https);
        return;
      }
      // The verification includes the biometric comparison; its cost is a
      // configured latency on this reply.
      reply(make_reply(Kind::MatchNotify, name_, ev.from,
                       {{"sid", hex_encode(res->sid.v)},
                        {"bt1", res->bt1.str()},
                        {"match", hex_encode(res->match_env.to_bytes())}}),
            https + sim.timings().biometric_match_ms);
      return;
    }
    case Kind::ProximityProof: {
      auto env = m.envelope_field("proof");
      if (!env) return;
      auto res = verify_proximity_token(*env, now);
      if (!res) {
        note_error(res.error());
        reply(make_reply(Kind::LoginResult, name_, ev.from,
                         {{"ok", "0"}, {"error", std::string(err_name(res.code()))}}),
              https);
        return;
      }
      // Desktop session is granted to the submitter of the accepted proof.
      reply(make_reply(Kind::LoginResult, name_, ev.from,
                       {{"ok", "1"}, {"sid", hex_encode(res->sid.v)}}),
            https);
      if (!res->regrant) {
        UserRecord* rec = store_.find(res->em);
        if (rec != nullptr && !rec->fd_principal.empty()) {
          sim.send(sim::ChannelKind::Https, name_, rec->fd_principal,
                   messages::encode_message(make_reply(
                       Kind::RotationOffer, name_, rec->fd_principal,
                       {{"salt", hex_encode(res->salt.v)},
                        {"enc_aid_next", hex_encode(res->rotation_env.to_bytes())}})),
                   https);
        }
      }
      return;
    }
    case Kind::RotationOk: {
      auto env = m.envelope_field("ok_env");
      if (!env) return;
      auto res = verify_ok(m.field("em"), *env, now);
      if (!res) {
        note_error(res.error());
        reply(make_reply(Kind::LoginResult, name_, ev.from,
                         {{"ok", "0"}, {"error", std::string(err_name(res.code()))}}),
              https);
        return;
      }
      reply(make_reply(Kind::LoginResult, name_, ev.from,
                       {{"ok", "1"}, {"sid", hex_encode(res->sid.v)}}),
            https);
      return;
    }
    default:
      // Message kinds the verifier never consumes (its own replies, NFC
      // transfers) are rejected without side effects.
      sim.note({{"type", "note"}, {"what", "server_unexpected_kind"},
                {"kind", std::string(messages::kind_name(m.kind))}});
      return;
  }
}

}  // namespace proxauth::server
