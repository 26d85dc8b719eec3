#include "proxauth/devices.hpp"

namespace proxauth::devices {

using crypto::EncryptedEnvelope;
using crypto::KeyPair;
using messages::Kind;
using nlohmann::json;

json FirstDevicePersistent::to_json() const {
  json j;
  j["registered"] = registered;
  j["enc_aid_blob"] = enc_aid_blob ? hex_encode(enc_aid_blob->to_bytes()) : "";
  j["rotation_journal"] = rotation_journal ? hex_encode(rotation_journal->to_bytes()) : "";
  return j;
}

Bytes FirstDevicePersistent::serialized() const { return to_bytes(to_json().dump()); }

FirstDevice::FirstDevice(std::string name, std::string server, std::string em,
                         std::string pwd, crypto::SecretKey sk, sim::BluetoothAddress bt1,
                         biometric::IdentityProfile profile)
    : name_(std::move(name)),
      server_(std::move(server)),
      em_(std::move(em)),
      pwd_(std::move(pwd)),
      sk_(sk),
      bt1_(bt1),
      profile_(profile) {}

void FirstDevice::send_msg(sim::Simulation& sim, Kind kind, const std::string& to,
                           std::map<std::string, std::string> body, sim::ChannelKind ch,
                           uint64_t latency) {
  messages::ProtocolMessage m;
  m.kind = kind;
  m.sender = name_;
  m.receiver = to;
  m.body = std::move(body);
  auto st = sim.send(ch, name_, to, messages::encode_message(m), latency);
  if (!st.ok()) {
    last_error_ = st.error();
    sim.note({{"type", "note"}, {"what", "fd_send_failed"}, {"from", name_},
              {"kind", std::string(messages::kind_name(kind))},
              {"error", std::string(err_name(st.code()))}});
  }
}

void FirstDevice::clear_volatile() {
  phase_ = FdPhase::Idle;
  n1_.reset();
  sid_.reset();
  salt_.reset();
  login_fburl_.reset();
  pending_auth_string_.reset();
  tap_target_.clear();
}

void FirstDevice::crash(sim::Simulation& sim) {
  clear_volatile();
  fallback_tried_ = false;
  sim.set_crashed(name_, true);
}

void FirstDevice::restart(sim::Simulation& sim) {
  clear_volatile();
  fallback_tried_ = false;
  last_error_.reset();
  sim.set_crashed(name_, false);
}

void FirstDevice::start_registration(sim::Simulation& sim) {
  if (persistent_.registered) {
    last_error_ = Error(Err::InvalidState, "already registered");
    return;
  }
  auto embedding = biometric::capture(profile_, sim.rng_for(name_));
  phase_ = FdPhase::RegAwaitChallenge;
  send_msg(sim, Kind::RegisterRequest, server_,
           {{"em", em_},
            {"pwd", pwd_},
            {"app_id", name_},
            {"embedding", hex_encode(embedding.to_bytes())}},
           sim::ChannelKind::Https, sim.timings().https_ms);
}

Status FirstDevice::start_login(sim::Simulation& sim, const std::string& desktop) {
  if (!persistent_.registered || !persistent_.enc_aid_blob) {
    return Status(Error(Err::InvalidState, "not registered"));
  }
  if (!app_logged_in_) {
    return Status(Error(Err::InvalidState, "user not logged into the app"));
  }
  if (phase_ != FdPhase::Idle) {
    return Status(Error(Err::InvalidState, "login already in progress"));
  }
  tap_target_ = desktop;
  last_login_ok_ = false;
  last_error_.reset();
  login_epoch_ += 1;
  sim.note({{"type", "note"}, {"what", "fd_login_started"}, {"principal", name_}});
  // Cosmetic local timer; the server holds the authoritative one. Keeps the
  // app from hanging in a half-finished login forever.
  sim.schedule_local(name_, to_bytes("login_timeout:" + std::to_string(login_epoch_)),
                     sim.timings().session_deadline_ms);
  auto embedding = biometric::capture(profile_, sim.rng_for(name_));
  phase_ = FdPhase::LoginAwaitUploadAck;
  send_msg(sim, Kind::BiometricUpload, server_,
           {{"em", em_}, {"embedding", hex_encode(embedding.to_bytes())}},
           sim::ChannelKind::Https, sim.timings().https_ms);
  return Status::success();
}

void FirstDevice::abort_login(sim::Simulation& sim, Error e) {
  sim.note({{"type", "note"}, {"what", "fd_login_aborted"}, {"principal", name_},
            {"error", std::string(err_name(e.code))}, {"detail", e.detail}});
  last_error_ = std::move(e);
  last_login_ok_ = false;
  clear_volatile();
}

void FirstDevice::on_event(sim::Simulation& sim, const sim::Event& ev) {
  if (ev.channel == sim::ChannelKind::Local) {
    std::string what = to_string(ev.payload);
    if (what == "login_timeout:" + std::to_string(login_epoch_) &&
        phase_ != FdPhase::Idle && phase_ != FdPhase::RegAwaitChallenge &&
        phase_ != FdPhase::RegAwaitResult) {
      abort_login(sim, Error(Err::SessionExpired, "local login timer elapsed"));
    }
    return;
  }
  if (ev.channel != sim::ChannelKind::Https || ev.from != server_) {
    sim.note({{"type", "note"}, {"what", "fd_rejected_event"}, {"principal", name_},
              {"reason", "unexpected channel or sender"}});
    return;
  }
  auto decoded = messages::decode_message(ev.payload);
  if (!decoded) {
    sim.note({{"type", "note"}, {"what", "fd_rejected_event"}, {"principal", name_},
              {"reason", decoded.error().to_string()}});
    return;
  }
  const auto& m = *decoded;
  // Anything not expected in the current phase is rejected without a state
  // change.
  bool handled = false;
  switch (m.kind) {
    case Kind::RegisterChallenge:
      if (phase_ == FdPhase::RegAwaitChallenge) {
        handle_register_challenge(sim, m);
        handled = true;
      }
      break;
    case Kind::RegisterResult:
      // A rejection (duplicate email) arrives while still awaiting the
      // challenge; both registration phases accept the result.
      if (phase_ == FdPhase::RegAwaitResult || phase_ == FdPhase::RegAwaitChallenge) {
        handle_register_result(sim, m);
        handled = true;
      }
      break;
    case Kind::BiometricUploadAck:
      if (phase_ == FdPhase::LoginAwaitUploadAck) {
        handle_upload_ack(sim, m);
        handled = true;
      }
      break;
    case Kind::LoginContextAck:
      if (phase_ == FdPhase::LoginAwaitCtxAck) {
        handle_ctx_ack(sim, m);
        handled = true;
      }
      break;
    case Kind::LoginSalt:
      if (phase_ == FdPhase::LoginAwaitSalt) {
        handle_login_salt(sim, m);
        handled = true;
      }
      break;
    case Kind::RotationOffer:
      if (phase_ == FdPhase::LoginAwaitRotation) {
        handle_rotation_offer(sim, m);
        handled = true;
      }
      break;
    case Kind::LoginResult:
      if (phase_ == FdPhase::LoginAwaitResult) {
        handle_login_result(sim, m);
        handled = true;
      }
      break;
    default:
      break;
  }
  if (!handled) {
    sim.note({{"type", "note"}, {"what", "fd_rejected_event"}, {"principal", name_},
              {"reason", "kind not expected in current phase"},
              {"kind", std::string(messages::kind_name(m.kind))}});
  }
}

void FirstDevice::handle_register_challenge(sim::Simulation& sim,
                                            const messages::ProtocolMessage& m) {
  auto salt_bytes = m.hex_field("salt");
  auto env = m.envelope_field("enc_aid");
  auto salt = salt_bytes ? crypto::Salt::from_bytes(*salt_bytes) : std::nullopt;
  if (!salt || !env) {
    phase_ = FdPhase::Idle;
    last_error_ = Error(Err::MalformedMessage);
    return;
  }
  // STORE: the sealed AID is the only account secret kept on the device.
  persistent_.enc_aid_blob = *env;

  auto keys = crypto::derive_key_from_password(sk_.v, *salt).value();
  auto aid_bytes = crypto::open_envelope(keys, *env);
  auto aid = aid_bytes ? crypto::SecretKey::from_bytes(*aid_bytes) : std::nullopt;
  if (!aid) {
    persistent_.enc_aid_blob.reset();
    phase_ = FdPhase::Idle;
    last_error_ = Error(Err::MacMismatch, "could not decrypt registration challenge");
    return;
  }
  EncryptedEnvelope confirm = crypto::seal(crypto::keys_from_secret(*aid),
                                           to_bytes(messages::kFixedToken), sim.rng_for(name_));
  auto& oracle = sim.oracle();
  oracle.note_pw_key(sk_.v, *salt);
  std::string confirm_key = oracle.note_pw_key(aid->v, crypto::kAppIdSalt);
  oracle.note_envelope(confirm, confirm_key, name_,
                       adversary::Term::atom("fixed_token", to_bytes(messages::kFixedToken)));
  phase_ = FdPhase::RegAwaitResult;
  send_msg(sim, Kind::RegisterConfirm, server_,
           {{"em", em_}, {"confirm", hex_encode(confirm.to_bytes())}},
           sim::ChannelKind::Https, sim.timings().https_ms);
  // The salt and the plaintext AID are discarded with this stack frame.
}

void FirstDevice::handle_register_result(sim::Simulation& sim,
                                         const messages::ProtocolMessage& m) {
  if (m.flag("ok")) {
    persistent_.registered = true;
  } else {
    persistent_.enc_aid_blob.reset();
    last_error_ = Error(Err::LoginFailed, "registration rejected: " + m.field("error"));
  }
  phase_ = FdPhase::Idle;
  sim.note({{"type", "note"}, {"what", "fd_registration_done"}, {"principal", name_},
            {"ok", m.flag("ok")}});
}

void FirstDevice::handle_upload_ack(sim::Simulation& sim, const messages::ProtocolMessage& m) {
  if (!m.flag("ok")) {
    abort_login(sim, Error(Err::LoginFailed, "biometric upload rejected"));
    return;
  }
  login_fburl_ = biometric::FbUrl{m.field("fburl")};
  n1_ = crypto::gen_nonce10(sim.rng_for(name_));
  if (declare_secrets_) {
    sim.oracle().declare_secret(
        "n1:" + em_ + ":" + std::to_string(sim.oracle().next_serial()), to_bytes(n1_->digits));
  }
  phase_ = FdPhase::LoginAwaitCtxAck;
  send_msg(sim, Kind::LoginContextUpdate, server_,
           {{"em", em_}, {"n1", n1_->digits}, {"bt1", bt1_.str()}},
           sim::ChannelKind::Https, sim.timings().https_ms);
}

void FirstDevice::handle_ctx_ack(sim::Simulation& sim, const messages::ProtocolMessage& m) {
  if (!m.flag("ok")) {
    abort_login(sim, Error(Err::SessionAlreadyActive, m.field("error")));
    return;
  }
  sid_ = crypto::gen_session_id(sim.rng_for(name_));
  // The outer layer wraps the *stored* sealed blob; the device does not need
  // the salt (and cannot decrypt anything) at this point.
  Bytes blob = persistent_.enc_aid_blob->to_bytes();
  EncryptedEnvelope outer =
      crypto::seal(crypto::keys_from_nonce(*n1_), blob, sim.rng_for(name_));
  auto& oracle = sim.oracle();
  std::string outer_key = oracle.note_pw_key(to_bytes(n1_->digits), crypto::kNonceSalt);
  adversary::Term body = adversary::Term::atom("sealed_aid_blob", blob);
  if (const auto* inner = oracle.find_envelope(blob)) {
    body = adversary::Term::enc(inner->key_id, inner->body);
  }
  oracle.note_envelope(outer, outer_key, name_, std::move(body));
  phase_ = FdPhase::LoginAwaitSalt;
  send_msg(sim, Kind::LoginIdentify, server_,
           {{"em", em_}, {"identifier", hex_encode(outer.to_bytes())}},
           sim::ChannelKind::Https, sim.timings().https_ms);
}

void FirstDevice::handle_login_salt(sim::Simulation& sim, const messages::ProtocolMessage& m) {
  if (!m.flag("ok")) {
    // Identification failure right after a rotation crash usually means the
    // blob on hand is ahead of (or behind) the server. Swap in the journal
    // and retry the whole login once.
    if (m.field("error") == "IdentificationFailed" && persistent_.rotation_journal &&
        !fallback_tried_) {
      std::swap(persistent_.enc_aid_blob, persistent_.rotation_journal);
      fallback_tried_ = true;
      std::string desktop = tap_target_;
      sim.note({{"type", "note"}, {"what", "fd_journal_fallback"}, {"principal", name_}});
      clear_volatile();
      start_login(sim, desktop);
      return;
    }
    abort_login(sim, Error(Err::IdentificationFailed, m.field("error")));
    return;
  }
  auto salt_bytes = m.hex_field("salt");
  auto salt = salt_bytes ? crypto::Salt::from_bytes(*salt_bytes) : std::nullopt;
  if (!salt) {
    abort_login(sim, Error(Err::MalformedMessage, "bad salt"));
    return;
  }
  salt_ = *salt;

  auto keys = crypto::derive_key_from_password(sk_.v, *salt).value();
  auto aid_bytes = crypto::open_envelope(keys, *persistent_.enc_aid_blob);
  auto aid = aid_bytes ? crypto::SecretKey::from_bytes(*aid_bytes) : std::nullopt;
  if (!aid) {
    abort_login(sim, Error(Err::MacMismatch, "stored blob does not open under (SK, salt)"));
    return;
  }

  messages::AuthString auth{em_, *login_fburl_, *sid_};
  Bytes plain = messages::encode_auth_string(auth);
  auto& oracle = sim.oracle();
  if (declare_secrets_) {
    oracle.declare_secret("authstr:" + em_ + ":" + std::to_string(oracle.next_serial()),
                          plain);
  }
  auto auth_keys = crypto::derive_key_from_password(aid->v, *salt).value();
  EncryptedEnvelope staged = crypto::seal(auth_keys, plain, sim.rng_for(name_));
  std::string key_id = oracle.note_pw_key(aid->v, *salt);
  oracle.note_envelope(
      staged, key_id, name_,
      adversary::Term::pair_all({adversary::Term::atom("em", to_bytes(em_)),
                                 adversary::Term::atom("login_fburl", to_bytes(login_fburl_->id)),
                                 adversary::Term::atom("sid", sid_->bytes())}));
  pending_auth_string_ = staged.to_bytes();
  phase_ = FdPhase::LoginAwaitRotation;
  if (auto_tap_) {
    auto st = nfc_tap(sim);
    if (!st.ok()) abort_login(sim, st.error());
  }
}

Status FirstDevice::nfc_tap(sim::Simulation& sim) {
  if (!pending_auth_string_) {
    return Status(Error(Err::NothingStaged));
  }
  messages::ProtocolMessage m;
  m.kind = Kind::AuthStringTransfer;
  m.sender = name_;
  m.receiver = tap_target_;
  m.body = {{"auth", hex_encode(*pending_auth_string_)}};
  auto st = sim.send(sim::ChannelKind::Nfc, name_, tap_target_,
                     messages::encode_message(m), sim.timings().nfc_ms);
  if (!st.ok()) return st;
  // Deleted once the transfer is done; only the second device holds it now.
  pending_auth_string_.reset();
  return Status::success();
}

void FirstDevice::handle_rotation_offer(sim::Simulation& sim,
                                        const messages::ProtocolMessage& m) {
  auto salt_bytes = m.hex_field("salt");
  auto salt = salt_bytes ? crypto::Salt::from_bytes(*salt_bytes) : std::nullopt;
  auto env = m.envelope_field("enc_aid_next");
  if (!salt || !env) {
    abort_login(sim, Error(Err::MalformedMessage, "bad rotation offer"));
    return;
  }
  auto keys = crypto::derive_key_from_password(sk_.v, *salt).value();
  auto aid_bytes = crypto::open_envelope(keys, *persistent_.enc_aid_blob);
  auto old_aid = aid_bytes ? crypto::SecretKey::from_bytes(*aid_bytes) : std::nullopt;
  if (!old_aid) {
    abort_login(sim, Error(Err::MacMismatch, "stored blob does not open"));
    return;
  }
  auto next_bytes = crypto::open_envelope(crypto::keys_from_secret(*old_aid), *env);
  auto aid_next = next_bytes ? crypto::SecretKey::from_bytes(*next_bytes) : std::nullopt;
  if (!aid_next) {
    // Corrupt offer: keep the old blob untouched and report the abort.
    abort_login(sim, Error(Err::MacMismatch, "rotation envelope rejected"));
    return;
  }

  EncryptedEnvelope new_blob = crypto::seal(keys, aid_next->v, sim.rng_for(name_));
  auto& oracle = sim.oracle();
  std::string blob_key = oracle.note_pw_key(sk_.v, *salt);
  oracle.note_envelope(new_blob, blob_key, name_,
                       adversary::Term::atom("aid_next:" + em_, aid_next->bytes()));
  persistent_.rotation_journal = persistent_.enc_aid_blob;
  persistent_.enc_aid_blob = new_blob;

  if (crash_mid_rotation_) {
    crash_mid_rotation_ = false;
    crash(sim);
    return;
  }

  EncryptedEnvelope ok_env = crypto::seal(crypto::keys_from_secret(*old_aid),
                                          to_bytes(messages::kOkBody), sim.rng_for(name_));
  std::string ok_key = oracle.note_pw_key(old_aid->v, crypto::kAppIdSalt);
  oracle.note_envelope(ok_env, ok_key, name_,
                       adversary::Term::atom("ok", to_bytes(messages::kOkBody)));
  phase_ = FdPhase::LoginAwaitResult;
  send_msg(sim, Kind::RotationOk, server_,
           {{"em", em_}, {"ok_env", hex_encode(ok_env.to_bytes())}},
           sim::ChannelKind::Https, sim.timings().https_ms);
}

void FirstDevice::handle_login_result(sim::Simulation& sim,
                                      const messages::ProtocolMessage& m) {
  if (m.flag("ok")) {
    persistent_.rotation_journal.reset();
    last_login_ok_ = true;
    ++completed_logins_;
    fallback_tried_ = false;
    clear_volatile();
    sim.note({{"type", "note"}, {"what", "fd_login_success"}, {"principal", name_}});
  } else {
    abort_login(sim, Error(Err::LoginFailed, m.field("error")));
  }
}

// ---------------------------------------------------------------------------
// Second device
// ---------------------------------------------------------------------------

SecondDevice::SecondDevice(std::string name, std::string server, sim::BluetoothAddress bt2)
    : name_(std::move(name)), server_(std::move(server)), bt2_(bt2) {}

void SecondDevice::clear_session_state() {
  phase_ = SdPhase::IdleState;
  received_auth_string_.reset();
  sid_.reset();
  token_.reset();
  scan_target_.reset();
}

void SecondDevice::submit_auth_string(sim::Simulation& sim) {
  messages::ProtocolMessage m;
  m.kind = messages::Kind::AuthStringSubmit;
  m.sender = name_;
  m.receiver = server_;
  m.body = {{"auth", hex_encode(*received_auth_string_)}, {"bt2", bt2_.str()}};
  sim.send(sim::ChannelKind::Https, name_, server_, messages::encode_message(m),
           sim.timings().https_ms);
  phase_ = SdPhase::AwaitMatch;
}

void SecondDevice::send_proof(sim::Simulation& sim) {
  KeyPair keys = crypto::derive_bt_key(scan_target_->str(), sid_->v);
  EncryptedEnvelope proof = crypto::seal(keys, token_->v, sim.rng_for(name_));
  auto& oracle = sim.oracle();
  std::string key_id = oracle.note_bt_key(scan_target_->str(), sid_->v);
  oracle.note_envelope(proof, key_id, name_,
                       adversary::Term::atom("token", token_->bytes()));
  messages::ProtocolMessage m;
  m.kind = messages::Kind::ProximityProof;
  m.sender = name_;
  m.receiver = server_;
  m.body = {{"sid", hex_encode(sid_->v)}, {"proof", hex_encode(proof.to_bytes())}};
  sim.send(sim::ChannelKind::Https, name_, server_, messages::encode_message(m),
           sim.timings().https_ms);
  phase_ = SdPhase::AwaitResult;
}

void SecondDevice::on_event(sim::Simulation& sim, const sim::Event& ev) {
  if (ev.channel == sim::ChannelKind::Local) {
    std::string what = to_string(ev.payload);
    if (what == "scan_complete" && phase_ == SdPhase::Scanning) {
      bool found = sim.ble_scan(name_, *scan_target_);
      if (!found) {
        last_error_ = Error(Err::Bt1NotFound, "phone not in proximity at scan time");
        sim.note({{"type", "note"}, {"what", "sd_proximity_fail"}, {"principal", name_}});
        clear_session_state();
        return;
      }
      send_proof(sim);
    } else if (what == "session_timeout") {
      // Stale auth strings do not outlive the session window.
      if (phase_ != SdPhase::IdleState || received_auth_string_) {
        sim.note({{"type", "note"}, {"what", "sd_session_timeout"}, {"principal", name_}});
        clear_session_state();
      }
    }
    return;
  }

  auto decoded = messages::decode_message(ev.payload);
  if (!decoded) {
    sim.note({{"type", "note"}, {"what", "sd_rejected_event"}, {"principal", name_},
              {"reason", decoded.error().to_string()}});
    return;
  }
  const auto& m = *decoded;

  if (m.kind == messages::Kind::AuthStringTransfer) {
    bool via_nfc = ev.channel == sim::ChannelKind::Nfc;
    bool via_operator = ev.channel == sim::ChannelKind::Https && !operator_.empty() &&
                        ev.from == operator_;
    if (!via_nfc && !via_operator) {
      sim.note({{"type", "note"}, {"what", "sd_rejected_event"}, {"principal", name_},
                {"reason", "auth string from unexpected source"}});
      return;
    }
    if (phase_ != SdPhase::IdleState) {
      sim.note({{"type", "note"}, {"what", "sd_rejected_event"}, {"principal", name_},
                {"reason", "busy"}});
      return;
    }
    auto auth = m.hex_field("auth");
    if (!auth) return;
    received_auth_string_ = *auth;
    logged_in_sid_.reset();
    sim.schedule_local(name_, to_bytes("session_timeout"),
                       sim.timings().session_deadline_ms);
    if (via_nfc && mode_ != SdMode::Honest) {
      // Compromised machine: the page or remote-control module swallows the
      // payload; no honest submission happens from here.
      sim.note({{"type", "note"}, {"what", "sd_submission_suppressed"},
                {"principal", name_}});
      return;
    }
    submit_auth_string(sim);
    return;
  }

  if (ev.channel != sim::ChannelKind::Https || ev.from != server_) {
    sim.note({{"type", "note"}, {"what", "sd_rejected_event"}, {"principal", name_},
              {"reason", "unexpected sender"}});
    return;
  }

  if (m.kind == messages::Kind::MatchNotify && phase_ == SdPhase::AwaitMatch) {
    auto sid_bytes = m.hex_field("sid");
    auto sid = sid_bytes ? crypto::SessionId::from_bytes(*sid_bytes) : std::nullopt;
    auto bt1 = sim::BluetoothAddress::parse(m.field("bt1"));
    auto env = m.envelope_field("match");
    if (!sid || !bt1 || !env) return;
    KeyPair keys = crypto::derive_bt_key(bt2_.str(), sid->v);
    auto opened = crypto::open_envelope(keys, *env);
    if (!opened) {
      last_error_ = Error(Err::MacMismatch, "match envelope not for this device");
      sim.note({{"type", "note"}, {"what", "sd_match_rejected"}, {"principal", name_}});
      clear_session_state();
      return;
    }
    auto match = messages::decode_match_message(*opened);
    if (!match) {
      last_error_ = Error(Err::MalformedMessage, "bad match payload");
      clear_session_state();
      return;
    }
    sid_ = *sid;
    token_ = match->token;
    scan_target_ = *bt1;
    if (enforce_proximity_) {
      phase_ = SdPhase::Scanning;
      sim.schedule_local(name_, to_bytes("scan_complete"), sim.timings().ble_scan_ms);
    } else {
      sim.note({{"type", "note"}, {"what", "sd_proximity_check_skipped"},
                {"principal", name_}});
      send_proof(sim);
    }
    return;
  }

  if (m.kind == messages::Kind::LoginResult &&
      (phase_ == SdPhase::AwaitResult || phase_ == SdPhase::AwaitMatch)) {
    if (m.flag("ok")) {
      auto sid_bytes = m.hex_field("sid");
      logged_in_sid_ = sid_bytes ? crypto::SessionId::from_bytes(*sid_bytes) : std::nullopt;
      sim.note({{"type", "note"}, {"what", "sd_session_granted"}, {"principal", name_}});
    } else {
      last_error_ = Error(Err::LoginFailed, m.field("error"));
    }
    // Either way the concatenated auth string is deleted at login completion.
    clear_session_state();
    return;
  }

  sim.note({{"type", "note"}, {"what", "sd_rejected_event"}, {"principal", name_},
            {"reason", "kind not expected in current phase"},
            {"kind", std::string(messages::kind_name(m.kind))}});
}

}  // namespace proxauth::devices
