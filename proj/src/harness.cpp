#include "proxauth/harness.hpp"

#include <fnmatch.h>

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <memory>
#include <set>
#include <sstream>

#include "proxauth/messages.hpp"

namespace proxauth::harness {

namespace fs = std::filesystem;
using adversary::Term;
using messages::Kind;
using nlohmann::json;
using scenario::ExpectedOutcome;
using scenario::ScenarioConfig;
using scenario::ScenarioKind;

void startup_checks() { messages::validate_protocol_tables(); }

// ---------------------------------------------------------------------------
// Attacker
// ---------------------------------------------------------------------------

Attacker::Attacker(std::string name, std::string server, adversary::Capabilities caps)
    : name_(std::move(name)), server_(std::move(server)), caps_(caps) {
  endpoints_.push_back(name_);
}

bool Attacker::controls(const std::string& m) const {
  return std::find(controlled_.begin(), controlled_.end(), m) != controlled_.end();
}

bool Attacker::is_knowledge_endpoint(const std::string& p) const {
  return std::find(endpoints_.begin(), endpoints_.end(), p) != endpoints_.end();
}

void Attacker::grant(sim::Simulation& sim, Term t) {
  sim.note({{"type", "grant"}, {"observer", name_}, {"term", t.to_json()}});
  knowledge_.ingest(std::move(t));
}

void Attacker::send_message(sim::Simulation& sim, const messages::ProtocolMessage& m,
                            sim::ChannelKind ch) {
  sim.send(ch, name_, m.receiver, messages::encode_message(m), sim.timings().https_ms);
}

void Attacker::inject_raw(sim::Simulation& sim, const std::string& to, Bytes payload,
                          sim::ChannelKind ch) {
  sim.send(ch, name_, to, std::move(payload), sim.timings().https_ms);
}

void Attacker::on_event(sim::Simulation&, const sim::Event&) {
  // Knowledge updates happen in observe(); scripted reactions via the hook.
}

Term term_for_event(const sim::Simulation& sim, const sim::Event& ev) {
  auto decoded = messages::decode_message(ev.payload);
  if (!decoded) {
    return Term::atom("raw", ev.payload);
  }
  const auto& m = *decoded;
  const messages::KindSchema* schema = nullptr;
  for (const auto& s : messages::message_schemas()) {
    if (s.kind == m.kind) schema = &s;
  }
  std::vector<Term> parts;
  parts.push_back(Term::atom("kind", to_bytes(messages::kind_name(m.kind))));
  for (const auto& [name, value] : m.body) {
    messages::FieldType type = messages::FieldType::Text;
    for (const auto& f : schema->fields) {
      if (f.name == name) type = f.type;
    }
    if (type == messages::FieldType::Envelope) {
      Bytes raw = hex_decode(value).value_or(Bytes{});
      if (const auto* rec = sim.oracle().find_envelope(raw)) {
        parts.push_back(Term::enc(rec->key_id, rec->body));
      } else {
        parts.push_back(Term::atom("blob:" + name, raw));
      }
    } else if (type == messages::FieldType::Hex || type == messages::FieldType::Hex16) {
      parts.push_back(Term::atom("f:" + name, hex_decode(value).value_or(Bytes{})));
    } else {
      parts.push_back(Term::atom("f:" + name, to_bytes(value)));
    }
  }
  return Term::pair_all(std::move(parts));
}

void Attacker::observe(sim::Simulation& sim, const sim::Event& ev) {
  if (ev.channel == sim::ChannelKind::Local || ev.channel == sim::ChannelKind::BleScan) {
    return;
  }
  bool endpoint = is_knowledge_endpoint(ev.from) || is_knowledge_endpoint(ev.to);
  bool captured = endpoint;
  if (!captured && ev.channel == sim::ChannelKind::Nfc) {
    // Radio observation when physically present at the tap.
    if (caps_.replay && sim.topology().proximate(name_, ev.from)) captured = true;
    // Capturing module / phishing page on a machine the attacker controls.
    if ((caps_.rt_relay || caps_.cr_remote_desktop) && controls(ev.to)) captured = true;
  }
  if (!captured) return;
  Term t = term_for_event(sim, ev);
  sim.note({{"type", "observe"}, {"observer", name_}, {"term", t.to_json()}});
  knowledge_.ingest(std::move(t));
  if (reaction_) reaction_(*this, sim, ev);
}

// ---------------------------------------------------------------------------
// World
// ---------------------------------------------------------------------------

namespace {

constexpr const char* kServerName = "server";
constexpr const char* kFakeAttackerBt = "EE:EE:EE:EE:EE:EE";

struct World {
  const ScenarioConfig* cfg = nullptr;
  std::unique_ptr<sim::Simulation> sim;
  std::unique_ptr<server::VerifierServer> verifier;
  std::unique_ptr<devices::FirstDevice> fd;
  std::unique_ptr<devices::SecondDevice> sd;
  std::unique_ptr<devices::SecondDevice> attacker_sd;
  std::unique_ptr<devices::FirstDevice> spoof_fd;
  std::unique_ptr<Attacker> attacker;
  crypto::SecretKey victim_sk;
  biometric::IdentityProfile victim_profile;
  std::vector<std::string> attacker_side;
  bool authenticated_as_victim = false;
  std::vector<std::string> storage_violations;
  // Crash injection over the login flow.
  bool counting_login_deliveries = false;
  int login_deliveries = 0;
  std::optional<int> crash_after_delivery;
};

bool is_attacker_side(const World& w, const std::string& p) {
  return std::find(w.attacker_side.begin(), w.attacker_side.end(), p) !=
         w.attacker_side.end();
}

std::optional<messages::ProtocolMessage> decode_event(const sim::Event& ev) {
  auto d = messages::decode_message(ev.payload);
  if (!d) return std::nullopt;
  return *d;
}

void inspect_device_storage(World& w, devices::FirstDevice* dev) {
  if (dev == nullptr) return;
  Bytes stored = dev->persistent().serialized();
  for (const auto& secret : w.sim->oracle().secrets()) {
    bool forbidden = secret.name.starts_with("aid:") || secret.name.starts_with("salt:") ||
                     secret.name.starts_with("n1:") || secret.name.starts_with("authstr:") ||
                     secret.name.starts_with("sk:") || secret.name.starts_with("token:");
    if (!forbidden) continue;
    Bytes hex_form = to_bytes(hex_encode(secret.value));
    if (contains_bytes(stored, secret.value) || contains_bytes(stored, hex_form)) {
      w.storage_violations.push_back(dev->name() + " persisted " + secret.name);
      w.sim->note({{"type", "note"}, {"what", "storage_violation"},
                   {"principal", dev->name()}, {"secret", secret.name}});
    }
  }
}

void setup_world(World& w, const ScenarioConfig& cfg) {
  w.cfg = &cfg;
  w.sim = std::make_unique<sim::Simulation>(cfg.seed);
  w.sim->timings() = cfg.timings;
  w.sim->set_capture_payloads(cfg.capture_payloads);

  for (const auto& loc : cfg.locations) w.sim->topology().add_location(loc);
  for (const auto& [a, b] : cfg.adjacent) w.sim->topology().add_adjacency(a, b);

  server::ServerConfig scfg;
  scfg.biometric_threshold = cfg.biometric_threshold;
  scfg.session_deadline_ms = cfg.timings.session_deadline_ms;
  scfg.token_single_use = cfg.token_single_use;
  w.verifier = std::make_unique<server::VerifierServer>(kServerName, scfg, cfg.seed);
  w.verifier->set_oracle(&w.sim->oracle());
  w.sim->add_principal(kServerName, w.verifier.get());
  w.sim->set_pre_delivery_hook(
      [&w](sim::Simulation& s) { w.verifier->expire_sessions(s.now()); });

  Csprng provision_rng(cfg.seed, "provision");
  w.victim_sk = crypto::gen_secret(provision_rng);
  w.sim->oracle().declare_secret("sk:" + cfg.victim_em, w.victim_sk.v);
  w.verifier->provision_app_secret(cfg.victim_phone.id, w.victim_sk);

  Csprng identity_rng(cfg.seed, "identity:" + cfg.victim_em);
  w.victim_profile = {biometric::random_identity(identity_rng), cfg.noise_sigma};

  w.fd = std::make_unique<devices::FirstDevice>(cfg.victim_phone.id, kServerName,
                                                cfg.victim_em, cfg.victim_pwd, w.victim_sk,
                                                cfg.victim_phone.bt, w.victim_profile);
  w.sim->add_principal(cfg.victim_phone.id, w.fd.get());
  w.sim->topology().place(cfg.victim_phone.id, cfg.victim_phone.location);
  w.sim->register_radio(cfg.victim_phone.id, cfg.victim_phone.bt);

  w.sd = std::make_unique<devices::SecondDevice>(cfg.victim_desktop.id, kServerName,
                                                 cfg.victim_desktop.bt);
  w.sd->set_enforce_proximity(cfg.proximity_check);
  w.sim->add_principal(cfg.victim_desktop.id, w.sd.get());
  w.sim->topology().place(cfg.victim_desktop.id, cfg.victim_desktop.location);
  w.sim->register_radio(cfg.victim_desktop.id, cfg.victim_desktop.bt);

  if (cfg.attacker) {
    const auto& spec = *cfg.attacker;
    w.attacker = std::make_unique<Attacker>(spec.id, kServerName, spec.capabilities);
    w.sim->add_principal(spec.id, w.attacker.get());
    w.sim->topology().place(spec.id, spec.location);
    w.attacker_side.push_back(spec.id);

    if (spec.desktop) {
      w.attacker_sd = std::make_unique<devices::SecondDevice>(spec.desktop->id, kServerName,
                                                              spec.desktop->bt);
      w.attacker_sd->set_operator_principal(spec.id);
      w.attacker_sd->set_enforce_proximity(cfg.proximity_check);
      w.sim->add_principal(spec.desktop->id, w.attacker_sd.get());
      w.sim->topology().place(spec.desktop->id, spec.desktop->location);
      w.sim->register_radio(spec.desktop->id, spec.desktop->bt);
      w.attacker_side.push_back(spec.desktop->id);
    }

    // Baseline knowledge: the account email is public; a radio sniffer from the
    // registration window yields the victim's device addresses as strings.
    w.attacker->grant(*w.sim, Term::atom("em:" + cfg.victim_em, to_bytes(cfg.victim_em)));
    if (spec.capabilities.sniff_bt_addr) {
      w.attacker->grant(*w.sim,
                        Term::atom("bt1", to_bytes(cfg.victim_phone.bt.str())));
      w.attacker->grant(*w.sim,
                        Term::atom("bt2", to_bytes(cfg.victim_desktop.bt.str())));
    }

    switch (cfg.kind) {
      case ScenarioKind::RtMitm:
        w.sd->set_mode(devices::SdMode::PhishPage);
        w.attacker->add_controlled_machine(cfg.victim_desktop.id);
        break;
      case ScenarioKind::CrMitm:
        w.sd->set_mode(devices::SdMode::RemoteControl);
        w.attacker->add_controlled_machine(cfg.victim_desktop.id);
        break;
      case ScenarioKind::MbePhish:
        // Extension sandbox: UI surfaces only, no NFC buffer access.
        w.attacker->add_controlled_machine(cfg.victim_desktop.id);
        break;
      default:
        break;
    }

    w.sim->add_post_delivery_hook([&w](sim::Simulation& s, const sim::Event& ev) {
      w.attacker->observe(s, ev);
    });
  }

  w.sim->add_post_delivery_hook([&w](sim::Simulation& s, const sim::Event& ev) {
    if (ev.channel != sim::ChannelKind::Https) return;
    auto m = decode_event(ev);
    if (m && m->kind == Kind::LoginResult && m->flag("ok") && is_attacker_side(w, ev.to)) {
      w.authenticated_as_victim = true;
      s.note({{"type", "note"}, {"what", "attacker_authenticated"}, {"principal", ev.to}});
    }
  });

  w.sim->add_post_delivery_hook([&w](sim::Simulation&, const sim::Event&) {
    inspect_device_storage(w, w.fd.get());
    inspect_device_storage(w, w.spoof_fd.get());
  });

  w.sim->add_post_delivery_hook([&w](sim::Simulation& s, const sim::Event&) {
    if (!w.counting_login_deliveries) return;
    ++w.login_deliveries;
    if (w.crash_after_delivery && w.login_deliveries == *w.crash_after_delivery + 1 &&
        !s.is_crashed(w.fd->name())) {
      w.fd->crash(s);
    }
  });
}

void register_victim(World& w) {
  w.fd->start_registration(*w.sim);
  w.sim->run_to_quiescence();
}

uint64_t advance_past_deadline(World& w) {
  uint64_t target = w.sim->now() + w.cfg->timings.session_deadline_ms + 1;
  w.sim->advance(target);
  return target;
}

using Checks = std::vector<std::pair<std::string, bool>>;

void check(Checks& checks, const std::string& name, bool ok) {
  checks.emplace_back(name, ok);
}

// ---------------------------------------------------------------------------
// Scenario scripts
// ---------------------------------------------------------------------------

void run_honest(World& w, Checks& checks) {
  register_victim(w);
  check(checks, "registration completed", w.fd->registered());
  w.fd->start_login(*w.sim, w.cfg->victim_desktop.id);
  w.sim->run_to_quiescence();
  check(checks, "phone reported login success", w.fd->last_login_ok());
  check(checks, "desktop session granted", w.sd->logged_in_sid().has_value());
}

void run_rotation_crash(World& w, Checks& checks) {
  register_victim(w);
  check(checks, "registration completed", w.fd->registered());

  int step = w.cfg->crash_at_step.value_or(13);
  if (step == 15) {
    w.fd->set_crash_between_rotation_persist_and_ok(true);
  } else {
    w.crash_after_delivery = step;
  }
  w.counting_login_deliveries = true;
  w.fd->start_login(*w.sim, w.cfg->victim_desktop.id);
  w.sim->run_to_quiescence();
  w.counting_login_deliveries = false;
  check(checks, "phone crashed during login", w.sim->is_crashed(w.fd->name()));

  advance_past_deadline(w);
  w.fd->restart(*w.sim);
  w.fd->start_login(*w.sim, w.cfg->victim_desktop.id);
  w.sim->run_to_quiescence();
  check(checks, "recovery login succeeded", w.fd->last_login_ok());
  check(checks, "no journal left after recovery",
        !w.fd->persistent().rotation_journal.has_value());

  if (step == 15) {
    // The mid-rotation window is the one the journal exists for: the blob on
    // disk is ahead of the server, so recovery must have gone through the
    // fallback.
    bool fallback_used = false;
    for (const auto& line : w.sim->transcript()) {
      if (line.value("type", "") == "note" &&
          line.value("what", "") == "fd_journal_fallback") {
        fallback_used = true;
      }
    }
    check(checks, "recovery used the rotation journal", fallback_used);
  }
}

void run_rt_mitm(World& w, Checks& checks) {
  register_victim(w);
  auto fake_bt = sim::BluetoothAddress::parse(kFakeAttackerBt).value();

  struct State {
    bool relayed = false;
    bool match_received = false;
    bool relay_back_probed = false;
  };
  auto state = std::make_shared<State>();
  const std::string victim_desktop = w.cfg->victim_desktop.id;

  w.attacker->set_reaction([state, fake_bt, victim_desktop](
                               Attacker& adv, sim::Simulation& s, const sim::Event& ev) {
    auto m = decode_event(ev);
    if (!m) return;
    if (m->kind == Kind::AuthStringTransfer && !state->relayed) {
      // Real-time relay: the phished payload goes straight to the legitimate
      // server with the attacker's own address.
      state->relayed = true;
      messages::ProtocolMessage submit;
      submit.kind = Kind::AuthStringSubmit;
      submit.sender = adv.name();
      submit.receiver = kServerName;
      submit.body = {{"auth", m->field("auth")}, {"bt2", fake_bt.str()}};
      adv.send_message(s, submit);
    }
    if (m->kind == Kind::MatchNotify && ev.to == adv.name()) {
      state->match_received = true;
      if (!state->relay_back_probed) {
        // Forwarding the challenge to the victim's machine goes nowhere: the
        // client only accepts protocol traffic from its own server.
        state->relay_back_probed = true;
        adv.inject_raw(s, victim_desktop, ev.payload);
      }
    }
  });

  w.fd->start_login(*w.sim, w.cfg->victim_desktop.id);
  w.sim->run_to_quiescence();
  check(checks, "attacker relayed the captured auth string", state->relayed);
  check(checks, "server issued MATCH to the attacker address", state->match_received);
  check(checks, "no session was granted to anyone",
        !w.sd->logged_in_sid() && !w.authenticated_as_victim);

  // Second window: with the session expired, try to impersonate the phone
  // outright. Without SK or the sealed blob the identifier cannot be built.
  advance_past_deadline(w);
  auto& rng = w.sim->rng_for(w.attacker->name());
  auto n1 = crypto::gen_nonce10(rng);
  messages::ProtocolMessage ctx;
  ctx.kind = Kind::LoginContextUpdate;
  ctx.sender = w.attacker->name();
  ctx.receiver = kServerName;
  ctx.body = {{"em", w.cfg->victim_em}, {"n1", n1.digits}, {"bt1", fake_bt.str()}};
  w.attacker->send_message(*w.sim, ctx);
  w.sim->run_to_quiescence();

  crypto::KeyPair junk_keys = crypto::keys_from_secret(crypto::gen_secret(rng));
  crypto::EncryptedEnvelope junk = crypto::seal(junk_keys, rng.bytes(48), rng);
  messages::ProtocolMessage ident;
  ident.kind = Kind::LoginIdentify;
  ident.sender = w.attacker->name();
  ident.receiver = kServerName;
  ident.body = {{"em", w.cfg->victim_em}, {"identifier", hex_encode(junk.to_bytes())}};
  w.attacker->send_message(*w.sim, ident);
  w.sim->run_to_quiescence();
  check(checks, "forged identifier rejected", !w.authenticated_as_victim);
}

void run_cr_mitm(World& w, Checks& checks) {
  register_victim(w);
  auto state = std::make_shared<bool>(false);
  const std::string target_sd = w.cfg->attacker->desktop->id;

  w.attacker->set_reaction([state, target_sd](Attacker& adv, sim::Simulation& s,
                                              const sim::Event& ev) {
    auto m = decode_event(ev);
    if (!m || m->kind != Kind::AuthStringTransfer || *state) return;
    *state = true;
    // Remote-control capture: replay the tapped payload into the attacker's
    // own (legitimate) client, which then follows the protocol honestly.
    messages::ProtocolMessage inject;
    inject.kind = Kind::AuthStringTransfer;
    inject.sender = adv.name();
    inject.receiver = target_sd;
    inject.body = {{"auth", m->field("auth")}};
    adv.send_message(s, inject);
  });

  w.fd->start_login(*w.sim, w.cfg->victim_desktop.id);
  w.sim->run_to_quiescence();

  check(checks, "auth string reached the attacker desktop", *state);
  if (w.cfg->proximity_check) {
    check(checks, "attacker desktop aborted at proximity scan",
          w.attacker_sd->last_error() &&
              w.attacker_sd->last_error()->code == Err::Bt1NotFound);
  } else {
    check(checks, "proximity gate disabled: attacker desktop finished the ceremony",
          w.attacker_sd->logged_in_sid().has_value());
  }
}

void run_mbe_phish(World& w, Checks& checks) {
  register_victim(w);
  w.fd->start_login(*w.sim, w.cfg->victim_desktop.id);
  w.sim->run_to_quiescence();
  check(checks, "victim login unaffected by the extension", w.fd->last_login_ok());
  // The user types nothing into the browser in this scheme, so a keystroke /
  // form-data logger sees no protocol bytes at all.
  check(checks, "extension captured zero envelopes",
        w.attacker->knowledge().envelope_term_count() == 0);
}

void run_replay(World& w, Checks& checks) {
  register_victim(w);

  struct State {
    std::optional<std::string> auth_hex;        // recorded at the tap
    std::optional<Bytes> proof_payload;         // recorded in transit
    std::optional<Bytes> identify_payload_a;    // session A identifier
    bool proof_reinjected = false;
    bool stale_identify_armed = false;
    bool stale_identify_sent = false;
  };
  auto st = std::make_shared<State>();

  w.attacker->set_reaction([st](Attacker&, sim::Simulation&, const sim::Event& ev) {
    auto m = decode_event(ev);
    if (m && m->kind == Kind::AuthStringTransfer && !st->auth_hex) {
      st->auth_hex = m->field("auth");
    }
  });

  // Network-replay hooks (recorded ciphertext re-sent from the attacker).
  w.sim->add_post_delivery_hook([&w, st](sim::Simulation& s, const sim::Event& ev) {
    if (ev.to != kServerName) return;
    auto m = decode_event(ev);
    if (!m) return;
    if (m->kind == Kind::ProximityProof && !st->proof_payload) {
      st->proof_payload = ev.payload;
      // Immediate re-submission, racing the rotation handshake.
      st->proof_reinjected = true;
      s.send(sim::ChannelKind::Https, w.attacker->name(), kServerName, ev.payload, 1);
    }
    if (m->kind == Kind::LoginIdentify) {
      if (!st->identify_payload_a) {
        st->identify_payload_a = ev.payload;
      } else if (st->stale_identify_armed && !st->stale_identify_sent &&
                 ev.from == w.fd->name()) {
        st->stale_identify_sent = true;
        s.send(sim::ChannelKind::Https, w.attacker->name(), kServerName,
               *st->identify_payload_a, 1);
      }
    }
  });

  // Session A: honest login, with the attacker recording at the tap and the
  // proof re-submission firing mid-handshake.
  w.fd->start_login(*w.sim, w.cfg->victim_desktop.id);
  w.sim->run_to_quiescence();
  check(checks, "session A completed", w.fd->last_login_ok());
  check(checks, "tap payload recorded", st->auth_hex.has_value());
  check(checks, "proof re-submitted mid-session", st->proof_reinjected);

  // Re-tap probe: the recorded NFC payload is submitted as a fresh login.
  auto fake_bt = sim::BluetoothAddress::parse(kFakeAttackerBt).value();
  messages::ProtocolMessage resubmit;
  resubmit.kind = Kind::AuthStringSubmit;
  resubmit.sender = w.attacker->name();
  resubmit.receiver = kServerName;
  resubmit.body = {{"auth", *st->auth_hex}, {"bt2", fake_bt.str()}};
  w.attacker->send_message(*w.sim, resubmit);
  w.sim->run_to_quiescence();

  // Session B: the recorded session-A identifier is re-injected after the
  // fresh context lands; the stale nonce kills it.
  st->stale_identify_armed = true;
  w.fd->start_login(*w.sim, w.cfg->victim_desktop.id);
  w.sim->run_to_quiescence();
  check(checks, "stale identifier replayed", st->stale_identify_sent);

  // Session C: clean retry succeeds.
  advance_past_deadline(w);
  w.fd->restart(*w.sim);
  w.fd->start_login(*w.sim, w.cfg->victim_desktop.id);
  w.sim->run_to_quiescence();
  if (w.cfg->token_single_use) {
    check(checks, "victim can still log in after the replay attempts",
          w.fd->last_login_ok());
  }
}

void run_spoof_app(World& w, Checks& checks) {
  register_victim(w);
  check(checks, "registration completed", w.fd->registered());

  auto& rng = w.sim->rng_for(w.attacker->name());
  bool leak = w.cfg->leak_first_device_secrets;

  crypto::SecretKey spoof_sk = leak ? w.victim_sk : crypto::gen_secret(rng);
  // The spoofed app runs on the victim's phone: same face in front of the
  // camera, same Bluetooth radio, but no access to the real app's sandboxed
  // storage unless the leak toggle hands it over.
  w.spoof_fd = std::make_unique<devices::FirstDevice>(
      "spoof-app", kServerName, w.cfg->victim_em, w.cfg->victim_pwd, spoof_sk,
      w.cfg->victim_phone.bt, w.victim_profile);
  w.spoof_fd->set_declare_secrets(false);
  w.sim->add_principal("spoof-app", w.spoof_fd.get());
  w.sim->topology().place("spoof-app", w.cfg->victim_phone.location);
  w.attacker_side.push_back("spoof-app");
  w.attacker->add_knowledge_endpoint("spoof-app");

  auto& persistent = w.spoof_fd->mutable_persistent();
  persistent.registered = true;
  if (leak) {
    persistent.enc_aid_blob = w.fd->persistent().enc_aid_blob;
    w.attacker->grant(*w.sim, Term::atom("sk:" + w.cfg->victim_em, w.victim_sk.bytes()));
    Bytes blob = persistent.enc_aid_blob->to_bytes();
    if (const auto* rec = w.sim->oracle().find_envelope(blob)) {
      w.attacker->grant(*w.sim, Term::enc(rec->key_id, rec->body));
    }
  } else {
    crypto::KeyPair junk = crypto::keys_from_secret(crypto::gen_secret(rng));
    persistent.enc_aid_blob = crypto::seal(junk, rng.bytes(32), rng);
  }

  w.spoof_fd->start_login(*w.sim, w.cfg->victim_desktop.id);
  w.sim->run_to_quiescence();

  if (leak) {
    check(checks, "cloned app completed the login", w.spoof_fd->last_login_ok());
  } else {
    check(checks, "spoofed app failed device identification",
          !w.spoof_fd->last_login_ok() && w.spoof_fd->last_error() &&
              w.spoof_fd->last_error()->code == Err::IdentificationFailed);
    check(checks, "no session granted", !w.sd->logged_in_sid().has_value());
  }
}

// ---------------------------------------------------------------------------
// Outcome evaluation and transcript assembly
// ---------------------------------------------------------------------------

std::vector<std::string> collect_server_errors(const sim::Simulation& sim) {
  std::vector<std::string> out;
  for (const auto& line : sim.transcript()) {
    if (line.value("type", "") == "note" && line.value("what", "") == "server_op_error") {
      out.push_back(line.value("error", ""));
    }
  }
  return out;
}

RunMetrics compute_metrics(const World& w, uint64_t reg_start) {
  RunMetrics m;
  const auto& tr = w.sim->transcript();
  uint64_t reg_done = reg_start;
  uint64_t login_start = 0;
  uint64_t login_done = 0;
  for (const auto& line : tr) {
    if (line.value("type", "") != "note") continue;
    std::string what = line.value("what", "");
    if (what == "fd_registration_done" && reg_done == reg_start) {
      reg_done = line.value("t", reg_start);
    }
    if (what == "fd_login_started") {
      login_start = line.value("t", uint64_t{0});
    }
    if (what == "fd_login_success") {
      login_done = line.value("t", uint64_t{0});
    }
  }
  m.registration_ms = reg_done - reg_start;
  m.login_ms = login_done > login_start ? login_done - login_start : 0;
  const auto& c = w.sim->counters();
  m.https_messages = c.https;
  m.nfc_messages = c.nfc;
  m.ble_scans = c.ble_scans;
  m.nfc_tap_ms = c.nfc * w.cfg->timings.nfc_ms;
  m.ble_search_ms = c.ble_scans * w.cfg->timings.ble_scan_ms;
  uint64_t matches = 0;
  for (const auto& ev : w.sim->delivered_events()) {
    auto pm = decode_event(ev);
    if (pm && pm->kind == Kind::MatchNotify) ++matches;
  }
  m.biometric_match_ms = matches * w.cfg->timings.biometric_match_ms;
  uint64_t overhead = m.nfc_tap_ms + m.ble_search_ms + m.biometric_match_ms;
  m.https_path_ms = m.login_ms > overhead ? m.login_ms - overhead : 0;
  return m;
}

json RunMetricsToJsonImpl(const RunMetrics& m) {
  return {{"registration_ms", m.registration_ms},
          {"login_ms", m.login_ms},
          {"nfc_tap_ms", m.nfc_tap_ms},
          {"ble_search_ms", m.ble_search_ms},
          {"biometric_match_ms", m.biometric_match_ms},
          {"https_path_ms", m.https_path_ms},
          {"messages",
           {{"https", m.https_messages}, {"nfc", m.nfc_messages}, {"ble_scans", m.ble_scans}}}};
}

json build_meta(const World& w) {
  const auto& oracle = w.sim->oracle();
  json secrets = json::array();
  for (const auto& s : oracle.secrets()) {
    secrets.push_back({{"name", s.name}, {"hex", hex_encode(s.value)}});
  }
  json keys = json::array();
  for (const auto& [id, d] : oracle.keys().all()) {
    keys.push_back(
        {{"id", id}, {"inputs", d.secret_input_hexes}, {"ble_gated", d.ble_gated}});
  }
  json envelopes = json::array();
  for (const auto& [digest, rec] : oracle.envelopes()) {
    envelopes.push_back({{"digest", digest}, {"key", rec.key_id}, {"sealer", rec.sealer}});
  }
  json oks = json::array();
  for (const auto& acc : oracle.ok_acceptances()) {
    oks.push_back({{"em", acc.em}, {"digest", acc.envelope_digest}});
  }
  json attacker = nullptr;
  if (w.cfg->attacker) {
    const auto& a = *w.cfg->attacker;
    attacker = {{"id", a.id},
                {"location", a.location},
                {"capabilities",
                 {{"phish_ui_observe", a.capabilities.phish_ui_observe},
                  {"rt_relay", a.capabilities.rt_relay},
                  {"cr_remote_desktop", a.capabilities.cr_remote_desktop},
                  {"replay", a.capabilities.replay},
                  {"spoof_app", a.capabilities.spoof_app},
                  {"sniff_bt_addr", a.capabilities.sniff_bt_addr}}}};
  }
  return {{"type", "meta"},
          {"scenario", w.cfg->name},
          {"kind", std::string(scenario::scenario_kind_name(w.cfg->kind))},
          {"seed", w.cfg->seed},
          {"victim_em", w.cfg->victim_em},
          {"secrets", secrets},
          {"keys", keys},
          {"envelopes", envelopes},
          {"ok_acceptances", oks},
          {"ok_expected_sealers", json::array({w.cfg->victim_phone.id})},
          {"attacker", attacker}};
}

}  // namespace

json RunMetrics::to_json() const { return RunMetricsToJsonImpl(*this); }

RunResult run_scenario(const ScenarioConfig& cfg) {
  startup_checks();
  World w;
  setup_world(w, cfg);
  Checks checks;
  uint64_t reg_start = w.sim->now();

  switch (cfg.kind) {
    case ScenarioKind::Honest: run_honest(w, checks); break;
    case ScenarioKind::RotationCrash: run_rotation_crash(w, checks); break;
    case ScenarioKind::RtMitm: run_rt_mitm(w, checks); break;
    case ScenarioKind::CrMitm: run_cr_mitm(w, checks); break;
    case ScenarioKind::MbePhish: run_mbe_phish(w, checks); break;
    case ScenarioKind::Replay: run_replay(w, checks); break;
    case ScenarioKind::SpoofApp: run_spoof_app(w, checks); break;
  }
  // Drain any stragglers (cleanup timers) so end-of-run invariants see the
  // final state.
  w.sim->run_to_quiescence();

  // Attacker knowledge closure and secrecy report.
  adversary::Knowledge closure;
  if (w.attacker) {
    closure = w.attacker->knowledge();
    closure.close(w.sim->oracle().keys());
  }
  auto secrecy = adversary::secrecy_report(closure, w.sim->oracle().secrets());

  bool closure_clean = true;
  for (const auto& v : secrecy.verdicts) {
    bool critical = v.name.starts_with("sk:") || v.name.starts_with("aid:") ||
                    v.name.starts_with("token:");
    if (critical && v.leaked) closure_clean = false;
  }

  auto errors_seen = collect_server_errors(*w.sim);
  auto saw_error = [&](const std::string& code) {
    return std::find(errors_seen.begin(), errors_seen.end(), code) != errors_seen.end();
  };

  // Transport scan: secrets must never ride outside HTTPS payloads in the
  // clear.
  bool transport_clean = true;
  for (const auto& ev : w.sim->delivered_events()) {
    if (ev.channel == sim::ChannelKind::Https) continue;
    for (const auto& s : w.sim->oracle().secrets()) {
      if (contains_bytes(ev.payload, s.value)) {
        transport_clean = false;
        w.sim->note({{"type", "note"}, {"what", "transport_violation"},
                     {"secret", s.name}, {"ch", std::string(channel_name(ev.channel))}});
      }
    }
  }

  switch (cfg.assertions.expected) {
    case ExpectedOutcome::LoginSuccess:
      check(checks, "expected outcome: login success",
            w.fd->last_login_ok() && !w.authenticated_as_victim);
      break;
    case ExpectedOutcome::AttackFailed:
      check(checks, "expected outcome: attack failed", !w.authenticated_as_victim);
      break;
    case ExpectedOutcome::AttackSucceeded:
      check(checks, "expected outcome: attack succeeded", w.authenticated_as_victim);
      break;
  }
  for (const auto& code : cfg.assertions.expected_errors) {
    check(checks, "server reported " + code, saw_error(code));
  }
  if (cfg.assertions.secret_free_closure) {
    check(checks, "attacker closure free of SK/AID/TOKEN", closure_clean);
  }
  check(checks, "no plaintext secret persisted on the phone",
        w.storage_violations.empty());
  check(checks, "no secret bytes outside HTTPS payloads", transport_clean);

  RunResult result;
  result.scenario_name = cfg.name;
  result.passed = true;
  json check_list = json::array();
  for (const auto& [name, ok] : checks) {
    check_list.push_back({{"name", name}, {"ok", ok}});
    if (!ok && result.passed) {
      result.passed = false;
      result.first_failure = name;
    }
  }

  result.metrics = compute_metrics(w, reg_start);
  result.outcome = {{"scenario", cfg.name},
                    {"kind", std::string(scenario::scenario_kind_name(cfg.kind))},
                    {"seed", cfg.seed},
                    {"authenticated", w.authenticated_as_victim},
                    {"victim_login_ok", w.fd->last_login_ok()},
                    {"secrets_leaked", secrecy.leaked_names()},
                    {"steps", w.sim->delivered_events().size()},
                    {"errors_seen", errors_seen},
                    {"checks", check_list}};

  result.transcript_lines.push_back(build_meta(w).dump());
  for (const auto& line : w.sim->transcript()) {
    result.transcript_lines.push_back(line.dump());
  }
  json outcome_line = result.outcome;
  outcome_line["type"] = "outcome";
  result.transcript_lines.push_back(outcome_line.dump());
  result.transcript_digest = transcript_digest(result.transcript_lines);
  return result;
}

std::string transcript_digest(const std::vector<std::string>& lines) {
  std::string joined;
  for (const auto& l : lines) {
    joined += l;
    joined += '\n';
  }
  return sha256_hex(to_bytes(joined));
}

Status write_lines(const std::string& path, const std::vector<std::string>& lines) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) return Status(Error(Err::ConfigError, "cannot write " + path));
  for (const auto& l : lines) out << l << "\n";
  return Status::success();
}

SuiteResult run_suite(const std::string& dir, const std::string& filter) {
  SuiteResult result;
  if (!fs::exists(dir) || !fs::is_directory(dir)) {
    result.error = "not a directory: " + dir;
    result.all_passed = false;
    return result;
  }
  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") {
      files.push_back(entry.path().string());
    }
  }
  std::sort(files.begin(), files.end());

  std::set<std::string> names;
  std::vector<std::pair<std::string, scenario::ScenarioConfig>> configs;
  for (const auto& file : files) {
    auto cfg = scenario::load_scenario_file(file);
    if (!cfg) {
      result.error = file + ": " + cfg.error().to_string();
      result.all_passed = false;
      return result;
    }
    if (!names.insert(cfg->name).second) {
      result.error = "duplicate scenario name '" + cfg->name + "'";
      result.all_passed = false;
      return result;
    }
    if (!filter.empty() &&
        fnmatch(filter.c_str(), cfg->name.c_str(), 0) != 0) {
      continue;
    }
    configs.emplace_back(file, *cfg);
  }

  for (const auto& [file, cfg] : configs) {
    auto t0 = std::chrono::steady_clock::now();
    RunResult r = run_scenario(cfg);
    auto t1 = std::chrono::steady_clock::now();
    SuiteEntry entry;
    entry.name = cfg.name;
    entry.file = file;
    entry.passed = r.passed;
    entry.first_failure = r.first_failure;
    entry.wall_ms = static_cast<uint64_t>(
        std::chrono::duration_cast<std::chrono::milliseconds>(t1 - t0).count());
    if (!entry.passed) result.all_passed = false;
    result.entries.push_back(std::move(entry));
  }
  return result;
}

// ---------------------------------------------------------------------------
// Offline transcript verification
// ---------------------------------------------------------------------------

VerifyResult verify_transcript_lines(const std::vector<std::string>& lines) {
  VerifyResult out;
  if (lines.empty()) return out;

  json meta;
  std::vector<json> parsed;
  for (const auto& line : lines) {
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("type")) return out;
    parsed.push_back(std::move(j));
  }
  if (parsed.front().value("type", "") != "meta") return out;
  meta = parsed.front();
  out.parsed = true;

  adversary::KeyRegistry keys;
  for (const auto& k : meta.value("keys", json::array())) {
    adversary::KeyDerivation d;
    d.key_id = k.value("id", "");
    d.ble_gated = k.value("ble_gated", false);
    for (const auto& i : k.value("inputs", json::array())) {
      d.secret_input_hexes.push_back(i.get<std::string>());
    }
    keys.add(std::move(d));
  }

  adversary::Knowledge knowledge;
  for (const auto& j : parsed) {
    std::string type = j.value("type", "");
    if ((type == "observe" || type == "grant") && j.contains("term")) {
      auto t = Term::from_json(j["term"]);
      if (t) knowledge.ingest(*t);
    }
  }
  knowledge.close(keys);

  bool all_safe = true;
  for (const auto& s : meta.value("secrets", json::array())) {
    std::string name = s.value("name", "");
    auto value = hex_decode(s.value("hex", ""));
    bool leaked = value && knowledge.knows_atom_value(*value);
    if (leaked) all_safe = false;
    out.report_lines.push_back("SECRET " + name + ": " + (leaked ? "UNSAFE" : "SAFE"));
  }

  // Authenticity: every accepted OK envelope must have been sealed by the
  // legitimate holder of the old AID.
  std::set<std::string> expected_sealers;
  for (const auto& s : meta.value("ok_expected_sealers", json::array())) {
    expected_sealers.insert(s.get<std::string>());
  }
  std::map<std::string, std::pair<std::string, std::string>> envelopes;  // digest -> (key, sealer)
  for (const auto& e : meta.value("envelopes", json::array())) {
    envelopes[e.value("digest", "")] = {e.value("key", ""), e.value("sealer", "")};
  }
  for (const auto& acc : meta.value("ok_acceptances", json::array())) {
    std::string digest = acc.value("digest", "");
    auto it = envelopes.find(digest);
    std::string label = digest.substr(0, 12);
    if (it == envelopes.end()) {
      all_safe = false;
      out.report_lines.push_back("PROVENANCE " + label + ": VIOLATION (unknown envelope)");
    } else if (!expected_sealers.contains(it->second.second)) {
      all_safe = false;
      out.report_lines.push_back("PROVENANCE " + label + ": VIOLATION (sealed by " +
                                 it->second.second + ")");
    } else {
      out.report_lines.push_back("PROVENANCE " + label + ": OK (sealed by " +
                                 it->second.second + ")");
    }
  }

  // Transport scan over captured payloads.
  size_t scanned = 0;
  bool scan_clean = true;
  for (const auto& j : parsed) {
    if (j.value("type", "") != "event") continue;
    if (j.value("ch", "") == "https") continue;
    if (!j.contains("payload_hex")) continue;
    auto payload = hex_decode(j["payload_hex"].get<std::string>());
    if (!payload) continue;
    ++scanned;
    for (const auto& s : meta.value("secrets", json::array())) {
      auto value = hex_decode(s.value("hex", ""));
      if (value && contains_bytes(*payload, *value)) {
        scan_clean = false;
        out.report_lines.push_back("SCAN: VIOLATION (" + s.value("name", "") +
                                   " in a non-HTTPS payload)");
      }
    }
  }
  if (scan_clean) {
    out.report_lines.push_back("SCAN: OK (" + std::to_string(scanned) +
                               " non-HTTPS payloads clean)");
  } else {
    all_safe = false;
  }

  out.all_safe = all_safe;
  out.report_lines.push_back(std::string("RESULT: ") + (all_safe ? "SAFE" : "UNSAFE"));
  return out;
}

VerifyResult verify_transcript_file(const std::string& path) {
  VerifyResult bad;
  std::ifstream in(path);
  if (!in) return bad;
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) lines.push_back(line);
  }
  return verify_transcript_lines(lines);
}

}  // namespace proxauth::harness
