#include "proxauth/sim.hpp"

#include <stdexcept>

namespace proxauth::sim {

using nlohmann::json;

std::string BluetoothAddress::str() const {
  static const char* digits = "0123456789ABCDEF";
  std::string out;
  out.reserve(17);
  for (size_t i = 0; i < octets.size(); ++i) {
    if (i) out.push_back(':');
    out.push_back(digits[octets[i] >> 4]);
    out.push_back(digits[octets[i] & 0x0f]);
  }
  return out;
}

std::optional<BluetoothAddress> BluetoothAddress::parse(std::string_view s) {
  if (s.size() != 17) return std::nullopt;
  BluetoothAddress a;
  for (size_t i = 0; i < 6; ++i) {
    size_t off = i * 3;
    if (i > 0 && s[off - 1] != ':') return std::nullopt;
    auto nib = [](char c) -> int {
      if (c >= '0' && c <= '9') return c - '0';
      if (c >= 'A' && c <= 'F') return c - 'A' + 10;
      if (c >= 'a' && c <= 'f') return c - 'a' + 10;
      return -1;
    };
    int hi = nib(s[off]);
    int lo = nib(s[off + 1]);
    if (hi < 0 || lo < 0) return std::nullopt;
    a.octets[i] = static_cast<uint8_t>((hi << 4) | lo);
  }
  return a;
}

std::string_view channel_name(ChannelKind k) {
  switch (k) {
    case ChannelKind::Https: return "https";
    case ChannelKind::Nfc: return "nfc";
    case ChannelKind::BleScan: return "ble";
    case ChannelKind::Local: return "local";
  }
  return "?";
}

void Topology::add_location(const std::string& loc) { locations_.insert(loc); }

void Topology::add_adjacency(const std::string& a, const std::string& b) {
  adjacency_.insert({a, b});
  adjacency_.insert({b, a});
}

Status Topology::place(const std::string& principal, const std::string& loc) {
  if (!locations_.contains(loc)) {
    return Status(Error(Err::ConfigError, "unknown location '" + loc + "'"));
  }
  placement_[principal] = loc;
  return Status::success();
}

Status Topology::move(const std::string& principal, const std::string& loc) {
  if (!placement_.contains(principal)) {
    return Status(Error(Err::ConfigError, "unknown principal '" + principal + "'"));
  }
  return place(principal, loc);
}

std::optional<std::string> Topology::location_of(const std::string& principal) const {
  auto it = placement_.find(principal);
  if (it == placement_.end()) return std::nullopt;
  return it->second;
}

bool Topology::proximate(const std::string& a, const std::string& b) const {
  auto la = location_of(a);
  auto lb = location_of(b);
  if (!la || !lb) return false;
  if (*la == *lb) return true;
  return adjacency_.contains({*la, *lb});
}

void ProvenanceOracle::declare_secret(const std::string& name, ByteView value) {
  for (const auto& s : secrets_) {
    if (s.name == name) return;
  }
  secrets_.push_back({name, Bytes(value.begin(), value.end())});
}

std::string ProvenanceOracle::pw_key_id(ByteView material, const crypto::Salt& salt) {
  Bytes input = concat(material, salt.v, to_bytes("pw"));
  return "pw:" + sha256_hex(input).substr(0, 24);
}

std::string ProvenanceOracle::bt_key_id(std::string_view bt_canonical, ByteView context) {
  Bytes input = concat(to_bytes(bt_canonical), context, to_bytes("bt"));
  return "bt:" + sha256_hex(input).substr(0, 24);
}

std::string ProvenanceOracle::note_pw_key(ByteView material, const crypto::Salt& salt) {
  std::string id = pw_key_id(material, salt);
  adversary::KeyDerivation d;
  d.key_id = id;
  d.secret_input_hexes.push_back(hex_encode(material));
  // Fixed protocol salts are public constants; only per-account salts gate
  // the derivation.
  if (!(salt == crypto::kNonceSalt) && !(salt == crypto::kAppIdSalt) &&
      !(salt == crypto::kBtSalt)) {
    d.secret_input_hexes.push_back(hex_encode(salt.v));
  }
  d.ble_gated = false;
  keys_.add(std::move(d));
  return id;
}

std::string ProvenanceOracle::note_bt_key(std::string_view bt_canonical, ByteView context) {
  std::string id = bt_key_id(bt_canonical, context);
  adversary::KeyDerivation d;
  d.key_id = id;
  d.ble_gated = true;
  keys_.add(std::move(d));
  return id;
}

void ProvenanceOracle::note_envelope(const crypto::EncryptedEnvelope& env,
                                     const std::string& key_id, const std::string& sealer,
                                     adversary::Term body) {
  envelopes_[sha256_hex(env.to_bytes())] = {key_id, sealer, std::move(body)};
}

const ProvenanceOracle::EnvelopeRecord* ProvenanceOracle::find_envelope(
    ByteView wire_bytes) const {
  return find_envelope_by_digest(sha256_hex(wire_bytes));
}

const ProvenanceOracle::EnvelopeRecord* ProvenanceOracle::find_envelope_by_digest(
    const std::string& digest) const {
  auto it = envelopes_.find(digest);
  return it == envelopes_.end() ? nullptr : &it->second;
}

void ProvenanceOracle::note_ok_accepted(const std::string& em,
                                        const crypto::EncryptedEnvelope& env) {
  ok_acceptances_.push_back({em, sha256_hex(env.to_bytes())});
}

Simulation::Simulation(uint64_t seed) : seed_(seed) {}

Csprng& Simulation::rng_for(const std::string& principal) {
  auto it = rngs_.find(principal);
  if (it == rngs_.end()) {
    it = rngs_.emplace(principal, std::make_unique<Csprng>(seed_, "principal:" + principal))
             .first;
  }
  return *it->second;
}

void Simulation::add_principal(const std::string& name, Principal* p) {
  if (principals_.contains(name)) throw std::logic_error("duplicate principal " + name);
  principals_[name] = p;
}

bool Simulation::has_principal(const std::string& name) const {
  return principals_.contains(name);
}

void Simulation::register_radio(const std::string& principal, const BluetoothAddress& addr) {
  radios_[addr.str()] = principal;
}

std::optional<std::string> Simulation::radio_owner(const BluetoothAddress& addr) const {
  auto it = radios_.find(addr.str());
  if (it == radios_.end()) return std::nullopt;
  return it->second;
}

void Simulation::set_crashed(const std::string& principal, bool crashed) {
  if (crashed) {
    crashed_.insert(principal);
  } else {
    crashed_.erase(principal);
  }
  note({{"type", "note"}, {"what", crashed ? "crash" : "restart"}, {"principal", principal}});
}

bool Simulation::is_crashed(const std::string& principal) const {
  return crashed_.contains(principal);
}

Status Simulation::send(ChannelKind kind, const std::string& from, const std::string& to,
                        Bytes payload, uint64_t latency_ms) {
  if (!principals_.contains(to)) {
    return Status(Error(Err::ConfigError, "unknown recipient '" + to + "'"));
  }
  if (kind == ChannelKind::Nfc && !topology_.proximate(from, to)) {
    return Status(Error(Err::NotInProximity, from + " cannot tap " + to));
  }
  Event ev;
  ev.t = clock_ + latency_ms;
  ev.seq = next_seq_++;
  ev.channel = kind;
  ev.from = from;
  ev.to = to;
  ev.payload = std::move(payload);
  queue_.push(std::move(ev));
  return Status::success();
}

void Simulation::schedule_local(const std::string& principal, Bytes payload,
                                uint64_t delay_ms) {
  Event ev;
  ev.t = clock_ + delay_ms;
  ev.seq = next_seq_++;
  ev.channel = ChannelKind::Local;
  ev.from = principal;
  ev.to = principal;
  ev.payload = std::move(payload);
  queue_.push(std::move(ev));
}

bool Simulation::ble_scan(const std::string& scanner, const BluetoothAddress& target) {
  ++counters_.ble_scans;
  bool found = false;
  auto owner = radio_owner(target);
  if (owner && !is_crashed(*owner)) {
    found = topology_.proximate(scanner, *owner);
  }
  transcript_.push_back({{"type", "ble_scan"},
                         {"t", clock_},
                         {"scanner", scanner},
                         {"target", target.str()},
                         {"found", found}});
  return found;
}

Status Simulation::move_principal(const std::string& principal, const std::string& loc) {
  auto st = topology_.move(principal, loc);
  if (st.ok()) {
    note({{"type", "note"}, {"what", "move"}, {"principal", principal}, {"location", loc}});
  }
  return st;
}

void Simulation::record_event(const Event& ev, const char* status) {
  json j{{"type", "event"},
         {"t", ev.t},
         {"seq", ev.seq},
         {"ch", std::string(channel_name(ev.channel))},
         {"from", ev.from},
         {"to", ev.to},
         {"digest", sha256_hex(ev.payload)},
         {"status", status}};
  if (capture_payloads_) j["payload_hex"] = hex_encode(ev.payload);
  transcript_.push_back(std::move(j));
}

size_t Simulation::advance(uint64_t until) {
  if (until < clock_) throw std::logic_error("advance target before current clock");
  size_t delivered = 0;
  while (!queue_.empty() && queue_.top().t <= until) {
    Event ev = queue_.top();
    queue_.pop();
    clock_ = ev.t;
    if (pre_delivery_) pre_delivery_(*this);

    switch (ev.channel) {
      case ChannelKind::Https: ++counters_.https; break;
      case ChannelKind::Nfc: ++counters_.nfc; break;
      case ChannelKind::Local: ++counters_.local; break;
      case ChannelKind::BleScan: break;
    }

    if (is_crashed(ev.to)) {
      record_event(ev, "dropped_crashed");
    } else {
      record_event(ev, "delivered");
      delivered_.push_back(ev);
      auto it = principals_.find(ev.to);
      if (it != principals_.end()) {
        it->second->on_event(*this, ev);
      }
      ++delivered;
      for (auto& hook : post_delivery_) hook(*this, ev);
    }
  }
  clock_ = std::max(clock_, until);
  return delivered;
}

size_t Simulation::run_to_quiescence(uint64_t max_time) {
  size_t delivered = 0;
  while (!queue_.empty() && queue_.top().t <= max_time) {
    delivered += advance(queue_.top().t);
  }
  return delivered;
}

void Simulation::note(json j) {
  if (!j.contains("t")) j["t"] = clock_;
  transcript_.push_back(std::move(j));
}

}  // namespace proxauth::sim
