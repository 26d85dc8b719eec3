#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "proxauth/adversary.hpp"
#include "proxauth/bytes.hpp"
#include "proxauth/crypto.hpp"
#include "proxauth/errors.hpp"
#include "proxauth/rng.hpp"

namespace proxauth::sim {

struct BluetoothAddress {
  std::array<uint8_t, 6> octets{};

  bool operator==(const BluetoothAddress&) const = default;
  auto operator<=>(const BluetoothAddress&) const = default;

  /// Canonical form: "AA:BB:CC:DD:EE:FF", uppercase hex.
  std::string str() const;
  static std::optional<BluetoothAddress> parse(std::string_view s);
};

enum class ChannelKind { Https, Nfc, BleScan, Local };

std::string_view channel_name(ChannelKind k);

struct Event {
  uint64_t t = 0;
  uint64_t seq = 0;
  ChannelKind channel = ChannelKind::Https;
  std::string from;
  std::string to;
  Bytes payload;
};

class Simulation;

class Principal {
 public:
  virtual ~Principal() = default;
  virtual void on_event(Simulation& sim, const Event& ev) = 0;
};

/// Named places plus a placement map. Proximity defaults to same-location;
/// extra adjacency pairs can join locations.
class Topology {
 public:
  void add_location(const std::string& loc);
  void add_adjacency(const std::string& a, const std::string& b);
  Status place(const std::string& principal, const std::string& loc);
  Status move(const std::string& principal, const std::string& loc);
  std::optional<std::string> location_of(const std::string& principal) const;
  bool proximate(const std::string& a, const std::string& b) const;

 private:
  std::set<std::string> locations_;
  std::map<std::string, std::string> placement_;
  std::set<std::pair<std::string, std::string>> adjacency_;
};

struct Timings {
  uint64_t https_ms = 20;
  uint64_t nfc_ms = 100;
  uint64_t ble_scan_ms = 800;
  uint64_t biometric_match_ms = 50;
  uint64_t session_deadline_ms = 60000;
};

/// Verification side-channel, invisible to agents: who sealed which envelope
/// under which key, how keys derive from secrets, and which values count as
/// secrets. Test oracles and the transcript verifier read it; protocol logic
/// never does.
class ProvenanceOracle {
 public:
  void declare_secret(const std::string& name, ByteView value);
  const std::vector<adversary::SecretDecl>& secrets() const { return secrets_; }

  /// Registers keys derived via derive_key_from_password and returns the
  /// key id (stable across principals for identical inputs).
  std::string note_pw_key(ByteView material, const crypto::Salt& salt);
  /// Registers a BLE-bound key (gated: never derivable from data alone).
  std::string note_bt_key(std::string_view bt_canonical, ByteView context);

  static std::string pw_key_id(ByteView material, const crypto::Salt& salt);
  static std::string bt_key_id(std::string_view bt_canonical, ByteView context);

  const adversary::KeyRegistry& keys() const { return keys_; }

  struct EnvelopeRecord {
    std::string key_id;
    std::string sealer;
    adversary::Term body;
  };

  void note_envelope(const crypto::EncryptedEnvelope& env, const std::string& key_id,
                     const std::string& sealer, adversary::Term body);
  const EnvelopeRecord* find_envelope(ByteView wire_bytes) const;
  const EnvelopeRecord* find_envelope_by_digest(const std::string& digest) const;
  const std::map<std::string, EnvelopeRecord>& envelopes() const { return envelopes_; }

  struct OkAcceptance {
    std::string em;
    std::string envelope_digest;
  };
  void note_ok_accepted(const std::string& em, const crypto::EncryptedEnvelope& env);
  const std::vector<OkAcceptance>& ok_acceptances() const { return ok_acceptances_; }

  uint64_t next_serial() { return serial_++; }

 private:
  std::vector<adversary::SecretDecl> secrets_;
  adversary::KeyRegistry keys_;
  std::map<std::string, EnvelopeRecord> envelopes_;
  std::vector<OkAcceptance> ok_acceptances_;
  uint64_t serial_ = 0;
};

/// Deterministic discrete-event world: virtual clock in milliseconds, a
/// totally ordered event queue (time, then insertion sequence), per-principal
/// seeded RNG streams, and a JSON-lines transcript of everything delivered.
class Simulation {
 public:
  explicit Simulation(uint64_t seed);

  uint64_t now() const { return clock_; }
  uint64_t seed() const { return seed_; }

  Topology& topology() { return topology_; }
  const Topology& topology() const { return topology_; }
  Timings& timings() { return timings_; }
  const Timings& timings() const { return timings_; }
  ProvenanceOracle& oracle() { return oracle_; }
  const ProvenanceOracle& oracle() const { return oracle_; }

  Csprng& rng_for(const std::string& principal);

  void add_principal(const std::string& name, Principal* p);
  bool has_principal(const std::string& name) const;

  void register_radio(const std::string& principal, const BluetoothAddress& addr);
  std::optional<std::string> radio_owner(const BluetoothAddress& addr) const;

  void set_crashed(const std::string& principal, bool crashed);
  bool is_crashed(const std::string& principal) const;

  /// Enqueues a delivery at now + latency. NFC requires sender/receiver
  /// proximity at send time and refuses otherwise.
  Status send(ChannelKind kind, const std::string& from, const std::string& to,
              Bytes payload, uint64_t latency_ms);

  /// Self-scheduled continuation for an agent (timers, scan completion).
  void schedule_local(const std::string& principal, Bytes payload, uint64_t delay_ms);

  /// Synchronous BLE presence query, logged in the transcript.
  bool ble_scan(const std::string& scanner, const BluetoothAddress& target);

  Status move_principal(const std::string& principal, const std::string& loc);

  /// Delivers every event with t <= until (closed interval) in deterministic
  /// order. The clock lands on max(clock, until).
  size_t advance(uint64_t until);

  /// Runs until the queue drains or the next event lies beyond max_time.
  size_t run_to_quiescence(uint64_t max_time = UINT64_MAX / 2);

  bool queue_empty() const { return queue_.empty(); }

  using Hook = std::function<void(Simulation&)>;
  using EventHook = std::function<void(Simulation&, const Event&)>;
  void set_pre_delivery_hook(Hook h) { pre_delivery_ = std::move(h); }
  void add_post_delivery_hook(EventHook h) { post_delivery_.push_back(std::move(h)); }

  void set_capture_payloads(bool v) { capture_payloads_ = v; }

  void note(nlohmann::json j);
  const std::vector<nlohmann::json>& transcript() const { return transcript_; }
  const std::vector<Event>& delivered_events() const { return delivered_; }

  struct ChannelCounters {
    uint64_t https = 0;
    uint64_t nfc = 0;
    uint64_t ble_scans = 0;
    uint64_t local = 0;
  };
  const ChannelCounters& counters() const { return counters_; }

 private:
  struct QueueCmp {
    bool operator()(const Event& a, const Event& b) const {
      if (a.t != b.t) return a.t > b.t;
      return a.seq > b.seq;
    }
  };

  void record_event(const Event& ev, const char* status);

  uint64_t seed_;
  uint64_t clock_ = 0;
  uint64_t next_seq_ = 0;
  Topology topology_;
  Timings timings_;
  ProvenanceOracle oracle_;
  std::priority_queue<Event, std::vector<Event>, QueueCmp> queue_;
  std::map<std::string, Principal*> principals_;
  std::map<std::string, std::unique_ptr<Csprng>> rngs_;
  std::map<std::string, std::string> radios_;  // canonical addr -> principal
  std::set<std::string> crashed_;
  Hook pre_delivery_;
  std::vector<EventHook> post_delivery_;
  bool capture_payloads_ = false;
  std::vector<nlohmann::json> transcript_;
  std::vector<Event> delivered_;
  ChannelCounters counters_;
};

}  // namespace proxauth::sim
