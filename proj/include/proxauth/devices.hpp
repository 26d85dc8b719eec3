#pragma once

#include <optional>
#include <string>
#include <vector>

#include "proxauth/biometric.hpp"
#include "proxauth/bytes.hpp"
#include "proxauth/crypto.hpp"
#include "proxauth/errors.hpp"
#include "proxauth/messages.hpp"
#include "proxauth/sim.hpp"

namespace proxauth::devices {

/// What the phone may keep across restarts. Plaintext AID, salt, nonce,
/// session id or auth string never land here; the storage-inspection hook in
/// the harness enforces that after every delivery.
struct FirstDevicePersistent {
  bool registered = false;
  std::optional<crypto::EncryptedEnvelope> enc_aid_blob;
  /// Previous sealed AID, kept from rotation until the final success message
  /// so a crash between blob replacement and the OK confirmation cannot lock
  /// the account out.
  std::optional<crypto::EncryptedEnvelope> rotation_journal;

  nlohmann::json to_json() const;
  Bytes serialized() const;
};

enum class FdPhase {
  Idle,
  RegAwaitChallenge,
  RegAwaitResult,
  LoginAwaitUploadAck,
  LoginAwaitCtxAck,
  LoginAwaitSalt,
  LoginAwaitRotation,
  LoginAwaitResult,
};

/// The phone app: holds SK and the sealed-AID blob, runs the registration
/// phase and the phone side of the login phase, transfers the staged auth
/// string over NFC, and rotates its blob when offered a fresh AID.
class FirstDevice : public sim::Principal {
 public:
  FirstDevice(std::string name, std::string server, std::string em, std::string pwd,
              crypto::SecretKey sk, sim::BluetoothAddress bt1,
              biometric::IdentityProfile profile);

  const std::string& name() const { return name_; }
  const sim::BluetoothAddress& bt1() const { return bt1_; }
  const crypto::SecretKey& sk() const { return sk_; }
  const std::string& em() const { return em_; }

  const FirstDevicePersistent& persistent() const { return persistent_; }
  FirstDevicePersistent& mutable_persistent() { return persistent_; }
  FdPhase phase() const { return phase_; }

  void set_app_logged_in(bool v) { app_logged_in_ = v; }
  void set_auto_tap(bool v) { auto_tap_ = v; }
  /// Attack-tooling agents do not register their working values as protocol
  /// secrets.
  void set_declare_secrets(bool v) { declare_secrets_ = v; }
  /// Fault-injection point: die after persisting the rotated blob but before
  /// sending the OK confirmation.
  void set_crash_between_rotation_persist_and_ok(bool v) { crash_mid_rotation_ = v; }

  void start_registration(sim::Simulation& sim);
  Status start_login(sim::Simulation& sim, const std::string& desktop);
  Status nfc_tap(sim::Simulation& sim);

  void crash(sim::Simulation& sim);
  void restart(sim::Simulation& sim);

  bool registered() const { return persistent_.registered; }
  bool staged() const { return pending_auth_string_.has_value(); }
  int completed_logins() const { return completed_logins_; }
  bool last_login_ok() const { return last_login_ok_; }
  const std::optional<Error>& last_error() const { return last_error_; }

  void on_event(sim::Simulation& sim, const sim::Event& ev) override;

 private:
  void handle_register_challenge(sim::Simulation& sim, const messages::ProtocolMessage& m);
  void handle_register_result(sim::Simulation& sim, const messages::ProtocolMessage& m);
  void handle_upload_ack(sim::Simulation& sim, const messages::ProtocolMessage& m);
  void handle_ctx_ack(sim::Simulation& sim, const messages::ProtocolMessage& m);
  void handle_login_salt(sim::Simulation& sim, const messages::ProtocolMessage& m);
  void handle_rotation_offer(sim::Simulation& sim, const messages::ProtocolMessage& m);
  void handle_login_result(sim::Simulation& sim, const messages::ProtocolMessage& m);

  void send_msg(sim::Simulation& sim, messages::Kind kind, const std::string& to,
                std::map<std::string, std::string> body, sim::ChannelKind ch,
                uint64_t latency);
  void abort_login(sim::Simulation& sim, Error e);
  void clear_volatile();

  std::string name_;
  std::string server_;
  std::string em_;
  std::string pwd_;
  crypto::SecretKey sk_;
  sim::BluetoothAddress bt1_;
  biometric::IdentityProfile profile_;

  FirstDevicePersistent persistent_;

  // Volatile login context; a crash wipes all of it.
  FdPhase phase_ = FdPhase::Idle;
  std::optional<crypto::Nonce10> n1_;
  std::optional<crypto::SessionId> sid_;
  std::optional<crypto::Salt> salt_;
  std::optional<biometric::FbUrl> login_fburl_;
  std::optional<Bytes> pending_auth_string_;
  std::string tap_target_;
  bool fallback_tried_ = false;

  bool app_logged_in_ = true;
  bool auto_tap_ = true;
  bool declare_secrets_ = true;
  uint64_t login_epoch_ = 0;  // invalidates stale local timers
  bool crash_mid_rotation_ = false;
  int completed_logins_ = 0;
  bool last_login_ok_ = false;
  std::optional<Error> last_error_;
};

enum class SdMode { Honest, PhishPage, RemoteControl };
enum class SdPhase { IdleState, AwaitMatch, Scanning, AwaitResult };

/// The desktop: receives the NFC-tapped auth string, submits it with its own
/// Bluetooth address, and answers the MATCH challenge only after a successful
/// proximity scan for the phone's address.
class SecondDevice : public sim::Principal {
 public:
  SecondDevice(std::string name, std::string server, sim::BluetoothAddress bt2);

  const std::string& name() const { return name_; }
  const sim::BluetoothAddress& bt2() const { return bt2_; }

  void set_mode(SdMode m) { mode_ = m; }
  SdMode mode() const { return mode_; }
  /// Remote operator (for compromised or attacker-driven machines): an
  /// AuthStringTransfer arriving over HTTPS is accepted from this principal
  /// only, modeling remote input injection into a legitimate client.
  void set_operator_principal(std::string op) { operator_ = std::move(op); }
  /// Positive-control toggle: skip the BLE proximity gate.
  void set_enforce_proximity(bool v) { enforce_proximity_ = v; }

  bool has_auth_string() const { return received_auth_string_.has_value(); }
  const std::optional<Bytes>& received_auth_string() const { return received_auth_string_; }
  std::optional<crypto::SessionId> logged_in_sid() const { return logged_in_sid_; }
  const std::optional<Error>& last_error() const { return last_error_; }
  SdPhase phase() const { return phase_; }

  void on_event(sim::Simulation& sim, const sim::Event& ev) override;

 private:
  void submit_auth_string(sim::Simulation& sim);
  void send_proof(sim::Simulation& sim);
  void clear_session_state();

  std::string name_;
  std::string server_;
  sim::BluetoothAddress bt2_;
  SdMode mode_ = SdMode::Honest;
  std::string operator_;
  bool enforce_proximity_ = true;

  SdPhase phase_ = SdPhase::IdleState;
  std::optional<Bytes> received_auth_string_;
  std::optional<crypto::SessionId> sid_;
  std::optional<crypto::ReplayToken> token_;
  std::optional<sim::BluetoothAddress> scan_target_;
  std::optional<crypto::SessionId> logged_in_sid_;
  std::optional<Error> last_error_;
};

}  // namespace proxauth::devices
