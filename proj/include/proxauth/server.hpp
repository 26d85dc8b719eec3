#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "proxauth/biometric.hpp"
#include "proxauth/bytes.hpp"
#include "proxauth/crypto.hpp"
#include "proxauth/errors.hpp"
#include "proxauth/messages.hpp"
#include "proxauth/sim.hpp"

namespace proxauth::server {

/// Login-session progression for one account. Transitions follow the login
/// phase strictly; anything else is rejected without a state change.
enum class SessionState { Idle, LoginBegun, AwaitingProximity, AwaitingRotationAck, AwaitingOk };

std::string_view session_state_name(SessionState s);

struct UserRecord {
  std::string em;
  std::string app_id;  // registered first-device principal
  crypto::SecretKey sk;
  Bytes pwd_salt;
  Bytes pwd_hash;  // salted verifier; written at registration, never read after
  crypto::SecretKey aid;
  int aid_generation = 0;
  crypto::Salt salt;
  biometric::FbUrl reg_fburl;

  // Per-login context.
  SessionState state = SessionState::Idle;
  std::optional<crypto::Nonce10> n1;
  std::optional<sim::BluetoothAddress> bt1;
  std::optional<crypto::SessionId> sid;
  std::optional<crypto::ReplayToken> token;       // present only in AwaitingProximity
  std::optional<crypto::ReplayToken> last_token;  // consumed value, kept until session close
  std::optional<biometric::FbUrl> login_fburl;
  std::vector<biometric::FbUrl> login_uploads;  // all uploads this session
  std::optional<crypto::SecretKey> aid_next;
  std::optional<uint64_t> deadline_ms;
  std::string fd_principal;  // who is driving the current login
  std::string desktop;       // submitting second device

  nlohmann::json to_json() const;
};

/// Account records plus registration staging. Optionally file-backed: one
/// JSON document per user, replaced atomically on every commit.
class ServerStore {
 public:
  void set_data_dir(const std::string& dir);
  const std::string& data_dir() const { return data_dir_; }

  UserRecord* find(const std::string& em);
  const UserRecord* find(const std::string& em) const;
  bool contains(const std::string& em) const { return records_.contains(em); }
  void put(UserRecord rec);
  void persist(const UserRecord& rec) const;
  size_t load_all();

  std::map<std::string, UserRecord>& records() { return records_; }
  const std::map<std::string, UserRecord>& records() const { return records_; }

 private:
  std::map<std::string, UserRecord> records_;
  std::string data_dir_;
};

struct ServerConfig {
  double biometric_threshold = biometric::kDefaultThreshold;
  uint64_t session_deadline_ms = 60000;
  bool token_single_use = true;
};

struct RegisterOutcome {
  crypto::Salt salt;
  crypto::EncryptedEnvelope enc_aid;
};

struct MatchOutcome {
  std::string em;
  crypto::SessionId sid;
  sim::BluetoothAddress bt1;
  crypto::EncryptedEnvelope match_env;
};

struct ProximityOutcome {
  std::string em;
  crypto::SessionId sid;
  bool regrant = false;  // single-use disabled and a consumed token re-accepted
  crypto::Salt salt;
  crypto::EncryptedEnvelope rotation_env;  // unset when regrant
};

struct LoginSuccessOutcome {
  std::string em;
  crypto::SessionId sid;
};

/// The verifier: account registry, both protocol phases' server side,
/// AID rotation, session deadlines and replay-token accounting. Pure of any
/// transport concern; `now` is always passed in. Also usable as a simulation
/// principal via on_event.
class VerifierServer : public sim::Principal {
 public:
  VerifierServer(std::string name, ServerConfig config, uint64_t rng_seed);

  const std::string& name() const { return name_; }
  ServerConfig& config() { return config_; }
  ServerStore& store() { return store_; }
  const ServerStore& store() const { return store_; }
  biometric::EmbeddingStore& embeddings() { return embeddings_; }
  void set_oracle(sim::ProvenanceOracle* oracle) { oracle_ = oracle; }

  /// TLS pre-share abstraction: the app instance and the server agree on SK
  /// before registration ever starts.
  void provision_app_secret(const std::string& app_id, const crypto::SecretKey& sk);
  std::optional<crypto::SecretKey> provisioned_secret(const std::string& app_id) const;

  // -- Registration phase -------------------------------------------------
  Expected<RegisterOutcome> register_user(const std::string& em, const std::string& pwd,
                                          const biometric::FaceEmbedding& embedding,
                                          const std::string& app_id);
  Status confirm_registration(const std::string& em, const crypto::EncryptedEnvelope& env);

  // -- Login phase ----------------------------------------------------------
  Expected<biometric::FbUrl> upload_login_embedding(const std::string& em,
                                                    const biometric::FaceEmbedding& embedding);
  Status update_login_context(const std::string& em, const crypto::Nonce10& n1,
                              const sim::BluetoothAddress& bt1, uint64_t now,
                              const std::string& fd_principal);
  Expected<crypto::Salt> begin_login(const std::string& em,
                                     const crypto::EncryptedEnvelope& outer, uint64_t now);
  Expected<MatchOutcome> verify_auth_string(const crypto::EncryptedEnvelope& env,
                                            const sim::BluetoothAddress& bt2, uint64_t now,
                                            const std::string& desktop);
  Expected<ProximityOutcome> verify_proximity_token(const crypto::EncryptedEnvelope& env,
                                                    uint64_t now);
  Expected<LoginSuccessOutcome> verify_ok(const std::string& em,
                                          const crypto::EncryptedEnvelope& env, uint64_t now);

  size_t expire_sessions(uint64_t now);

  // -- Simulation adapter ---------------------------------------------------
  void on_event(sim::Simulation& sim, const sim::Event& ev) override;

  /// Observable state-transition log for the fuzz harness: (em, from, to).
  struct Transition {
    std::string em;
    SessionState from;
    SessionState to;
  };
  const std::vector<Transition>& transitions() const { return transitions_; }
  const std::vector<LoginSuccessOutcome>& login_successes() const { return login_successes_; }
  size_t consumed_token_count() const { return consumed_tokens_.size(); }

 private:
  struct PendingRegistration {
    UserRecord record;
  };

  void set_state(UserRecord& rec, SessionState next);
  void reset_session(UserRecord& rec);
  void touch_deadline(UserRecord& rec, uint64_t now);
  bool expired(const UserRecord& rec, uint64_t now) const;
  crypto::KeyPair record_pw_keys(const UserRecord& rec) const;
  void declare_aid_secret(const UserRecord& rec);

  std::string name_;
  ServerConfig config_;
  Csprng rng_;
  ServerStore store_;
  biometric::EmbeddingStore embeddings_;
  std::map<std::string, PendingRegistration> pending_;
  std::map<std::string, crypto::SecretKey> provisioned_;
  std::set<Bytes> consumed_tokens_;
  std::vector<Transition> transitions_;
  std::vector<LoginSuccessOutcome> login_successes_;
  sim::ProvenanceOracle* oracle_ = nullptr;
};

}  // namespace proxauth::server
