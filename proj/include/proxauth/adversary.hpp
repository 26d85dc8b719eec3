#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "proxauth/bytes.hpp"

namespace proxauth::adversary {

/// Symbolic term over observed traffic: atoms (raw values), pairs, envelopes
/// keyed by a registered key id, and bare key terms.
struct Term {
  enum class Type { Atom, Pair, Enc, Key };

  Type type = Type::Atom;
  std::string label;           // atom name or key id
  Bytes value;                 // atom payload
  std::vector<Term> children;  // Pair: 2 entries; Enc: 1 body

  static Term atom(std::string name, Bytes v);
  static Term pair(Term a, Term b);
  static Term pair_all(std::vector<Term> parts);  // right-nested
  static Term enc(std::string key_id, Term body);
  static Term key(std::string key_id);

  bool operator==(const Term&) const = default;

  /// Canonical string form used for set membership.
  std::string fingerprint() const;

  nlohmann::json to_json() const;
  static std::optional<Term> from_json(const nlohmann::json& j);
};

/// How a key pair was derived, for deciding attacker derivability. A key is
/// derivable when every secret input value is known — except BLE-bound keys,
/// which model the client Bluetooth stack: constructing them requires a
/// physical rendezvous with the address owner, so knowing the inputs as data
/// is not enough. That gate is the executable stand-in for the scheme's
/// browser-API proximity argument.
struct KeyDerivation {
  std::string key_id;
  std::vector<std::string> secret_input_hexes;
  bool ble_gated = false;
};

class KeyRegistry {
 public:
  void add(KeyDerivation d);
  const KeyDerivation* find(const std::string& key_id) const;
  const std::map<std::string, KeyDerivation>& all() const { return keys_; }

 private:
  std::map<std::string, KeyDerivation> keys_;
};

/// Dolev-Yao knowledge set, closed under pair projection and decryption with
/// derivable keys. Closure is a least fixed point; terms only shrink, so it
/// terminates.
class Knowledge {
 public:
  void ingest(const Term& t);
  void close(const KeyRegistry& keys);

  bool knows_atom_value(ByteView value) const;
  bool knows_key(const std::string& key_id) const;
  bool contains(const Term& t) const;

  /// Can the attacker synthesize this term (build pairs / encrypt with
  /// derivable keys / replay known terms)?
  bool can_derive(const Term& t, const KeyRegistry& keys) const;

  size_t term_count() const { return terms_.size(); }
  size_t envelope_term_count() const;
  const std::vector<Term>& terms() const { return terms_; }

 private:
  bool key_derivable(const std::string& key_id, const KeyRegistry& keys) const;

  std::vector<Term> terms_;
  std::set<std::string> fingerprints_;
  std::set<std::string> atom_value_hexes_;
  std::set<std::string> granted_key_ids_;
};

/// Attacker capability flags, fixed per scenario.
struct Capabilities {
  bool phish_ui_observe = false;
  bool rt_relay = false;
  bool cr_remote_desktop = false;
  bool replay = false;
  bool spoof_app = false;
  bool sniff_bt_addr = false;
};

struct SecretDecl {
  std::string name;
  Bytes value;
};

struct SecrecyVerdict {
  std::string name;
  bool leaked = false;
};

struct SecrecyReport {
  std::vector<SecrecyVerdict> verdicts;
  bool all_safe() const;
  std::vector<std::string> leaked_names() const;
};

/// Evaluates which declared secrets the (closed) knowledge contains.
SecrecyReport secrecy_report(const Knowledge& k, const std::vector<SecretDecl>& secrets);

}  // namespace proxauth::adversary
