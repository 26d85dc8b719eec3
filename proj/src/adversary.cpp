#include "proxauth/adversary.hpp"

#include <algorithm>
#include <stdexcept>

namespace proxauth::adversary {

using nlohmann::json;

Term Term::atom(std::string name, Bytes v) {
  Term t;
  t.type = Type::Atom;
  t.label = std::move(name);
  t.value = std::move(v);
  return t;
}

Term Term::pair(Term a, Term b) {
  Term t;
  t.type = Type::Pair;
  t.children.push_back(std::move(a));
  t.children.push_back(std::move(b));
  return t;
}

Term Term::pair_all(std::vector<Term> parts) {
  if (parts.empty()) throw std::invalid_argument("pair_all needs at least one term");
  Term t = std::move(parts.back());
  parts.pop_back();
  while (!parts.empty()) {
    t = pair(std::move(parts.back()), std::move(t));
    parts.pop_back();
  }
  return t;
}

Term Term::enc(std::string key_id, Term body) {
  Term t;
  t.type = Type::Enc;
  t.label = std::move(key_id);
  t.children.push_back(std::move(body));
  return t;
}

Term Term::key(std::string key_id) {
  Term t;
  t.type = Type::Key;
  t.label = std::move(key_id);
  return t;
}

std::string Term::fingerprint() const {
  switch (type) {
    case Type::Atom:
      return "a(" + hex_encode(value) + ")";
    case Type::Pair:
      return "p(" + children[0].fingerprint() + "," + children[1].fingerprint() + ")";
    case Type::Enc:
      return "e(" + label + "," + children[0].fingerprint() + ")";
    case Type::Key:
      return "k(" + label + ")";
  }
  return "?";
}

json Term::to_json() const {
  json j;
  switch (type) {
    case Type::Atom:
      j["atom"] = {{"name", label}, {"hex", hex_encode(value)}};
      break;
    case Type::Pair:
      j["pair"] = json::array({children[0].to_json(), children[1].to_json()});
      break;
    case Type::Enc:
      j["enc"] = {{"key", label}, {"body", children[0].to_json()}};
      break;
    case Type::Key:
      j["key"] = label;
      break;
  }
  return j;
}

std::optional<Term> Term::from_json(const json& j) {
  if (!j.is_object()) return std::nullopt;
  if (j.contains("atom")) {
    const auto& a = j["atom"];
    if (!a.is_object() || !a.contains("name") || !a.contains("hex")) return std::nullopt;
    auto v = hex_decode(a["hex"].get<std::string>());
    if (!v) return std::nullopt;
    return atom(a["name"].get<std::string>(), *v);
  }
  if (j.contains("pair")) {
    const auto& p = j["pair"];
    if (!p.is_array() || p.size() != 2) return std::nullopt;
    auto a = from_json(p[0]);
    auto b = from_json(p[1]);
    if (!a || !b) return std::nullopt;
    return pair(std::move(*a), std::move(*b));
  }
  if (j.contains("enc")) {
    const auto& e = j["enc"];
    if (!e.is_object() || !e.contains("key") || !e.contains("body")) return std::nullopt;
    auto body = from_json(e["body"]);
    if (!body) return std::nullopt;
    return enc(e["key"].get<std::string>(), std::move(*body));
  }
  if (j.contains("key")) {
    return key(j["key"].get<std::string>());
  }
  return std::nullopt;
}

void KeyRegistry::add(KeyDerivation d) {
  keys_.emplace(d.key_id, std::move(d));
}

const KeyDerivation* KeyRegistry::find(const std::string& key_id) const {
  auto it = keys_.find(key_id);
  return it == keys_.end() ? nullptr : &it->second;
}

void Knowledge::ingest(const Term& t) {
  if (fingerprints_.insert(t.fingerprint()).second) {
    terms_.push_back(t);
    if (t.type == Term::Type::Atom) atom_value_hexes_.insert(hex_encode(t.value));
    if (t.type == Term::Type::Key) granted_key_ids_.insert(t.label);
  }
}

bool Knowledge::key_derivable(const std::string& key_id, const KeyRegistry& keys) const {
  if (granted_key_ids_.contains(key_id)) return true;
  const KeyDerivation* d = keys.find(key_id);
  if (d == nullptr || d->ble_gated) return false;
  return std::all_of(d->secret_input_hexes.begin(), d->secret_input_hexes.end(),
                     [&](const std::string& h) { return atom_value_hexes_.contains(h); });
}

void Knowledge::close(const KeyRegistry& keys) {
  bool changed = true;
  while (changed) {
    changed = false;
    // Index grows while iterating; new terms are picked up next pass.
    std::vector<Term> to_add;
    for (const Term& t : terms_) {
      if (t.type == Term::Type::Pair) {
        for (const Term& c : t.children) {
          if (!fingerprints_.contains(c.fingerprint())) to_add.push_back(c);
        }
      } else if (t.type == Term::Type::Enc) {
        if (key_derivable(t.label, keys) &&
            !fingerprints_.contains(t.children[0].fingerprint())) {
          to_add.push_back(t.children[0]);
        }
      }
    }
    for (Term& t : to_add) {
      ingest(t);
      changed = true;
    }
  }
}

bool Knowledge::knows_atom_value(ByteView value) const {
  return atom_value_hexes_.contains(hex_encode(value));
}

bool Knowledge::knows_key(const std::string& key_id) const {
  return granted_key_ids_.contains(key_id);
}

bool Knowledge::contains(const Term& t) const {
  return fingerprints_.contains(t.fingerprint());
}

bool Knowledge::can_derive(const Term& t, const KeyRegistry& keys) const {
  if (fingerprints_.contains(t.fingerprint())) return true;
  switch (t.type) {
    case Term::Type::Atom:
      return atom_value_hexes_.contains(hex_encode(t.value));
    case Term::Type::Pair:
      return can_derive(t.children[0], keys) && can_derive(t.children[1], keys);
    case Term::Type::Enc:
      return key_derivable(t.label, keys) && can_derive(t.children[0], keys);
    case Term::Type::Key:
      return key_derivable(t.label, keys);
  }
  return false;
}

size_t Knowledge::envelope_term_count() const {
  size_t n = 0;
  for (const Term& t : terms_) {
    if (t.type == Term::Type::Enc) ++n;
  }
  return n;
}

bool SecrecyReport::all_safe() const {
  return std::none_of(verdicts.begin(), verdicts.end(),
                      [](const SecrecyVerdict& v) { return v.leaked; });
}

std::vector<std::string> SecrecyReport::leaked_names() const {
  std::vector<std::string> out;
  for (const auto& v : verdicts) {
    if (v.leaked) out.push_back(v.name);
  }
  return out;
}

SecrecyReport secrecy_report(const Knowledge& k, const std::vector<SecretDecl>& secrets) {
  SecrecyReport report;
  for (const auto& s : secrets) {
    report.verdicts.push_back({s.name, k.knows_atom_value(s.value)});
  }
  return report;
}

}  // namespace proxauth::adversary
