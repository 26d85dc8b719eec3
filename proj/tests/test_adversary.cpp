#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "proxauth/adversary.hpp"

using namespace proxauth;
using adversary::KeyDerivation;
using adversary::KeyRegistry;
using adversary::Knowledge;
using adversary::Term;

namespace {

Term secret_atom() { return Term::atom("secret", to_bytes("the-secret-value")); }

KeyRegistry registry_with(const std::string& id, std::vector<std::string> inputs,
                          bool gated = false) {
  KeyRegistry reg;
  reg.add({id, std::move(inputs), gated});
  return reg;
}

}  // namespace

TEST_CASE("terms roundtrip through json") {
  Term t = Term::pair(Term::atom("a", to_bytes("xyz")),
                      Term::enc("k9", Term::pair(Term::key("k1"),
                                                 Term::atom("b", {0x01, 0x02}))));
  auto back = Term::from_json(t.to_json());
  REQUIRE(back.has_value());
  CHECK(*back == t);
  CHECK(back->fingerprint() == t.fingerprint());
}

TEST_CASE("pair_all right-nests") {
  Term t = Term::pair_all({Term::atom("a", {1}), Term::atom("b", {2}), Term::atom("c", {3})});
  REQUIRE(t.type == Term::Type::Pair);
  CHECK(t.children[0].label == "a");
  CHECK(t.children[1].type == Term::Type::Pair);
}

TEST_CASE("decryption rule: enc(k, s) plus key(k) yields s") {
  KeyRegistry reg;
  Knowledge k;
  k.ingest(Term::enc("k1", secret_atom()));
  k.ingest(Term::key("k1"));
  k.close(reg);
  CHECK(k.knows_atom_value(to_bytes("the-secret-value")));
}

TEST_CASE("an envelope without the key stays sealed") {
  KeyRegistry reg;
  Knowledge k;
  k.ingest(Term::enc("k1", secret_atom()));
  k.close(reg);
  CHECK_FALSE(k.knows_atom_value(to_bytes("the-secret-value")));
}

TEST_CASE("pair projection exposes both members") {
  KeyRegistry reg;
  Knowledge k;
  k.ingest(Term::pair(Term::atom("a", {0xaa}), Term::atom("b", {0xbb})));
  k.close(reg);
  CHECK(k.knows_atom_value(Bytes{0xaa}));
  CHECK(k.knows_atom_value(Bytes{0xbb}));
}

TEST_CASE("keys derive from known secret inputs unless BLE-gated") {
  Bytes material = to_bytes("key-material");
  KeyRegistry reg = registry_with("kd", {hex_encode(material)});

  SUBCASE("material known: envelope opens") {
    Knowledge k;
    k.ingest(Term::atom("m", material));
    k.ingest(Term::enc("kd", secret_atom()));
    k.close(reg);
    CHECK(k.knows_atom_value(to_bytes("the-secret-value")));
  }

  SUBCASE("material unknown: sealed") {
    Knowledge k;
    k.ingest(Term::enc("kd", secret_atom()));
    k.close(reg);
    CHECK_FALSE(k.knows_atom_value(to_bytes("the-secret-value")));
  }

  SUBCASE("several inputs: all must be known") {
    KeyRegistry both = registry_with("kd2", {hex_encode(material), hex_encode(to_bytes("salt"))});
    Knowledge k;
    k.ingest(Term::atom("m", material));
    k.ingest(Term::enc("kd2", secret_atom()));
    k.close(both);
    CHECK_FALSE(k.knows_atom_value(to_bytes("the-secret-value")));
    k.ingest(Term::atom("s", to_bytes("salt")));
    k.close(both);
    CHECK(k.knows_atom_value(to_bytes("the-secret-value")));
  }

  SUBCASE("a BLE-gated key never derives from data") {
    KeyRegistry gated = registry_with("kb", {}, /*gated=*/true);
    Knowledge k;
    k.ingest(Term::atom("m", material));
    k.ingest(Term::enc("kb", secret_atom()));
    k.close(gated);
    CHECK_FALSE(k.knows_atom_value(to_bytes("the-secret-value")));
    // An explicit key grant still opens it (honest holders work this way).
    k.ingest(Term::key("kb"));
    k.close(gated);
    CHECK(k.knows_atom_value(to_bytes("the-secret-value")));
  }
}

TEST_CASE("closure is monotone and idempotent") {
  Bytes material = to_bytes("m");
  KeyRegistry reg = registry_with("k", {hex_encode(material)});

  Knowledge k;
  k.ingest(Term::pair(Term::atom("m", material),
                      Term::enc("k", Term::pair(secret_atom(), Term::atom("x", {7})))));
  k.close(reg);
  size_t after_first = k.term_count();
  CHECK(k.knows_atom_value(to_bytes("the-secret-value")));
  CHECK(k.knows_atom_value(Bytes{7}));

  k.close(reg);
  CHECK(k.term_count() == after_first);  // idempotent

  // Monotone: adding a term can only grow the closure.
  k.ingest(Term::atom("new", {9}));
  k.close(reg);
  CHECK(k.term_count() >= after_first + 1);
  CHECK(k.knows_atom_value(to_bytes("the-secret-value")));
}

TEST_CASE("nested encryption peels only as keys become derivable") {
  Bytes outer_key = to_bytes("outer");
  Bytes inner_key = to_bytes("inner");
  KeyRegistry reg;
  reg.add({"ko", {hex_encode(outer_key)}, false});
  reg.add({"ki", {hex_encode(inner_key)}, false});

  Knowledge k;
  k.ingest(Term::enc("ko", Term::pair(Term::atom("ik", inner_key),
                                      Term::enc("ki", secret_atom()))));
  k.close(reg);
  CHECK_FALSE(k.knows_atom_value(to_bytes("the-secret-value")));

  // Learning the outer key cascades: the inner key is inside the outer
  // envelope, so the secret falls out after one more closure pass.
  k.ingest(Term::atom("ok", outer_key));
  k.close(reg);
  CHECK(k.knows_atom_value(to_bytes("the-secret-value")));
}

TEST_CASE("can_derive covers synthesis with known keys") {
  Bytes material = to_bytes("m");
  KeyRegistry reg = registry_with("k", {hex_encode(material)});
  Knowledge k;
  k.ingest(Term::atom("m", material));
  k.ingest(Term::atom("payload", {0x42}));
  k.close(reg);

  CHECK(k.can_derive(Term::enc("k", Term::atom("payload", {0x42})), reg));
  CHECK(k.can_derive(Term::pair(Term::atom("m", material), Term::atom("p", {0x42})), reg));
  CHECK_FALSE(k.can_derive(Term::enc("unknown-key", Term::atom("p", {0x42})), reg));
  CHECK_FALSE(k.can_derive(Term::atom("other", {0x43}), reg));
}

TEST_CASE("secrecy report lists exactly the leaked values") {
  KeyRegistry reg;
  Knowledge k;
  k.ingest(Term::atom("x", to_bytes("leaked-value")));
  k.close(reg);

  std::vector<adversary::SecretDecl> secrets = {
      {"secret-a", to_bytes("leaked-value")},
      {"secret-b", to_bytes("still-safe")},
  };
  auto report = adversary::secrecy_report(k, secrets);
  REQUIRE(report.verdicts.size() == 2);
  CHECK(report.verdicts[0].leaked);
  CHECK_FALSE(report.verdicts[1].leaked);
  CHECK_FALSE(report.all_safe());
  CHECK(report.leaked_names() == std::vector<std::string>{"secret-a"});

  auto empty_report = adversary::secrecy_report(Knowledge{}, secrets);
  CHECK(empty_report.all_safe());
}
