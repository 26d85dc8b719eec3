// Scenario runner and operator interface. Thin shell over the library:
// everything reachable here is equally reachable through harness:: calls.

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <string>

#include "proxauth/harness.hpp"
#include "proxauth/scenario.hpp"
#include "proxauth/server.hpp"

namespace {

using namespace proxauth;

int cmd_run(const std::string& scenario_path, std::optional<uint64_t> seed_override,
            const std::string& transcript_path, const std::string& metrics_path,
            bool force_capture) {
  auto cfg = scenario::load_scenario_file(scenario_path);
  if (!cfg) {
    std::cerr << "config error: " << cfg.error().to_string() << "\n";
    return 2;
  }
  scenario::ScenarioConfig config = *cfg;
  if (seed_override) config.seed = *seed_override;
  if (force_capture) config.capture_payloads = true;

  harness::RunResult result = harness::run_scenario(config);

  if (!transcript_path.empty()) {
    auto st = harness::write_lines(transcript_path, result.transcript_lines);
    if (!st.ok()) {
      std::cerr << st.error().to_string() << "\n";
      return 2;
    }
  }
  if (!metrics_path.empty()) {
    auto st = harness::write_lines(metrics_path, {result.metrics.to_json().dump(2)});
    if (!st.ok()) {
      std::cerr << st.error().to_string() << "\n";
      return 2;
    }
  }

  std::cout << "scenario:   " << result.scenario_name << "\n";
  std::cout << "outcome:    " << (result.outcome.value("authenticated", false)
                                      ? "attacker authenticated"
                                      : result.outcome.value("victim_login_ok", false)
                                            ? "login success"
                                            : "no session granted")
            << "\n";
  std::cout << "digest:     " << result.transcript_digest << "\n";
  for (const auto& c : result.outcome["checks"]) {
    std::cout << "  [" << (c.value("ok", false) ? "ok" : "FAIL") << "] "
              << c.value("name", "") << "\n";
  }
  if (!result.passed) {
    std::cout << "FAILED: " << result.first_failure << "\n";
    return 1;
  }
  std::cout << "PASSED\n";
  return 0;
}

int cmd_suite(const std::string& dir, const std::string& filter) {
  harness::SuiteResult suite = harness::run_suite(dir, filter);
  if (!suite.error.empty()) {
    std::cerr << "suite error: " << suite.error << "\n";
    return 1;
  }
  if (suite.entries.empty()) {
    std::cout << "warning: no scenarios matched\n";
    return 0;
  }
  std::printf("%-28s %-8s %-8s %s\n", "scenario", "result", "wall-ms", "first failure");
  for (const auto& e : suite.entries) {
    std::printf("%-28s %-8s %-8llu %s\n", e.name.c_str(), e.passed ? "pass" : "FAIL",
                static_cast<unsigned long long>(e.wall_ms),
                e.passed ? "" : e.first_failure.c_str());
  }
  std::cout << (suite.all_passed ? "ALL PASSED\n" : "FAILURES PRESENT\n");
  return suite.all_passed ? 0 : 1;
}

int cmd_verify(const std::string& path) {
  harness::VerifyResult v = harness::verify_transcript_file(path);
  if (!v.parsed) {
    std::cerr << "malformed transcript: " << path << "\n";
    return 2;
  }
  for (const auto& line : v.report_lines) std::cout << line << "\n";
  return v.all_safe ? 0 : 1;
}

// Line-delimited JSON request/response loop over stdio, exposing the verifier
// operations one-to-one for cross-language conformance drivers.
int cmd_serve_stdio(uint64_t seed, std::string data_dir) {
  using nlohmann::json;
  if (data_dir.empty()) {
    if (const char* env = std::getenv("PROXAUTH_DATA_DIR")) data_dir = env;
  }
  server::VerifierServer verifier("server", {}, seed);
  if (!data_dir.empty()) {
    verifier.store().set_data_dir(data_dir);
    verifier.store().load_all();
  }
  Csprng rng(seed, "serve-stdio");

  std::string line;
  while (std::getline(std::cin, line)) {
    if (line.empty()) continue;
    json req = json::parse(line, nullptr, false);
    json resp;
    auto fail = [&](const std::string& err) {
      resp = {{"ok", false}, {"error", err}};
    };
    if (req.is_discarded() || !req.is_object() || !req.contains("op")) {
      fail("MalformedMessage");
      std::cout << resp.dump() << "\n" << std::flush;
      continue;
    }
    std::string op = req.value("op", "");
    uint64_t now = req.value("now_ms", uint64_t{0});
    auto envelope_of = [&](const char* field) -> std::optional<crypto::EncryptedEnvelope> {
      auto raw = hex_decode(req.value(field, ""));
      if (!raw) return std::nullopt;
      return crypto::EncryptedEnvelope::parse(*raw);
    };

    if (op == "provision") {
      auto sk_raw = hex_decode(req.value("sk", ""));
      auto sk = sk_raw ? crypto::SecretKey::from_bytes(*sk_raw) : std::nullopt;
      if (!sk) {
        fail("MalformedMessage");
      } else {
        verifier.provision_app_secret(req.value("app_id", ""), *sk);
        resp = {{"ok", true}};
      }
    } else if (op == "register") {
      auto emb_raw = hex_decode(req.value("embedding", ""));
      auto emb = emb_raw ? biometric::FaceEmbedding::from_bytes(*emb_raw) : std::nullopt;
      if (!emb) {
        fail("MalformedMessage");
      } else {
        auto r = verifier.register_user(req.value("em", ""), req.value("pwd", ""), *emb,
                                        req.value("app_id", ""));
        if (r) {
          resp = {{"ok", true},
                  {"salt", hex_encode(r->salt.v)},
                  {"enc_aid", hex_encode(r->enc_aid.to_bytes())}};
        } else {
          fail(std::string(err_name(r.code())));
        }
      }
    } else if (op == "confirm_registration") {
      auto env = envelope_of("envelope");
      if (!env) {
        fail("MalformedMessage");
      } else {
        auto st = verifier.confirm_registration(req.value("em", ""), *env);
        if (st.ok()) resp = {{"ok", true}};
        else fail(std::string(err_name(st.code())));
      }
    } else if (op == "upload_login_embedding") {
      auto emb_raw = hex_decode(req.value("embedding", ""));
      auto emb = emb_raw ? biometric::FaceEmbedding::from_bytes(*emb_raw) : std::nullopt;
      if (!emb) {
        fail("MalformedMessage");
      } else {
        auto r = verifier.upload_login_embedding(req.value("em", ""), *emb);
        if (r) resp = {{"ok", true}, {"fburl", r->id}};
        else fail(std::string(err_name(r.code())));
      }
    } else if (op == "update_login_context") {
      auto n1 = crypto::Nonce10::parse(req.value("n1", ""));
      auto bt1 = sim::BluetoothAddress::parse(req.value("bt1", ""));
      if (!n1 || !bt1) {
        fail("MalformedMessage");
      } else {
        auto st = verifier.update_login_context(req.value("em", ""), *n1, *bt1, now,
                                                req.value("fd", "stdio-client"));
        if (st.ok()) resp = {{"ok", true}};
        else fail(std::string(err_name(st.code())));
      }
    } else if (op == "begin_login") {
      auto env = envelope_of("envelope");
      if (!env) {
        fail("MalformedMessage");
      } else {
        auto r = verifier.begin_login(req.value("em", ""), *env, now);
        if (r) resp = {{"ok", true}, {"salt", hex_encode(r->v)}};
        else fail(std::string(err_name(r.code())));
      }
    } else if (op == "verify_auth_string") {
      auto env = envelope_of("envelope");
      auto bt2 = sim::BluetoothAddress::parse(req.value("bt2", ""));
      if (!env || !bt2) {
        fail("MalformedMessage");
      } else {
        auto r = verifier.verify_auth_string(*env, *bt2, now, req.value("desktop", "stdio-desktop"));
        if (r) {
          resp = {{"ok", true},
                  {"em", r->em},
                  {"sid", hex_encode(r->sid.v)},
                  {"bt1", r->bt1.str()},
                  {"match", hex_encode(r->match_env.to_bytes())}};
        } else {
          fail(std::string(err_name(r.code())));
        }
      }
    } else if (op == "verify_proximity_token") {
      auto env = envelope_of("envelope");
      if (!env) {
        fail("MalformedMessage");
      } else {
        auto r = verifier.verify_proximity_token(*env, now);
        if (r) {
          resp = {{"ok", true}, {"em", r->em}, {"regrant", r->regrant}};
          if (!r->regrant) {
            resp["salt"] = hex_encode(r->salt.v);
            resp["enc_aid_next"] = hex_encode(r->rotation_env.to_bytes());
          }
        } else {
          fail(std::string(err_name(r.code())));
        }
      }
    } else if (op == "verify_ok") {
      auto env = envelope_of("envelope");
      if (!env) {
        fail("MalformedMessage");
      } else {
        auto r = verifier.verify_ok(req.value("em", ""), *env, now);
        if (r) resp = {{"ok", true}, {"sid", hex_encode(r->sid.v)}};
        else fail(std::string(err_name(r.code())));
      }
    } else if (op == "expire_sessions") {
      resp = {{"ok", true}, {"expired", verifier.expire_sessions(now)}};
    } else {
      fail("MalformedMessage");
    }
    std::cout << resp.dump() << "\n" << std::flush;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  proxauth::harness::startup_checks();

  CLI::App app{"passwordless proximity-MFA protocol simulator"};
  app.require_subcommand(1);

  std::string scenario_path, transcript_path, metrics_path;
  std::optional<uint64_t> seed_override;
  bool force_capture = false;
  auto* run = app.add_subcommand("run", "execute one scenario");
  run->add_option("--scenario", scenario_path, "scenario config file")->required();
  run->add_option("--seed", seed_override, "override the config seed");
  run->add_option("--transcript", transcript_path, "write JSON-lines transcript here");
  run->add_option("--metrics", metrics_path, "write metrics JSON here");
  run->add_flag("--capture-payloads", force_capture,
                "include payload hex in events even if the scenario disables it");

  std::string suite_dir, suite_filter;
  auto* suite = app.add_subcommand("suite", "run every scenario in a directory");
  suite->add_option("--dir", suite_dir, "directory of scenario configs")->required();
  suite->add_option("--filter", suite_filter, "glob over scenario names");

  std::string verify_path;
  auto* verify = app.add_subcommand("verify", "secrecy/authenticity report for a transcript");
  verify->add_option("--transcript", verify_path, "transcript file")->required();

  uint64_t stdio_seed = 0;
  std::string data_dir;
  auto* serve = app.add_subcommand("serve-stdio",
                                   "line-JSON verifier loop for conformance drivers");
  serve->add_option("--seed", stdio_seed, "rng seed");
  serve->add_option("--data-dir", data_dir, "persist accounts here (or PROXAUTH_DATA_DIR)");

  CLI11_PARSE(app, argc, argv);

  if (run->parsed()) {
    return cmd_run(scenario_path, seed_override, transcript_path, metrics_path,
                   force_capture);
  }
  if (suite->parsed()) return cmd_suite(suite_dir, suite_filter);
  if (verify->parsed()) return cmd_verify(verify_path);
  if (serve->parsed()) return cmd_serve_stdio(stdio_seed, data_dir);
  return 2;
}
