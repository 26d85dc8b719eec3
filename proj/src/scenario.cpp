#include "proxauth/scenario.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <set>
#include <sstream>

namespace proxauth::scenario {

using nlohmann::json;

std::string_view scenario_kind_name(ScenarioKind k) {
  switch (k) {
    case ScenarioKind::Honest: return "honest";
    case ScenarioKind::RotationCrash: return "rotation_crash";
    case ScenarioKind::RtMitm: return "rt_mitm";
    case ScenarioKind::CrMitm: return "cr_mitm";
    case ScenarioKind::MbePhish: return "mbe_phish";
    case ScenarioKind::Replay: return "replay";
    case ScenarioKind::SpoofApp: return "spoof_app";
  }
  return "?";
}

std::optional<ScenarioKind> scenario_kind_from_name(std::string_view s) {
  for (ScenarioKind k :
       {ScenarioKind::Honest, ScenarioKind::RotationCrash, ScenarioKind::RtMitm,
        ScenarioKind::CrMitm, ScenarioKind::MbePhish, ScenarioKind::Replay,
        ScenarioKind::SpoofApp}) {
    if (scenario_kind_name(k) == s) return k;
  }
  return std::nullopt;
}

namespace {

Error config_error(const std::string& what) { return Error(Err::ConfigError, what); }

Expected<DeviceSpec> parse_device(const json& j, const std::string& path) {
  if (!j.is_object()) return config_error(path + ": expected object");
  DeviceSpec d;
  d.id = j.value("id", "");
  if (d.id.empty()) return config_error(path + ".id missing");
  auto bt = sim::BluetoothAddress::parse(j.value("bt", ""));
  if (!bt) return config_error(path + ".bt is not a bluetooth address");
  d.bt = *bt;
  d.location = j.value("location", "");
  if (d.location.empty()) return config_error(path + ".location missing");
  for (const auto& [k, _] : j.items()) {
    if (k != "id" && k != "bt" && k != "location") {
      return config_error(path + ": unknown key '" + k + "'");
    }
  }
  return d;
}

}  // namespace

Expected<ScenarioConfig> parse_scenario(const std::string& text) {
  json j = json::parse(text, nullptr, false, /*ignore_comments=*/true);
  if (j.is_discarded() || !j.is_object()) {
    return config_error("scenario is not a JSON object");
  }

  static const std::set<std::string> known_keys = {
      "name",     "kind",    "seed",      "topology",      "victim",
      "attacker", "timings", "biometric", "toggles",       "crash_at_step",
      "assertions", "capture_payloads"};
  for (const auto& [k, _] : j.items()) {
    if (!known_keys.contains(k)) return config_error("unknown key '" + k + "'");
  }

  ScenarioConfig cfg;
  cfg.name = j.value("name", "");
  if (cfg.name.empty()) return config_error("'name' is required");
  auto kind = scenario_kind_from_name(j.value("kind", ""));
  if (!kind) return config_error("'kind' is required and must be a known scenario kind");
  cfg.kind = *kind;
  if (!j.contains("seed") || !j["seed"].is_number_unsigned()) {
    return config_error("'seed' is required and must be a non-negative integer");
  }
  cfg.seed = j["seed"].get<uint64_t>();

  const json topo = j.value("topology", json::object());
  for (const auto& loc : topo.value("locations", json::array())) {
    cfg.locations.push_back(loc.get<std::string>());
  }
  if (cfg.locations.empty()) return config_error("topology.locations must be non-empty");
  for (const auto& pair : topo.value("adjacent", json::array())) {
    if (!pair.is_array() || pair.size() != 2) {
      return config_error("topology.adjacent entries must be [a, b] pairs");
    }
    cfg.adjacent.emplace_back(pair[0].get<std::string>(), pair[1].get<std::string>());
  }

  if (!j.contains("victim")) return config_error("'victim' is required");
  const json& v = j["victim"];
  cfg.victim_em = v.value("em", "");
  if (cfg.victim_em.empty()) return config_error("victim.em missing");
  cfg.victim_pwd = v.value("pwd", "hunter2");
  cfg.noise_sigma = v.value("noise_sigma", 0.02);
  if (cfg.noise_sigma < 0) return config_error("victim.noise_sigma must be >= 0");
  if (!v.contains("phone") || !v.contains("desktop")) {
    return config_error("victim.phone and victim.desktop are required");
  }
  auto phone = parse_device(v["phone"], "victim.phone");
  if (!phone) return phone.error();
  cfg.victim_phone = *phone;
  auto desktop = parse_device(v["desktop"], "victim.desktop");
  if (!desktop) return desktop.error();
  cfg.victim_desktop = *desktop;

  if (j.contains("attacker") && !j["attacker"].is_null()) {
    const json& a = j["attacker"];
    AttackerSpec spec;
    spec.id = a.value("id", "mallory");
    spec.location = a.value("location", "");
    if (spec.location.empty()) return config_error("attacker.location missing");
    for (const auto& cap : a.value("capabilities", json::array())) {
      std::string c = cap.get<std::string>();
      if (c == "phish_ui_observe") spec.capabilities.phish_ui_observe = true;
      else if (c == "rt_relay") spec.capabilities.rt_relay = true;
      else if (c == "cr_remote_desktop") spec.capabilities.cr_remote_desktop = true;
      else if (c == "replay") spec.capabilities.replay = true;
      else if (c == "spoof_app") spec.capabilities.spoof_app = true;
      else if (c == "sniff_bt_addr") spec.capabilities.sniff_bt_addr = true;
      else return config_error("unknown capability '" + c + "'");
    }
    if (a.contains("desktop") && !a["desktop"].is_null()) {
      auto d = parse_device(a["desktop"], "attacker.desktop");
      if (!d) return d.error();
      spec.desktop = *d;
    }
    cfg.attacker = std::move(spec);
  }

  const json t = j.value("timings", json::object());
  cfg.timings.https_ms = t.value("https_ms", cfg.timings.https_ms);
  cfg.timings.nfc_ms = t.value("nfc_ms", cfg.timings.nfc_ms);
  cfg.timings.ble_scan_ms = t.value("ble_scan_ms", cfg.timings.ble_scan_ms);
  cfg.timings.biometric_match_ms =
      t.value("biometric_match_ms", cfg.timings.biometric_match_ms);
  cfg.timings.session_deadline_ms =
      t.value("session_deadline_ms", cfg.timings.session_deadline_ms);

  const json b = j.value("biometric", json::object());
  cfg.noise_sigma = b.value("sigma", cfg.noise_sigma);
  cfg.biometric_threshold = b.value("threshold", cfg.biometric_threshold);
  if (cfg.biometric_threshold <= 0) return config_error("biometric.threshold must be > 0");

  const json g = j.value("toggles", json::object());
  cfg.proximity_check = g.value("proximity_check", true);
  cfg.token_single_use = g.value("token_single_use", true);
  cfg.leak_first_device_secrets = g.value("leak_first_device_secrets", false);

  cfg.capture_payloads = j.value("capture_payloads", true);

  if (j.contains("crash_at_step")) {
    int step = j["crash_at_step"].get<int>();
    if (step < 0 || step > 15) return config_error("crash_at_step must be in [0, 15]");
    cfg.crash_at_step = step;
  }

  const json as = j.value("assertions", json::object());
  std::string expected = as.value("expected", "");
  if (expected == "login_success") cfg.assertions.expected = ExpectedOutcome::LoginSuccess;
  else if (expected == "attack_failed") cfg.assertions.expected = ExpectedOutcome::AttackFailed;
  else if (expected == "attack_succeeded")
    cfg.assertions.expected = ExpectedOutcome::AttackSucceeded;
  else if (expected.empty()) {
    cfg.assertions.expected = cfg.attacker ? ExpectedOutcome::AttackFailed
                                           : ExpectedOutcome::LoginSuccess;
  } else {
    return config_error("assertions.expected must be login_success, attack_failed or "
                        "attack_succeeded");
  }
  cfg.assertions.secret_free_closure = as.value("secret_free_closure", true);
  for (const auto& e : as.value("expected_errors", json::array())) {
    cfg.assertions.expected_errors.push_back(e.get<std::string>());
  }

  bool needs_attacker = cfg.kind != ScenarioKind::Honest &&
                        cfg.kind != ScenarioKind::RotationCrash;
  if (needs_attacker && !cfg.attacker) {
    return config_error("scenario kind '" +
                        std::string(scenario_kind_name(cfg.kind)) +
                        "' requires an attacker");
  }
  if (cfg.kind == ScenarioKind::CrMitm && (!cfg.attacker || !cfg.attacker->desktop)) {
    return config_error("cr_mitm requires attacker.desktop");
  }

  return cfg;
}

Expected<ScenarioConfig> load_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) return config_error("cannot open scenario file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

}  // namespace proxauth::scenario
