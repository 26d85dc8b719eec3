#pragma once

#include <optional>
#include <string>
#include <vector>

#include "proxauth/adversary.hpp"
#include "proxauth/errors.hpp"
#include "proxauth/sim.hpp"

namespace proxauth::scenario {

enum class ScenarioKind {
  Honest,
  RotationCrash,
  RtMitm,
  CrMitm,
  MbePhish,
  Replay,
  SpoofApp,
};

std::string_view scenario_kind_name(ScenarioKind k);
std::optional<ScenarioKind> scenario_kind_from_name(std::string_view s);

/// What a run must satisfy to pass.
enum class ExpectedOutcome { LoginSuccess, AttackFailed, AttackSucceeded };

struct DeviceSpec {
  std::string id;
  sim::BluetoothAddress bt;
  std::string location;
};

struct AttackerSpec {
  std::string id = "mallory";
  std::string location;
  adversary::Capabilities capabilities;
  std::optional<DeviceSpec> desktop;  // attacker-operated client machine
};

struct Assertions {
  ExpectedOutcome expected = ExpectedOutcome::LoginSuccess;
  bool secret_free_closure = true;
  std::vector<std::string> expected_errors;  // server error codes that must occur
};

struct ScenarioConfig {
  std::string name;
  ScenarioKind kind = ScenarioKind::Honest;
  uint64_t seed = 0;

  std::vector<std::string> locations;
  std::vector<std::pair<std::string, std::string>> adjacent;

  std::string victim_em;
  std::string victim_pwd;
  double noise_sigma = 0.02;
  DeviceSpec victim_phone;
  DeviceSpec victim_desktop;

  std::optional<AttackerSpec> attacker;

  sim::Timings timings;
  double biometric_threshold = 1.0;

  bool proximity_check = true;
  bool token_single_use = true;
  bool leak_first_device_secrets = false;

  /// Include payload hex in transcript event lines (needed by the offline
  /// transport scanner).
  bool capture_payloads = true;

  std::optional<int> crash_at_step;  // RotationCrash: 0..15

  Assertions assertions;
};

/// Parses a scenario document. The format is JSON with // and /* */ comments
/// allowed. Unknown keys and schema violations are errors; `seed`, `name` and
/// `kind` are mandatory.
Expected<ScenarioConfig> parse_scenario(const std::string& text);
Expected<ScenarioConfig> load_scenario_file(const std::string& path);

}  // namespace proxauth::scenario
