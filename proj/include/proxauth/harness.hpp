#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "proxauth/adversary.hpp"
#include "proxauth/devices.hpp"
#include "proxauth/scenario.hpp"
#include "proxauth/server.hpp"
#include "proxauth/sim.hpp"

namespace proxauth::harness {

/// The adversary as a simulation principal: holds the scenario capabilities,
/// accumulates observed terms, and runs the per-scenario attack script via a
/// reaction hook installed by the runner.
class Attacker : public sim::Principal {
 public:
  Attacker(std::string name, std::string server, adversary::Capabilities caps);

  const std::string& name() const { return name_; }
  const adversary::Capabilities& caps() const { return caps_; }
  adversary::Knowledge& knowledge() { return knowledge_; }
  const adversary::Knowledge& knowledge() const { return knowledge_; }

  void add_controlled_machine(const std::string& m) { controlled_.push_back(m); }
  bool controls(const std::string& m) const;

  /// Endpoints whose traffic counts as the attacker's own knowledge
  /// (the attacker itself plus software it authored, like a spoofed app).
  void add_knowledge_endpoint(const std::string& p) { endpoints_.push_back(p); }
  bool is_knowledge_endpoint(const std::string& p) const;

  void grant(sim::Simulation& sim, adversary::Term t);

  using ReactionHook = std::function<void(Attacker&, sim::Simulation&, const sim::Event&)>;
  void set_reaction(ReactionHook hook) { reaction_ = std::move(hook); }

  /// Applies the capability-gated observation rules to a delivered event and
  /// fires the reaction hook when something was captured.
  void observe(sim::Simulation& sim, const sim::Event& ev);

  void send_message(sim::Simulation& sim, const messages::ProtocolMessage& m,
                    sim::ChannelKind ch = sim::ChannelKind::Https);
  void inject_raw(sim::Simulation& sim, const std::string& to, Bytes payload,
                  sim::ChannelKind ch = sim::ChannelKind::Https);

  void on_event(sim::Simulation& sim, const sim::Event& ev) override;

 private:
  std::string name_;
  std::string server_;
  adversary::Capabilities caps_;
  adversary::Knowledge knowledge_;
  std::vector<std::string> controlled_;
  std::vector<std::string> endpoints_;
  ReactionHook reaction_;
};

/// Symbolic view of a delivered event: envelope fields become enc() terms via
/// the provenance registry, everything else becomes atoms.
adversary::Term term_for_event(const sim::Simulation& sim, const sim::Event& ev);

struct RunMetrics {
  uint64_t registration_ms = 0;
  uint64_t login_ms = 0;
  uint64_t nfc_tap_ms = 0;
  uint64_t ble_search_ms = 0;
  uint64_t biometric_match_ms = 0;
  uint64_t https_path_ms = 0;
  uint64_t https_messages = 0;
  uint64_t nfc_messages = 0;
  uint64_t ble_scans = 0;

  nlohmann::json to_json() const;
};

struct RunResult {
  std::string scenario_name;
  bool passed = false;
  std::string first_failure;
  nlohmann::json outcome;
  RunMetrics metrics;
  std::vector<std::string> transcript_lines;
  std::string transcript_digest;
};

/// Executes one scenario end to end and evaluates its assertions.
RunResult run_scenario(const scenario::ScenarioConfig& cfg);

struct SuiteEntry {
  std::string name;
  std::string file;
  bool passed = false;
  std::string first_failure;
  uint64_t wall_ms = 0;
};

struct SuiteResult {
  std::vector<SuiteEntry> entries;
  bool all_passed = true;
  std::string error;  // non-empty on suite-level failure (duplicates, bad config)
};

SuiteResult run_suite(const std::string& dir, const std::string& filter);

struct VerifyResult {
  bool parsed = false;  // false: malformed transcript (exit 2)
  bool all_safe = false;
  std::vector<std::string> report_lines;
};

/// Offline secrecy/authenticity verdicts over a transcript file: recomputes
/// the attacker closure from observed terms, checks every declared secret,
/// confirms accepted OK envelopes were sealed by the legitimate AID holder,
/// and scans non-HTTPS payloads for secret material.
VerifyResult verify_transcript_lines(const std::vector<std::string>& lines);
VerifyResult verify_transcript_file(const std::string& path);

/// Writes lines as a JSON-lines file.
Status write_lines(const std::string& path, const std::vector<std::string>& lines);

std::string transcript_digest(const std::vector<std::string>& lines);

/// Startup self-check shared by the CLI and the test suites.
void startup_checks();

}  // namespace proxauth::harness
