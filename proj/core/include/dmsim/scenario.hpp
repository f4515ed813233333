#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dmsim/deployer.hpp"
#include "dmsim/fleet.hpp"
#include "dmsim/project.hpp"
#include "dmsim/trace.hpp"

namespace dmsim {

struct DmplcSettings {
  SimTime poll_interval{1000};
  int deadband_misses = 1;
  /// Ransom window counted from the arm time.
  SimTime deadline{15000};
  std::string key = "unlock";
  bool auto_deploy = true;
  std::optional<SimTime> auto_arm_at;
  std::string plc_password = "dmplc-plc";
  std::string project_password = "dmplc-project";
  TopologyStrategy strategy = TopologyStrategy::all_neighbors;
  bool include_ew = true;
  bool watch_safe_shutdown = false;
  bool dry_run = true;
};

enum class ActionKind {
  cut_link,
  restore_link,
  pay_ransom,
  tamper_memory,
  halt_device,
  reflash_device,
  safe_shutdown_signal,
  arm,
};
std::string_view to_string(ActionKind k);
ActionKind parse_action_kind(std::string_view s);

struct ScenarioAction {
  SimTime at;
  ActionKind kind = ActionKind::cut_link;
  DeviceId device;  // link end a for link actions
  DeviceId peer;    // link end b
  std::string key;  // pay_ransom / arm
  BitAddress address;
  bool value = true;
  std::optional<std::string> with_password;
};

enum class Predicate { alert_is, outputs_all_on, outputs_unchanged, ew_shutdown, trace_contains, trace_absent };
std::string_view to_string(Predicate p);

struct Assertion {
  std::string name;
  Predicate predicate = Predicate::alert_is;
  /// Either a single instant or an inclusive range.
  std::optional<SimTime> at;
  std::optional<std::pair<SimTime, SimTime>> range;
  DeviceId device;
  int value = 1;
  std::string kind;
  std::map<std::string, std::string> where;
  /// Slack in scan intervals of the named device (largest PLC scan when no
  /// PLC is named).
  int tolerance_scans = 0;
  std::optional<std::size_t> count;

  SimTime latest() const;
};

struct ScenarioScript {
  std::string name;
  std::string project_path;  // resolved against the scenario file's directory
  ProjectModel project;
  DmplcSettings dmplc;
  std::vector<ScenarioAction> actions;
  std::vector<Assertion> assertions;
  SimTime horizon{30000};
  std::uint64_t seed = 0;
  bool random_scan_phase = false;
  SimTime link_latency{0};
};

/// `base_dir` resolves a relative project_path. Validates the script and the
/// referenced devices/links; throws Error with a field path on failure.
ScenarioScript parse_scenario(const std::string& text, const std::string& base_dir);
ScenarioScript load_scenario(const std::string& path);
/// Checks action targets against the project. Throws Error.
void validate_action(const ProjectModel& project, const ScenarioAction& a);

/// Emits the `injected` record and performs the action on the fleet. Errors
/// the action hits at run time become an `action_failed` record.
void apply_action(Fleet& fleet, const ScenarioAction& a, const DmplcSettings& dmplc);

/// Builds a fleet, deploys (when configured) and queues the arm and actions
/// as injections. The caller runs the kernel.
std::unique_ptr<Fleet> prepare_fleet(const ScenarioScript& script, std::uint64_t seed);

enum class Verdict { pass, fail, error };
std::string_view to_string(Verdict v);

struct AssertionResult {
  std::string name;
  Verdict verdict = Verdict::pass;
  std::string detail;
};

struct ScenarioReport {
  std::string scenario;
  std::uint64_t seed = 0;
  std::vector<AssertionResult> results;
  TraceLog trace;
  std::vector<FlowRecord> flows;
  StopReason stop = StopReason::horizon_reached;

  bool passed() const;
  std::string to_text() const;
};

std::vector<AssertionResult> evaluate_assertions(const TraceLog& trace, const std::vector<Assertion>& assertions);

ScenarioReport run_scenario(const ScenarioScript& script, std::optional<std::uint64_t> seed = std::nullopt);
ScenarioReport replay_trace(const TraceLog& trace, const ScenarioScript& script);

}  // namespace dmsim
