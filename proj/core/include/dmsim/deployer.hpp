#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "dmsim/fleet.hpp"
#include "dmsim/plc.hpp"
#include "dmsim/project.hpp"

namespace dmsim {

enum class ChangeKind { added, removed, changed };
std::string_view to_string(ChangeKind c);

/// One configuration artifact that differs between two PLC configurations.
/// Artifact names: data_block:N, core_block:NAME, gate:NAME, dm_block:NAME,
/// output_card:ADDR, password, access.
struct ConfigDiff {
  DeviceId device;
  std::string artifact;
  ChangeKind change = ChangeKind::changed;

  auto operator<=>(const ConfigDiff&) const = default;
};

enum class MatchStatus { full_match, mismatch, unreachable };
std::string_view to_string(MatchStatus m);

struct PlcValidation {
  DeviceId device;
  MatchStatus match = MatchStatus::full_match;
  std::vector<ConfigDiff> diffs;
};

struct ValidationReport {
  std::vector<PlcValidation> plcs;

  bool all_full_match() const;
  const PlcValidation* find(const DeviceId& id) const;
};

/// Field-by-field comparison of an expected (project) configuration with a
/// live one. Data-block contents and output states are runtime values and
/// are not compared.
std::vector<ConfigDiff> compare_configs(const PlcConfig& expected, const PlcConfig& live);

/// Reads every project PLC's live configuration from the workstation and
/// compares it with the project.
ValidationReport validate_online(Fleet& fleet, const ProjectModel& project,
                                 const std::optional<std::string>& credential = std::nullopt);

enum class TopologyStrategy { all_neighbors, spanning_tree };

struct TopologyOptions {
  TopologyStrategy strategy = TopologyStrategy::all_neighbors;
  /// Include the workstation heartbeat to every reachable PLC.
  bool include_ew = true;
  /// Per-PLC peer budget; 0 means unlimited.
  std::size_t max_connections = 0;
};

struct CovertTopology {
  DeviceId ew;
  std::vector<DeviceId> ew_targets;
  std::vector<PollAssignment> assignments;

  /// Undirected adjacency over workstation and PLCs.
  std::map<DeviceId, std::set<DeviceId>> adjacency() const;
  std::vector<PollAssignment> outgoing(const DeviceId& plc) const;
  std::vector<PollAssignment> incoming(const DeviceId& plc) const;
};

/// Throws Error when some PLC would not be polled by anyone or the covert
/// graph is disconnected.
CovertTopology derive_covert_topology(const ProjectModel& project, const Network& net,
                                      const TopologyOptions& options = {});

/// First communication function in `preference` not blocked by a filter.
/// Only exercised at unit level; there is no firewall model.
std::optional<std::string> choose_comm_function(const std::vector<std::string>& preference,
                                                const std::set<std::string>& blocked);

struct DeploymentPlan {
  CovertTopology topology;
  SimTime poll_interval{1000};
  int deadband_misses = 1;
  SimTime deadline{15000};  // ransom window, counted from arming
  std::string plc_password;
  std::string project_password;
  std::string ransom_key;
  std::string comm_function = "put_get";
  bool watch_safe_shutdown = false;
  bool restore_outputs_on_disarm = true;

  void validate(const ProjectModel& project) const;
};

inline const std::vector<std::string> kDmBlockNames = {"DM_Poll", "DM_StatusCheck", "DM_PaymentTimer",
                                                       "DM_Disruption"};

struct DeviceInstall {
  enum class Status { installed, already_installed, failed };
  DeviceId device;
  Status status = Status::installed;
  /// Everything this install added or changed, in the same terms as ConfigDiff.
  std::vector<ConfigDiff> artifacts;
  std::string error;
};

struct InstallReport {
  bool ok = true;
  std::vector<DeviceInstall> devices;

  std::vector<ConfigDiff> all_artifacts() const;
};

/// Installs the extortion blocks on every PLC named in the plan's topology
/// and re-protects the project. A device whose live configuration does not
/// match the project, or whose write cannot be verified, is rolled back and
/// aborts the remaining installs. Throws Error on an invalid plan or a wrong
/// stored project password.
InstallReport install_dmplc(Fleet& fleet, ProjectModel& project, const DeploymentPlan& plan);

struct DryRunEdge {
  DeviceId from;
  DeviceId to;
  Outcome write = Outcome::delivered;
  Outcome read = Outcome::delivered;

  bool ok() const { return write == Outcome::delivered && read == Outcome::delivered; }
};

struct DryRunReport {
  std::vector<DryRunEdge> edges;
  bool all_ok() const;
};

/// Exchanges dummy data over every covert edge while the blocks are still
/// disabled. Throws Error once the fleet has been armed.
DryRunReport dry_run(Fleet& fleet, const CovertTopology& topology);

}  // namespace dmsim
