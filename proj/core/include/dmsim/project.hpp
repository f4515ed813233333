#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dmsim/plc.hpp"
#include "dmsim/types.hpp"

namespace dmsim {

struct ProjectDataBlock {
  int number = 0;
  std::size_t size = 0;

  bool operator==(const ProjectDataBlock&) const = default;
};

struct ProjectDevice {
  DeviceId id;
  std::string kind;  // "plc" | "ew"
  std::string address;
  SimTime scan_interval{100};
  std::vector<ProjectDataBlock> data_blocks;
  std::vector<CoreBlock> core_blocks;
  std::vector<std::string> output_cards;
  std::optional<BitAddress> safe_shutdown_signal;
  std::optional<std::string> config_password;
  /// Keys this loader does not understand, as a JSON object text.
  std::string extra_json;

  bool is_plc() const { return kind == "plc"; }
};

/// Offline engineering project describing the fleet.
struct ProjectModel {
  std::string name;
  std::vector<ProjectDevice> devices;
  std::vector<std::pair<DeviceId, DeviceId>> links;
  std::vector<CommFunction> comm_functions;
  /// Digest of the project password once the file is protected.
  std::optional<std::string> protection;
  std::string extra_json;

  std::vector<const ProjectDevice*> plcs() const;
  const ProjectDevice* workstation() const;
  const ProjectDevice* find(const DeviceId& id) const;
  ProjectDevice* find(const DeviceId& id);
};

/// Parses the project schema. Errors carry a line number for syntax
/// problems and a field path (devices[2].id) for schema problems.
ProjectModel parse_project(const std::string& text);
ProjectModel load_project(const std::string& path);
std::string serialize_project(const ProjectModel& project);
void save_project(const ProjectModel& project, const std::string& path);

std::string password_digest(const std::string& password);

/// The configuration a pristine PLC would carry for this project device.
PlcConfig plc_config_from_project(const ProjectModel& project, const ProjectDevice& device);

}  // namespace dmsim
