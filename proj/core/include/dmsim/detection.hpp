#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "dmsim/net.hpp"
#include "dmsim/plc.hpp"
#include "dmsim/project.hpp"

namespace dmsim {

class Fleet;

struct FlowKey {
  DeviceId src;
  DeviceId dst;
  ProtocolFunction function = ProtocolFunction::get_read;
  int db = 0;

  auto operator<=>(const FlowKey&) const = default;
  static FlowKey of(const FlowRecord& f) { return FlowKey{f.src, f.dst, f.function, f.db}; }
};

/// "src>dst:function:db"
std::string to_string(const FlowKey& k);
FlowKey parse_flow_key(std::string_view s);

struct PeriodStats {
  std::size_t count = 0;
  /// Inter-arrival statistics; zero when count < 2.
  SimTime min{0};
  double mean = 0.0;
  SimTime max{0};
};

struct FlowBaseline {
  std::set<FlowKey> learned;
  SimTime window_start;
  SimTime window_end;
  std::map<FlowKey, PeriodStats> stats;
};

/// Learns from flows with window_start <= t < window_end. Throws Error when
/// the window is inverted or covers no records.
FlowBaseline learn_baseline(const std::vector<FlowRecord>& flows, SimTime window_start, SimTime window_end);

std::string baseline_to_json(const FlowBaseline& b);
FlowBaseline baseline_from_json(const std::string& text);

enum class AlertKind { novel_flow, period_anomaly, config_deviation };
std::string_view to_string(AlertKind k);

struct DetectionAlert {
  SimTime t;
  AlertKind kind = AlertKind::novel_flow;
  /// Flow key text for flow alerts, "device:artifact" for configuration ones.
  std::string subject;
  std::string detail;

  bool operator==(const DetectionAlert&) const = default;
};

struct DetectOptions {
  /// Gaps longer than factor x baseline max (or shorter than min / factor)
  /// are anomalous.
  double factor = 3.0;
};

std::vector<DetectionAlert> detect(const FlowBaseline& baseline, const std::vector<FlowRecord>& flows,
                                   const DetectOptions& options = {});

/// Compares project-derived configurations with live snapshots. A missing
/// snapshot (nullopt) means the read was refused or failed.
std::vector<DetectionAlert> diff_config(const ProjectModel& project,
                                        const std::map<DeviceId, std::optional<PlcConfig>>& live,
                                        SimTime t = SimTime{0});

/// Reads every project PLC's configuration from the workstation.
std::map<DeviceId, std::optional<PlcConfig>> collect_snapshots(Fleet& fleet, const ProjectModel& project,
                                                               const std::optional<std::string>& credential = {});

inline constexpr std::string_view kAlertCsvHeader = "t_ms,kind,subject,detail";
void write_alerts(std::ostream& out, const std::vector<DetectionAlert>& alerts);

}  // namespace dmsim
