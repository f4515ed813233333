#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dmsim/types.hpp"

namespace dmsim {

inline constexpr int kTraceSchemaVersion = 1;

/// Record kinds. Stored as plain strings; unknown kinds still parse.
namespace kind {
inline constexpr std::string_view injected = "injected";
inline constexpr std::string_view action_failed = "action_failed";
inline constexpr std::string_view dm_installed = "dm_installed";
inline constexpr std::string_view dry_run_edge = "dry_run_edge";
inline constexpr std::string_view armed = "armed";
inline constexpr std::string_view arm_aborted = "arm_aborted";
inline constexpr std::string_view dm_enabled = "dm_enabled";
inline constexpr std::string_view poll_sent = "poll_sent";
inline constexpr std::string_view poll_failed = "poll_failed";
inline constexpr std::string_view alert_observed = "alert_observed";
inline constexpr std::string_view alert_raised = "alert_raised";
inline constexpr std::string_view outputs_on = "outputs_on";
inline constexpr std::string_view core_disabled = "core_disabled";
inline constexpr std::string_view core_output = "core_output";
inline constexpr std::string_view config_access_denied = "config_access_denied";
inline constexpr std::string_view config_replaced = "config_replaced";
inline constexpr std::string_view disarmed = "disarmed";
inline constexpr std::string_view key_rejected = "key_rejected";
inline constexpr std::string_view polling_ceased = "polling_ceased";
inline constexpr std::string_view ew_shutdown = "ew_shutdown";
inline constexpr std::string_view halted = "halted";
inline constexpr std::string_view end = "end";
}  // namespace kind

struct TraceRecord {
  SimTime t;
  DeviceId device;
  std::string kind;
  std::vector<std::pair<std::string, std::string>> fields;

  const std::string* field(std::string_view key) const;
  bool operator==(const TraceRecord&) const = default;
};

struct DeviceInfo {
  DeviceId id;
  std::string kind;  // "plc" | "ew"
  SimTime scan_interval;
};

/// Header carried by every serialized trace.
struct TraceHeader {
  int schema = kTraceSchemaVersion;
  std::uint64_t seed = 0;
  SimTime horizon;
  std::vector<DeviceInfo> devices;
};

class TraceLog {
 public:
  using Observer = std::function<void(std::size_t position, const TraceRecord&)>;

  void append(TraceRecord rec);
  void emit(SimTime t, DeviceId device, std::string_view kind,
            std::vector<std::pair<std::string, std::string>> fields = {}) {
    append(TraceRecord{t, std::move(device), std::string(kind), std::move(fields)});
  }

  const std::vector<TraceRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }

  /// Called synchronously for every appended record.
  void set_observer(Observer obs) { observer_ = std::move(obs); }

  TraceHeader header;

 private:
  std::vector<TraceRecord> records_;
  Observer observer_;
};

/// One line, no trailing newline: `t_ms device kind k=v ...`. Values are
/// percent-escaped for space, '=', '%' and newlines.
std::string format_record(const TraceRecord& rec);
TraceRecord parse_record(std::string_view line);

std::string format_header(const TraceHeader& h);
TraceHeader parse_header(std::string_view line);

void write_trace(std::ostream& out, const TraceLog& log);
std::string trace_to_string(const TraceLog& log);
/// Throws Error on schema mismatch or malformed lines.
TraceLog read_trace(std::istream& in);
TraceLog read_trace_file(const std::string& path);

}  // namespace dmsim
