#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <vector>

#include "dmsim/ew.hpp"
#include "dmsim/kernel.hpp"
#include "dmsim/net.hpp"
#include "dmsim/plc.hpp"
#include "dmsim/project.hpp"
#include "dmsim/trace.hpp"

namespace dmsim {

struct FleetOptions {
  std::uint64_t seed = 0;
  /// Offset each PLC's first scan by a seeded draw in [0, scan_interval).
  bool random_scan_phase = false;
  SimTime link_latency{0};
};

/// The simulated victim environment instantiated from a project: kernel,
/// network, devices and the shared trace.
class Fleet {
 public:
  Fleet(const ProjectModel& project, const FleetOptions& options);

  Fleet(const Fleet&) = delete;
  Fleet& operator=(const Fleet&) = delete;

  Kernel& kernel() { return kernel_; }
  Network& net() { return net_; }
  TraceLog& trace() { return trace_; }
  const TraceLog& trace() const { return trace_; }
  SimContext context() { return SimContext{kernel_, net_, trace_}; }
  const ProjectModel& project() const { return project_; }
  const FleetOptions& options() const { return options_; }

  bool has_plc(const DeviceId& id) const { return plcs_.contains(id); }
  Plc& plc(const DeviceId& id);
  const Plc& plc(const DeviceId& id) const;
  const std::vector<DeviceId>& plc_ids() const { return plc_order_; }

  bool has_ew() const { return ew_ != nullptr; }
  EngineeringWorkstation& ew();
  const EngineeringWorkstation& ew() const;

  bool has_device(const DeviceId& id) const { return has_plc(id) || (ew_ && ew_->id() == id); }
  bool device_alive(const DeviceId& id) const;
  void halt_device(const DeviceId& id);

  /// Schedules every device's periodic activity. Idempotent.
  void start();
  StopReason run_until(SimTime horizon);

 private:
  ProjectModel project_;
  FleetOptions options_;
  Kernel kernel_;
  TraceLog trace_;
  Network net_;
  std::map<DeviceId, std::unique_ptr<Plc>> plcs_;
  std::vector<DeviceId> plc_order_;
  std::unique_ptr<EngineeringWorkstation> ew_;
  bool started_ = false;
};

}  // namespace dmsim
