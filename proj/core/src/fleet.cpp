#include "dmsim/fleet.hpp"

namespace dmsim {

Fleet::Fleet(const ProjectModel& project, const FleetOptions& options)
    : project_(project), options_(options), kernel_(options.seed), net_(kernel_) {
  trace_.header.seed = options.seed;
  for (const auto& d : project_.devices) {
    if (d.is_plc()) {
      SimTime phase{0};
      if (options_.random_scan_phase) {
        auto rng = kernel_.stream("plc-runtime/phase/" + d.id);
        phase = SimTime{static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(d.scan_interval.ms))};
      }
      auto plc = std::make_unique<Plc>(context(), plc_config_from_project(project_, d), phase);
      net_.attach(d.id, plc.get());
      plc_order_.push_back(d.id);
      plcs_.emplace(d.id, std::move(plc));
      trace_.header.devices.push_back(DeviceInfo{d.id, "plc", d.scan_interval});
    } else {
      ew_ = std::make_unique<EngineeringWorkstation>(context(), d.id);
      std::vector<CommFunction> comm;
      for (const auto& c : project_.comm_functions) {
        if (c.src == d.id) comm.push_back(c);
      }
      ew_->set_comm(std::move(comm));
      net_.attach(d.id, ew_.get());
      trace_.header.devices.push_back(DeviceInfo{d.id, "ew", SimTime{0}});
    }
  }
  for (const auto& [a, b] : project_.links) net_.add_link(a, b, options_.link_latency);
}

Plc& Fleet::plc(const DeviceId& id) {
  auto it = plcs_.find(id);
  if (it == plcs_.end()) throw Error("unknown PLC: " + id);
  return *it->second;
}

const Plc& Fleet::plc(const DeviceId& id) const {
  auto it = plcs_.find(id);
  if (it == plcs_.end()) throw Error("unknown PLC: " + id);
  return *it->second;
}

EngineeringWorkstation& Fleet::ew() {
  if (!ew_) throw Error("project has no engineering workstation");
  return *ew_;
}

const EngineeringWorkstation& Fleet::ew() const {
  if (!ew_) throw Error("project has no engineering workstation");
  return *ew_;
}

bool Fleet::device_alive(const DeviceId& id) const {
  if (has_plc(id)) return plc(id).alive();
  if (ew_ && ew_->id() == id) return ew_->alive();
  throw Error("unknown device: " + id);
}

void Fleet::halt_device(const DeviceId& id) {
  if (has_plc(id)) {
    plc(id).halt();
  } else if (ew_ && ew_->id() == id) {
    ew_->halt();
  } else {
    throw Error("unknown device: " + id);
  }
}

void Fleet::start() {
  if (started_) return;
  started_ = true;
  for (const auto& id : plc_order_) plcs_.at(id)->start();
  if (ew_) ew_->start();
}

StopReason Fleet::run_until(SimTime horizon) {
  start();
  return kernel_.run_until(RunLimits{horizon});
}

}  // namespace dmsim
