#include "dmsim/audit.hpp"

#include <map>
#include <optional>

#include "dmsim/fleet.hpp"

namespace dmsim {

namespace {

struct DeviceState {
  bool alert = false;
  bool disrupted = false;
  bool halted = false;
  std::optional<SimTime> pending_since;  // alert raised, outputs_on not yet seen
};

}  // namespace

std::vector<AuditViolation> audit_trace(const TraceLog& trace) {
  std::vector<AuditViolation> out;
  std::map<DeviceId, SimTime> scan;
  std::map<DeviceId, std::string> kinds;
  for (const auto& d : trace.header.devices) {
    scan[d.id] = d.scan_interval;
    kinds[d.id] = d.kind;
  }
  auto is_plc = [&](const DeviceId& id) {
    auto it = kinds.find(id);
    return it != kinds.end() && it->second == "plc";
  };

  std::map<DeviceId, DeviceState> st;
  std::map<DeviceId, bool> ew_ceased;

  auto check_pending = [&](SimTime now) {
    for (auto& [id, s] : st) {
      if (!s.pending_since) continue;
      if (now > *s.pending_since + scan[id]) {
        out.push_back({*s.pending_since, id, "trigger_equivalence",
                       "alert raised but outputs not forced on within one scan"});
        s.pending_since.reset();
      }
    }
  };

  for (const auto& r : trace.records()) {
    check_pending(r.t);
    if (r.kind == kind::end) continue;
    auto& s = st[r.device];
    if (r.kind == kind::alert_raised) {
      if (s.alert) out.push_back({r.t, r.device, "alert_latch", "alert raised twice without a reset"});
      s.alert = true;
      if (is_plc(r.device) && !s.halted && !s.disrupted) s.pending_since = r.t;
    } else if (r.kind == kind::outputs_on) {
      if (!s.alert) out.push_back({r.t, r.device, "trigger_equivalence", "outputs forced on without an alert"});
      s.disrupted = true;
      s.pending_since.reset();
    } else if (r.kind == kind::core_output) {
      if (s.disrupted) out.push_back({r.t, r.device, "trigger_equivalence", "core output changed while disrupted"});
    } else if (r.kind == kind::disarmed) {
      s.alert = false;
      s.disrupted = false;
      s.pending_since.reset();
    } else if (r.kind == kind::config_replaced) {
      const auto* dm = r.field("dm");
      if (dm && *dm == "0") {
        s.alert = false;
        s.disrupted = false;
        s.pending_since.reset();
      }
    } else if (r.kind == kind::halted) {
      s.halted = true;
      s.pending_since.reset();
    } else if (!is_plc(r.device) && !r.device.empty()) {
      const bool failure = r.kind == kind::poll_failed || r.kind == kind::alert_observed;
      if ((failure || r.kind == kind::poll_sent) && ew_ceased[r.device]) {
        out.push_back({r.t, r.device, "ew_cessation", r.kind + " after cessation"});
      }
      if (failure || r.kind == kind::polling_ceased) ew_ceased[r.device] = true;
    }
  }
  // Pending alerts whose scan window extends past the trace end are not judged.
  return out;
}

std::shared_ptr<CycleAuditor> CycleAuditor::attach(Fleet& fleet) {
  auto aud = std::make_shared<CycleAuditor>();
  for (const auto& id : fleet.plc_ids()) {
    Plc& plc = fleet.plc(id);
    const bool has_core = !plc.config().core_blocks.empty();
    std::weak_ptr<CycleAuditor> weak = aud;
    plc.set_cycle_observer([weak, id, has_core](const CycleObservation& o) {
      auto a = weak.lock();
      if (!a) return;
      ++a->cycles_;
      if (o.enable && o.alert) {
        if (!o.all_outputs_on || o.core_executed) {
          a->violations_.push_back({o.t, id, "trigger_equivalence", "alerted cycle did not disrupt"});
        }
      } else if (has_core && !o.core_executed) {
        a->violations_.push_back({o.t, id, "trigger_equivalence", "core skipped without alert"});
      }
    });
  }
  return aud;
}

}  // namespace dmsim
