#pragma once

#include <memory>
#include <string>
#include <vector>

#include "dmsim/trace.hpp"

namespace dmsim {

class Fleet;

struct AuditViolation {
  SimTime t;
  DeviceId device;
  std::string invariant;  // alert_latch | trigger_equivalence | ew_cessation
  std::string detail;
};

/// Checks protocol invariants that are visible in a trace:
///  - alert_latch: a device raises alert at most once between authorized
///    resets (disarm or password-gated re-flash without the blocks).
///  - trigger_equivalence: every PLC alert is followed by outputs_on within
///    one scan unless the PLC halts or is reset first; outputs_on is only
///    recorded while alerted; no core output changes while disrupted.
///  - ew_cessation: after the workstation's first poll_failed or
///    alert_observed it sends no further polls.
std::vector<AuditViolation> audit_trace(const TraceLog& trace);

/// Per-scan check attached to every PLC of a fleet: with the blocks enabled
/// and alert set, all outputs are on and no core block ran; otherwise core
/// blocks ran (for PLCs that have any).
class CycleAuditor {
 public:
  static std::shared_ptr<CycleAuditor> attach(Fleet& fleet);

  const std::vector<AuditViolation>& violations() const { return violations_; }
  std::uint64_t cycles() const { return cycles_; }

 private:
  std::vector<AuditViolation> violations_;
  std::uint64_t cycles_ = 0;
};

}  // namespace dmsim
