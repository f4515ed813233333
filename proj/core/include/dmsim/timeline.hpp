#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "dmsim/trace.hpp"

namespace dmsim {

/// Per-second grid. A cell is a poll mark followed by the alert state at the
/// end of that second: P = polls involving the device all succeeded,
/// X = at least one failed, - = no poll. "P0", "X1", "-1".
struct Timeline {
  std::vector<DeviceId> devices;
  std::vector<std::vector<std::string>> rows;  // rows[second][device]
};

/// `devices` empty selects every device in the trace header.
Timeline emit_timeline(const TraceLog& trace, const std::vector<DeviceId>& devices = {});
void write_timeline(std::ostream& out, const Timeline& t);

}  // namespace dmsim
