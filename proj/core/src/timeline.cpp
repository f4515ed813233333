#include "dmsim/timeline.hpp"

#include <algorithm>
#include <map>
#include <ostream>

namespace dmsim {

Timeline emit_timeline(const TraceLog& trace, const std::vector<DeviceId>& devices) {
  Timeline tl;
  tl.devices = devices;
  if (tl.devices.empty()) {
    for (const auto& d : trace.header.devices) tl.devices.push_back(d.id);
  }
  const auto& recs = trace.records();
  if (recs.empty()) return tl;

  std::int64_t last = 0;
  for (const auto& r : recs) last = std::max(last, r.t.ms);
  const std::size_t seconds = static_cast<std::size_t>(last / 1000) + 1;

  std::map<DeviceId, std::size_t> col;
  for (std::size_t i = 0; i < tl.devices.size(); ++i) col[tl.devices[i]] = i;
  std::vector<std::vector<char>> mark(seconds, std::vector<char>(tl.devices.size(), '-'));
  std::vector<std::vector<int>> alert(seconds, std::vector<int>(tl.devices.size(), -1));

  auto touch = [&](std::size_t s, const DeviceId& d, bool ok) {
    auto it = col.find(d);
    if (it == col.end()) return;
    char& c = mark[s][it->second];
    if (!ok) {
      c = 'X';
    } else if (c == '-') {
      c = 'P';
    }
  };
  std::vector<int> state(tl.devices.size(), 0);
  std::size_t cursor = 0;
  for (std::size_t s = 0; s < seconds; ++s) {
    const std::int64_t upto = static_cast<std::int64_t>(s + 1) * 1000;
    for (; cursor < recs.size() && recs[cursor].t.ms < upto; ++cursor) {
      const auto& r = recs[cursor];
      if (r.kind == kind::poll_sent || r.kind == kind::poll_failed) {
        const bool ok = r.kind == kind::poll_sent;
        touch(s, r.device, ok);
        if (const auto* target = r.field("target")) touch(s, *target, ok);
        continue;
      }
      auto it = col.find(r.device);
      if (it == col.end()) continue;
      if (r.kind == kind::alert_raised) {
        state[it->second] = 1;
      } else if (r.kind == kind::disarmed) {
        state[it->second] = 0;
      } else if (r.kind == kind::config_replaced) {
        const auto* dm = r.field("dm");
        if (dm && *dm == "0") state[it->second] = 0;
      }
    }
    alert[s] = state;
  }

  tl.rows.resize(seconds);
  for (std::size_t s = 0; s < seconds; ++s) {
    for (std::size_t d = 0; d < tl.devices.size(); ++d) {
      tl.rows[s].push_back(std::string(1, mark[s][d]) + std::to_string(alert[s][d]));
    }
  }
  return tl;
}

void write_timeline(std::ostream& out, const Timeline& t) {
  out << "second";
  for (const auto& d : t.devices) out << ',' << d;
  out << '\n';
  for (std::size_t s = 0; s < t.rows.size(); ++s) {
    out << s;
    for (const auto& c : t.rows[s]) out << ',' << c;
    out << '\n';
  }
}

}  // namespace dmsim
