#pragma once

#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dmsim/scenario.hpp"

namespace dmsim {
inline void PrintTo(SimTime t, std::ostream* os) { *os << t.ms << " ms"; }
}  // namespace dmsim

namespace dmsim::testing {

inline std::string fixture(const std::string& rel) { return std::string(DMSIM_FIXTURE_DIR) + "/" + rel; }

inline std::string plc_name(int i) { return "PLC" + std::to_string(i + 1); }

using Edge = std::pair<int, int>;

struct ProjectShape {
  int plcs = 3;
  std::vector<Edge> plc_links;  // indices into PLC1..PLCn
  std::vector<int> ew_links;    // PLCs wired to the workstation
  bool with_ew = true;
  int scan_ms = 100;
  std::vector<int> scan_override;  // per PLC, empty = scan_ms
};

inline nlohmann::json plc_json(const std::string& id, int scan_ms) {
  return {
      {"id", id},
      {"kind", "plc"},
      {"scan_interval_ms", scan_ms},
      {"data_blocks", {{{"number", 1}, {"size", 16}}, {{"number", 10}, {"size", 8}}}},
      {"core_blocks",
       {{{"name", "TankControl"}, {"behavior", "tank_control"}, {"outputs", {"Q0.0", "Q0.1"}}}}},
      {"output_cards", {{{"address", "Q0.0"}}, {{"address", "Q0.1"}}}},
  };
}

inline ProjectModel make_project(const ProjectShape& s) {
  nlohmann::json j;
  j["name"] = "generated";
  j["devices"] = nlohmann::json::array();
  if (s.with_ew) j["devices"].push_back({{"id", "EW"}, {"kind", "ew"}});
  for (int i = 0; i < s.plcs; ++i) {
    const int scan = s.scan_override.empty() ? s.scan_ms : s.scan_override.at(i);
    j["devices"].push_back(plc_json(plc_name(i), scan));
  }
  j["links"] = nlohmann::json::array();
  for (int p : s.ew_links) j["links"].push_back({"EW", plc_name(p)});
  for (auto [a, b] : s.plc_links) j["links"].push_back({plc_name(a), plc_name(b)});
  j["comm_functions"] = nlohmann::json::array();
  return parse_project(j.dump());
}

inline std::vector<int> all_plcs(int n) {
  std::vector<int> v;
  for (int i = 0; i < n; ++i) v.push_back(i);
  return v;
}

/// Deployed and armed at t=0 with a far deadline unless told otherwise.
inline ScenarioScript armed_script(ProjectModel project, SimTime horizon, SimTime deadline = SimTime{0}) {
  ScenarioScript s;
  s.name = "generated";
  s.project = std::move(project);
  s.horizon = horizon;
  s.dmplc.key = "k";
  s.dmplc.auto_arm_at = SimTime{0};
  s.dmplc.deadline = deadline > SimTime{0} ? deadline : horizon + SimTime{60000};
  return s;
}

inline std::vector<const TraceRecord*> records_of(const TraceLog& log, std::string_view kind_name,
                                                  const std::string& device = {}) {
  std::vector<const TraceRecord*> out;
  for (const auto& r : log.records()) {
    if (r.kind == kind_name && (device.empty() || r.device == device)) out.push_back(&r);
  }
  return out;
}

inline std::size_t count_kind(const TraceLog& log, std::string_view kind_name, const std::string& device = {}) {
  return records_of(log, kind_name, device).size();
}

inline std::optional<SimTime> first_time(const TraceLog& log, std::string_view kind_name, const std::string& device) {
  for (const auto& r : log.records()) {
    if (r.kind == kind_name && r.device == device) return r.t;
  }
  return std::nullopt;
}

/// Breadth-first distances over an undirected adjacency list.
inline std::map<std::string, int> bfs(const std::map<std::string, std::set<std::string>>& adj, const std::string& from) {
  std::map<std::string, int> dist{{from, 0}};
  std::vector<std::string> frontier{from};
  while (!frontier.empty()) {
    std::vector<std::string> next;
    for (const auto& u : frontier) {
      auto it = adj.find(u);
      if (it == adj.end()) continue;
      for (const auto& v : it->second) {
        if (dist.emplace(v, dist[u] + 1).second) next.push_back(v);
      }
    }
    frontier = std::move(next);
  }
  return dist;
}

}  // namespace dmsim::testing
