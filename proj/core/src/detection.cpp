#include "dmsim/detection.hpp"

#include <algorithm>
#include <ostream>

#include <json.hpp>

#include "dmsim/fleet.hpp"

namespace dmsim {

std::string to_string(const FlowKey& k) {
  return k.src + ">" + k.dst + ":" + std::string(to_string(k.function)) + ":" + std::to_string(k.db);
}

FlowKey parse_flow_key(std::string_view s) {
  const auto gt = s.find('>');
  const auto c1 = s.find(':', gt == std::string_view::npos ? 0 : gt);
  const auto c2 = c1 == std::string_view::npos ? c1 : s.find(':', c1 + 1);
  if (gt == std::string_view::npos || c1 == std::string_view::npos || c2 == std::string_view::npos) {
    throw Error("malformed flow key: " + std::string(s));
  }
  FlowKey k;
  k.src = std::string(s.substr(0, gt));
  k.dst = std::string(s.substr(gt + 1, c1 - gt - 1));
  k.function = parse_function(s.substr(c1 + 1, c2 - c1 - 1));
  try {
    k.db = std::stoi(std::string(s.substr(c2 + 1)));
  } catch (const std::exception&) {
    throw Error("malformed flow key: " + std::string(s));
  }
  return k;
}

std::string_view to_string(AlertKind k) {
  switch (k) {
    case AlertKind::novel_flow: return "novel_flow";
    case AlertKind::period_anomaly: return "period_anomaly";
    case AlertKind::config_deviation: return "config_deviation";
  }
  return "?";
}

FlowBaseline learn_baseline(const std::vector<FlowRecord>& flows, SimTime window_start, SimTime window_end) {
  if (window_end <= window_start) throw Error("baseline window end must be after its start");
  FlowBaseline b;
  b.window_start = window_start;
  b.window_end = window_end;
  std::map<FlowKey, SimTime> last;
  std::map<FlowKey, std::int64_t> gap_sum;
  for (const auto& f : flows) {
    if (f.t < window_start || f.t >= window_end) continue;
    const FlowKey k = FlowKey::of(f);
    b.learned.insert(k);
    auto& st = b.stats[k];
    ++st.count;
    if (auto it = last.find(k); it != last.end()) {
      const SimTime gap = f.t - it->second;
      if (st.count == 2) {
        st.min = st.max = gap;
      } else {
        st.min = std::min(st.min, gap);
        st.max = std::max(st.max, gap);
      }
      gap_sum[k] += gap.ms;
    }
    last[k] = f.t;
  }
  if (b.learned.empty()) throw Error("baseline window contains no flow records");
  for (auto& [k, st] : b.stats) {
    if (st.count >= 2) st.mean = static_cast<double>(gap_sum[k]) / static_cast<double>(st.count - 1);
  }
  return b;
}

std::string baseline_to_json(const FlowBaseline& b) {
  nlohmann::ordered_json j;
  j["window_start_ms"] = b.window_start.ms;
  j["window_end_ms"] = b.window_end.ms;
  j["flows"] = nlohmann::ordered_json::array();
  for (const auto& k : b.learned) {
    nlohmann::ordered_json f;
    f["key"] = to_string(k);
    if (auto it = b.stats.find(k); it != b.stats.end()) {
      f["count"] = it->second.count;
      f["min_ms"] = it->second.min.ms;
      f["mean_ms"] = it->second.mean;
      f["max_ms"] = it->second.max.ms;
    }
    j["flows"].push_back(std::move(f));
  }
  return j.dump(2) + "\n";
}

FlowBaseline baseline_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    FlowBaseline b;
    b.window_start = SimTime{j.at("window_start_ms").get<std::int64_t>()};
    b.window_end = SimTime{j.at("window_end_ms").get<std::int64_t>()};
    for (const auto& f : j.at("flows")) {
      const FlowKey k = parse_flow_key(f.at("key").get<std::string>());
      b.learned.insert(k);
      PeriodStats st;
      st.count = f.value("count", std::size_t{0});
      st.min = SimTime{f.value("min_ms", std::int64_t{0})};
      st.mean = f.value("mean_ms", 0.0);
      st.max = SimTime{f.value("max_ms", std::int64_t{0})};
      b.stats[k] = st;
    }
    return b;
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("baseline: ") + e.what());
  }
}

std::vector<DetectionAlert> detect(const FlowBaseline& baseline, const std::vector<FlowRecord>& flows,
                                   const DetectOptions& options) {
  std::vector<DetectionAlert> out;
  if (flows.empty()) return out;
  SimTime log_end = flows.front().t;
  for (const auto& f : flows) log_end = std::max(log_end, f.t);

  std::set<FlowKey> novel_seen;
  std::map<FlowKey, SimTime> last;
  for (const auto& f : flows) {
    const FlowKey k = FlowKey::of(f);
    if (!baseline.learned.contains(k)) {
      if (novel_seen.insert(k).second) {
        out.push_back({f.t, AlertKind::novel_flow, to_string(k), "first seen"});
      }
      continue;
    }
    auto prev = last.find(k);
    if (prev != last.end()) {
      auto st = baseline.stats.find(k);
      if (st != baseline.stats.end() && st->second.count >= 2 && st->second.max > SimTime{0}) {
        const double gap = static_cast<double>((f.t - prev->second).ms);
        const double hi = options.factor * static_cast<double>(st->second.max.ms);
        const double lo = static_cast<double>(st->second.min.ms) / options.factor;
        if (gap > hi) {
          out.push_back({f.t, AlertKind::period_anomaly, to_string(k),
                         "gap " + std::to_string(static_cast<std::int64_t>(gap)) + " ms above baseline max " +
                             std::to_string(st->second.max.ms) + " ms"});
        } else if (gap < lo) {
          out.push_back({f.t, AlertKind::period_anomaly, to_string(k),
                         "gap " + std::to_string(static_cast<std::int64_t>(gap)) + " ms below baseline min " +
                             std::to_string(st->second.min.ms) + " ms"});
        }
      }
    }
    last[k] = f.t;
  }

  for (const auto& [k, t] : last) {
    auto st = baseline.stats.find(k);
    if (st == baseline.stats.end() || st->second.count < 2 || st->second.max <= SimTime{0}) continue;
    const double gap = static_cast<double>((log_end - t).ms);
    if (gap > options.factor * static_cast<double>(st->second.max.ms)) {
      out.push_back({log_end, AlertKind::period_anomaly, to_string(k),
                     "stopped; last seen at " + std::to_string(t.ms) + " ms"});
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const DetectionAlert& a, const DetectionAlert& b) { return a.t < b.t; });
  return out;
}

namespace {

std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (const auto& x : v) s += (s.empty() ? "" : "|") + x;
  return s;
}

/// Flattens a configuration into artifact name -> signature. Presence of a
/// key means the artifact exists.
std::map<std::string, std::string> artifacts(const PlcConfig& c) {
  std::map<std::string, std::string> a;
  for (const auto& [n, bytes] : c.data_blocks) a["data_block:" + std::to_string(n)] = std::to_string(bytes.size());
  for (const auto& b : c.core_blocks) {
    a["core_block:" + b.name] = std::to_string(static_cast<int>(b.behavior)) + "/" + join(b.outputs) + "/" +
                                std::to_string(b.tank.initial_level) + "," + std::to_string(b.tank.low) + "," +
                                std::to_string(b.tank.high) + "," + std::to_string(b.tank.fill_rate) + "," +
                                std::to_string(b.tank.drain_rate);
    if (b.gated_by_alert) a["gate:" + b.name] = "";
  }
  if (c.dm) {
    for (const auto& n : c.dm->blocks) a["dm_block:" + n] = "";
  }
  for (const auto& o : c.output_cards) a["output_card:" + o.address] = "";
  for (std::size_t i = 0; i < c.comm.size(); ++i) {
    const auto& f = c.comm[i];
    a["comm_function:" + std::to_string(i)] =
        f.src + ">" + f.dst + "/" + f.kind + "/" + std::to_string(f.db) + "/" + std::to_string(f.period.ms);
  }
  a["safe_shutdown_signal"] = c.safe_shutdown_signal ? to_string(*c.safe_shutdown_signal) : "none";
  a["scan_interval"] = std::to_string(c.scan_interval.ms);
  if (c.config_password) a["password"] = *c.config_password;
  return a;
}

}  // namespace

std::vector<DetectionAlert> diff_config(const ProjectModel& project,
                                        const std::map<DeviceId, std::optional<PlcConfig>>& live, SimTime t) {
  std::vector<DetectionAlert> out;
  for (const ProjectDevice* d : project.plcs()) {
    auto it = live.find(d->id);
    if (it == live.end() || !it->second) {
      out.push_back({t, AlertKind::config_deviation, d->id + ":access", "configuration access lost"});
      continue;
    }
    const auto want = artifacts(plc_config_from_project(project, *d));
    const auto have = artifacts(*it->second);
    for (const auto& [name, sig] : want) {
      auto h = have.find(name);
      if (h == have.end()) {
        out.push_back({t, AlertKind::config_deviation, d->id + ":" + name, "removed"});
      } else if (h->second != sig) {
        out.push_back({t, AlertKind::config_deviation, d->id + ":" + name, "changed"});
      }
    }
    for (const auto& [name, sig] : have) {
      if (!want.contains(name)) out.push_back({t, AlertKind::config_deviation, d->id + ":" + name, "added"});
    }
  }
  return out;
}

std::map<DeviceId, std::optional<PlcConfig>> collect_snapshots(Fleet& fleet, const ProjectModel& project,
                                                               const std::optional<std::string>& credential) {
  if (!fleet.has_ew()) throw Error("snapshot collection needs an engineering workstation");
  std::map<DeviceId, std::optional<PlcConfig>> out;
  for (const ProjectDevice* d : project.plcs()) {
    NetMessage m;
    m.src = fleet.ew().id();
    m.dst = d->id;
    m.function = ProtocolFunction::config_read;
    m.credential = credential ? credential : d->config_password;
    const auto r = fleet.net().deliver(m);
    if (r.ok() && r.response_payload) {
      out[d->id] = decode_config(*r.response_payload);
    } else {
      out[d->id] = std::nullopt;
    }
  }
  return out;
}

void write_alerts(std::ostream& out, const std::vector<DetectionAlert>& alerts) {
  out << kAlertCsvHeader << '\n';
  for (const auto& a : alerts) {
    std::string detail = a.detail;
    std::replace(detail.begin(), detail.end(), ',', ';');
    out << a.t.ms << ',' << to_string(a.kind) << ',' << a.subject << ',' << detail << '\n';
  }
}

}  // namespace dmsim
