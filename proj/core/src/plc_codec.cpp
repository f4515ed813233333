// Wire form of PlcConfig carried by config_read / config_write payloads.

#include <json.hpp>

#include "dmsim/plc.hpp"

namespace dmsim {

using nlohmann::json;

namespace {

json bit_json(const BitAddress& a) { return json::array({a.db, a.byte, a.bit}); }

BitAddress bit_from(const json& j) { return BitAddress{j.at(0).get<int>(), j.at(1).get<int>(), j.at(2).get<int>()}; }

std::string behavior_name(CoreBehavior b) { return b == CoreBehavior::tank_control ? "tank_control" : "idle"; }

CoreBehavior behavior_from(const std::string& s) {
  if (s == "tank_control") return CoreBehavior::tank_control;
  if (s == "idle") return CoreBehavior::idle;
  throw Error("unknown core block behavior: " + s);
}

}  // namespace

Bytes encode_config(const PlcConfig& cfg) {
  json j;
  j["id"] = cfg.id;
  j["scan_interval_ms"] = cfg.scan_interval.ms;
  json dbs = json::array();
  for (const auto& [n, bytes] : cfg.data_blocks) dbs.push_back({{"number", n}, {"bytes", bytes}});
  j["data_blocks"] = dbs;
  json cores = json::array();
  for (const auto& b : cfg.core_blocks) {
    cores.push_back({{"name", b.name},
                     {"behavior", behavior_name(b.behavior)},
                     {"outputs", b.outputs},
                     {"gated_by_alert", b.gated_by_alert},
                     {"tank", json::array({b.tank.initial_level, b.tank.low, b.tank.high, b.tank.fill_rate,
                                           b.tank.drain_rate})}});
  }
  j["core_blocks"] = cores;
  json outs = json::array();
  for (const auto& o : cfg.output_cards) outs.push_back({{"address", o.address}, {"state", o.state}});
  j["output_cards"] = outs;
  json comm = json::array();
  for (const auto& c : cfg.comm) comm.push_back(json::array({c.src, c.dst, c.kind, c.db, c.period.ms}));
  j["comm"] = comm;
  if (cfg.safe_shutdown_signal) j["safe_shutdown_signal"] = bit_json(*cfg.safe_shutdown_signal);
  if (cfg.config_password) j["config_password"] = *cfg.config_password;
  if (cfg.dm) {
    const auto& dm = *cfg.dm;
    json out = json::array();
    for (const auto& a : dm.outgoing) out.push_back({a.poller, a.target, bit_json(a.write_bit), a.watch_alert});
    json watched = json::array();
    for (const auto& w : dm.watched) watched.push_back({w.source, bit_json(w.bit)});
    j["dm"] = {{"blocks", dm.blocks},
               {"authorized_ew", dm.authorized_ew},
               {"poll_interval_ms", dm.poll_interval.ms},
               {"deadband_misses", dm.deadband_misses},
               {"outgoing", out},
               {"watched", watched},
               {"watch_safe_shutdown", dm.watch_safe_shutdown},
               {"restore_outputs_on_disarm", dm.restore_outputs_on_disarm}};
  }
  const std::string text = j.dump();
  return Bytes(text.begin(), text.end());
}

PlcConfig decode_config(const Bytes& bytes) {
  try {
    const json j = json::parse(bytes.begin(), bytes.end());
    PlcConfig cfg;
    cfg.id = j.at("id").get<std::string>();
    cfg.scan_interval = SimTime{j.at("scan_interval_ms").get<std::int64_t>()};
    for (const auto& d : j.at("data_blocks")) cfg.data_blocks[d.at("number").get<int>()] = d.at("bytes").get<Bytes>();
    for (const auto& b : j.at("core_blocks")) {
      CoreBlock blk;
      blk.name = b.at("name").get<std::string>();
      blk.behavior = behavior_from(b.at("behavior").get<std::string>());
      blk.outputs = b.at("outputs").get<std::vector<std::string>>();
      blk.gated_by_alert = b.at("gated_by_alert").get<bool>();
      const auto& t = b.at("tank");
      blk.tank = TankParams{t.at(0).get<int>(), t.at(1).get<int>(), t.at(2).get<int>(), t.at(3).get<int>(),
                            t.at(4).get<int>()};
      cfg.core_blocks.push_back(std::move(blk));
    }
    for (const auto& o : j.at("output_cards")) {
      cfg.output_cards.push_back(OutputCard{o.at("address").get<std::string>(), o.at("state").get<bool>()});
    }
    for (const auto& c : j.at("comm")) {
      cfg.comm.push_back(CommFunction{c.at(0).get<std::string>(), c.at(1).get<std::string>(), c.at(2).get<std::string>(),
                                      c.at(3).get<int>(), SimTime{c.at(4).get<std::int64_t>()}});
    }
    if (j.contains("safe_shutdown_signal")) cfg.safe_shutdown_signal = bit_from(j["safe_shutdown_signal"]);
    if (j.contains("config_password")) cfg.config_password = j["config_password"].get<std::string>();
    if (j.contains("dm")) {
      const auto& d = j["dm"];
      DmProgram dm;
      dm.blocks = d.at("blocks").get<std::vector<std::string>>();
      dm.authorized_ew = d.at("authorized_ew").get<std::string>();
      dm.poll_interval = SimTime{d.at("poll_interval_ms").get<std::int64_t>()};
      dm.deadband_misses = d.at("deadband_misses").get<int>();
      for (const auto& a : d.at("outgoing")) {
        dm.outgoing.push_back(PollAssignment{a.at(0).get<std::string>(), a.at(1).get<std::string>(), bit_from(a.at(2)),
                                             a.at(3).get<bool>()});
      }
      for (const auto& w : d.at("watched")) dm.watched.push_back(WatchedBit{w.at(0).get<std::string>(), bit_from(w.at(1))});
      dm.watch_safe_shutdown = d.at("watch_safe_shutdown").get<bool>();
      dm.restore_outputs_on_disarm = d.at("restore_outputs_on_disarm").get<bool>();
      cfg.dm = std::move(dm);
    }
    return cfg;
  } catch (const json::exception& e) {
    throw Error(std::string("malformed PLC configuration payload: ") + e.what());
  }
}

}  // namespace dmsim
