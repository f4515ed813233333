#include "dmsim/project.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace dmsim {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

const std::set<std::string> kDeviceKeys = {"id",          "kind",         "address",
                                           "scan_interval_ms", "data_blocks", "core_blocks",
                                           "output_cards", "safe_shutdown_signal", "config_password"};
const std::set<std::string> kTopKeys = {"name", "devices", "links", "comm_functions", "protection"};

[[noreturn]] void field_error(const std::string& path, const std::string& what) {
  throw Error("project: " + path + ": " + what);
}

template <typename T>
T get_as(const ordered_json& j, const std::string& path) {
  try {
    return j.get<T>();
  } catch (const json::exception&) {
    field_error(path, "wrong type");
  }
}

const ordered_json& require(const ordered_json& obj, const std::string& key, const std::string& path) {
  if (!obj.is_object() || !obj.contains(key)) field_error(path + "." + key, "missing");
  return obj.at(key);
}

std::string extras_of(const ordered_json& obj, const std::set<std::string>& known) {
  ordered_json extra = ordered_json::object();
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!known.contains(it.key())) extra[it.key()] = it.value();
  }
  return extra.empty() ? std::string() : extra.dump();
}

BitAddress parse_bit(const ordered_json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 3) field_error(path, "expected [db, byte, bit]");
  BitAddress a{get_as<int>(j[0], path + "[0]"), get_as<int>(j[1], path + "[1]"), get_as<int>(j[2], path + "[2]")};
  if (a.db < 0 || a.byte < 0 || a.bit < 0 || a.bit > 7) field_error(path, "address out of range");
  return a;
}

CoreBlock parse_core(const ordered_json& j, const std::string& path) {
  CoreBlock b;
  b.name = get_as<std::string>(require(j, "name", path), path + ".name");
  if (b.name.empty()) field_error(path + ".name", "empty");
  const std::string behavior = j.contains("behavior") ? get_as<std::string>(j["behavior"], path + ".behavior") : "tank_control";
  if (behavior == "tank_control") {
    b.behavior = CoreBehavior::tank_control;
  } else if (behavior == "idle") {
    b.behavior = CoreBehavior::idle;
  } else {
    field_error(path + ".behavior", "unknown behavior '" + behavior + "'");
  }
  if (j.contains("outputs")) b.outputs = get_as<std::vector<std::string>>(j["outputs"], path + ".outputs");
  if (j.contains("tank")) {
    const auto& t = j["tank"];
    auto num = [&](const char* k, int dflt) { return t.contains(k) ? get_as<int>(t[k], path + ".tank." + k) : dflt; };
    b.tank = TankParams{num("initial_level", 50), num("low", 20), num("high", 80), num("fill_rate", 2),
                        num("drain_rate", 1)};
  }
  return b;
}

}  // namespace

std::vector<const ProjectDevice*> ProjectModel::plcs() const {
  std::vector<const ProjectDevice*> out;
  for (const auto& d : devices) {
    if (d.is_plc()) out.push_back(&d);
  }
  return out;
}

const ProjectDevice* ProjectModel::workstation() const {
  for (const auto& d : devices) {
    if (d.kind == "ew") return &d;
  }
  return nullptr;
}

const ProjectDevice* ProjectModel::find(const DeviceId& id) const {
  for (const auto& d : devices) {
    if (d.id == id) return &d;
  }
  return nullptr;
}

ProjectDevice* ProjectModel::find(const DeviceId& id) {
  for (auto& d : devices) {
    if (d.id == id) return &d;
  }
  return nullptr;
}

ProjectModel parse_project(const std::string& text) {
  ordered_json root;
  try {
    root = ordered_json::parse(text);
  } catch (const json::parse_error& e) {
    const std::size_t upto = std::min<std::size_t>(e.byte, text.size());
    const auto line = 1 + std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(upto), '\n');
    throw Error("project: line " + std::to_string(line) + ": syntax error: " + e.what());
  }
  if (!root.is_object()) field_error("<root>", "expected an object");

  ProjectModel p;
  if (root.contains("name")) p.name = get_as<std::string>(root["name"], "name");
  p.extra_json = extras_of(root, kTopKeys);

  const auto& devices = require(root, "devices", "<root>");
  if (!devices.is_array()) field_error("devices", "expected a list");
  std::set<std::string> ids;
  for (std::size_t i = 0; i < devices.size(); ++i) {
    const std::string path = "devices[" + std::to_string(i) + "]";
    const auto& d = devices[i];
    if (!d.is_object()) field_error(path, "expected an object");
    ProjectDevice dev;
    dev.id = get_as<std::string>(require(d, "id", path), path + ".id");
    if (dev.id.empty() || dev.id.find_first_of(" ,:=%\t\n") != std::string::npos) {
      field_error(path + ".id", "invalid device id '" + dev.id + "'");
    }
    if (!ids.insert(dev.id).second) field_error(path + ".id", "duplicate device id '" + dev.id + "'");
    dev.kind = get_as<std::string>(require(d, "kind", path), path + ".kind");
    if (dev.kind != "plc" && dev.kind != "ew") field_error(path + ".kind", "expected plc or ew");
    if (d.contains("address")) dev.address = get_as<std::string>(d["address"], path + ".address");
    if (d.contains("scan_interval_ms")) {
      dev.scan_interval = SimTime{get_as<std::int64_t>(d["scan_interval_ms"], path + ".scan_interval_ms")};
      if (dev.scan_interval <= SimTime{0}) field_error(path + ".scan_interval_ms", "must be positive");
    }
    if (d.contains("data_blocks")) {
      std::set<int> numbers;
      for (std::size_t k = 0; k < d["data_blocks"].size(); ++k) {
        const std::string bp = path + ".data_blocks[" + std::to_string(k) + "]";
        const auto& b = d["data_blocks"][k];
        ProjectDataBlock db{get_as<int>(require(b, "number", bp), bp + ".number"),
                            get_as<std::size_t>(require(b, "size", bp), bp + ".size")};
        if (db.number < 0 || db.size == 0) field_error(bp, "number must be >= 0 and size > 0");
        if (!numbers.insert(db.number).second) field_error(bp + ".number", "duplicate data block");
        dev.data_blocks.push_back(db);
      }
    }
    if (d.contains("core_blocks")) {
      for (std::size_t k = 0; k < d["core_blocks"].size(); ++k) {
        dev.core_blocks.push_back(parse_core(d["core_blocks"][k], path + ".core_blocks[" + std::to_string(k) + "]"));
      }
    }
    if (d.contains("output_cards")) {
      for (std::size_t k = 0; k < d["output_cards"].size(); ++k) {
        const std::string op = path + ".output_cards[" + std::to_string(k) + "]";
        dev.output_cards.push_back(get_as<std::string>(require(d["output_cards"][k], "address", op), op + ".address"));
      }
    }
    if (d.contains("safe_shutdown_signal")) {
      dev.safe_shutdown_signal = parse_bit(d["safe_shutdown_signal"], path + ".safe_shutdown_signal");
    }
    if (d.contains("config_password")) dev.config_password = get_as<std::string>(d["config_password"], path + ".config_password");
    dev.extra_json = extras_of(d, kDeviceKeys);
    for (const auto& core : dev.core_blocks) {
      for (const auto& out : core.outputs) {
        if (std::find(dev.output_cards.begin(), dev.output_cards.end(), out) == dev.output_cards.end()) {
          field_error(path + ".core_blocks", "block '" + core.name + "' drives unknown output " + out);
        }
      }
    }
    p.devices.push_back(std::move(dev));
  }
  if (p.plcs().empty()) throw Error("project: no PLCs");
  int ews = 0;
  for (const auto& d : p.devices) ews += d.kind == "ew";
  if (ews > 1) throw Error("project: more than one engineering workstation");

  if (root.contains("links")) {
    std::set<std::pair<std::string, std::string>> seen;
    for (std::size_t i = 0; i < root["links"].size(); ++i) {
      const std::string path = "links[" + std::to_string(i) + "]";
      const auto& l = root["links"][i];
      if (!l.is_array() || l.size() != 2) field_error(path, "expected [a, b]");
      auto a = get_as<std::string>(l[0], path + "[0]");
      auto b = get_as<std::string>(l[1], path + "[1]");
      if (!p.find(a)) field_error(path, "unknown device '" + a + "'");
      if (!p.find(b)) field_error(path, "unknown device '" + b + "'");
      if (a == b) field_error(path, "self link");
      if (!seen.insert(std::minmax(a, b)).second) field_error(path, "duplicate link");
      p.links.emplace_back(a, b);
    }
  }
  if (root.contains("comm_functions")) {
    for (std::size_t i = 0; i < root["comm_functions"].size(); ++i) {
      const std::string path = "comm_functions[" + std::to_string(i) + "]";
      const auto& c = root["comm_functions"][i];
      if (!c.is_array() || c.size() < 3 || c.size() > 5) field_error(path, "expected [src, dst, kind, db?, period_ms?]");
      CommFunction f;
      f.src = get_as<std::string>(c[0], path + "[0]");
      f.dst = get_as<std::string>(c[1], path + "[1]");
      f.kind = get_as<std::string>(c[2], path + "[2]");
      const auto* src = p.find(f.src);
      const auto* dst = p.find(f.dst);
      if (!src) field_error(path, "unknown device '" + f.src + "'");
      if (!dst || !dst->is_plc()) field_error(path, "destination must be a known PLC");
      const bool plc_kind = f.kind == "put" || f.kind == "get";
      const bool ew_kind = f.kind == "read" || f.kind == "write";
      if ((src->is_plc() && !plc_kind) || (!src->is_plc() && !ew_kind)) {
        field_error(path + "[2]", "kind '" + f.kind + "' not valid for a " + src->kind + " source");
      }
      f.db = c.size() > 3 ? get_as<int>(c[3], path + "[3]") : (dst->data_blocks.empty() ? 1 : dst->data_blocks.front().number);
      if (c.size() > 4) f.period = SimTime{get_as<std::int64_t>(c[4], path + "[4]")};
      if (f.period <= SimTime{0}) field_error(path + "[4]", "period must be positive");
      p.comm_functions.push_back(std::move(f));
    }
  }
  if (root.contains("protection")) {
    p.protection = get_as<std::string>(require(root["protection"], "password_digest", "protection"),
                                       "protection.password_digest");
  }
  return p;
}

ProjectModel load_project(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open project file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_project(ss.str());
}

std::string serialize_project(const ProjectModel& p) {
  ordered_json root = ordered_json::object();
  if (!p.name.empty()) root["name"] = p.name;
  ordered_json devices = ordered_json::array();
  for (const auto& d : p.devices) {
    ordered_json j;
    j["id"] = d.id;
    j["kind"] = d.kind;
    if (!d.address.empty()) j["address"] = d.address;
    if (d.is_plc()) {
      j["scan_interval_ms"] = d.scan_interval.ms;
      ordered_json dbs = ordered_json::array();
      for (const auto& b : d.data_blocks) dbs.push_back({{"number", b.number}, {"size", b.size}});
      j["data_blocks"] = dbs;
      ordered_json cores = ordered_json::array();
      for (const auto& c : d.core_blocks) {
        ordered_json cj;
        cj["name"] = c.name;
        cj["behavior"] = c.behavior == CoreBehavior::tank_control ? "tank_control" : "idle";
        cj["outputs"] = c.outputs;
        cj["tank"] = {{"initial_level", c.tank.initial_level}, {"low", c.tank.low},     {"high", c.tank.high},
                      {"fill_rate", c.tank.fill_rate},         {"drain_rate", c.tank.drain_rate}};
        cores.push_back(cj);
      }
      j["core_blocks"] = cores;
      ordered_json outs = ordered_json::array();
      for (const auto& o : d.output_cards) outs.push_back({{"address", o}});
      j["output_cards"] = outs;
      if (d.safe_shutdown_signal) {
        j["safe_shutdown_signal"] = {d.safe_shutdown_signal->db, d.safe_shutdown_signal->byte, d.safe_shutdown_signal->bit};
      }
    }
    if (d.config_password) j["config_password"] = *d.config_password;
    if (!d.extra_json.empty()) {
      const auto extra = ordered_json::parse(d.extra_json);
      for (const auto& [k, v] : extra.items()) j[k] = v;
    }
    devices.push_back(j);
  }
  root["devices"] = devices;
  ordered_json links = ordered_json::array();
  for (const auto& [a, b] : p.links) links.push_back({a, b});
  root["links"] = links;
  ordered_json comm = ordered_json::array();
  for (const auto& c : p.comm_functions) comm.push_back({c.src, c.dst, c.kind, c.db, c.period.ms});
  root["comm_functions"] = comm;
  if (p.protection) root["protection"] = {{"password_digest", *p.protection}};
  if (!p.extra_json.empty()) {
    const auto extra = ordered_json::parse(p.extra_json);
    for (const auto& [k, v] : extra.items()) root[k] = v;
  }
  return root.dump(2) + "\n";
}

void save_project(const ProjectModel& project, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write project file: " + path);
  out << serialize_project(project);
}

std::string password_digest(const std::string& password) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : password) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  static const char* hex = "0123456789abcdef";
  std::string out = "fnv1a64:";
  for (int i = 15; i >= 0; --i) out += hex[(h >> (i * 4)) & 0xf];
  return out;
}

PlcConfig plc_config_from_project(const ProjectModel& project, const ProjectDevice& device) {
  if (!device.is_plc()) throw Error(device.id + " is not a PLC");
  PlcConfig cfg;
  cfg.id = device.id;
  cfg.scan_interval = device.scan_interval;
  for (const auto& b : device.data_blocks) cfg.data_blocks[b.number] = Bytes(b.size, 0);
  cfg.core_blocks = device.core_blocks;
  for (const auto& o : device.output_cards) cfg.output_cards.push_back(OutputCard{o, false});
  for (const auto& c : project.comm_functions) {
    if (c.src == device.id) cfg.comm.push_back(c);
  }
  cfg.safe_shutdown_signal = device.safe_shutdown_signal;
  cfg.config_password = device.config_password;
  return cfg;
}

}  // namespace dmsim
