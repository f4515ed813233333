#include "dmsim/scenario.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json_reader.hpp"

namespace dmsim {

using nlohmann::json;
using detail::Reader;

std::string_view to_string(ActionKind k) {
  switch (k) {
    case ActionKind::cut_link: return "cut_link";
    case ActionKind::restore_link: return "restore_link";
    case ActionKind::pay_ransom: return "pay_ransom";
    case ActionKind::tamper_memory: return "tamper_memory";
    case ActionKind::halt_device: return "halt_device";
    case ActionKind::reflash_device: return "reflash_device";
    case ActionKind::safe_shutdown_signal: return "safe_shutdown_signal";
    case ActionKind::arm: return "arm";
  }
  return "?";
}

ActionKind parse_action_kind(std::string_view s) {
  for (auto k : {ActionKind::cut_link, ActionKind::restore_link, ActionKind::pay_ransom, ActionKind::tamper_memory,
                 ActionKind::halt_device, ActionKind::reflash_device, ActionKind::safe_shutdown_signal,
                 ActionKind::arm}) {
    if (to_string(k) == s) return k;
  }
  throw Error("unknown action kind: " + std::string(s));
}

std::string_view to_string(Predicate p) {
  switch (p) {
    case Predicate::alert_is: return "alert_is";
    case Predicate::outputs_all_on: return "outputs_all_on";
    case Predicate::outputs_unchanged: return "outputs_unchanged";
    case Predicate::ew_shutdown: return "ew_shutdown";
    case Predicate::trace_contains: return "trace_contains";
    case Predicate::trace_absent: return "trace_absent";
  }
  return "?";
}

namespace {

Predicate parse_predicate(std::string_view s) {
  for (auto p : {Predicate::alert_is, Predicate::outputs_all_on, Predicate::outputs_unchanged, Predicate::ew_shutdown,
                 Predicate::trace_contains, Predicate::trace_absent}) {
    if (to_string(p) == s) return p;
  }
  throw Error("unknown predicate: " + std::string(s));
}

}  // namespace

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::pass: return "PASS";
    case Verdict::fail: return "FAIL";
    case Verdict::error: return "ERROR";
  }
  return "?";
}

SimTime Assertion::latest() const {
  if (range) return range->second;
  if (at) return *at;
  return SimTime{0};
}

namespace detail {

ScenarioAction parse_action(const Reader& r) {
  ScenarioAction a;
  a.at = r.ms("at_ms");
  try {
    a.kind = parse_action_kind(r.at("kind").as<std::string>());
  } catch (const Error& e) {
    throw Error("scenario: " + r.path + ".kind: " + e.what());
  }
  switch (a.kind) {
    case ActionKind::cut_link:
    case ActionKind::restore_link: {
      const Reader link = r.at("link");
      if (!link.j.is_array() || link.j.size() != 2) throw Error("scenario: " + link.path + " must be [a, b]");
      a.device = link.index(0).as<std::string>();
      a.peer = link.index(1).as<std::string>();
      break;
    }
    case ActionKind::pay_ransom:
      a.key = r.at("key").as<std::string>();
      break;
    case ActionKind::arm:
      a.key = r.get<std::string>("key", "");
      break;
    case ActionKind::tamper_memory:
      a.device = r.at("device").as<std::string>();
      a.address = BitAddress{r.at("db").as<int>(), r.at("byte").as<int>(), r.at("bit").as<int>()};
      a.value = r.at("value").as<int>() != 0;
      if (a.address.bit < 0 || a.address.bit > 7 || a.address.byte < 0) {
        throw Error("scenario: " + r.path + " has an invalid bit address");
      }
      break;
    case ActionKind::reflash_device:
      a.device = r.at("device").as<std::string>();
      if (r.has("with_password") && !r.at("with_password").j.is_null()) {
        a.with_password = r.at("with_password").as<std::string>();
      }
      break;
    case ActionKind::halt_device:
    case ActionKind::safe_shutdown_signal:
      a.device = r.at("device").as<std::string>();
      break;
  }
  return a;
}

}  // namespace detail

using detail::parse_action;

namespace {

Assertion parse_assertion(const Reader& r, std::size_t i) {
  Assertion a;
  a.name = r.get<std::string>("name", "assertion-" + std::to_string(i));
  try {
    a.predicate = parse_predicate(r.at("predicate").as<std::string>());
  } catch (const Error& e) {
    throw Error("scenario: " + r.path + ".predicate: " + e.what());
  }
  if (r.has("at_ms")) a.at = r.ms("at_ms");
  if (r.has("range_ms")) {
    const Reader range = r.at("range_ms");
    if (!range.j.is_array() || range.j.size() != 2) throw Error("scenario: " + range.path + " must be [start, end]");
    a.range = std::pair{SimTime{range.index(0).as<std::int64_t>()}, SimTime{range.index(1).as<std::int64_t>()}};
    if (a.range->second < a.range->first) throw Error("scenario: " + range.path + " is inverted");
  }
  if (a.at && a.range) throw Error("scenario: " + r.path + " has both at_ms and range_ms");
  a.device = r.get<std::string>("device", "");
  a.value = r.get<int>("value", 1);
  a.kind = r.get<std::string>("kind", "");
  a.tolerance_scans = r.get<int>("tolerance_scans", 0);
  if (a.tolerance_scans < 0) throw Error("scenario: " + r.path + ".tolerance_scans must be >= 0");
  if (r.has("count")) a.count = r.at("count").as<std::size_t>();
  if (r.has("where")) {
    const Reader w = r.at("where");
    if (!w.j.is_object()) throw Error("scenario: " + w.path + " must be an object");
    for (const auto& [k, v] : w.j.items()) {
      a.where[k] = v.is_string() ? v.get<std::string>() : v.dump();
    }
  }
  switch (a.predicate) {
    case Predicate::alert_is:
    case Predicate::outputs_all_on:
      if (a.device.empty()) throw Error("scenario: " + r.path + " needs a device");
      if (!a.at && !a.range) throw Error("scenario: " + r.path + " needs at_ms or range_ms");
      break;
    case Predicate::outputs_unchanged:
      if (a.device.empty()) throw Error("scenario: " + r.path + " needs a device");
      break;
    case Predicate::ew_shutdown:
      if (!a.at && !a.range) throw Error("scenario: " + r.path + " needs at_ms or range_ms");
      break;
    case Predicate::trace_contains:
    case Predicate::trace_absent:
      if (a.kind.empty()) throw Error("scenario: " + r.path + " needs a record kind");
      break;
  }
  return a;
}

bool has_declared_link(const ProjectModel& p, const DeviceId& a, const DeviceId& b) {
  return std::any_of(p.links.begin(), p.links.end(),
                     [&](const auto& l) { return (l.first == a && l.second == b) || (l.first == b && l.second == a); });
}

}  // namespace

void validate_action(const ProjectModel& project, const ScenarioAction& a) {
  const std::string what = std::string(to_string(a.kind)) + " at " + std::to_string(a.at.ms) + " ms";
  auto need_device = [&](bool plc_only) -> const ProjectDevice& {
    const ProjectDevice* d = project.find(a.device);
    if (!d) throw Error(what + ": unknown device " + a.device);
    if (plc_only && !d->is_plc()) throw Error(what + ": " + a.device + " is not a PLC");
    return *d;
  };
  if (a.at < SimTime{0}) throw Error(what + ": negative time");
  switch (a.kind) {
    case ActionKind::cut_link:
    case ActionKind::restore_link:
      if (!has_declared_link(project, a.device, a.peer)) throw Error(what + ": unknown link " + a.device + "-" + a.peer);
      break;
    case ActionKind::pay_ransom:
      if (a.key.empty()) throw Error(what + ": empty key");
      [[fallthrough]];
    case ActionKind::arm:
      if (!project.workstation()) throw Error(what + ": project has no workstation");
      break;
    case ActionKind::tamper_memory:
      need_device(true);
      if (a.address.bit < 0 || a.address.bit > 7 || a.address.byte < 0 || a.address.db < 0) {
        throw Error(what + ": invalid bit address");
      }
      break;
    case ActionKind::halt_device:
      need_device(false);
      break;
    case ActionKind::reflash_device:
      need_device(true);
      if (!project.workstation()) throw Error(what + ": project has no workstation");
      break;
    case ActionKind::safe_shutdown_signal:
      if (!need_device(true).safe_shutdown_signal) throw Error(what + ": " + a.device + " has no safe-shutdown signal");
      break;
  }
}

ScenarioScript parse_scenario(const std::string& text, const std::string& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(std::string("scenario: syntax error: ") + e.what());
  }
  const Reader r{j, "scenario"};
  if (!j.is_object()) throw Error("scenario: document must be an object");
  ScenarioScript s;
  s.name = r.get<std::string>("name", "scenario");
  const auto rel = r.at("project_path").as<std::string>();
  std::filesystem::path pp(rel);
  if (pp.is_relative()) pp = std::filesystem::path(base_dir) / pp;
  s.project_path = pp.lexically_normal().string();
  s.project = load_project(s.project_path);
  s.horizon = r.ms("horizon_ms");
  if (s.horizon <= SimTime{0}) throw Error("scenario: horizon_ms must be positive");
  s.seed = r.get<std::uint64_t>("seed", 0);
  s.random_scan_phase = r.get<std::string>("scan_phase", "aligned") == "random";
  s.link_latency = SimTime{r.get<std::int64_t>("link_latency_ms", 0)};

  if (r.has("dmplc")) {
    const Reader d = r.at("dmplc");
    auto& m = s.dmplc;
    m.poll_interval = SimTime{d.get<std::int64_t>("poll_interval_ms", m.poll_interval.ms)};
    m.deadband_misses = d.get<int>("deadband_misses", m.deadband_misses);
    m.deadline = SimTime{d.get<std::int64_t>("deadline_ms", m.deadline.ms)};
    m.key = d.get<std::string>("key", m.key);
    m.auto_deploy = d.get<bool>("auto_deploy", m.auto_deploy);
    if (d.has("auto_arm_at_ms") && !d.at("auto_arm_at_ms").j.is_null()) m.auto_arm_at = d.ms("auto_arm_at_ms");
    m.plc_password = d.get<std::string>("plc_password", m.plc_password);
    m.project_password = d.get<std::string>("project_password", m.project_password);
    const auto strat = d.get<std::string>("topology", "all_neighbors");
    if (strat == "all_neighbors") {
      m.strategy = TopologyStrategy::all_neighbors;
    } else if (strat == "spanning_tree") {
      m.strategy = TopologyStrategy::spanning_tree;
    } else {
      throw Error("scenario: scenario.dmplc.topology must be all_neighbors or spanning_tree");
    }
    m.include_ew = d.get<bool>("ew_polling", m.include_ew);
    m.watch_safe_shutdown = d.get<bool>("watch_safe_shutdown", m.watch_safe_shutdown);
    m.dry_run = d.get<bool>("dry_run", m.dry_run);
    if (m.auto_arm_at && !m.auto_deploy) throw Error("scenario: auto_arm_at_ms requires auto_deploy");
  }

  if (r.has("actions")) {
    const Reader acts = r.at("actions");
    if (!acts.j.is_array()) throw Error("scenario: scenario.actions must be an array");
    for (std::size_t i = 0; i < acts.j.size(); ++i) {
      const Reader ar = acts.index(i);
      ScenarioAction a = parse_action(ar);
      try {
        validate_action(s.project, a);
      } catch (const Error& e) {
        throw Error("scenario: " + ar.path + ": " + e.what());
      }
      if (!s.actions.empty() && a.at < s.actions.back().at) {
        throw Error("scenario: " + ar.path + " is out of time order");
      }
      s.actions.push_back(std::move(a));
    }
  }
  if (r.has("assertions")) {
    const Reader as = r.at("assertions");
    if (!as.j.is_array()) throw Error("scenario: scenario.assertions must be an array");
    for (std::size_t i = 0; i < as.j.size(); ++i) s.assertions.push_back(parse_assertion(as.index(i), i));
  }

  SimTime latest{0};
  for (const auto& a : s.actions) latest = std::max(latest, a.at);
  for (const auto& a : s.assertions) latest = std::max(latest, a.latest());
  if (s.dmplc.auto_arm_at) latest = std::max(latest, *s.dmplc.auto_arm_at);
  if (s.horizon < latest) throw Error("scenario: horizon_ms is earlier than the last action or assertion");
  return s;
}

ScenarioScript load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open scenario " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str(), std::filesystem::path(path).parent_path().string());
}

void apply_action(Fleet& fleet, const ScenarioAction& a, const DmplcSettings& dmplc) {
  std::vector<std::pair<std::string, std::string>> fields{{"action", std::string(to_string(a.kind))}};
  switch (a.kind) {
    case ActionKind::cut_link:
    case ActionKind::restore_link:
      fields.emplace_back("link", a.device + "-" + a.peer);
      break;
    case ActionKind::pay_ransom:
    case ActionKind::arm:
      if (!a.key.empty()) fields.emplace_back("key", a.key);
      break;
    case ActionKind::tamper_memory:
      fields.emplace_back("device", a.device);
      fields.emplace_back("address", to_string(a.address));
      fields.emplace_back("value", a.value ? "1" : "0");
      break;
    case ActionKind::reflash_device:
      fields.emplace_back("device", a.device);
      fields.emplace_back("with_password", a.with_password ? "1" : "0");
      break;
    case ActionKind::halt_device:
    case ActionKind::safe_shutdown_signal:
      fields.emplace_back("device", a.device);
      break;
  }
  const SimTime now = fleet.kernel().now();
  fleet.trace().emit(now, "", kind::injected, std::move(fields));

  try {
    switch (a.kind) {
      case ActionKind::cut_link:
        fleet.net().cut_link(a.device, a.peer);
        break;
      case ActionKind::restore_link:
        fleet.net().restore_link(a.device, a.peer);
        break;
      case ActionKind::pay_ransom:
        fleet.ew().accept_key(a.key);
        break;
      case ActionKind::arm:
        fleet.ew().arm_all(RansomTerms{now + dmplc.deadline, a.key.empty() ? dmplc.key : a.key});
        break;
      case ActionKind::tamper_memory:
        fleet.plc(a.device).poke(a.address, a.value);
        break;
      case ActionKind::halt_device:
        fleet.halt_device(a.device);
        break;
      case ActionKind::reflash_device: {
        const ProjectDevice* d = fleet.project().find(a.device);
        NetMessage m;
        m.src = fleet.ew().id();
        m.dst = a.device;
        m.function = ProtocolFunction::config_write;
        m.payload = encode_config(plc_config_from_project(fleet.project(), *d));
        m.credential = a.with_password;
        fleet.net().deliver(m);
        break;
      }
      case ActionKind::safe_shutdown_signal: {
        const auto& sig = fleet.plc(a.device).config().safe_shutdown_signal;
        if (!sig) throw Error(a.device + " has no safe-shutdown signal");
        fleet.plc(a.device).poke(*sig, true);
        break;
      }
    }
  } catch (const Error& e) {
    fleet.trace().emit(now, "", kind::action_failed,
                       {{"action", std::string(to_string(a.kind))}, {"error", e.what()}});
  }
}

std::unique_ptr<Fleet> prepare_fleet(const ScenarioScript& script, std::uint64_t seed) {
  auto fleet = std::make_unique<Fleet>(script.project, FleetOptions{seed, script.random_scan_phase, script.link_latency});
  fleet->trace().header.horizon = script.horizon;
  const auto& m = script.dmplc;
  if (m.auto_deploy) {
    TopologyOptions topt;
    topt.strategy = m.strategy;
    topt.include_ew = m.include_ew;
    DeploymentPlan plan;
    plan.topology = derive_covert_topology(script.project, fleet->net(), topt);
    plan.poll_interval = m.poll_interval;
    plan.deadband_misses = m.deadband_misses;
    plan.deadline = m.deadline;
    plan.plc_password = m.plc_password;
    plan.project_password = m.project_password;
    plan.ransom_key = m.key;
    plan.watch_safe_shutdown = m.watch_safe_shutdown;
    ProjectModel working = script.project;
    const auto rep = install_dmplc(*fleet, working, plan);
    if (!rep.ok) {
      std::string why;
      for (const auto& d : rep.devices) {
        if (!d.error.empty()) why = d.device + ": " + d.error;
      }
      throw Error("deployment failed: " + why);
    }
    if (m.dry_run) dry_run(*fleet, plan.topology);
  }
  Fleet* f = fleet.get();
  if (m.auto_arm_at) {
    ScenarioAction arm;
    arm.at = *m.auto_arm_at;
    arm.kind = ActionKind::arm;
    f->kernel().inject(arm.at, [f, arm, m] { apply_action(*f, arm, m); });
  }
  for (const auto& a : script.actions) {
    f->kernel().inject(a.at, [f, a, m] { apply_action(*f, a, m); });
  }
  return fleet;
}

// ---------------------------------------------------------------------------
// assertion evaluation

namespace {

struct TraceView {
  const TraceLog& log;
  SimTime end;

  SimTime scan_of(const DeviceId& device) const {
    SimTime widest{0};
    for (const auto& d : log.header.devices) {
      if (d.id == device && d.kind == "plc") return d.scan_interval;
      if (d.kind == "plc") widest = std::max(widest, d.scan_interval);
    }
    return widest;
  }

  int alert_at(const DeviceId& device, SimTime t) const {
    int state = 0;
    for (const auto& r : log.records()) {
      if (r.t > t) break;
      if (r.device != device) continue;
      if (r.kind == kind::alert_raised) {
        state = 1;
      } else if (r.kind == kind::disarmed) {
        state = 0;
      } else if (r.kind == kind::config_replaced) {
        const auto* dm = r.field("dm");
        if (dm && *dm == "0") state = 0;
      }
    }
    return state;
  }

  /// 1 when every output card is on, 0 otherwise, -1 when never reported.
  int outputs_all_on_at(const DeviceId& device, SimTime t) const {
    int state = -1;
    for (const auto& r : log.records()) {
      if (r.t > t) break;
      if (r.device != device) continue;
      if (r.kind == kind::disarmed) {
        const auto* c = r.field("cleared_alert");
        if (c && *c == "1") state = 0;
        continue;
      }
      if (r.kind != kind::outputs_on && r.kind != kind::core_output) continue;
      const auto* o = r.field("outputs");
      if (!o) continue;
      bool all = !o->empty();
      std::stringstream ss(*o);
      std::string item;
      while (std::getline(ss, item, ',')) {
        if (item.empty() || item.back() != '1') all = false;
      }
      state = all ? 1 : 0;
    }
    return state;
  }

  /// Instants at which a state of `device` may change inside [a, b], plus a.
  std::vector<SimTime> change_points(const DeviceId& device, SimTime a, SimTime b) const {
    std::vector<SimTime> pts{a};
    for (const auto& r : log.records()) {
      if (r.t > b) break;
      if (r.t >= a && r.device == device) pts.push_back(r.t);
    }
    return pts;
  }
};

bool record_matches(const TraceRecord& r, const Assertion& a) {
  if (r.kind != a.kind) return false;
  if (!a.device.empty() && r.device != a.device) return false;
  for (const auto& [k, v] : a.where) {
    const auto* f = r.field(k);
    if (!f || *f != v) return false;
  }
  return true;
}

AssertionResult evaluate_one(const TraceView& tv, const Assertion& a) {
  AssertionResult res{a.name, Verdict::pass, ""};
  const SimTime tol = static_cast<std::int64_t>(a.tolerance_scans) * tv.scan_of(a.device);
  SimTime lo = a.range ? a.range->first : a.at ? *a.at : SimTime{0};
  SimTime hi = a.range ? a.range->second : a.at ? *a.at : tv.end;
  const bool instant = a.at.has_value();
  lo = std::max(SimTime{0}, lo - tol);
  hi = hi + tol;
  if (hi > tv.end) {
    res.verdict = Verdict::error;
    res.detail = "assertion range ends at " + std::to_string(hi.ms) + " ms, trace ends at " + std::to_string(tv.end.ms) + " ms";
    return res;
  }
  auto fail = [&](std::string d) {
    res.verdict = Verdict::fail;
    res.detail = std::move(d);
  };

  switch (a.predicate) {
    case Predicate::alert_is:
    case Predicate::outputs_all_on: {
      const bool alert = a.predicate == Predicate::alert_is;
      auto state = [&](SimTime t) { return alert ? tv.alert_at(a.device, t) : tv.outputs_all_on_at(a.device, t); };
      const auto pts = tv.change_points(a.device, lo, hi);
      if (instant) {
        // holds at some instant inside the tolerance window
        const bool ok = std::any_of(pts.begin(), pts.end(), [&](SimTime t) { return state(t) == a.value; });
        if (!ok) fail(a.device + " state is " + std::to_string(state(hi)) + " throughout [" + std::to_string(lo.ms) + ", " + std::to_string(hi.ms) + "]");
      } else {
        for (SimTime t : pts) {
          if (state(t) != a.value) {
            fail(a.device + " state is " + std::to_string(state(t)) + " at " + std::to_string(t.ms) + " ms");
            break;
          }
        }
      }
      break;
    }
    case Predicate::outputs_unchanged: {
      for (const auto& r : tv.log.records()) {
        if (r.t < lo || r.t > hi) continue;
        if (r.device == a.device && r.kind == kind::outputs_on) {
          fail("outputs forced on at " + std::to_string(r.t.ms) + " ms");
          break;
        }
      }
      break;
    }
    case Predicate::ew_shutdown: {
      std::optional<SimTime> when;
      for (const auto& r : tv.log.records()) {
        if (r.kind == kind::ew_shutdown && (a.device.empty() || r.device == a.device)) {
          when = r.t;
          break;
        }
      }
      const bool down = when && *when <= hi;
      if (down != (a.value != 0)) {
        fail(when ? "workstation shut down at " + std::to_string(when->ms) + " ms" : "workstation never shut down");
      }
      break;
    }
    case Predicate::trace_contains:
    case Predicate::trace_absent: {
      std::size_t n = 0;
      std::optional<SimTime> first;
      for (const auto& r : tv.log.records()) {
        if (r.t < lo || r.t > hi || !record_matches(r, a)) continue;
        if (!first) first = r.t;
        ++n;
      }
      if (a.predicate == Predicate::trace_absent) {
        if (n > 0) fail(std::to_string(n) + " matching " + a.kind + " records, first at " + std::to_string(first->ms) + " ms");
      } else if (a.count) {
        if (n != *a.count) fail("expected " + std::to_string(*a.count) + " matching " + a.kind + " records, found " + std::to_string(n));
      } else if (n == 0) {
        fail("no matching " + a.kind + " record in [" + std::to_string(lo.ms) + ", " + std::to_string(hi.ms) + "]");
      }
      break;
    }
  }
  if (res.verdict == Verdict::pass && res.detail.empty()) res.detail = "ok";
  return res;
}

}  // namespace

std::vector<AssertionResult> evaluate_assertions(const TraceLog& trace, const std::vector<Assertion>& assertions) {
  SimTime end{-1};
  for (const auto& r : trace.records()) end = std::max(end, r.t);
  const TraceView tv{trace, end};
  std::vector<AssertionResult> out;
  out.reserve(assertions.size());
  for (const auto& a : assertions) out.push_back(evaluate_one(tv, a));
  return out;
}

bool ScenarioReport::passed() const {
  return std::all_of(results.begin(), results.end(), [](const AssertionResult& r) { return r.verdict == Verdict::pass; });
}

std::string ScenarioReport::to_text() const {
  std::ostringstream out;
  out << "scenario " << scenario << " seed=" << seed << " records=" << trace.size() << " flows=" << flows.size()
      << "\n";
  std::size_t ok = 0;
  for (const auto& r : results) {
    out << to_string(r.verdict) << ' ' << r.name << ": " << r.detail << "\n";
    if (r.verdict == Verdict::pass) ++ok;
  }
  out << "result " << (passed() ? "PASS" : "FAIL") << " " << ok << "/" << results.size() << "\n";
  return out.str();
}

ScenarioReport run_scenario(const ScenarioScript& script, std::optional<std::uint64_t> seed) {
  ScenarioReport rep;
  rep.scenario = script.name;
  rep.seed = seed.value_or(script.seed);
  auto fleet = prepare_fleet(script, rep.seed);
  rep.stop = fleet->run_until(script.horizon);
  fleet->trace().emit(script.horizon, "", kind::end);
  rep.trace = fleet->trace();
  rep.flows = fleet->net().flows();
  rep.results = evaluate_assertions(rep.trace, script.assertions);
  return rep;
}

ScenarioReport replay_trace(const TraceLog& trace, const ScenarioScript& script) {
  if (trace.header.schema != kTraceSchemaVersion) {
    throw Error("trace schema " + std::to_string(trace.header.schema) + " is not supported");
  }
  ScenarioReport rep;
  rep.scenario = script.name;
  rep.seed = trace.header.seed;
  rep.trace = trace;
  rep.results = evaluate_assertions(trace, script.assertions);
  return rep;
}

}  // namespace dmsim
