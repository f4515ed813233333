#include "dmsim/deployer.hpp"

#include <algorithm>
#include <deque>
#include <random>

namespace dmsim {

std::string_view to_string(ChangeKind c) {
  switch (c) {
    case ChangeKind::added: return "added";
    case ChangeKind::removed: return "removed";
    case ChangeKind::changed: return "changed";
  }
  return "?";
}

std::string_view to_string(MatchStatus m) {
  switch (m) {
    case MatchStatus::full_match: return "full_match";
    case MatchStatus::mismatch: return "mismatch";
    case MatchStatus::unreachable: return "unreachable";
  }
  return "?";
}

bool ValidationReport::all_full_match() const {
  return std::all_of(plcs.begin(), plcs.end(), [](const PlcValidation& p) { return p.match == MatchStatus::full_match; });
}

const PlcValidation* ValidationReport::find(const DeviceId& id) const {
  for (const auto& p : plcs) {
    if (p.device == id) return &p;
  }
  return nullptr;
}

namespace {

bool same_core(const CoreBlock& a, const CoreBlock& b) {
  return a.behavior == b.behavior && a.outputs == b.outputs && a.tank == b.tank;
}

bool same_comm(const CommFunction& a, const CommFunction& b) {
  return a.src == b.src && a.dst == b.dst && a.kind == b.kind && a.db == b.db && a.period == b.period;
}

template <typename T, typename Key>
const T* find_by(const std::vector<T>& v, const Key& key, std::string T::*field) {
  for (const auto& x : v) {
    if (x.*field == key) return &x;
  }
  return nullptr;
}

}  // namespace

std::vector<ConfigDiff> compare_configs(const PlcConfig& expected, const PlcConfig& live) {
  std::vector<ConfigDiff> out;
  const DeviceId& dev = expected.id;
  auto add = [&](std::string artifact, ChangeKind c) { out.push_back(ConfigDiff{dev, std::move(artifact), c}); };

  for (const auto& [n, bytes] : expected.data_blocks) {
    auto it = live.data_blocks.find(n);
    if (it == live.data_blocks.end()) {
      add("data_block:" + std::to_string(n), ChangeKind::removed);
    } else if (it->second.size() != bytes.size()) {
      add("data_block:" + std::to_string(n), ChangeKind::changed);
    }
  }
  for (const auto& [n, bytes] : live.data_blocks) {
    if (!expected.data_blocks.contains(n)) add("data_block:" + std::to_string(n), ChangeKind::added);
  }

  for (const auto& b : expected.core_blocks) {
    const CoreBlock* l = find_by(live.core_blocks, b.name, &CoreBlock::name);
    if (!l) {
      add("core_block:" + b.name, ChangeKind::removed);
      continue;
    }
    if (!same_core(b, *l)) add("core_block:" + b.name, ChangeKind::changed);
    if (b.gated_by_alert != l->gated_by_alert) add("gate:" + b.name, l->gated_by_alert ? ChangeKind::added : ChangeKind::removed);
  }
  for (const auto& b : live.core_blocks) {
    if (!find_by(expected.core_blocks, b.name, &CoreBlock::name)) add("core_block:" + b.name, ChangeKind::added);
  }

  std::vector<std::string> exp_dm = expected.dm ? expected.dm->blocks : std::vector<std::string>{};
  std::vector<std::string> live_dm = live.dm ? live.dm->blocks : std::vector<std::string>{};
  for (const auto& n : exp_dm) {
    if (std::find(live_dm.begin(), live_dm.end(), n) == live_dm.end()) add("dm_block:" + n, ChangeKind::removed);
  }
  for (const auto& n : live_dm) {
    if (std::find(exp_dm.begin(), exp_dm.end(), n) == exp_dm.end()) add("dm_block:" + n, ChangeKind::added);
  }

  for (const auto& c : expected.output_cards) {
    if (!find_by(live.output_cards, c.address, &OutputCard::address)) add("output_card:" + c.address, ChangeKind::removed);
  }
  for (const auto& c : live.output_cards) {
    if (!find_by(expected.output_cards, c.address, &OutputCard::address)) add("output_card:" + c.address, ChangeKind::added);
  }

  const std::size_t nc = std::max(expected.comm.size(), live.comm.size());
  for (std::size_t i = 0; i < nc; ++i) {
    const std::string name = "comm_function:" + std::to_string(i);
    if (i >= live.comm.size()) {
      add(name, ChangeKind::removed);
    } else if (i >= expected.comm.size()) {
      add(name, ChangeKind::added);
    } else if (!same_comm(expected.comm[i], live.comm[i])) {
      add(name, ChangeKind::changed);
    }
  }

  if (expected.safe_shutdown_signal != live.safe_shutdown_signal) add("safe_shutdown_signal", ChangeKind::changed);
  if (expected.scan_interval != live.scan_interval) add("scan_interval", ChangeKind::changed);

  if (expected.config_password != live.config_password) {
    add("password", !expected.config_password ? ChangeKind::added
                    : !live.config_password   ? ChangeKind::removed
                                              : ChangeKind::changed);
  }
  return out;
}

namespace {

DeviceId validator_host(Fleet& fleet) {
  if (!fleet.has_ew()) throw Error("deployer needs an engineering workstation in the project");
  return fleet.ew().id();
}

DeliveryResult read_config(Fleet& fleet, const DeviceId& from, const DeviceId& plc,
                           const std::optional<std::string>& credential) {
  NetMessage m;
  m.src = from;
  m.dst = plc;
  m.function = ProtocolFunction::config_read;
  m.credential = credential;
  return fleet.net().deliver(m);
}

DeliveryResult write_config(Fleet& fleet, const DeviceId& from, const DeviceId& plc, const PlcConfig& cfg,
                            const std::optional<std::string>& credential) {
  NetMessage m;
  m.src = from;
  m.dst = plc;
  m.function = ProtocolFunction::config_write;
  m.payload = encode_config(cfg);
  m.credential = credential;
  return fleet.net().deliver(m);
}

}  // namespace

ValidationReport validate_online(Fleet& fleet, const ProjectModel& project,
                                 const std::optional<std::string>& credential) {
  const DeviceId host = validator_host(fleet);
  ValidationReport report;
  for (const ProjectDevice* d : project.plcs()) {
    PlcValidation v;
    v.device = d->id;
    const auto cred = credential ? credential : d->config_password;
    const auto res = read_config(fleet, host, d->id, cred);
    if (res.outcome == Outcome::no_route || res.outcome == Outcome::dst_down) {
      v.match = MatchStatus::unreachable;
    } else if (!res.ok() || !res.response_payload) {
      v.match = MatchStatus::mismatch;
      v.diffs.push_back(ConfigDiff{d->id, "access", ChangeKind::changed});
    } else {
      v.diffs = compare_configs(plc_config_from_project(project, *d), decode_config(*res.response_payload));
      v.match = v.diffs.empty() ? MatchStatus::full_match : MatchStatus::mismatch;
    }
    report.plcs.push_back(std::move(v));
  }
  return report;
}

std::map<DeviceId, std::set<DeviceId>> CovertTopology::adjacency() const {
  std::map<DeviceId, std::set<DeviceId>> adj;
  for (const auto& t : ew_targets) {
    adj[ew].insert(t);
    adj[t].insert(ew);
  }
  for (const auto& a : assignments) {
    adj[a.poller].insert(a.target);
    adj[a.target].insert(a.poller);
  }
  return adj;
}

std::vector<PollAssignment> CovertTopology::outgoing(const DeviceId& plc) const {
  std::vector<PollAssignment> out;
  for (const auto& a : assignments) {
    if (a.poller == plc) out.push_back(a);
  }
  return out;
}

std::vector<PollAssignment> CovertTopology::incoming(const DeviceId& plc) const {
  std::vector<PollAssignment> out;
  for (const auto& a : assignments) {
    if (a.target == plc) out.push_back(a);
  }
  return out;
}

CovertTopology derive_covert_topology(const ProjectModel& project, const Network& net, const TopologyOptions& options) {
  CovertTopology topo;
  const auto plcs = project.plcs();
  if (plcs.empty()) throw Error("topology: project has no PLCs");
  std::set<DeviceId> plc_set;
  for (const auto* p : plcs) plc_set.insert(p->id);

  if (options.include_ew) {
    const ProjectDevice* ew = project.workstation();
    if (!ew) throw Error("topology: workstation heartbeat requested but project has no workstation");
    topo.ew = ew->id;
    for (const auto* p : plcs) {
      if (net.reachable(ew->id, p->id)) topo.ew_targets.push_back(p->id);
    }
  } else if (const ProjectDevice* ew = project.workstation()) {
    topo.ew = ew->id;
  }

  // Declared PLC-PLC links that currently carry traffic.
  std::vector<std::pair<DeviceId, DeviceId>> edges;
  for (const auto& [a, b] : project.links) {
    if (plc_set.contains(a) && plc_set.contains(b) && net.reachable(a, b)) edges.emplace_back(a, b);
  }

  if (options.strategy == TopologyStrategy::spanning_tree) {
    std::map<DeviceId, std::vector<DeviceId>> adj;
    for (const auto& [a, b] : edges) {
      adj[a].push_back(b);
      adj[b].push_back(a);
    }
    std::vector<std::pair<DeviceId, DeviceId>> tree;
    std::set<DeviceId> seen;
    for (const auto* root : plcs) {
      if (seen.contains(root->id)) continue;
      seen.insert(root->id);
      std::deque<DeviceId> q{root->id};
      while (!q.empty()) {
        DeviceId u = q.front();
        q.pop_front();
        for (const auto& v : adj[u]) {
          if (seen.insert(v).second) {
            tree.emplace_back(u, v);
            q.push_back(v);
          }
        }
      }
    }
    edges = std::move(tree);
  }

  std::map<DeviceId, int> next_slot;
  auto assign = [&](const DeviceId& poller, const DeviceId& target) {
    int slot = ++next_slot[target];
    topo.assignments.push_back(PollAssignment{poller, target, layout::neighbor_poll_bit(slot), true});
  };
  for (const auto& [a, b] : edges) {
    assign(a, b);
    assign(b, a);
  }

  if (options.max_connections > 0) {
    const auto adj = topo.adjacency();
    for (const auto* p : plcs) {
      auto it = adj.find(p->id);
      if (it != adj.end() && it->second.size() > options.max_connections) {
        throw Error("topology: " + p->id + " needs " + std::to_string(it->second.size()) +
                    " connections, budget is " + std::to_string(options.max_connections));
      }
    }
  }

  for (const auto* p : plcs) {
    bool polled = std::find(topo.ew_targets.begin(), topo.ew_targets.end(), p->id) != topo.ew_targets.end() ||
                  !topo.incoming(p->id).empty();
    if (!polled) throw Error("topology: " + p->id + " would not be polled by any device");
  }

  const auto adj = topo.adjacency();
  std::set<DeviceId> seen{plcs.front()->id};
  std::deque<DeviceId> q{plcs.front()->id};
  while (!q.empty()) {
    DeviceId u = q.front();
    q.pop_front();
    auto it = adj.find(u);
    if (it == adj.end()) continue;
    for (const auto& v : it->second) {
      if (seen.insert(v).second) q.push_back(v);
    }
  }
  for (const auto* p : plcs) {
    if (!seen.contains(p->id)) throw Error("topology: covert graph is disconnected at " + p->id);
  }
  return topo;
}

std::optional<std::string> choose_comm_function(const std::vector<std::string>& preference,
                                                const std::set<std::string>& blocked) {
  for (const auto& f : preference) {
    if (!blocked.contains(f)) return f;
  }
  return std::nullopt;
}

void DeploymentPlan::validate(const ProjectModel& project) const {
  if (plc_password.empty()) throw Error("plan: PLC password must not be empty");
  if (project_password.empty()) throw Error("plan: project password must not be empty");
  if (ransom_key.empty()) throw Error("plan: ransom key must not be empty");
  if (deadline <= SimTime{0}) throw Error("plan: deadline must be positive");
  if (poll_interval <= SimTime{0}) throw Error("plan: poll interval must be positive");
  if (deadband_misses < 1) throw Error("plan: deadband_misses must be >= 1");
  for (const auto* p : project.plcs()) {
    if (poll_interval.ms % p->scan_interval.ms != 0) {
      throw Error("plan: poll interval " + std::to_string(poll_interval.ms) + " ms is not a multiple of " + p->id +
                  " scan interval " + std::to_string(p->scan_interval.ms) + " ms");
    }
  }
  for (const auto& a : topology.assignments) {
    if (!project.find(a.poller) || !project.find(a.target)) throw Error("plan: topology names unknown device");
  }
}

std::vector<ConfigDiff> InstallReport::all_artifacts() const {
  std::vector<ConfigDiff> out;
  for (const auto& d : devices) out.insert(out.end(), d.artifacts.begin(), d.artifacts.end());
  return out;
}

namespace {

std::vector<DeviceId> covered_plcs(const ProjectModel& project, const CovertTopology& topo) {
  std::set<DeviceId> s(topo.ew_targets.begin(), topo.ew_targets.end());
  for (const auto& a : topo.assignments) {
    s.insert(a.poller);
    s.insert(a.target);
  }
  std::vector<DeviceId> out;
  for (const auto* p : project.plcs()) {
    if (s.contains(p->id)) out.push_back(p->id);
  }
  return out;
}

PlcConfig with_dm(const PlcConfig& base, const DeploymentPlan& plan, std::vector<ConfigDiff>& artifacts) {
  PlcConfig cfg = base;
  const DeviceId& id = base.id;
  const auto& topo = plan.topology;

  int max_slot = 0;
  DmProgram dm;
  dm.blocks = kDmBlockNames;
  dm.authorized_ew = topo.ew;
  dm.poll_interval = plan.poll_interval;
  dm.deadband_misses = plan.deadband_misses;
  dm.outgoing = topo.outgoing(id);
  if (std::find(topo.ew_targets.begin(), topo.ew_targets.end(), id) != topo.ew_targets.end()) {
    dm.watched.push_back(WatchedBit{topo.ew, layout::kEwPollBit});
  }
  for (const auto& a : topo.incoming(id)) {
    dm.watched.push_back(WatchedBit{a.poller, a.write_bit});
    max_slot = std::max(max_slot, a.write_bit.byte * 8 + a.write_bit.bit);
  }
  dm.watch_safe_shutdown = plan.watch_safe_shutdown;
  dm.restore_outputs_on_disarm = plan.restore_outputs_on_disarm;

  cfg.data_blocks[layout::kStatusDb] = Bytes(layout::kStatusDbSize, 0);
  artifacts.push_back(ConfigDiff{id, "data_block:" + std::to_string(layout::kStatusDb), ChangeKind::added});
  cfg.data_blocks[layout::kPollDb] = Bytes(static_cast<std::size_t>(max_slot / 8 + 1), 0);
  artifacts.push_back(ConfigDiff{id, "data_block:" + std::to_string(layout::kPollDb), ChangeKind::added});
  for (const auto& n : dm.blocks) artifacts.push_back(ConfigDiff{id, "dm_block:" + n, ChangeKind::added});
  for (auto& b : cfg.core_blocks) {
    if (!b.gated_by_alert) {
      b.gated_by_alert = true;
      artifacts.push_back(ConfigDiff{id, "gate:" + b.name, ChangeKind::added});
    }
  }
  artifacts.push_back(
      ConfigDiff{id, "password", base.config_password ? ChangeKind::changed : ChangeKind::added});
  cfg.config_password = plan.plc_password;
  cfg.dm = std::move(dm);
  return cfg;
}

}  // namespace

InstallReport install_dmplc(Fleet& fleet, ProjectModel& project, const DeploymentPlan& plan) {
  plan.validate(project);
  if (project.protection && *project.protection != password_digest(plan.project_password)) {
    throw Error("install: project is protected with a different password");
  }
  const DeviceId host = validator_host(fleet);
  if (plan.topology.ew != host) throw Error("install: topology workstation does not match the fleet");

  InstallReport report;
  const auto targets = covered_plcs(project, plan.topology);
  for (const auto& id : targets) {
    DeviceInstall inst;
    inst.device = id;
    const ProjectDevice* dev = project.find(id);

    auto snap = read_config(fleet, host, id, dev->config_password);
    if (snap.outcome == Outcome::access_denied) snap = read_config(fleet, host, id, plan.plc_password);
    if (!snap.ok() || !snap.response_payload) {
      inst.status = DeviceInstall::Status::failed;
      inst.error = "configuration read failed: " + std::string(to_string(snap.outcome));
      report.devices.push_back(std::move(inst));
      report.ok = false;
      break;
    }
    const PlcConfig before = decode_config(*snap.response_payload);
    if (before.dm) {
      inst.status = DeviceInstall::Status::already_installed;
      report.devices.push_back(std::move(inst));
      continue;
    }
    const auto drift = compare_configs(plc_config_from_project(project, *dev), before);
    if (!drift.empty()) {
      inst.status = DeviceInstall::Status::failed;
      inst.error = "live configuration does not match the project (" + drift.front().artifact + ")";
      report.devices.push_back(std::move(inst));
      report.ok = false;
      break;
    }

    const PlcConfig next = with_dm(before, plan, inst.artifacts);
    const auto w = write_config(fleet, host, id, next, before.config_password);
    bool verified = false;
    if (w.ok()) {
      const auto check = read_config(fleet, host, id, plan.plc_password);
      if (check.ok() && check.response_payload) {
        verified = compare_configs(next, decode_config(*check.response_payload)).empty();
      }
    }
    if (!verified) {
      if (w.ok()) write_config(fleet, host, id, before, plan.plc_password);
      inst.status = DeviceInstall::Status::failed;
      inst.error = w.ok() ? "verification failed; rolled back" : "configuration write failed: " + std::string(to_string(w.outcome));
      inst.artifacts.clear();
      report.devices.push_back(std::move(inst));
      report.ok = false;
      break;
    }
    std::string names;
    for (const auto& a : inst.artifacts) names += (names.empty() ? "" : ",") + a.artifact;
    fleet.trace().emit(fleet.kernel().now(), id, kind::dm_installed, {{"artifacts", names}});
    report.devices.push_back(std::move(inst));
  }
  if (!report.ok) return report;

  project.protection = password_digest(plan.project_password);
  fleet.ew().configure(targets, plan.topology.ew_targets, plan.poll_interval, plan.plc_password);
  return report;
}

bool DryRunReport::all_ok() const {
  return std::all_of(edges.begin(), edges.end(), [](const DryRunEdge& e) { return e.ok(); });
}

DryRunReport dry_run(Fleet& fleet, const CovertTopology& topology) {
  if (fleet.has_ew() && fleet.ew().encrypted()) throw Error("dry run: fleet is already armed");
  for (const auto& id : fleet.plc_ids()) {
    if (fleet.plc(id).enabled()) throw Error("dry run: " + id + " is already enabled");
  }
  auto rng = fleet.kernel().stream("deployer/dry_run");
  std::bernoulli_distribution coin(0.5);
  DryRunReport report;

  auto exercise = [&](const DeviceId& from, const DeviceId& to, const BitAddress& bit, ProtocolFunction wf,
                      ProtocolFunction rf) {
    DryRunEdge e{from, to};
    NetMessage w;
    w.src = from;
    w.dst = to;
    w.function = wf;
    w.db = bit.db;
    w.byte_offset = bit.byte;
    w.bit_offset = bit.bit;
    w.payload = Bytes{static_cast<std::uint8_t>(coin(rng) ? 1 : 0)};
    e.write = fleet.net().deliver(w).outcome;
    NetMessage r;
    r.src = from;
    r.dst = to;
    r.function = rf;
    r.db = layout::kStatusDb;
    r.byte_offset = 0;
    r.length = 1;
    e.read = fleet.net().deliver(r).outcome;
    fleet.trace().emit(fleet.kernel().now(), from, kind::dry_run_edge,
                       {{"to", to}, {"write", std::string(to_string(e.write))}, {"read", std::string(to_string(e.read))}});
    report.edges.push_back(std::move(e));
  };

  for (const auto& t : topology.ew_targets) {
    exercise(topology.ew, t, layout::kEwPollBit, ProtocolFunction::ew_write, ProtocolFunction::ew_read);
  }
  for (const auto& a : topology.assignments) {
    exercise(a.poller, a.target, a.write_bit, ProtocolFunction::put_write, ProtocolFunction::get_read);
  }
  return report;
}

}  // namespace dmsim
