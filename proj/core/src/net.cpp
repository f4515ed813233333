#include "dmsim/net.hpp"

#include <charconv>
#include <deque>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>

namespace dmsim {

std::string_view to_string(ProtocolFunction f) {
  switch (f) {
    case ProtocolFunction::put_write: return "put_write";
    case ProtocolFunction::get_read: return "get_read";
    case ProtocolFunction::ew_write: return "ew_write";
    case ProtocolFunction::ew_read: return "ew_read";
    case ProtocolFunction::config_read: return "config_read";
    case ProtocolFunction::config_write: return "config_write";
  }
  return "?";
}

std::string_view to_string(Outcome o) {
  switch (o) {
    case Outcome::delivered: return "delivered";
    case Outcome::no_route: return "no_route";
    case Outcome::dst_down: return "dst_down";
    case Outcome::access_denied: return "access_denied";
    case Outcome::address_missing: return "address_missing";
  }
  return "?";
}

ProtocolFunction parse_function(std::string_view s) {
  for (auto f : {ProtocolFunction::put_write, ProtocolFunction::get_read, ProtocolFunction::ew_write,
                 ProtocolFunction::ew_read, ProtocolFunction::config_read, ProtocolFunction::config_write}) {
    if (to_string(f) == s) return f;
  }
  throw Error("unknown protocol function: " + std::string(s));
}

Outcome parse_outcome(std::string_view s) {
  for (auto o : {Outcome::delivered, Outcome::no_route, Outcome::dst_down, Outcome::access_denied,
                 Outcome::address_missing}) {
    if (to_string(o) == s) return o;
  }
  throw Error("unknown outcome: " + std::string(s));
}

void Network::add_device(const DeviceId& id) {
  if (id.empty()) throw Error("empty device id");
  endpoints_.try_emplace(id, nullptr);
}

void Network::attach(const DeviceId& id, Endpoint* endpoint) {
  add_device(id);
  endpoints_[id] = endpoint;
}

std::vector<DeviceId> Network::devices() const {
  std::vector<DeviceId> out;
  for (const auto& [id, _] : endpoints_) out.push_back(id);
  return out;
}

void Network::require_device(const DeviceId& id) const {
  if (!endpoints_.contains(id)) throw Error("unknown device: " + id);
}

const Link* Network::find_link(const DeviceId& a, const DeviceId& b) const {
  for (const auto& l : links_) {
    if ((l.a == a && l.b == b) || (l.a == b && l.b == a)) return &l;
  }
  return nullptr;
}

Link& Network::require_link(const DeviceId& a, const DeviceId& b) {
  if (const Link* l = find_link(a, b)) return const_cast<Link&>(*l);
  throw Error("unknown link: " + a + "-" + b);
}

void Network::add_link(const DeviceId& a, const DeviceId& b, SimTime latency) {
  require_device(a);
  require_device(b);
  if (a == b) throw Error("self link on " + a);
  if (find_link(a, b)) throw Error("duplicate link: " + a + "-" + b);
  if (latency < SimTime{0}) throw Error("negative link latency");
  links_.push_back(Link{a, b, true, latency});
}

void Network::cut_link(const DeviceId& a, const DeviceId& b) { require_link(a, b).up = false; }

void Network::restore_link(const DeviceId& a, const DeviceId& b) { require_link(a, b).up = true; }

void Network::set_latency(const DeviceId& a, const DeviceId& b, SimTime latency) {
  if (latency < SimTime{0}) throw Error("negative link latency");
  require_link(a, b).latency = latency;
}

std::optional<SimTime> Network::path_latency(const DeviceId& a, const DeviceId& b) const {
  require_device(a);
  require_device(b);
  if (a == b) return SimTime{0};
  std::map<DeviceId, SimTime> dist{{a, SimTime{0}}};
  std::deque<DeviceId> frontier{a};
  while (!frontier.empty()) {
    const DeviceId cur = frontier.front();
    frontier.pop_front();
    for (const auto& l : links_) {
      if (!l.up) continue;
      const DeviceId* next = l.a == cur ? &l.b : (l.b == cur ? &l.a : nullptr);
      if (!next || dist.contains(*next)) continue;
      dist[*next] = dist[cur] + l.latency;
      if (*next == b) return dist[*next];
      frontier.push_back(*next);
    }
  }
  return std::nullopt;
}

bool Network::reachable(const DeviceId& a, const DeviceId& b) const { return path_latency(a, b).has_value(); }

void Network::validate(const NetMessage& msg) const {
  require_device(msg.src);
  require_device(msg.dst);
  if (msg.db < 0) throw Error("negative data block number");
  if (is_write(msg.function) && !msg.payload) throw Error("write message without payload");
  if (!is_write(msg.function) && msg.payload) throw Error("read message with payload");
  if (msg.bit_offset && (*msg.bit_offset < 0 || *msg.bit_offset > 7)) throw Error("bit offset out of range");
}

void Network::record(const NetMessage& msg, Outcome outcome) {
  flows_.push_back(FlowRecord{kernel_.now(), msg.src, msg.dst, msg.function, msg.db, outcome});
}

DeliveryResult Network::complete(const NetMessage& msg) {
  DeliveryResult result;
  Endpoint* ep = endpoints_.at(msg.dst);
  if (!reachable(msg.src, msg.dst)) {
    result.outcome = Outcome::no_route;
  } else if (ep == nullptr || !ep->alive()) {
    result.outcome = Outcome::dst_down;
  } else {
    result = ep->handle(msg);
    if (result.outcome != Outcome::delivered || is_write(msg.function)) result.response_payload.reset();
  }
  record(msg, result.outcome);
  return result;
}

DeliveryResult Network::deliver(const NetMessage& msg) {
  validate(msg);
  return complete(msg);
}

void Network::send(NetMessage msg, Callback on_result) {
  validate(msg);
  const auto latency = path_latency(msg.src, msg.dst);
  if (!latency || latency->ms == 0) {
    const auto r = complete(msg);
    if (on_result) on_result(r);
    return;
  }
  kernel_.schedule_after(*latency, "netfabric", [this, msg = std::move(msg), cb = std::move(on_result)] {
    const auto r = complete(msg);
    if (cb) cb(r);
  });
}

void write_flows(std::ostream& out, const std::vector<FlowRecord>& flows) {
  out << kFlowCsvHeader << '\n';
  for (const auto& f : flows) {
    out << f.t.ms << ',' << f.src << ',' << f.dst << ',' << to_string(f.function) << ',' << f.db << ','
        << to_string(f.outcome) << '\n';
  }
}

namespace {

std::int64_t to_int(std::string_view s, std::size_t lineno) {
  std::int64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) {
    throw Error("flow log line " + std::to_string(lineno) + ": bad integer '" + std::string(s) + "'");
  }
  return v;
}

}  // namespace

std::vector<FlowRecord> read_flows(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kFlowCsvHeader) throw Error("flow log lacks header line");
  std::vector<FlowRecord> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string_view> cols;
    std::string_view rest = line;
    for (;;) {
      auto c = rest.find(',');
      cols.push_back(rest.substr(0, c));
      if (c == std::string_view::npos) break;
      rest.remove_prefix(c + 1);
    }
    if (cols.size() != 6) throw Error("flow log line " + std::to_string(lineno) + ": expected 6 fields");
    FlowRecord f;
    f.t = SimTime{to_int(cols[0], lineno)};
    f.src = std::string(cols[1]);
    f.dst = std::string(cols[2]);
    f.function = parse_function(cols[3]);
    f.db = static_cast<int>(to_int(cols[4], lineno));
    f.outcome = parse_outcome(cols[5]);
    out.push_back(std::move(f));
  }
  return out;
}

std::vector<FlowRecord> read_flows_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open flow log: " + path);
  return read_flows(in);
}

}  // namespace dmsim
