#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dmsim/kernel.hpp"
#include "dmsim/types.hpp"

namespace dmsim {

enum class ProtocolFunction { put_write, get_read, ew_write, ew_read, config_read, config_write };
enum class Outcome { delivered, no_route, dst_down, access_denied, address_missing };

std::string_view to_string(ProtocolFunction f);
std::string_view to_string(Outcome o);
ProtocolFunction parse_function(std::string_view s);
Outcome parse_outcome(std::string_view s);

inline bool is_write(ProtocolFunction f) {
  return f == ProtocolFunction::put_write || f == ProtocolFunction::ew_write || f == ProtocolFunction::config_write;
}

using Bytes = std::vector<std::uint8_t>;

struct NetMessage {
  DeviceId src;
  DeviceId dst;
  ProtocolFunction function = ProtocolFunction::get_read;
  int db = 0;
  int byte_offset = 0;
  std::optional<int> bit_offset;  // bit-level access when set
  std::size_t length = 1;         // bytes requested by reads
  std::optional<Bytes> payload;   // writes only
  std::optional<std::string> credential;
};

struct DeliveryResult {
  Outcome outcome = Outcome::delivered;
  std::optional<Bytes> response_payload;

  bool ok() const { return outcome == Outcome::delivered; }
};

struct FlowRecord {
  SimTime t;
  DeviceId src;
  DeviceId dst;
  ProtocolFunction function = ProtocolFunction::get_read;
  int db = 0;
  Outcome outcome = Outcome::delivered;

  bool operator==(const FlowRecord&) const = default;
};

/// Anything that can receive messages: PLCs and the workstation.
class Endpoint {
 public:
  virtual ~Endpoint() = default;
  virtual bool alive() const = 0;
  virtual DeliveryResult handle(const NetMessage& msg) = 0;
};

struct Link {
  DeviceId a;
  DeviceId b;
  bool up = true;
  SimTime latency{0};
};

/// Connectivity-level network. A message is routable when any path of up
/// links joins source and destination; devices in between do not need to be
/// alive. Every delivery attempt produces exactly one FlowRecord.
class Network {
 public:
  using Callback = std::function<void(const DeliveryResult&)>;

  explicit Network(Kernel& kernel) : kernel_(kernel) {}

  void add_device(const DeviceId& id);
  void attach(const DeviceId& id, Endpoint* endpoint);
  bool has_device(const DeviceId& id) const { return endpoints_.contains(id); }
  std::vector<DeviceId> devices() const;

  void add_link(const DeviceId& a, const DeviceId& b, SimTime latency = SimTime{0});
  void cut_link(const DeviceId& a, const DeviceId& b);
  void restore_link(const DeviceId& a, const DeviceId& b);
  void set_latency(const DeviceId& a, const DeviceId& b, SimTime latency);
  bool has_link(const DeviceId& a, const DeviceId& b) const { return find_link(a, b) != nullptr; }
  const std::vector<Link>& links() const { return links_; }

  bool reachable(const DeviceId& a, const DeviceId& b) const;
  /// Sum of link latencies along a minimum-hop up path.
  std::optional<SimTime> path_latency(const DeviceId& a, const DeviceId& b) const;

  /// Immediate delivery regardless of configured latency.
  DeliveryResult deliver(const NetMessage& msg);

  /// Delivery honouring path latency. Routing failures are reported before
  /// send() returns; otherwise the handler and callback run at
  /// now + latency, when the route is checked again.
  void send(NetMessage msg, Callback on_result);

  const std::vector<FlowRecord>& flows() const { return flows_; }

 private:
  const Link* find_link(const DeviceId& a, const DeviceId& b) const;
  Link& require_link(const DeviceId& a, const DeviceId& b);
  void require_device(const DeviceId& id) const;
  void validate(const NetMessage& msg) const;
  DeliveryResult complete(const NetMessage& msg);
  void record(const NetMessage& msg, Outcome outcome);

  Kernel& kernel_;
  std::map<DeviceId, Endpoint*> endpoints_;
  std::vector<Link> links_;
  std::vector<FlowRecord> flows_;
};

inline constexpr std::string_view kFlowCsvHeader = "t_ms,src,dst,function,db,outcome";

void write_flows(std::ostream& out, const std::vector<FlowRecord>& flows);
std::vector<FlowRecord> read_flows(std::istream& in);
std::vector<FlowRecord> read_flows_file(const std::string& path);

}  // namespace dmsim
