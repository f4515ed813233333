#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dmsim/context.hpp"
#include "dmsim/net.hpp"
#include "dmsim/types.hpp"

namespace dmsim {

/// Fixed memory map used by the extortion blocks.
namespace layout {
inline constexpr int kStatusDb = 500;
inline constexpr int kPollDb = 501;
inline constexpr std::size_t kStatusDbSize = 8;
inline constexpr BitAddress kAlertBit{kStatusDb, 0, 0};
inline constexpr BitAddress kEnableBit{kStatusDb, 0, 1};
/// Absolute deadline in ms, big-endian u32 at DB500 bytes 4..7; 0 means none.
inline constexpr int kDeadlineByte = 4;
inline constexpr BitAddress kEwPollBit{kPollDb, 0, 0};
/// Neighbour slot n (1-based) lives at DB501 bit n, continuing into later bytes.
inline constexpr BitAddress neighbor_poll_bit(int slot) { return BitAddress{kPollDb, slot / 8, slot % 8}; }
}  // namespace layout

struct OutputCard {
  std::string address;  // e.g. "Q2.0"
  bool state = false;
};

enum class CoreBehavior { tank_control, idle };

struct TankParams {
  int initial_level = 50;
  int low = 20;
  int high = 80;
  int fill_rate = 2;
  int drain_rate = 1;

  bool operator==(const TankParams&) const = default;
};

/// Stand-in for the victim's operational code.
struct CoreBlock {
  std::string name;
  CoreBehavior behavior = CoreBehavior::tank_control;
  /// tank_control drives outputs[0] as inlet pump and outputs[1] as drain valve.
  std::vector<std::string> outputs;
  bool gated_by_alert = false;
  TankParams tank;
};

/// Pre-existing PLC-to-PLC traffic (PUT/GET blocks in the victim's program).
struct CommFunction {
  DeviceId src;
  DeviceId dst;
  std::string kind;  // put | get (PLC source), read | write (workstation source)
  int db = 1;
  SimTime period{1000};
};

struct PollAssignment {
  DeviceId poller;
  DeviceId target;
  BitAddress write_bit;
  bool watch_alert = true;

  bool operator==(const PollAssignment&) const = default;
};

struct WatchedBit {
  DeviceId source;
  BitAddress bit;

  bool operator==(const WatchedBit&) const = default;
};

/// Parameters of the installed extortion blocks on one PLC.
struct DmProgram {
  std::vector<std::string> blocks;
  DeviceId authorized_ew;
  SimTime poll_interval{1000};
  int deadband_misses = 1;
  std::vector<PollAssignment> outgoing;
  std::vector<WatchedBit> watched;
  bool watch_safe_shutdown = false;
  /// Return outputs to off when disarmed after detonation.
  bool restore_outputs_on_disarm = true;
};

/// The downloadable program plus its data-block memory.
struct PlcConfig {
  DeviceId id;
  SimTime scan_interval{100};
  std::map<int, Bytes> data_blocks;
  std::vector<CoreBlock> core_blocks;
  std::vector<OutputCard> output_cards;
  std::vector<CommFunction> comm;
  std::optional<BitAddress> safe_shutdown_signal;
  std::optional<DmProgram> dm;
  std::optional<std::string> config_password;

  bool dm_blocks() const { return dm.has_value(); }
  /// Throws Error when the extortion blocks are present without their data blocks.
  void check_invariants() const;
};

Bytes encode_config(const PlcConfig& cfg);
PlcConfig decode_config(const Bytes& bytes);

/// What happened in one scan; used by tests and auditors.
struct CycleObservation {
  SimTime t;
  bool enable = false;
  bool alert = false;
  bool core_executed = false;
  bool disruption_ran = false;
  bool all_outputs_on = false;
};

class Plc final : public Endpoint {
 public:
  Plc(SimContext ctx, PlcConfig config, SimTime first_scan = SimTime{0});

  /// Schedules the first scan.
  void start();

  bool alive() const override { return alive_; }
  DeliveryResult handle(const NetMessage& msg) override;

  DeliveryResult handle_write(const NetMessage& msg);
  DeliveryResult handle_read(const NetMessage& msg);

  void scan_cycle();
  bool check_liveness();
  void check_neighbor_alert(const PollAssignment& a);
  void send_polls();

  void halt();
  /// Direct memory write by a local operator (no network involved).
  void poke(const BitAddress& addr, bool value);

  const DeviceId& id() const { return config_.id; }
  const PlcConfig& config() const { return config_; }
  bool enabled() const;
  bool alert() const;
  bool polling() const { return alive_ && enabled() && !alert(); }
  std::optional<SimTime> deadline() const;
  const std::vector<OutputCard>& outputs() const { return config_.output_cards; }
  std::optional<bool> read_bit(const BitAddress& a) const;

  void set_cycle_observer(std::function<void(const CycleObservation&)> obs) { observer_ = std::move(obs); }

 private:
  struct TankState {
    int level = 0;
    bool filling = true;
  };

  bool bit(const BitAddress& a) const { return read_bit(a).value_or(false); }
  void set_bit(const BitAddress& a, bool v);
  bool authorized(const NetMessage& msg) const;
  bool credential_ok(const NetMessage& msg) const;
  DeliveryResult apply_memory_write(const NetMessage& msg);
  void apply_config(PlcConfig next, const DeviceId& by);
  void on_enabled();
  void on_disarmed(const DeviceId& by);
  void raise_alert(std::string cause, std::vector<std::pair<std::string, std::string>> extra = {});
  bool run_core();
  void run_comm();
  void emit(std::string_view kind, std::vector<std::pair<std::string, std::string>> fields = {});

  SimContext ctx_;
  PlcConfig config_;
  SimTime first_scan_;
  bool alive_ = true;
  bool started_ = false;
  std::optional<EventHandle> next_scan_;

  // extortion runtime
  bool enable_seen_ = false;
  SimTime next_poll_at_{0};
  std::map<BitAddress, SimTime> last_change_;
  std::vector<bool> poll_values_;
  bool disrupted_ = false;
  bool core_disabled_reported_ = false;

  std::map<std::string, TankState> tanks_;
  std::vector<SimTime> next_comm_at_;
  std::uint8_t comm_counter_ = 0;

  std::function<void(const CycleObservation&)> observer_;
};

}  // namespace dmsim
