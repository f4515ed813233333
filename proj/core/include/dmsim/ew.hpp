#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dmsim/context.hpp"
#include "dmsim/plc.hpp"

namespace dmsim {

struct RansomTerms {
  SimTime deadline;  // absolute simulation time
  std::string key;
};

struct ArmReport {
  bool armed = false;
  /// Outcome of the staging read per PLC, in target order.
  std::vector<std::pair<DeviceId, Outcome>> staged;
};

enum class DisarmOutcome { disarmed, wrong_key, ew_shutdown, not_armed };
std::string_view to_string(DisarmOutcome o);

/// The engineering workstation once it has been turned into the coordinator:
/// heartbeat writer, alert observer, arming and key check.
class EngineeringWorkstation final : public Endpoint {
 public:
  EngineeringWorkstation(SimContext ctx, DeviceId id);

  /// Set by the deployer. `plcs` are every PLC carrying the blocks (arm and
  /// disarm go to all of them); `poll_targets` get the per-interval heartbeat.
  void configure(std::vector<DeviceId> plcs, std::vector<DeviceId> poll_targets, SimTime poll_interval,
                 std::string plc_password);
  void set_comm(std::vector<CommFunction> comm) { comm_ = std::move(comm); }
  void start();

  bool alive() const override { return !shutdown_; }
  DeliveryResult handle(const NetMessage& msg) override;

  /// Stages a read of every PLC's status block, then commits deadline and
  /// enable writes only if all staging reads succeeded. Throws Error when
  /// already armed, shut down, or the deadline is not in the future.
  ArmReport arm_all(const RansomTerms& terms);
  DisarmOutcome accept_key(const std::string& key);
  void poll_cycle();
  void halt();

  const DeviceId& id() const { return id_; }
  bool polling() const { return polling_; }
  bool encrypted() const { return encrypted_; }
  bool shutdown() const { return shutdown_; }
  bool poll_value() const { return poll_value_; }
  SimTime poll_interval() const { return poll_interval_; }
  std::optional<SimTime> deadline() const { return deadline_; }
  int key_attempts() const { return key_attempts_; }
  const std::vector<DeviceId>& plcs() const { return plcs_; }
  const std::vector<DeviceId>& poll_targets() const { return poll_targets_; }
  bool configured() const { return configured_; }

 private:
  void cease(const std::string& cause, std::vector<std::pair<std::string, std::string>> extra = {});
  void emit(std::string_view kind, std::vector<std::pair<std::string, std::string>> fields = {});
  void schedule_comm(std::size_t i, SimTime at);

  SimContext ctx_;
  DeviceId id_;
  bool configured_ = false;
  std::vector<DeviceId> plcs_;
  std::vector<DeviceId> poll_targets_;
  SimTime poll_interval_{1000};
  std::string plc_password_;

  bool polling_ = false;
  bool poll_value_ = false;
  bool encrypted_ = false;
  bool shutdown_ = false;
  std::string ransom_key_;
  std::optional<SimTime> deadline_;
  int key_attempts_ = 0;
  std::optional<EventHandle> next_tick_;
  std::optional<EventHandle> deadline_event_;
  std::vector<CommFunction> comm_;
  std::vector<std::optional<EventHandle>> comm_events_;
  std::uint8_t comm_counter_ = 0;
};

}  // namespace dmsim
