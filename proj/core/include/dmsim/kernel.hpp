#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "dmsim/types.hpp"

namespace dmsim {

struct EventHandle {
  SimTime fire_at;
  std::uint64_t seq = 0;
};

struct RunLimits {
  SimTime horizon;
  std::uint64_t max_events = UINT64_MAX;
};

enum class StopReason { horizon_reached, event_budget, queue_empty, externally_paused };

std::string_view to_string(StopReason r);

/// Single-threaded discrete-event scheduler.
///
/// Events execute in (fire_at, seq) order where seq is assigned at scheduling
/// time. Externally injected work goes through a separate queue that is
/// drained only between events: before an event at time t runs, every
/// injection with at <= t is applied (ordered by at, then submission order).
/// That queue is the only part of the kernel that may be touched from other
/// threads.
class Kernel {
 public:
  using Action = std::function<void()>;

  explicit Kernel(std::uint64_t seed = 0);

  Kernel(const Kernel&) = delete;
  Kernel& operator=(const Kernel&) = delete;

  EventHandle schedule(SimTime fire_at, std::string origin, Action action);
  EventHandle schedule_after(SimTime delay, std::string origin, Action action) {
    return schedule(now_ + delay, std::move(origin), std::move(action));
  }

  /// Returns true if the event was still pending.
  bool cancel(const EventHandle& handle);

  StopReason run_until(const RunLimits& limits);

  SimTime now() const { return now_; }
  std::uint64_t seed() const { return seed_; }
  std::uint64_t executed_events() const { return executed_; }
  std::size_t pending_events() const { return queue_.size(); }

  /// Independent generator for a named consumer. The same (seed, name) pair
  /// always yields the same sequence regardless of other streams.
  std::mt19937_64 stream(std::string_view name) const;

  /// Thread-safe. Runs `action` at the first event boundary at or after `at`.
  /// Times in the past are clamped to the current boundary.
  void inject(SimTime at, Action action);
  std::size_t pending_injections() const;

  /// Thread-safe. The running run_until() returns externally_paused at the
  /// next event boundary.
  void request_pause() { pause_requested_.store(true); }

 private:
  struct Injection {
    SimTime at;
    std::uint64_t order;
    Action action;
  };

  struct Pending {
    std::string origin;
    Action action;
  };

  bool drain_injections(SimTime upto);

  std::uint64_t seed_;
  SimTime now_{0};
  std::uint64_t next_seq_ = 0;
  std::uint64_t executed_ = 0;
  std::map<std::pair<std::int64_t, std::uint64_t>, Pending> queue_;

  mutable std::mutex inject_mu_;
  std::vector<Injection> injections_;
  std::uint64_t next_injection_ = 0;
  std::atomic<bool> pause_requested_{false};
};

}  // namespace dmsim
