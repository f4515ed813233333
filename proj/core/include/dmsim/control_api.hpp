#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "dmsim/detection.hpp"
#include "dmsim/scenario.hpp"

namespace dmsim {

struct DeviceSnapshot {
  DeviceId id;
  std::string kind;
  bool alive = true;
  bool enable = false;
  bool alert = false;
  std::map<std::string, bool> outputs;
  bool polling = false;
};

struct LinkSnapshot {
  DeviceId a;
  DeviceId b;
  bool up = true;
};

struct SimSnapshot {
  SimTime t;
  std::vector<DeviceSnapshot> devices;
  std::vector<LinkSnapshot> links;
  bool armed = false;
  std::optional<SimTime> deadline;
  std::size_t detection_alerts = 0;
  bool paused = false;
  bool finished = false;
  double speed = 1.0;
};

std::string snapshot_to_json(const SimSnapshot& s);

struct CommandResult {
  bool accepted = false;
  std::uint64_t handle = 0;
  std::string reason;
};

struct EventBatch {
  std::size_t next = 0;  // position to resume from
  std::vector<std::pair<std::size_t, TraceRecord>> records;
  bool overflow = false;  // requested records were evicted from the buffer
  std::size_t oldest = 0;
  bool closed = false;    // the session has ended and everything was delivered
};

/// Bounded fan-out buffer of trace records keyed by trace position. The
/// producer never blocks; the oldest records are evicted when full.
class EventBuffer {
 public:
  explicit EventBuffer(std::size_t capacity) : capacity_(capacity) {}

  void push(std::size_t position, const TraceRecord& rec);
  void close();
  /// Throws Error for a position beyond the end of the stream.
  EventBatch read(std::size_t since, std::size_t max, std::chrono::milliseconds wait);
  std::size_t end() const;

 private:
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<std::pair<std::size_t, TraceRecord>> buf_;
  std::size_t capacity_;
  std::size_t next_ = 0;
  bool closed_ = false;
};

struct SessionOptions {
  /// Simulated ms per wall ms; 0 runs as fast as possible.
  double speed = 1.0;
  bool start_paused = false;
  std::size_t event_buffer = 1 << 16;
  std::optional<std::uint64_t> seed;
  /// Length of the pristine run used to learn the live detector's baseline.
  SimTime baseline_window{10000};
};

/// One interactive exercise. The kernel runs on its own thread; snapshots
/// and commands only meet it between events.
class Session {
 public:
  Session(ScenarioScript script, SessionOptions options);
  ~Session();

  Session(const Session&) = delete;
  Session& operator=(const Session&) = delete;

  SimSnapshot snapshot();
  /// Command document as JSON text. Rejections carry a reason.
  CommandResult submit(const std::string& command_json);
  EventBatch events(std::size_t since, std::size_t max, std::chrono::milliseconds wait) {
    return events_.read(since, max, wait);
  }

  /// Stops the kernel thread and closes the event stream. Idempotent.
  void stop();
  bool finished() const { return finished_.load(); }
  bool wait_finished(std::chrono::milliseconds timeout);
  std::string trace_text();
  const ScenarioScript& script() const { return script_; }

 private:
  void loop();
  void reanchor();
  std::size_t count_detections();

  ScenarioScript script_;
  SessionOptions options_;

  std::mutex mu_;  // fleet access
  std::unique_ptr<Fleet> fleet_;
  FlowBaseline baseline_;
  std::set<FlowKey> novel_;
  std::size_t flows_scanned_ = 0;

  std::mutex ctl_mu_;
  std::condition_variable ctl_cv_;
  bool paused_ = false;
  double speed_ = 1.0;
  std::uint64_t step_budget_ = 0;
  SimTime anchor_sim_{0};
  std::chrono::steady_clock::time_point anchor_wall_;

  EventBuffer events_;
  std::atomic<std::uint64_t> next_handle_{1};
  std::atomic<bool> stop_{false};
  std::atomic<bool> finished_{false};
  std::thread thread_;
};

/// HTTP surface under /v1. One session at a time.
class ControlServer {
 public:
  ControlServer();
  ~ControlServer();

  /// Blocks until stop().
  void listen(const std::string& host, int port);
  /// Binds an ephemeral port, serves on a background thread and returns the port.
  int start_background(const std::string& host = "127.0.0.1");
  void stop();

  std::shared_ptr<Session> session();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace dmsim
