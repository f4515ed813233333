#include "dmsim/kernel.hpp"

#include <algorithm>

namespace dmsim {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

std::string to_string(const BitAddress& a) {
  return "DB" + std::to_string(a.db) + ".DBX" + std::to_string(a.byte) + "." + std::to_string(a.bit);
}

std::string_view to_string(StopReason r) {
  switch (r) {
    case StopReason::horizon_reached: return "horizon-reached";
    case StopReason::event_budget: return "event-budget";
    case StopReason::queue_empty: return "queue-empty";
    case StopReason::externally_paused: return "externally-paused";
  }
  return "?";
}

Kernel::Kernel(std::uint64_t seed) : seed_(seed) {}

EventHandle Kernel::schedule(SimTime fire_at, std::string origin, Action action) {
  if (fire_at < now_) {
    throw Error("scheduling into the past: " + std::to_string(fire_at.ms) + " < now " +
                std::to_string(now_.ms));
  }
  const std::uint64_t seq = next_seq_++;
  queue_.emplace(std::make_pair(fire_at.ms, seq), Pending{std::move(origin), std::move(action)});
  return EventHandle{fire_at, seq};
}

bool Kernel::cancel(const EventHandle& handle) {
  return queue_.erase({handle.fire_at.ms, handle.seq}) > 0;
}

std::mt19937_64 Kernel::stream(std::string_view name) const {
  const std::uint64_t a = splitmix64(seed_ ^ splitmix64(fnv1a(name)));
  std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(fnv1a(name))};
  return std::mt19937_64(seq);
}

void Kernel::inject(SimTime at, Action action) {
  std::lock_guard lock(inject_mu_);
  injections_.push_back(Injection{at, next_injection_++, std::move(action)});
}

std::size_t Kernel::pending_injections() const {
  std::lock_guard lock(inject_mu_);
  return injections_.size();
}

bool Kernel::drain_injections(SimTime upto) {
  bool any = false;
  for (;;) {
    Injection next;
    {
      std::lock_guard lock(inject_mu_);
      auto it = std::min_element(injections_.begin(), injections_.end(), [](const auto& a, const auto& b) {
        return std::pair(a.at.ms, a.order) < std::pair(b.at.ms, b.order);
      });
      if (it == injections_.end() || it->at > upto) return any;
      next = std::move(*it);
      injections_.erase(it);
    }
    if (next.at > now_) now_ = next.at;
    next.action();
    any = true;
  }
}

StopReason Kernel::run_until(const RunLimits& limits) {
  std::uint64_t executed_here = 0;
  for (;;) {
    if (pause_requested_.exchange(false)) return StopReason::externally_paused;

    const SimTime next_at = queue_.empty() ? limits.horizon : std::min(SimTime{queue_.begin()->first.first}, limits.horizon);
    // Injected work may schedule events earlier than the current head.
    if (drain_injections(next_at)) continue;

    if (queue_.empty() || SimTime{queue_.begin()->first.first} > limits.horizon) {
      const bool empty = queue_.empty();
      if (limits.horizon > now_) now_ = limits.horizon;
      return empty ? StopReason::queue_empty : StopReason::horizon_reached;
    }
    if (executed_here >= limits.max_events) return StopReason::event_budget;

    auto node = queue_.extract(queue_.begin());
    now_ = SimTime{node.key().first};
    ++executed_;
    ++executed_here;
    node.mapped().action();
  }
}

}  // namespace dmsim
