#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace dmsim {

/// Simulated milliseconds since simulation start. Used both for instants and
/// for durations; the kernel is the only thing that advances "now".
struct SimTime {
  std::int64_t ms = 0;

  constexpr SimTime() = default;
  constexpr explicit SimTime(std::int64_t millis) : ms(millis) {}

  friend constexpr auto operator<=>(SimTime, SimTime) = default;
  friend constexpr SimTime operator+(SimTime a, SimTime b) { return SimTime{a.ms + b.ms}; }
  friend constexpr SimTime operator-(SimTime a, SimTime b) { return SimTime{a.ms - b.ms}; }
  friend constexpr SimTime operator*(std::int64_t k, SimTime a) { return SimTime{k * a.ms}; }
  constexpr SimTime& operator+=(SimTime o) {
    ms += o.ms;
    return *this;
  }
};

constexpr SimTime operator""_ms(unsigned long long v) { return SimTime{static_cast<std::int64_t>(v)}; }

using DeviceId = std::string;

/// Raised for contract violations: bad arguments, unknown devices, malformed
/// input files. Expected protocol outcomes are never reported this way.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// DBn.DBXbyte.bit
struct BitAddress {
  int db = 0;
  int byte = 0;
  int bit = 0;

  friend auto operator<=>(const BitAddress&, const BitAddress&) = default;
};

std::string to_string(const BitAddress& a);

}  // namespace dmsim
