#pragma once

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

namespace monk {

// Simulated time in integer microseconds since scenario start. All event
// timestamps are exact integers; there is no floating-point clock.
using SimTime = std::uint64_t;

inline constexpr SimTime kNever = std::numeric_limits<SimTime>::max();

using ThreadId = std::int32_t;
inline constexpr ThreadId kNoThread = -1;

inline constexpr std::uint64_t kMiB = 1024ull * 1024ull;

// A scenario or CLI configuration problem. Maps to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// A violated model invariant (dispatch priority, heap bounds, accounting).
// Maps to exit code 3.
class InvariantViolation : public std::runtime_error {
 public:
  explicit InvariantViolation(const std::string& what)
      : std::runtime_error(what) {}
};

// Unbalanced criticality-counter traffic (decrement at zero). Fail fast:
// silent wraparound would hide protocol bugs in the hook plumbing.
class ProtocolViolation : public std::runtime_error {
 public:
  explicit ProtocolViolation(const std::string& what)
      : std::runtime_error(what) {}
};

}  // namespace monk
