#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "monk/common.hpp"
#include "monk/rng.hpp"

namespace monk {

struct RequestSpec {
  std::uint64_t service_micros = 1000;  // mean CPU per request
  double service_jitter = 0.2;          // uniform fraction in [0,1)
  std::uint64_t alloc_bytes = 32 * 1024;
  int spread_chunks = 1;  // allocations per request (1 = all at start)
};

enum class ArrivalKind : std::uint8_t { Deterministic, Poisson, OnOff };

struct ArrivalProcess {
  ArrivalKind kind = ArrivalKind::Poisson;
  double rate = 1000.0;        // req/s (deterministic, poisson)
  double base_rate = 0.0;      // on-off
  double burst_rate = 0.0;     // on-off
  std::uint64_t period_us = 100000;
  double duty = 0.5;           // fraction of the period spent bursting
};

inline void validate(const ArrivalProcess& p) {
  if (p.kind == ArrivalKind::OnOff) {
    if (p.burst_rate <= 0.0 || p.base_rate < 0.0) {
      throw ConfigError("on-off arrivals need burst_rate > 0 and base_rate >= 0");
    }
    if (p.duty <= 0.0 || p.duty >= 1.0) {
      throw ConfigError("on-off duty fraction must be in (0,1)");
    }
    if (p.period_us == 0) throw ConfigError("on-off period must be positive");
  } else if (p.rate <= 0.0) {
    throw ConfigError("arrival rate must be positive");
  }
}

// Streaming arrival generator; timestamps are strictly increasing and fully
// determined by (process, seed). Long horizons never materialize a list.
class ArrivalStream {
 public:
  ArrivalStream(const ArrivalProcess& p, Rng rng) : p_(p), shape_(p), rng_(rng) {
    validate(p_);
  }

  // Changes the mean injection rate from `from` onward. On-off processes
  // keep their shape (period, duty) and scale both regime rates.
  void set_rate(double rate, SimTime from) {
    if (rate < 0.0) throw ConfigError("arrival rate must be nonnegative");
    if (p_.kind == ArrivalKind::OnOff) {
      const double shape_mean =
          shape_.burst_rate * shape_.duty + shape_.base_rate * (1.0 - shape_.duty);
      const double f = shape_mean > 0.0 ? rate / shape_mean : 0.0;
      p_.burst_rate = shape_.burst_rate * f;
      p_.base_rate = shape_.base_rate * f;
    } else {
      p_.rate = rate;
    }
    base_time_ = from;
    emitted_in_regime_ = 0;
    if (last_ < from) last_ = from;
  }

  double rate() const { return p_.rate; }

  // Next arrival at or after the last one; kNever when the process is off.
  SimTime next() {
    switch (p_.kind) {
      case ArrivalKind::Deterministic: {
        if (p_.rate <= 0.0) return kNever;
        ++emitted_in_regime_;
        const double off =
            static_cast<double>(emitted_in_regime_) * 1e6 / p_.rate;
        SimTime t = base_time_ + static_cast<SimTime>(std::llround(off));
        if (t <= last_) t = last_ + 1;
        last_ = t;
        return t;
      }
      case ArrivalKind::Poisson: {
        if (p_.rate <= 0.0) return kNever;
        const double gap_us = rng_.exponential(p_.rate) * 1e6;
        SimTime t = last_ + std::max<std::uint64_t>(
                                1, static_cast<std::uint64_t>(std::llround(gap_us)));
        last_ = t;
        return t;
      }
      case ArrivalKind::OnOff:
        return next_on_off();
    }
    return kNever;
  }

 private:
  SimTime next_on_off() {
    SimTime t = last_;
    // Memorylessness lets us redraw at each regime boundary.
    for (int guard = 0; guard < 1 << 20; ++guard) {
      const std::uint64_t phase = t % p_.period_us;
      const std::uint64_t burst_end = static_cast<std::uint64_t>(
          p_.duty * static_cast<double>(p_.period_us));
      const bool bursting = phase < burst_end;
      const double rate = bursting ? p_.burst_rate : p_.base_rate;
      const SimTime regime_end = bursting ? t - phase + burst_end
                                          : t - phase + p_.period_us;
      if (rate <= 0.0) {
        t = regime_end;
        continue;
      }
      const double gap_us = rng_.exponential(rate) * 1e6;
      SimTime cand = t + std::max<std::uint64_t>(
                             1, static_cast<std::uint64_t>(std::llround(gap_us)));
      if (cand >= regime_end) {
        t = regime_end;
        continue;
      }
      last_ = cand;
      return cand;
    }
    return kNever;
  }

  ArrivalProcess p_;
  ArrivalProcess shape_;  // original regime rates for on-off rescaling
  Rng rng_;
  SimTime last_ = 0;
  SimTime base_time_ = 0;
  std::uint64_t emitted_in_regime_ = 0;
};

// Materialized arrival list over [0, horizon); mostly a test convenience.
inline std::vector<SimTime> generate_arrivals(const ArrivalProcess& p,
                                              SimTime horizon,
                                              std::uint64_t seed) {
  if (horizon == 0) throw ConfigError("arrival horizon must be positive");
  ArrivalStream s(p, Rng(seed).stream(1));
  std::vector<SimTime> out;
  for (;;) {
    const SimTime t = s.next();
    if (t >= horizon) break;
    out.push_back(t);
  }
  return out;
}

// Service-time sample: mean with uniform jitter, floored at 1us.
inline std::uint64_t sample_service(const RequestSpec& spec, Rng& rng) {
  if (spec.service_jitter <= 0.0) return std::max<std::uint64_t>(1, spec.service_micros);
  const double u = rng.uniform(-1.0, 1.0);
  const double v =
      static_cast<double>(spec.service_micros) * (1.0 + spec.service_jitter * u);
  return std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::llround(v)));
}

struct RequestRecord {
  SimTime arrival = 0;
  SimTime start = 0;
  SimTime completion = 0;
  std::uint64_t stall_us = 0;

  std::uint64_t latency() const { return completion - arrival; }
};

}  // namespace monk
