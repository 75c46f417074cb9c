#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "monk/common.hpp"
#include "monk/scenario.hpp"
#include "monk/simulation.hpp"

namespace monk {

// The response-time SLAs scored by critical throughput, in microseconds.
inline constexpr std::array<std::uint64_t, 5> kSlaMicros = {10000, 25000, 50000,
                                                            75000, 100000};

struct CurveStep {
  double injection_rate = 0.0;       // req/s
  double achieved_throughput = 0.0;  // req/s
  std::uint64_t max_latency_us = 0;
  std::uint64_t p99_latency_us = 0;
  double mean_latency_us = 0.0;
  double cpu_load = 0.0;  // percent
  std::uint64_t stalls = 0;
};

struct ResponseCurve {
  std::vector<CurveStep> steps;
  double preliminary_max = 0.0;
};

struct Scores {
  double max_jops = 0.0;
  std::array<double, 5> critical_per_sla = {0, 0, 0, 0, 0};
  double critical_aggregate = 0.0;
};

inline double mean_rate(const ArrivalProcess& p) {
  if (p.kind == ArrivalKind::OnOff) {
    return p.burst_rate * p.duty + p.base_rate * (1.0 - p.duty);
  }
  return p.rate;
}

// Rescales the process to the requested mean rate; on-off keeps its shape.
inline ArrivalProcess scale_process(ArrivalProcess p, double rate) {
  if (p.kind == ArrivalKind::OnOff) {
    const double cur = mean_rate(p);
    const double f = cur > 0.0 ? rate / cur : 0.0;
    p.burst_rate *= f;
    p.base_rate *= f;
  } else {
    p.rate = rate;
  }
  return p;
}

// One fixed-rate probe: settle, then measure one window.
inline WindowStats probe_rate(const ScenarioConfig& cfg, std::uint64_t seed,
                              double rate, std::uint64_t settle_us,
                              std::uint64_t window_us) {
  ScenarioConfig c = cfg;
  c.arrival = scale_process(c.arrival, rate);
  Simulation sim(c, seed);
  sim.run_until(settle_us);
  sim.begin_window();
  sim.run_until(settle_us + window_us);
  return sim.end_window();
}

inline bool sustainable(const ScenarioConfig& cfg, std::uint64_t seed,
                        double rate) {
  const WindowStats w = probe_rate(cfg, seed, rate, cfg.bench.warmup_settle_us,
                                   cfg.bench.warmup_window_us);
  return w.throughput >= cfg.bench.sustain_fraction * rate;
}

// Warm-up phase: finds the preliminary maximum capacity, the largest rate
// whose achieved throughput stays within the sustain fraction.
inline double warmup(const ScenarioConfig& cfg, std::uint64_t seed) {
  double lo = 10.0;
  if (!sustainable(cfg, seed, lo)) {
    throw ConfigError("warmup: machine saturates at rate ~0; check scenario");
  }
  double hi = lo;
  for (int i = 0; i < 28 && sustainable(cfg, seed, hi * 2.0); ++i) {
    hi *= 2.0;
    lo = hi;
  }
  hi = lo * 2.0;
  for (int i = 0; i < 14; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (sustainable(cfg, seed, mid)) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return lo;
}

// Response-curve phase: sweeps `steps` equal rate increments up to the
// preliminary maximum inside one continuous simulation; each step settles,
// then measures one window.
inline ResponseCurve build_curve_with(Simulation& sim, int steps,
                                      const MeasureParams& measure,
                                      double preliminary_max) {
  ResponseCurve curve;
  curve.preliminary_max = preliminary_max;
  SimTime t = sim.now();
  for (int k = 1; k <= steps; ++k) {
    const double rate =
        preliminary_max * static_cast<double>(k) / static_cast<double>(steps);
    sim.set_rate(rate);
    t += measure.settle_us;
    sim.run_until(t);
    sim.begin_window();
    t += measure.window_us;
    sim.run_until(t);
    const WindowStats w = sim.end_window();
    CurveStep s;
    s.injection_rate = rate;
    s.achieved_throughput = w.throughput;
    s.max_latency_us = w.max_latency_us;
    s.p99_latency_us = w.p99_latency_us;
    s.mean_latency_us = w.mean_latency_us;
    s.cpu_load = w.cpu_pct;
    s.stalls = w.stalls;
    curve.steps.push_back(s);
  }
  return curve;
}

inline ResponseCurve build_curve(const ScenarioConfig& cfg, std::uint64_t seed,
                                 double preliminary_max) {
  ScenarioConfig c = cfg;
  c.arrival = scale_process(c.arrival,
                            preliminary_max / static_cast<double>(cfg.bench.steps));
  Simulation sim(c, seed);
  return build_curve_with(sim, cfg.bench.steps, cfg.measure, preliminary_max);
}

// Largest injection rate whose step met the SLA; 0 when none did.
inline double critical_jops(const ResponseCurve& curve, std::uint64_t sla_us) {
  double best = 0.0;
  for (const CurveStep& s : curve.steps) {
    if (s.max_latency_us <= sla_us && s.injection_rate > best) {
      best = s.injection_rate;
    }
  }
  return best;
}

// Largest injection rate sustained at the configured throughput fraction.
inline double max_jops(const ResponseCurve& curve, double sustain_fraction) {
  double best = 0.0;
  for (const CurveStep& s : curve.steps) {
    if (s.achieved_throughput >= sustain_fraction * s.injection_rate &&
        s.injection_rate > best) {
      best = s.injection_rate;
    }
  }
  return best;
}

// Geometric mean of the per-SLA rates; zero if any rate is zero.
inline double aggregate_critical(const std::array<double, 5>& per_sla) {
  double log_sum = 0.0;
  for (double v : per_sla) {
    if (v <= 0.0) return 0.0;
    log_sum += std::log(v);
  }
  return std::exp(log_sum / static_cast<double>(per_sla.size()));
}

inline Scores score_curve(const ResponseCurve& curve, double sustain_fraction) {
  Scores s;
  s.max_jops = max_jops(curve, sustain_fraction);
  for (std::size_t i = 0; i < kSlaMicros.size(); ++i) {
    s.critical_per_sla[i] = critical_jops(curve, kSlaMicros[i]);
  }
  s.critical_aggregate = aggregate_critical(s.critical_per_sla);
  return s;
}

// Mean CPU usage produced by a fixed injection rate.
inline double usage_at_rate(const ScenarioConfig& cfg, std::uint64_t seed,
                            double rate) {
  if (rate <= 0.0) return 0.0;
  const WindowStats w = probe_rate(cfg, seed, rate, cfg.measure.settle_us,
                                   cfg.measure.window_us);
  return w.cpu_pct;
}

// Finds injection rates whose mean cpu_usage lands within +-2 points of each
// target percentage. Targets must be reachable below saturation.
inline std::vector<double> calibrate(const ScenarioConfig& cfg,
                                     std::uint64_t seed,
                                     const std::vector<double>& targets) {
  std::vector<double> rates;
  for (double target : targets) {
    if (target < 0.0 || target > 100.0) {
      throw ConfigError("calibrate: target load must be within [0,100]");
    }
    if (target == 0.0) {
      rates.push_back(0.0);
      continue;
    }
    double lo = 0.0;
    double hi = 16.0;
    double hi_usage = usage_at_rate(cfg, seed, hi);
    int guard = 0;
    while (hi_usage < target && guard++ < 24) {
      lo = hi;
      hi *= 2.0;
      hi_usage = usage_at_rate(cfg, seed, hi);
    }
    if (hi_usage < target) {
      throw ConfigError("calibrate: target load " + std::to_string(target) +
                        "% is unreachable");
    }
    double rate = hi;
    for (int i = 0; i < 24; ++i) {
      const double mid = 0.5 * (lo + hi);
      const double u = usage_at_rate(cfg, seed, mid);
      if (u < target) {
        lo = mid;
      } else {
        hi = mid;
      }
      rate = hi;
      if (std::fabs(u - target) <= 0.5) {
        rate = mid;
        break;
      }
    }
    const double final_usage = usage_at_rate(cfg, seed, rate);
    if (std::fabs(final_usage - target) > 2.0) {
      throw ConfigError("calibrate: could not land within 2 points of " +
                        std::to_string(target) + "% (got " +
                        std::to_string(final_usage) + "%)");
    }
    rates.push_back(rate);
  }
  return rates;
}

}  // namespace monk
