#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "monk/common.hpp"
#include "monk/sched.hpp"

namespace monk {

enum class PolicyVariant : std::uint8_t {
  Vanilla,  // GC threads keep NORMAL policy; all hooks disabled
  Monk,     // GC workers on idle cores only
  MonkS,    // Monk + policy switch inside safepoints
  MonkL,    // Monk + policy switch inside locks
  HMonk,    // Monk + high-load fallback
  HMonkS,   // MonkS + high-load fallback
};

enum class FallbackMode : std::uint8_t { EveryOtherCycle, WhileCritical };

inline const char* to_string(PolicyVariant v) {
  switch (v) {
    case PolicyVariant::Vanilla: return "VANILLA";
    case PolicyVariant::Monk: return "MONK";
    case PolicyVariant::MonkS: return "MONK_S";
    case PolicyVariant::MonkL: return "MONK_L";
    case PolicyVariant::HMonk: return "HMONK";
    case PolicyVariant::HMonkS: return "HMONK_S";
  }
  return "?";
}

struct PolicyParams {
  PolicyVariant variant = PolicyVariant::Vanilla;
  int headroom_cores = 0;  // the N in HMONK(N)
  FallbackMode fallback_mode = FallbackMode::EveryOtherCycle;
  std::uint64_t reconcile_interval_us = 10000;
  double decay_alpha = 0.5;
  int max_threads = 100;  // criticality table size
  // The usage threshold is additionally capped at the highest utilization the
  // model can sustain: with N=0 the raw formula yields 100%, which smoothed
  // usage never attains, so the cap keeps the C0 configuration meaningful.
  double saturation_slack_cores = 0.5;
  // Treat allocation stalls observed since the last start decision as GC
  // criticality alongside the CPU-threshold proxy.
  bool stall_pressure_trigger = true;

  bool uses_lock_hook() const { return variant == PolicyVariant::MonkL; }
  bool uses_safepoint_hook() const {
    return variant == PolicyVariant::MonkS || variant == PolicyVariant::HMonkS;
  }
  bool uses_fallback() const {
    return variant == PolicyVariant::HMonk || variant == PolicyVariant::HMonkS;
  }
  SchedPolicy gc_initial_policy() const {
    return variant == PolicyVariant::Vanilla ? SchedPolicy::Normal
                                             : SchedPolicy::Idle;
  }
};

// The /proc/stat formula chain: cpu_sum, cpu_delta, idle_delta, cpu_used,
// then cpu_usage = 100 * cpu_used / cpu_delta.
inline double cpu_usage_from_stat(const CpuStat& prev, const CpuStat& cur) {
  const std::uint64_t cpu_delta = cur.sum() - prev.sum();
  if (cpu_delta == 0) {
    throw ConfigError("cpu_usage_from_stat: cpu_delta is zero");
  }
  const std::uint64_t idle_delta = cur.idle - prev.idle;
  const std::uint64_t cpu_used = cpu_delta - idle_delta;
  return 100.0 * static_cast<double>(cpu_used) /
         static_cast<double>(cpu_delta);
}

struct CpuUsageEstimator {
  std::uint64_t last_sum = 0;
  std::uint64_t last_idle = 0;
  double smoothed = 0.0;
};

inline double decayed(CpuUsageEstimator& est, double sample, double alpha) {
  est.smoothed = alpha * sample + (1.0 - alpha) * est.smoothed;
  return est.smoothed;
}

// Feeds one /proc/stat snapshot into the estimator. A zero-delta interval
// carries no information and leaves the smoothed value unchanged.
inline double estimator_update(CpuUsageEstimator& est, const CpuStat& cur,
                               double alpha) {
  const std::uint64_t sum = cur.sum();
  if (sum == est.last_sum) return est.smoothed;
  CpuStat prev;
  prev.user = est.last_sum - est.last_idle;  // split does not matter here
  prev.idle = est.last_idle;
  const double sample = cpu_usage_from_stat(prev, cur);
  est.last_sum = sum;
  est.last_idle = cur.idle;
  return decayed(est, sample, alpha);
}

// HIGH_CPU from a headroom core count: the utilization at which N cores are
// still free. (10,1) -> 90.
inline double threshold_from_headroom(int cores, int headroom_cores) {
  if (headroom_cores < 0 || headroom_cores >= cores) {
    throw ConfigError("headroom cores must satisfy 0 <= N < cores");
  }
  return 100.0 * static_cast<double>(cores - headroom_cores) /
         static_cast<double>(cores);
}

// Per-thread nesting counters with hash-indexed slots. Dense simulator ids
// make the identity hash injective; a collision is a configuration bug.
class CriticalityTable {
 public:
  explicit CriticalityTable(int max_threads)
      : counts_(static_cast<std::size_t>(max_threads), 0),
        owner_(static_cast<std::size_t>(max_threads), kNoThread) {}

  int index_of(ThreadId tid) const {
    return static_cast<int>(tid % static_cast<ThreadId>(counts_.size()));
  }

  void register_thread(ThreadId tid) {
    const std::size_t idx = static_cast<std::size_t>(index_of(tid));
    if (owner_[idx] != kNoThread && owner_[idx] != tid) {
      throw ConfigError("criticality table index collision between threads " +
                        std::to_string(owner_[idx]) + " and " +
                        std::to_string(tid));
    }
    owner_[idx] = tid;
  }

  int count(ThreadId tid) const {
    return counts_[static_cast<std::size_t>(index_of(tid))];
  }

  // Returns the value before increment.
  int increment(ThreadId tid) {
    return counts_[static_cast<std::size_t>(index_of(tid))]++;
  }

  // Returns the value after decrement; throws on underflow.
  int decrement(ThreadId tid) {
    int& c = counts_[static_cast<std::size_t>(index_of(tid))];
    if (c == 0) {
      throw ProtocolViolation("criticality counter underflow for thread " +
                              std::to_string(tid));
    }
    return --c;
  }

  bool all_zero() const {
    return std::all_of(counts_.begin(), counts_.end(),
                       [](int c) { return c == 0; });
  }

 private:
  std::vector<int> counts_;
  std::vector<ThreadId> owner_;
};

enum class PolicyReason : std::uint8_t { Lock, Safepoint, Fallback, Reconcile };

inline const char* to_string(PolicyReason r) {
  switch (r) {
    case PolicyReason::Lock: return "lock";
    case PolicyReason::Safepoint: return "safepoint";
    case PolicyReason::Fallback: return "fallback";
    case PolicyReason::Reconcile: return "reconcile";
  }
  return "?";
}

struct PolicyLogRow {
  SimTime t;
  ThreadId thread;
  SchedPolicy policy;
  int counter;
  PolicyReason reason;
};

// The Monk policy family: criticality counters driving policy switches, the
// lock/safepoint hooks, the High Monk fallback, and the periodic reconciler.
class MonkPolicy {
 public:
  MonkPolicy(Machine& m, const PolicyParams& p)
      : machine_(m), p_(p), table_(p.max_threads) {
    if (p.decay_alpha <= 0.0 || p.decay_alpha > 1.0) {
      throw ConfigError("policy.decay_alpha must be in (0,1]");
    }
    if (p.uses_fallback() &&
        (p.headroom_cores < 0 || p.headroom_cores > 4)) {
      throw ConfigError("HMONK headroom cores must be within {0..4}");
    }
  }

  void register_workers(const std::vector<ThreadId>& ids) {
    workers_ = ids;
    for (ThreadId t : ids) table_.register_thread(t);
  }

  void register_director(ThreadId id) { table_.register_thread(id); }

  const CriticalityTable& table() const { return table_; }
  const std::vector<PolicyLogRow>& log() const { return log_; }
  bool inside_critical_section() const { return inside_critical_; }
  double smoothed_usage() const { return estimator_.smoothed; }
  std::uint64_t reconcile_checks() const { return reconcile_checks_; }
  std::uint64_t reconcile_corrections() const { return reconcile_corrections_; }
  std::uint64_t fallback_entries() const { return fallback_entries_; }

  // Counter 0 -> 1 raises the thread to NORMAL before the increment.
  void increment_nested(ThreadId tid, PolicyReason reason) {
    require_gc(tid);
    if (table_.count(tid) == 0) {
      apply_policy(tid, SchedPolicy::Normal, reason);
    }
    table_.increment(tid);
  }

  // Counter 1 -> 0 drops the thread back to IDLE after the decrement.
  void decrement_nested(ThreadId tid, PolicyReason reason) {
    require_gc(tid);
    if (table_.decrement(tid) == 0) {
      apply_policy(tid, SchedPolicy::Idle, reason);
    }
  }

  // Lock hook (Monk_L): only the acquiring GC thread switches policy;
  // mutator acquisitions pass through untouched.
  void on_lock(ThreadId tid, bool acquire) {
    if (!p_.uses_lock_hook()) return;
    if (!is_gc(machine_.thread(tid).kind)) return;
    if (acquire) {
      increment_nested(tid, PolicyReason::Lock);
    } else {
      decrement_nested(tid, PolicyReason::Lock);
    }
  }

  // Safepoint hook (Monk_S / HMonk_S): applied to every GC worker.
  void on_safepoint(bool begin) {
    if (!p_.uses_safepoint_hook()) return;
    for (ThreadId t : workers_) {
      if (begin) {
        increment_nested(t, PolicyReason::Safepoint);
      } else {
        decrement_nested(t, PolicyReason::Safepoint);
      }
    }
  }

  // Estimator refresh; runs at every director decision point.
  double on_director_tick(const CpuStat& stat) {
    return estimator_update(estimator_, stat, p_.decay_alpha);
  }

  // High Monk, evaluated when the director has decided to start a cycle.
  // Every-other-cycle mode leaves an open critical section at the next
  // decision unconditionally; while-critical mode leaves it only once the
  // criticality condition no longer holds.
  void on_gc_start_decision(bool pressing, std::uint64_t stalls_since) {
    if (!p_.uses_fallback()) return;
    const bool critical =
        pressing && (estimator_.smoothed >= effective_threshold() ||
                     (p_.stall_pressure_trigger && stalls_since > 0));
    if (inside_critical_) {
      if (p_.fallback_mode == FallbackMode::EveryOtherCycle || !critical) {
        for (ThreadId t : workers_) decrement_nested(t, PolicyReason::Fallback);
        inside_critical_ = false;
      }
      return;
    }
    if (critical) {
      for (ThreadId t : workers_) increment_nested(t, PolicyReason::Fallback);
      inside_critical_ = true;
      ++fallback_entries_;
    }
  }

  double effective_threshold() const {
    const int cores = machine_.cores();
    const double configured = threshold_from_headroom(cores, p_.headroom_cores);
    const double cap = 100.0 *
                       (static_cast<double>(cores) - p_.saturation_slack_cores) /
                       static_cast<double>(cores);
    return std::min(configured, cap);
  }

  // Repairs policy/counter disagreements; returns corrections made this pass.
  int reconcile() {
    if (p_.variant == PolicyVariant::Vanilla) return 0;
    ++reconcile_checks_;
    int corrections = 0;
    for (ThreadId t : workers_) {
      const SchedPolicy want =
          table_.count(t) > 0 ? SchedPolicy::Normal : SchedPolicy::Idle;
      if (machine_.thread(t).policy != want) {
        apply_policy(t, want, PolicyReason::Reconcile);
        ++corrections;
      }
    }
    reconcile_corrections_ += static_cast<std::uint64_t>(corrections);
    return corrections;
  }

 private:
  void require_gc(ThreadId tid) {
    if (!is_gc(machine_.thread(tid).kind)) {
      throw ProtocolViolation("criticality counter touched for non-GC thread " +
                              std::to_string(tid));
    }
  }

  void apply_policy(ThreadId tid, SchedPolicy pol, PolicyReason reason) {
    machine_.set_policy(tid, pol);
    log_.push_back(PolicyLogRow{machine_.now(), tid, pol, table_.count(tid),
                                reason});
  }

  Machine& machine_;
  PolicyParams p_;
  CriticalityTable table_;
  std::vector<ThreadId> workers_;
  CpuUsageEstimator estimator_;
  bool inside_critical_ = false;
  std::uint64_t reconcile_checks_ = 0;
  std::uint64_t reconcile_corrections_ = 0;
  std::uint64_t fallback_entries_ = 0;
  std::vector<PolicyLogRow> log_;
};

}  // namespace monk
