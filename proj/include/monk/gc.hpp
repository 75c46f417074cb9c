#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <string>
#include <vector>

#include "monk/common.hpp"
#include "monk/events.hpp"
#include "monk/rng.hpp"
#include "monk/sched.hpp"

namespace monk {

// Maximum GC worker pool: 25% of the cores, rounded up.
inline int max_gc_workers(int cores) {
  if (cores < 1) throw ConfigError("max_gc_workers: cores must be >= 1");
  return (cores + 3) / 4;
}

struct SafepointSpec {
  double at = 0.0;          // fraction of cycle work completed when it fires
  std::uint64_t duration_us = 500;
};

struct GcParams {
  bool enabled = true;
  std::uint64_t heap_capacity = 512 * kMiB;
  double live_fraction = 0.3;

  // Work model: total cycle work is proportional to live bytes at cycle
  // start plus a fixed overhead. One work unit equals one core-microsecond
  // at the default throughput of 1e6 units per worker-second.
  double work_per_live_mb = 5500.0;       // units per live MiB
  double work_base = 100000.0;            // units per cycle
  double worker_throughput = 1e6;         // units per worker-second
  std::uint64_t work_chunk_us = 1000;     // worker claim granularity (cpu us)

  double k_conservative = 1.0;            // alloc-rate prediction slack
  double start_margin = 0.10;             // start when d*(1+margin) > t_OOM
  double headroom_factor = 1.0;           // no-start when d*(1+h) <= t_OOM
  std::uint64_t tracker_window_us = 2000000;
  int tracker_subintervals = 10;
  double bootstrap_alloc_rate = 100.0 * 1024 * 1024;  // bytes/s
  double bootstrap_cycle_work = 500000.0;             // units
  double bootstrap_throughput = 1e6;                  // units/worker-second
  double history_decay = 0.3;
  std::size_t history_limit = 16;

  std::vector<SafepointSpec> safepoints = {{0.0, 500}, {1.0, 500}};
  double lock_mean_per_cycle = 5.0;
  std::uint64_t lock_hold_us = 200;       // cpu time the holder needs
  // Non-empty: fixed per-cycle lock positions (work fractions) instead of
  // the Poisson draw.
  std::vector<double> lock_points_override;

  std::uint64_t director_period_us = 100000;
};

// Sliding window of (timestamp, bytes) allocation samples.
class AllocationTracker {
 public:
  AllocationTracker(std::uint64_t window_us, int subintervals)
      : window_us_(window_us), buckets_(std::max(1, subintervals)) {}

  void record(SimTime t, std::uint64_t bytes) {
    samples_.push_back({t, bytes});
    prune(t);
  }

  bool empty_window(SimTime now) const {
    return samples_.empty() || samples_.back().t + window_us_ <= now;
  }

  // Conservative prediction: mean rate over the window plus k standard
  // deviations of the per-subinterval rates. Returns bytes per second.
  double predict(SimTime now, double k) const {
    const SimTime start = now > window_us_ ? now - window_us_ : 0;
    const double span_s = static_cast<double>(window_us_) / 1e6;
    const double sub_s = span_s / static_cast<double>(buckets_);
    std::vector<double> sub(static_cast<std::size_t>(buckets_), 0.0);
    double total = 0.0;
    for (const Sample& s : samples_) {
      if (s.t < start || s.t >= now + 1) continue;
      std::uint64_t off = s.t - start;
      std::size_t b = std::min<std::size_t>(
          static_cast<std::size_t>(buckets_) - 1,
          static_cast<std::size_t>(off / std::max<std::uint64_t>(
                                             1, window_us_ /
                                                    static_cast<std::uint64_t>(
                                                        buckets_))));
      sub[b] += static_cast<double>(s.bytes);
      total += static_cast<double>(s.bytes);
    }
    const double mean_rate = total / span_s;
    double var = 0.0;
    for (double bytes : sub) {
      const double r = bytes / sub_s;
      var += (r - mean_rate) * (r - mean_rate);
    }
    var /= static_cast<double>(buckets_);
    return mean_rate + k * std::sqrt(var);
  }

 private:
  struct Sample {
    SimTime t;
    std::uint64_t bytes;
  };

  void prune(SimTime now) {
    const SimTime cutoff = now > window_us_ ? now - window_us_ : 0;
    while (!samples_.empty() && samples_.front().t < cutoff) {
      samples_.pop_front();
    }
  }

  std::uint64_t window_us_;
  int buckets_;
  std::deque<Sample> samples_;
};

struct CycleRecord {
  int workers;
  double duration_s;
  double work;
};

// Director-side estimates built from recent cycle history.
struct DirectorState {
  std::deque<CycleRecord> history;
  int max_workers = 1;

  static double decayed_mean(const std::deque<CycleRecord>& h,
                             double (*get)(const CycleRecord&), double decay) {
    double est = 0.0;
    bool first = true;
    for (const CycleRecord& r : h) {  // oldest to newest
      const double v = get(r);
      if (first) {
        est = v;
        first = false;
      } else {
        est = decay * v + (1.0 - decay) * est;
      }
    }
    return est;
  }

  double work_estimate(const GcParams& p) const {
    if (history.empty()) return p.bootstrap_cycle_work;
    return decayed_mean(
        history, [](const CycleRecord& r) { return r.work; }, p.history_decay);
  }

  double throughput_estimate(const GcParams& p) const {
    if (history.empty()) return p.bootstrap_throughput;
    return decayed_mean(
        history,
        [](const CycleRecord& r) {
          return r.work / (std::max(r.duration_s, 1e-9) *
                           static_cast<double>(r.workers));
        },
        p.history_decay);
  }
};

// Predicted wall seconds for the next cycle with `workers` workers.
inline double predict_cycle_duration(const DirectorState& st, int workers,
                                     const GcParams& p) {
  const double work = st.work_estimate(p);
  const double tput = std::max(st.throughput_estimate(p), 1e-9);
  return work / (static_cast<double>(workers) * tput);
}

struct GcDecision {
  bool start = false;
  int workers = 0;
  bool pressing = false;
  double time_to_oom_s = 0.0;
};

// Start policy: skip when a single worker finishes well before OOM; else run
// the smallest worker count whose predicted duration plus margin fits; else
// request the maximum and flag GC as pressing.
inline GcDecision decide_gc_start(const DirectorState& st,
                                  std::uint64_t heap_capacity,
                                  std::uint64_t heap_used,
                                  double predicted_alloc_rate,
                                  const GcParams& p) {
  GcDecision d;
  const double free_bytes =
      static_cast<double>(heap_capacity - std::min(heap_used, heap_capacity));
  d.time_to_oom_s = predicted_alloc_rate > 0.0
                        ? free_bytes / predicted_alloc_rate
                        : 1e18;
  const double d1 = predict_cycle_duration(st, 1, p);
  if (d1 * (1.0 + p.headroom_factor) <= d.time_to_oom_s) {
    return d;  // no-start: plenty of time even single-threaded
  }
  for (int w = 1; w <= st.max_workers; ++w) {
    if (predict_cycle_duration(st, w, p) * (1.0 + p.start_margin) <=
        d.time_to_oom_s) {
      d.start = true;
      d.workers = w;
      return d;
    }
  }
  d.start = true;
  d.workers = st.max_workers;
  d.pressing = true;
  return d;
}

struct GcLogRow {
  std::uint64_t cycle_id;
  SimTime start_us;
  SimTime end_us;
  int workers;
  bool pressing;
  std::uint64_t reclaimed_bytes;
  std::uint64_t stalls_during;
};

struct MemoryRow {
  SimTime t;
  std::uint64_t used;
};

// Heap, allocation stalls, the shared GC lock, concurrent cycles with
// safepoints, and the director's start heuristic.
class GcEngine {
 public:
  // Fired when a GC worker takes or releases the shared lock.
  std::function<void(ThreadId, bool)> lock_hook;
  // Fired at safepoint begin/end.
  std::function<void(bool)> safepoint_hook;
  // Fired when the director has decided to start a cycle, before it starts.
  // Arguments: pressing flag, allocation stalls observed since the previous
  // start decision.
  std::function<void(bool, std::uint64_t)> start_decision_hook;
  // Completion callback for allocations that had to wait (stall or lock).
  std::function<void(ThreadId, std::uint64_t stall_us)> alloc_granted;
  // Fired after a cycle completes (reclaim done).
  std::function<void()> cycle_end_hook;

  GcEngine(EventQueue& q, Machine& m, const GcParams& p, Rng lock_rng)
      : q_(q),
        machine_(m),
        p_(p),
        tracker_(p.tracker_window_us, p.tracker_subintervals),
        lock_rng_(lock_rng) {
    state_.max_workers = max_gc_workers(m.cores());
    if (p_.live_fraction < 0.0 || p_.live_fraction > 1.0) {
      throw ConfigError("gc.live_fraction must be within [0,1]");
    }
  }

  // Creates the worker pool. Workers start parked with the given policy.
  void create_workers(SchedPolicy policy) {
    for (int i = 0; i < state_.max_workers; ++i) {
      const int idx = i;
      ThreadId tid = machine_.create_thread(
          ThreadKind::GcWorker, policy, [this, idx] { worker_burst_done(idx); });
      workers_.push_back(WorkerCtx{tid});
    }
  }

  const std::vector<ThreadId> worker_ids() const {
    std::vector<ThreadId> ids;
    for (const WorkerCtx& w : workers_) ids.push_back(w.tid);
    return ids;
  }

  std::uint64_t heap_used() const { return used_; }
  std::uint64_t heap_capacity() const { return p_.heap_capacity; }
  bool cycle_active() const { return cycle_active_; }
  bool cycle_pressing() const { return cycle_active_ && pressing_; }
  std::uint64_t stall_events() const { return stall_events_; }
  std::uint64_t cycles_completed() const { return cycles_completed_; }
  const std::vector<GcLogRow>& gc_log() const { return gc_log_; }
  const std::vector<MemoryRow>& memory_log() const { return memory_log_; }
  const DirectorState& director_state() const { return state_; }
  AllocationTracker& tracker() { return tracker_; }

  std::uint64_t take_stalls_since_decision() {
    std::uint64_t n = stalls_since_decision_;
    stalls_since_decision_ = 0;
    return n;
  }

  void sample_memory() { memory_log_.push_back({q_.now(), used_}); }

  // Mutator entry point. Returns true when the allocation completed
  // immediately; otherwise the mutator blocks and `alloc_granted` fires when
  // the allocation eventually succeeds.
  bool allocate(ThreadId tid, std::uint64_t bytes) {
    if (bytes > p_.heap_capacity) {
      throw ConfigError("allocation of " + std::to_string(bytes) +
                        " bytes exceeds heap capacity");
    }
    if (lock_held_) {
      lock_waiters_.push_back(Waiter{tid, bytes, q_.now(), 0});
      machine_.block(tid);
      return false;
    }
    if (used_ + bytes <= p_.heap_capacity) {
      commit_alloc(bytes);
      return true;
    }
    // Allocation stall: wait for a reclaim.
    ++stall_events_;
    ++stalls_since_decision_;
    if (cycle_active_) ++stalls_in_cycle_;
    stalled_.push_back(Waiter{tid, bytes, q_.now(), q_.now()});
    sample_memory();
    machine_.block(tid);
    return false;
  }

  // Director decision point; no-op while a cycle runs.
  void director_decide() {
    if (!p_.enabled || cycle_active_) return;
    const double rate = tracker_.empty_window(q_.now())
                            ? p_.bootstrap_alloc_rate
                            : tracker_.predict(q_.now(), p_.k_conservative);
    const GcDecision d =
        decide_gc_start(state_, p_.heap_capacity, used_, rate, p_);
    if (!d.start) return;
    if (start_decision_hook) {
      start_decision_hook(d.pressing, take_stalls_since_decision());
    }
    start_cycle(d.workers, d.pressing);
  }

  void start_cycle(int workers, bool pressing) {
    if (cycle_active_) {
      throw InvariantViolation("overlapping GC cycles");
    }
    if (pressing && workers != state_.max_workers) {
      throw InvariantViolation("pressing cycle must use max workers");
    }
    cycle_active_ = true;
    ++cycle_id_;
    pressing_ = pressing;
    cycle_workers_ = std::min(workers, state_.max_workers);
    cycle_start_ = q_.now();
    used_at_start_ = used_;
    stalls_in_cycle_ = 0;
    const double live_mb =
        p_.live_fraction * static_cast<double>(used_) / static_cast<double>(kMiB);
    total_work_ = std::max(1.0, p_.work_per_live_mb * live_mb + p_.work_base);
    completed_work_ = 0.0;
    finishing_ = false;

    // Per-cycle lock schedule: Poisson count, uniform positions in work
    // fraction space, deterministic per (seed, cycle id).
    if (p_.lock_points_override.empty()) {
      Rng r = lock_rng_.stream(cycle_id_);
      lock_points_.clear();
      const int locks = r.poisson(p_.lock_mean_per_cycle);
      for (int i = 0; i < locks; ++i) lock_points_.push_back(r.next_double());
    } else {
      lock_points_ = p_.lock_points_override;
    }
    std::sort(lock_points_.begin(), lock_points_.end());
    next_lock_ = 0;

    safepoints_ = p_.safepoints;
    std::sort(safepoints_.begin(), safepoints_.end(),
              [](const SafepointSpec& a, const SafepointSpec& b) {
                return a.at < b.at;
              });
    next_safepoint_ = 0;

    sample_memory();
    for (int i = 0; i < cycle_workers_; ++i) {
      workers_[static_cast<std::size_t>(i)].parked = false;
      issue_chunk(i);
    }
    fire_due_safepoints();
  }

  // Raw predictor access (also used by tests).
  double predicted_alloc_rate() const {
    return tracker_.empty_window(q_.now())
               ? p_.bootstrap_alloc_rate
               : tracker_.predict(q_.now(), p_.k_conservative);
  }

 private:
  struct WorkerCtx {
    ThreadId tid;
    double claim = 0.0;
    bool holding_lock = false;
    int pending_holds = 0;
    bool parked = true;
  };

  struct Waiter {
    ThreadId tid;
    std::uint64_t bytes;
    SimTime since;
    SimTime stall_since;  // nonzero when this wait counts as a stall
  };

  void commit_alloc(std::uint64_t bytes) {
    used_ += bytes;
    if (used_ > p_.heap_capacity) {
      throw InvariantViolation("heap used exceeds capacity");
    }
    tracker_.record(q_.now(), bytes);
    if (cycle_active_) alloc_during_ += bytes;
  }

  double outstanding_claims() const {
    double c = 0.0;
    for (const WorkerCtx& w : workers_) c += w.claim;
    return c;
  }

  void issue_chunk(int idx) {
    WorkerCtx& w = workers_[static_cast<std::size_t>(idx)];
    const double unclaimed =
        total_work_ - completed_work_ - outstanding_claims();
    const double chunk_units =
        static_cast<double>(p_.work_chunk_us) * p_.worker_throughput / 1e6;
    const double claim = std::min(chunk_units, unclaimed);
    if (claim <= 1e-9) {
      park(idx);
      maybe_finish();
      return;
    }
    w.claim = claim;
    const double cpu_us = claim * 1e6 / p_.worker_throughput;
    machine_.start_burst(w.tid,
                         static_cast<std::uint64_t>(std::ceil(cpu_us)));
  }

  void park(int idx) {
    WorkerCtx& w = workers_[static_cast<std::size_t>(idx)];
    if (w.parked) return;
    w.parked = true;
    machine_.block(w.tid);
  }

  void worker_burst_done(int idx) {
    WorkerCtx& w = workers_[static_cast<std::size_t>(idx)];
    if (w.holding_lock) {
      release_lock(idx);
    } else if (w.claim > 0.0) {
      completed_work_ += w.claim;
      w.claim = 0.0;
      fire_due_safepoints();
      fire_due_locks(idx);
    }
    if (w.holding_lock) return;  // a due lock hold was just started
    if (w.pending_holds > 0 && !lock_held_) {
      begin_hold(idx);
      return;
    }
    issue_chunk(idx);
  }

  void fire_due_safepoints() {
    const double frac = total_work_ > 0.0 ? completed_work_ / total_work_ : 1.0;
    while (next_safepoint_ < safepoints_.size() &&
           safepoints_[next_safepoint_].at <= frac &&
           safepoints_[next_safepoint_].at < 1.0) {
      const SafepointSpec sp = safepoints_[next_safepoint_++];
      begin_safepoint(sp.duration_us);
    }
  }

  void fire_due_locks(int idx) {
    const double frac = total_work_ > 0.0 ? completed_work_ / total_work_ : 1.0;
    WorkerCtx& w = workers_[static_cast<std::size_t>(idx)];
    while (next_lock_ < lock_points_.size() && lock_points_[next_lock_] <= frac) {
      ++next_lock_;
      ++w.pending_holds;
    }
    if (w.pending_holds > 0 && !lock_held_ && !w.holding_lock) begin_hold(idx);
  }

  void begin_hold(int idx) {
    WorkerCtx& w = workers_[static_cast<std::size_t>(idx)];
    --w.pending_holds;
    lock_held_ = true;
    w.holding_lock = true;
    if (lock_hook) lock_hook(w.tid, true);
    // The critical section is CPU time of the holder: a descheduled holder
    // keeps the lock, which is exactly the priority-inversion window.
    machine_.start_burst(w.tid, p_.lock_hold_us);
  }

  void release_lock(int idx) {
    WorkerCtx& w = workers_[static_cast<std::size_t>(idx)];
    w.holding_lock = false;
    lock_held_ = false;
    if (lock_hook) lock_hook(w.tid, false);
    std::vector<Waiter> waiters;
    waiters.swap(lock_waiters_);
    for (const Waiter& waiter : waiters) retry_allocation(waiter);
  }

  void begin_safepoint(std::uint64_t duration_us) {
    pending_safepoints_.push_back(duration_us);
    if (stw_active_) return;
    start_next_safepoint();
  }

  void start_next_safepoint() {
    stw_active_ = true;
    const std::uint64_t duration = pending_safepoints_.front();
    pending_safepoints_.erase(pending_safepoints_.begin());
    if (safepoint_hook) safepoint_hook(true);
    machine_.pause_mutators();
    q_.post_after(duration, [this] {
      machine_.resume_mutators();
      if (safepoint_hook) safepoint_hook(false);
      stw_active_ = false;
      if (!pending_safepoints_.empty()) {
        start_next_safepoint();
      } else if (finishing_) {
        finish_cycle();
      }
    });
  }

  void maybe_finish() {
    if (!cycle_active_ || finishing_) return;
    if (completed_work_ + 1e-6 < total_work_ || outstanding_claims() > 0.0) {
      return;
    }
    finishing_ = true;
    bool has_end_stw = false;
    for (std::size_t i = next_safepoint_; i < safepoints_.size(); ++i) {
      if (safepoints_[i].at >= 1.0) {
        begin_safepoint(safepoints_[i].duration_us);
        has_end_stw = true;
      }
    }
    next_safepoint_ = safepoints_.size();
    if (!has_end_stw && !stw_active_) finish_cycle();
  }

  void finish_cycle() {
    const std::uint64_t live = static_cast<std::uint64_t>(
        std::llround(p_.live_fraction * static_cast<double>(used_at_start_)));
    const std::uint64_t reclaimed = used_at_start_ - live;
    if (reclaimed > used_) {
      throw InvariantViolation("reclaim exceeds current heap usage");
    }
    used_ -= reclaimed;
    const double duration_s =
        static_cast<double>(q_.now() - cycle_start_) / 1e6;
    state_.history.push_back(
        CycleRecord{cycle_workers_, duration_s, total_work_});
    while (state_.history.size() > p_.history_limit) state_.history.pop_front();
    gc_log_.push_back(GcLogRow{cycle_id_, cycle_start_, q_.now(),
                               cycle_workers_, pressing_, reclaimed,
                               stalls_in_cycle_});
    cycle_active_ = false;
    finishing_ = false;
    alloc_during_ = 0;
    ++cycles_completed_;
    sample_memory();

    std::vector<Waiter> waiters;
    waiters.swap(stalled_);
    for (const Waiter& w : waiters) retry_allocation(w);
    if (cycle_end_hook) cycle_end_hook();
  }

  // Re-attempts an allocation for a waiter; keeps FIFO order on re-block.
  void retry_allocation(const Waiter& waiter) {
    if (lock_held_) {
      lock_waiters_.push_back(waiter);
      return;
    }
    if (used_ + waiter.bytes <= p_.heap_capacity) {
      commit_alloc(waiter.bytes);
      const std::uint64_t stall_us =
          waiter.stall_since > 0 ? q_.now() - waiter.stall_since : 0;
      machine_.wake(waiter.tid);
      if (alloc_granted) alloc_granted(waiter.tid, stall_us);
      return;
    }
    Waiter again = waiter;
    if (again.stall_since == 0) {
      // First time this wait hits heap exhaustion: count the stall.
      ++stall_events_;
      ++stalls_since_decision_;
      if (cycle_active_) ++stalls_in_cycle_;
      again.stall_since = q_.now();
    }
    stalled_.push_back(again);
  }

  EventQueue& q_;
  Machine& machine_;
  GcParams p_;
  AllocationTracker tracker_;
  Rng lock_rng_;
  DirectorState state_;
  std::vector<WorkerCtx> workers_;

  std::uint64_t used_ = 0;
  std::uint64_t used_at_start_ = 0;
  std::uint64_t alloc_during_ = 0;

  bool cycle_active_ = false;
  bool finishing_ = false;
  bool pressing_ = false;
  int cycle_workers_ = 0;
  std::uint64_t cycle_id_ = 0;
  SimTime cycle_start_ = 0;
  double total_work_ = 0.0;
  double completed_work_ = 0.0;

  std::vector<double> lock_points_;
  std::size_t next_lock_ = 0;
  std::vector<SafepointSpec> safepoints_;
  std::size_t next_safepoint_ = 0;

  bool lock_held_ = false;
  std::vector<Waiter> lock_waiters_;
  std::vector<Waiter> stalled_;
  bool stw_active_ = false;
  std::vector<std::uint64_t> pending_safepoints_;

  std::uint64_t stall_events_ = 0;
  std::uint64_t stalls_since_decision_ = 0;
  std::uint64_t stalls_in_cycle_ = 0;
  std::uint64_t cycles_completed_ = 0;
  std::vector<GcLogRow> gc_log_;
  std::vector<MemoryRow> memory_log_;
};

}  // namespace monk
