#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <vector>

#include "monk/common.hpp"
#include "monk/events.hpp"
#include "monk/gc.hpp"
#include "monk/policy.hpp"
#include "monk/rng.hpp"
#include "monk/scenario.hpp"
#include "monk/sched.hpp"
#include "monk/workload.hpp"

namespace monk {

struct WindowStats {
  SimTime begin_us = 0;
  SimTime end_us = 0;
  std::uint64_t arrivals = 0;
  std::uint64_t completed = 0;
  std::uint64_t stalls = 0;
  std::uint64_t max_latency_us = 0;
  std::uint64_t p99_latency_us = 0;
  double mean_latency_us = 0.0;
  double throughput = 0.0;  // completions per second
  double cpu_pct = 0.0;     // mean utilization over the window

  double duration_s() const {
    return static_cast<double>(end_us - begin_us) / 1e6;
  }
};

// One scenario instance: machine + workload + GC + policy wired together.
// Fully deterministic for a given (config, seed); instances are independent
// and may run on separate host threads.
class Simulation {
 public:
  Simulation(const ScenarioConfig& cfg, std::uint64_t seed)
      : cfg_(cfg),
        seed_(seed),
        machine_(q_, cfg.sched),
        gc_(q_, machine_, cfg.gc, Rng(seed).stream(3)),
        policy_(machine_, cfg.policy),
        arrivals_(cfg.arrival, Rng(seed).stream(1)),
        service_rng_(Rng(seed).stream(2)) {
    const int pool = cfg_.mutators();
    mutators_.resize(static_cast<std::size_t>(pool));
    for (int i = 0; i < pool; ++i) {
      const int idx = i;
      MutatorCtx& m = mutators_[static_cast<std::size_t>(i)];
      m.tid = machine_.create_thread(ThreadKind::Mutator, SchedPolicy::Normal,
                                     [this, idx] { mutator_burst_done(idx); });
      idle_mutators_.push_back(m.tid);
    }
    gc_.create_workers(cfg_.policy.gc_initial_policy());
    policy_.register_workers(gc_.worker_ids());

    director_ = machine_.create_thread(ThreadKind::Director, SchedPolicy::Normal,
                                       [this] { director_work(); });
    policy_.register_director(director_);
    reconciler_ = machine_.create_thread(
        ThreadKind::Reconciler, SchedPolicy::Normal, [this] { reconciler_work(); });

    gc_.lock_hook = [this](ThreadId t, bool acq) { policy_.on_lock(t, acq); };
    gc_.safepoint_hook = [this](bool begin) { policy_.on_safepoint(begin); };
    gc_.start_decision_hook = [this](bool pressing, std::uint64_t stalls) {
      policy_.on_gc_start_decision(pressing, stalls);
    };
    gc_.alloc_granted = [this](ThreadId t, std::uint64_t stall_us) {
      alloc_granted(t, stall_us);
    };
    gc_.cycle_end_hook = [this] { request_director_decision(); };

    if (cfg_.gc.enabled) {
      machine_.set_pending_burst(director_, 1);
      machine_.sleep_until(director_, cfg_.gc.director_period_us);
    }
    machine_.set_pending_burst(reconciler_, 1);
    machine_.sleep_until(reconciler_, cfg_.policy.reconcile_interval_us);
    post_next_arrival();
  }

  Machine& machine() { return machine_; }
  GcEngine& gc() { return gc_; }
  MonkPolicy& policy() { return policy_; }
  EventQueue& queue() { return q_; }
  SimTime now() const { return q_.now(); }
  std::uint64_t seed() const { return seed_; }
  const ScenarioConfig& config() const { return cfg_; }

  void retain_records(bool on) { retain_records_ = on; }
  const std::vector<RequestRecord>& records() const { return records_; }
  std::uint64_t arrivals_seen() const { return arrivals_seen_; }
  std::uint64_t completed() const { return completed_; }
  std::uint64_t max_latency_us() const { return max_latency_; }
  std::uint64_t queue_depth() const {
    return static_cast<std::uint64_t>(pending_.size());
  }

  void run_until(SimTime t) { q_.run_until(t); }
  void run() { run_until(cfg_.horizon_us); }

  // Feeds externally supplied arrivals instead of the stream; used by the
  // serve_requests-style oracle tests. Call before run().
  void inject_arrivals(const std::vector<SimTime>& times) {
    ++arrival_token_;  // disable the stream
    for (SimTime t : times) {
      q_.post_at(t, [this] { handle_arrival(sample_request()); });
    }
  }

  void set_rate(double r) {
    arrivals_.set_rate(r, q_.now());
    post_next_arrival();
  }

  void begin_window() {
    win_active_ = true;
    win_begin_ = q_.now();
    win_arrivals_ = 0;
    win_lat_.clear();
    win_stall0_ = gc_.stall_events();
    win_stat0_ = machine_.read_cpu_stat();
  }

  WindowStats end_window() {
    WindowStats w;
    w.begin_us = win_begin_;
    w.end_us = q_.now();
    w.arrivals = win_arrivals_;
    w.completed = win_lat_.size();
    w.stalls = gc_.stall_events() - win_stall0_;
    const CpuStat cur = machine_.read_cpu_stat();
    if (cur.sum() > win_stat0_.sum()) {
      w.cpu_pct = cpu_usage_from_stat(win_stat0_, cur);
    }
    if (!win_lat_.empty()) {
      std::vector<std::uint64_t> lat = win_lat_;
      std::sort(lat.begin(), lat.end());
      w.max_latency_us = lat.back();
      w.p99_latency_us = lat[(lat.size() - 1) * 99 / 100];
      double sum = 0.0;
      for (std::uint64_t v : lat) sum += static_cast<double>(v);
      w.mean_latency_us = sum / static_cast<double>(lat.size());
    }
    if (w.end_us > w.begin_us) {
      w.throughput = static_cast<double>(w.completed) / w.duration_s();
    }
    win_active_ = false;
    return w;
  }

 private:
  struct PendingRequest {
    SimTime arrival;
    std::uint64_t service_us;
    std::uint64_t alloc_bytes;
  };

  struct MutatorCtx {
    ThreadId tid = kNoThread;
    bool busy = false;
    SimTime arrival = 0;
    SimTime start = 0;
    std::uint64_t stall_us = 0;
    int chunks_left = 0;
    std::uint64_t chunk_service = 0;
    std::uint64_t chunk_bytes = 0;
    std::uint64_t first_chunk_service = 0;
    std::uint64_t first_chunk_bytes = 0;
  };

  PendingRequest sample_request() {
    PendingRequest r;
    r.arrival = q_.now();
    r.service_us = sample_service(cfg_.request, service_rng_);
    r.alloc_bytes = cfg_.request.alloc_bytes;
    return r;
  }

  void post_next_arrival() {
    const std::uint64_t token = ++arrival_token_;
    const SimTime t = arrivals_.next();
    if (t == kNever) return;
    q_.post_at(t, [this, token] {
      if (token != arrival_token_) return;
      handle_arrival(sample_request());
      post_next_arrival();
    });
  }

  void handle_arrival(const PendingRequest& r) {
    ++arrivals_seen_;
    if (win_active_) ++win_arrivals_;
    pending_.push_back(r);
    if (!idle_mutators_.empty()) {
      auto it = std::min_element(idle_mutators_.begin(), idle_mutators_.end());
      const ThreadId tid = *it;
      idle_mutators_.erase(it);
      begin_request(static_cast<int>(tid));
    }
  }

  // FIFO: the first free mutator takes the oldest queued request.
  void begin_request(int idx) {
    MutatorCtx& m = mutators_[static_cast<std::size_t>(idx)];
    const PendingRequest r = pending_.front();
    pending_.pop_front();
    m.busy = true;
    m.arrival = r.arrival;
    m.start = q_.now();
    m.stall_us = 0;
    const int k = std::max(1, cfg_.request.spread_chunks);
    m.chunks_left = k;
    m.chunk_service = r.service_us / static_cast<std::uint64_t>(k);
    m.chunk_bytes = r.alloc_bytes / static_cast<std::uint64_t>(k);
    // Remainders land on the first chunk so totals stay exact.
    m.first_chunk_service =
        r.service_us - m.chunk_service * static_cast<std::uint64_t>(k - 1);
    m.first_chunk_bytes =
        r.alloc_bytes - m.chunk_bytes * static_cast<std::uint64_t>(k - 1);
    next_chunk(idx);
  }

  void next_chunk(int idx) {
    MutatorCtx& m = mutators_[static_cast<std::size_t>(idx)];
    if (m.chunks_left == 0) {
      complete_request(idx);
      return;
    }
    const bool first = m.chunks_left == cfg_.request.spread_chunks;
    const std::uint64_t bytes = first ? m.first_chunk_bytes : m.chunk_bytes;
    --m.chunks_left;
    if (bytes > 0) {
      if (!gc_.allocate(m.tid, bytes)) return;  // resumes via alloc_granted
    }
    start_service_chunk(idx);
  }

  void start_service_chunk(int idx) {
    MutatorCtx& m = mutators_[static_cast<std::size_t>(idx)];
    const bool first = m.chunks_left == cfg_.request.spread_chunks - 1;
    const std::uint64_t service = first ? m.first_chunk_service : m.chunk_service;
    machine_.start_burst(m.tid, std::max<std::uint64_t>(1, service));
  }

  void alloc_granted(ThreadId tid, std::uint64_t stall_us) {
    const int idx = static_cast<int>(tid);
    MutatorCtx& m = mutators_[static_cast<std::size_t>(idx)];
    m.stall_us += stall_us;
    start_service_chunk(idx);
  }

  void mutator_burst_done(int idx) {
    next_chunk(idx);
  }

  void complete_request(int idx) {
    MutatorCtx& m = mutators_[static_cast<std::size_t>(idx)];
    m.busy = false;
    const SimTime done = q_.now();
    const std::uint64_t latency = done - m.arrival;
    ++completed_;
    max_latency_ = std::max(max_latency_, latency);
    if (win_active_ && done >= win_begin_) win_lat_.push_back(latency);
    if (retain_records_) {
      records_.push_back(RequestRecord{m.arrival, m.start, done, m.stall_us});
    }
    if (!pending_.empty()) {
      begin_request(idx);
    } else {
      idle_mutators_.push_back(m.tid);
    }
  }

  void director_work() {
    policy_.on_director_tick(machine_.read_cpu_stat());
    gc_.director_decide();
    gc_.sample_memory();
    machine_.set_pending_burst(director_, 1);
    machine_.sleep_until(director_, q_.now() + cfg_.gc.director_period_us);
  }

  void request_director_decision() {
    if (!cfg_.gc.enabled) return;
    if (machine_.thread(director_).state == ThreadState::Sleeping) {
      machine_.start_burst(director_, 1);
    }
  }

  void reconciler_work() {
    policy_.reconcile();
    machine_.set_pending_burst(reconciler_, 1);
    machine_.sleep_until(reconciler_,
                         q_.now() + cfg_.policy.reconcile_interval_us);
  }

  ScenarioConfig cfg_;
  std::uint64_t seed_;
  EventQueue q_;
  Machine machine_;
  GcEngine gc_;
  MonkPolicy policy_;
  ArrivalStream arrivals_;
  Rng service_rng_;

  std::vector<MutatorCtx> mutators_;
  std::vector<ThreadId> idle_mutators_;
  std::deque<PendingRequest> pending_;
  ThreadId director_ = kNoThread;
  ThreadId reconciler_ = kNoThread;
  std::uint64_t arrival_token_ = 0;

  bool retain_records_ = false;
  std::vector<RequestRecord> records_;
  std::uint64_t arrivals_seen_ = 0;
  std::uint64_t completed_ = 0;
  std::uint64_t max_latency_ = 0;

  bool win_active_ = false;
  SimTime win_begin_ = 0;
  std::uint64_t win_arrivals_ = 0;
  std::vector<std::uint64_t> win_lat_;
  std::uint64_t win_stall0_ = 0;
  CpuStat win_stat0_;
};

}  // namespace monk
