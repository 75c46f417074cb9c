#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "monk/common.hpp"
#include "monk/events.hpp"

namespace monk {

// NORMAL is the default time-sharing class; IDLE asks to be scheduled on
// idle cores only. These model SCHED_OTHER / SCHED_IDLE, both at the same
// (zero) priority within their class.
enum class SchedPolicy : std::uint8_t { Normal, Idle };

enum class ThreadKind : std::uint8_t { Mutator, GcWorker, Director, Reconciler };

enum class ThreadState : std::uint8_t { Runnable, Running, Blocked, Sleeping };

inline const char* to_string(SchedPolicy p) {
  return p == SchedPolicy::Normal ? "NORMAL" : "IDLE";
}

inline bool is_gc(ThreadKind k) {
  return k == ThreadKind::GcWorker || k == ThreadKind::Director;
}

// Cumulative core-time split in the style of /proc/stat. `system` is always
// zero in this model but is carried so the utilization formula chain reads
// off all four fields. Invariant: user+nice+system+idle == cores * elapsed.
struct CpuStat {
  std::uint64_t user = 0;    // NORMAL-policy busy micros
  std::uint64_t nice = 0;    // IDLE-policy busy micros
  std::uint64_t system = 0;  // no kernel work modeled
  std::uint64_t idle = 0;    // unoccupied core micros

  std::uint64_t sum() const { return user + nice + system + idle; }
};

struct SimThread {
  ThreadId id = kNoThread;
  ThreadKind kind = ThreadKind::Mutator;
  SchedPolicy policy = SchedPolicy::Normal;
  ThreadState state = ThreadState::Sleeping;
  std::uint64_t vruntime = 0;     // accumulated CPU micros, never decreases
  std::uint64_t cpu_micros = 0;   // lifetime CPU consumed
  std::uint64_t burst_remaining = 0;  // CPU micros until on_burst_done fires
  int core = -1;
  bool paused = false;            // held in a safepoint (mutators only)
  std::uint64_t wake_seq = 0;     // cancels stale timed wakes
  std::function<void()> on_burst_done;
};

struct CoreState {
  int id = 0;
  ThreadId occupant = kNoThread;
  SimTime quantum_end = 0;
  SimTime last_account = 0;       // accounting watermark
  std::uint64_t token = 0;        // invalidates superseded core events
};

struct TraceRow {
  SimTime t;
  std::string event;
  ThreadId thread;
  int core;
  std::string detail;
};

struct SchedParams {
  int cores = 8;
  std::uint64_t quantum_us = 1000;
  // When true an IDLE occupant is preempted the instant a NORMAL thread
  // becomes runnable; when false it keeps the core until quantum end.
  bool idle_preempt_immediate = true;
  bool validate = true;
};

// Deterministic model of N identical cores under min-vruntime time-sharing
// with a strict NORMAL-over-IDLE class split. Single-threaded: all mutation
// happens inside the owning event loop.
class Machine {
 public:
  Machine(EventQueue& q, const SchedParams& p) : q_(q), p_(p) {
    cores_.resize(static_cast<std::size_t>(p.cores));
    for (int i = 0; i < p.cores; ++i) cores_[static_cast<std::size_t>(i)].id = i;
  }

  ThreadId create_thread(ThreadKind kind, SchedPolicy policy,
                         std::function<void()> on_burst_done) {
    SimThread t;
    t.id = static_cast<ThreadId>(threads_.size());
    t.kind = kind;
    t.policy = policy;
    t.state = ThreadState::Sleeping;
    t.on_burst_done = std::move(on_burst_done);
    threads_.push_back(std::move(t));
    return threads_.back().id;
  }

  SimTime now() const { return q_.now(); }
  int cores() const { return p_.cores; }
  std::uint64_t quantum() const { return p_.quantum_us; }
  const SimThread& thread(ThreadId id) const { return at(id); }
  const std::vector<SimThread>& threads() const { return threads_; }
  const std::vector<CoreState>& core_states() const { return cores_; }
  std::uint64_t priority_violations() const { return priority_violations_; }

  void set_trace(std::vector<TraceRow>* sink) { trace_ = sink; }

  // Changes a thread's scheduling class. The preemption check runs at the
  // current instant: an IDLE-demoted occupant yields immediately if a NORMAL
  // thread waits, and a NORMAL-promoted thread can displace an IDLE occupant.
  void set_policy(ThreadId id, SchedPolicy policy) {
    if (id < 0 || static_cast<std::size_t>(id) >= threads_.size()) {
      throw ConfigError("set_policy: unknown thread id " + std::to_string(id));
    }
    SimThread& t = threads_[static_cast<std::size_t>(id)];
    if (t.policy == policy) return;
    sync_thread(t);
    t.policy = policy;
    trace("policy", id, t.core, to_string(policy));
    schedule();
  }

  // Test aid: applies a policy without informing anyone. Used to inject
  // policy/counter mismatches that the reconciler must repair.
  void force_policy(ThreadId id, SchedPolicy policy) {
    at(id).policy = policy;
    schedule();
  }

  // Gives the thread `micros` of CPU to consume; on_burst_done fires once it
  // has been scheduled for that long. Wakes the thread if it was parked.
  void start_burst(ThreadId id, std::uint64_t micros) {
    SimThread& t = at(id);
    if (t.state == ThreadState::Running) {
      throw InvariantViolation("start_burst on a running thread");
    }
    if (micros == 0) micros = 1;
    t.burst_remaining = micros;
    make_runnable(t);
    schedule();
  }

  // Arms CPU for a parked thread without waking it; the next wake (timer or
  // explicit) runs this burst.
  void set_pending_burst(ThreadId id, std::uint64_t micros) {
    SimThread& t = at(id);
    if (t.state == ThreadState::Running) {
      throw InvariantViolation("set_pending_burst on a running thread");
    }
    t.burst_remaining = micros == 0 ? 1 : micros;
  }

  // Blocked/sleeping -> runnable. The thread must already have CPU to burn.
  void wake(ThreadId id) {
    SimThread& t = at(id);
    ++t.wake_seq;
    if (t.state != ThreadState::Blocked && t.state != ThreadState::Sleeping) return;
    make_runnable(t);
    schedule();
  }

  // Running/runnable -> blocked (lock wait, allocation stall). Burst state
  // is preserved and resumes where it left off on wake.
  void block(ThreadId id) {
    SimThread& t = at(id);
    ++t.wake_seq;
    if (t.state == ThreadState::Running) detach(t);
    t.state = ThreadState::Blocked;
    trace("block", id, -1, "");
    schedule();
  }

  void sleep_until(ThreadId id, SimTime when) {
    SimThread& t = at(id);
    if (t.state == ThreadState::Running) detach(t);
    t.state = ThreadState::Sleeping;
    const std::uint64_t seq = ++t.wake_seq;
    q_.post_at(when, [this, id, seq] {
      SimThread& th = at(id);
      if (th.wake_seq != seq || th.state != ThreadState::Sleeping) return;
      make_runnable(th);
      schedule();
    });
  }

  // Stop-the-world support: mutators already at their next event boundary
  // are held immediately; running ones are descheduled with burst preserved.
  void pause_mutators() {
    for (SimThread& t : threads_) {
      if (t.kind != ThreadKind::Mutator) continue;
      t.paused = true;
      if (t.state == ThreadState::Running) {
        detach(t);
        t.state = ThreadState::Runnable;
      }
    }
    schedule();
  }

  void resume_mutators() {
    for (SimThread& t : threads_) {
      if (t.kind == ThreadKind::Mutator) t.paused = false;
    }
    schedule();
  }

  std::uint64_t cpu_time(ThreadId id) {
    SimThread& t = at(id);
    sync_thread(t);
    return t.cpu_micros;
  }

  CpuStat read_cpu_stat() {
    sync_all();
    CpuStat s = stat_;
    const std::uint64_t expect =
        static_cast<std::uint64_t>(p_.cores) * q_.now();
    if (p_.validate && s.sum() != expect) {
      throw InvariantViolation("cpu accounting does not close: sum=" +
                               std::to_string(s.sum()) + " expected " +
                               std::to_string(expect));
    }
    return s;
  }

  // Brings accounting up to the current instant without dispatching.
  void sync_now() { sync_all(); }

 private:
  SimThread& at(ThreadId id) { return threads_[static_cast<std::size_t>(id)]; }
  const SimThread& at(ThreadId id) const {
    return threads_[static_cast<std::size_t>(id)];
  }

  void trace(const char* ev, ThreadId tid, int core, std::string detail) {
    if (trace_ == nullptr) return;
    trace_->push_back(TraceRow{q_.now(), ev, tid, core, std::move(detail)});
  }

  void make_runnable(SimThread& t) {
    t.state = ThreadState::Runnable;
    // A long sleeper returns near the class floor rather than with an ancient
    // vruntime that would let it monopolize cores until it caught up.
    const std::uint64_t floor = floor_[class_of(t.policy)];
    const std::uint64_t entry =
        floor > p_.quantum_us ? floor - p_.quantum_us : 0;
    t.vruntime = std::max(t.vruntime, entry);
    trace("wake", t.id, -1, "");
  }

  static std::size_t class_of(SchedPolicy p) {
    return p == SchedPolicy::Normal ? 0 : 1;
  }

  void sync_core(CoreState& c) {
    const SimTime now = q_.now();
    if (now <= c.last_account) return;
    const std::uint64_t ran = now - c.last_account;
    if (c.occupant == kNoThread) {
      stat_.idle += ran;
    } else {
      SimThread& t = at(c.occupant);
      t.vruntime += ran;
      t.cpu_micros += ran;
      t.burst_remaining = t.burst_remaining > ran ? t.burst_remaining - ran : 0;
      if (t.policy == SchedPolicy::Normal) {
        stat_.user += ran;
      } else {
        stat_.nice += ran;
      }
    }
    c.last_account = now;
  }

  void sync_thread(SimThread& t) {
    if (t.state == ThreadState::Running && t.core >= 0) {
      sync_core(cores_[static_cast<std::size_t>(t.core)]);
    }
  }

  void sync_all() {
    for (CoreState& c : cores_) sync_core(c);
  }

  void detach(SimThread& t) {
    CoreState& c = cores_[static_cast<std::size_t>(t.core)];
    sync_core(c);
    trace("off", t.id, c.id, to_string(t.policy));
    c.occupant = kNoThread;
    ++c.token;
    t.core = -1;
    t.state = ThreadState::Runnable;
  }

  void place(SimThread& t, CoreState& c) {
    sync_core(c);
    c.occupant = t.id;
    c.quantum_end = q_.now() + p_.quantum_us;
    ++c.token;
    t.core = c.id;
    t.state = ThreadState::Running;
    std::size_t cls = class_of(t.policy);
    floor_[cls] = std::max(floor_[cls], t.vruntime);
    trace("dispatch", t.id, c.id, to_string(t.policy));
    arm_core_event(c);
  }

  void arm_core_event(CoreState& c) {
    const SimThread& t = at(c.occupant);
    const SimTime burst_end = q_.now() + t.burst_remaining;
    const SimTime next = std::min(c.quantum_end, burst_end);
    const std::uint64_t token = c.token;
    const int core_id = c.id;
    q_.post_at(next, [this, core_id, token] { on_core_event(core_id, token); });
  }

  void on_core_event(int core_id, std::uint64_t token) {
    CoreState& c = cores_[static_cast<std::size_t>(core_id)];
    if (c.token != token || c.occupant == kNoThread) return;
    sync_core(c);
    SimThread& t = at(c.occupant);
    if (t.burst_remaining == 0) {
      detach(t);
      t.state = ThreadState::Sleeping;  // default unless the handler re-arms
      trace("burst_done", t.id, core_id, "");
      if (t.on_burst_done) t.on_burst_done();
      schedule();
      return;
    }
    if (q_.now() >= c.quantum_end) {
      detach(t);
      trace("quantum", t.id, core_id, "");
      schedule();
      return;
    }
    arm_core_event(c);  // policy change moved the horizon; re-arm
  }

  // Full dispatch pass. Running NORMAL threads keep their core until quantum
  // end or until they block; IDLE occupants may be displaced immediately.
  // Free cores are filled lowest-index first with the smallest-vruntime
  // runnable thread of the preferred class (ties by thread id).
  void schedule() {
    if (in_schedule_) {
      schedule_again_ = true;
      return;
    }
    in_schedule_ = true;
    do {
      schedule_again_ = false;
      schedule_pass();
    } while (schedule_again_);
    in_schedule_ = false;
    if (p_.validate && p_.idle_preempt_immediate) validate_priority();
  }

  void schedule_pass() {
    std::vector<ThreadId> normal;
    std::vector<ThreadId> idle;
    for (const SimThread& t : threads_) {
      if (t.state != ThreadState::Runnable || t.paused) continue;
      (t.policy == SchedPolicy::Normal ? normal : idle).push_back(t.id);
    }
    auto by_vruntime = [this](ThreadId a, ThreadId b) {
      const SimThread& ta = at(a);
      const SimThread& tb = at(b);
      if (ta.vruntime != tb.vruntime) return ta.vruntime < tb.vruntime;
      return a < b;
    };
    std::sort(normal.begin(), normal.end(), by_vruntime);
    std::sort(idle.begin(), idle.end(), by_vruntime);

    std::vector<int> free;
    for (CoreState& c : cores_) {
      if (c.occupant == kNoThread) free.push_back(c.id);
    }
    if (p_.idle_preempt_immediate && normal.size() > free.size()) {
      std::size_t needed = normal.size() - free.size();
      for (CoreState& c : cores_) {
        if (needed == 0) break;
        if (c.occupant == kNoThread) continue;
        SimThread& occ = at(c.occupant);
        if (occ.policy != SchedPolicy::Idle) continue;
        detach(occ);
        trace("preempt", occ.id, c.id, "idle_yields");
        free.push_back(c.id);
        --needed;
      }
      std::sort(free.begin(), free.end());
    }

    std::size_t fi = 0;
    for (ThreadId id : normal) {
      if (fi >= free.size()) break;
      place(at(id), cores_[static_cast<std::size_t>(free[fi++])]);
    }
    for (ThreadId id : idle) {
      if (fi >= free.size()) break;
      SimThread& t = at(id);
      if (t.state != ThreadState::Runnable) continue;  // displaced this pass
      place(t, cores_[static_cast<std::size_t>(free[fi++])]);
    }
  }

  void validate_priority() {
    bool waiting_normal = false;
    for (const SimThread& t : threads_) {
      if (t.state == ThreadState::Runnable && !t.paused &&
          t.policy == SchedPolicy::Normal) {
        waiting_normal = true;
        break;
      }
    }
    if (!waiting_normal) return;
    for (const CoreState& c : cores_) {
      if (c.occupant != kNoThread &&
          at(c.occupant).policy == SchedPolicy::Idle) {
        ++priority_violations_;
      }
    }
  }

  EventQueue& q_;
  SchedParams p_;
  std::vector<SimThread> threads_;
  std::vector<CoreState> cores_;
  CpuStat stat_;
  std::uint64_t floor_[2] = {0, 0};
  std::vector<TraceRow>* trace_ = nullptr;
  std::uint64_t priority_violations_ = 0;
  bool in_schedule_ = false;
  bool schedule_again_ = false;
};

}  // namespace monk
