#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "monk/rng.hpp"
#include "monk/sched.hpp"
#include "support.hpp"

using namespace monk;
using test::Rig;

TEST_CASE("dispatch places a single runnable thread on the first core",
          "[sched]") {
  Rig rig(2);
  const ThreadId a = rig.spinner();
  REQUIRE(rig.m.core_states()[0].occupant == a);
  REQUIRE(rig.m.core_states()[1].occupant == kNoThread);
  REQUIRE(rig.m.thread(a).state == ThreadState::Running);
}

TEST_CASE("idle-policy threads run on idle cores only", "[sched]") {
  Rig rig(1);
  const ThreadId normal = rig.spinner(ThreadKind::Mutator, SchedPolicy::Normal);
  const ThreadId idle = rig.spinner(ThreadKind::GcWorker, SchedPolicy::Idle);
  REQUIRE(rig.m.core_states()[0].occupant == normal);
  REQUIRE(rig.m.thread(idle).state == ThreadState::Runnable);
  rig.q.run_until(50000);
  // The NORMAL spinner never yields, so the IDLE thread never accumulates CPU.
  REQUIRE(rig.m.cpu_time(idle) == 0);
  REQUIRE(rig.m.priority_violations() == 0);
}

TEST_CASE("three continuously runnable threads share one core fairly",
          "[sched]") {
  Rig rig(1);
  std::vector<ThreadId> ids;
  for (int i = 0; i < 3; ++i) ids.push_back(rig.spinner());
  const std::uint64_t quantum = rig.m.quantum();
  rig.q.run_until(30 * quantum);

  // Reference round-robin: min-vruntime selection, ties by id, one quantum
  // per slot, over the identical event sequence.
  struct Ref {
    std::uint64_t vr = 0;
    std::uint64_t cpu = 0;
  };
  std::vector<Ref> ref(3);
  for (int slot = 0; slot < 30; ++slot) {
    std::size_t pick = 0;
    for (std::size_t i = 1; i < ref.size(); ++i) {
      if (ref[i].vr < ref[pick].vr) pick = i;
    }
    ref[pick].vr += quantum;
    ref[pick].cpu += quantum;
  }
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const std::uint64_t got = rig.m.cpu_time(ids[i]);
    REQUIRE(got >= ref[i].cpu - quantum);
    REQUIRE(got <= ref[i].cpu + quantum);
    // 10 quanta +-1 each
    REQUIRE(got >= 9 * quantum);
    REQUIRE(got <= 11 * quantum);
  }
}

TEST_CASE("demoting a running thread yields immediately to a NORMAL waiter",
          "[sched]") {
  Rig rig(1);
  const ThreadId a = rig.spinner();
  const ThreadId b = rig.spinner();
  REQUIRE(rig.m.core_states()[0].occupant == a);
  REQUIRE(rig.m.thread(b).state == ThreadState::Runnable);
  rig.q.run_until(100);
  rig.m.set_policy(a, SchedPolicy::Idle);
  REQUIRE(rig.m.core_states()[0].occupant == b);
  REQUIRE(rig.m.thread(a).state == ThreadState::Runnable);
}

TEST_CASE("promoting an idle thread waits for the next quantum expiry",
          "[sched]") {
  Rig rig(1);
  const ThreadId a = rig.spinner();
  const ThreadId c = rig.spinner(ThreadKind::GcWorker, SchedPolicy::Idle);
  rig.q.run_until(100);
  rig.m.set_policy(c, SchedPolicy::Normal);
  // No mid-quantum preemption between NORMAL threads.
  REQUIRE(rig.m.core_states()[0].occupant == a);
  rig.q.run_until(rig.m.quantum());
  REQUIRE(rig.m.core_states()[0].occupant == c);
}

TEST_CASE("set_policy rejects unknown thread ids", "[sched]") {
  Rig rig(1);
  REQUIRE_THROWS_AS(rig.m.set_policy(42, SchedPolicy::Idle), ConfigError);
}

TEST_CASE("cpu stat is all zero at time zero and all idle with no threads",
          "[sched]") {
  Rig rig(4);
  const CpuStat at0 = rig.m.read_cpu_stat();
  REQUIRE(at0.user == 0);
  REQUIRE(at0.nice == 0);
  REQUIRE(at0.system == 0);
  REQUIRE(at0.idle == 0);
  rig.q.run_until(1000000);
  const CpuStat s = rig.m.read_cpu_stat();
  REQUIRE(s.idle == 4000000);
  REQUIRE(s.user == 0);
  REQUIRE(s.nice == 0);
}

namespace {

// Recomputes per-class busy time from dispatch/off trace pairs.
CpuStat replay_trace(const std::vector<TraceRow>& rows, int cores,
                     SimTime end) {
  struct Open {
    SimTime since = 0;
    bool idle_class = false;
    bool occupied = false;
  };
  std::vector<Open> open(static_cast<std::size_t>(cores));
  CpuStat s;
  SimTime idle_accounted = 0;
  std::vector<SimTime> free_since(static_cast<std::size_t>(cores), 0);
  for (const TraceRow& r : rows) {
    if (r.core < 0) continue;
    Open& o = open[static_cast<std::size_t>(r.core)];
    if (r.event == "dispatch") {
      s.idle += r.t - free_since[static_cast<std::size_t>(r.core)];
      o.since = r.t;
      o.idle_class = r.detail == "IDLE";
      o.occupied = true;
    } else if (r.event == "off") {
      (o.idle_class ? s.nice : s.user) += r.t - o.since;
      o.occupied = false;
      free_since[static_cast<std::size_t>(r.core)] = r.t;
    }
  }
  for (int c = 0; c < cores; ++c) {
    const Open& o = open[static_cast<std::size_t>(c)];
    if (o.occupied) {
      (o.idle_class ? s.nice : s.user) += end - o.since;
    } else {
      s.idle += end - free_since[static_cast<std::size_t>(c)];
    }
  }
  (void)idle_accounted;
  return s;
}

}  // namespace

TEST_CASE("cpu stat equals independent per-core interval sums from the trace",
          "[sched]") {
  Rig rig(2);
  std::vector<TraceRow> trace;
  rig.m.set_trace(&trace);

  // A mixed trace: a NORMAL worker that sleeps between bursts and an IDLE
  // background thread that spins.
  Rng rng(7);
  const ThreadId idle = rig.spinner(ThreadKind::GcWorker, SchedPolicy::Idle);
  ThreadId burster = rig.scripted(
      [&](ThreadId id) {
        rig.m.sleep_until(id, rig.q.now() + 200 + rng.below(500));
      },
      ThreadKind::Mutator, SchedPolicy::Normal);
  (void)idle;
  // Periodic re-arm of the burster.
  std::function<void(SimTime)> pump = [&](SimTime t) {
    if (t > 300000) return;
    rig.q.post_at(t, [&, t] {
      if (rig.m.thread(burster).state == ThreadState::Sleeping) {
        rig.m.start_burst(burster, 100 + rng.below(900));
      }
      pump(t + 700);
    });
  };
  pump(500);
  rig.q.run_until(320000);

  const CpuStat got = rig.m.read_cpu_stat();
  const CpuStat replayed = replay_trace(trace, 2, 320000);
  REQUIRE(got.user == replayed.user);
  REQUIRE(got.nice == replayed.nice);
  REQUIRE(got.idle == replayed.idle);
  REQUIRE(got.sum() == 2 * 320000);
}

namespace {

// Randomized policy churn; returns the machine's violation count.
std::uint64_t run_policy_fuzz(std::uint64_t seed, std::vector<TraceRow>* trace) {
  Rig rig(4);
  if (trace != nullptr) rig.m.set_trace(trace);
  Rng rng(seed);
  std::vector<ThreadId> ids;
  for (int i = 0; i < 6; ++i) ids.push_back(rig.spinner());
  for (int i = 0; i < 3; ++i) {
    ids.push_back(rig.spinner(ThreadKind::GcWorker, SchedPolicy::Idle));
  }
  SimTime t = 0;
  for (int i = 0; i < 1000; ++i) {
    t += 13 + rng.below(700);
    const ThreadId victim = ids[rng.below(ids.size())];
    const bool to_idle = rng.below(2) == 0;
    rig.q.post_at(t, [&, victim, to_idle] {
      rig.m.set_policy(victim,
                       to_idle ? SchedPolicy::Idle : SchedPolicy::Normal);
    });
  }
  rig.q.run_until(t + 10000);
  rig.m.read_cpu_stat();  // conservation check
  return rig.m.priority_violations();
}

}  // namespace

TEST_CASE("a thousand random policy flips never violate dispatch priority",
          "[sched]") {
  REQUIRE(run_policy_fuzz(11, nullptr) == 0);
}

TEST_CASE("identical seeds produce identical event traces", "[sched]") {
  std::vector<TraceRow> a, b;
  run_policy_fuzz(99, &a);
  run_policy_fuzz(99, &b);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    REQUIRE(a[i].t == b[i].t);
    REQUIRE(a[i].event == b[i].event);
    REQUIRE(a[i].thread == b[i].thread);
    REQUIRE(a[i].core == b[i].core);
  }
}

TEST_CASE("work conservation holds under mixed classes", "[sched]") {
  Rig rig(2);
  rig.spinner(ThreadKind::Mutator, SchedPolicy::Normal);
  rig.spinner(ThreadKind::GcWorker, SchedPolicy::Idle);
  rig.spinner(ThreadKind::GcWorker, SchedPolicy::Idle);
  rig.q.run_until(100000);
  const CpuStat s = rig.m.read_cpu_stat();
  // One core busy with NORMAL, the other shared by the two IDLE threads.
  REQUIRE(s.user == 100000);
  REQUIRE(s.nice == 100000);
  REQUIRE(s.idle == 0);
  REQUIRE(rig.m.priority_violations() == 0);
}
