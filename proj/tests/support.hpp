#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "monk/events.hpp"
#include "monk/scenario.hpp"
#include "monk/sched.hpp"

namespace monk::test {

// A bare machine plus event queue for scheduler-level tests.
struct Rig {
  EventQueue q;
  Machine m;

  explicit Rig(int cores, std::uint64_t quantum_us = 1000)
      : m(q, SchedParams{cores, quantum_us, true, true}) {}

  // A thread that burns CPU forever (re-arms a large burst on completion).
  ThreadId spinner(ThreadKind kind = ThreadKind::Mutator,
                   SchedPolicy pol = SchedPolicy::Normal) {
    hooks.push_back(nullptr);
    const std::size_t slot = hooks.size() - 1;
    const ThreadId id = m.create_thread(kind, pol, [this, slot] {
      if (hooks[slot]) hooks[slot]();
    });
    hooks[slot] = [this, id] { m.start_burst(id, 1u << 30); };
    m.start_burst(id, 1u << 30);
    return id;
  }

  // A thread whose burst-done handler is supplied by the test.
  ThreadId scripted(std::function<void(ThreadId)> on_done,
                    ThreadKind kind = ThreadKind::Mutator,
                    SchedPolicy pol = SchedPolicy::Normal) {
    hooks.push_back(nullptr);
    const std::size_t slot = hooks.size() - 1;
    const ThreadId id = m.create_thread(kind, pol, [this, slot] {
      if (hooks[slot]) hooks[slot]();
    });
    hooks[slot] = [on_done, id] { on_done(id); };
    return id;
  }

  std::vector<std::function<void()>> hooks;
};

// Small, fast scenario used across integration tests: 4 cores, light load.
inline ScenarioConfig small_scenario() {
  ScenarioConfig c;
  c.sched.cores = 4;
  c.pool_size = 4;
  c.request.service_micros = 1000;
  c.request.service_jitter = 0.2;
  c.request.alloc_bytes = 32 * 1024;
  c.arrival.kind = ArrivalKind::Poisson;
  c.arrival.rate = 1000.0;
  c.gc.heap_capacity = 64 * kMiB;
  c.gc.work_per_live_mb = 5000.0;
  c.gc.work_base = 50000.0;
  c.horizon_us = 3000000;
  c.measure.settle_us = 500000;
  c.measure.window_us = 1500000;
  c.bench.warmup_settle_us = 300000;
  c.bench.warmup_window_us = 1000000;
  c.bench.steps = 8;
  return c;
}

}  // namespace monk::test
