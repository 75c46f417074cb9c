#include <algorithm>
#include <cmath>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "monk/simulation.hpp"
#include "monk/workload.hpp"
#include "support.hpp"

using namespace monk;

TEST_CASE("deterministic arrivals are evenly spaced", "[workload]") {
  ArrivalProcess p;
  p.kind = ArrivalKind::Deterministic;
  p.rate = 1000.0;
  const auto arr = generate_arrivals(p, 1000000, 42);
  REQUIRE(arr.size() == 1000);
  for (std::size_t i = 1; i < arr.size(); ++i) {
    REQUIRE(arr[i] - arr[i - 1] == 1000);
  }
}

TEST_CASE("poisson arrival counts stay within three sigma", "[workload]") {
  ArrivalProcess p;
  p.kind = ArrivalKind::Poisson;
  p.rate = 1000.0;
  const auto arr = generate_arrivals(p, 100000000, 7);  // 100 s
  const double expected = 100000.0;
  const double sigma = std::sqrt(expected);
  REQUIRE(std::fabs(static_cast<double>(arr.size()) - expected) <= 3 * sigma);
  REQUIRE(std::is_sorted(arr.begin(), arr.end()));
}

TEST_CASE("on-off arrivals land inside burst windows only", "[workload]") {
  ArrivalProcess p;
  p.kind = ArrivalKind::OnOff;
  p.base_rate = 0.0;
  p.burst_rate = 2000.0;
  p.period_us = 100000;
  p.duty = 0.5;
  const auto arr = generate_arrivals(p, 1000000, 3);
  const double expected = 1000.0;  // duty-cycle arithmetic
  REQUIRE(std::fabs(static_cast<double>(arr.size()) - expected) <=
          3 * std::sqrt(expected));
  for (SimTime t : arr) {
    REQUIRE(t % 100000 < 50000);
  }
}

TEST_CASE("nonpositive arrival rates are configuration errors", "[workload]") {
  ArrivalProcess p;
  p.kind = ArrivalKind::Poisson;
  p.rate = 0.0;
  REQUIRE_THROWS_AS(generate_arrivals(p, 1000, 1), ConfigError);
  p.rate = -5.0;
  REQUIRE_THROWS_AS(generate_arrivals(p, 1000, 1), ConfigError);
}

namespace {

// A scenario for pure workload behavior: GC off, heap effectively unlimited.
ScenarioConfig serve_scenario(int cores, int pool, std::uint64_t service_us) {
  ScenarioConfig c = test::small_scenario();
  c.sched.cores = cores;
  c.pool_size = pool;
  c.request.service_micros = service_us;
  c.request.service_jitter = 0.0;
  c.request.alloc_bytes = 1024;
  c.gc.enabled = false;
  c.gc.heap_capacity = 1024 * kMiB;
  return c;
}

std::vector<RequestRecord> serve(const ScenarioConfig& cfg,
                                 const std::vector<SimTime>& arrivals,
                                 SimTime horizon) {
  ScenarioConfig c = cfg;
  c.horizon_us = horizon;
  c.arrival.kind = ArrivalKind::Deterministic;
  c.arrival.rate = 1.0;
  Simulation sim(c, 1);
  sim.retain_records(true);
  sim.set_rate(0.0);  // injected arrivals only
  sim.inject_arrivals(arrivals);
  sim.run();
  return sim.records();
}

}  // namespace

TEST_CASE("a single request on an empty machine takes its service time",
          "[workload]") {
  const auto records = serve(serve_scenario(1, 1, 5000), {0}, 1000000);
  REQUIRE(records.size() == 1);
  REQUIRE(records[0].latency() == 5000);
  REQUIRE(records[0].start == records[0].arrival);
  REQUIRE(records[0].stall_us == 0);
}

TEST_CASE("two simultaneous requests serialize FIFO through one mutator",
          "[workload]") {
  const auto records = serve(serve_scenario(1, 1, 5000), {0, 0}, 1000000);
  REQUIRE(records.size() == 2);
  std::vector<std::uint64_t> lat{records[0].latency(), records[1].latency()};
  std::sort(lat.begin(), lat.end());
  REQUIRE(lat[0] == 5000);
  REQUIRE(lat[1] == 10000);
}

TEST_CASE("requests begin service in arrival order within one pool",
          "[workload]") {
  ScenarioConfig c = serve_scenario(2, 3, 900);
  c.arrival.kind = ArrivalKind::Poisson;
  c.arrival.rate = 2500.0;
  c.horizon_us = 2000000;
  Simulation sim(c, 5);
  sim.retain_records(true);
  sim.run();
  auto records = sim.records();
  REQUIRE(records.size() > 1000);
  std::sort(records.begin(), records.end(),
            [](const RequestRecord& a, const RequestRecord& b) {
              return a.arrival < b.arrival;
            });
  for (std::size_t i = 1; i < records.size(); ++i) {
    REQUIRE(records[i].start >= records[i - 1].start);
  }
}

TEST_CASE("overload grows the queue monotonically against a replay oracle",
          "[workload]") {
  // Offered load 2x capacity of a single-core single-mutator server.
  ScenarioConfig c = serve_scenario(1, 1, 1000);
  std::vector<SimTime> arrivals;
  for (int i = 0; i < 4000; ++i) {
    arrivals.push_back(static_cast<SimTime>(i) * 500);
  }
  ScenarioConfig run_cfg = c;
  run_cfg.horizon_us = 2000000;
  run_cfg.arrival.kind = ArrivalKind::Deterministic;
  run_cfg.arrival.rate = 1.0;
  Simulation sim(run_cfg, 1);
  sim.set_rate(0.0);
  sim.inject_arrivals(arrivals);

  // Brute-force single-server FIFO replay.
  auto oracle_completed = [&](SimTime t) {
    SimTime clock = 0;
    std::uint64_t done = 0;
    for (SimTime a : arrivals) {
      const SimTime begin = std::max(clock, a);
      if (begin + 1000 > t) break;
      clock = begin + 1000;
      ++done;
    }
    return done;
  };

  std::uint64_t prev_depth = 0;
  for (SimTime t = 200000; t <= 2000000; t += 200000) {
    sim.run_until(t);
    const std::uint64_t arrived = static_cast<std::uint64_t>(
        std::count_if(arrivals.begin(), arrivals.end(),
                      [&](SimTime a) { return a < t; }));
    const std::uint64_t depth = arrived - sim.completed();
    REQUIRE(sim.completed() == oracle_completed(t));
    REQUIRE(depth >= prev_depth);
    prev_depth = depth;
  }
  REQUIRE(prev_depth > 1000);
}

TEST_CASE("throughput never exceeds the pool service ceiling", "[workload]") {
  ScenarioConfig c = serve_scenario(2, 2, 1000);
  c.arrival.kind = ArrivalKind::Poisson;
  c.arrival.rate = 5000.0;  // over capacity
  c.horizon_us = 3000000;
  Simulation sim(c, 9);
  for (SimTime t = 1000000; t <= 3000000; t += 1000000) {
    sim.begin_window();
    sim.run_until(t);
    const WindowStats w = sim.end_window();
    REQUIRE(w.throughput <= 2000.0 * 1.001);
  }
}

TEST_CASE("latency decomposes into waiting, cpu, and preemption time",
          "[workload]") {
  // Two mutators share one core; the slower request's extra latency is
  // exactly its runnable-but-not-running time, in whole quanta here.
  const auto records = serve(serve_scenario(1, 2, 5000), {0, 0}, 1000000);
  REQUIRE(records.size() == 2);
  for (const RequestRecord& r : records) {
    const std::uint64_t queue_wait = r.start - r.arrival;
    REQUIRE(queue_wait == 0);  // two mutators, both start instantly
    REQUIRE(r.stall_us == 0);
    const std::uint64_t preemption_wait =
        r.latency() - 5000 - r.stall_us - queue_wait;
    REQUIRE(preemption_wait % 1000 == 0);
  }
  // Round-robin interleaving: 4 and 5 foreign quanta of preemption wait.
  std::vector<std::uint64_t> lat{records[0].latency(), records[1].latency()};
  std::sort(lat.begin(), lat.end());
  REQUIRE(lat[0] == 9000);
  REQUIRE(lat[1] == 10000);
}

TEST_CASE("service samples respect jitter bounds and the 1us floor",
          "[workload]") {
  RequestSpec spec;
  spec.service_micros = 1000;
  spec.service_jitter = 0.3;
  Rng rng(4);
  for (int i = 0; i < 10000; ++i) {
    const std::uint64_t s = sample_service(spec, rng);
    REQUIRE(s >= 700);
    REQUIRE(s <= 1300);
  }
  spec.service_micros = 1;
  spec.service_jitter = 0.9;
  for (int i = 0; i < 1000; ++i) {
    REQUIRE(sample_service(spec, rng) >= 1);
  }
}
