#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "monk/common.hpp"
#include "monk/gc.hpp"
#include "monk/policy.hpp"
#include "monk/sched.hpp"
#include "monk/workload.hpp"

namespace monk {

inline constexpr int kSchemaVersion = 1;

struct MeasureParams {
  std::uint64_t settle_us = 2000000;
  std::uint64_t window_us = 8000000;
};

struct BenchParams {
  int steps = 50;
  std::uint64_t warmup_settle_us = 1000000;
  std::uint64_t warmup_window_us = 3000000;
  double sustain_fraction = 0.99;  // sustained-throughput threshold
};

struct ScenarioConfig {
  SchedParams sched;
  GcParams gc;
  PolicyParams policy;
  RequestSpec request;
  ArrivalProcess arrival;
  int pool_size = 0;  // 0 means one mutator per core
  std::uint64_t horizon_us = 20000000;
  MeasureParams measure;
  BenchParams bench;

  int mutators() const { return pool_size > 0 ? pool_size : sched.cores; }
};

namespace detail {

using nlohmann::json;

inline const json& need(const json& obj, const std::string& path,
                        const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) {
    throw ConfigError("missing required field: " + path + key);
  }
  return *it;
}

inline void check_known(const json& obj, const std::string& path,
                        std::initializer_list<const char*> keys) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* k : keys) {
      if (it.key() == k) {
        known = true;
        break;
      }
    }
    if (!known) throw ConfigError("unknown field: " + path + it.key());
  }
}

template <typename T>
T get_num(const json& obj, const std::string& path, const char* key, T dflt) {
  auto it = obj.find(key);
  if (it == obj.end()) return dflt;
  if (!it->is_number()) {
    throw ConfigError("field must be a number: " + path + key);
  }
  return it->get<T>();
}

inline bool get_bool(const json& obj, const std::string& path, const char* key,
                     bool dflt) {
  auto it = obj.find(key);
  if (it == obj.end()) return dflt;
  if (!it->is_boolean()) {
    throw ConfigError("field must be a boolean: " + path + key);
  }
  return it->get<bool>();
}

inline std::string get_str(const json& obj, const std::string& path,
                           const char* key, const std::string& dflt) {
  auto it = obj.find(key);
  if (it == obj.end()) return dflt;
  if (!it->is_string()) {
    throw ConfigError("field must be a string: " + path + key);
  }
  return it->get<std::string>();
}

}  // namespace detail

inline PolicyVariant parse_variant(const std::string& s) {
  if (s == "VANILLA") return PolicyVariant::Vanilla;
  if (s == "MONK") return PolicyVariant::Monk;
  if (s == "MONK_S") return PolicyVariant::MonkS;
  if (s == "MONK_L") return PolicyVariant::MonkL;
  if (s == "HMONK") return PolicyVariant::HMonk;
  if (s == "HMONK_S") return PolicyVariant::HMonkS;
  throw ConfigError("policy.variant: unknown configuration name '" + s + "'");
}

inline ArrivalKind parse_arrival_kind(const std::string& s) {
  if (s == "deterministic") return ArrivalKind::Deterministic;
  if (s == "poisson") return ArrivalKind::Poisson;
  if (s == "on-off") return ArrivalKind::OnOff;
  throw ConfigError("arrival.kind: must be deterministic, poisson or on-off");
}

inline ScenarioConfig config_from_json(const nlohmann::json& j) {
  using detail::check_known;
  using detail::get_bool;
  using detail::get_num;
  using detail::get_str;
  if (!j.is_object()) throw ConfigError("config root must be an object");
  check_known(j, "", {"schema_version", "cores", "quantum_us",
                      "idle_preempt_immediate", "validate", "horizon_ms",
                      "pool_size", "request", "arrival", "heap", "gc", "policy",
                      "measure", "bench"});
  const int version = get_num<int>(j, "", "schema_version", -1);
  if (version != kSchemaVersion) {
    throw ConfigError("schema_version: expected " +
                      std::to_string(kSchemaVersion));
  }

  ScenarioConfig c;
  c.sched.cores = get_num<int>(j, "", "cores", 8);
  if (c.sched.cores < 1 || c.sched.cores > 1024) {
    throw ConfigError("cores: must be within [1,1024]");
  }
  c.sched.quantum_us = get_num<std::uint64_t>(j, "", "quantum_us", 1000);
  if (c.sched.quantum_us == 0) throw ConfigError("quantum_us: must be positive");
  c.sched.idle_preempt_immediate =
      get_bool(j, "", "idle_preempt_immediate", true);
  c.sched.validate = get_bool(j, "", "validate", true);
  c.horizon_us = get_num<std::uint64_t>(j, "", "horizon_ms", 20000) * 1000;
  c.pool_size = get_num<int>(j, "", "pool_size", 0);
  if (c.pool_size < 0) throw ConfigError("pool_size: must be >= 0");

  if (j.contains("request")) {
    const auto& r = j.at("request");
    check_known(r, "request.",
                {"service_us", "jitter", "alloc_bytes", "spread_chunks"});
    c.request.service_micros =
        get_num<std::uint64_t>(r, "request.", "service_us", 1000);
    if (c.request.service_micros == 0) {
      throw ConfigError("request.service_us: must be positive");
    }
    c.request.service_jitter = get_num<double>(r, "request.", "jitter", 0.2);
    if (c.request.service_jitter < 0.0 || c.request.service_jitter >= 1.0) {
      throw ConfigError("request.jitter: must be within [0,1)");
    }
    c.request.alloc_bytes =
        get_num<std::uint64_t>(r, "request.", "alloc_bytes", 32768);
    if (c.request.alloc_bytes == 0) {
      throw ConfigError("request.alloc_bytes: must be positive");
    }
    c.request.spread_chunks = get_num<int>(r, "request.", "spread_chunks", 1);
    if (c.request.spread_chunks < 1) {
      throw ConfigError("request.spread_chunks: must be >= 1");
    }
  }

  if (j.contains("arrival")) {
    const auto& a = j.at("arrival");
    check_known(a, "arrival.",
                {"kind", "rate", "base_rate", "burst_rate", "period_ms", "duty"});
    c.arrival.kind = parse_arrival_kind(
        get_str(a, "arrival.", "kind", "poisson"));
    c.arrival.rate = get_num<double>(a, "arrival.", "rate", 1000.0);
    c.arrival.base_rate = get_num<double>(a, "arrival.", "base_rate", 0.0);
    c.arrival.burst_rate = get_num<double>(a, "arrival.", "burst_rate", 0.0);
    c.arrival.period_us =
        get_num<std::uint64_t>(a, "arrival.", "period_ms", 100) * 1000;
    c.arrival.duty = get_num<double>(a, "arrival.", "duty", 0.5);
    validate(c.arrival);
  }

  if (j.contains("heap")) {
    const auto& h = j.at("heap");
    check_known(h, "heap.", {"capacity_mb", "live_fraction"});
    c.gc.heap_capacity =
        get_num<std::uint64_t>(h, "heap.", "capacity_mb", 512) * kMiB;
    if (c.gc.heap_capacity == 0) {
      throw ConfigError("heap.capacity_mb: must be positive");
    }
    c.gc.live_fraction = get_num<double>(h, "heap.", "live_fraction", 0.3);
    if (c.gc.live_fraction < 0.0 || c.gc.live_fraction > 1.0) {
      throw ConfigError("heap.live_fraction: must be within [0,1]");
    }
  }

  if (j.contains("gc")) {
    const auto& g = j.at("gc");
    check_known(g, "gc.",
                {"enabled", "work_per_live_mb", "work_base", "worker_throughput",
                 "work_chunk_us", "k_conservative", "start_margin",
                 "headroom_factor", "tracker_window_ms", "tracker_subintervals",
                 "bootstrap_alloc_rate_mb_s", "bootstrap_cycle_work",
                 "bootstrap_throughput", "history_decay", "safepoints",
                 "lock_mean_per_cycle", "lock_hold_us", "director_period_ms"});
    c.gc.enabled = get_bool(g, "gc.", "enabled", true);
    c.gc.work_per_live_mb =
        get_num<double>(g, "gc.", "work_per_live_mb", c.gc.work_per_live_mb);
    c.gc.work_base = get_num<double>(g, "gc.", "work_base", c.gc.work_base);
    c.gc.worker_throughput =
        get_num<double>(g, "gc.", "worker_throughput", c.gc.worker_throughput);
    if (c.gc.worker_throughput <= 0.0) {
      throw ConfigError("gc.worker_throughput: must be positive");
    }
    c.gc.work_chunk_us =
        get_num<std::uint64_t>(g, "gc.", "work_chunk_us", c.gc.work_chunk_us);
    c.gc.k_conservative =
        get_num<double>(g, "gc.", "k_conservative", c.gc.k_conservative);
    c.gc.start_margin = get_num<double>(g, "gc.", "start_margin", c.gc.start_margin);
    c.gc.headroom_factor =
        get_num<double>(g, "gc.", "headroom_factor", c.gc.headroom_factor);
    c.gc.tracker_window_us =
        get_num<std::uint64_t>(g, "gc.", "tracker_window_ms", 2000) * 1000;
    c.gc.tracker_subintervals =
        get_num<int>(g, "gc.", "tracker_subintervals", 10);
    if (c.gc.tracker_subintervals < 1) {
      throw ConfigError("gc.tracker_subintervals: must be >= 1");
    }
    c.gc.bootstrap_alloc_rate =
        get_num<double>(g, "gc.", "bootstrap_alloc_rate_mb_s", 100.0) *
        static_cast<double>(kMiB);
    c.gc.bootstrap_cycle_work = get_num<double>(
        g, "gc.", "bootstrap_cycle_work", c.gc.bootstrap_cycle_work);
    c.gc.bootstrap_throughput = get_num<double>(
        g, "gc.", "bootstrap_throughput", c.gc.bootstrap_throughput);
    c.gc.history_decay =
        get_num<double>(g, "gc.", "history_decay", c.gc.history_decay);
    if (g.contains("safepoints")) {
      const auto& sp = g.at("safepoints");
      if (!sp.is_array()) throw ConfigError("gc.safepoints: must be an array");
      c.gc.safepoints.clear();
      for (const auto& e : sp) {
        check_known(e, "gc.safepoints[].", {"at", "dur_us"});
        SafepointSpec s;
        s.at = detail::get_num<double>(e, "gc.safepoints[].", "at", 0.0);
        s.duration_us = detail::get_num<std::uint64_t>(e, "gc.safepoints[].",
                                                       "dur_us", 500);
        if (s.at < 0.0 || s.at > 1.0) {
          throw ConfigError("gc.safepoints[].at: must be within [0,1]");
        }
        c.gc.safepoints.push_back(s);
      }
    }
    c.gc.lock_mean_per_cycle = get_num<double>(g, "gc.", "lock_mean_per_cycle",
                                               c.gc.lock_mean_per_cycle);
    c.gc.lock_hold_us =
        get_num<std::uint64_t>(g, "gc.", "lock_hold_us", c.gc.lock_hold_us);
    c.gc.director_period_us =
        get_num<std::uint64_t>(g, "gc.", "director_period_ms", 100) * 1000;
    if (c.gc.director_period_us == 0) {
      throw ConfigError("gc.director_period_ms: must be positive");
    }
  }

  if (j.contains("policy")) {
    const auto& p = j.at("policy");
    check_known(p, "policy.",
                {"variant", "headroom_cores", "fallback_mode",
                 "reconcile_interval_ms", "decay_alpha", "max_threads",
                 "saturation_slack_cores", "stall_pressure_trigger"});
    c.policy.variant = parse_variant(get_str(p, "policy.", "variant", "VANILLA"));
    c.policy.headroom_cores = get_num<int>(p, "policy.", "headroom_cores", 0);
    if (c.policy.uses_fallback() &&
        (c.policy.headroom_cores < 0 || c.policy.headroom_cores > 4)) {
      throw ConfigError("policy.headroom_cores: must be within {0..4}");
    }
    const std::string mode =
        get_str(p, "policy.", "fallback_mode", "every-other-cycle");
    if (mode == "every-other-cycle") {
      c.policy.fallback_mode = FallbackMode::EveryOtherCycle;
    } else if (mode == "while-critical") {
      c.policy.fallback_mode = FallbackMode::WhileCritical;
    } else {
      throw ConfigError(
          "policy.fallback_mode: must be every-other-cycle or while-critical");
    }
    c.policy.reconcile_interval_us =
        get_num<std::uint64_t>(p, "policy.", "reconcile_interval_ms", 10) * 1000;
    if (c.policy.reconcile_interval_us == 0) {
      throw ConfigError("policy.reconcile_interval_ms: must be positive");
    }
    c.policy.decay_alpha = get_num<double>(p, "policy.", "decay_alpha", 0.5);
    if (c.policy.decay_alpha <= 0.0 || c.policy.decay_alpha > 1.0) {
      throw ConfigError("policy.decay_alpha: must be within (0,1]");
    }
    c.policy.max_threads = get_num<int>(p, "policy.", "max_threads", 100);
    if (c.policy.max_threads < 1) {
      throw ConfigError("policy.max_threads: must be >= 1");
    }
    c.policy.saturation_slack_cores =
        get_num<double>(p, "policy.", "saturation_slack_cores", 0.5);
    c.policy.stall_pressure_trigger =
        get_bool(p, "policy.", "stall_pressure_trigger", true);
  }

  if (j.contains("measure")) {
    const auto& m = j.at("measure");
    check_known(m, "measure.", {"settle_ms", "window_ms"});
    c.measure.settle_us =
        get_num<std::uint64_t>(m, "measure.", "settle_ms", 2000) * 1000;
    c.measure.window_us =
        get_num<std::uint64_t>(m, "measure.", "window_ms", 8000) * 1000;
    if (c.measure.window_us == 0) {
      throw ConfigError("measure.window_ms: must be positive");
    }
  }

  if (j.contains("bench")) {
    const auto& b = j.at("bench");
    check_known(b, "bench.",
                {"steps", "warmup_settle_ms", "warmup_window_ms",
                 "sustain_fraction"});
    c.bench.steps = get_num<int>(b, "bench.", "steps", 50);
    if (c.bench.steps < 1) throw ConfigError("bench.steps: must be >= 1");
    c.bench.warmup_settle_us =
        get_num<std::uint64_t>(b, "bench.", "warmup_settle_ms", 1000) * 1000;
    c.bench.warmup_window_us =
        get_num<std::uint64_t>(b, "bench.", "warmup_window_ms", 3000) * 1000;
    c.bench.sustain_fraction =
        get_num<double>(b, "bench.", "sustain_fraction", 0.99);
    if (c.bench.sustain_fraction <= 0.0 || c.bench.sustain_fraction > 1.0) {
      throw ConfigError("bench.sustain_fraction: must be within (0,1]");
    }
  }
  return c;
}

// Effective configuration with every default resolved; keys sort into a
// canonical order, so the dump doubles as the reproducibility record.
inline nlohmann::json config_to_json(const ScenarioConfig& c) {
  nlohmann::json j;
  j["schema_version"] = kSchemaVersion;
  j["cores"] = c.sched.cores;
  j["quantum_us"] = c.sched.quantum_us;
  j["idle_preempt_immediate"] = c.sched.idle_preempt_immediate;
  j["validate"] = c.sched.validate;
  j["horizon_ms"] = c.horizon_us / 1000;
  j["pool_size"] = c.pool_size;
  j["request"] = {{"service_us", c.request.service_micros},
                  {"jitter", c.request.service_jitter},
                  {"alloc_bytes", c.request.alloc_bytes},
                  {"spread_chunks", c.request.spread_chunks}};
  const char* kind = c.arrival.kind == ArrivalKind::Deterministic
                         ? "deterministic"
                         : (c.arrival.kind == ArrivalKind::Poisson ? "poisson"
                                                                   : "on-off");
  j["arrival"] = {{"kind", kind},
                  {"rate", c.arrival.rate},
                  {"base_rate", c.arrival.base_rate},
                  {"burst_rate", c.arrival.burst_rate},
                  {"period_ms", c.arrival.period_us / 1000},
                  {"duty", c.arrival.duty}};
  j["heap"] = {{"capacity_mb", c.gc.heap_capacity / kMiB},
               {"live_fraction", c.gc.live_fraction}};
  nlohmann::json sp = nlohmann::json::array();
  for (const SafepointSpec& s : c.gc.safepoints) {
    sp.push_back({{"at", s.at}, {"dur_us", s.duration_us}});
  }
  j["gc"] = {{"enabled", c.gc.enabled},
             {"work_per_live_mb", c.gc.work_per_live_mb},
             {"work_base", c.gc.work_base},
             {"worker_throughput", c.gc.worker_throughput},
             {"work_chunk_us", c.gc.work_chunk_us},
             {"k_conservative", c.gc.k_conservative},
             {"start_margin", c.gc.start_margin},
             {"headroom_factor", c.gc.headroom_factor},
             {"tracker_window_ms", c.gc.tracker_window_us / 1000},
             {"tracker_subintervals", c.gc.tracker_subintervals},
             {"bootstrap_alloc_rate_mb_s",
              c.gc.bootstrap_alloc_rate / static_cast<double>(kMiB)},
             {"bootstrap_cycle_work", c.gc.bootstrap_cycle_work},
             {"bootstrap_throughput", c.gc.bootstrap_throughput},
             {"history_decay", c.gc.history_decay},
             {"safepoints", sp},
             {"lock_mean_per_cycle", c.gc.lock_mean_per_cycle},
             {"lock_hold_us", c.gc.lock_hold_us},
             {"director_period_ms", c.gc.director_period_us / 1000}};
  const char* mode = c.policy.fallback_mode == FallbackMode::EveryOtherCycle
                         ? "every-other-cycle"
                         : "while-critical";
  j["policy"] = {{"variant", to_string(c.policy.variant)},
                 {"headroom_cores", c.policy.headroom_cores},
                 {"fallback_mode", mode},
                 {"reconcile_interval_ms", c.policy.reconcile_interval_us / 1000},
                 {"decay_alpha", c.policy.decay_alpha},
                 {"max_threads", c.policy.max_threads},
                 {"saturation_slack_cores", c.policy.saturation_slack_cores},
                 {"stall_pressure_trigger", c.policy.stall_pressure_trigger}};
  j["measure"] = {{"settle_ms", c.measure.settle_us / 1000},
                  {"window_ms", c.measure.window_us / 1000}};
  j["bench"] = {{"steps", c.bench.steps},
                {"warmup_settle_ms", c.bench.warmup_settle_us / 1000},
                {"warmup_window_ms", c.bench.warmup_window_us / 1000},
                {"sustain_fraction", c.bench.sustain_fraction}};
  return j;
}

inline std::uint64_t config_hash(const ScenarioConfig& c) {
  const std::string dump = config_to_json(c).dump();
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char ch : dump) {
    h ^= ch;
    h *= 0x100000001B3ull;
  }
  return h;
}

inline ScenarioConfig parse_config_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return config_from_json(j);
}

inline ScenarioConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

}  // namespace monk
