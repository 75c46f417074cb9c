#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "monk/bench.hpp"
#include "monk/common.hpp"
#include "monk/fit.hpp"
#include "monk/gc.hpp"
#include "monk/policy.hpp"
#include "monk/scenario.hpp"
#include "monk/sched.hpp"
#include "monk/workload.hpp"

namespace monk {

// Every artifact starts with this reproducibility block: config hash, seed,
// and the full effective configuration with all defaults resolved.
inline std::string artifact_header(const ScenarioConfig& cfg,
                                   std::uint64_t seed, const char* title) {
  char buf[64];
  std::string out;
  out += "# monksim ";
  out += title;
  out += "\n";
  std::snprintf(buf, sizeof buf, "# config_hash=%016llx\n",
                static_cast<unsigned long long>(config_hash(cfg)));
  out += buf;
  std::snprintf(buf, sizeof buf, "# seed=%llu\n",
                static_cast<unsigned long long>(seed));
  out += buf;
  out += "# config=";
  out += config_to_json(cfg).dump();
  out += "\n";
  return out;
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write file: " + path);
  out << content;
}

inline std::string requests_csv(const ScenarioConfig& cfg, std::uint64_t seed,
                                const std::vector<RequestRecord>& records) {
  std::string out = artifact_header(cfg, seed, "request records");
  out += "arrival_us,start_us,completion_us,stall_us\n";
  char buf[128];
  for (const RequestRecord& r : records) {
    std::snprintf(buf, sizeof buf, "%llu,%llu,%llu,%llu\n",
                  static_cast<unsigned long long>(r.arrival),
                  static_cast<unsigned long long>(r.start),
                  static_cast<unsigned long long>(r.completion),
                  static_cast<unsigned long long>(r.stall_us));
    out += buf;
  }
  return out;
}

inline std::string gc_csv(const ScenarioConfig& cfg, std::uint64_t seed,
                          const std::vector<GcLogRow>& rows) {
  std::string out = artifact_header(cfg, seed, "gc log");
  out += "cycle_id,start_us,end_us,workers,pressing,reclaimed_bytes,stalls_during_cycle\n";
  char buf[160];
  for (const GcLogRow& r : rows) {
    std::snprintf(buf, sizeof buf, "%llu,%llu,%llu,%d,%d,%llu,%llu\n",
                  static_cast<unsigned long long>(r.cycle_id),
                  static_cast<unsigned long long>(r.start_us),
                  static_cast<unsigned long long>(r.end_us), r.workers,
                  r.pressing ? 1 : 0,
                  static_cast<unsigned long long>(r.reclaimed_bytes),
                  static_cast<unsigned long long>(r.stalls_during));
    out += buf;
  }
  return out;
}

inline std::string memory_csv(const ScenarioConfig& cfg, std::uint64_t seed,
                              const std::vector<MemoryRow>& rows) {
  std::string out = artifact_header(cfg, seed, "heap usage over time");
  out += "time_us,used_bytes\n";
  char buf[64];
  for (const MemoryRow& r : rows) {
    std::snprintf(buf, sizeof buf, "%llu,%llu\n",
                  static_cast<unsigned long long>(r.t),
                  static_cast<unsigned long long>(r.used));
    out += buf;
  }
  return out;
}

inline std::string policy_csv(const ScenarioConfig& cfg, std::uint64_t seed,
                              const std::vector<PolicyLogRow>& rows) {
  std::string out = artifact_header(cfg, seed, "policy log");
  out += "time_us,thread_id,policy,counter,reason\n";
  char buf[96];
  for (const PolicyLogRow& r : rows) {
    std::snprintf(buf, sizeof buf, "%llu,%d,%s,%d,%s\n",
                  static_cast<unsigned long long>(r.t), r.thread,
                  to_string(r.policy), r.counter, to_string(r.reason));
    out += buf;
  }
  return out;
}

inline std::string trace_csv(const ScenarioConfig& cfg, std::uint64_t seed,
                             const std::vector<TraceRow>& rows) {
  std::string out = artifact_header(cfg, seed, "event trace");
  out += "time_us,event,thread_id,core_id,detail\n";
  char buf[160];
  for (const TraceRow& r : rows) {
    std::snprintf(buf, sizeof buf, "%llu,%s,%d,%d,%s\n",
                  static_cast<unsigned long long>(r.t), r.event.c_str(),
                  r.thread, r.core, r.detail.c_str());
    out += buf;
  }
  return out;
}

inline std::string curve_csv(const ScenarioConfig& cfg, std::uint64_t seed,
                             const ResponseCurve& curve) {
  std::string out = artifact_header(cfg, seed, "response curve");
  char buf[192];
  std::snprintf(buf, sizeof buf, "# preliminary_max=%.3f\n",
                curve.preliminary_max);
  out += buf;
  out += "rate,throughput,max_us,p99_us,mean_us,cpu_pct,stalls\n";
  for (const CurveStep& s : curve.steps) {
    std::snprintf(buf, sizeof buf, "%.3f,%.3f,%llu,%llu,%.3f,%.3f,%llu\n",
                  s.injection_rate, s.achieved_throughput,
                  static_cast<unsigned long long>(s.max_latency_us),
                  static_cast<unsigned long long>(s.p99_latency_us),
                  s.mean_latency_us, s.cpu_load,
                  static_cast<unsigned long long>(s.stalls));
    out += buf;
  }
  return out;
}

inline std::string scores_text(const ScenarioConfig& cfg, std::uint64_t seed,
                               const Scores& s) {
  std::string out = artifact_header(cfg, seed, "scores");
  char buf[96];
  std::snprintf(buf, sizeof buf, "max-JOPS %.3f\n", s.max_jops);
  out += buf;
  for (std::size_t i = 0; i < kSlaMicros.size(); ++i) {
    std::snprintf(buf, sizeof buf, "critical-JOPS %llums %.3f\n",
                  static_cast<unsigned long long>(kSlaMicros[i] / 1000),
                  s.critical_per_sla[i]);
    out += buf;
  }
  std::snprintf(buf, sizeof buf, "critical-JOPS aggregate %.3f\n",
                s.critical_aggregate);
  out += buf;
  return out;
}

// Plain-text fit report: one legend-style equation per CPU-load interval
// plus the consecutive leading-coefficient ratios.
inline std::string fit_report(const PiecewiseFit& fit) {
  std::string out;
  char buf[256];
  for (std::size_t s = 0; s < fit.segments.size(); ++s) {
    const FitSegment& seg = fit.segments[s];
    std::string eq = "y = ";
    for (std::size_t k = seg.coefficients.size(); k-- > 0;) {
      char term[64];
      if (k == 0) {
        std::snprintf(term, sizeof term, "%+.6g", seg.coefficients[k]);
      } else if (k == 1) {
        std::snprintf(term, sizeof term, "%+.6g*x ", seg.coefficients[k]);
      } else {
        std::snprintf(term, sizeof term, "%+.6g*x^%zu ", seg.coefficients[k], k);
      }
      eq += term;
    }
    std::snprintf(buf, sizeof buf,
                  "segment %zu [%.6g, %.6g): %s  (n=%zu, sse=%.6g)\n", s,
                  seg.lo, seg.hi, eq.c_str(), seg.points, seg.sse);
    out += buf;
  }
  for (std::size_t i = 0; i < fit.leading_ratios.size(); ++i) {
    std::snprintf(buf, sizeof buf,
                  "leading coefficient ratio segment %zu -> %zu: %.6gx\n", i,
                  i + 1, fit.leading_ratios[i]);
    out += buf;
  }
  return out;
}

// Parses a curve CSV (as written by curve_csv), skipping '#' headers.
inline std::vector<CurveStep> parse_curve_csv(const std::string& text) {
  std::vector<CurveStep> steps;
  std::size_t pos = 0;
  bool saw_columns = false;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string::npos) eol = text.size();
    const std::string line = text.substr(pos, eol - pos);
    pos = eol + 1;
    if (line.empty() || line[0] == '#') continue;
    if (!saw_columns) {  // column header row
      saw_columns = true;
      continue;
    }
    CurveStep s;
    unsigned long long max_us = 0, p99_us = 0, stalls = 0;
    if (std::sscanf(line.c_str(), "%lf,%lf,%llu,%llu,%lf,%lf,%llu",
                    &s.injection_rate, &s.achieved_throughput, &max_us, &p99_us,
                    &s.mean_latency_us, &s.cpu_load, &stalls) != 7) {
      throw ConfigError("malformed curve CSV line: " + line);
    }
    s.max_latency_us = max_us;
    s.p99_latency_us = p99_us;
    s.stalls = stalls;
    steps.push_back(s);
  }
  return steps;
}

}  // namespace monk
