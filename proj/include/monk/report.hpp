#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <cstdio>
#include <string>
#include <thread>
#include <vector>

#include "monk/bench.hpp"
#include "monk/common.hpp"
#include "monk/scenario.hpp"
#include "monk/stats.hpp"

namespace monk {

inline constexpr std::array<const char*, 7> kMetricNames = {
    "max-JOPS",       "critical-10ms", "critical-25ms", "critical-50ms",
    "critical-75ms",  "critical-100ms", "critical-aggregate"};

inline std::array<double, 7> metrics_of(const Scores& s) {
  return {s.max_jops,           s.critical_per_sla[0], s.critical_per_sla[1],
          s.critical_per_sla[2], s.critical_per_sla[3], s.critical_per_sla[4],
          s.critical_aggregate};
}

enum class Marker : std::uint8_t { Better, Worse, NotSignificant };

inline const char* to_string(Marker m) {
  switch (m) {
    case Marker::Better: return "better";
    case Marker::Worse: return "worse";
    case Marker::NotSignificant: return "not-significant";
  }
  return "?";
}

struct CompareCell {
  double normalized = 1.0;  // candidate mean / baseline mean
  double p = 1.0;
  double rsd = 0.0;
  Marker marker = Marker::NotSignificant;
};

struct CompareRow {
  std::string config_label;
  std::array<CompareCell, 7> cells;
};

struct CompareTable {
  std::vector<CompareRow> rows;  // baseline first
  int runs = 0;
  bool mad_filtered = false;
  // Raw per-seed metric values: [config][metric][seed].
  std::vector<std::array<std::vector<double>, 7>> raw;
};

// Runs `runs` seeded benchmark protocols per configuration in parallel and
// summarizes each metric against the baseline: normalized mean, Welch p,
// RSD, and a direction marker at p < 0.05 (higher is better).
inline CompareTable compare(const std::vector<ScenarioConfig>& configs,
                            const std::vector<std::string>& labels, int runs,
                            std::uint64_t base_seed, bool mad_prefilter = false,
                            double mad_k = 3.0) {
  if (configs.empty()) throw ConfigError("compare: need at least one config");
  if (runs < 2) throw ConfigError("compare: runs must be >= 2");

  CompareTable table;
  table.runs = runs;
  table.mad_filtered = mad_prefilter;
  table.raw.resize(configs.size());

  std::vector<std::vector<Scores>> scores(
      configs.size(), std::vector<Scores>(static_cast<std::size_t>(runs)));
  std::vector<double> pmax(configs.size(), 0.0);
  for (std::size_t c = 0; c < configs.size(); ++c) {
    pmax[c] = warmup(configs[c], base_seed);
  }

  struct Job {
    std::size_t config;
    int run;
  };
  std::vector<Job> jobs;
  for (std::size_t c = 0; c < configs.size(); ++c) {
    for (int r = 0; r < runs; ++r) jobs.push_back(Job{c, r});
  }
  const unsigned hw = std::thread::hardware_concurrency();
  const std::size_t workers =
      std::min<std::size_t>(jobs.size(), hw == 0 ? 4 : hw);
  std::vector<std::thread> pool;
  std::atomic<std::size_t> next{0};
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= jobs.size()) return;
        const Job job = jobs[i];
        const std::uint64_t seed =
            base_seed + static_cast<std::uint64_t>(job.run);
        const ResponseCurve curve =
            build_curve(configs[job.config], seed, pmax[job.config]);
        scores[job.config][static_cast<std::size_t>(job.run)] =
            score_curve(curve, configs[job.config].bench.sustain_fraction);
      }
    });
  }
  for (std::thread& t : pool) t.join();

  for (std::size_t c = 0; c < configs.size(); ++c) {
    for (int r = 0; r < runs; ++r) {
      const auto m = metrics_of(scores[c][static_cast<std::size_t>(r)]);
      for (std::size_t k = 0; k < 7; ++k) table.raw[c][k].push_back(m[k]);
    }
  }

  auto prepared = [&](std::size_t c, std::size_t k) {
    stats::Sample s;
    s.values = table.raw[c][k];
    if (mad_prefilter) {
      const auto f = stats::mad_filter(s, mad_k);
      if (f.filtered.values.size() >= 2) return f.filtered;
    }
    return s;
  };

  for (std::size_t c = 0; c < configs.size(); ++c) {
    CompareRow row;
    row.config_label = labels.size() > c ? labels[c] : to_string(configs[c].policy.variant);
    for (std::size_t k = 0; k < 7; ++k) {
      CompareCell cell;
      const stats::Sample base = prepared(0, k);
      const stats::Sample cand = prepared(c, k);
      const double mb = stats::mean(base.values);
      const double mc = stats::mean(cand.values);
      cell.normalized = mb != 0.0 ? mc / mb : 1.0;
      if (stats::mean(cand.values) != 0.0) {
        cell.rsd = stats::rsd(cand);
      }
      if (c == 0) {
        cell.normalized = 1.0;
        cell.p = 1.0;
        cell.marker = Marker::NotSignificant;
      } else {
        const double vb = stats::sample_variance(base.values);
        const double vc = stats::sample_variance(cand.values);
        if (vb == 0.0 && vc == 0.0) {
          cell.p = mb == mc ? 1.0 : 0.0;
        } else {
          cell.p = stats::welch_t(cand, base).p;
        }
        if (cell.p < 0.05 && mc != mb) {
          cell.marker = mc > mb ? Marker::Better : Marker::Worse;
        }
      }
      row.cells[k] = cell;
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

// Aligned plain-text rendering; baseline normalizes to 1.0 by construction.
inline std::string render_table(const CompareTable& table) {
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-18s", "config");
  out += buf;
  for (const char* name : kMetricNames) {
    std::snprintf(buf, sizeof buf, " | %-28s", name);
    out += buf;
  }
  out += "\n";
  std::snprintf(buf, sizeof buf, "%-18s", "(runs)");
  out += buf;
  for (std::size_t k = 0; k < kMetricNames.size(); ++k) {
    std::snprintf(buf, sizeof buf, " | %-28s", "val    p-val  RSD%  marker");
    out += buf;
  }
  out += "\n";
  for (const CompareRow& row : table.rows) {
    std::snprintf(buf, sizeof buf, "%-18s", row.config_label.c_str());
    out += buf;
    for (const CompareCell& cell : row.cells) {
      std::snprintf(buf, sizeof buf, " | %6.3f %6.3f %5.2f %-9s",
                    cell.normalized, cell.p, cell.rsd, to_string(cell.marker));
      out += buf;
    }
    out += "\n";
  }
  return out;
}

}  // namespace monk
