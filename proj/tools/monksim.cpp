// Command-line front end: scenario runs, response curves, multi-seed policy
// comparisons, curve fitting, and load calibration.

#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "monk/bench.hpp"
#include "monk/csv.hpp"
#include "monk/fit.hpp"
#include "monk/report.hpp"
#include "monk/scenario.hpp"
#include "monk/simulation.hpp"

namespace {

std::string output_dir(const std::string& flag) {
  if (!flag.empty()) return flag;
  const char* env = std::getenv("MONKSIM_OUT");
  if (env != nullptr && env[0] != '\0') return env;
  return ".";
}

std::string join(const std::string& dir, const std::string& name) {
  if (dir.empty() || dir == ".") return name;
  return dir + "/" + name;
}

std::string run_summary(const monk::Simulation& sim,
                        const monk::ScenarioConfig& cfg, std::uint64_t seed) {
  std::string out = monk::artifact_header(cfg, seed, "run summary");
  char buf[128];
  auto put = [&](const char* k, unsigned long long v) {
    std::snprintf(buf, sizeof buf, "%s %llu\n", k, v);
    out += buf;
  };
  put("arrivals", sim.arrivals_seen());
  put("completed", sim.completed());
  put("max_latency_us", sim.max_latency_us());
  return out;
}

int run_cmd(const std::string& config_path, std::uint64_t seed,
            const std::string& out_flag, bool trace) {
  const monk::ScenarioConfig cfg = monk::load_config_file(config_path);
  const std::string dir = output_dir(out_flag);
  monk::Simulation sim(cfg, seed);
  sim.retain_records(true);
  std::vector<monk::TraceRow> trace_rows;
  if (trace) sim.machine().set_trace(&trace_rows);
  sim.run();

  std::string summary = run_summary(sim, cfg, seed);
  char buf[160];
  std::snprintf(buf, sizeof buf, "stall_events %llu\ncycles %llu\n",
                static_cast<unsigned long long>(sim.gc().stall_events()),
                static_cast<unsigned long long>(sim.gc().cycles_completed()));
  summary += buf;
  std::snprintf(buf, sizeof buf,
                "reconcile_checks %llu\nreconcile_corrections %llu\n",
                static_cast<unsigned long long>(sim.policy().reconcile_checks()),
                static_cast<unsigned long long>(
                    sim.policy().reconcile_corrections()));
  summary += buf;
  std::snprintf(buf, sizeof buf, "priority_violations %llu\n",
                static_cast<unsigned long long>(
                    sim.machine().priority_violations()));
  summary += buf;

  monk::write_file(join(dir, "requests.csv"),
                   monk::requests_csv(cfg, seed, sim.records()));
  monk::write_file(join(dir, "gc.csv"),
                   monk::gc_csv(cfg, seed, sim.gc().gc_log()));
  monk::write_file(join(dir, "memory.csv"),
                   monk::memory_csv(cfg, seed, sim.gc().memory_log()));
  monk::write_file(join(dir, "policy.csv"),
                   monk::policy_csv(cfg, seed, sim.policy().log()));
  if (trace) {
    monk::write_file(join(dir, "trace.csv"),
                     monk::trace_csv(cfg, seed, trace_rows));
  }
  monk::write_file(join(dir, "summary.txt"), summary);
  std::printf("%s", summary.c_str());
  if (sim.machine().priority_violations() > 0) {
    std::fprintf(stderr, "invariant violation: scheduler priority breached\n");
    return 3;
  }
  return 0;
}

int curve_cmd(const std::string& config_path, std::uint64_t seed,
              const std::string& out_flag, double pmax_flag) {
  const monk::ScenarioConfig cfg = monk::load_config_file(config_path);
  const std::string dir = output_dir(out_flag);
  const double pmax = pmax_flag > 0.0 ? pmax_flag : monk::warmup(cfg, seed);

  monk::ScenarioConfig scaled = cfg;
  scaled.arrival = monk::scale_process(
      scaled.arrival, pmax / static_cast<double>(cfg.bench.steps));
  monk::Simulation sim(scaled, seed);
  const monk::ResponseCurve curve =
      monk::build_curve_with(sim, cfg.bench.steps, cfg.measure, pmax);
  const monk::Scores scores =
      monk::score_curve(curve, cfg.bench.sustain_fraction);

  monk::write_file(join(dir, "curve.csv"), monk::curve_csv(cfg, seed, curve));
  monk::write_file(join(dir, "scores.txt"),
                   monk::scores_text(cfg, seed, scores));
  monk::write_file(join(dir, "gc.csv"),
                   monk::gc_csv(cfg, seed, sim.gc().gc_log()));
  monk::write_file(join(dir, "policy.csv"),
                   monk::policy_csv(cfg, seed, sim.policy().log()));
  std::printf("%s", monk::scores_text(cfg, seed, scores).c_str());
  if (sim.machine().priority_violations() > 0) {
    std::fprintf(stderr, "invariant violation: scheduler priority breached\n");
    return 3;
  }
  return 0;
}

int compare_cmd(const std::string& base_path,
                const std::vector<std::string>& candidate_paths, int runs,
                std::uint64_t seed, const std::string& out_flag, bool mad) {
  std::vector<monk::ScenarioConfig> configs;
  std::vector<std::string> labels;
  configs.push_back(monk::load_config_file(base_path));
  labels.push_back("baseline:" +
                   std::string(to_string(configs[0].policy.variant)));
  for (const std::string& p : candidate_paths) {
    configs.push_back(monk::load_config_file(p));
    labels.push_back(to_string(configs.back().policy.variant));
  }
  const monk::CompareTable table =
      monk::compare(configs, labels, runs, seed, mad);
  const std::string rendered = monk::render_table(table);
  std::printf("%s", rendered.c_str());
  monk::write_file(join(output_dir(out_flag), "comparison.txt"), rendered);
  return 0;
}

int fit_cmd(const std::string& curve_path, const std::vector<double>& breaks,
            int degree, const std::string& out_flag) {
  std::ifstream in(curve_path);
  if (!in) throw monk::ConfigError("cannot open curve file: " + curve_path);
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::vector<monk::CurveStep> steps = monk::parse_curve_csv(ss.str());
  std::vector<double> xs, ys;
  for (const monk::CurveStep& s : steps) {
    xs.push_back(s.cpu_load);
    ys.push_back(static_cast<double>(s.max_latency_us));
  }
  const monk::PiecewiseFit fit = monk::fit_piecewise(xs, ys, breaks, degree);
  const std::string report = monk::fit_report(fit);
  std::printf("%s", report.c_str());
  monk::write_file(join(output_dir(out_flag), "fit.txt"), report);
  return 0;
}

int calibrate_cmd(const std::string& config_path,
                  const std::vector<double>& targets, std::uint64_t seed) {
  const monk::ScenarioConfig cfg = monk::load_config_file(config_path);
  const std::vector<double> rates = monk::calibrate(cfg, seed, targets);
  std::printf("target_pct,rate_per_s\n");
  for (std::size_t i = 0; i < targets.size(); ++i) {
    std::printf("%.2f,%.3f\n", targets[i], rates[i]);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"monksim: slack-based GC scheduling simulator and benchmark"};
  app.require_subcommand(1);

  std::string config_path, out_dir, curve_path, base_path;
  std::vector<std::string> candidates;
  std::vector<double> targets{40, 70, 95};
  std::vector<double> breaks{55, 80, 93};
  std::uint64_t seed = 1;
  int runs = 10;
  int degree = 1;
  double pmax = 0.0;
  bool trace = false;
  bool mad = false;

  CLI::App* run = app.add_subcommand("run", "single scenario run, CSV artifacts");
  run->add_option("--config", config_path, "scenario config (JSON)")->required();
  run->add_option("--seed", seed, "simulation seed");
  run->add_option("--out", out_dir, "output directory (or $MONKSIM_OUT)");
  run->add_flag("--trace", trace, "emit scheduler event trace");

  CLI::App* curve = app.add_subcommand(
      "curve", "warm-up, response curve, and scores");
  curve->add_option("--config", config_path, "scenario config (JSON)")->required();
  curve->add_option("--seed", seed, "simulation seed");
  curve->add_option("--out", out_dir, "output directory (or $MONKSIM_OUT)");
  curve->add_option("--pmax", pmax, "skip warm-up, use this preliminary max");

  CLI::App* compare = app.add_subcommand(
      "compare", "multi-seed comparison against a baseline");
  compare->add_option("--config", base_path, "baseline config")->required();
  compare->add_option("--candidate", candidates, "candidate config(s)")
      ->required();
  compare->add_option("--runs", runs, "seeds per configuration");
  compare->add_option("--seed", seed, "first seed");
  compare->add_option("--out", out_dir, "output directory (or $MONKSIM_OUT)");
  compare->add_flag("--mad", mad, "MAD-filter samples before the Welch test");

  CLI::App* fit = app.add_subcommand("fit", "piecewise least-squares on a curve");
  fit->add_option("--curve", curve_path, "curve.csv produced by `curve`")
      ->required();
  fit->add_option("--breakpoints", breaks, "CPU-load breakpoints (percent)");
  fit->add_option("--degree", degree, "polynomial degree");
  fit->add_option("--out", out_dir, "output directory (or $MONKSIM_OUT)");

  CLI::App* cal = app.add_subcommand(
      "calibrate", "find injection rates for target CPU loads");
  cal->add_option("--config", config_path, "scenario config (JSON)")->required();
  cal->add_option("--targets", targets, "target loads in percent");
  cal->add_option("--seed", seed, "simulation seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return run_cmd(config_path, seed, out_dir, trace);
    if (curve->parsed()) return curve_cmd(config_path, seed, out_dir, pmax);
    if (compare->parsed()) {
      return compare_cmd(base_path, candidates, runs, seed, out_dir, mad);
    }
    if (fit->parsed()) return fit_cmd(curve_path, breaks, degree, out_dir);
    if (cal->parsed()) return calibrate_cmd(config_path, targets, seed);
  } catch (const monk::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const monk::InvariantViolation& e) {
    std::fprintf(stderr, "invariant violation: %s\n", e.what());
    return 3;
  } catch (const monk::ProtocolViolation& e) {
    std::fprintf(stderr, "protocol violation: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
