#include <charconv>
#include <cmath>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "adamplus/harness.hpp"
#include "adamplus/io.hpp"

namespace adamplus {

namespace {

std::vector<std::uint64_t> parse_seed_range(const std::string& spec) {
  const auto dots = spec.find("..");
  if (dots == std::string::npos)
    fail(Errc::Config, "--seeds expects an inclusive range 'first..last', got '" + spec + "'");
  std::uint64_t first = 0, last = 0;
  const char* b1 = spec.data();
  const char* e1 = spec.data() + dots;
  const char* b2 = spec.data() + dots + 2;
  const char* e2 = spec.data() + spec.size();
  const auto r1 = std::from_chars(b1, e1, first);
  const auto r2 = std::from_chars(b2, e2, last);
  if (r1.ec != std::errc() || r1.ptr != e1 || r2.ec != std::errc() || r2.ptr != e2)
    fail(Errc::Config, "--seeds expects an inclusive range 'first..last', got '" + spec + "'");
  if (last < first) fail(Errc::Config, "--seeds range is empty: " + spec);
  std::vector<std::uint64_t> seeds;
  seeds.reserve(static_cast<std::size_t>(last - first + 1));
  for (std::uint64_t s = first;; ++s) {
    seeds.push_back(s);
    if (s == last) break;
  }
  return seeds;
}

void print_run_report(const RunSummary& summary, std::ostream& os) {
  os << "seeds: " << summary.per_seed.size() << ", iterations: " << summary.config.T
     << ", optimizer: " << to_string(summary.config.optimizer.kind) << "\n";
  if (!summary.aggregate.empty()) {
    const auto& last = summary.aggregate.back();
    os << "final grad_norm mean: " << format_double(last.grad_norm_mean)
       << " (stderr " << format_double(last.grad_norm_stderr) << ")\n";
  }
  const auto& d = summary.diagnostics;
  if (d.lemma1)
    os << "lemma1 envelope: " << d.lemma1->violation_count << " violations over "
       << d.lemma1->entries.size() << " transitions\n";
  if (d.quadratic_recursion)
    os << "quadratic recursion: " << d.quadratic_recursion->violation_count
       << " violations, max |dev|/se = "
       << format_double(d.quadratic_recursion->max_abs_dev_over_se) << "\n";
  if (d.theorem1)
    os << "ergodic bound: lhs = " << format_double(d.theorem1->lhs)
       << ", rhs = " << format_double(d.theorem1->rhs)
       << (d.theorem1->holds ? " (holds)" : " (VIOLATED)")
       << (d.theorem1->g_estimated ? ", G estimated from data" : "") << "\n";
  if (d.theorem2)
    os << "ergodic 3/2 metrics: grad = " << format_double(d.theorem2->grad_metric)
       << ", err = " << format_double(d.theorem2->err_metric) << "\n";
  if (d.growth && d.growth->valid)
    os << "growth exponent kappa (mean over seeds): " << format_double(d.growth->mean_kappa)
       << "\n";
  for (const auto& note : d.notes) os << "note: " << note << "\n";
  if (!summary.output_dir.empty()) os << "wrote " << summary.output_dir << "\n";
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"Adam+/Nadam+ optimizer benchmark harness"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::string summary_path;
  std::string series;
  std::string plot_out;
  std::string seeds_spec;
  std::string theorem;
  double epsilon = 0.0;
  int threads = 1;

  auto* run_cmd = app.add_subcommand("run", "Run one experiment from a JSON config");
  run_cmd->add_option("--config", config_path, "experiment config JSON file")->required();
  run_cmd->add_option("--threads", threads, "worker threads for the seed loop");
  run_cmd->add_option("--out", out_dir, "output directory (overrides config and ADAMPLUS_OUT_DIR)");

  auto* sweep_cmd = app.add_subcommand("sweep", "Run a config over an inclusive seed range");
  sweep_cmd->add_option("--config", config_path, "experiment config JSON file")->required();
  sweep_cmd->add_option("--seeds", seeds_spec, "inclusive seed range, e.g. 1..100")->required();
  sweep_cmd->add_option("--threads", threads, "worker threads for the seed loop");
  sweep_cmd->add_option("--out", out_dir,
                        "output directory (overrides config and ADAMPLUS_OUT_DIR)");

  auto* plot_cmd = app.add_subcommand("plot", "Extract a plot-ready series from a run summary");
  plot_cmd->add_option("--summary", summary_path, "summary.json written by run/sweep")->required();
  plot_cmd->add_option("--series", series, "growth, convergence or variance")->required();
  plot_cmd->add_option("--out", plot_out, "output data file")->required();

  auto* sched_cmd = app.add_subcommand("schedule", "Print the batch/horizon schedule for a target accuracy");
  sched_cmd->add_option("--theorem", theorem, "t3 or appE")->required();
  sched_cmd->add_option("--epsilon", epsilon, "target accuracy in (0, 1)")->required();

  std::vector<std::string> argv_storage;
  argv_storage.reserve(args.size() + 1);
  argv_storage.push_back("adamplus");
  for (const auto& a : args) argv_storage.push_back(a);
  std::vector<const char*> argv;
  argv.reserve(argv_storage.size());
  for (const auto& a : argv_storage) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*run_cmd || *sweep_cmd) {
      ExperimentConfig cfg = load_experiment_config(config_path);
      if (*sweep_cmd) cfg.seeds = parse_seed_range(seeds_spec);
      RunOptions options;
      options.threads = threads;
      if (!out_dir.empty()) options.out_dir = out_dir;
      const RunSummary summary =
          *sweep_cmd ? run_seed_sweep(cfg, options) : run_experiment(cfg, options);
      print_run_report(summary, std::cout);
      if (summary.diagnostics.hard_failure) {
        std::cerr << "hard diagnostic check failed\n";
        return 2;
      }
      return 0;
    }
    if (*plot_cmd) {
      emit_plot_data(summary_path, series, plot_out);
      std::cout << "wrote " << plot_out << "\n";
      return 0;
    }
    if (*sched_cmd) {
      ScheduleParams params;
      double a = 0.0;
      if (theorem == "t3") {
        params = theorem3_schedule(epsilon);
        a = 4.0 / 3.0;
      } else if (theorem == "appE") {
        params = appendixE_schedule(epsilon);
        a = 4.0 / 3.0;
      } else {
        fail(Errc::Config, "--theorem expects t3 or appE, got '" + theorem + "'");
      }
      std::cout << "epsilon = " << format_double(params.epsilon) << "\n"
                << "beta = " << format_double(params.beta) << "\n"
                << "T = " << params.T << "\n"
                << "T0 = " << params.T0 << " (initial batch)\n"
                << "m = " << params.m << " (per-step batch)\n"
                << "eps0 = " << format_double(2.0 * std::pow(params.beta, a)) << "\n";
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace adamplus
