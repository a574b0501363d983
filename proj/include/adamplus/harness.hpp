#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "adamplus/diagnostics.hpp"
#include "adamplus/objective.hpp"
#include "adamplus/optimizer.hpp"
#include "adamplus/problems.hpp"

namespace adamplus {

// ---------------------------------------------------------------------------
// Experiment configuration. The JSON schema is strict: unknown keys are hard
// errors naming the full field path, so typos cannot silently fall back to
// defaults.

struct BlobSpec {
  long n = 0;
  long d = 0;
  double separation = 4.0;
  std::uint64_t seed = 0;
};

struct CsvSpec {
  std::string path;
  Eigen::Index label_column = 0;
  bool header = false;
};

struct IdxSpec {
  std::string images;
  std::string labels;
  std::optional<long> limit;
};

struct DataSpec {
  std::string kind;  // "blobs" | "csv" | "idx"
  BlobSpec blobs;
  CsvSpec csv;
  IdxSpec idx;
};

struct ProblemSpec {
  std::string kind;  // "quadratic" | "logistic" | "mlp"
  // quadratic
  Eigen::Index dim = 0;
  double curvature_max = 1.0;
  double sigma = 0.0;
  // logistic
  double reg = 0.0;
  // mlp
  std::vector<Eigen::Index> layer_sizes;
  // logistic / mlp
  DataSpec data;
};

struct W0Spec {
  std::string kind = "constant";  // "constant" | "gaussian" | "values"
  double value = 1.0;             // constant fill
  double scale = 1.0;             // gaussian scale
  std::uint64_t seed = 0;         // gaussian seed
  std::vector<double> values;     // explicit coordinates
};

struct ScheduleSpec {
  std::string name;  // "theorem3" | "appendixE"
  double epsilon = 0.0;
};

struct ExperimentConfig {
  ProblemSpec problem;
  OptimizerConfig optimizer;
  std::optional<ScheduleSpec> schedule;
  W0Spec w0;
  long T = 0;
  long batch_size = 1;
  long initial_batch = 1;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> diagnostics;
  std::optional<std::string> output_dir;
};

// Throws Errc::Config (bad value, unknown key, conflicting keys) or
// Errc::Parse (malformed JSON). Paths in messages use dotted notation, e.g.
// "problem.curvature_max".
ExperimentConfig parse_experiment_config(const std::string& json_text);
ExperimentConfig load_experiment_config(const std::string& path);

// Applies the schedule (when present) to optimizer exponents and batch
// sizes, then validates everything. Idempotent.
ExperimentConfig resolve_config(const ExperimentConfig& config);

std::unique_ptr<Objective> build_objective(const ProblemSpec& problem);
Vector build_w0(const W0Spec& w0, Eigen::Index dim);

// ---------------------------------------------------------------------------

struct AggregateRow {
  long t = 0;
  double f_value_mean = 0, f_value_stderr = 0;
  double grad_norm_mean = 0, grad_norm_stderr = 0;
  double grad_norm_sq_mean = 0, grad_norm_sq_stderr = 0;
  double z_norm_mean = 0, z_norm_stderr = 0;
  double eta_mean = 0, eta_stderr = 0;
  double est_error_mean = 0, est_error_stderr = 0;
  double est_error_sq_mean = 0, est_error_sq_stderr = 0;
  double cum_z_norm_mean = 0, cum_z_norm_stderr = 0;
};

struct SeedFinal {
  std::uint64_t seed = 0;
  IterationRecord final_record;
};

struct GrowthSummary {
  std::vector<double> per_seed_kappa;
  double mean_kappa = 0.0;
  bool valid = false;
};

struct DiagnosticsReport {
  std::optional<EnvelopeReport> lemma1;
  std::optional<RecursionReport> quadratic_recursion;
  std::optional<BoundReport> theorem1;
  std::optional<ErgodicMetrics> theorem2;  // seed-averaged
  std::optional<GrowthSummary> growth;
  bool hard_failure = false;
  std::vector<std::string> notes;
};

struct RunSummary {
  ExperimentConfig config;  // resolved
  std::vector<SeedFinal> per_seed;
  std::vector<AggregateRow> aggregate;
  DiagnosticsReport diagnostics;
  double wall_clock_seconds = 0.0;
  std::string output_dir;
  std::vector<std::string> seed_csvs;  // relative to output_dir, seed order
  std::string aggregate_csv;           // relative to output_dir
  std::string summary_path;            // absolute or as written
};

struct RunOptions {
  int threads = 1;
  std::optional<std::string> out_dir;  // overrides config.output_dir
  bool write_outputs = true;
};

// Trajectories for every configured seed, in config order. Seeds run in
// parallel on `threads` workers; results are identical for any thread count
// because every seed owns its RNG stream and aggregation happens in seed
// order after the join.
std::vector<Trajectory> simulate(const ExperimentConfig& config, int threads = 1);

// Full pipeline: simulate, aggregate, run configured diagnostics, write
// seed_<seed>.csv, aggregate.csv and summary.json into the output directory.
RunSummary run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

// Same pipeline, for aggregate statistics: refuses fewer than two seeds.
RunSummary run_seed_sweep(const ExperimentConfig& config, const RunOptions& options = {});

// Plot-ready series ("growth" = cum_z_norm, "convergence" = grad_norm_sq,
// "variance" = est_error_sq): writes "t mean stderr" rows from a written
// summary.json + aggregate.csv pair.
void emit_plot_data(const std::string& summary_path, const std::string& series,
                    const std::string& out_path);
void emit_plot_data(const RunSummary& summary, const std::string& series,
                    const std::string& out_path);

std::vector<AggregateRow> read_aggregate_csv(const std::string& path);

// Command-line entry point (subcommands run, sweep, plot, schedule). Returns
// 0 on success, 1 on validation/configuration errors, 2 when a hard
// diagnostic check fails.
int run_cli(const std::vector<std::string>& args);

}  // namespace adamplus
