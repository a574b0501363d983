#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "adamplus/harness.hpp"
#include "adamplus/io.hpp"
#include "test_util.hpp"

using namespace adamplus;

namespace {

const char* kMinimalConfig = R"json({
  "problem": {"kind": "quadratic", "dim": 3, "curvature_max": 1.0, "sigma": 1.0},
  "optimizer": {"kind": "adamplus"},
  "T": 8,
  "seeds": [1, 2, 3, 4]
})json";

void expect_config_error(const std::string& json_text, const std::string& needle,
                         Errc code = Errc::Config) {
  try {
    parse_experiment_config(json_text);
    FAIL("expected config error containing '" << needle << "'");
  } catch (const Error& e) {
    CHECK(e.code() == code);
    CHECK(std::string(e.what()).find(needle) != std::string::npos);
  }
}

bool records_equal(const IterationRecord& a, const IterationRecord& b) {
  return a.t == b.t && a.f_value == b.f_value && a.grad_norm == b.grad_norm &&
         a.z_norm == b.z_norm && a.eta == b.eta && a.est_error == b.est_error &&
         a.cum_z_norm == b.cum_z_norm;
}

bool trajectories_equal(const std::vector<Trajectory>& a, const std::vector<Trajectory>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t s = 0; s < a.size(); ++s) {
    if (a[s].size() != b[s].size()) return false;
    for (std::size_t t = 0; t < a[s].size(); ++t)
      if (!records_equal(a[s][t], b[s][t])) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("config parsing: minimal config fills documented defaults") {
  const ExperimentConfig cfg = parse_experiment_config(kMinimalConfig);
  CHECK(cfg.problem.kind == "quadratic");
  CHECK(cfg.problem.dim == 3);
  CHECK(cfg.problem.sigma == 1.0);
  CHECK(cfg.optimizer.kind == OptimizerKind::AdamPlus);
  CHECK(cfg.optimizer.alpha == 0.1);
  CHECK(cfg.optimizer.beta == 0.1);
  CHECK(cfg.optimizer.a == 1.0);
  CHECK(cfg.optimizer.p == 0.5);
  CHECK(cfg.optimizer.eps0 == 1e-8);
  CHECK(cfg.T == 8);
  CHECK(cfg.batch_size == 1);
  CHECK(cfg.initial_batch == 1);
  CHECK(cfg.seeds == std::vector<std::uint64_t>{1, 2, 3, 4});
  CHECK(cfg.w0.kind == "constant");
  CHECK(cfg.w0.value == 1.0);
  CHECK(cfg.diagnostics.empty());
  CHECK_FALSE(cfg.schedule.has_value());
  CHECK_FALSE(cfg.output_dir.has_value());

  // Adam gets the customary smaller default step size.
  const ExperimentConfig adam = parse_experiment_config(R"json({
    "problem": {"kind": "quadratic", "dim": 2},
    "optimizer": {"kind": "adam"},
    "T": 2, "seeds": [0]
  })json");
  CHECK(adam.optimizer.kind == OptimizerKind::Adam);
  CHECK(adam.optimizer.alpha == 1e-3);
}

TEST_CASE("config parsing: unknown keys are rejected with dotted paths") {
  expect_config_error(R"json({
    "problem": {"kind": "quadratic", "dim": 2},
    "optimizer": {"kind": "adamplus"},
    "T": 2, "seeds": [0], "bogus": 1
  })json",
                      "unknown config key 'bogus'");

  expect_config_error(R"json({
    "problem": {"kind": "quadratic", "dim": 2, "curvture_max": 1.0},
    "optimizer": {"kind": "adamplus"},
    "T": 2, "seeds": [0]
  })json",
                      "unknown config key 'problem.curvture_max'");

  expect_config_error(R"json({
    "problem": {"kind": "quadratic", "dim": 2},
    "optimizer": {"kind": "sgd", "beta": 0.5},
    "T": 2, "seeds": [0]
  })json",
                      "unknown config key 'optimizer.beta'");

  expect_config_error(R"json({
    "problem": {"kind": "quadratic", "dim": 2},
    "optimizer": {"kind": "adamplus"},
    "w0": {"kind": "constant", "scale": 2.0},
    "T": 2, "seeds": [0]
  })json",
                      "unknown config key 'w0.scale'");
}

TEST_CASE("config parsing: data sources are nested one-of objects") {
  const ExperimentConfig cfg = parse_experiment_config(R"json({
    "problem": {"kind": "logistic", "reg": 0.5,
                "data": {"blobs": {"n": 40, "d": 6, "separation": 2.5, "seed": 9}}},
    "optimizer": {"kind": "adamplus"},
    "T": 2, "seeds": [0]
  })json");
  CHECK(cfg.problem.data.kind == "blobs");
  CHECK(cfg.problem.data.blobs.n == 40);
  CHECK(cfg.problem.data.blobs.d == 6);
  CHECK(cfg.problem.data.blobs.separation == 2.5);
  CHECK(cfg.problem.data.blobs.seed == 9);
  CHECK(cfg.problem.reg == 0.5);
  CHECK(build_objective(cfg.problem)->dim() == 6);

  // The source kind is the wrapper key; flat keys are rejected with the path.
  expect_config_error(R"json({
    "problem": {"kind": "logistic", "data": {"kind": "blobs", "n": 40}},
    "optimizer": {"kind": "adamplus"},
    "T": 2, "seeds": [0]
  })json",
                      "unknown config key 'problem.data.kind'");
  expect_config_error(R"json({
    "problem": {"kind": "logistic", "data": {"blobs": {"n": 40, "dim": 6}}},
    "optimizer": {"kind": "adamplus"},
    "T": 2, "seeds": [0]
  })json",
                      "unknown config key 'problem.data.blobs.dim'");
  expect_config_error(R"json({
    "problem": {"kind": "logistic",
                "data": {"blobs": {"n": 40, "d": 6}, "csv": {"path": "x", "label_column": 0}}},
    "optimizer": {"kind": "adamplus"},
    "T": 2, "seeds": [0]
  })json",
                      "exactly one of blobs, csv, idx");
}

TEST_CASE("config parsing: malformed input") {
  try {
    parse_experiment_config("{ not json");
    FAIL("expected parse error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::Parse);
  }
  expect_config_error("[1, 2]", "config root must be a JSON object");
  expect_config_error(R"json({
    "problem": {"kind": "quadratic", "dim": 2},
    "optimizer": {"kind": "nonsense"},
    "T": 2, "seeds": [0]
  })json",
                      "unknown optimizer kind");
}

TEST_CASE("config parsing: schedule owns the horizon and batch sizes") {
  const ExperimentConfig cfg = parse_experiment_config(R"json({
    "problem": {"kind": "quadratic", "dim": 2, "sigma": 1.0},
    "optimizer": {"alpha": 0.5},
    "schedule": {"name": "theorem3", "epsilon": 0.04},
    "seeds": [1, 2]
  })json");
  REQUIRE(cfg.schedule.has_value());
  CHECK(cfg.schedule->name == "theorem3");
  CHECK(cfg.schedule->epsilon == 0.04);
  CHECK(cfg.optimizer.alpha == 0.5);

  expect_config_error(R"json({
    "problem": {"kind": "quadratic", "dim": 2},
    "optimizer": {"alpha": 0.5},
    "schedule": {"name": "theorem3", "epsilon": 0.04},
    "T": 10, "seeds": [1]
  })json",
                      "conflicts with 'schedule'");

  // With a schedule the optimizer section may only choose alpha.
  expect_config_error(R"json({
    "problem": {"kind": "quadratic", "dim": 2},
    "optimizer": {"kind": "adamplus", "alpha": 0.5},
    "schedule": {"name": "theorem3", "epsilon": 0.04},
    "seeds": [1]
  })json",
                      "unknown config key 'optimizer.kind'");

  expect_config_error(R"json({
    "problem": {"kind": "quadratic", "dim": 2},
    "optimizer": {"alpha": 0.5},
    "schedule": {"name": "theorem9", "epsilon": 0.04},
    "seeds": [1]
  })json",
                      "must be theorem3 or appendixE");
}

TEST_CASE("config parsing: seeds validation") {
  const char* tmpl = R"json({
    "problem": {"kind": "quadratic", "dim": 2},
    "optimizer": {"kind": "adamplus"},
    "T": 2, "seeds": %s
  })json";
  auto with_seeds = [&](const std::string& seeds) {
    std::string s = tmpl;
    s.replace(s.find("%s"), 2, seeds);
    return s;
  };
  expect_config_error(with_seeds("[]"), "nonempty");
  expect_config_error(with_seeds("[-1]"), "nonnegative");
  expect_config_error(with_seeds("[1, 1]"), "duplicate");
  expect_config_error(with_seeds("[1.5]"), "nonnegative integers");
  expect_config_error(R"json({
    "problem": {"kind": "quadratic", "dim": 2},
    "optimizer": {"kind": "adamplus"},
    "T": 2
  })json",
                      "missing config key 'seeds'");
}

TEST_CASE("config parsing: diagnostics validation") {
  expect_config_error(R"json({
    "problem": {"kind": "quadratic", "dim": 2},
    "optimizer": {"kind": "adamplus"},
    "T": 2, "seeds": [0, 1], "diagnostics": ["lemma7"]
  })json",
                      "unknown diagnostic 'lemma7'");
  expect_config_error(R"json({
    "problem": {"kind": "quadratic", "dim": 2},
    "optimizer": {"kind": "adamplus"},
    "T": 2, "seeds": [0, 1], "diagnostics": ["growth", "growth"]
  })json",
                      "repeats");
}

TEST_CASE("resolve_config applies schedules and is idempotent") {
  SUBCASE("theorem3 at epsilon 0.04") {
    ExperimentConfig cfg = parse_experiment_config(R"json({
      "problem": {"kind": "quadratic", "dim": 2, "sigma": 1.0},
      "optimizer": {"alpha": 1.0},
      "schedule": {"name": "theorem3", "epsilon": 0.04},
      "seeds": [1, 2]
    })json");
    const ExperimentConfig r = resolve_config(cfg);
    CHECK(r.optimizer.kind == OptimizerKind::NadamPlus);
    CHECK(r.optimizer.alpha == 1.0);
    CHECK(r.optimizer.beta == doctest::Approx(0.2).epsilon(1e-14));
    CHECK(r.optimizer.p == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK(r.optimizer.a == doctest::Approx(4.0 / 3.0).epsilon(1e-15));
    CHECK(r.optimizer.eps0 ==
          doctest::Approx(2.0 * std::pow(0.2, 4.0 / 3.0)).epsilon(1e-14));
    CHECK(r.T == 625);
    CHECK(r.batch_size == 125);
    CHECK(r.initial_batch == 5);

    const ExperimentConfig again = resolve_config(r);
    CHECK(again.T == r.T);
    CHECK(again.batch_size == r.batch_size);
    CHECK(again.initial_batch == r.initial_batch);
    CHECK(again.optimizer.beta == r.optimizer.beta);
    CHECK(again.optimizer.eps0 == r.optimizer.eps0);
  }

  SUBCASE("appendixE at epsilon 1/16") {
    ExperimentConfig cfg = parse_experiment_config(R"json({
      "problem": {"kind": "quadratic", "dim": 2, "sigma": 1.0},
      "optimizer": {"alpha": 0.25},
      "schedule": {"name": "appendixE", "epsilon": 0.0625},
      "seeds": [1, 2]
    })json");
    const ExperimentConfig r = resolve_config(cfg);
    CHECK(r.optimizer.kind == OptimizerKind::AdamPlus);
    CHECK(r.optimizer.p == 0.5);
    CHECK(r.optimizer.beta == doctest::Approx(std::pow(2.0, -1.5)).epsilon(1e-14));
    CHECK(r.T == 256);
    CHECK(r.initial_batch == 3);   // ceil(2^1.5)
    CHECK(r.batch_size == 91);     // ceil(2^6.5)
  }
}

TEST_CASE("resolve_config enforces diagnostic requirements") {
  ExperimentConfig cfg = parse_experiment_config(kMinimalConfig);

  SUBCASE("seed-hungry diagnostics") {
    cfg.diagnostics = {"lemma1"};
    try {
      resolve_config(cfg);
      FAIL("expected seed-count config error");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::Config);
      CHECK(std::string(e.what()).find(">= 100 seeds") != std::string::npos);
    }
  }

  SUBCASE("theorem1 needs two seeds and two iterations") {
    cfg.diagnostics = {"theorem1"};
    cfg.seeds = {7};
    CHECK_THROWS_AS(resolve_config(cfg), Error);
    cfg.seeds = {7, 8};
    cfg.T = 1;
    CHECK_THROWS_AS(resolve_config(cfg), Error);
    cfg.T = 2;
    CHECK_NOTHROW(resolve_config(cfg));
  }

  SUBCASE("family-only diagnostics reject baselines") {
    cfg.optimizer = OptimizerConfig{};
    cfg.optimizer.kind = OptimizerKind::Sgd;
    cfg.diagnostics = {"theorem1"};
    try {
      resolve_config(cfg);
      FAIL("expected family-only config error");
    } catch (const Error& e) {
      CHECK(std::string(e.what()).find("adamplus-family") != std::string::npos);
    }
  }

  SUBCASE("horizon and batch bounds") {
    cfg.T = 0;
    CHECK_THROWS_AS(resolve_config(cfg), Error);
    cfg.T = 2;
    cfg.batch_size = 0;
    CHECK_THROWS_AS(resolve_config(cfg), Error);
  }
}

TEST_CASE("build_w0 kinds") {
  const W0Spec constant{.kind = "constant", .value = 2.5};
  const Vector w = build_w0(constant, 4);
  CHECK(w.size() == 4);
  CHECK(w[0] == 2.5);
  CHECK(w[3] == 2.5);

  W0Spec gauss;
  gauss.kind = "gaussian";
  gauss.scale = 3.0;
  gauss.seed = 42;
  const Vector g1 = build_w0(gauss, 5);
  const Vector g2 = build_w0(gauss, 5);
  CHECK(g1 == g2);
  gauss.seed = 43;
  CHECK((build_w0(gauss, 5) - g1).norm() > 0.0);

  W0Spec vals;
  vals.kind = "values";
  vals.values = {1.0, -2.0, 3.0};
  const Vector v = build_w0(vals, 3);
  CHECK(v[1] == -2.0);
  CHECK_THROWS_AS(build_w0(vals, 4), Error);

  W0Spec bad;
  bad.kind = "zeros";
  CHECK_THROWS_AS(build_w0(bad, 3), Error);
}

TEST_CASE("build_objective covers every problem and data kind") {
  ProblemSpec quad;
  quad.kind = "quadratic";
  quad.dim = 5;
  quad.curvature_max = 2.0;
  CHECK(build_objective(quad)->dim() == 5);

  ProblemSpec logi;
  logi.kind = "logistic";
  logi.reg = 0.1;
  logi.data.kind = "blobs";
  logi.data.blobs = {20, 4, 3.0, 9};
  CHECK(build_objective(logi)->dim() == 4);

  ProblemSpec mlp;
  mlp.kind = "mlp";
  mlp.layer_sizes = {4, 6, 2};
  mlp.data = logi.data;
  CHECK(build_objective(mlp)->dim() == mlp_param_count({4, 6, 2}));

  testutil::TempDir dir;
  const auto csv = dir.file("data.csv");
  testutil::write_file(csv, "0.5,1.5,1\n-0.5,0.5,0\n");
  ProblemSpec from_csv;
  from_csv.kind = "logistic";
  from_csv.data.kind = "csv";
  from_csv.data.csv.path = csv;
  from_csv.data.csv.label_column = 2;
  CHECK(build_objective(from_csv)->dim() == 2);

  ProblemSpec bad_data = logi;
  bad_data.data.kind = "parquet";
  CHECK_THROWS_AS(build_objective(bad_data), Error);
  ProblemSpec bad_kind;
  bad_kind.kind = "cubic";
  bad_kind.data.kind = "blobs";
  bad_kind.data.blobs = {4, 2, 1.0, 0};
  CHECK_THROWS_AS(build_objective(bad_kind), Error);
}

TEST_CASE("simulate: record convention, seed separation, thread invariance") {
  const ExperimentConfig cfg = parse_experiment_config(kMinimalConfig);

  const std::vector<Trajectory> once = simulate(cfg, 1);
  REQUIRE(once.size() == 4);
  for (const auto& traj : once) {
    REQUIRE(traj.size() == 8);  // records are the states at t = 0..T-1
    for (std::size_t t = 0; t < traj.size(); ++t) {
      CHECK(traj[t].t == static_cast<long>(t));
      if (t > 0)
        CHECK(traj[t].cum_z_norm ==
              doctest::Approx(traj[t - 1].cum_z_norm + traj[t].z_norm).epsilon(1e-15));
    }
  }

  // Distinct seeds see distinct oracle noise from the very first record.
  CHECK(once[0][0].est_error != once[1][0].est_error);

  // Identical reruns and thread-count changes are bitwise invisible.
  CHECK(trajectories_equal(once, simulate(cfg, 1)));
  CHECK(trajectories_equal(once, simulate(cfg, 4)));
  CHECK(trajectories_equal(once, simulate(cfg, 64)));
}

TEST_CASE("simulate: baselines record their constant step size") {
  const ExperimentConfig cfg = parse_experiment_config(R"json({
    "problem": {"kind": "quadratic", "dim": 3, "sigma": 0.5},
    "optimizer": {"kind": "sgd", "alpha": 0.05},
    "T": 6, "seeds": [3]
  })json");
  const std::vector<Trajectory> trajs = simulate(cfg);
  for (const auto& rec : trajs[0]) CHECK(rec.eta == 0.05);
}

TEST_CASE("run_experiment writes deterministic artifacts") {
  testutil::TempDir dir;
  const ExperimentConfig cfg = parse_experiment_config(kMinimalConfig);

  RunOptions opts;
  opts.out_dir = dir.file("run1");
  const RunSummary summary = run_experiment(cfg, opts);

  namespace fs = std::filesystem;
  REQUIRE(summary.seed_csvs == std::vector<std::string>{"seed_1.csv", "seed_2.csv", "seed_3.csv",
                                                        "seed_4.csv"});
  for (const auto& name : summary.seed_csvs) CHECK(fs::exists(fs::path(*opts.out_dir) / name));
  CHECK(fs::exists(fs::path(*opts.out_dir) / "aggregate.csv"));
  CHECK(fs::exists(summary.summary_path));
  CHECK(summary.aggregate.size() == 8);
  CHECK(summary.per_seed.size() == 4);
  CHECK(summary.per_seed[2].seed == 3);
  CHECK(summary.per_seed[2].final_record.t == 7);
  CHECK_FALSE(summary.diagnostics.hard_failure);
  CHECK(summary.wall_clock_seconds >= 0.0);

  const std::string seed_csv = read_text_file(dir.file("run1") + "/seed_1.csv");
  CHECK(seed_csv.rfind("t,f_value,grad_norm,z_norm,eta,est_error,cum_z_norm\n", 0) == 0);
  long lines = 0;
  for (const char ch : seed_csv)
    if (ch == '\n') ++lines;
  CHECK(lines == 9);  // header + 8 records

  const nlohmann::json doc = nlohmann::json::parse(read_text_file(summary.summary_path));
  CHECK(doc["files"]["aggregate_csv"] == "aggregate.csv");
  CHECK(doc["config"]["problem"]["kind"] == "quadratic");
  CHECK(doc["config"]["T"] == 8);
  CHECK(doc["per_seed"].size() == 4);
  CHECK(doc["diagnostics"]["hard_failure"] == false);

  // Re-running the same config reproduces every CSV byte for byte, with any
  // thread count.
  RunOptions opts2;
  opts2.out_dir = dir.file("run2");
  opts2.threads = 4;
  run_experiment(cfg, opts2);
  for (const auto& name : summary.seed_csvs)
    CHECK(read_text_file(dir.file("run1") + "/" + name) ==
          read_text_file(dir.file("run2") + "/" + name));
  CHECK(read_text_file(dir.file("run1") + "/aggregate.csv") ==
        read_text_file(dir.file("run2") + "/aggregate.csv"));
}

TEST_CASE("run_experiment honors output_dir resolution order") {
  testutil::TempDir dir;
  ExperimentConfig cfg = parse_experiment_config(kMinimalConfig);

  SUBCASE("config.output_dir is used when options do not override") {
    cfg.output_dir = dir.file("from_config");
    const RunSummary s = run_experiment(cfg);
    CHECK(s.output_dir == *cfg.output_dir);
    CHECK(std::filesystem::exists(dir.file("from_config") + "/aggregate.csv"));
  }

  SUBCASE("environment variable is the fallback") {
    const std::string env_dir = dir.file("from_env");
    ::setenv("ADAMPLUS_OUT_DIR", env_dir.c_str(), 1);
    const RunSummary s = run_experiment(cfg);
    ::unsetenv("ADAMPLUS_OUT_DIR");
    CHECK(s.output_dir == env_dir);
    CHECK(std::filesystem::exists(env_dir + "/summary.json"));
  }

  SUBCASE("write_outputs = false computes everything but touches nothing") {
    RunOptions opts;
    opts.out_dir = dir.file("never_created");
    opts.write_outputs = false;
    const RunSummary s = run_experiment(cfg, opts);
    CHECK(s.output_dir.empty());
    CHECK(s.seed_csvs.empty());
    CHECK(s.aggregate.size() == 8);
    CHECK_FALSE(std::filesystem::exists(dir.file("never_created")));
  }
}

TEST_CASE("run_seed_sweep refuses a single seed") {
  ExperimentConfig cfg = parse_experiment_config(kMinimalConfig);
  cfg.seeds = {42};
  RunOptions opts;
  opts.write_outputs = false;
  try {
    run_seed_sweep(cfg, opts);
    FAIL("expected seed-count error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::InsufficientSeeds);
  }
}

TEST_CASE("aggregate CSV round trip and sanity") {
  testutil::TempDir dir;
  const ExperimentConfig cfg = parse_experiment_config(kMinimalConfig);
  RunOptions opts;
  opts.out_dir = dir.file("agg");
  const RunSummary summary = run_experiment(cfg, opts);

  const std::vector<AggregateRow> rows = read_aggregate_csv(dir.file("agg") + "/aggregate.csv");
  REQUIRE(rows.size() == summary.aggregate.size());
  for (std::size_t t = 0; t < rows.size(); ++t) {
    // 17 significant digits round-trip doubles exactly.
    CHECK(rows[t].t == summary.aggregate[t].t);
    CHECK(rows[t].f_value_mean == summary.aggregate[t].f_value_mean);
    CHECK(rows[t].grad_norm_sq_stderr == summary.aggregate[t].grad_norm_sq_stderr);
    CHECK(rows[t].cum_z_norm_mean == summary.aggregate[t].cum_z_norm_mean);
    CHECK(rows[t].eta_mean == summary.aggregate[t].eta_mean);

    CHECK(rows[t].f_value_stderr >= 0.0);
    CHECK(rows[t].est_error_sq_mean >= 0.0);
    // Mean of squares dominates square of mean.
    CHECK(rows[t].grad_norm_sq_mean >=
          rows[t].grad_norm_mean * rows[t].grad_norm_mean - 1e-12);
  }

  const auto bad = dir.file("bad.csv");
  testutil::write_file(bad, "t,nope\n0,1\n");
  try {
    read_aggregate_csv(bad);
    FAIL("expected header mismatch error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::Parse);
  }
  // A seed CSV is not an aggregate CSV.
  CHECK_THROWS_AS(read_aggregate_csv(dir.file("agg") + "/seed_1.csv"), Error);
}

TEST_CASE("emit_plot_data produces gnuplot-style columns") {
  testutil::TempDir dir;
  const ExperimentConfig cfg = parse_experiment_config(kMinimalConfig);
  RunOptions opts;
  opts.out_dir = dir.file("plotrun");
  const RunSummary summary = run_experiment(cfg, opts);

  const auto growth_path = dir.file("growth.dat");
  emit_plot_data(summary, "growth", growth_path);
  const std::string growth = read_text_file(growth_path);
  CHECK(growth.rfind("# series: growth (cum_z_norm)\n# t mean stderr\n", 0) == 0);
  long data_lines = -2;  // discount the two comment lines
  for (const char ch : growth)
    if (ch == '\n') ++data_lines;
  CHECK(data_lines == static_cast<long>(summary.aggregate.size()));

  // The first data row carries t = 0 and the aggregate values verbatim.
  const std::string expected_first = "0 " + format_double(summary.aggregate[0].cum_z_norm_mean) +
                                     " " + format_double(summary.aggregate[0].cum_z_norm_stderr);
  CHECK(growth.find(expected_first + "\n") != std::string::npos);

  // The summary.json overload reads the files it wrote and agrees exactly.
  const auto via_files = dir.file("growth_from_summary.dat");
  emit_plot_data(summary.summary_path, "growth", via_files);
  CHECK(read_text_file(via_files) == growth);

  const auto conv_path = dir.file("conv.dat");
  emit_plot_data(summary, "convergence", conv_path);
  CHECK(read_text_file(conv_path).rfind("# series: convergence (grad_norm_sq)\n", 0) == 0);
  const auto var_path = dir.file("var.dat");
  emit_plot_data(summary, "variance", var_path);
  CHECK(read_text_file(var_path).rfind("# series: variance (est_error_sq)\n", 0) == 0);

  CHECK_THROWS_AS(emit_plot_data(summary, "wiggliness", dir.file("x.dat")), Error);
}

TEST_CASE("cli: run, sweep, plot and schedule round trip") {
  testutil::TempDir dir;
  const auto config_path = dir.file("config.json");
  testutil::write_file(config_path, std::string(kMinimalConfig));

  SUBCASE("run writes artifacts and exits 0") {
    const auto out = dir.file("cli_run");
    CHECK(run_cli({"run", "--config", config_path, "--out", out}) == 0);
    CHECK(std::filesystem::exists(out + "/summary.json"));
    CHECK(std::filesystem::exists(out + "/seed_1.csv"));

    const auto plot_out = dir.file("cli_plot.dat");
    CHECK(run_cli({"plot", "--summary", out + "/summary.json", "--series", "convergence",
                   "--out", plot_out}) == 0);
    CHECK(std::filesystem::exists(plot_out));
    CHECK(run_cli({"plot", "--summary", out + "/summary.json", "--series", "wobble",
                   "--out", plot_out}) == 1);
  }

  SUBCASE("sweep overrides the seed list from an inclusive range") {
    const auto out = dir.file("cli_sweep");
    CHECK(run_cli({"sweep", "--config", config_path, "--seeds", "5..8", "--threads", "2",
                   "--out", out}) == 0);
    for (const char* name : {"seed_5.csv", "seed_6.csv", "seed_7.csv", "seed_8.csv"})
      CHECK(std::filesystem::exists(out + "/" + std::string(name)));
    CHECK_FALSE(std::filesystem::exists(out + "/seed_1.csv"));

    CHECK(run_cli({"sweep", "--config", config_path, "--seeds", "8..5", "--out", out}) == 1);
    CHECK(run_cli({"sweep", "--config", config_path, "--seeds", "7", "--out", out}) == 1);
  }

  SUBCASE("schedule prints the derived parameters") {
    CHECK(run_cli({"schedule", "--theorem", "t3", "--epsilon", "0.01"}) == 0);
    CHECK(run_cli({"schedule", "--theorem", "appE", "--epsilon", "0.00390625"}) == 0);
    CHECK(run_cli({"schedule", "--theorem", "t5", "--epsilon", "0.01"}) == 1);
    CHECK(run_cli({"schedule", "--theorem", "t3", "--epsilon", "2.0"}) == 1);
  }

  SUBCASE("configuration errors exit 1") {
    const auto bad_path = dir.file("bad.json");
    testutil::write_file(bad_path, R"json({
      "problem": {"kind": "quadratic", "dim": 2},
      "optimizer": {"kind": "adamplus"},
      "T": 2, "seeds": [0], "bogus": true
    })json");
    CHECK(run_cli({"run", "--config", bad_path}) == 1);
    CHECK(run_cli({"run", "--config", dir.file("missing.json")}) == 1);
    CHECK(run_cli({"frobnicate"}) == 1);
    CHECK(run_cli({}) == 1);
    CHECK(run_cli({"run"}) == 1);  // --config is required
  }
}
