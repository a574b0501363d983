#include "adamplus/harness.hpp"

#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <initializer_list>
#include <limits>
#include <mutex>
#include <set>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "adamplus/io.hpp"

namespace adamplus {

namespace {

using nlohmann::json;

std::string join_path(const std::string& base, const std::string& key) {
  return base.empty() ? key : base + "." + key;
}

void check_keys(const json& obj, const std::string& path,
                std::initializer_list<const char*> allowed) {
  for (const auto& item : obj.items()) {
    bool known = false;
    for (const char* k : allowed)
      if (item.key() == k) {
        known = true;
        break;
      }
    if (!known) fail(Errc::Config, "unknown config key '" + join_path(path, item.key()) + "'");
  }
}

const json& require_object(const json& obj, const std::string& path, const char* key) {
  const auto it = obj.find(key);
  if (it == obj.end()) fail(Errc::Config, "missing config key '" + join_path(path, key) + "'");
  if (!it->is_object())
    fail(Errc::Config, "config key '" + join_path(path, key) + "' must be an object");
  return *it;
}

double get_double(const json& obj, const std::string& path, const char* key,
                  std::optional<double> def = std::nullopt) {
  const auto it = obj.find(key);
  if (it == obj.end()) {
    if (def) return *def;
    fail(Errc::Config, "missing config key '" + join_path(path, key) + "'");
  }
  if (!it->is_number())
    fail(Errc::Config, "config key '" + join_path(path, key) + "' must be a number");
  return it->get<double>();
}

long get_long(const json& obj, const std::string& path, const char* key,
              std::optional<long> def = std::nullopt) {
  const auto it = obj.find(key);
  if (it == obj.end()) {
    if (def) return *def;
    fail(Errc::Config, "missing config key '" + join_path(path, key) + "'");
  }
  if (!it->is_number_integer())
    fail(Errc::Config, "config key '" + join_path(path, key) + "' must be an integer");
  return it->get<long>();
}

bool get_bool(const json& obj, const std::string& path, const char* key, bool def) {
  const auto it = obj.find(key);
  if (it == obj.end()) return def;
  if (!it->is_boolean())
    fail(Errc::Config, "config key '" + join_path(path, key) + "' must be a boolean");
  return it->get<bool>();
}

std::string get_string(const json& obj, const std::string& path, const char* key) {
  const auto it = obj.find(key);
  if (it == obj.end()) fail(Errc::Config, "missing config key '" + join_path(path, key) + "'");
  if (!it->is_string())
    fail(Errc::Config, "config key '" + join_path(path, key) + "' must be a string");
  return it->get<std::string>();
}

DataSpec parse_data(const json& j, const std::string& path) {
  check_keys(j, path, {"blobs", "csv", "idx"});
  if (j.size() != 1)
    fail(Errc::Config, "config key '" + path + "' must contain exactly one of blobs, csv, idx");
  DataSpec d;
  if (j.contains("blobs")) {
    const json& b = require_object(j, path, "blobs");
    const std::string bp = join_path(path, "blobs");
    check_keys(b, bp, {"n", "d", "separation", "seed"});
    d.kind = "blobs";
    d.blobs.n = get_long(b, bp, "n");
    d.blobs.d = get_long(b, bp, "d");
    d.blobs.separation = get_double(b, bp, "separation", 4.0);
    d.blobs.seed = static_cast<std::uint64_t>(get_long(b, bp, "seed", 0));
  } else if (j.contains("csv")) {
    const json& c = require_object(j, path, "csv");
    const std::string cp = join_path(path, "csv");
    check_keys(c, cp, {"path", "label_column", "header"});
    d.kind = "csv";
    d.csv.path = get_string(c, cp, "path");
    d.csv.label_column = get_long(c, cp, "label_column");
    d.csv.header = get_bool(c, cp, "header", false);
  } else {
    const json& x = require_object(j, path, "idx");
    const std::string xp = join_path(path, "idx");
    check_keys(x, xp, {"images", "labels", "limit"});
    d.kind = "idx";
    d.idx.images = get_string(x, xp, "images");
    d.idx.labels = get_string(x, xp, "labels");
    if (x.contains("limit")) d.idx.limit = get_long(x, xp, "limit");
  }
  return d;
}

ProblemSpec parse_problem(const json& j, const std::string& path) {
  ProblemSpec p;
  p.kind = get_string(j, path, "kind");
  if (p.kind == "quadratic") {
    check_keys(j, path, {"kind", "dim", "curvature_max", "sigma"});
    p.dim = get_long(j, path, "dim");
    p.curvature_max = get_double(j, path, "curvature_max", 1.0);
    p.sigma = get_double(j, path, "sigma", 0.0);
  } else if (p.kind == "logistic") {
    check_keys(j, path, {"kind", "reg", "data"});
    p.reg = get_double(j, path, "reg", 0.0);
    p.data = parse_data(require_object(j, path, "data"), join_path(path, "data"));
  } else if (p.kind == "mlp") {
    check_keys(j, path, {"kind", "layer_sizes", "data"});
    const auto it = j.find("layer_sizes");
    if (it == j.end() || !it->is_array())
      fail(Errc::Config, "config key '" + join_path(path, "layer_sizes") + "' must be an array");
    for (const auto& v : *it) {
      if (!v.is_number_integer())
        fail(Errc::Config,
             "config key '" + join_path(path, "layer_sizes") + "' must hold integers");
      p.layer_sizes.push_back(v.get<long>());
    }
    p.data = parse_data(require_object(j, path, "data"), join_path(path, "data"));
  } else {
    fail(Errc::Config,
         "config key '" + join_path(path, "kind") + "' must be quadratic, logistic or mlp (got '" +
             p.kind + "')");
  }
  return p;
}

OptimizerConfig parse_optimizer(const json& j, const std::string& path, bool schedule_present) {
  OptimizerConfig c;
  if (schedule_present) {
    // The schedule fixes everything except the base step size.
    check_keys(j, path, {"alpha"});
    c.alpha = get_double(j, path, "alpha");
    return c;
  }
  c.kind = optimizer_kind_from_string(get_string(j, path, "kind"));
  switch (c.kind) {
    case OptimizerKind::AdamPlus:
    case OptimizerKind::NadamPlus:
      check_keys(j, path, {"kind", "alpha", "beta", "a", "p", "eps0"});
      c.alpha = get_double(j, path, "alpha", 0.1);
      c.beta = get_double(j, path, "beta", 0.1);
      c.a = get_double(j, path, "a", 1.0);
      c.p = get_double(j, path, "p", 0.5);
      c.eps0 = get_double(j, path, "eps0", 1e-8);
      break;
    case OptimizerKind::Sgd:
      check_keys(j, path, {"kind", "alpha"});
      c.alpha = get_double(j, path, "alpha", 0.1);
      break;
    case OptimizerKind::MomentumSgd:
      check_keys(j, path, {"kind", "alpha", "momentum"});
      c.alpha = get_double(j, path, "alpha", 0.1);
      c.momentum = get_double(j, path, "momentum", 0.9);
      break;
    case OptimizerKind::Adagrad:
      check_keys(j, path, {"kind", "alpha", "adagrad_eps"});
      c.alpha = get_double(j, path, "alpha", 0.1);
      c.adagrad_eps = get_double(j, path, "adagrad_eps", 1e-8);
      break;
    case OptimizerKind::Adam:
      check_keys(j, path, {"kind", "alpha", "adam_beta1", "adam_beta2", "adam_eps"});
      c.alpha = get_double(j, path, "alpha", 1e-3);
      c.adam_beta1 = get_double(j, path, "adam_beta1", 0.9);
      c.adam_beta2 = get_double(j, path, "adam_beta2", 0.999);
      c.adam_eps = get_double(j, path, "adam_eps", 1e-8);
      break;
  }
  return c;
}

W0Spec parse_w0(const json& j, const std::string& path) {
  W0Spec w;
  w.kind = get_string(j, path, "kind");
  if (w.kind == "constant") {
    check_keys(j, path, {"kind", "value"});
    w.value = get_double(j, path, "value", 1.0);
  } else if (w.kind == "gaussian") {
    check_keys(j, path, {"kind", "scale", "seed"});
    w.scale = get_double(j, path, "scale", 1.0);
    w.seed = static_cast<std::uint64_t>(get_long(j, path, "seed", 0));
  } else if (w.kind == "values") {
    check_keys(j, path, {"kind", "values"});
    const auto it = j.find("values");
    if (it == j.end() || !it->is_array())
      fail(Errc::Config, "config key '" + join_path(path, "values") + "' must be an array");
    for (const auto& v : *it) {
      if (!v.is_number())
        fail(Errc::Config, "config key '" + join_path(path, "values") + "' must hold numbers");
      w.values.push_back(v.get<double>());
    }
  } else {
    fail(Errc::Config, "config key '" + join_path(path, "kind") +
                           "' must be constant, gaussian or values (got '" + w.kind + "')");
  }
  return w;
}

const std::set<std::string> kDiagnosticNames = {"lemma1", "quadratic_recursion", "theorem1",
                                                "theorem2", "growth"};

}  // namespace

ExperimentConfig parse_experiment_config(const std::string& json_text) {
  json top;
  try {
    top = json::parse(json_text);
  } catch (const json::parse_error& e) {
    fail(Errc::Parse, std::string("config is not valid JSON: ") + e.what());
  }
  if (!top.is_object()) fail(Errc::Config, "config root must be a JSON object");
  check_keys(top, "",
             {"problem", "optimizer", "schedule", "w0", "T", "batch_size", "initial_batch",
              "seeds", "diagnostics", "output_dir"});

  ExperimentConfig cfg;
  const bool schedule_present = top.contains("schedule");
  if (schedule_present) {
    for (const char* k : {"T", "batch_size", "initial_batch"})
      if (top.contains(k))
        fail(Errc::Config,
             std::string("config key '") + k + "' conflicts with 'schedule', which sets it");
    const json& s = require_object(top, "", "schedule");
    check_keys(s, "schedule", {"name", "epsilon"});
    ScheduleSpec sched;
    sched.name = get_string(s, "schedule", "name");
    if (sched.name != "theorem3" && sched.name != "appendixE")
      fail(Errc::Config,
           "config key 'schedule.name' must be theorem3 or appendixE (got '" + sched.name + "')");
    sched.epsilon = get_double(s, "schedule", "epsilon");
    cfg.schedule = sched;
  } else {
    cfg.T = get_long(top, "", "T");
    cfg.batch_size = get_long(top, "", "batch_size", 1);
    cfg.initial_batch = get_long(top, "", "initial_batch", 1);
  }

  cfg.problem = parse_problem(require_object(top, "", "problem"), "problem");
  cfg.optimizer = parse_optimizer(require_object(top, "", "optimizer"), "optimizer",
                                  schedule_present);
  if (top.contains("w0")) cfg.w0 = parse_w0(require_object(top, "", "w0"), "w0");

  {
    const auto it = top.find("seeds");
    if (it == top.end()) fail(Errc::Config, "missing config key 'seeds'");
    if (!it->is_array() || it->empty())
      fail(Errc::Config, "config key 'seeds' must be a nonempty array");
    std::set<std::uint64_t> seen;
    for (const auto& v : *it) {
      if (!v.is_number_integer())
        fail(Errc::Config, "config key 'seeds' must hold nonnegative integers");
      if (!v.is_number_unsigned() && v.get<long long>() < 0)
        fail(Errc::Config, "config key 'seeds' must hold nonnegative integers");
      const auto seed = v.get<std::uint64_t>();
      if (!seen.insert(seed).second)
        fail(Errc::Config, "config key 'seeds' has duplicate seed " + std::to_string(seed));
      cfg.seeds.push_back(seed);
    }
  }

  if (top.contains("diagnostics")) {
    const auto& it = top.at("diagnostics");
    if (!it.is_array()) fail(Errc::Config, "config key 'diagnostics' must be an array");
    std::set<std::string> seen;
    for (const auto& v : it) {
      if (!v.is_string()) fail(Errc::Config, "config key 'diagnostics' must hold strings");
      const auto name = v.get<std::string>();
      if (!kDiagnosticNames.count(name))
        fail(Errc::Config, "unknown diagnostic '" + name +
                               "': expected lemma1, quadratic_recursion, theorem1, theorem2 or "
                               "growth");
      if (!seen.insert(name).second)
        fail(Errc::Config, "config key 'diagnostics' repeats '" + name + "'");
      cfg.diagnostics.push_back(name);
    }
  }

  if (top.contains("output_dir")) cfg.output_dir = get_string(top, "", "output_dir");
  return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  return parse_experiment_config(read_text_file(path));
}

ExperimentConfig resolve_config(const ExperimentConfig& config) {
  ExperimentConfig r = config;
  if (r.schedule) {
    ScheduleParams params;
    if (r.schedule->name == "theorem3") {
      params = theorem3_schedule(r.schedule->epsilon);
      r.optimizer = theorem3_optimizer(r.optimizer.alpha, params);
    } else if (r.schedule->name == "appendixE") {
      params = appendixE_schedule(r.schedule->epsilon);
      r.optimizer = appendixE_optimizer(r.optimizer.alpha, params);
    } else {
      fail(Errc::Config, "unknown schedule '" + r.schedule->name + "'");
    }
    r.T = params.T;
    r.batch_size = params.m;
    r.initial_batch = params.T0;
  }
  r.optimizer.validate();
  if (r.T < 1) fail(Errc::Config, "config: T must be >= 1");
  if (r.batch_size < 1) fail(Errc::Config, "config: batch_size must be >= 1");
  if (r.initial_batch < 1) fail(Errc::Config, "config: initial_batch must be >= 1");
  if (r.seeds.empty()) fail(Errc::Config, "config: seeds must be nonempty");

  for (const auto& name : r.diagnostics) {
    if (!kDiagnosticNames.count(name)) fail(Errc::Config, "unknown diagnostic '" + name + "'");
    if ((name == "lemma1" || name == "quadratic_recursion") && r.seeds.size() < 100)
      fail(Errc::Config,
           "diagnostic '" + name + "' needs >= 100 seeds, config has " +
               std::to_string(r.seeds.size()));
    if (name == "theorem1") {
      if (r.seeds.size() < 2) fail(Errc::Config, "diagnostic 'theorem1' needs >= 2 seeds");
      if (r.T < 2) fail(Errc::Config, "diagnostic 'theorem1' needs T >= 2");
    }
    if ((name == "lemma1" || name == "quadratic_recursion" || name == "theorem1") &&
        !r.optimizer.is_adamplus_family())
      fail(Errc::Config, "diagnostic '" + name + "' applies to adamplus-family optimizers only");
  }
  return r;
}

std::unique_ptr<Objective> build_objective(const ProblemSpec& problem) {
  if (problem.kind == "quadratic")
    return make_noisy_quadratic(problem.dim, problem.curvature_max, problem.sigma);

  Dataset data;
  if (problem.data.kind == "blobs") {
    data = make_blob_dataset(problem.data.blobs.n, problem.data.blobs.d,
                             problem.data.blobs.separation, problem.data.blobs.seed);
  } else if (problem.data.kind == "csv") {
    data = load_csv(problem.data.csv.path, problem.data.csv.label_column, problem.data.csv.header);
  } else if (problem.data.kind == "idx") {
    data = load_idx(problem.data.idx.images, problem.data.idx.labels, problem.data.idx.limit);
  } else {
    fail(Errc::Config, "problem.data: unknown data source '" + problem.data.kind + "'");
  }

  if (problem.kind == "logistic") return make_logistic(std::move(data), problem.reg);
  if (problem.kind == "mlp") return make_mlp(problem.layer_sizes, std::move(data));
  fail(Errc::Config, "unknown problem kind '" + problem.kind + "'");
}

Vector build_w0(const W0Spec& w0, Eigen::Index dim) {
  if (w0.kind == "constant") return Vector::Constant(dim, w0.value);
  if (w0.kind == "gaussian") {
    RngStream rng(w0.seed, 0xA011);
    Vector w(dim);
    for (Eigen::Index i = 0; i < dim; ++i) w[i] = w0.scale * rng.next_gaussian();
    return w;
  }
  if (w0.kind == "values") {
    if (static_cast<Eigen::Index>(w0.values.size()) != dim)
      fail(Errc::Config, "w0.values has " + std::to_string(w0.values.size()) +
                             " entries, problem dimension is " + std::to_string(dim));
    Vector w(dim);
    for (Eigen::Index i = 0; i < dim; ++i) w[i] = w0.values[static_cast<std::size_t>(i)];
    return w;
  }
  fail(Errc::Config, "unknown w0.kind '" + w0.kind + "'");
}

namespace {

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

MeanSe mean_se(const std::vector<double>& xs) {
  const auto n = static_cast<double>(xs.size());
  double mean = 0.0;
  for (const double x : xs) mean += x;
  mean /= n;
  if (xs.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (const double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / (n - 1.0)) / std::sqrt(n)};
}

Trajectory run_seed(const ExperimentConfig& r, const Objective& objective, const Vector& w0,
                    std::uint64_t seed) {
  RngStream rng(seed, 0);
  OptimizerState state = init(r.optimizer, w0, objective, r.initial_batch, rng);
  Trajectory traj;
  traj.reserve(static_cast<std::size_t>(r.T));
  double prev_cum = 0.0;
  const bool family = r.optimizer.is_adamplus_family();
  for (long t = 0; t < r.T; ++t) {
    const IterationRecord rec = record_iteration(state, objective, r.optimizer, prev_cum);
    prev_cum = rec.cum_z_norm;
    traj.push_back(rec);
    if (family) {
      adamplus_step(state, objective, r.batch_size, rng, r.optimizer);
    } else {
      const GradientSample g = oracle_sample(objective, state.w, r.batch_size, rng);
      baseline_step(state, g, r.optimizer);
    }
  }
  return traj;
}

std::vector<Trajectory> simulate_resolved(const ExperimentConfig& r, const Objective& objective,
                                          const Vector& w0, int threads) {
  const std::size_t S = r.seeds.size();
  std::vector<Trajectory> out(S);
  const int workers = std::max(1, std::min<int>(threads, static_cast<int>(S)));
  if (workers == 1) {
    for (std::size_t i = 0; i < S; ++i) out[i] = run_seed(r, objective, w0, r.seeds[i]);
    return out;
  }

  std::atomic<std::size_t> next{0};
  std::mutex err_mutex;
  std::exception_ptr first_error;
  auto work = [&]() {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= S) return;
      try {
        out[i] = run_seed(r, objective, w0, r.seeds[i]);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int i = 0; i < workers; ++i) pool.emplace_back(work);
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
  return out;
}

std::vector<AggregateRow> aggregate_trajectories(const std::vector<Trajectory>& trajs) {
  const std::size_t S = trajs.size();
  const std::size_t len = trajs.front().size();
  std::vector<AggregateRow> rows;
  rows.reserve(len);
  std::vector<double> buf(S);
  for (std::size_t t = 0; t < len; ++t) {
    AggregateRow row;
    row.t = trajs.front()[t].t;
    const auto fill = [&](auto getter, double& mean, double& se) {
      for (std::size_t s = 0; s < S; ++s) buf[s] = getter(trajs[s][t]);
      const MeanSe st = mean_se(buf);
      mean = st.mean;
      se = st.se;
    };
    fill([](const IterationRecord& r) { return r.f_value; }, row.f_value_mean, row.f_value_stderr);
    fill([](const IterationRecord& r) { return r.grad_norm; }, row.grad_norm_mean,
         row.grad_norm_stderr);
    fill([](const IterationRecord& r) { return r.grad_norm * r.grad_norm; }, row.grad_norm_sq_mean,
         row.grad_norm_sq_stderr);
    fill([](const IterationRecord& r) { return r.z_norm; }, row.z_norm_mean, row.z_norm_stderr);
    fill([](const IterationRecord& r) { return r.eta; }, row.eta_mean, row.eta_stderr);
    fill([](const IterationRecord& r) { return r.est_error; }, row.est_error_mean,
         row.est_error_stderr);
    fill([](const IterationRecord& r) { return r.est_error * r.est_error; }, row.est_error_sq_mean,
         row.est_error_sq_stderr);
    fill([](const IterationRecord& r) { return r.cum_z_norm; }, row.cum_z_norm_mean,
         row.cum_z_norm_stderr);
    rows.push_back(row);
  }
  return rows;
}

DiagnosticsReport run_diagnostics(const ExperimentConfig& r, const Objective& objective,
                                  const Vector& w0, const std::vector<Trajectory>& trajs) {
  DiagnosticsReport report;
  const ProblemConstants& constants = objective.constants();
  const auto oracle_variance = [&](long batch) -> double {
    if (!constants.noise_scale)
      fail(Errc::Config, "diagnostic needs a known oracle noise scale for this problem");
    const double sigma = *constants.noise_scale;
    return sigma * sigma / static_cast<double>(batch);
  };

  for (const std::string& name : r.diagnostics) {
    if (name == "lemma1") {
      if (!constants.hessian_smoothness)
        fail(Errc::Config, "diagnostic 'lemma1' needs a known Hessian smoothness constant");
      Lemma1Params params;
      params.alpha = r.optimizer.alpha;
      params.beta = r.optimizer.beta;
      params.a = r.optimizer.a;
      params.sigma_m_sq = oracle_variance(r.batch_size);
      params.hessian_smoothness = *constants.hessian_smoothness;
      report.lemma1 = lemma1_envelope_check(trajs, params);
      if (report.lemma1->violation_count > 0) {
        if (params.hessian_smoothness == 0.0) {
          report.hard_failure = true;
          report.notes.push_back("envelope check failed: " +
                                 std::to_string(report.lemma1->violation_count) +
                                 " transitions exceed the exact envelope");
        } else {
          report.notes.push_back("envelope check (advisory, L_H > 0): " +
                                 std::to_string(report.lemma1->violation_count) +
                                 " transitions outside the envelope");
        }
      }
    } else if (name == "quadratic_recursion") {
      if (r.problem.kind != "quadratic")
        fail(Errc::Config, "diagnostic 'quadratic_recursion' requires the quadratic problem");
      report.quadratic_recursion =
          quadratic_recursion_check(trajs, r.optimizer.beta, oracle_variance(r.batch_size));
      if (report.quadratic_recursion->violation_count > 0) {
        report.hard_failure = true;
        report.notes.push_back("quadratic recursion check failed: " +
                               std::to_string(report.quadratic_recursion->violation_count) +
                               " transitions deviate by more than 4 standard errors");
      }
    } else if (name == "theorem1") {
      Theorem1Inputs inputs;
      inputs.grad_bound = constants.grad_bound;
      if (constants.delta_cap) {
        inputs.delta = *constants.delta_cap;
      } else if (const auto f_star = objective.optimum_value()) {
        inputs.delta = objective.value(w0) - *f_star;
      } else {
        fail(Errc::Config,
             "diagnostic 'theorem1' needs delta: the problem has no known optimum or delta cap");
      }
      inputs.alpha = r.optimizer.alpha;
      inputs.beta = r.optimizer.beta;
      inputs.a = r.optimizer.a;
      inputs.eps0 = r.optimizer.eps0;
      inputs.sigma0_sq = oracle_variance(r.initial_batch);
      inputs.sigma_m_sq = oracle_variance(r.batch_size);
      inputs.T = r.T - 1;
      inputs.smoothness = constants.smoothness;
      inputs.hessian_smoothness = constants.hessian_smoothness;
      report.theorem1 = theorem1_bound_check(trajs, inputs);
      if (!report.theorem1->holds) {
        report.hard_failure = true;
        report.notes.push_back("ergodic bound check failed: lhs exceeds rhs by more than 3 "
                               "standard errors");
      }
    } else if (name == "theorem2") {
      ErgodicMetrics mean_metrics;
      for (const auto& traj : trajs) {
        const ErgodicMetrics m = theorem2_metric(traj);
        mean_metrics.grad_metric += m.grad_metric;
        mean_metrics.err_metric += m.err_metric;
      }
      mean_metrics.grad_metric /= static_cast<double>(trajs.size());
      mean_metrics.err_metric /= static_cast<double>(trajs.size());
      report.theorem2 = mean_metrics;
    } else if (name == "growth") {
      GrowthSummary growth;
      for (const auto& traj : trajs) {
        const GrowthCurve curve = growth_curve(traj);
        if (curve.kappa_valid) growth.per_seed_kappa.push_back(curve.kappa);
      }
      if (!growth.per_seed_kappa.empty()) {
        for (const double k : growth.per_seed_kappa) growth.mean_kappa += k;
        growth.mean_kappa /= static_cast<double>(growth.per_seed_kappa.size());
        growth.valid = true;
      }
      report.growth = growth;
    }
  }
  return report;
}

std::string seed_csv_name(std::uint64_t seed) { return "seed_" + std::to_string(seed) + ".csv"; }

std::string seed_csv_content(const Trajectory& traj) {
  std::string out = "t,f_value,grad_norm,z_norm,eta,est_error,cum_z_norm\n";
  out.reserve(out.size() + traj.size() * 140);
  for (const auto& rec : traj) {
    out += std::to_string(rec.t);
    out += ',';
    out += format_double(rec.f_value);
    out += ',';
    out += format_double(rec.grad_norm);
    out += ',';
    out += format_double(rec.z_norm);
    out += ',';
    out += format_double(rec.eta);
    out += ',';
    out += format_double(rec.est_error);
    out += ',';
    out += format_double(rec.cum_z_norm);
    out += '\n';
  }
  return out;
}

constexpr const char* kAggregateHeader =
    "t,f_value_mean,f_value_stderr,grad_norm_mean,grad_norm_stderr,grad_norm_sq_mean,"
    "grad_norm_sq_stderr,z_norm_mean,z_norm_stderr,eta_mean,eta_stderr,est_error_mean,"
    "est_error_stderr,est_error_sq_mean,est_error_sq_stderr,cum_z_norm_mean,cum_z_norm_stderr";

std::string aggregate_csv_content(const std::vector<AggregateRow>& rows) {
  std::string out = std::string(kAggregateHeader) + "\n";
  out.reserve(out.size() + rows.size() * 300);
  for (const auto& row : rows) {
    out += std::to_string(row.t);
    for (const double v :
         {row.f_value_mean, row.f_value_stderr, row.grad_norm_mean, row.grad_norm_stderr,
          row.grad_norm_sq_mean, row.grad_norm_sq_stderr, row.z_norm_mean, row.z_norm_stderr,
          row.eta_mean, row.eta_stderr, row.est_error_mean, row.est_error_stderr,
          row.est_error_sq_mean, row.est_error_sq_stderr, row.cum_z_norm_mean,
          row.cum_z_norm_stderr}) {
      out += ',';
      out += format_double(v);
    }
    out += '\n';
  }
  return out;
}

json record_to_json(const IterationRecord& rec) {
  return json{{"t", rec.t},
              {"f_value", rec.f_value},
              {"grad_norm", rec.grad_norm},
              {"z_norm", rec.z_norm},
              {"eta", rec.eta},
              {"est_error", rec.est_error},
              {"cum_z_norm", rec.cum_z_norm}};
}

json data_to_json(const DataSpec& d) {
  if (d.kind == "blobs")
    return json{{"blobs",
                 {{"n", d.blobs.n},
                  {"d", d.blobs.d},
                  {"separation", d.blobs.separation},
                  {"seed", d.blobs.seed}}}};
  if (d.kind == "csv")
    return json{{"csv",
                 {{"path", d.csv.path},
                  {"label_column", d.csv.label_column},
                  {"header", d.csv.header}}}};
  json x{{"images", d.idx.images}, {"labels", d.idx.labels}};
  if (d.idx.limit) x["limit"] = *d.idx.limit;
  return json{{"idx", x}};
}

json config_to_json(const ExperimentConfig& r) {
  json problem{{"kind", r.problem.kind}};
  if (r.problem.kind == "quadratic") {
    problem["dim"] = r.problem.dim;
    problem["curvature_max"] = r.problem.curvature_max;
    problem["sigma"] = r.problem.sigma;
  } else if (r.problem.kind == "logistic") {
    problem["reg"] = r.problem.reg;
    problem["data"] = data_to_json(r.problem.data);
  } else {
    problem["layer_sizes"] = r.problem.layer_sizes;
    problem["data"] = data_to_json(r.problem.data);
  }

  json optimizer{{"kind", to_string(r.optimizer.kind)}, {"alpha", r.optimizer.alpha}};
  if (r.optimizer.is_adamplus_family()) {
    optimizer["beta"] = r.optimizer.beta;
    optimizer["a"] = r.optimizer.a;
    optimizer["p"] = r.optimizer.p;
    optimizer["eps0"] = r.optimizer.eps0;
  } else if (r.optimizer.kind == OptimizerKind::MomentumSgd) {
    optimizer["momentum"] = r.optimizer.momentum;
  } else if (r.optimizer.kind == OptimizerKind::Adagrad) {
    optimizer["adagrad_eps"] = r.optimizer.adagrad_eps;
  } else if (r.optimizer.kind == OptimizerKind::Adam) {
    optimizer["adam_beta1"] = r.optimizer.adam_beta1;
    optimizer["adam_beta2"] = r.optimizer.adam_beta2;
    optimizer["adam_eps"] = r.optimizer.adam_eps;
  }

  json w0{{"kind", r.w0.kind}};
  if (r.w0.kind == "constant") w0["value"] = r.w0.value;
  if (r.w0.kind == "gaussian") {
    w0["scale"] = r.w0.scale;
    w0["seed"] = r.w0.seed;
  }
  if (r.w0.kind == "values") w0["values"] = r.w0.values;

  json out{{"problem", problem}, {"optimizer", optimizer}, {"w0", w0},
           {"T", r.T},           {"batch_size", r.batch_size}, {"initial_batch", r.initial_batch},
           {"seeds", r.seeds},   {"diagnostics", r.diagnostics}};
  if (r.schedule) out["schedule"] = json{{"name", r.schedule->name}, {"epsilon", r.schedule->epsilon}};
  if (r.output_dir) out["output_dir"] = *r.output_dir;
  return out;
}

json diagnostics_to_json(const DiagnosticsReport& rep) {
  json out{{"hard_failure", rep.hard_failure}, {"notes", rep.notes}};
  if (rep.lemma1) {
    double min_margin = std::numeric_limits<double>::infinity();
    for (const auto& e : rep.lemma1->entries) min_margin = std::min(min_margin, e.margin);
    out["lemma1"] = json{{"seeds", rep.lemma1->seeds_used},
                         {"transitions", rep.lemma1->entries.size()},
                         {"violations", rep.lemma1->violation_count},
                         {"min_margin", min_margin}};
  }
  if (rep.quadratic_recursion) {
    out["quadratic_recursion"] =
        json{{"seeds", rep.quadratic_recursion->seeds_used},
             {"transitions", rep.quadratic_recursion->entries.size()},
             {"violations", rep.quadratic_recursion->violation_count},
             {"max_abs_dev_over_se", rep.quadratic_recursion->max_abs_dev_over_se}};
  }
  if (rep.theorem1) {
    out["theorem1"] = json{{"lhs", rep.theorem1->lhs},
                           {"rhs", rep.theorem1->rhs},
                           {"holds", rep.theorem1->holds},
                           {"g_used", rep.theorem1->g_used},
                           {"g_estimated", rep.theorem1->g_estimated},
                           {"paired_stderr", rep.theorem1->paired_stderr}};
  }
  if (rep.theorem2) {
    out["theorem2"] = json{{"grad_metric", rep.theorem2->grad_metric},
                           {"err_metric", rep.theorem2->err_metric}};
  }
  if (rep.growth) {
    out["growth"] = json{{"mean_kappa", rep.growth->mean_kappa},
                         {"per_seed_kappa", rep.growth->per_seed_kappa},
                         {"valid", rep.growth->valid}};
  }
  return out;
}

std::string resolve_out_dir(const RunOptions& options, const ExperimentConfig& r) {
  if (options.out_dir) return *options.out_dir;
  if (r.output_dir) return *r.output_dir;
  if (const char* env = std::getenv("ADAMPLUS_OUT_DIR"); env != nullptr && *env != '\0')
    return env;
  return ".";
}

}  // namespace

std::vector<Trajectory> simulate(const ExperimentConfig& config, int threads) {
  const ExperimentConfig r = resolve_config(config);
  const auto objective = build_objective(r.problem);
  const Vector w0 = build_w0(r.w0, objective->dim());
  return simulate_resolved(r, *objective, w0, threads);
}

RunSummary run_experiment(const ExperimentConfig& config, const RunOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  const ExperimentConfig r = resolve_config(config);
  const auto objective = build_objective(r.problem);
  const Vector w0 = build_w0(r.w0, objective->dim());

  const std::vector<Trajectory> trajs = simulate_resolved(r, *objective, w0, options.threads);

  RunSummary summary;
  summary.config = r;
  summary.aggregate = aggregate_trajectories(trajs);
  for (std::size_t s = 0; s < trajs.size(); ++s)
    summary.per_seed.push_back(SeedFinal{r.seeds[s], trajs[s].back()});
  summary.diagnostics = run_diagnostics(r, *objective, w0, trajs);
  summary.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  if (!options.write_outputs) return summary;

  namespace fs = std::filesystem;
  const std::string out_dir = resolve_out_dir(options, r);
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) fail(Errc::Io, "cannot create output directory '" + out_dir + "': " + ec.message());

  summary.output_dir = out_dir;
  for (std::size_t s = 0; s < trajs.size(); ++s) {
    const std::string name = seed_csv_name(r.seeds[s]);
    write_text_file((fs::path(out_dir) / name).string(), seed_csv_content(trajs[s]));
    summary.seed_csvs.push_back(name);
  }
  summary.aggregate_csv = "aggregate.csv";
  write_text_file((fs::path(out_dir) / summary.aggregate_csv).string(),
                  aggregate_csv_content(summary.aggregate));

  json doc{{"config", config_to_json(r)},
           {"diagnostics", diagnostics_to_json(summary.diagnostics)},
           {"wall_clock_seconds", summary.wall_clock_seconds},
           {"files", json{{"seed_csvs", summary.seed_csvs},
                          {"aggregate_csv", summary.aggregate_csv}}}};
  json per_seed = json::array();
  for (const auto& sf : summary.per_seed)
    per_seed.push_back(json{{"seed", sf.seed}, {"final", record_to_json(sf.final_record)}});
  doc["per_seed"] = per_seed;

  summary.summary_path = (fs::path(out_dir) / "summary.json").string();
  write_text_file(summary.summary_path, doc.dump(2) + "\n");
  return summary;
}

RunSummary run_seed_sweep(const ExperimentConfig& config, const RunOptions& options) {
  if (config.seeds.size() < 2)
    fail(Errc::InsufficientSeeds,
         "seed sweep needs at least 2 seeds, got " + std::to_string(config.seeds.size()));
  return run_experiment(config, options);
}

namespace {

struct SeriesColumns {
  const char* label;
  double AggregateRow::* mean;
  double AggregateRow::* se;
};

SeriesColumns series_columns(const std::string& series) {
  if (series == "growth")
    return {"cum_z_norm", &AggregateRow::cum_z_norm_mean, &AggregateRow::cum_z_norm_stderr};
  if (series == "convergence")
    return {"grad_norm_sq", &AggregateRow::grad_norm_sq_mean, &AggregateRow::grad_norm_sq_stderr};
  if (series == "variance")
    return {"est_error_sq", &AggregateRow::est_error_sq_mean, &AggregateRow::est_error_sq_stderr};
  fail(Errc::Config,
       "unknown series '" + series + "': expected growth, convergence or variance");
}

}  // namespace

void emit_plot_data(const RunSummary& summary, const std::string& series,
                    const std::string& out_path) {
  const SeriesColumns cols = series_columns(series);
  std::string out = "# series: " + series + " (" + cols.label + ")\n# t mean stderr\n";
  for (const auto& row : summary.aggregate) {
    out += std::to_string(row.t);
    out += ' ';
    out += format_double(row.*cols.mean);
    out += ' ';
    out += format_double(row.*cols.se);
    out += '\n';
  }
  write_text_file(out_path, out);
}

void emit_plot_data(const std::string& summary_path, const std::string& series,
                    const std::string& out_path) {
  json doc;
  try {
    doc = json::parse(read_text_file(summary_path));
  } catch (const json::parse_error& e) {
    fail(Errc::Parse, "summary file is not valid JSON: " + std::string(e.what()));
  }
  if (!doc.contains("files") || !doc["files"].contains("aggregate_csv"))
    fail(Errc::Parse, summary_path + ": missing files.aggregate_csv entry");
  const std::string rel = doc["files"]["aggregate_csv"].get<std::string>();
  const auto csv_path = std::filesystem::path(summary_path).parent_path() / rel;

  RunSummary summary;
  summary.aggregate = read_aggregate_csv(csv_path.string());
  emit_plot_data(summary, series, out_path);
}

std::vector<AggregateRow> read_aggregate_csv(const std::string& path) {
  const std::string text = read_text_file(path);
  std::vector<AggregateRow> rows;
  std::size_t pos = 0;
  long line_no = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string::npos) eol = text.size();
    std::string_view line(text.data() + pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    if (line_no == 1) {
      if (line != kAggregateHeader)
        fail(Errc::Parse, path + ": unexpected aggregate CSV header");
      continue;
    }
    AggregateRow row;
    double vals[16];
    std::size_t field = 0;
    std::size_t start = 0;
    while (field < 17) {
      std::size_t comma = line.find(',', start);
      if (comma == std::string_view::npos) comma = line.size();
      const std::string_view tok = line.substr(start, comma - start);
      if (field == 0) {
        const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), row.t);
        if (res.ec != std::errc())
          fail(Errc::Parse, path + ": line " + std::to_string(line_no) + ": bad t value");
      } else {
        const auto res =
            std::from_chars(tok.data(), tok.data() + tok.size(), vals[field - 1]);
        if (res.ec != std::errc())
          fail(Errc::Parse, path + ": line " + std::to_string(line_no) + ": bad number in field " +
                                std::to_string(field + 1));
      }
      ++field;
      if (comma == line.size()) break;
      start = comma + 1;
    }
    if (field != 17)
      fail(Errc::Parse,
           path + ": line " + std::to_string(line_no) + " has " + std::to_string(field) +
               " fields, expected 17");
    row.f_value_mean = vals[0];
    row.f_value_stderr = vals[1];
    row.grad_norm_mean = vals[2];
    row.grad_norm_stderr = vals[3];
    row.grad_norm_sq_mean = vals[4];
    row.grad_norm_sq_stderr = vals[5];
    row.z_norm_mean = vals[6];
    row.z_norm_stderr = vals[7];
    row.eta_mean = vals[8];
    row.eta_stderr = vals[9];
    row.est_error_mean = vals[10];
    row.est_error_stderr = vals[11];
    row.est_error_sq_mean = vals[12];
    row.est_error_sq_stderr = vals[13];
    row.cum_z_norm_mean = vals[14];
    row.cum_z_norm_stderr = vals[15];
    rows.push_back(row);
  }
  if (rows.empty()) fail(Errc::Parse, path + ": no data rows");
  return rows;
}

}  // namespace adamplus
