#include "adamplus/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace adamplus {

namespace {

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

// Sample mean and its standard error (sample sd / sqrt(n); zero when n = 1).
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

std::size_t common_length(const std::vector<Trajectory>& trajectories, const char* who,
                          std::size_t min_len) {
  if (trajectories.empty()) fail(Errc::InvalidArgument, std::string(who) + ": no trajectories");
  const std::size_t len = trajectories.front().size();
  for (const auto& traj : trajectories)
    if (traj.size() != len)
      fail(Errc::InvalidArgument, std::string(who) + ": trajectories have unequal lengths");
  if (len < min_len)
    fail(Errc::InvalidArgument, std::string(who) + ": trajectories need at least " +
                                    std::to_string(min_len) + " records, got " +
                                    std::to_string(len));
  return len;
}

}  // namespace

IterationRecord record_iteration(const OptimizerState& state, const Objective& objective,
                                 const OptimizerConfig& config, double prev_cum) {
  if (state.w.size() != objective.dim())
    fail(Errc::DimensionMismatch, "record_iteration: state does not match objective dimension");
  IterationRecord rec;
  rec.t = state.t;
  rec.f_value = objective.value(state.w);
  Vector grad;
  objective.gradient(state.w, grad);
  rec.grad_norm = grad.norm();
  rec.z_norm = state.z.norm();
  rec.eta = config.is_adamplus_family() ? step_size(state.z, config) : config.alpha;
  rec.est_error = (state.z - grad).norm();
  rec.cum_z_norm = prev_cum + rec.z_norm;
  return rec;
}

EnvelopeReport lemma1_envelope_check(const std::vector<Trajectory>& trajectories,
                                     const Lemma1Params& params) {
  if (trajectories.size() < 100)
    fail(Errc::InsufficientSeeds, "envelope check: expectation estimates need >= 100 seeds, got " +
                                      std::to_string(trajectories.size()));
  const std::size_t len = common_length(trajectories, "envelope check", 2);
  if (!(params.beta > 0.0) || !(params.beta <= 1.0))
    fail(Errc::InvalidArgument, "envelope check: beta must lie in (0, 1]");
  if (!(params.alpha > 0.0)) fail(Errc::InvalidArgument, "envelope check: alpha must be positive");
  if (!(params.sigma_m_sq >= 0.0) || !(params.hessian_smoothness >= 0.0))
    fail(Errc::InvalidArgument, "envelope check: sigma_m_sq and L_H must be nonnegative");

  const double beta = params.beta;
  const double curvature_coef = kEnvelopeConstant * params.hessian_smoothness *
                                params.hessian_smoothness * std::pow(params.alpha, 4.0) *
                                std::pow(beta, 4.0 * params.a - 3.0);
  const double noise_term = 2.0 * beta * beta * params.sigma_m_sq;

  EnvelopeReport report;
  report.seeds_used = static_cast<long>(trajectories.size());
  report.entries.reserve(len - 1);

  std::vector<double> paired(trajectories.size());
  std::vector<double> e_next_sq(trajectories.size());
  std::vector<double> e_cur_sq(trajectories.size());
  std::vector<double> z_cur_sq(trajectories.size());

  for (std::size_t t = 0; t + 1 < len; ++t) {
    for (std::size_t s = 0; s < trajectories.size(); ++s) {
      const auto& cur = trajectories[s][t];
      const auto& nxt = trajectories[s][t + 1];
      e_cur_sq[s] = cur.est_error * cur.est_error;
      e_next_sq[s] = nxt.est_error * nxt.est_error;
      z_cur_sq[s] = cur.z_norm * cur.z_norm;
      paired[s] = e_next_sq[s] - (1.0 - 0.5 * beta) * e_cur_sq[s] - curvature_coef * z_cur_sq[s];
    }
    const MeanSe stat = mean_se(paired);
    const MeanSe cur_stat = mean_se(e_cur_sq);
    const MeanSe next_stat = mean_se(e_next_sq);
    const MeanSe z_stat = mean_se(z_cur_sq);

    EnvelopeEntry entry;
    entry.t = trajectories.front()[t + 1].t;
    entry.empirical = next_stat.mean;
    entry.envelope =
        (1.0 - 0.5 * beta) * cur_stat.mean + noise_term + curvature_coef * z_stat.mean;
    entry.stderr_ = stat.se;
    entry.margin = noise_term + 3.0 * stat.se - stat.mean;
    if (entry.margin < 0.0) ++report.violation_count;
    report.entries.push_back(entry);
  }
  return report;
}

RecursionReport quadratic_recursion_check(const std::vector<Trajectory>& trajectories, double beta,
                                          double sigma_m_sq) {
  if (trajectories.size() < 100)
    fail(Errc::InsufficientSeeds, "recursion check: expectation estimates need >= 100 seeds, got " +
                                      std::to_string(trajectories.size()));
  const std::size_t len = common_length(trajectories, "recursion check", 2);
  if (!(beta > 0.0) || !(beta <= 1.0))
    fail(Errc::InvalidArgument, "recursion check: beta must lie in (0, 1]");
  if (!(sigma_m_sq >= 0.0))
    fail(Errc::InvalidArgument, "recursion check: sigma_m_sq must be nonnegative");

  const double decay = (1.0 - beta) * (1.0 - beta);
  const double inject = beta * beta * sigma_m_sq;

  RecursionReport report;
  report.seeds_used = static_cast<long>(trajectories.size());
  report.entries.reserve(len - 1);

  std::vector<double> paired(trajectories.size());
  for (std::size_t t = 0; t + 1 < len; ++t) {
    for (std::size_t s = 0; s < trajectories.size(); ++s) {
      const auto& cur = trajectories[s][t];
      const auto& nxt = trajectories[s][t + 1];
      paired[s] =
          nxt.est_error * nxt.est_error - decay * cur.est_error * cur.est_error - inject;
    }
    const MeanSe stat = mean_se(paired);

    RecursionEntry entry;
    entry.t = trajectories.front()[t + 1].t;
    entry.mean_dev = stat.mean;
    entry.stderr_ = stat.se;
    report.entries.push_back(entry);

    if (stat.se > 0.0) {
      const double ratio = std::abs(stat.mean) / stat.se;
      report.max_abs_dev_over_se = std::max(report.max_abs_dev_over_se, ratio);
      if (ratio > 4.0) ++report.violation_count;
    } else if (stat.mean != 0.0) {
      report.max_abs_dev_over_se = std::numeric_limits<double>::infinity();
      ++report.violation_count;
    }
  }
  return report;
}

BoundReport theorem1_bound_check(const std::vector<Trajectory>& trajectories,
                                 const Theorem1Inputs& inputs) {
  if (trajectories.size() < 2)
    fail(Errc::InsufficientSeeds, "bound check: need >= 2 seeds for a standard error, got " +
                                      std::to_string(trajectories.size()));
  if (inputs.T < 1) fail(Errc::InvalidArgument, "bound check: T must be >= 1");
  common_length(trajectories, "bound check", static_cast<std::size_t>(inputs.T) + 1);
  if (!(inputs.alpha > 0.0) || !(inputs.beta > 0.0) || !(inputs.beta <= 1.0))
    fail(Errc::InvalidArgument, "bound check: alpha must be positive and beta in (0, 1]");
  if (!(inputs.delta >= 0.0) || !(inputs.sigma0_sq >= 0.0) || !(inputs.sigma_m_sq >= 0.0))
    fail(Errc::InvalidArgument, "bound check: delta and noise variances must be nonnegative");

  // Premises the bound is valid under.
  if (!inputs.smoothness)
    fail(Errc::PremiseUnmet, "theorem premises unmet: smoothness constant L is unknown");
  if (!inputs.hessian_smoothness)
    fail(Errc::PremiseUnmet, "theorem premises unmet: Hessian smoothness constant is unknown");
  const double L = *inputs.smoothness;
  const double L_H = *inputs.hessian_smoothness;
  if (inputs.a != 1.0)
    fail(Errc::PremiseUnmet,
         "theorem premises unmet: requires a = 1, got a = " + std::to_string(inputs.a));
  const double eps0_target = inputs.beta;  // beta^a with a = 1
  if (std::abs(inputs.eps0 - eps0_target) > 1e-12 * eps0_target)
    fail(Errc::PremiseUnmet, "theorem premises unmet: requires eps0 = beta^a, got eps0 = " +
                                 std::to_string(inputs.eps0));
  const double alpha_cap = 1.0 / (4.0 * L);
  if (inputs.alpha > alpha_cap * (1.0 + 1e-12))
    fail(Errc::PremiseUnmet, "theorem premises unmet: alpha <= 1/(4L) fails (alpha = " +
                                 std::to_string(inputs.alpha) + ", 1/(4L) = " +
                                 std::to_string(alpha_cap) + ")");
  const double quartic = 36.0 * kEnvelopeConstant * L_H * L_H * std::pow(inputs.alpha, 4.0);
  if (quartic > 1.0 + 1e-12)
    fail(Errc::PremiseUnmet,
         "theorem premises unmet: 36 C L_H^2 alpha^4 <= 1 fails (lhs = " + std::to_string(quartic) +
             ")");

  const auto T = static_cast<std::size_t>(inputs.T);
  const auto S = trajectories.size();

  double g_used = 0.0;
  bool g_estimated = false;
  if (inputs.grad_bound) {
    g_used = *inputs.grad_bound;
    if (!(g_used > 0.0)) fail(Errc::InvalidArgument, "bound check: grad_bound must be positive");
  } else {
    double max_grad = 0.0;
    for (const auto& traj : trajectories)
      for (std::size_t t = 0; t <= T; ++t) max_grad = std::max(max_grad, traj[t].grad_norm);
    g_used = 1.1 * max_grad;
    g_estimated = true;
  }

  std::vector<double> lhs_per_seed(S);
  std::vector<double> zsum_per_seed(S);
  std::vector<double> paired(S);
  for (std::size_t s = 0; s < S; ++s) {
    double grad_sq = 0.0;
    double z_sum = 0.0;
    for (std::size_t t = 1; t <= T; ++t) {
      grad_sq += trajectories[s][t].grad_norm * trajectories[s][t].grad_norm;
      z_sum += trajectories[s][t].z_norm;
    }
    lhs_per_seed[s] = grad_sq / static_cast<double>(T);
    zsum_per_seed[s] = z_sum;
    paired[s] = lhs_per_seed[s] - 8.0 * g_used * z_sum / static_cast<double>(T);
  }

  const double deterministic = inputs.delta / (inputs.alpha * static_cast<double>(T)) +
                               18.0 * inputs.sigma0_sq / (inputs.beta * static_cast<double>(T)) +
                               30.0 * inputs.beta * inputs.sigma_m_sq;

  const MeanSe lhs_stat = mean_se(lhs_per_seed);
  const MeanSe zsum_stat = mean_se(zsum_per_seed);
  const MeanSe paired_stat = mean_se(paired);

  BoundReport report;
  report.lhs = lhs_stat.mean;
  report.rhs = 8.0 * g_used * zsum_stat.mean / static_cast<double>(T) + deterministic;
  report.g_used = g_used;
  report.g_estimated = g_estimated;
  report.paired_stderr = paired_stat.se;
  report.holds = paired_stat.mean <= deterministic + 3.0 * paired_stat.se;
  return report;
}

ErgodicMetrics theorem2_metric(const Trajectory& trajectory) {
  if (trajectory.empty()) fail(Errc::InvalidArgument, "ergodic metric: trajectory is empty");
  ErgodicMetrics m;
  for (const auto& rec : trajectory) {
    m.grad_metric += std::pow(rec.grad_norm, 1.5);
    m.err_metric += std::pow(rec.est_error, 1.5);
  }
  m.grad_metric /= static_cast<double>(trajectory.size());
  m.err_metric /= static_cast<double>(trajectory.size());
  return m;
}

GrowthCurve growth_curve(const Trajectory& trajectory) {
  if (trajectory.empty()) fail(Errc::InvalidArgument, "growth curve: trajectory is empty");
  GrowthCurve curve;
  curve.t.reserve(trajectory.size());
  curve.cum_z_norm.reserve(trajectory.size());
  for (const auto& rec : trajectory) {
    curve.t.push_back(rec.t);
    curve.cum_z_norm.push_back(rec.cum_z_norm);
  }
  const long last_t = trajectory.back().t;
  if (static_cast<long>(trajectory.size()) >= 10) {
    const long begin = std::max<long>(1, trajectory[trajectory.size() / 2].t);
    try {
      curve.kappa = fit_growth_exponent(trajectory, begin, last_t + 1);
      curve.kappa_valid = true;
    } catch (const Error&) {
      curve.kappa_valid = false;  // degenerate tail (e.g. cum stays zero)
    }
  }
  return curve;
}

double fit_growth_exponent(const Trajectory& trajectory, long t_begin, long t_end) {
  if (t_begin >= t_end)
    fail(Errc::InvalidArgument, "growth exponent fit: empty iteration range");
  std::vector<double> xs;
  std::vector<double> ys;
  for (const auto& rec : trajectory) {
    if (rec.t < t_begin || rec.t >= t_end || rec.t < 1) continue;
    if (!(rec.cum_z_norm > 0.0)) continue;  // log undefined
    xs.push_back(std::log(static_cast<double>(rec.t)));
    ys.push_back(std::log(rec.cum_z_norm));
  }
  if (xs.size() < 10)
    fail(Errc::InvalidArgument, "growth exponent fit: needs at least 10 usable points, got " +
                                    std::to_string(xs.size()));
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= static_cast<double>(xs.size());
  my /= static_cast<double>(xs.size());
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  if (!(sxx > 0.0)) fail(Errc::InvalidArgument, "growth exponent fit: degenerate time range");
  return sxy / sxx;
}

Vector closed_form_z(const std::vector<Vector>& gradient_history, double beta) {
  if (gradient_history.empty())
    fail(Errc::InvalidArgument, "closed_form_z: gradient history is empty");
  if (!(beta > 0.0) || !(beta <= 1.0))
    fail(Errc::InvalidArgument, "closed_form_z: beta must lie in (0, 1]");
  const auto dim = gradient_history.front().size();
  for (const auto& g : gradient_history)
    if (g.size() != dim)
      fail(Errc::DimensionMismatch, "closed_form_z: gradients have unequal dimensions");

  const auto t = static_cast<long>(gradient_history.size()) - 1;
  Vector z = std::pow(1.0 - beta, static_cast<double>(t)) * gradient_history.front();
  for (long k = 1; k <= t; ++k)
    z += beta * std::pow(1.0 - beta, static_cast<double>(t - k)) *
         gradient_history[static_cast<std::size_t>(k)];
  return z;
}

}  // namespace adamplus
