#pragma once

#include <optional>
#include <vector>

#include "adamplus/objective.hpp"
#include "adamplus/optimizer.hpp"

namespace adamplus {

// Constant in the second-moment envelope (with the Hessian-smoothness term
// C * L_H^2 * alpha^4 * beta^(4a-3) * |z|^2).
inline constexpr double kEnvelopeConstant = 1944.0;

// Per-iteration observables of a run. est_error is |z_t - grad F(w_t)|, the
// quantity the variance envelope controls; cum_z_norm is sum_{i<=t} |z_i|.
struct IterationRecord {
  long t = 0;
  double f_value = 0.0;
  double grad_norm = 0.0;
  double z_norm = 0.0;
  double eta = 0.0;
  double est_error = 0.0;
  double cum_z_norm = 0.0;
};

using Trajectory = std::vector<IterationRecord>;

// Snapshot of the current state. eta is the step size the state's z implies
// (config.alpha for baselines); prev_cum is the previous record's cum_z_norm,
// 0 at t = 0. Costs one exact gradient.
IterationRecord record_iteration(const OptimizerState& state, const Objective& objective,
                                 const OptimizerConfig& config, double prev_cum);

// ---------------------------------------------------------------------------
// Second-moment envelope: across seeds, for consecutive iterations,
//   E[e_{t+1}^2] <= (1 - beta/2) E[e_t^2] + 2 beta^2 sigma_m^2
//                   + C L_H^2 alpha^4 beta^(4a-3) E[|z_t|^2].
// The check is Monte-Carlo: a transition counts as a violation only when the
// empirical mean exceeds the envelope by more than three standard errors of
// the paired per-seed statistic.

struct Lemma1Params {
  double alpha = 0.0;
  double beta = 0.0;
  double a = 1.0;
  double sigma_m_sq = 0.0;          // oracle noise variance per step
  double hessian_smoothness = 0.0;  // L_H
};

struct EnvelopeEntry {
  long t = 0;          // transition t -> t+1
  double empirical = 0.0;  // mean e_{t+1}^2
  double envelope = 0.0;   // envelope evaluated on mean e_t^2 and mean |z_t|^2
  double stderr_ = 0.0;    // standard error of the paired statistic
  double margin = 0.0;     // envelope + 3 stderr - empirical; negative = violation
};

struct EnvelopeReport {
  std::vector<EnvelopeEntry> entries;
  long violation_count = 0;
  long seeds_used = 0;
};

// Requires >= 100 equal-length trajectories (expectations are seed averages).
EnvelopeReport lemma1_envelope_check(const std::vector<Trajectory>& trajectories,
                                     const Lemma1Params& params);

// ---------------------------------------------------------------------------
// On quadratics the gradient is linear, so the error recursion is exact:
//   E[e_{t+1}^2] = (1 - beta)^2 E[e_t^2] + beta^2 sigma_m^2.
// Checks the per-seed statistic
//   X_s = e_{t+1}^2 - (1-beta)^2 e_t^2 - beta^2 sigma_m^2
// has |mean| <= 4 standard errors at every transition.

struct RecursionEntry {
  long t = 0;
  double mean_dev = 0.0;
  double stderr_ = 0.0;
};

struct RecursionReport {
  std::vector<RecursionEntry> entries;
  long violation_count = 0;
  double max_abs_dev_over_se = 0.0;
  long seeds_used = 0;
};

RecursionReport quadratic_recursion_check(const std::vector<Trajectory>& trajectories, double beta,
                                          double sigma_m_sq);

// ---------------------------------------------------------------------------
// Ergodic bound evaluator:
//   (1/T) sum_t E|grad F(w_t)|^2 <=
//     8 G E[sum_t |z_t|]/T + delta/(alpha T) + 18 sigma_0^2/(beta T)
//     + 30 beta sigma_m^2,
// over t = 1..T. Valid under the premises a = 1, eps0 = beta, alpha <= 1/(4L)
// and 36 C L_H^2 alpha^4 <= 1; premise violations raise Errc::PremiseUnmet
// naming the failed inequality.

struct Theorem1Inputs {
  std::optional<double> grad_bound;  // G; estimated from data when unset
  double delta = 0.0;                // F(w0) - inf F
  double alpha = 0.0;
  double beta = 0.0;
  double a = 1.0;
  double eps0 = 0.0;
  double sigma0_sq = 0.0;  // variance of the initial moment estimate
  double sigma_m_sq = 0.0;
  long T = 0;
  std::optional<double> smoothness;          // L
  std::optional<double> hessian_smoothness;  // L_H
};

struct BoundReport {
  double lhs = 0.0;
  double rhs = 0.0;
  double g_used = 0.0;
  bool g_estimated = false;
  double paired_stderr = 0.0;  // standard error of the per-seed lhs-minus-z-term
  bool holds = false;          // lhs <= rhs + 3 paired_stderr
};

// Each trajectory must contain records t = 0..T (the t = 0 record is skipped;
// the bound runs over t = 1..T). Needs >= 2 seeds for a standard error.
BoundReport theorem1_bound_check(const std::vector<Trajectory>& trajectories,
                                 const Theorem1Inputs& inputs);

// ---------------------------------------------------------------------------

struct ErgodicMetrics {
  double grad_metric = 0.0;  // mean |grad F|^(3/2) over the records
  double err_metric = 0.0;   // mean est_error^(3/2)
};

ErgodicMetrics theorem2_metric(const Trajectory& trajectory);

// ---------------------------------------------------------------------------

struct GrowthCurve {
  std::vector<long> t;
  std::vector<double> cum_z_norm;
  double kappa = 0.0;  // log-log slope fitted over the last half (t >= 1)
  bool kappa_valid = false;
};

// Cumulative |z| series plus fitted growth exponent. Runs shorter than 10
// iterations return the series with the fit refused (kappa_valid = false).
GrowthCurve growth_curve(const Trajectory& trajectory);

// Least-squares slope of log cum_z_norm against log t over records with
// t_begin <= t < t_end (rows with t = 0 are ignored). Requires >= 10 usable
// points.
double fit_growth_exponent(const Trajectory& trajectory, long t_begin, long t_end);

// ---------------------------------------------------------------------------
// Closed-form moving average: with gradients h_0 = g_0(w_0) and
// h_k = g_k(what_k) for k >= 1,
//   z_t = (1-beta)^t h_0 + sum_{k=1..t} beta (1-beta)^(t-k) h_k.
// Independent reference for the recursive update; the weights sum to one.
Vector closed_form_z(const std::vector<Vector>& gradient_history, double beta);

}  // namespace adamplus
