#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>

#include "adamplus/error.hpp"
#include "adamplus/objective.hpp"

namespace adamplus {

enum class OptimizerKind { AdamPlus, NadamPlus, Sgd, MomentumSgd, Adagrad, Adam };

std::string to_string(OptimizerKind kind);
OptimizerKind optimizer_kind_from_string(const std::string& name);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::AdamPlus;

  // Adam+/Nadam+ family. The step size is alpha * beta^a / max(|z|^p, eps0);
  // AdamPlus is the p = 1/2 member and keeps p pinned there.
  double alpha = 0.1;
  double beta = 0.1;
  double a = 1.0;
  double p = 0.5;
  double eps0 = 1e-8;

  // Baselines.
  double momentum = 0.9;      // MomentumSgd buffer decay
  double adam_beta1 = 0.9;    // Adam first-moment decay
  double adam_beta2 = 0.999;  // Adam second-moment decay
  double adam_eps = 1e-8;
  double adagrad_eps = 1e-8;

  bool is_adamplus_family() const {
    return kind == OptimizerKind::AdamPlus || kind == OptimizerKind::NadamPlus;
  }

  // Throws Errc::Config on out-of-range values.
  void validate() const;
};

// Default Adam+ configuration: alpha 0.1, beta 0.1, a 1, p 1/2, eps0 1e-8.
OptimizerConfig adamplus_defaults();

// Nadam+ member with explicit exponents.
OptimizerConfig nadamplus_config(double alpha, double beta, double a, double p, double eps0);

// Normalized-momentum-style member: Nadam+ with p = 1 and a = 5/4.
OptimizerConfig nigt_style_config(double alpha, double beta);

struct OptimizerState {
  long t = 0;
  Vector w;
  Vector z;               // extrapolated-gradient moving average
  double eta_last = 0.0;  // step size used by the most recent step

  // Baseline accumulators; sized on first use.
  Vector velocity;     // MomentumSgd
  Vector grad_sq_sum;  // Adagrad
  Vector adam_m;
  Vector adam_v;
};

// Step size alpha * beta^a / max(norm_z^p, eps0). Errors with
// Errc::DegenerateStepSize when the denominator is zero (eps0 = 0 and z = 0).
double step_size_from_norm(double z_norm, const OptimizerConfig& config);

template <typename Derived>
double step_size(const Eigen::MatrixBase<Derived>& z, const OptimizerConfig& config) {
  return step_size_from_norm(z.norm(), config);
}

// Point the next gradient is sampled at:
//   (1 - 1/beta) * w_t + (1/beta) * w_next.
template <typename DA, typename DB>
Vector extrapolate(const Eigen::MatrixBase<DA>& w_t, const Eigen::MatrixBase<DB>& w_next,
                   double beta) {
  if (w_t.size() != w_next.size())
    fail(Errc::DimensionMismatch, "extrapolate: iterates have different dimensions");
  if (!(beta > 0.0) || !(beta <= 1.0))
    fail(Errc::InvalidArgument, "extrapolate: beta must lie in (0, 1]");
  const double inv = 1.0 / beta;
  return (1.0 - inv) * w_t + inv * w_next;
}

// z <- (1 - beta) * z + beta * g.
template <typename DA, typename DB>
Vector ema_update(const Eigen::MatrixBase<DA>& z, const Eigen::MatrixBase<DB>& g, double beta) {
  if (z.size() != g.size())
    fail(Errc::DimensionMismatch, "ema_update: operands have different dimensions");
  if (!(beta > 0.0) || !(beta <= 1.0))
    fail(Errc::InvalidArgument, "ema_update: beta must lie in (0, 1]");
  return (1.0 - beta) * z + beta * g;
}

// Fresh state at w0. Adam+/Nadam+ seed z with one oracle sample at w0 using
// initial_batch; baselines start their accumulators at zero.
OptimizerState init(const OptimizerConfig& config, const Vector& w0, const Objective& objective,
                    long initial_batch, RngStream& rng);

// One Adam+/Nadam+ iteration: descend along z, extrapolate, sample the
// gradient at the extrapolated point, refresh z. Returns the step size used;
// if sampled_grad is non-null it receives the gradient the oracle returned
// (for replay against the closed-form moving average).
double adamplus_step(OptimizerState& state, const Objective& objective, long batch, RngStream& rng,
                     const OptimizerConfig& config, Vector* sampled_grad = nullptr);

// One baseline iteration on a caller-supplied gradient sample. state.z is
// kept equal to the direction estimate the method steps along (the gradient
// for SGD/Adagrad, the momentum buffer for MomentumSgd, the bias-corrected
// first moment for Adam), so trajectory records stay comparable.
void baseline_step(OptimizerState& state, const GradientSample& grad,
                   const OptimizerConfig& config);

struct ScheduleParams {
  double epsilon = 0.0;
  double beta = 0.0;
  long T = 0;   // iterations
  long T0 = 0;  // initial batch size
  long m = 0;   // per-step batch size
};

// Target-accuracy schedule for the p = 2/3, a = 4/3 member:
//   beta = eps^(1/2), T = ceil(eps^-2), T0 = ceil(1/beta), m = ceil(1/beta^3).
ScheduleParams theorem3_schedule(double epsilon);

// Schedule for the p = 1/2, a = 4/3 member:
//   beta = eps^(3/8), T = ceil(eps^-2), T0 = ceil(eps^(-3/8)),
//   m = ceil(eps^(-13/8)).
ScheduleParams appendixE_schedule(double epsilon);

// Optimizer configs the schedules pair with (eps0 = 2 * beta^a).
OptimizerConfig theorem3_optimizer(double alpha, const ScheduleParams& schedule);
OptimizerConfig appendixE_optimizer(double alpha, const ScheduleParams& schedule);

}  // namespace adamplus
