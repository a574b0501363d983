#include "adamplus/optimizer.hpp"

#include <cmath>
#include <string>
#include <utility>

namespace adamplus {

std::string to_string(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::AdamPlus: return "adamplus";
    case OptimizerKind::NadamPlus: return "nadamplus";
    case OptimizerKind::Sgd: return "sgd";
    case OptimizerKind::MomentumSgd: return "momentum_sgd";
    case OptimizerKind::Adagrad: return "adagrad";
    case OptimizerKind::Adam: return "adam";
  }
  fail(Errc::InvalidArgument, "unknown optimizer kind");
}

OptimizerKind optimizer_kind_from_string(const std::string& name) {
  if (name == "adamplus") return OptimizerKind::AdamPlus;
  if (name == "nadamplus") return OptimizerKind::NadamPlus;
  if (name == "sgd") return OptimizerKind::Sgd;
  if (name == "momentum_sgd") return OptimizerKind::MomentumSgd;
  if (name == "adagrad") return OptimizerKind::Adagrad;
  if (name == "adam") return OptimizerKind::Adam;
  fail(Errc::Config, "unknown optimizer kind '" + name +
                         "': expected adamplus, nadamplus, sgd, momentum_sgd, adagrad or adam");
}

void OptimizerConfig::validate() const {
  if (!(alpha > 0.0) || !std::isfinite(alpha))
    fail(Errc::Config, "optimizer: alpha must be positive and finite");
  if (is_adamplus_family()) {
    if (!(beta > 0.0) || !(beta <= 1.0))
      fail(Errc::Config, "optimizer: beta must lie in (0, 1]");
    if (!(a >= 0.0) || !std::isfinite(a))
      fail(Errc::Config, "optimizer: exponent a must be nonnegative");
    if (!(p >= 0.5) || !(p <= 1.0))
      fail(Errc::Config, "optimizer: exponent p must lie in [1/2, 1]");
    if (kind == OptimizerKind::AdamPlus && p != 0.5)
      fail(Errc::Config, "optimizer: adamplus has p = 1/2 fixed; use nadamplus for other p");
    if (!(eps0 >= 0.0) || !std::isfinite(eps0))
      fail(Errc::Config, "optimizer: eps0 must be nonnegative");
  }
  if (kind == OptimizerKind::MomentumSgd && (!(momentum >= 0.0) || !(momentum < 1.0)))
    fail(Errc::Config, "optimizer: momentum must lie in [0, 1)");
  if (kind == OptimizerKind::Adam) {
    if (!(adam_beta1 >= 0.0) || !(adam_beta1 < 1.0))
      fail(Errc::Config, "optimizer: adam_beta1 must lie in [0, 1)");
    if (!(adam_beta2 >= 0.0) || !(adam_beta2 < 1.0))
      fail(Errc::Config, "optimizer: adam_beta2 must lie in [0, 1)");
    if (!(adam_eps > 0.0)) fail(Errc::Config, "optimizer: adam_eps must be positive");
  }
  if (kind == OptimizerKind::Adagrad && !(adagrad_eps > 0.0))
    fail(Errc::Config, "optimizer: adagrad_eps must be positive");
}

OptimizerConfig adamplus_defaults() { return OptimizerConfig{}; }

OptimizerConfig nadamplus_config(double alpha, double beta, double a, double p, double eps0) {
  OptimizerConfig c;
  c.kind = OptimizerKind::NadamPlus;
  c.alpha = alpha;
  c.beta = beta;
  c.a = a;
  c.p = p;
  c.eps0 = eps0;
  c.validate();
  return c;
}

OptimizerConfig nigt_style_config(double alpha, double beta) {
  return nadamplus_config(alpha, beta, 1.25, 1.0, 1e-8);
}

double step_size_from_norm(double z_norm, const OptimizerConfig& config) {
  if (!(z_norm >= 0.0) || !std::isfinite(z_norm))
    fail(Errc::InvalidArgument, "step_size: |z| must be finite and nonnegative");
  const double denom = std::max(std::pow(z_norm, config.p), config.eps0);
  if (!(denom > 0.0))
    fail(Errc::DegenerateStepSize, "step size denominator is zero (|z| = 0 and eps0 = 0)");
  return config.alpha * std::pow(config.beta, config.a) / denom;
}

OptimizerState init(const OptimizerConfig& config, const Vector& w0, const Objective& objective,
                    long initial_batch, RngStream& rng) {
  config.validate();
  if (w0.size() != objective.dim())
    fail(Errc::DimensionMismatch, "init: w0 has dimension " + std::to_string(w0.size()) +
                                      ", objective expects " + std::to_string(objective.dim()));
  if (initial_batch < 1) fail(Errc::InvalidArgument, "init: initial_batch must be >= 1");

  OptimizerState state;
  state.w = w0;
  if (config.is_adamplus_family()) {
    state.z = oracle_sample(objective, w0, initial_batch, rng).gradient;
  } else {
    state.z = Vector::Zero(w0.size());
  }
  return state;
}

double adamplus_step(OptimizerState& state, const Objective& objective, long batch, RngStream& rng,
                     const OptimizerConfig& config, Vector* sampled_grad) {
  if (!config.is_adamplus_family())
    fail(Errc::InvalidArgument, "adamplus_step: config is not an adamplus-family optimizer");
  if (state.w.size() != objective.dim() || state.z.size() != objective.dim())
    fail(Errc::DimensionMismatch, "adamplus_step: state does not match objective dimension");

  const double eta = step_size(state.z, config);
  Vector w_next = state.w - eta * state.z;
  const Vector look_ahead = extrapolate(state.w, w_next, config.beta);
  const GradientSample sample = oracle_sample(objective, look_ahead, batch, rng);
  if (sampled_grad) *sampled_grad = sample.gradient;
  state.z = ema_update(state.z, sample.gradient, config.beta);
  state.w = std::move(w_next);
  state.eta_last = eta;
  state.t += 1;
  return eta;
}

void baseline_step(OptimizerState& state, const GradientSample& grad,
                   const OptimizerConfig& config) {
  if (config.is_adamplus_family())
    fail(Errc::InvalidArgument, "baseline_step: use adamplus_step for the adamplus family");
  const auto d = state.w.size();
  if (grad.gradient.size() != d)
    fail(Errc::DimensionMismatch, "baseline_step: gradient does not match state dimension");

  const Vector& g = grad.gradient;
  switch (config.kind) {
    case OptimizerKind::Sgd: {
      state.z = g;
      state.w -= config.alpha * g;
      break;
    }
    case OptimizerKind::MomentumSgd: {
      if (state.velocity.size() != d) state.velocity = Vector::Zero(d);
      state.velocity = config.momentum * state.velocity + g;
      state.z = state.velocity;
      state.w -= config.alpha * state.velocity;
      break;
    }
    case OptimizerKind::Adagrad: {
      if (state.grad_sq_sum.size() != d) state.grad_sq_sum = Vector::Zero(d);
      state.grad_sq_sum += g.cwiseProduct(g);
      state.z = g;
      state.w -=
          config.alpha *
          (g.array() / (state.grad_sq_sum.array() + config.adagrad_eps).sqrt()).matrix();
      break;
    }
    case OptimizerKind::Adam: {
      if (state.adam_m.size() != d) state.adam_m = Vector::Zero(d);
      if (state.adam_v.size() != d) state.adam_v = Vector::Zero(d);
      const long step_num = state.t + 1;
      state.adam_m = config.adam_beta1 * state.adam_m + (1.0 - config.adam_beta1) * g;
      state.adam_v =
          config.adam_beta2 * state.adam_v + (1.0 - config.adam_beta2) * g.cwiseProduct(g);
      const double c1 = 1.0 - std::pow(config.adam_beta1, static_cast<double>(step_num));
      const double c2 = 1.0 - std::pow(config.adam_beta2, static_cast<double>(step_num));
      const Vector m_hat = state.adam_m / c1;
      const Vector v_hat = state.adam_v / c2;
      state.z = m_hat;
      state.w -=
          config.alpha * (m_hat.array() / (v_hat.array().sqrt() + config.adam_eps)).matrix();
      break;
    }
    default:
      fail(Errc::InvalidArgument, "baseline_step: unsupported optimizer kind");
  }
  state.eta_last = config.alpha;
  state.t += 1;
}

namespace {

// ceil with a relative snap to the nearest integer, so schedule formulas like
// 1/beta^3 land on the intended integer instead of one above it when pow or
// sqrt round the wrong way.
long ceil_snapped(double x) {
  if (!(x > 0.0) || !std::isfinite(x))
    fail(Errc::InvalidArgument, "schedule: quantity must be positive and finite");
  const double r = std::round(x);
  if (r >= 1.0 && std::abs(x - r) <= 1e-9 * std::max(1.0, std::abs(x))) return static_cast<long>(r);
  return static_cast<long>(std::ceil(x));
}

void check_epsilon(double epsilon) {
  if (!(epsilon > 0.0) || !(epsilon < 1.0))
    fail(Errc::InvalidArgument, "schedule: epsilon must lie in (0, 1)");
}

}  // namespace

ScheduleParams theorem3_schedule(double epsilon) {
  check_epsilon(epsilon);
  ScheduleParams s;
  s.epsilon = epsilon;
  s.beta = std::sqrt(epsilon);
  s.T = ceil_snapped(1.0 / (epsilon * epsilon));
  s.T0 = ceil_snapped(1.0 / s.beta);
  s.m = ceil_snapped(1.0 / (s.beta * s.beta * s.beta));
  return s;
}

ScheduleParams appendixE_schedule(double epsilon) {
  check_epsilon(epsilon);
  ScheduleParams s;
  s.epsilon = epsilon;
  s.beta = std::pow(epsilon, 0.375);
  s.T = ceil_snapped(std::pow(epsilon, -2.0));
  s.T0 = ceil_snapped(std::pow(epsilon, -0.375));
  s.m = ceil_snapped(std::pow(epsilon, -1.625));
  return s;
}

OptimizerConfig theorem3_optimizer(double alpha, const ScheduleParams& schedule) {
  const double a = 4.0 / 3.0;
  return nadamplus_config(alpha, schedule.beta, a, 2.0 / 3.0,
                          2.0 * std::pow(schedule.beta, a));
}

OptimizerConfig appendixE_optimizer(double alpha, const ScheduleParams& schedule) {
  OptimizerConfig c;
  c.kind = OptimizerKind::AdamPlus;
  c.alpha = alpha;
  c.beta = schedule.beta;
  c.a = 4.0 / 3.0;
  c.p = 0.5;
  c.eps0 = 2.0 * std::pow(schedule.beta, c.a);
  c.validate();
  return c;
}

}  // namespace adamplus
