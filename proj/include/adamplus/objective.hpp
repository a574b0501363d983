#pragma once

#include <Eigen/Core>
#include <optional>

#include "adamplus/error.hpp"
#include "adamplus/rng.hpp"

namespace adamplus {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Known regularity constants of an objective. Anything a problem cannot
// honestly claim stays unset; consumers that need a constant must say so
// instead of guessing.
struct ProblemConstants {
  std::optional<double> smoothness;          // gradient Lipschitz constant L
  std::optional<double> hessian_smoothness;  // Hessian Lipschitz constant
  std::optional<double> noise_scale;         // oracle noise scale sigma
  std::optional<double> delta_cap;           // bound on F(w0) - inf F
  std::optional<double> grad_bound;          // bound on the gradient norm
};

class Objective {
 public:
  virtual ~Objective() = default;

  virtual Eigen::Index dim() const = 0;
  virtual double value(const Vector& w) const = 0;
  virtual void gradient(const Vector& w, Vector& out) const = 0;
  virtual const ProblemConstants& constants() const = 0;

  // Finite-sum structure. Zero components means the objective is
  // expectation-only and the stochastic oracle adds Gaussian noise instead of
  // subsampling.
  virtual Eigen::Index num_components() const { return 0; }
  virtual void component_gradient(Eigen::Index /*i*/, const Vector& /*w*/, Vector& /*out*/) const {
    fail(Errc::InvalidArgument, "objective has no finite-sum structure");
  }

  // Known minimum value, when the problem has one in closed form.
  virtual std::optional<double> optimum_value() const { return std::nullopt; }
};

struct GradientSample {
  Vector gradient;
  long batch_size = 0;
};

// Unbiased stochastic gradient at `point`.
//
// Finite-sum objectives average `batch_size` distinct component gradients
// drawn uniformly without replacement (the full gradient once batch_size
// reaches the component count). Expectation-only objectives return the exact
// gradient plus i.i.d. Gaussian noise of per-coordinate variance
// sigma^2 / (dim * batch_size), so the total noise variance is
// sigma^2 / batch_size regardless of dimension.
GradientSample oracle_sample(const Objective& objective, const Vector& point, long batch_size,
                             RngStream& rng);

// Exact gradient as a returned vector.
Vector exact_gradient(const Objective& objective, const Vector& point);

// Central-difference gradient, one coordinate at a time. Validation oracle
// for hand-written gradients; O(dim) objective evaluations.
Vector finite_diff_gradient(const Objective& objective, const Vector& point, double h = 1e-5);

}  // namespace adamplus
