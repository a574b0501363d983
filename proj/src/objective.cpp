#include "adamplus/objective.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace adamplus {

namespace {

void check_point(const Objective& objective, const Vector& point, const char* who) {
  if (point.size() != objective.dim())
    fail(Errc::DimensionMismatch, std::string(who) + ": point has dimension " +
                                      std::to_string(point.size()) + ", objective expects " +
                                      std::to_string(objective.dim()));
}

// Floyd's algorithm: k distinct indices from [0, n), uniform over subsets.
std::vector<Eigen::Index> sample_without_replacement(Eigen::Index n, Eigen::Index k,
                                                     RngStream& rng) {
  std::vector<Eigen::Index> chosen;
  chosen.reserve(static_cast<std::size_t>(k));
  for (Eigen::Index j = n - k; j < n; ++j) {
    const auto r =
        static_cast<Eigen::Index>(rng.next_below(static_cast<std::uint64_t>(j) + 1));
    if (std::find(chosen.begin(), chosen.end(), r) != chosen.end())
      chosen.push_back(j);
    else
      chosen.push_back(r);
  }
  return chosen;
}

}  // namespace

GradientSample oracle_sample(const Objective& objective, const Vector& point, long batch_size,
                             RngStream& rng) {
  check_point(objective, point, "oracle_sample");
  if (batch_size < 1) fail(Errc::InvalidArgument, "oracle_sample: batch_size must be >= 1");

  GradientSample sample;
  sample.batch_size = batch_size;

  const Eigen::Index n = objective.num_components();
  if (n > 0) {
    if (batch_size >= n) {
      objective.gradient(point, sample.gradient);
      return sample;
    }
    const auto chosen = sample_without_replacement(n, static_cast<Eigen::Index>(batch_size), rng);
    Vector comp(objective.dim());
    sample.gradient = Vector::Zero(objective.dim());
    for (const Eigen::Index idx : chosen) {
      objective.component_gradient(idx, point, comp);
      sample.gradient += comp;
    }
    sample.gradient /= static_cast<double>(batch_size);
    return sample;
  }

  objective.gradient(point, sample.gradient);
  const double sigma = objective.constants().noise_scale.value_or(0.0);
  if (sigma > 0.0) {
    // Per-coordinate variance sigma^2 / (dim * batch); total E|noise|^2 is
    // sigma^2 / batch.
    const double sd =
        sigma / std::sqrt(static_cast<double>(objective.dim()) * static_cast<double>(batch_size));
    for (Eigen::Index i = 0; i < sample.gradient.size(); ++i)
      sample.gradient[i] += sd * rng.next_gaussian();
  }
  return sample;
}

Vector exact_gradient(const Objective& objective, const Vector& point) {
  check_point(objective, point, "exact_gradient");
  Vector out;
  objective.gradient(point, out);
  return out;
}

Vector finite_diff_gradient(const Objective& objective, const Vector& point, double h) {
  check_point(objective, point, "finite_diff_gradient");
  if (!(h > 0.0)) fail(Errc::InvalidArgument, "finite_diff_gradient: h must be positive");
  Vector out(point.size());
  Vector probe = point;
  for (Eigen::Index i = 0; i < point.size(); ++i) {
    probe[i] = point[i] + h;
    const double fp = objective.value(probe);
    probe[i] = point[i] - h;
    const double fm = objective.value(probe);
    probe[i] = point[i];
    out[i] = (fp - fm) / (2.0 * h);
  }
  return out;
}

}  // namespace adamplus
