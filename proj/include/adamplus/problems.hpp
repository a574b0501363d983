#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "adamplus/objective.hpp"

namespace adamplus {

// Row-per-example dataset. Labels are stored as doubles; binary problems use
// {0, 1}, multi-class problems use nonnegative integer class indices.
struct Dataset {
  Matrix features;  // n x d
  Vector labels;    // n

  long size() const { return static_cast<long>(features.rows()); }
  long feature_dim() const { return static_cast<long>(features.cols()); }
};

// F(w) = (1/2) w' D w with diagonal curvatures
// D_i = curvature_max * (i+1) / dim, so the largest curvature (and the
// gradient Lipschitz constant) is exactly curvature_max. The stochastic
// oracle is the Gaussian-noise oracle with scale sigma.
std::unique_ptr<Objective> make_noisy_quadratic(Eigen::Index dim, double curvature_max,
                                                double sigma);

// Binary logistic regression with L2 term reg/2 * |w|^2 on labels in {0, 1}.
// Finite-sum: component i is the loss on example i (plus the full L2 term).
std::unique_ptr<Objective> make_logistic(Dataset dataset, double reg);

// Fully connected tanh network with softmax cross-entropy loss, averaged over
// the dataset. layer_sizes runs [input_dim, hidden..., num_classes] with at
// most three weight layers. Parameters live in one flat vector; gradients are
// computed by backpropagation. No regularity constants are claimed.
std::unique_ptr<Objective> make_mlp(std::vector<Eigen::Index> layer_sizes, Dataset dataset);

// Total parameter count of the network make_mlp builds.
Eigen::Index mlp_param_count(const std::vector<Eigen::Index>& layer_sizes);

// Numeric CSV loader. Every row must have the same number of fields; the
// label_column (0-based) becomes the label, the remaining columns the
// features in order. Errors carry the offending row/column.
Dataset load_csv(const std::string& path, Eigen::Index label_column, bool has_header = false);

// IDX image/label pair (the MNIST container format). Big-endian headers,
// uint8 payload; pixels are scaled to [0, 1] and images flattened row-major.
// `limit` keeps only the first examples.
Dataset load_idx(const std::string& images_path, const std::string& labels_path,
                 std::optional<long> limit = std::nullopt);

// Two-class Gaussian blobs with a guaranteed margin along a fixed unit
// direction, so the classes are strictly linearly separable. Deterministic in
// the seed.
Dataset make_blob_dataset(long n, long d, double separation, std::uint64_t seed);

}  // namespace adamplus
