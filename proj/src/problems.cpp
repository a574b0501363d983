#include "adamplus/problems.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "adamplus/rng.hpp"

namespace adamplus {

namespace {

// log(1 + e^x) without overflow.
double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

// 1 / (1 + e^x), i.e. the logistic sigmoid of -x.
double sigmoid_neg(double x) {
  if (x >= 0.0) {
    const double e = std::exp(-x);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(x));
}

class QuadraticObjective final : public Objective {
 public:
  QuadraticObjective(Eigen::Index dim, double curvature_max, double sigma) {
    if (dim < 1) fail(Errc::InvalidArgument, "quadratic: dim must be >= 1");
    if (!(curvature_max > 0.0))
      fail(Errc::InvalidArgument, "quadratic: curvature_max must be positive");
    if (!(sigma >= 0.0)) fail(Errc::InvalidArgument, "quadratic: sigma must be nonnegative");
    curvatures_.resize(dim);
    for (Eigen::Index i = 0; i < dim; ++i)
      curvatures_[i] = curvature_max * static_cast<double>(i + 1) / static_cast<double>(dim);
    constants_.smoothness = curvature_max;
    constants_.hessian_smoothness = 0.0;
    constants_.noise_scale = sigma;
  }

  Eigen::Index dim() const override { return curvatures_.size(); }

  double value(const Vector& w) const override {
    return 0.5 * w.dot(curvatures_.cwiseProduct(w));
  }

  void gradient(const Vector& w, Vector& out) const override {
    out = curvatures_.cwiseProduct(w);
  }

  const ProblemConstants& constants() const override { return constants_; }

  std::optional<double> optimum_value() const override { return 0.0; }

 private:
  Vector curvatures_;
  ProblemConstants constants_;
};

class LogisticObjective final : public Objective {
 public:
  LogisticObjective(Dataset dataset, double reg) : data_(std::move(dataset)), reg_(reg) {
    if (data_.size() < 1) fail(Errc::InvalidArgument, "logistic: dataset is empty");
    if (!(reg >= 0.0)) fail(Errc::InvalidArgument, "logistic: reg must be nonnegative");
    signed_labels_.resize(data_.size());
    for (long i = 0; i < data_.size(); ++i) {
      const double y = data_.labels[i];
      if (y != 0.0 && y != 1.0)
        fail(Errc::InvalidArgument,
             "logistic: label at row " + std::to_string(i) + " is " + std::to_string(y) +
                 ", expected 0 or 1");
      signed_labels_[i] = 2.0 * y - 1.0;
    }
    double max_sq = 0.0;
    for (long i = 0; i < data_.size(); ++i)
      max_sq = std::max(max_sq, data_.features.row(i).squaredNorm());
    const double max_norm = std::sqrt(max_sq);
    constants_.smoothness = 0.25 * max_sq + reg_;
    constants_.hessian_smoothness = max_norm * max_norm * max_norm / (6.0 * std::sqrt(3.0));
    // Every per-example loss gradient deviates from the mean by at most
    // 2 max_i |x_i| (the L2 term is common to all components).
    constants_.noise_scale = 2.0 * max_norm;
  }

  Eigen::Index dim() const override { return data_.features.cols(); }

  double value(const Vector& w) const override {
    const Vector margins = signed_labels_.cwiseProduct(data_.features * w);
    double total = 0.0;
    for (Eigen::Index i = 0; i < margins.size(); ++i) total += softplus(-margins[i]);
    return total / static_cast<double>(data_.size()) + 0.5 * reg_ * w.squaredNorm();
  }

  void gradient(const Vector& w, Vector& out) const override {
    const Vector margins = signed_labels_.cwiseProduct(data_.features * w);
    Vector coeffs(margins.size());
    for (Eigen::Index i = 0; i < margins.size(); ++i)
      coeffs[i] = -signed_labels_[i] * sigmoid_neg(margins[i]);
    out = data_.features.transpose() * coeffs / static_cast<double>(data_.size()) + reg_ * w;
  }

  const ProblemConstants& constants() const override { return constants_; }

  Eigen::Index num_components() const override { return data_.size(); }

  void component_gradient(Eigen::Index i, const Vector& w, Vector& out) const override {
    if (i < 0 || i >= data_.size())
      fail(Errc::InvalidArgument, "logistic: component index out of range");
    const double margin = signed_labels_[i] * data_.features.row(i).dot(w);
    out = (-signed_labels_[i] * sigmoid_neg(margin)) * data_.features.row(i).transpose() +
          reg_ * w;
  }

 private:
  Dataset data_;
  double reg_;
  Vector signed_labels_;
  ProblemConstants constants_;
};

class MlpObjective final : public Objective {
 public:
  MlpObjective(std::vector<Eigen::Index> layer_sizes, Dataset dataset)
      : layers_(std::move(layer_sizes)), data_(std::move(dataset)) {
    if (layers_.size() < 2) fail(Errc::InvalidArgument, "mlp: need at least input and output sizes");
    if (layers_.size() > 4)
      fail(Errc::InvalidArgument, "mlp: at most three weight layers are supported");
    for (const auto s : layers_)
      if (s < 1) fail(Errc::InvalidArgument, "mlp: layer sizes must be >= 1");
    if (data_.size() < 1) fail(Errc::InvalidArgument, "mlp: dataset is empty");
    if (layers_.front() != data_.feature_dim())
      fail(Errc::InvalidArgument,
           "mlp: input size " + std::to_string(layers_.front()) + " != feature dimension " +
               std::to_string(data_.feature_dim()));
    const auto classes = layers_.back();
    if (classes < 2) fail(Errc::InvalidArgument, "mlp: need at least two output classes");
    class_index_.resize(data_.size());
    for (long i = 0; i < data_.size(); ++i) {
      const double y = data_.labels[i];
      const long yi = static_cast<long>(std::llround(y));
      if (y != static_cast<double>(yi) || yi < 0 || yi >= classes)
        fail(Errc::InvalidArgument, "mlp: label at row " + std::to_string(i) +
                                         " must be an integer class index in [0, " +
                                         std::to_string(classes) + ")");
      class_index_[i] = yi;
    }
    dim_ = mlp_param_count(layers_);
  }

  Eigen::Index dim() const override { return dim_; }

  double value(const Vector& w) const override {
    check_params(w);
    Matrix activations = data_.features;
    forward(w, activations);
    // activations now holds the logits, one row per example.
    double total = 0.0;
    for (long i = 0; i < data_.size(); ++i)
      total += row_cross_entropy(activations.row(i), class_index_[i]);
    return total / static_cast<double>(data_.size());
  }

  void gradient(const Vector& w, Vector& out) const override {
    check_params(w);
    batch_gradient(w, 0, data_.size(), 1.0 / static_cast<double>(data_.size()), out);
  }

  const ProblemConstants& constants() const override { return constants_; }

  Eigen::Index num_components() const override { return data_.size(); }

  void component_gradient(Eigen::Index i, const Vector& w, Vector& out) const override {
    if (i < 0 || i >= data_.size()) fail(Errc::InvalidArgument, "mlp: component index out of range");
    check_params(w);
    batch_gradient(w, i, i + 1, 1.0, out);
  }

 private:
  void check_params(const Vector& w) const {
    if (w.size() != dim_)
      fail(Errc::DimensionMismatch, "mlp: parameter vector has size " + std::to_string(w.size()) +
                                        ", expected " + std::to_string(dim_));
  }

  Eigen::Map<const Matrix> weight(const Vector& w, std::size_t layer, Eigen::Index& offset) const {
    const auto rows = layers_[layer + 1];
    const auto cols = layers_[layer];
    Eigen::Map<const Matrix> m(w.data() + offset, rows, cols);
    offset += rows * cols;
    return m;
  }

  // Replaces `a` (rows = examples) with the network's logits.
  void forward(const Vector& w, Matrix& a) const {
    Eigen::Index offset = 0;
    for (std::size_t l = 0; l + 1 < layers_.size(); ++l) {
      const auto W = weight(w, l, offset);
      const auto b = w.segment(offset, layers_[l + 1]);
      offset += layers_[l + 1];
      a = ((a * W.transpose()).rowwise() + b.transpose()).eval();
      if (l + 2 < layers_.size()) a = a.array().tanh().matrix();
    }
  }

  static double row_cross_entropy(const Eigen::RowVectorXd& logits, long label) {
    const double m = logits.maxCoeff();
    const double lse = m + std::log((logits.array() - m).exp().sum());
    return lse - logits[label];
  }

  // Cross-entropy gradient over examples [begin, end), scaled by `scale`.
  void batch_gradient(const Vector& w, long begin, long end, double scale, Vector& out) const {
    const long n = end - begin;
    std::vector<Matrix> acts;  // activations per layer, rows = examples
    acts.reserve(layers_.size());
    acts.push_back(data_.features.middleRows(begin, n));
    Eigen::Index offset = 0;
    std::vector<Eigen::Index> weight_offsets;
    for (std::size_t l = 0; l + 1 < layers_.size(); ++l) {
      weight_offsets.push_back(offset);
      const auto W = weight(w, l, offset);
      const auto b = w.segment(offset, layers_[l + 1]);
      offset += layers_[l + 1];
      Matrix next = (acts.back() * W.transpose()).rowwise() + b.transpose();
      if (l + 2 < layers_.size()) next = next.array().tanh().matrix();
      acts.push_back(std::move(next));
    }

    // Softmax cross-entropy error at the logits.
    Matrix delta = acts.back();
    for (long r = 0; r < n; ++r) {
      const double m = delta.row(r).maxCoeff();
      const Eigen::Array<double, 1, Eigen::Dynamic> e = (delta.row(r).array() - m).exp();
      delta.row(r) = (e / e.sum()).matrix();
      delta(r, class_index_[begin + r]) -= 1.0;
    }
    delta *= scale;

    out = Vector::Zero(dim_);
    for (std::size_t l = layers_.size() - 1; l-- > 0;) {
      const auto rows = layers_[l + 1];
      const auto cols = layers_[l];
      Eigen::Index off = weight_offsets[l];
      Eigen::Map<Matrix> dW(out.data() + off, rows, cols);
      dW = delta.transpose() * acts[l];
      out.segment(off + rows * cols, rows) = delta.colwise().sum().transpose();
      if (l > 0) {
        Eigen::Map<const Matrix> W(w.data() + off, rows, cols);
        Matrix da = delta * W;
        // tanh' = 1 - tanh^2, and acts[l] already holds tanh values.
        delta = (da.array() * (1.0 - acts[l].array().square())).matrix();
      }
    }
  }

  std::vector<Eigen::Index> layers_;
  Dataset data_;
  std::vector<long> class_index_;
  Eigen::Index dim_ = 0;
  ProblemConstants constants_;  // intentionally empty: no honest claims
};

std::uint32_t read_be_u32(std::ifstream& in, const std::string& path) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4))
    fail(Errc::Parse, "truncated IDX header in " + path);
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) | (std::uint32_t(b[2]) << 8) |
         std::uint32_t(b[3]);
}

}  // namespace

std::unique_ptr<Objective> make_noisy_quadratic(Eigen::Index dim, double curvature_max,
                                                double sigma) {
  return std::make_unique<QuadraticObjective>(dim, curvature_max, sigma);
}

std::unique_ptr<Objective> make_logistic(Dataset dataset, double reg) {
  return std::make_unique<LogisticObjective>(std::move(dataset), reg);
}

std::unique_ptr<Objective> make_mlp(std::vector<Eigen::Index> layer_sizes, Dataset dataset) {
  return std::make_unique<MlpObjective>(std::move(layer_sizes), std::move(dataset));
}

Eigen::Index mlp_param_count(const std::vector<Eigen::Index>& layer_sizes) {
  if (layer_sizes.size() < 2)
    fail(Errc::InvalidArgument, "mlp: need at least input and output sizes");
  Eigen::Index total = 0;
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l)
    total += layer_sizes[l + 1] * layer_sizes[l] + layer_sizes[l + 1];
  return total;
}

Dataset load_csv(const std::string& path, Eigen::Index label_column, bool has_header) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::Io, "cannot open CSV file: " + path);

  std::vector<std::vector<double>> rows;
  std::string line;
  long line_no = 0;
  bool skipped_header = !has_header;
  Eigen::Index expected_fields = -1;

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!skipped_header) {
      skipped_header = true;
      continue;
    }
    if (line.empty()) continue;

    std::vector<double> fields;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      const std::size_t len = (comma == std::string::npos ? line.size() : comma) - start;
      std::size_t lo = start, hi = start + len;
      while (lo < hi && (line[lo] == ' ' || line[lo] == '\t')) ++lo;
      while (hi > lo && (line[hi - 1] == ' ' || line[hi - 1] == '\t')) --hi;
      double v = 0.0;
      const auto res = std::from_chars(line.data() + lo, line.data() + hi, v);
      if (res.ec != std::errc() || res.ptr != line.data() + hi)
        fail(Errc::Parse, path + ": line " + std::to_string(line_no) + ", field " +
                              std::to_string(fields.size() + 1) + ": not a number: '" +
                              line.substr(start, len) + "'");
      fields.push_back(v);
      if (comma == std::string::npos) break;
      start = comma + 1;
    }

    if (expected_fields < 0) {
      expected_fields = static_cast<Eigen::Index>(fields.size());
    } else if (static_cast<Eigen::Index>(fields.size()) != expected_fields) {
      fail(Errc::Parse, path + ": line " + std::to_string(line_no) + " has " +
                            std::to_string(fields.size()) + " fields, expected " +
                            std::to_string(expected_fields));
    }
    rows.push_back(std::move(fields));
  }
  if (in.bad()) fail(Errc::Io, "read failed: " + path);
  if (rows.empty()) fail(Errc::Parse, path + ": no data rows");
  if (expected_fields < 2)
    fail(Errc::Parse, path + ": rows need at least two fields (features + label)");
  if (label_column < 0 || label_column >= expected_fields)
    fail(Errc::InvalidArgument, path + ": label_column " + std::to_string(label_column) +
                                    " out of range for " + std::to_string(expected_fields) +
                                    " fields");

  Dataset out;
  const auto n = static_cast<Eigen::Index>(rows.size());
  out.features.resize(n, expected_fields - 1);
  out.labels.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Index col = 0;
    for (Eigen::Index j = 0; j < expected_fields; ++j) {
      if (j == label_column)
        out.labels[i] = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      else
        out.features(i, col++) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
  }
  return out;
}

Dataset load_idx(const std::string& images_path, const std::string& labels_path,
                 std::optional<long> limit) {
  if (limit && *limit < 1) fail(Errc::InvalidArgument, "load_idx: limit must be >= 1");

  std::ifstream img(images_path, std::ios::binary);
  if (!img) fail(Errc::Io, "cannot open IDX image file: " + images_path);
  const std::uint32_t img_magic = read_be_u32(img, images_path);
  if (img_magic != 0x00000803u)
    fail(Errc::Parse, images_path + ": unsupported IDX magic " + std::to_string(img_magic) +
                          ", expected 2051 (uint8 images)");
  const std::uint32_t count = read_be_u32(img, images_path);
  const std::uint32_t rows = read_be_u32(img, images_path);
  const std::uint32_t cols = read_be_u32(img, images_path);
  if (count == 0 || rows == 0 || cols == 0)
    fail(Errc::Parse, images_path + ": empty IDX image file");

  std::ifstream lab(labels_path, std::ios::binary);
  if (!lab) fail(Errc::Io, "cannot open IDX label file: " + labels_path);
  const std::uint32_t lab_magic = read_be_u32(lab, labels_path);
  if (lab_magic != 0x00000801u)
    fail(Errc::Parse, labels_path + ": unsupported IDX magic " + std::to_string(lab_magic) +
                          ", expected 2049 (uint8 labels)");
  const std::uint32_t lab_count = read_be_u32(lab, labels_path);
  if (lab_count != count)
    fail(Errc::Parse, "IDX count mismatch: " + std::to_string(count) + " images in " +
                          images_path + " vs " + std::to_string(lab_count) + " labels in " +
                          labels_path);

  const long keep = limit ? std::min<long>(*limit, count) : static_cast<long>(count);
  const auto pixels = static_cast<Eigen::Index>(rows) * static_cast<Eigen::Index>(cols);

  Dataset out;
  out.features.resize(keep, pixels);
  out.labels.resize(keep);

  std::vector<unsigned char> buf(static_cast<std::size_t>(pixels));
  for (long i = 0; i < keep; ++i) {
    if (!img.read(reinterpret_cast<char*>(buf.data()), pixels))
      fail(Errc::Parse, images_path + ": truncated image payload at example " + std::to_string(i));
    for (Eigen::Index jx = 0; jx < pixels; ++jx)
      out.features(i, jx) = static_cast<double>(buf[static_cast<std::size_t>(jx)]) / 255.0;
    unsigned char y = 0;
    if (!lab.read(reinterpret_cast<char*>(&y), 1))
      fail(Errc::Parse, labels_path + ": truncated label payload at example " + std::to_string(i));
    out.labels[i] = static_cast<double>(y);
  }
  return out;
}

Dataset make_blob_dataset(long n, long d, double separation, std::uint64_t seed) {
  if (n < 2) fail(Errc::InvalidArgument, "blobs: need at least two examples");
  if (d < 1) fail(Errc::InvalidArgument, "blobs: need at least one feature");
  if (!(separation > 0.0)) fail(Errc::InvalidArgument, "blobs: separation must be positive");

  RngStream rng(seed, 0xB10B);
  Vector direction(d);
  for (long j = 0; j < d; ++j) direction[j] = rng.next_gaussian();
  direction.normalize();

  Dataset out;
  out.features.resize(n, d);
  out.labels.resize(n);
  for (long i = 0; i < n; ++i) {
    const double label = static_cast<double>(i % 2);
    const double sign = 2.0 * label - 1.0;
    Vector x(d);
    for (long j = 0; j < d; ++j) x[j] = rng.next_gaussian();
    const double along = x.dot(direction);
    // Strip the component along `direction`, then give every example a
    // same-signed margin of at least separation/2: strictly separable.
    x -= along * direction;
    x += sign * (0.5 * separation + 0.5 * std::abs(along)) * direction;
    out.features.row(i) = x.transpose();
    out.labels[i] = label;
  }
  return out;
}

}  // namespace adamplus
