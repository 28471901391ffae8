#pragma once

// Extreme Learning Machine: a fixed random hidden layer followed by output
// weights fitted in closed form by ridge regression,
//
//   B = (H^T H + I/C)^{-1} H^T T,
//
// where H holds the hidden responses of the training samples row by row and
// T their one-hot targets.

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "elmdoc/error.hpp"
#include "elmdoc/linalg.hpp"
#include "elmdoc/parallel.hpp"
#include "elmdoc/random.hpp"

namespace elmdoc {

enum class Activation : std::uint8_t { sigmoid = 0, relu = 1 };

inline std::string_view to_string(Activation a) { return a == Activation::sigmoid ? "sigmoid" : "relu"; }

inline Activation parse_activation(std::string_view s) {
  if (s == "sigmoid") return Activation::sigmoid;
  if (s == "relu") return Activation::relu;
  throw ValueError("unknown activation \"" + std::string(s) + "\" (expected sigmoid or relu)");
}

inline double activate(double z, Activation a) noexcept {
  return a == Activation::sigmoid ? 1.0 / (1.0 + std::exp(-z)) : (z > 0.0 ? z : 0.0);
}

/// Samples as rows of X, with optional labels. An unlabeled set has empty
/// y and class_names.
struct LabeledFeatureSet {
  FloatMatrix X;
  std::vector<std::uint32_t> y;
  std::vector<std::string> class_names;

  std::size_t size() const noexcept { return X.rows(); }
  std::size_t dim() const noexcept { return X.cols(); }
  std::size_t num_classes() const noexcept { return class_names.size(); }
  bool labeled() const noexcept { return !class_names.empty(); }

  void validate() const {
    if (!labeled()) {
      if (!y.empty()) throw ValueError("feature set has labels but no class names");
      return;
    }
    if (y.size() != X.rows()) {
      throw DimensionError("feature set has " + std::to_string(X.rows()) + " rows but " + std::to_string(y.size()) +
                           " labels");
    }
    for (std::size_t k = 0; k < y.size(); ++k) {
      if (y[k] >= class_names.size()) {
        throw ValueError("label " + std::to_string(y[k]) + " of sample " + std::to_string(k) + " is out of range for " +
                         std::to_string(class_names.size()) + " classes");
      }
    }
  }

  /// Rows selected by index, labels carried along.
  LabeledFeatureSet subset(std::span<const std::uint32_t> rows) const {
    LabeledFeatureSet out;
    out.X = FloatMatrix(rows.size(), dim());
    out.class_names = class_names;
    if (labeled()) out.y.reserve(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (rows[r] >= size()) throw DimensionError("subset row " + std::to_string(rows[r]) + " out of range");
      const auto src = X.row(rows[r]);
      std::copy(src.begin(), src.end(), out.X.row(r).begin());
      if (labeled()) out.y.push_back(y[rows[r]]);
    }
    return out;
  }
};

struct HiddenLayer {
  DenseMatrix weights;        // N x d
  std::vector<double> bias;   // N
  Activation activation = Activation::sigmoid;
  std::uint64_t seed = 0;

  std::size_t hidden() const noexcept { return weights.rows(); }
  std::size_t input_dim() const noexcept { return weights.cols(); }
};

/// Per-feature z-score statistics; identity (mean 0, std 1) when disabled.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> stddev;

  static constexpr double kStdFloor = 1e-8;

  static Standardizer identity(std::size_t d) { return {std::vector<double>(d, 0.0), std::vector<double>(d, 1.0)}; }

  template <class T>
  static Standardizer fit(const Matrix<T>& X) {
    const std::size_t n = X.rows();
    const std::size_t d = X.cols();
    Standardizer s{std::vector<double>(d, 0.0), std::vector<double>(d, 0.0)};
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < d; ++c) s.mean[c] += X(r, c);
    for (auto& m : s.mean) m /= static_cast<double>(n);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < d; ++c) {
        const double dv = X(r, c) - s.mean[c];
        s.stddev[c] += dv * dv;
      }
    for (auto& v : s.stddev) v = std::max(std::sqrt(v / static_cast<double>(n)), kStdFloor);
    return s;
  }
};

struct ElmConfig {
  std::size_t hidden = 2000;
  double C = 1.0;
  Activation activation = Activation::sigmoid;
  bool normalize = true;
  std::uint64_t seed = 0;

  void validate() const {
    if (hidden == 0) throw ValueError("hidden node count must be >= 1");
    if (!(C > 0.0) || !std::isfinite(C)) throw ValueError("regularization C must be a finite value > 0, got " + std::to_string(C));
  }
};

struct ElmModel {
  HiddenLayer hidden;
  DenseMatrix output;   // B, N x m
  double C = 1.0;
  std::vector<std::string> class_names;
  Standardizer standardizer;

  std::size_t input_dim() const noexcept { return hidden.input_dim(); }
  std::size_t num_classes() const noexcept { return class_names.size(); }

  friend bool operator==(const ElmModel& a, const ElmModel& b) {
    return a.hidden.weights == b.hidden.weights && a.hidden.bias == b.hidden.bias &&
           a.hidden.activation == b.hidden.activation && a.hidden.seed == b.hidden.seed && a.output == b.output &&
           a.C == b.C && a.class_names == b.class_names && a.standardizer.mean == b.standardizer.mean &&
           a.standardizer.stddev == b.standardizer.stddev;
  }
};

/// Random input weights and biases, uniform on [-1, 1). Entry (i, k) of W
/// and entry i of b are pure functions of (seed, position).
inline HiddenLayer init_hidden(std::size_t d, std::size_t n_hidden, Activation activation, std::uint64_t seed) {
  if (d == 0 || n_hidden == 0) {
    throw ValueError("init_hidden: input dim and hidden count must be >= 1 (got d=" + std::to_string(d) +
                     ", N=" + std::to_string(n_hidden) + ")");
  }
  HiddenLayer h;
  h.activation = activation;
  h.seed = seed;
  h.weights = DenseMatrix(n_hidden, d);
  h.bias.resize(n_hidden);
  const CounterStream w_stream(hash_words({seed, 0x5745494748ULL}));
  const CounterStream b_stream(hash_words({seed, 0x42494153ULL}));
  parallel_for(0, n_hidden, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      auto row = h.weights.row(i);
      for (std::size_t k = 0; k < d; ++k) row[k] = w_stream.uniform(i * d + k, -1.0, 1.0);
      h.bias[i] = b_stream.uniform(i, -1.0, 1.0);
    }
  });
  return h;
}

/// H with row j = g(W x̂_j + b), x̂_j = (x_j - mean) / std.
template <class T>
DenseMatrix hidden_map(const HiddenLayer& hidden, const Matrix<T>& X, const Standardizer& st) {
  const std::size_t d = hidden.input_dim();
  if (X.cols() != d) {
    throw DimensionError("hidden_map: features have dimension " + std::to_string(X.cols()) +
                         " but the hidden layer expects " + std::to_string(d));
  }
  if (st.mean.size() != d || st.stddev.size() != d) {
    throw DimensionError("hidden_map: standardization statistics have length " + std::to_string(st.mean.size()) +
                         ", expected " + std::to_string(d));
  }
  DenseMatrix xs(X.rows(), d);
  for (std::size_t r = 0; r < X.rows(); ++r) {
    const auto src = X.row(r);
    auto dst = xs.row(r);
    for (std::size_t c = 0; c < d; ++c) dst[c] = (static_cast<double>(src[c]) - st.mean[c]) / st.stddev[c];
  }
  DenseMatrix h = matmul_nt(xs, hidden.weights);
  for (std::size_t r = 0; r < h.rows(); ++r) {
    auto row = h.row(r);
    for (std::size_t i = 0; i < row.size(); ++i) row[i] = activate(row[i] + hidden.bias[i], hidden.activation);
  }
  return h;
}

inline DenseMatrix one_hot(std::span<const std::uint32_t> y, std::size_t m) {
  DenseMatrix t(y.size(), m);
  for (std::size_t k = 0; k < y.size(); ++k) {
    if (y[k] >= m) {
      throw ValueError("one_hot: label " + std::to_string(y[k]) + " at row " + std::to_string(k) + " is not < " +
                       std::to_string(m));
    }
    t(k, y[k]) = 1.0;
  }
  return t;
}

/// Ridge-regression output weights for given hidden responses and targets.
inline DenseMatrix solve_output_weights(const DenseMatrix& H, const DenseMatrix& T, double C) {
  if (!(C > 0.0) || !std::isfinite(C)) throw ValueError("regularization C must be a finite value > 0");
  if (H.rows() != T.rows()) {
    throw DimensionError("solve_output_weights: H is " + H.shape() + " but T is " + T.shape());
  }
  DenseMatrix system = gram(H);
  const double ridge = 1.0 / C;
  for (std::size_t i = 0; i < system.rows(); ++i) system(i, i) += ridge;
  return spd_solve(system, matmul_tn(H, T));
}

inline ElmModel train(const LabeledFeatureSet& data, const ElmConfig& config) {
  config.validate();
  data.validate();
  if (data.size() == 0) throw ValueError("train: no training samples");
  if (!data.labeled()) throw ValueError("train: feature set has no labels");
  for (float v : data.X.values())
    if (!std::isfinite(v)) throw ValueError("train: non-finite feature value");

  ElmModel model;
  model.C = config.C;
  model.class_names = data.class_names;
  model.standardizer = config.normalize ? Standardizer::fit(data.X) : Standardizer::identity(data.dim());
  model.hidden = init_hidden(data.dim(), config.hidden, config.activation, config.seed);
  const DenseMatrix H = hidden_map(model.hidden, data.X, model.standardizer);
  model.output = solve_output_weights(H, one_hot(data.y, data.num_classes()), config.C);
  return model;
}

inline void check_input_dim(const ElmModel& model, std::size_t d) {
  if (d != model.input_dim()) {
    throw DimensionError("model expects feature dimension " + std::to_string(model.input_dim()) +
                         " but features have dimension " + std::to_string(d));
  }
}

/// Raw output layer H B, one row per sample, no softmax.
template <class T>
DenseMatrix predict_scores(const ElmModel& model, const Matrix<T>& X) {
  check_input_dim(model, X.cols());
  return matmul(hidden_map(model.hidden, X, model.standardizer), model.output);
}

/// Column of the maximum per row; the lowest index wins ties.
inline std::vector<std::uint32_t> argmax_rows(const DenseMatrix& scores) {
  std::vector<std::uint32_t> out(scores.rows(), 0);
  for (std::size_t r = 0; r < scores.rows(); ++r) {
    const auto row = scores.row(r);
    std::uint32_t best = 0;
    for (std::uint32_t c = 1; c < row.size(); ++c)
      if (row[c] > row[best]) best = c;
    out[r] = best;
  }
  return out;
}

template <class T>
std::vector<std::uint32_t> predict(const ElmModel& model, const Matrix<T>& X) {
  return argmax_rows(predict_scores(model, X));
}

}  // namespace elmdoc
