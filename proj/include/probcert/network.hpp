#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "probcert/errors.hpp"
#include "probcert/parallel.hpp"

namespace probcert {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

enum class Activation { relu, tanh, sigmoid, arctan, identity };

inline double activate(Activation kind, double t) noexcept {
  switch (kind) {
    case Activation::relu: return t > 0.0 ? t : 0.0;
    case Activation::tanh: return std::tanh(t);
    case Activation::sigmoid: return 1.0 / (1.0 + std::exp(-t));
    case Activation::arctan: return std::atan(t);
    case Activation::identity: return t;
  }
  return t;
}

inline std::string_view to_string(Activation kind) noexcept {
  switch (kind) {
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
    case Activation::sigmoid: return "sigmoid";
    case Activation::arctan: return "arctan";
    case Activation::identity: return "identity";
  }
  return "identity";
}

inline std::optional<Activation> parse_activation(std::string_view name) noexcept {
  for (auto kind : {Activation::relu, Activation::tanh, Activation::sigmoid, Activation::arctan,
                    Activation::identity})
    if (to_string(kind) == name) return kind;
  return std::nullopt;
}

namespace detail {

inline bool all_finite(const Vector& v) noexcept { return v.allFinite(); }

}  // namespace detail

/// One affine map followed by an elementwise activation.
/// weights has one row per output unit and one column per input unit.
struct Layer {
  Matrix weights;
  Vector bias;
  Activation activation = Activation::identity;

  Eigen::Index input_dim() const noexcept { return weights.cols(); }
  Eigen::Index output_dim() const noexcept { return weights.rows(); }

  Vector apply(const Eigen::Ref<const Vector>& x) const {
    if (x.size() != input_dim())
      throw DimensionError("layer expects input of length " + std::to_string(input_dim()) +
                           ", got " + std::to_string(x.size()));
    Vector out = weights * x + bias;
    if (activation != Activation::identity)
      out = out.unaryExpr([kind = activation](double t) { return activate(kind, t); });
    return out;
  }
};

/// Immutable fully connected classifier f: R^{n_x} -> R^{n_y}.
///
/// Construction checks that adjacent layers chain, that the bias of every
/// layer matches its row count, that there are at least two classes, and
/// that the final layer emits raw scores (identity activation).
class Network {
 public:
  explicit Network(std::vector<Layer> layers) : layers_(std::move(layers)) {
    if (layers_.empty()) throw DimensionError("network needs at least one layer");
    for (std::size_t k = 0; k < layers_.size(); ++k) {
      const Layer& layer = layers_[k];
      const std::string where = "layer " + std::to_string(k) + ": ";
      if (layer.weights.rows() == 0 || layer.weights.cols() == 0)
        throw DimensionError(where + "empty weight matrix");
      if (layer.bias.size() != layer.weights.rows())
        throw DimensionError(where + "bias length " + std::to_string(layer.bias.size()) +
                             " does not match weight rows " +
                             std::to_string(layer.weights.rows()));
      if (k > 0 && layer.weights.cols() != layers_[k - 1].weights.rows())
        throw DimensionError(where + "input width " + std::to_string(layer.weights.cols()) +
                             " does not match previous output width " +
                             std::to_string(layers_[k - 1].weights.rows()));
      if (!layer.weights.allFinite() || !layer.bias.allFinite())
        throw NumericError(where + "non-finite parameter");
    }
    if (output_dim() < 2) throw DimensionError("classifier needs at least two output classes");
    if (layers_.back().activation != Activation::identity)
      throw DimensionError("final layer activation must be identity, got " +
                           std::string(to_string(layers_.back().activation)));
  }

  Eigen::Index input_dim() const noexcept { return layers_.front().input_dim(); }
  Eigen::Index output_dim() const noexcept { return layers_.back().output_dim(); }
  const std::vector<Layer>& layers() const noexcept { return layers_; }

  bool is_affine() const noexcept {
    return std::all_of(layers_.begin(), layers_.end(),
                       [](const Layer& l) { return l.activation == Activation::identity; });
  }

  /// Logits f(x). Throws on shape mismatch, non-finite input, or a
  /// non-finite intermediate value (overflow).
  Vector forward(const Eigen::Ref<const Vector>& x) const {
    if (x.size() != input_dim())
      throw DimensionError("input has length " + std::to_string(x.size()) + ", network expects " +
                           std::to_string(input_dim()));
    if (!x.allFinite()) throw NumericError("non-finite input");
    Vector h = x;
    for (std::size_t k = 0; k < layers_.size(); ++k) {
      h = layers_[k].apply(h);
      if (!detail::all_finite(h))
        throw NumericError("non-finite value after layer " + std::to_string(k));
    }
    return h;
  }

 private:
  std::vector<Layer> layers_;
};

/// Index of the largest entry; ties go to the lowest index.
inline std::size_t argmax(const Eigen::Ref<const Vector>& scores) {
  if (scores.size() == 0) throw DimensionError("argmax of empty vector");
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < scores.size(); ++i)
    if (scores[i] > scores[best]) best = i;
  return static_cast<std::size_t>(best);
}

inline std::size_t classify(const Network& net, const Eigen::Ref<const Vector>& x) {
  return argmax(net.forward(x));
}

/// Marker for "every class other than the true one".
struct AllTargets {
  friend bool operator==(AllTargets, AllTargets) = default;
};

using TargetClass = std::variant<std::size_t, AllTargets>;

/// Which margin g_i(x) = f_{i*}(x) - f_i(x) to evaluate. With AllTargets the
/// margin is min over i != i* of g_i(x). Class indices are 0-based.
struct MarginSpec {
  std::size_t true_class = 0;
  TargetClass target = AllTargets{};

  bool all_targets() const noexcept { return std::holds_alternative<AllTargets>(target); }
  std::size_t target_class() const { return std::get<std::size_t>(target); }

  MarginSpec swapped() const { return {target_class(), true_class}; }

  friend bool operator==(const MarginSpec&, const MarginSpec&) = default;
};

/// Checks class indices against the network's output width.
inline void validate(const MarginSpec& spec, const Network& net) {
  const auto classes = static_cast<std::size_t>(net.output_dim());
  if (spec.true_class >= classes)
    throw InvalidArgument("true class " + std::to_string(spec.true_class) + " out of range [0, " +
                          std::to_string(classes) + ")");
  if (!spec.all_targets()) {
    const std::size_t target = spec.target_class();
    if (target >= classes)
      throw InvalidArgument("target class " + std::to_string(target) + " out of range [0, " +
                            std::to_string(classes) + ")");
  }
}

/// Margin read off an already computed logit vector.
inline double margin_from_logits(const Eigen::Ref<const Vector>& logits, const MarginSpec& spec) {
  const double top = logits[static_cast<Eigen::Index>(spec.true_class)];
  if (!spec.all_targets()) return top - logits[static_cast<Eigen::Index>(spec.target_class())];
  double worst = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < logits.size(); ++i)
    if (static_cast<std::size_t>(i) != spec.true_class) worst = std::min(worst, top - logits[i]);
  return worst;
}

/// g_i(x) from a single forward pass.
inline double margin(const Network& net, const MarginSpec& spec, const Eigen::Ref<const Vector>& x) {
  validate(spec, net);
  return margin_from_logits(net.forward(x), spec);
}

/// Margins of a batch, in input order. Samples are evaluated concurrently.
inline std::vector<double> margin_batch(const Network& net, const MarginSpec& spec,
                                        std::span<const Vector> xs, Parallelism par = {}) {
  validate(spec, net);
  std::vector<double> out(xs.size());
  parallel_for(xs.size(), par,
               [&](std::size_t j) { out[j] = margin_from_logits(net.forward(xs[j]), spec); });
  return out;
}

}  // namespace probcert
