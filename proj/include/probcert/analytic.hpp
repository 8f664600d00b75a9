#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "probcert/errors.hpp"
#include "probcert/network.hpp"
#include "probcert/rng.hpp"
#include "probcert/sampler.hpp"

namespace probcert {

/// g(x) = c.x + d for an affine classifier.
struct AffineMargin {
  Vector c;
  double d = 0.0;

  double operator()(const Eigen::Ref<const Vector>& x) const { return c.dot(x) + d; }
};

/// Collapses an all-identity network into a single (W, b).
inline std::pair<Matrix, Vector> collapse_affine(const Network& net) {
  if (!net.is_affine())
    throw InvalidArgument("affine collapse requires identity activations in every layer");
  Matrix w = net.layers().front().weights;
  Vector b = net.layers().front().bias;
  for (std::size_t k = 1; k < net.layers().size(); ++k) {
    const Layer& layer = net.layers()[k];
    b = layer.weights * b + layer.bias;
    w = layer.weights * w;
  }
  return {std::move(w), std::move(b)};
}

inline AffineMargin affine_margin(const Network& net, const MarginSpec& spec) {
  if (spec.all_targets())
    throw InvalidArgument("affine_margin needs a single target class; use affine_margins");
  validate(spec, net);
  const auto [w, b] = collapse_affine(net);
  const auto top = static_cast<Eigen::Index>(spec.true_class);
  const auto other = static_cast<Eigen::Index>(spec.target_class());
  return {(w.row(top) - w.row(other)).transpose(), b[top] - b[other]};
}

/// One affine margin per target class (all i != i* for AllTargets).
inline std::vector<AffineMargin> affine_margins(const Network& net, const MarginSpec& spec) {
  if (!spec.all_targets()) return {affine_margin(net, spec)};
  validate(spec, net);
  std::vector<AffineMargin> out;
  for (std::size_t i = 0; i < static_cast<std::size_t>(net.output_dim()); ++i)
    if (i != spec.true_class) out.push_back(affine_margin(net, {spec.true_class, i}));
  return out;
}

/// Exact minimum of c.x + d over ||x - nominal||_p <= alpha.
inline double worst_case_margin(const AffineMargin& am, const Eigen::Ref<const Vector>& nominal,
                                NormOrder p, double alpha) {
  if (nominal.size() != am.c.size()) throw DimensionError("nominal and coefficient lengths differ");
  if (!(alpha >= 0.0)) throw InvalidArgument("radius must be >= 0");
  const double at_nominal = am(nominal);
  if (alpha == 0.0) return at_nominal;
  return at_nominal - alpha * norm(am.c, dual(p));
}

inline double worst_case_margin(std::span<const AffineMargin> margins,
                                const Eigen::Ref<const Vector>& nominal, NormOrder p, double alpha) {
  double worst = std::numeric_limits<double>::infinity();
  for (const auto& am : margins) worst = std::min(worst, worst_case_margin(am, nominal, p, alpha));
  return worst;
}

/// Largest alpha whose whole ball keeps the margin nonnegative: +inf for a
/// nonnegative constant margin, 0 when the nominal is already misclassified.
inline double worst_case_radius(const AffineMargin& am, const Eigen::Ref<const Vector>& nominal,
                                NormOrder p) {
  if (nominal.size() != am.c.size()) throw DimensionError("nominal and coefficient lengths differ");
  const double at_nominal = am(nominal);
  if (at_nominal < 0.0) return 0.0;
  const double scale = norm(am.c, dual(p));
  if (scale == 0.0) return std::numeric_limits<double>::infinity();
  return at_nominal / scale;
}

inline double worst_case_radius(std::span<const AffineMargin> margins,
                                const Eigen::Ref<const Vector>& nominal, NormOrder p) {
  double radius = std::numeric_limits<double>::infinity();
  for (const auto& am : margins) radius = std::min(radius, worst_case_radius(am, nominal, p));
  return radius;
}

/// Single identity layer with every weight and bias entry i.i.d. U[0, 1].
/// Entries are drawn row-major, weights before biases, from one stream.
inline Network generate_linear_classifier(Eigen::Index n_x, Eigen::Index n_y,
                                          const SampleSeed& seed) {
  if (n_x < 1) throw InvalidArgument("input dimension must be >= 1");
  if (n_y < 2) throw InvalidArgument("a classifier needs at least two outputs");
  CounterRng rng(seed, 0);
  Layer layer{Matrix(n_y, n_x), Vector(n_y), Activation::identity};
  for (Eigen::Index r = 0; r < n_y; ++r)
    for (Eigen::Index c = 0; c < n_x; ++c) layer.weights(r, c) = rng.uniform();
  for (Eigen::Index r = 0; r < n_y; ++r) layer.bias[r] = rng.uniform();
  return Network({std::move(layer)});
}

}  // namespace probcert
