#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "probcert/network.hpp"
#include "probcert/rng.hpp"

namespace probcert::testing {

inline Layer make_layer(std::initializer_list<std::initializer_list<double>> rows,
                        std::initializer_list<double> bias, Activation act) {
  Layer layer;
  layer.weights.resize(static_cast<Eigen::Index>(rows.size()),
                       static_cast<Eigen::Index>(rows.begin()->size()));
  Eigen::Index r = 0;
  for (const auto& row : rows) {
    Eigen::Index c = 0;
    for (double v : row) layer.weights(r, c++) = v;
    ++r;
  }
  layer.bias.resize(static_cast<Eigen::Index>(bias.size()));
  Eigen::Index k = 0;
  for (double v : bias) layer.bias[k++] = v;
  layer.activation = act;
  return layer;
}

inline Vector vec(std::initializer_list<double> values) {
  Vector v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index k = 0;
  for (double x : values) v[k++] = x;
  return v;
}

/// 2 -> 2 (relu) -> 2 (identity), every weight 0.5 and every bias 0.1.
inline Network two_layer_fixture() {
  return Network({make_layer({{0.5, 0.5}, {0.5, 0.5}}, {0.1, 0.1}, Activation::relu),
                  make_layer({{0.5, 0.5}, {0.5, 0.5}}, {0.1, 0.1}, Activation::identity)});
}

inline Network identity_net(Eigen::Index n) {
  Layer layer{Matrix::Identity(n, n), Vector::Zero(n), Activation::identity};
  return Network({layer});
}

/// Logits (c, 0) for every input of width n_x.
inline Network constant_margin_net(double c, Eigen::Index n_x = 1) {
  Layer layer{Matrix::Zero(2, n_x), vec({c, 0.0}), Activation::identity};
  return Network({layer});
}

/// Logits (x, 0) on a single input: g(x) = x for i* = 0, i = 1.
inline Network unit_margin_net() {
  return Network({make_layer({{1.0}, {0.0}}, {0.0, 0.0}, Activation::identity)});
}

/// Fully connected net with `depth` hidden layers of `width` units and
/// uniform(-s, s) entries, s = sqrt(6 / fan_in).
inline Network random_mlp(Eigen::Index n_x, Eigen::Index width, std::size_t depth, Eigen::Index n_y,
                          Activation hidden, const SampleSeed& seed) {
  CounterRng rng(seed, 0);
  std::vector<Layer> layers;
  Eigen::Index fan_in = n_x;
  for (std::size_t k = 0; k <= depth; ++k) {
    const bool last = k == depth;
    const Eigen::Index out = last ? n_y : width;
    const double s = std::sqrt(6.0 / static_cast<double>(fan_in));
    Layer layer{Matrix(out, fan_in), Vector(out), last ? Activation::identity : hidden};
    for (Eigen::Index r = 0; r < out; ++r)
      for (Eigen::Index c = 0; c < fan_in; ++c) layer.weights(r, c) = rng.uniform(-s, s);
    for (Eigen::Index r = 0; r < out; ++r) layer.bias[r] = rng.uniform(-0.1, 0.1);
    layers.push_back(std::move(layer));
    fan_in = out;
  }
  return Network(std::move(layers));
}

inline Vector random_vector(Eigen::Index n, double lo, double hi, const SampleSeed& seed,
                            std::uint64_t index = 0) {
  CounterRng rng(seed, index);
  Vector v(n);
  for (Eigen::Index k = 0; k < n; ++k) v[k] = rng.uniform(lo, hi);
  return v;
}

}  // namespace probcert::testing
