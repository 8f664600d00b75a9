#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "probcert/analytic.hpp"
#include "probcert/certifier.hpp"
#include "support/fixtures.hpp"

namespace probcert {
namespace {

using testing::make_layer;
using testing::vec;

TEST(AffineMargin, RowDifference) {
  const AffineMargin am = affine_margin(testing::identity_net(2), {0, std::size_t{1}});
  EXPECT_EQ(am.c, vec({1, -1}));
  EXPECT_EQ(am.d, 0.0);
}

TEST(AffineMargin, ConstantMargin) {
  const Network net({Layer{Matrix::Zero(2, 2), vec({0.3, 0.1}), Activation::identity}});
  const AffineMargin am = affine_margin(net, {0, std::size_t{1}});
  EXPECT_EQ(am.c, vec({0, 0}));
  EXPECT_NEAR(am.d, 0.2, 1e-15);
}

TEST(AffineMargin, StackedLayersCollapse) {
  // W2 W1 = [[1,2],[3,4]] [[2,0],[1,-1]] = [[4,-2],[10,-4]]
  // W2 b1 + b2 = [[1,2],[3,4]] (0.5, -1) + (0.1, 0.2) = (-1.4, -2.3)
  // c = row0 - row1 = (-6, 2); d = -1.4 + 2.3 = 0.9
  const Network net({make_layer({{2, 0}, {1, -1}}, {0.5, -1.0}, Activation::identity),
                     make_layer({{1, 2}, {3, 4}}, {0.1, 0.2}, Activation::identity)});
  const MarginSpec spec{0, std::size_t{1}};
  const AffineMargin am = affine_margin(net, spec);
  EXPECT_NEAR(am.c[0], -6.0, 1e-14);
  EXPECT_NEAR(am.c[1], 2.0, 1e-14);
  EXPECT_NEAR(am.d, 0.9, 1e-14);
  for (std::uint64_t k = 0; k < 10; ++k) {
    const Vector x = testing::random_vector(2, -3, 3, {1, 0}, k);
    EXPECT_NEAR(am(x), margin(net, spec, x), 1e-12);
  }
}

TEST(AffineMargin, RejectsNonlinearNetworks) {
  EXPECT_THROW(affine_margin(testing::two_layer_fixture(), {0, std::size_t{1}}), InvalidArgument);
  EXPECT_THROW(affine_margin(testing::identity_net(2), {0, AllTargets{}}), InvalidArgument);
}

TEST(AffineMargin, MatchesNetworkAtRandomPoints) {
  const Network net = testing::random_mlp(7, 5, 3, 4, Activation::identity, {21, 0});
  for (std::size_t i = 1; i < 4; ++i) {
    const MarginSpec spec{0, i};
    const AffineMargin am = affine_margin(net, spec);
    for (std::uint64_t k = 0; k < 100; ++k) {
      const Vector x = testing::random_vector(7, -5, 5, {22, 0}, k);
      EXPECT_NEAR(am(x), margin(net, spec, x), 1e-11);
    }
  }
  EXPECT_EQ(affine_margins(net, {2, AllTargets{}}).size(), 3u);
}

TEST(WorstCaseMargin, InfBallCorners) {
  const AffineMargin am{vec({1, -1}), 0.0};
  const Vector nominal = vec({2, 0});
  // Brute force over the four corners of the box.
  double corner_min = std::numeric_limits<double>::infinity();
  for (double s0 : {-0.5, 0.5})
    for (double s1 : {-0.5, 0.5}) corner_min = std::min(corner_min, am(Vector(nominal + vec({s0, s1}))));
  EXPECT_EQ(corner_min, 1.0);
  EXPECT_EQ(worst_case_margin(am, nominal, NormOrder::inf, 0.5), 1.0);
  EXPECT_EQ(worst_case_margin(am, nominal, NormOrder::inf, 0.0), 2.0);
  EXPECT_EQ(worst_case_margin(AffineMargin{vec({0, 0}), 0.4}, nominal, NormOrder::two, 7.0), 0.4);
}

TEST(WorstCaseMargin, DualNormsAgainstSampledMinimum) {
  for (auto p : {NormOrder::one, NormOrder::two, NormOrder::inf}) {
    const AffineMargin am{testing::random_vector(6, -1, 1, {40, 0}), 0.3};
    const Vector nominal = testing::random_vector(6, -1, 1, {41, 0});
    const double alpha = 0.35;
    const double exact = worst_case_margin(am, nominal, p, alpha);
    const NoiseModel model{nominal, BallNoise{p, alpha}, {}};
    double sampled = std::numeric_limits<double>::infinity();
    for (const auto& x : sample(model, 100000, {42, 0})) sampled = std::min(sampled, am(x));
    EXPECT_LE(exact, sampled + 1e-9) << to_string(p);
    // Sampling approaches the minimiser only closely for the box.
    if (p == NormOrder::inf) EXPECT_LT(sampled - exact, 0.2);
  }
}

TEST(WorstCaseMargin, AttainedAtDualMinimiser) {
  const AffineMargin am{vec({0.5, -2.0, 1.0}), -0.1};
  const Vector nominal = vec({1, 1, 1});
  const double alpha = 0.25;
  // l_inf: x = nominal - alpha sign(c); l_1: move along the largest |c_k|;
  // l_2: x = nominal - alpha c / |c|.
  EXPECT_NEAR(am(Vector(nominal - alpha * am.c.cwiseSign())),
              worst_case_margin(am, nominal, NormOrder::inf, alpha), 1e-14);
  EXPECT_NEAR(am(Vector(nominal + vec({0, alpha, 0}))), worst_case_margin(am, nominal, NormOrder::one, alpha),
              1e-14);
  EXPECT_NEAR(am(Vector(nominal - alpha * am.c / am.c.norm())),
              worst_case_margin(am, nominal, NormOrder::two, alpha), 1e-14);
}

TEST(WorstCaseRadius, Examples) {
  const AffineMargin am{vec({1, -1}), 0.0};
  EXPECT_EQ(worst_case_radius(am, vec({2, 0}), NormOrder::inf), 1.0);
  EXPECT_TRUE(std::isinf(worst_case_radius(AffineMargin{vec({0, 0}), 0.2}, vec({2, 0}), NormOrder::inf)));
  EXPECT_EQ(worst_case_radius(AffineMargin{vec({1, 0}), -0.1}, vec({0, 0}), NormOrder::two), 0.0);

  // Cross-check by bisecting the worst-case margin.
  double lo = 0.0, hi = 10.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (worst_case_margin(am, vec({2, 0}), NormOrder::inf, mid) >= 0 ? lo : hi) = mid;
  }
  EXPECT_NEAR(lo, 1.0, 1e-12);
}

TEST(WorstCaseRadius, InvertsWorstCaseMargin) {
  for (std::uint64_t k = 0; k < 50; ++k)
    for (auto p : {NormOrder::one, NormOrder::two, NormOrder::inf}) {
      const AffineMargin am{testing::random_vector(5, -1, 1, {50, 0}, k), 2.0};
      const Vector nominal = testing::random_vector(5, -1, 1, {51, 0}, k);
      const double radius = worst_case_radius(am, nominal, p);
      if (!std::isfinite(radius) || radius == 0.0) continue;
      EXPECT_NEAR(worst_case_margin(am, nominal, p, radius), 0.0, 1e-9);
    }
}

TEST(WorstCaseMargin, LowerBoundsEveryBallPoint) {
  const Network net = testing::random_mlp(6, 6, 1, 3, Activation::identity, {60, 0});
  const Vector nominal = testing::random_vector(6, 0, 1, {61, 0});
  for (auto p : {NormOrder::one, NormOrder::two, NormOrder::inf}) {
    const NoiseModel model{nominal, BallNoise{p, 0.3}, {}};
    const auto margins = affine_margins(net, {0, AllTargets{}});
    const double bound = worst_case_margin(margins, nominal, p, 0.3);
    for (const auto& x : sample(model, 10000, {62, 0}))
      ASSERT_LE(bound, margin(net, {0, AllTargets{}}, x) + 1e-12);
  }
}

TEST(GenerateLinear, EntriesInUnitInterval) {
  const Network net = generate_linear_classifier(50, 10, {13, 0});
  ASSERT_EQ(net.layers().size(), 1u);
  const Layer& layer = net.layers()[0];
  EXPECT_EQ(layer.weights.rows(), 10);
  EXPECT_EQ(layer.weights.cols(), 50);
  EXPECT_EQ(layer.activation, Activation::identity);
  EXPECT_TRUE((layer.weights.array() >= 0.0).all() && (layer.weights.array() <= 1.0).all());
  EXPECT_TRUE((layer.bias.array() >= 0.0).all() && (layer.bias.array() <= 1.0).all());
}

TEST(GenerateLinear, DeterministicBySeed) {
  const Network a = generate_linear_classifier(30, 5, {1, 2});
  const Network b = generate_linear_classifier(30, 5, {1, 2});
  const Network c = generate_linear_classifier(30, 5, {1, 3});
  EXPECT_EQ(a.layers()[0].weights, b.layers()[0].weights);
  EXPECT_EQ(a.layers()[0].bias, b.layers()[0].bias);
  EXPECT_NE(a.layers()[0].weights, c.layers()[0].weights);
}

TEST(GenerateLinear, MeanIsOneHalf) {
  // 50100 entries of U[0,1]; standard error sqrt(1/12 / 50100) ~ 0.0013.
  const Network net = generate_linear_classifier(500, 100, {99, 0});
  const Layer& layer = net.layers()[0];
  const double mean = (layer.weights.sum() + layer.bias.sum()) / (500.0 * 100.0 + 100.0);
  EXPECT_NEAR(mean, 0.5, 0.01);
}

TEST(GenerateLinear, Errors) {
  EXPECT_THROW(generate_linear_classifier(0, 3, {}), InvalidArgument);
  EXPECT_THROW(generate_linear_classifier(3, 1, {}), InvalidArgument);
}

}  // namespace
}  // namespace probcert
