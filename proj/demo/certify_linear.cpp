// Certifies a random linear classifier and compares the sample-based
// radius with the exact worst-case radius of the same model.

#include <cstdio>

#include "probcert/probcert.hpp"

int main() {
  using namespace probcert;

  const SampleSeed seed{2024, 0};
  const Network net = generate_linear_classifier(50, 10, seed);

  Vector nominal(50);
  CounterRng rng({2024, 1}, 0);
  for (Eigen::Index k = 0; k < nominal.size(); ++k) nominal[k] = rng.uniform();
  const std::size_t label = classify(net, nominal);

  RadiusSearchSpec spec;
  spec.alpha_lo = 1e-6;
  spec.alpha_hi = 1.0;
  spec.tolerance = 1e-4;
  spec.cert = {0.1, 1e-5, {label, AllTargets{}}};

  const auto result = max_radius(net, nominal, spec, seed);
  const auto margins = affine_margins(net, spec.cert.margin_spec);
  const double worst = worst_case_radius(margins, nominal, NormOrder::inf);

  std::printf("class %zu: status %s, certified radius %.6f, worst-case radius %.6f\n", label,
              std::string(to_string(result.status)).c_str(), result.alpha.value_or(0.0), worst);

  const NoiseModel model{nominal, BallNoise{NormOrder::inf, result.alpha.value_or(0.0)}, {}};
  const auto est = estimate_success_probability(net, model, spec.cert.margin_spec, 48000, seed);
  std::printf("a posteriori P(margin >= 0) = %.5f (lower bound %.5f)\n", est.point_estimate,
              est.lower_confidence_bound);
}
