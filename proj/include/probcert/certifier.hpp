#pragma once

#include <boost/math/special_functions/beta.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <ctime>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "probcert/errors.hpp"
#include "probcert/network.hpp"
#include "probcert/parallel.hpp"
#include "probcert/rng.hpp"
#include "probcert/sampler.hpp"

namespace probcert {

/// Probability levels of a certificate plus the margin being certified.
struct CertificationSpec {
  double epsilon = 0.01;           ///< permissible misclassification probability
  double delta_confidence = 1e-5;  ///< probability that the certificate itself is wrong
  MarginSpec margin_spec;
};

inline void validate_probability_levels(double epsilon, double delta_confidence) {
  if (!(epsilon > 0.0 && epsilon < 1.0))
    throw InvalidArgument("epsilon must lie strictly inside (0, 1)");
  if (!(delta_confidence > 0.0 && delta_confidence < 1.0))
    throw InvalidArgument("delta_confidence must lie strictly inside (0, 1)");
}

/// Range checks plus the requirement that a single target differs from
/// the true class (otherwise the margin is identically zero).
inline void validate(const CertificationSpec& spec, const Network& net) {
  validate_probability_levels(spec.epsilon, spec.delta_confidence);
  validate(spec.margin_spec, net);
  if (!spec.margin_spec.all_targets() &&
      spec.margin_spec.target_class() == spec.margin_spec.true_class)
    throw InvalidArgument("target class must differ from the true class");
}

/// Smallest N with N >= (2/eps)(ln(1/delta) + 1).
inline std::size_t required_sample_count(double epsilon, double delta_confidence) {
  validate_probability_levels(epsilon, delta_confidence);
  const double bound = (2.0 / epsilon) * (-std::log(delta_confidence) + 1.0);
  return static_cast<std::size_t>(std::ceil(bound));
}

/// Solution of max r s.t. g(X_j) >= r for all j, i.e. the smallest margin.
inline double scenario_value(std::span<const double> margins) {
  if (margins.empty()) throw InvalidArgument("scenario value of an empty margin list");
  double lowest = margins.front();
  for (double m : margins) {
    if (!std::isfinite(m)) throw NumericError("non-finite margin");
    lowest = std::min(lowest, m);
  }
  return lowest;
}

/// Draws samples 0..n-1 of `seed` and evaluates their margins without
/// materialising the inputs. Equal, element for element, to
/// margin_batch(net, spec, sample(model, n, seed)).
inline std::vector<double> sampled_margins(const Network& net, const NoiseModel& model,
                                           const MarginSpec& spec, std::size_t n,
                                           const SampleSeed& seed, Parallelism par = {}) {
  validate(model);
  validate(spec, net);
  if (model.nominal.size() != net.input_dim())
    throw DimensionError("nominal input has length " + std::to_string(model.nominal.size()) +
                         ", network expects " + std::to_string(net.input_dim()));
  std::vector<double> out(n);
  parallel_for(n, par, [&](std::size_t j) {
    out[j] = margin_from_logits(net.forward(draw(model, seed, j)), spec);
  });
  return out;
}

inline std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Outcome of one scenario certification run.
///
/// When `certified` is true the record asserts that, with probability at
/// least 1 - delta_confidence over the sampling, P(g(X) >= 0) >= 1 - epsilon.
/// Nothing is claimed when r_hat < 0.
struct Certificate {
  std::size_t sample_count = 0;
  double r_hat = 0.0;
  bool certified = false;
  double epsilon = 0.0;
  double delta_confidence = 0.0;
  SampleSeed seed;
  std::string noise_model_digest;
  std::string timestamp;

  /// Field equality ignoring the timestamp.
  bool same_result(const Certificate& o) const {
    return sample_count == o.sample_count && r_hat == o.r_hat && certified == o.certified &&
           epsilon == o.epsilon && delta_confidence == o.delta_confidence && seed == o.seed &&
           noise_model_digest == o.noise_model_digest;
  }
};

/// Scenario certificate. `n_override` may raise the sample count above the
/// required bound, never lower it.
inline Certificate certify(const Network& net, const NoiseModel& model,
                           const CertificationSpec& spec, const SampleSeed& seed,
                           std::optional<std::size_t> n_override = std::nullopt,
                           Parallelism par = {}) {
  validate(spec, net);
  const std::size_t required = required_sample_count(spec.epsilon, spec.delta_confidence);
  if (n_override && *n_override < required)
    throw InvalidArgument("sample count " + std::to_string(*n_override) +
                          " is below the required " + std::to_string(required));
  const std::size_t n = n_override.value_or(required);

  const auto margins = sampled_margins(net, model, spec.margin_spec, n, seed, par);
  Certificate cert;
  cert.sample_count = n;
  cert.r_hat = scenario_value(margins);
  cert.certified = cert.r_hat >= 0.0;
  cert.epsilon = spec.epsilon;
  cert.delta_confidence = spec.delta_confidence;
  cert.seed = seed;
  cert.noise_model_digest = digest(model);
  cert.timestamp = utc_timestamp();
  return cert;
}

/// One-sided lower Clopper-Pearson bound on a binomial success probability.
inline double clopper_pearson_lower(std::size_t successes, std::size_t trials, double confidence) {
  if (trials == 0) throw InvalidArgument("Clopper-Pearson bound needs at least one trial");
  if (successes > trials) throw InvalidArgument("successes exceed trials");
  if (!(confidence > 0.0 && confidence < 1.0))
    throw InvalidArgument("confidence must lie strictly inside (0, 1)");
  if (successes == 0) return 0.0;
  return boost::math::ibeta_inv(static_cast<double>(successes),
                                static_cast<double>(trials - successes + 1), 1.0 - confidence);
}

struct EstimateResult {
  std::size_t samples = 0;
  std::size_t successes = 0;
  double point_estimate = 0.0;
  double lower_confidence_bound = 0.0;
  double confidence = 0.999;

  friend bool operator==(const EstimateResult&, const EstimateResult&) = default;
};

/// Stream used by a-posteriori estimation; never shared with certification.
inline SampleSeed estimation_seed(const SampleSeed& seed) noexcept {
  return {seed.root_seed, detail::mix64(seed.stream_id ^ 0x657374696d617465ULL) + 1};
}

/// Monte Carlo estimate of P(g(X) >= 0) from m fresh samples.
inline EstimateResult estimate_success_probability(const Network& net, const NoiseModel& model,
                                                   const MarginSpec& spec, std::size_t m,
                                                   const SampleSeed& seed, Parallelism par = {},
                                                   double confidence = 0.999) {
  if (m == 0) throw InvalidArgument("estimation needs at least one sample");
  const auto margins = sampled_margins(net, model, spec, m, estimation_seed(seed), par);
  EstimateResult r;
  r.samples = m;
  r.successes = static_cast<std::size_t>(
      std::count_if(margins.begin(), margins.end(), [](double g) { return g >= 0.0; }));
  r.point_estimate = static_cast<double>(r.successes) / static_cast<double>(m);
  r.lower_confidence_bound = clopper_pearson_lower(r.successes, m, confidence);
  r.confidence = confidence;
  return r;
}

}  // namespace probcert
