#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <ostream>
#include <string_view>
#include <vector>

#include "probcert/certifier.hpp"
#include "probcert/network.hpp"
#include "probcert/sampler.hpp"

namespace probcert {

struct RadiusSearchSpec {
  double alpha_lo = 0.0;
  double alpha_hi = 1.0;
  double tolerance = 1e-3;
  std::size_t max_iterations = 64;
  NormOrder p = NormOrder::inf;
  CertificationSpec cert;
  std::optional<BoxClamp> clamp;
};

inline void validate(const RadiusSearchSpec& spec, const Network& net) {
  validate(spec.cert, net);
  if (!(spec.alpha_lo > 0.0) || !std::isfinite(spec.alpha_hi) || !(spec.alpha_lo < spec.alpha_hi))
    throw InvalidArgument("radius interval must satisfy 0 < alpha_lo < alpha_hi < inf");
  if (!(spec.tolerance > 0.0 && spec.tolerance < spec.alpha_hi - spec.alpha_lo))
    throw InvalidArgument("tolerance must lie strictly inside (0, alpha_hi - alpha_lo)");
  if (spec.max_iterations == 0) throw InvalidArgument("max_iterations must be positive");
}

enum class SearchStatus { certified, not_certifiable_at_lo, iteration_cap_reached };

inline std::string_view to_string(SearchStatus s) noexcept {
  switch (s) {
    case SearchStatus::certified: return "certified";
    case SearchStatus::not_certifiable_at_lo: return "not_certifiable_at_lo";
    case SearchStatus::iteration_cap_reached: return "iteration_cap_reached";
  }
  return "certified";
}

/// One evaluated radius. Iteration 0 is the feasibility probe at alpha_lo.
struct TraceEntry {
  std::size_t iteration = 0;
  double alpha = 0.0;
  double r_hat = 0.0;
  std::size_t sample_count = 0;

  friend bool operator==(const TraceEntry&, const TraceEntry&) = default;
};

struct RadiusSearchResult {
  SearchStatus status = SearchStatus::not_certifiable_at_lo;
  /// Certified radius for `certified`; best certified midpoint for
  /// `iteration_cap_reached`; empty otherwise.
  std::optional<double> alpha;
  std::vector<TraceEntry> trace;
  double final_lo = 0.0;
  double final_hi = 0.0;

  friend bool operator==(const RadiusSearchResult&, const RadiusSearchResult&) = default;
};

/// Stream for bisection step `iteration`. Injective in `iteration` for a
/// fixed seed because mix64 is a bijection.
inline SampleSeed derive_iteration_seed(const SampleSeed& seed, std::uint64_t iteration) noexcept {
  const std::uint64_t base = detail::mix64(seed.stream_id ^ 0x6269736563740000ULL);
  return {seed.root_seed, base ^ detail::mix64(iteration)};
}

/// Largest l_p radius around `nominal` certifiable at (epsilon, delta) by
/// bisection, redrawing N fresh samples at every probed radius.
///
/// The loop runs while the interval is wider than the tolerance or the last
/// scenario value was negative; r_hat > 0 raises the lower end, anything
/// else lowers the upper end. The returned radius is the exiting midpoint.
/// alpha_lo is probed first so an infeasible interval fails fast, and
/// max_iterations bounds the loop.
inline RadiusSearchResult max_radius(const Network& net, const Vector& nominal,
                                     const RadiusSearchSpec& spec, const SampleSeed& seed,
                                     Parallelism par = {}) {
  validate(spec, net);
  if (nominal.size() != net.input_dim())
    throw DimensionError("nominal input has length " + std::to_string(nominal.size()) +
                         ", network expects " + std::to_string(net.input_dim()));

  const std::size_t n = required_sample_count(spec.cert.epsilon, spec.cert.delta_confidence);
  auto scenario_at = [&](double alpha, std::size_t iteration) {
    const NoiseModel model{nominal, BallNoise{spec.p, alpha}, spec.clamp};
    const auto margins = sampled_margins(net, model, spec.cert.margin_spec, n,
                                         derive_iteration_seed(seed, iteration), par);
    return scenario_value(margins);
  };

  RadiusSearchResult result;
  double lo = spec.alpha_lo;
  double hi = spec.alpha_hi;

  const double r_lo = scenario_at(lo, 0);
  result.trace.push_back({0, lo, r_lo, n});
  if (r_lo < 0.0) {
    result.status = SearchStatus::not_certifiable_at_lo;
    result.final_lo = lo;
    result.final_hi = hi;
    return result;
  }

  double r_hat = 0.0;
  double alpha = lo;
  std::optional<double> best;
  std::size_t iteration = 0;
  while (hi - lo > spec.tolerance || r_hat < 0.0) {
    if (iteration == spec.max_iterations) {
      result.status = best ? SearchStatus::iteration_cap_reached
                           : SearchStatus::not_certifiable_at_lo;
      result.alpha = best;
      result.final_lo = lo;
      result.final_hi = hi;
      return result;
    }
    ++iteration;
    alpha = 0.5 * (lo + hi);
    r_hat = scenario_at(alpha, iteration);
    result.trace.push_back({iteration, alpha, r_hat, n});
    if (r_hat >= 0.0 && (!best || alpha > *best)) best = alpha;
    if (r_hat > 0.0)
      lo = alpha;
    else
      hi = alpha;
  }

  result.status = SearchStatus::certified;
  result.alpha = alpha;
  result.final_lo = lo;
  result.final_hi = hi;
  return result;
}

/// CSV with header `iteration,alpha,r_hat,N`; doubles in round-trip precision.
inline void write_trace_csv(std::ostream& os, const std::vector<TraceEntry>& trace) {
  os << "iteration,alpha,r_hat,N\n";
  char buf[64];
  for (const auto& e : trace) {
    os << e.iteration << ',';
    std::snprintf(buf, sizeof buf, "%.17g", e.alpha);
    os << buf << ',';
    std::snprintf(buf, sizeof buf, "%.17g", e.r_hat);
    os << buf << ',' << e.sample_count << '\n';
  }
}

}  // namespace probcert
