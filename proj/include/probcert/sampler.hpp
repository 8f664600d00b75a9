#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "probcert/errors.hpp"
#include "probcert/network.hpp"
#include "probcert/parallel.hpp"
#include "probcert/rng.hpp"

namespace probcert {

/// Supported ball norms. Other orders are rejected rather than approximated.
enum class NormOrder { one, two, inf };

inline std::string_view to_string(NormOrder p) noexcept {
  switch (p) {
    case NormOrder::one: return "1";
    case NormOrder::two: return "2";
    case NormOrder::inf: return "inf";
  }
  return "inf";
}

inline std::optional<NormOrder> parse_norm_order(std::string_view text) noexcept {
  if (text == "1") return NormOrder::one;
  if (text == "2") return NormOrder::two;
  if (text == "inf" || text == "Inf" || text == "infinity") return NormOrder::inf;
  return std::nullopt;
}

/// Dual exponent q with 1/p + 1/q = 1.
constexpr NormOrder dual(NormOrder p) noexcept {
  switch (p) {
    case NormOrder::one: return NormOrder::inf;
    case NormOrder::two: return NormOrder::two;
    case NormOrder::inf: return NormOrder::one;
  }
  return NormOrder::one;
}

inline double norm(const Eigen::Ref<const Vector>& v, NormOrder p) {
  if (v.size() == 0) return 0.0;
  switch (p) {
    case NormOrder::one: return v.lpNorm<1>();
    case NormOrder::two: return v.norm();
    case NormOrder::inf: return v.lpNorm<Eigen::Infinity>();
  }
  return v.lpNorm<Eigen::Infinity>();
}

/// Uniform distribution on {d : ||d||_p <= alpha}.
struct BallNoise {
  NormOrder p = NormOrder::inf;
  double alpha = 0.0;
};

/// Independent N(0, sigma^2) coordinates.
struct GaussianNoise {
  double sigma = 1.0;
};

/// Uniform choice among pre-drawn noise vectors.
struct EmpiricalNoise {
  std::vector<Vector> draws;
};

using NoiseSpec = std::variant<BallNoise, GaussianNoise, EmpiricalNoise>;

/// Optional coordinatewise clamp applied after perturbation. Off by
/// default; enabling it changes the input distribution.
struct BoxClamp {
  double lo = 0.0;
  double hi = 1.0;
};

/// Distribution of X = nominal + noise.
struct NoiseModel {
  Vector nominal;
  NoiseSpec noise;
  std::optional<BoxClamp> clamp;
};

/// Absolute slack on ball membership; direction normalisation can overshoot by ulps.
inline constexpr double kSupportTolerance = 1e-12;

inline void validate(const NoiseModel& model) {
  if (model.nominal.size() == 0) throw DimensionError("nominal input is empty");
  if (!model.nominal.allFinite()) throw NumericError("nominal input has non-finite entries");
  std::visit(
      [&](const auto& spec) {
        using T = std::decay_t<decltype(spec)>;
        if constexpr (std::is_same_v<T, BallNoise>) {
          if (!(spec.alpha >= 0.0) || !std::isfinite(spec.alpha))
            throw InvalidArgument("ball radius must be finite and >= 0");
        } else if constexpr (std::is_same_v<T, GaussianNoise>) {
          if (!(spec.sigma > 0.0) || !std::isfinite(spec.sigma))
            throw InvalidArgument("gaussian sigma must be finite and > 0");
        } else {
          if (spec.draws.empty()) throw InvalidArgument("empirical noise list is empty");
          for (std::size_t k = 0; k < spec.draws.size(); ++k) {
            if (spec.draws[k].size() != model.nominal.size())
              throw DimensionError("empirical noise vector " + std::to_string(k) + " has length " +
                                   std::to_string(spec.draws[k].size()) + ", nominal has " +
                                   std::to_string(model.nominal.size()));
            if (!spec.draws[k].allFinite())
              throw NumericError("empirical noise vector " + std::to_string(k) + " is non-finite");
          }
        }
      },
      model.noise);
  if (model.clamp && !(model.clamp->lo < model.clamp->hi))
    throw InvalidArgument("clamp requires lo < hi");
}

namespace detail {

inline void ball_noise(CounterRng& rng, const BallNoise& ball, Eigen::Ref<Vector> d) {
  const auto n = d.size();
  if (ball.alpha == 0.0) {
    d.setZero();
    return;
  }
  switch (ball.p) {
    case NormOrder::inf:
      for (Eigen::Index k = 0; k < n; ++k) d[k] = ball.alpha * (2.0 * rng.uniform() - 1.0);
      return;
    case NormOrder::two: {
      for (Eigen::Index k = 0; k < n; ++k) d[k] = rng.normal();
      const double radius = ball.alpha * std::pow(rng.uniform_open(), 1.0 / static_cast<double>(n));
      d *= radius / d.norm();
      return;
    }
    case NormOrder::one: {
      for (Eigen::Index k = 0; k < n; ++k) d[k] = rng.laplace();
      const double radius = ball.alpha * std::pow(rng.uniform_open(), 1.0 / static_cast<double>(n));
      d *= radius / d.lpNorm<1>();
      return;
    }
  }
}

}  // namespace detail

/// Sample number `index` of the stream `seed`. The model must already be
/// validated; sample() does that for whole batches.
inline Vector draw(const NoiseModel& model, const SampleSeed& seed, std::uint64_t index) {
  CounterRng rng(seed, index);
  Vector x = model.nominal;
  std::visit(
      [&](const auto& spec) {
        using T = std::decay_t<decltype(spec)>;
        if constexpr (std::is_same_v<T, BallNoise>) {
          Vector d(x.size());
          detail::ball_noise(rng, spec, d);
          x += d;
        } else if constexpr (std::is_same_v<T, GaussianNoise>) {
          for (Eigen::Index k = 0; k < x.size(); ++k) x[k] += spec.sigma * rng.normal();
        } else {
          x += spec.draws[rng.below(spec.draws.size())];
        }
      },
      model.noise);
  if (model.clamp) x = x.cwiseMax(model.clamp->lo).cwiseMin(model.clamp->hi);
  return x;
}

/// n i.i.d. draws of X. Sample j depends only on (model, seed, j), so a
/// shorter draw is a prefix of a longer one and the worker count is
/// irrelevant.
inline std::vector<Vector> sample(const NoiseModel& model, std::size_t n, const SampleSeed& seed,
                                  Parallelism par = {}) {
  validate(model);
  std::vector<Vector> out(n);
  parallel_for(n, par, [&](std::size_t j) { out[j] = draw(model, seed, j); });
  return out;
}

/// Membership in the support of X. Ball kinds allow kSupportTolerance of
/// slack on the norm constraint; with a clamp the point must also lie in
/// the box.
inline bool support_contains(const NoiseModel& model, const Eigen::Ref<const Vector>& x) {
  if (x.size() != model.nominal.size())
    throw DimensionError("point has length " + std::to_string(x.size()) + ", model has " +
                         std::to_string(model.nominal.size()));
  if (model.clamp) {
    const double lo = model.clamp->lo;
    const double hi = model.clamp->hi;
    if ((x.array() < lo).any() || (x.array() > hi).any()) return false;
  }
  return std::visit(
      [&](const auto& spec) -> bool {
        using T = std::decay_t<decltype(spec)>;
        if constexpr (std::is_same_v<T, BallNoise>) {
          return norm(x - model.nominal, spec.p) <= spec.alpha + kSupportTolerance;
        } else if constexpr (std::is_same_v<T, GaussianNoise>) {
          return true;
        } else {
          const Vector d = x - model.nominal;
          return std::any_of(spec.draws.begin(), spec.draws.end(), [&](const Vector& e) {
            return (d - e).lpNorm<Eigen::Infinity>() <= kSupportTolerance;
          });
        }
      },
      model.noise);
}

namespace detail {

class Fnv1a {
 public:
  void bytes(const void* data, std::size_t len) noexcept {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t k = 0; k < len; ++k) {
      hash_ ^= p[k];
      hash_ *= 0x100000001b3ULL;
    }
  }
  void u64(std::uint64_t v) noexcept {
    unsigned char buf[8];
    for (int k = 0; k < 8; ++k) buf[k] = static_cast<unsigned char>(v >> (8 * k));
    bytes(buf, 8);
  }
  void f64(double v) noexcept { u64(std::bit_cast<std::uint64_t>(v)); }
  void vec(const Vector& v) noexcept {
    u64(static_cast<std::uint64_t>(v.size()));
    for (Eigen::Index k = 0; k < v.size(); ++k) f64(v[k]);
  }
  std::string hex() const {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash_));
    return buf;
  }

 private:
  std::uint64_t hash_ = 0xcbf29ce484222325ULL;
};

}  // namespace detail

/// 64-bit FNV-1a digest over the exact bit patterns of the model.
inline std::string digest(const NoiseModel& model) {
  detail::Fnv1a h;
  h.vec(model.nominal);
  h.u64(model.noise.index());
  std::visit(
      [&](const auto& spec) {
        using T = std::decay_t<decltype(spec)>;
        if constexpr (std::is_same_v<T, BallNoise>) {
          h.u64(static_cast<std::uint64_t>(spec.p));
          h.f64(spec.alpha);
        } else if constexpr (std::is_same_v<T, GaussianNoise>) {
          h.f64(spec.sigma);
        } else {
          h.u64(spec.draws.size());
          for (const auto& e : spec.draws) h.vec(e);
        }
      },
      model.noise);
  h.u64(model.clamp.has_value());
  if (model.clamp) {
    h.f64(model.clamp->lo);
    h.f64(model.clamp->hi);
  }
  return h.hex();
}

}  // namespace probcert
