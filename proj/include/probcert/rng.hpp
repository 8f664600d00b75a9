#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace probcert {

/// Root of every random stream. A sample is fully determined by
/// (root_seed, stream_id, sample index).
struct SampleSeed {
  std::uint64_t root_seed = 0;
  std::uint64_t stream_id = 0;

  friend bool operator==(const SampleSeed&, const SampleSeed&) = default;
};

namespace detail {

inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

// SplitMix64 finalizer. A bijection on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t stream_key(const SampleSeed& seed, std::uint64_t index) noexcept {
  std::uint64_t k = mix64(seed.root_seed + kGolden);
  k = mix64(k ^ mix64(seed.stream_id ^ 0x5851f42d4c957f2dULL));
  return mix64(k + mix64(index + kGolden) * 0xd1342543de82ef95ULL);
}

}  // namespace detail

/// Counter-based generator for one sample index of one stream.
///
/// Output j of the generator for key K is mix64(K + (j+1)*golden), i.e.
/// SplitMix64 started at K. Each sample index owns an independent key, so
/// samples can be produced in any order or on any worker and still agree
/// bit for bit with a serial run.
class CounterRng {
 public:
  CounterRng(const SampleSeed& seed, std::uint64_t index) noexcept
      : state_(detail::stream_key(seed, index)) {}

  std::uint64_t next_u64() noexcept {
    state_ += detail::kGolden;
    return detail::mix64(state_);
  }

  /// Uniform on [0, 1).
  double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform on (0, 1); safe as a logarithm argument.
  double uniform_open() noexcept {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Uniform on [lo, hi).
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  /// Uniform integer on [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n) noexcept {
    // Lemire's multiply-shift; rejection keeps it exactly uniform.
    for (;;) {
      const unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * n;
      const auto low = static_cast<std::uint64_t>(m);
      if (low >= n || low >= (0 - n) % n) return static_cast<std::uint64_t>(m >> 64);
    }
  }

  /// Standard normal via Box-Muller; the second variate of each pair is cached.
  double normal() noexcept {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double r = std::sqrt(-2.0 * std::log(uniform_open()));
    const double theta = 2.0 * std::numbers::pi * uniform();
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  /// Standard Laplace (density exp(-|t|)/2).
  double laplace() noexcept {
    const double magnitude = -std::log(uniform_open());
    return (next_u64() >> 63) ? -magnitude : magnitude;
  }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace probcert
