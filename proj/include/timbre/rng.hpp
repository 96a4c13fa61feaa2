#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace timbre {

/// Counter-based pseudo-random generator.
///
/// Output n is mix64(seed + (n+1) * GAMMA) where mix64 is the splitmix64
/// finalizer, so the stream is a pure function of (seed, counter) and is
/// bit-identical on every platform. Substreams are derived by hashing a
/// purpose tag into the seed, which keeps independent consumers (weight
/// init, batching, sampling noise) decoupled from each other's draw counts.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0)
      : seed_(seed + mix64(stream * kGamma + 1)) {}

  static std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// FNV-1a hash of a tag string, for naming substreams.
  static std::uint64_t tag(std::string_view s) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001B3ULL;
    }
    return h;
  }

  CounterRng substream(std::string_view name) const {
    return CounterRng(seed_, tag(name));
  }

  std::uint64_t next_u64() { return mix64(seed_ + (++counter_) * kGamma); }

  /// Uniform in [0, 1).
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform in (0, 1]; never zero, safe under log().
  double uniform_pos() { return double((next_u64() >> 11) + 1) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller; the paired variate is cached.
  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = uniform_pos();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  std::uint64_t below(std::uint64_t n) { return n ? next_u64() % n : 0; }

  template <class Derived>
  void fill_gaussian(Eigen::DenseBase<Derived>& m) {
    using Scalar = typename Derived::Scalar;
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      for (Eigen::Index r = 0; r < m.rows(); ++r)
        m(r, c) = static_cast<Scalar>(gaussian());
  }

  template <class Derived>
  void fill_uniform(Eigen::DenseBase<Derived>& m, double lo, double hi) {
    using Scalar = typename Derived::Scalar;
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      for (Eigen::Index r = 0; r < m.rows(); ++r)
        m(r, c) = static_cast<Scalar>(uniform(lo, hi));
  }

  /// Deterministic Fisher-Yates shuffle.
  template <class Vec>
  void shuffle(Vec& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;
  std::uint64_t seed_ = 0;
  std::uint64_t counter_ = 0;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace timbre
