#pragma once

#include <cstdint>
#include <random>

namespace msbo {

/// splitmix64 step; used to derive independent stream seeds from a master
/// seed plus salt words (repeat index, iteration, purpose tag, ...).
inline std::uint64_t mix_seed(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

template <class... Salts>
inline std::uint64_t derive_seed(std::uint64_t master, Salts... salts) {
  std::uint64_t s = mix_seed(master);
  ((s = mix_seed(s ^ static_cast<std::uint64_t>(salts))), ...);
  return s;
}

/// Deterministic random stream. Uniforms come straight from mt19937_64
/// (portable by the standard); normals use Box-Muller rather than
/// std::normal_distribution so the stream does not depend on the stdlib.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  double uniform() {
    // 53-bit mantissa uniform in [0, 1)
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double mag = std::sqrt(-2.0 * std::log(u1));
    constexpr double kTwoPi = 6.283185307179586476925286766559;
    spare_ = mag * std::sin(kTwoPi * u2);
    have_spare_ = true;
    return mag * std::cos(kTwoPi * u2);
  }

  double log_uniform(double lo, double hi) {
    return std::exp(uniform(std::log(lo), std::log(hi)));
  }

  /// Beta(1, b) via inverse CDF: 1 - (1-u)^(1/b).
  double beta1(double b) { return 1.0 - std::pow(1.0 - uniform(), 1.0 / b); }

  std::uint64_t raw() { return gen_(); }

 private:
  std::mt19937_64 gen_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace msbo
