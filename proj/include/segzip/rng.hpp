#ifndef SEGZIP_RNG_HPP
#define SEGZIP_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>

namespace segzip {

// Counter-mixed seed derivation (splitmix64 finalizer over a Weyl step).
// Pure function of (master, replicate); replicates of the same master map
// to distinct, well-mixed seeds.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t replicate) {
  std::uint64_t z = master + (replicate + 1) * 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Random stream used by the simulator and sampling routines.
//
// mt19937_64 output is pinned by the standard, and all variate transforms
// below are hand-rolled, so a given seed reproduces the same draws on any
// platform (std::poisson_distribution et al. are implementation-defined
// and deliberately avoided).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform on [0, 1).
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // Uniform on (0, 1].
  double uniform_pos() {
    return static_cast<double>((engine_() >> 11) + 1) * 0x1.0p-53;
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Box-Muller (no spare caching; state is just the engine).
  double normal() {
    const double u1 = uniform_pos();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  // Poisson via CDF inversion; large means are split with the additivity
  // Poisson(mu) = Poisson(mu/2) + Poisson(mu/2) to stay clear of
  // exp(-mu) underflow.
  long long poisson(double mu) {
    if (!(mu > 0.0)) return 0;
    if (mu > 30.0) return poisson(mu * 0.5) + poisson(mu * 0.5);
    const double u = uniform();
    double term = std::exp(-mu);
    double cum = term;
    long long k = 0;
    while (u > cum && k < 400) {
      ++k;
      term *= mu / static_cast<double>(k);
      cum += term;
    }
    return k;
  }

  std::uint64_t raw() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace segzip

#endif
