#include "segzip/zip.hpp"

#include <cmath>
#include <stdexcept>

namespace segzip {

bool ZipParams::valid() const {
  return std::isfinite(mu) && mu > 0.0 && pi >= 0.0 && pi < 1.0;
}

namespace {

void check(const ZipParams& p) {
  if (!p.valid())
    throw std::domain_error("ZipParams: need mu > 0 and pi in [0,1)");
}

double logsumexp2(double a, double b) {
  const double m = a > b ? a : b;
  return m + std::log1p(std::exp((a > b ? b : a) - m));
}

}  // namespace

double zip_logpmf(long long y, const ZipParams& p) {
  check(p);
  if (y < 0) throw std::domain_error("zip_logpmf: y must be a count");
  const double log1mpi = std::log1p(-p.pi);
  if (y == 0) {
    if (p.pi == 0.0) return -p.mu;
    return logsumexp2(std::log(p.pi), log1mpi - p.mu);
  }
  const double yd = static_cast<double>(y);
  return log1mpi + yd * std::log(p.mu) - p.mu - std::lgamma(yd + 1.0);
}

double zip_mean(const ZipParams& p) {
  check(p);
  return (1.0 - p.pi) * p.mu;
}

double zip_var(const ZipParams& p) {
  check(p);
  return (1.0 - p.pi) * p.mu * (1.0 + p.pi * p.mu);
}

long long zip_sample(const ZipParams& p, Rng& rng) {
  check(p);
  if (p.pi > 0.0 && rng.bernoulli(p.pi)) return 0;
  return rng.poisson(p.mu);
}

double inv_logit(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double logit(double p) {
  if (!(p > 0.0 && p < 1.0))
    throw std::domain_error("logit: argument must lie strictly in (0,1)");
  return std::log(p) - std::log1p(-p);
}

double log1pexp(double x) {
  if (x > 35.0) return x + std::exp(-x);
  if (x < -35.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

}  // namespace segzip
