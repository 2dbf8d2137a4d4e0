#ifndef SEGZIP_ZIP_HPP
#define SEGZIP_ZIP_HPP

#include "segzip/rng.hpp"

namespace segzip {

// Zero-inflated Poisson: mass pi on a structural zero, 1-pi on Poisson(mu).
// pi = 0 is admitted as the pure-Poisson boundary (simulation oracles and
// reduction tests rely on it); pi = 1 is not.
struct ZipParams {
  double mu = 1.0;  // Poisson mean, events per exposure unit
  double pi = 0.0;  // structural-zero probability, in [0, 1)

  bool valid() const;
};

// log P(Y = y).  Log-space throughout: log-sum-exp at y = 0, log-gamma for
// the factorial, so there is no intermediate underflow for mu up to 1e4 and
// y up to 1e5.
double zip_logpmf(long long y, const ZipParams& p);

// E Y = (1 - pi) mu.
double zip_mean(const ZipParams& p);

// Var Y = (1 - pi) mu (1 + pi mu).
double zip_var(const ZipParams& p);

// Structural-zero Bernoulli first, then a Poisson draw.
long long zip_sample(const ZipParams& p, Rng& rng);

// Stable logistic pair: inv_logit for |x| up to 700, logit on the open unit
// interval only.
double inv_logit(double x);
double logit(double p);

// log(1 + e^x) without overflow.
double log1pexp(double x);

}  // namespace segzip

#endif
