#include <doctest.h>

#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "segzip/rng.hpp"
#include "segzip/zip.hpp"

using namespace segzip;

TEST_CASE("zip_logpmf matches direct evaluation") {
  // log(0.5 + 0.5 e^-1): frozen from the 40-digit oracle -0.37988549304...
  const double direct = std::log(0.5 + 0.5 * std::exp(-1.0));
  CHECK(zip_logpmf(0, {1.0, 0.5}) == doctest::Approx(direct).epsilon(1e-14));
  CHECK(zip_logpmf(0, {1.0, 0.5}) ==
        doctest::Approx(-0.3798854930417225).epsilon(1e-12));

  // pi = 0 reduces to the Poisson log-pmf: -2 + 3 ln 2 - ln 6
  const double pois = -2.0 + 3.0 * std::log(2.0) - std::log(6.0);
  CHECK(zip_logpmf(3, {2.0, 0.0}) == doctest::Approx(pois).epsilon(1e-14));
  CHECK(zip_logpmf(3, {2.0, 0.0}) == doctest::Approx(-1.7123179).epsilon(1e-6));

  // degenerate mean puts all mass at zero
  CHECK(std::abs(zip_logpmf(0, {1e-12, 0.3})) < 1e-11);
}

TEST_CASE("zip_logpmf domain errors") {
  CHECK_THROWS_AS(zip_logpmf(0, {0.0, 0.2}), std::domain_error);
  CHECK_THROWS_AS(zip_logpmf(0, {-1.0, 0.2}), std::domain_error);
  CHECK_THROWS_AS(zip_logpmf(0, {1.0, -0.1}), std::domain_error);
  CHECK_THROWS_AS(zip_logpmf(0, {1.0, 1.0}), std::domain_error);
  CHECK_THROWS_AS(zip_logpmf(-1, {1.0, 0.2}), std::domain_error);
  CHECK_THROWS_AS(zip_mean({1.0, 1.5}), std::domain_error);
  CHECK_THROWS_AS(zip_var({-2.0, 0.5}), std::domain_error);
}

TEST_CASE("zip_logpmf stays finite at extreme scales") {
  CHECK(std::isfinite(zip_logpmf(100000, {10000.0, 0.3})));
  CHECK(std::isfinite(zip_logpmf(0, {10000.0, 1e-12})));
  CHECK(std::isfinite(zip_logpmf(1, {1e4, 0.999})));
}

TEST_CASE("zip moments") {
  CHECK(zip_mean({2.0, 0.25}) == doctest::Approx(1.5).epsilon(1e-15));
  CHECK(zip_mean({3.7, 0.0}) == doctest::Approx(3.7).epsilon(1e-15));
  CHECK(zip_var({2.0, 0.25}) == doctest::Approx(2.25).epsilon(1e-15));
  CHECK(zip_var({2.0, 0.0}) == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("normalization and truncated moments over random parameters") {
  Rng rng(20240517);
  for (int rep = 0; rep < 200; ++rep) {
    ZipParams p{0.05 + 29.95 * rng.uniform(), 0.95 * rng.uniform()};
    double total = 0.0, mean = 0.0;
    for (int y = 0; y <= 200; ++y) total += std::exp(zip_logpmf(y, p));
    CHECK(std::abs(total - 1.0) < 1e-10);
    for (int y = 0; y <= 200; ++y) mean += y * std::exp(zip_logpmf(y, p));
    double var = 0.0;
    for (int y = 0; y <= 200; ++y)
      var += (y - mean) * (y - mean) * std::exp(zip_logpmf(y, p));
    CHECK(std::abs(mean - zip_mean(p)) < 1e-8);
    CHECK(std::abs(var - zip_var(p)) < 1e-8);
  }
}

TEST_CASE("pi = 0 boundary equals the Poisson law exactly") {
  Rng rng(7);
  for (int rep = 0; rep < 50; ++rep) {
    const double mu = 0.1 + 20.0 * rng.uniform();
    const long long y = rng.poisson(5.0);
    const double pois =
        static_cast<double>(y) * std::log(mu) - mu - std::lgamma(y + 1.0);
    CHECK(std::abs(zip_logpmf(y, {mu, 0.0}) - pois) < 1e-14);
  }
}

TEST_CASE("monte-carlo oracle for mean and variance") {
  const int n = 1000000;
  ZipParams p{1.0, 0.5};
  Rng rng(99);
  double s = 0.0, ss = 0.0;
  for (int i = 0; i < n; ++i) {
    const double y = static_cast<double>(zip_sample(p, rng));
    s += y;
    ss += y * y;
  }
  const double mean = s / n;
  const double var = ss / n - mean * mean;
  const double se_mean = std::sqrt(zip_var(p) / n);
  CHECK(std::abs(mean - zip_mean(p)) < 3.0 * se_mean);
  // SE of the sample variance via the truncated fourth moment
  double m4 = 0.0;
  const double mu_true = zip_mean(p);
  for (int y = 0; y <= 200; ++y)
    m4 += std::pow(y - mu_true, 4.0) * std::exp(zip_logpmf(y, p));
  const double se_var =
      std::sqrt((m4 - zip_var(p) * zip_var(p)) / static_cast<double>(n));
  CHECK(std::abs(var - zip_var(p)) < 3.0 * se_var);
}

TEST_CASE("sampling law") {
  SUBCASE("saturated zero inflation") {
    ZipParams p{5.0, 0.999999};
    Rng rng(11);
    int zeros = 0;
    for (int i = 0; i < 100000; ++i) zeros += zip_sample(p, rng) == 0;
    CHECK(zeros >= 99900);
  }
  SUBCASE("analytic zero mass") {
    ZipParams p{1.0, 0.5};
    Rng rng(12);
    const int n = 100000;
    int zeros = 0;
    for (int i = 0; i < n; ++i) zeros += zip_sample(p, rng) == 0;
    const double p0 = 0.5 + 0.5 * std::exp(-1.0);
    const double se = std::sqrt(p0 * (1.0 - p0) / n);
    CHECK(std::abs(zeros / static_cast<double>(n) - p0) < 3.0 * se);
  }
  SUBCASE("same seed reproduces the draw sequence") {
    ZipParams p{3.0, 0.3};
    Rng a(123), b(123);
    for (int i = 0; i < 1000; ++i) CHECK(zip_sample(p, a) == zip_sample(p, b));
  }
}

TEST_CASE("chi-square goodness of fit of the sampler") {
  ZipParams p{4.0, 0.35};
  Rng rng(2024);
  const int n = 100000;
  std::vector<int> counts(40, 0);
  for (int i = 0; i < n; ++i) {
    long long y = zip_sample(p, rng);
    counts[std::min<long long>(y, 39)]++;
  }
  std::vector<double> expected(40, 0.0);
  for (int y = 0; y < 39; ++y) expected[y] = n * std::exp(zip_logpmf(y, p));
  expected[39] = n;
  for (int y = 0; y < 39; ++y) expected[39] -= expected[y];
  // merge bins until each expected count reaches 5
  double stat = 0.0;
  int bins = 0;
  double obs_acc = 0.0, exp_acc = 0.0;
  for (int y = 0; y < 40; ++y) {
    obs_acc += counts[y];
    exp_acc += expected[y];
    if (exp_acc >= 5.0) {
      stat += (obs_acc - exp_acc) * (obs_acc - exp_acc) / exp_acc;
      ++bins;
      obs_acc = exp_acc = 0.0;
    }
  }
  if (exp_acc > 0.0) {
    stat += (obs_acc - exp_acc) * (obs_acc - exp_acc) / exp_acc;
    ++bins;
  }
  const boost::math::chi_squared chi(bins - 1);
  CHECK(stat < boost::math::quantile(chi, 0.999));
}

TEST_CASE("logistic link pair") {
  CHECK(inv_logit(0.0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(inv_logit(-0.5) == doctest::Approx(0.3775407).epsilon(1e-6));
  CHECK(logit(0.5) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(std::isfinite(inv_logit(700.0)));
  CHECK(std::isfinite(inv_logit(-700.0)));
  // round trip: full precision wherever the double p keeps the information
  // (everywhere below saturation; above it, the half-ulp of p bounds x)
  for (double x = -30.0; x <= 9.0; x += 0.25)
    CHECK(std::abs(logit(inv_logit(x)) - x) < 1e-12);
  for (double x = 9.25; x <= 30.0; x += 0.25)
    CHECK(std::abs(logit(inv_logit(x)) - x) < 4e-3);  // few-ulp bound on p
  CHECK_THROWS_AS(logit(0.0), std::domain_error);
  CHECK_THROWS_AS(logit(1.0), std::domain_error);
}
