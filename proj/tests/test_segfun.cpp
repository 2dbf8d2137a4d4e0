#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "segzip/rng.hpp"
#include "segzip/segfun.hpp"

using namespace segzip;

namespace {
const ChangepointBounds kCovid{1.0, 48.0};
}

TEST_CASE("segmentation function values") {
  CHECK(seg_value(SegmentationKind::Linear, 40.0, 39.0) == 1.0);
  CHECK(seg_value(SegmentationKind::Linear, 39.0, 39.0) == 0.0);
  CHECK(seg_value(SegmentationKind::Quadratic, 42.0, 39.0) == 9.0);
}

TEST_CASE("segmentation derivative with strict indicator") {
  CHECK(seg_dpsi(SegmentationKind::Linear, 40.0, 39.0) == -1.0);
  CHECK(seg_dpsi(SegmentationKind::Linear, 38.0, 39.0) == 0.0);
  CHECK(seg_dpsi(SegmentationKind::Linear, 39.0, 39.0) == 0.0);
  CHECK(seg_dpsi(SegmentationKind::Quadratic, 42.0, 39.0) == -6.0);
}

TEST_CASE("hinge nonnegativity") {
  Rng rng(3);
  for (int i = 0; i < 500; ++i) {
    const double t = -50.0 + 100.0 * rng.uniform();
    const double psi = -50.0 + 100.0 * rng.uniform();
    for (auto kind : {SegmentationKind::Linear, SegmentationKind::Quadratic}) {
      CHECK(seg_value(kind, t, psi) >= 0.0);
      if (t <= psi) CHECK(seg_value(kind, t, psi) == 0.0);
    }
  }
}

TEST_CASE("changepoint transform") {
  CHECK(cp_from_lambda(0.274, kCovid) == doctest::Approx(27.70).epsilon(2e-4));
  CHECK(cp_from_lambda(0.0, kCovid) == doctest::Approx(24.5).epsilon(1e-12));
  CHECK(std::abs(cp_from_lambda(-20.0, kCovid) - 1.0) < 1e-7);
  SUBCASE("stable and inside the open interval for extreme lambda") {
    for (double lam : {-700.0, -36.5, 36.5, 700.0}) {
      const double psi = cp_from_lambda(lam, kCovid);
      CHECK(std::isfinite(psi));
      CHECK(psi > kCovid.l1);
      CHECK(psi < kCovid.l2);
    }
    CHECK(std::abs(cp_from_lambda(700.0, kCovid) - 48.0) < 1e-12);
    CHECK(std::abs(cp_from_lambda(-700.0, kCovid) - 1.0) < 1e-12);
  }
  SUBCASE("strictly increasing") {
    double prev = cp_from_lambda(-30.0, kCovid);
    for (double lam = -29.75; lam <= 30.0; lam += 0.25) {
      const double cur = cp_from_lambda(lam, kCovid);
      CHECK(cur > prev);
      prev = cur;
    }
  }
  CHECK_THROWS_AS(cp_from_lambda(0.0, ChangepointBounds{2.0, 2.0}),
                  std::domain_error);
}

TEST_CASE("changepoint transform derivative") {
  CHECK(cp_derivative(0.0, kCovid) == doctest::Approx(11.75).epsilon(1e-12));
  CHECK(cp_derivative(0.274, kCovid) == doctest::Approx(11.5322).epsilon(1e-5));
  CHECK(cp_derivative(50.0, kCovid) < 1e-18);
  CHECK(cp_derivative(-50.0, kCovid) < 1e-18);
  SUBCASE("finite-difference agreement") {
    for (double lam = -10.0; lam <= 10.0; lam += 0.5) {
      const double h = 1e-6;
      const double fd =
          (cp_from_lambda(lam + h, kCovid) - cp_from_lambda(lam - h, kCovid)) /
          (2.0 * h);
      CHECK(cp_derivative(lam, kCovid) ==
            doctest::Approx(fd).epsilon(1e-6));
    }
  }
}

TEST_CASE("inverse changepoint transform") {
  CHECK(lambda_from_cp(24.5, kCovid) == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(lambda_from_cp(27.70, kCovid) ==
        doctest::Approx(0.27406).epsilon(4e-4));
  CHECK_THROWS_AS(lambda_from_cp(1.0, kCovid), std::domain_error);
  CHECK_THROWS_AS(lambda_from_cp(48.0, kCovid), std::domain_error);
  CHECK_THROWS_AS(lambda_from_cp(0.5, kCovid), std::domain_error);
  SUBCASE("round trip on the padded interval") {
    const double w = kCovid.width();
    for (double f = 1e-6; f <= 1.0 - 1e-6; f += 0.01) {
      const double psi = kCovid.l1 + f * w;
      CHECK(std::abs(cp_from_lambda(lambda_from_cp(psi, kCovid), kCovid) -
                     psi) < 1e-10);
    }
  }
}

TEST_CASE("chain rule of the composed segmentation term") {
  Rng rng(17);
  for (int i = 0; i < 300; ++i) {
    const double lam = -3.0 + 6.0 * rng.uniform();
    const double t = 1.0 + 47.0 * rng.uniform();
    const double psi = cp_from_lambda(lam, kCovid);
    if (std::abs(t - psi) < 1e-3) continue;  // away from the kink
    for (auto kind : {SegmentationKind::Linear, SegmentationKind::Quadratic}) {
      const double h = 1e-6;
      const double fd = (seg_value(kind, t, cp_from_lambda(lam + h, kCovid)) -
                         seg_value(kind, t, cp_from_lambda(lam - h, kCovid))) /
                        (2.0 * h);
      const double analytic =
          seg_dpsi(kind, t, psi) * cp_derivative(lam, kCovid);
      if (std::abs(analytic) > 1e-12)
        CHECK(fd == doctest::Approx(analytic).epsilon(1e-5));
      else
        CHECK(std::abs(fd) < 1e-5);
    }
  }
}

TEST_CASE("smoothness at the kink differs by kind") {
  const double psi = 10.0, h = 1e-7;
  // one-sided first differences in t at t = psi
  auto left = [&](SegmentationKind k) {
    return (seg_value(k, psi, psi) - seg_value(k, psi - h, psi)) / h;
  };
  auto right = [&](SegmentationKind k) {
    return (seg_value(k, psi + h, psi) - seg_value(k, psi, psi)) / h;
  };
  // quadratic: both one-sided derivatives vanish at the kink
  CHECK(std::abs(left(SegmentationKind::Quadratic)) < 1e-6);
  CHECK(std::abs(right(SegmentationKind::Quadratic)) < 1e-6);
  // linear: jump from 0 to 1
  CHECK(std::abs(left(SegmentationKind::Linear)) < 1e-6);
  CHECK(right(SegmentationKind::Linear) == doctest::Approx(1.0).epsilon(1e-6));
}
