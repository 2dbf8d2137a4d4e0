#include <doctest.h>

#include <Eigen/Cholesky>
#include <cmath>

#include "segzip/model.hpp"
#include "segzip/rng.hpp"
#include "segzip/zip.hpp"

using namespace segzip;

namespace {

ModelSpec covid_like_spec() {
  // one base covariate plus delta and lambda slots, two zero-model columns,
  // one z column plus d and l: q_total = 3
  ModelSpec spec;
  spec.p_count = 1;
  spec.p_zero = 2;
  spec.q_cluster = 1;
  spec.cp_mode = ChangepointMode::random(ChangepointBounds{1.0, 48.0});
  spec.random_delta = true;
  spec.random_lambda = true;
  spec.zeta_mode = ZetaMode::PerClusterMonth;
  return spec;
}

}  // namespace

TEST_CASE("packed length arithmetic") {
  const ModelSpec spec = covid_like_spec();
  CHECK(spec.n_count_coef() == 3);  // delta and lambda count inside the block
  CHECK(spec.q_total() == 3);
  CHECK(spec.n_chol() == 6);
  CHECK(spec.n_params() == 3 + 2 + 6 + 1);
}

TEST_CASE("pack/unpack round trip is exact") {
  const ModelSpec spec = covid_like_spec();
  Rng rng(5);
  Eigen::VectorXd flat(spec.n_params());
  for (int i = 0; i < flat.size(); ++i) flat[i] = rng.normal();
  const ParamPack p = unpack_params(flat, spec);
  const Eigen::VectorXd back = pack_params(p, spec);
  REQUIRE(back.size() == flat.size());
  for (int i = 0; i < flat.size(); ++i) CHECK(back[i] == flat[i]);
}

TEST_CASE("pack dimension mismatch is a structural error") {
  const ModelSpec spec = covid_like_spec();
  ParamPack p;
  p.beta = Eigen::VectorXd::Zero(2);  // should be 3
  p.gamma = Eigen::VectorXd::Zero(2);
  p.chol_g = Eigen::VectorXd::Zero(6);
  CHECK_THROWS_AS(pack_params(p, spec), std::invalid_argument);
  CHECK_THROWS_AS(unpack_params(Eigen::VectorXd::Zero(3), spec),
                  std::invalid_argument);
}

TEST_CASE("log-Cholesky covariance map") {
  SUBCASE("zeros give the identity") {
    const Eigen::MatrixXd g = cov_from_chol(Eigen::VectorXd::Zero(3), 2);
    CHECK(g.isApprox(Eigen::MatrixXd::Identity(2, 2), 1e-15));
  }
  SUBCASE("diagonal logs") {
    Eigen::VectorXd c(3);
    c << std::log(2.0), 0.0, std::log(3.0);
    const Eigen::MatrixXd g = cov_from_chol(c, 2);
    CHECK(g(0, 0) == doctest::Approx(4.0).epsilon(1e-14));
    CHECK(g(1, 1) == doctest::Approx(9.0).epsilon(1e-14));
    CHECK(g(0, 1) == 0.0);
  }
  SUBCASE("off-diagonal entry, verified against L L^T by hand") {
    Eigen::VectorXd c(3);
    c << 0.0, 1.0, 0.0;  // L = [[1,0],[1,1]]
    const Eigen::MatrixXd g = cov_from_chol(c, 2);
    Eigen::MatrixXd l(2, 2);
    l << 1.0, 0.0, 1.0, 1.0;
    const Eigen::MatrixXd expect = l * l.transpose();
    CHECK(g.isApprox(expect, 1e-15));
    CHECK(g(0, 0) == 1.0);
    CHECK(g(1, 0) == 1.0);
    CHECK(g(1, 1) == 2.0);
  }
  SUBCASE("always positive definite, inverse map recovers") {
    Rng rng(11);
    for (int rep = 0; rep < 1000; ++rep) {
      const int q = 1 + static_cast<int>(rng.uniform() * 4);
      Eigen::VectorXd c(q * (q + 1) / 2);
      for (int i = 0; i < c.size(); ++i) c[i] = rng.normal(0.0, 0.8);
      const Eigen::MatrixXd g = cov_from_chol(c, q);
      Eigen::LLT<Eigen::MatrixXd> llt(g);
      CHECK(llt.info() == Eigen::Success);
      const Eigen::VectorXd back = chol_from_cov(g);
      CHECK((back - c).lpNorm<Eigen::Infinity>() < 1e-10);
    }
  }
}

TEST_CASE("count-model linear predictor") {
  ModelSpec spec;
  spec.p_count = 2;
  spec.p_zero = 1;
  spec.q_cluster = 2;
  spec.cp_mode = ChangepointMode::known(39.0);
  spec.random_delta = true;

  Observation obs;
  obs.offset = 1.0;
  obs.x_row = {1.0, 5.0};
  obs.w_row = {1.0};
  obs.z_row = {1.0, 5.0};

  ParamPack p;
  p.beta = Eigen::VectorXd::Zero(3);
  p.gamma = Eigen::VectorXd::Zero(1);
  p.chol_g = Eigen::VectorXd::Zero(6);

  SUBCASE("all coefficients zero") {
    CHECK(eta_count(spec, p, obs, Eigen::VectorXd::Zero(3), 3.0) == 0.0);
  }
  SUBCASE("offset and intercept") {
    obs.offset = 100.0;
    obs.x_row = {1.0, 0.0};
    p.beta << -5.345, 0.0, 0.0;
    CHECK(eta_count(spec, p, obs, Eigen::VectorXd::Zero(3), 0.0) ==
          doctest::Approx(-0.73983).epsilon(1e-5));
  }
  SUBCASE("scenario-style truth below the changepoint") {
    p.beta << 1.0, 0.2, 0.2;  // beta0, beta1, delta
    CHECK(eta_count(spec, p, obs, Eigen::VectorXd::Zero(3), 0.0) ==
          doctest::Approx(2.0).epsilon(1e-14));
  }
  SUBCASE("delta and d_i both multiply the segmented term") {
    p.beta << 0.0, 0.0, 0.5;
    Eigen::VectorXd re = Eigen::VectorXd::Zero(3);
    re[2] = 0.25;  // d_i
    CHECK(eta_count(spec, p, obs, re, 2.0) ==
          doctest::Approx(1.5).epsilon(1e-14));
  }
  SUBCASE("layout mismatch is rejected") {
    CHECK_THROWS_AS(eta_count(spec, p, obs, Eigen::VectorXd::Zero(2), 0.0),
                    std::invalid_argument);
  }
}

TEST_CASE("eta_count is linear in beta, b, delta at fixed seg term") {
  ModelSpec spec;
  spec.p_count = 2;
  spec.p_zero = 1;
  spec.q_cluster = 2;
  spec.cp_mode = ChangepointMode::known(3.0);
  spec.random_delta = true;
  Observation obs;
  obs.offset = 1.0;  // log offset 0 so the predictor is homogeneous
  obs.x_row = {0.7, -1.2};
  obs.w_row = {1.0};
  obs.z_row = {0.4, 2.0};
  Rng rng(23);
  for (int rep = 0; rep < 100; ++rep) {
    ParamPack p1, p2;
    auto rand_pack = [&](ParamPack& p) {
      p.beta = Eigen::VectorXd::NullaryExpr(3, [&](int) { return rng.normal(); });
      p.gamma = Eigen::VectorXd::Zero(1);
      p.chol_g = Eigen::VectorXd::Zero(6);
    };
    rand_pack(p1);
    rand_pack(p2);
    Eigen::VectorXd r1 =
        Eigen::VectorXd::NullaryExpr(3, [&](int) { return rng.normal(); });
    Eigen::VectorXd r2 =
        Eigen::VectorXd::NullaryExpr(3, [&](int) { return rng.normal(); });
    const double a = rng.normal();
    const double seg = 1.7;
    ParamPack psum = p1;
    psum.beta = a * p1.beta + p2.beta;
    const double lhs = eta_count(spec, psum, obs, a * r1 + r2, seg);
    const double rhs = a * eta_count(spec, p1, obs, r1, seg) +
                       eta_count(spec, p2, obs, r2, seg);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
  }
}

TEST_CASE("zero-model linear predictor") {
  ModelSpec spec;
  spec.p_count = 1;
  spec.p_zero = 2;
  spec.q_cluster = 0;
  Observation obs;
  obs.x_row = {1.0};
  obs.w_row = {1.0, 1.0};
  ParamPack p;
  p.beta = Eigen::VectorXd::Zero(1);
  p.gamma = Eigen::VectorXd::Zero(2);
  p.chol_g = Eigen::VectorXd::Zero(0);

  SUBCASE("scenario intercept") {
    obs.w_row = {1.0, 0.0};
    p.gamma << -0.5, 0.0;
    const double eta = eta_zero(spec, p, obs);
    CHECK(eta == doctest::Approx(-0.5).epsilon(1e-15));
    CHECK(inv_logit(eta) == doctest::Approx(0.37754).epsilon(1e-5));
  }
  SUBCASE("all zero") {
    CHECK(eta_zero(spec, p, obs) == 0.0);
    CHECK(inv_logit(0.0) == 0.5);
  }
  SUBCASE("application-style arithmetic") {
    p.gamma << -5.662, 2.738;
    CHECK(eta_zero(spec, p, obs) == doctest::Approx(-2.924).epsilon(1e-12));
  }
  SUBCASE("dimension mismatch") {
    obs.w_row = {1.0};
    CHECK_THROWS_AS(eta_zero(spec, p, obs), std::invalid_argument);
  }
}

TEST_CASE("spec validation") {
  ModelSpec spec;
  spec.p_count = 1;
  spec.p_zero = 1;
  spec.random_lambda = true;  // without a random changepoint
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
  spec.random_lambda = false;
  spec.random_delta = true;  // without any changepoint term
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
  spec.random_delta = false;
  spec.cp_mode = ChangepointMode::random(ChangepointBounds{5.0, 2.0});
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
}

TEST_CASE("per-cluster bounds resolution") {
  ModelSpec spec;
  spec.p_count = 1;
  spec.p_zero = 1;
  spec.cp_mode = ChangepointMode::random_per_cluster();
  Cluster c;
  c.id = "a";
  for (double t : {3.0, 9.0, 5.0}) {
    Observation o;
    o.t = t;
    c.observations.push_back(o);
  }
  const ChangepointBounds b = spec.bounds_for(c);
  CHECK(b.l1 == 3.0);
  CHECK(b.l2 == 9.0);
}
