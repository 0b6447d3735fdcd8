#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "elwqr/missingness.hpp"
#include "elwqr/rng.hpp"
#include "test_util.hpp"

using namespace elwqr;

namespace {

Dataset tiny_dataset(const std::vector<double>& y, const std::vector<double>& z,
                     const std::vector<int>& delta) {
  Dataset data;
  data.dim_x = 1;
  data.dim_z = 1;
  for (size_t i = 0; i < y.size(); ++i) {
    Observation o;
    o.y = y[i];
    o.z = Eigen::VectorXd::Constant(1, z[i]);
    o.delta = delta[i] != 0;
    if (o.delta) o.x = Eigen::VectorXd::Constant(1, 0.1 * static_cast<double>(i));
    data.rows.push_back(o);
  }
  return data;
}

// The general quotient form of the score, written independently of the
// simplified implementation.
Eigen::VectorXd score_quotient(int delta, double y, const Eigen::VectorXd& z,
                               const Eigen::VectorXd& gamma) {
  const double pi = pi_logistic(y, z, gamma);
  Eigen::VectorXd h(gamma.size());
  h[0] = 1.0;
  h[1] = y;
  h.segment(2, z.size()) = z;
  const Eigen::VectorXd dpi = pi * (1.0 - pi) * h;
  return (static_cast<double>(delta) - pi) / (pi * (1.0 - pi)) * dpi;
}

} // namespace

TEST_CASE("pi_logistic values") {
  Eigen::VectorXd z1 = Eigen::VectorXd::Zero(1);
  CHECK(pi_logistic(3.7, z1, Eigen::VectorXd::Zero(3)) == doctest::Approx(0.5));

  Eigen::VectorXd g(3);
  g << 0.0, std::log(3.0), 0.0;
  CHECK(pi_logistic(1.0, z1, g) == doctest::Approx(0.75).epsilon(1e-12));

  g << 0.0, 1.0, 0.0;
  const double sat = pi_logistic(1000.0, z1, g);
  CHECK(sat > 1.0 - 1e-12);
  CHECK(sat < 1.0);
  const double anti = pi_logistic(-1000.0, z1, g);
  CHECK(anti > 0.0);
  CHECK(anti < 1e-12);

  CHECK_THROWS_AS(pi_logistic(1.0, z1, Eigen::VectorXd::Zero(5)),
                  std::invalid_argument);
}

TEST_CASE("binomial loglik values") {
  // gamma = 0 gives n * log(0.5)
  Dataset d4 = tiny_dataset({0.3, -1.0, 2.0, 0.7}, {1.0, 0.0, -1.0, 0.5},
                            {1, 1, 1, 0});
  CHECK(binomial_loglik(d4, Eigen::VectorXd::Zero(3)) ==
        doctest::Approx(4.0 * std::log(0.5)).epsilon(1e-12));

  // intercept-only with gamma0 = log 3, pi = 0.75 for every row
  Dataset dz = tiny_dataset({0.0, 0.0, 0.0, 0.0}, {0.0, 0.0, 0.0, 0.0},
                            {1, 1, 1, 0});
  Eigen::VectorXd g(3);
  g << std::log(3.0), 0.0, 0.0;
  CHECK(binomial_loglik(dz, g) ==
        doctest::Approx(3.0 * std::log(0.75) + std::log(0.25)).epsilon(1e-12));

  // perfect-fit limit: all observed, saturating predictor
  Dataset all1 = tiny_dataset({5.0, 6.0, 7.0}, {0.0, 0.0, 0.0}, {1, 1, 1});
  Eigen::VectorXd big(3);
  big << 0.0, 10.0, 0.0;
  const double ll = binomial_loglik(all1, big);
  CHECK(ll <= 0.0);
  CHECK(ll > -1e-15);

  // never positive
  Rng rng(5);
  for (int rep = 0; rep < 50; ++rep) {
    Dataset data = testutil::random_dataset(20, 100 + static_cast<std::uint64_t>(rep));
    Eigen::VectorXd gam(3);
    gam << rng.normal(), rng.normal(), rng.normal();
    CHECK(binomial_loglik(data, gam) <= 0.0);
  }
}

TEST_CASE("score_ub simplified form") {
  Eigen::VectorXd z(1);
  z << 3.0;
  Eigen::VectorXd got = score_ub(1, 2.0, z, Eigen::VectorXd::Zero(3));
  CHECK(got[0] == doctest::Approx(0.5));
  CHECK(got[1] == doctest::Approx(1.0));
  CHECK(got[2] == doctest::Approx(1.5));

  z << 0.0;
  got = score_ub(0, 0.0, z, Eigen::VectorXd::Zero(3));
  CHECK(got[0] == doctest::Approx(-0.5));
  CHECK(got[1] == doctest::Approx(0.0));
  CHECK(got[2] == doctest::Approx(0.0));

  Rng rng(17);
  for (int rep = 0; rep < 100; ++rep) {
    const double y = rng.normal() * 2.0;
    Eigen::VectorXd zz(2);
    zz << rng.normal(), rng.normal();
    Eigen::VectorXd gamma(4);
    for (int j = 0; j < 4; ++j) gamma[j] = rng.normal();
    const int delta = rng.uniform01() < 0.5 ? 1 : 0;

    // agreement with the general quotient formula
    Eigen::VectorXd simp = score_ub(delta, y, zz, gamma);
    Eigen::VectorXd quot = score_quotient(delta, y, zz, gamma);
    CHECK((simp - quot).lpNorm<Eigen::Infinity>() < 1e-10);

    // identity in delta: score(1) + score(0) = (1 - 2 pi) h
    Eigen::VectorXd both = score_ub(1, y, zz, gamma) + score_ub(0, y, zz, gamma);
    const double pi = pi_logistic(y, zz, gamma);
    Eigen::VectorXd h(4);
    h << 1.0, y, zz[0], zz[1];
    CHECK((both - (1.0 - 2.0 * pi) * h).lpNorm<Eigen::Infinity>() < 1e-12);
  }
}

TEST_CASE("logistic MLE: intercept-only closed forms") {
  Eigen::MatrixXd h1 = Eigen::MatrixXd::Ones(4, 1);
  MleFit fit = fit_logistic_mle(h1, {1, 1, 1, 0});
  CHECK(fit.status == MleStatus::converged);
  CHECK(fit.gamma[0] == doctest::Approx(std::log(3.0)).epsilon(1e-8));

  fit = fit_logistic_mle(h1, {1, 0, 1, 0});
  CHECK(fit.status == MleStatus::converged);
  CHECK(fit.gamma[0] == doctest::Approx(0.0).epsilon(1e-10));
}

TEST_CASE("logistic MLE: separation and validation") {
  // perfectly separable: delta = 1{y > 0}
  Dataset sep = tiny_dataset({1.0, 2.0, 3.0, -1.0, -2.0, -3.0},
                             {0.3, -0.2, 0.1, 0.4, -0.1, 0.2},
                             {1, 1, 1, 0, 0, 0});
  MleFit fit = fit_gamma_mle(sep);
  CHECK(fit.status == MleStatus::separated);

  // all responses equal is a validation error
  Dataset all1 = tiny_dataset({1.0, 2.0, 3.0}, {0.1, 0.2, 0.3}, {1, 1, 1});
  CHECK_THROWS_AS(fit_gamma_mle(all1), std::invalid_argument);

  // rank-deficient basis with a nonzero score direction: the Newton step is
  // singular and the fit is flagged separated
  Dataset flat = tiny_dataset({1.0, 1.0, 1.0, 1.0}, {2.0, 2.0, 2.0, 2.0},
                              {1, 1, 1, 0});
  CHECK(fit_gamma_mle(flat).status == MleStatus::separated);
}

TEST_CASE("logistic MLE on generated data") {
  Dataset data = testutil::random_dataset(400, 99);
  MleFit fit = fit_gamma_mle(data);
  REQUIRE(fit.status == MleStatus::converged);
  CHECK(fit.score_norm < 1e-8);
  CHECK(fit.min_pi > 0.0);

  // score really vanishes: recompute from scratch
  Eigen::VectorXd score = Eigen::VectorXd::Zero(3);
  for (int i = 0; i < data.n(); ++i) {
    const Observation& o = data.rows[static_cast<size_t>(i)];
    score += score_ub(o.delta ? 1 : 0, o.y, o.z, fit.gamma);
  }
  CHECK(score.lpNorm<Eigen::Infinity>() < 1e-8);

  // local maximality against a probe cloud around gamma-hat
  Rng rng(123);
  const double ll_hat = binomial_loglik(data, fit.gamma);
  for (int probe = 0; probe < 100; ++probe) {
    Eigen::VectorXd g = fit.gamma;
    for (int j = 0; j < 3; ++j) g[j] += 0.2 * rng.normal();
    CHECK(binomial_loglik(data, g) <= ll_hat + 1e-12);
  }

  // determinism: the same input reproduces gamma-hat bit for bit
  MleFit rerun = fit_gamma_mle(data);
  for (int j = 0; j < 3; ++j) CHECK(rerun.gamma[j] == fit.gamma[j]);

  // permuting rows re-associates the floating-point sums, so equality there
  // holds to solver tolerance rather than bitwise
  Dataset shuffled = data;
  std::reverse(shuffled.rows.begin(), shuffled.rows.end());
  MleFit fit2 = fit_gamma_mle(shuffled);
  for (int j = 0; j < 3; ++j)
    CHECK(fit2.gamma[j] == doctest::Approx(fit.gamma[j]).epsilon(1e-6));
}

TEST_CASE("Newton Hessian agrees with finite differences of the loglik") {
  Dataset data = testutil::random_dataset(60, 2024);
  Eigen::VectorXd gamma(3);
  gamma << 0.2, -0.3, 0.4;

  // analytic: -sum pi(1-pi) h h'
  Eigen::MatrixXd analytic = Eigen::MatrixXd::Zero(3, 3);
  for (int i = 0; i < data.n(); ++i) {
    const Observation& o = data.rows[static_cast<size_t>(i)];
    const double pi = pi_logistic(o.y, o.z, gamma);
    Eigen::VectorXd h(3);
    h << 1.0, o.y, o.z[0];
    analytic -= pi * (1.0 - pi) * h * h.transpose();
  }

  const double eps = 1e-5;
  Eigen::MatrixXd fd(3, 3);
  for (int a = 0; a < 3; ++a) {
    for (int b = 0; b < 3; ++b) {
      Eigen::VectorXd gpp = gamma, gpm = gamma, gmp = gamma, gmm = gamma;
      gpp[a] += eps; gpp[b] += eps;
      gpm[a] += eps; gpm[b] -= eps;
      gmp[a] -= eps; gmp[b] += eps;
      gmm[a] -= eps; gmm[b] -= eps;
      fd(a, b) = (binomial_loglik(data, gpp) - binomial_loglik(data, gpm) -
                  binomial_loglik(data, gmp) + binomial_loglik(data, gmm)) /
                 (4.0 * eps * eps);
    }
  }
  CHECK((fd - analytic).norm() / analytic.norm() < 1e-5);
}
