#include <cmath>
#include <numbers>

#include "doctest.h"
#include "sdfilter/errors.hpp"
#include "sdfilter/lgss.hpp"
#include "test_support.hpp"

using namespace sdfilter;
using test::max_rel_err;
using test::random_stable_system;
using test::simulate_lgss;

namespace {

SystemMatrices univariate(double Z, double H, double T, double Q, double c) {
  SystemMatrices sys;
  sys.Z = Mat::Constant(1, 1, Z);
  sys.H = Mat::Constant(1, 1, H);
  sys.T = Mat::Constant(1, 1, T);
  sys.Q = Mat::Constant(1, 1, Q);
  sys.c = Vec::Constant(1, c);
  return sys;
}

GaussianState unit_init() {
  return {Vec::Zero(1), Mat::Identity(1, 1)};
}

// Independent reference filter: plain loops, generic inverses, direct
// normal-density evaluation for the log-likelihood.
double direct_loglik(const SystemMatrices &sys, const Mat &y,
                     const GaussianState &init) {
  Vec a = init.a;
  Mat P = init.P;
  double ll = 0.0;
  const double p_dim = static_cast<double>(sys.obs_dim());
  for (int t = 0; t < y.rows(); ++t) {
    Mat F = sys.Z * P * sys.Z.transpose() + sys.H;
    Vec v = y.row(t).transpose() - sys.Z * a;
    Mat Finv = F.inverse();
    ll += -0.5 * p_dim * std::log(2.0 * std::numbers::pi) -
          0.5 * std::log(F.determinant()) - 0.5 * v.dot(Finv * v);
    Mat K = sys.T * P * sys.Z.transpose() * Finv;
    a = sys.c + sys.T * a + K * v;
    P = sys.T * P * (sys.T - K * sys.Z).transpose() + sys.Q;
  }
  return ll;
}

}  // namespace

TEST_CASE("zero transition resets the prediction every step") {
  auto sys = univariate(1.0, 1.0, 0.0, 1.0, 0.0);
  Mat y(6, 1);
  y << 0.3, -1.2, 2.0, 0.1, -0.4, 0.9;
  auto run = kalman_filter(sys, y, unit_init());
  for (int t = 0; t < run.size(); ++t) {
    CAPTURE(t);
    CHECK(run.a_pred[t](0) == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(run.P_pred[t](0, 0) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(run.innovation_cov[t](0, 0) == doctest::Approx(2.0).epsilon(1e-14));
  }
}

TEST_CASE("local level predictive variance reaches the golden ratio") {
  // Independent oracle: iterate p <- p/(p+1) + 1, the fixed point of the
  // local-level variance recursion with H = Q = 1.
  double p = 1.0;
  for (int i = 0; i < 50; ++i) p = p / (p + 1.0) + 1.0;
  const double golden = 0.5 * (1.0 + std::sqrt(5.0));
  REQUIRE(p == doctest::Approx(golden).epsilon(1e-12));

  auto sys = univariate(1.0, 1.0, 1.0, 1.0, 0.0);
  Mat y = Mat::Zero(60, 1);
  auto run = kalman_filter(sys, y, unit_init());
  CHECK(std::abs(run.P_pred[51](0, 0) - 1.6180339887) < 1e-9);
  CHECK(std::abs(run.P_pred[59](0, 0) - golden) < 1e-9);
}

TEST_CASE("log-likelihood matches direct predictive density evaluation") {
  RngEngine rng(7101);
  auto sys = random_stable_system(rng, 2, 1);
  Mat y = simulate_lgss(sys, 200, rng);
  GaussianState init = stationary_initial_state(sys);
  auto run = kalman_filter(sys, y, init);
  CHECK(max_rel_err(run.loglik(), direct_loglik(sys, y, init)) < 1e-10);
}

TEST_CASE("filter rejects invalid inputs") {
  auto sys = univariate(1.0, 1.0, 0.5, 1.0, 0.0);
  Mat y = Mat::Zero(5, 1);

  SUBCASE("non-PSD initial covariance") {
    GaussianState init{Vec::Zero(1), Mat::Constant(1, 1, -0.5)};
    CHECK_THROWS_AS(kalman_filter(sys, y, init), InvalidInputError);
  }
  SUBCASE("non-PSD H") {
    sys.H(0, 0) = -1.0;
    CHECK_THROWS_AS(kalman_filter(sys, y), InvalidInputError);
  }
  SUBCASE("dimension mismatch") {
    Mat bad = Mat::Zero(5, 2);
    CHECK_THROWS_AS(kalman_filter(sys, bad), InvalidInputError);
  }
  SUBCASE("non-finite observation") {
    y(2, 0) = std::nan("");
    CHECK_THROWS_AS(kalman_filter(sys, y), InvalidInputError);
  }
  SUBCASE("singular innovation covariance") {
    auto degenerate = univariate(1.0, 0.0, 0.5, 0.0, 0.0);
    GaussianState init{Vec::Zero(1), Mat::Zero(1, 1)};
    CHECK_THROWS_AS(kalman_filter(degenerate, y, init),
                    SingularInnovationError);
    try {
      kalman_filter(degenerate, y, init);
    } catch (const SingularInnovationError &e) {
      CHECK(e.step() == 0);
    }
  }
}

TEST_CASE("smoother equals update filter at the final step") {
  RngEngine rng(42);
  auto sys = random_stable_system(rng, 2, 2);
  Mat y = simulate_lgss(sys, 50, rng);
  auto filt = kalman_filter(sys, y);
  auto smooth = kalman_smoother(sys, filt);
  const int last = filt.size() - 1;
  CHECK(max_rel_err(smooth.alpha_hat[last], filt.a_upd[last]) < 1e-12);
  CHECK(max_rel_err(smooth.P_hat[last], filt.P_upd[last]) < 1e-12);
}

TEST_CASE("fixed state: smoothed mean is the GLS estimate at every step") {
  RngEngine rng(99);
  const int m = 2, p = 2, n = 40;
  SystemMatrices sys = random_stable_system(rng, m, p);
  sys.T = Mat::Identity(m, m);
  sys.Q = Mat::Zero(m, m);
  sys.c = Vec::Zero(m);

  GaussianState init{Vec::Constant(m, 0.3), 4.0 * Mat::Identity(m, m)};
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vec alpha(m);
  for (int i = 0; i < m; ++i) alpha(i) = gauss(rng);
  Mat h_chol = psd_cholesky(sys.H);
  Mat y(n, p);
  for (int t = 0; t < n; ++t) {
    Vec eps(p);
    for (int i = 0; i < p; ++i) eps(i) = gauss(rng);
    y.row(t) = (sys.Z * alpha + h_chol * eps).transpose();
  }

  // Bayesian GLS on the stacked regression, prior included.
  Mat Hinv = sys.H.inverse();
  Mat precision = init.P.inverse() + n * sys.Z.transpose() * Hinv * sys.Z;
  Vec rhs = init.P.inverse() * init.a;
  for (int t = 0; t < n; ++t)
    rhs += sys.Z.transpose() * Hinv * y.row(t).transpose();
  Vec gls = precision.inverse() * rhs;

  auto filt = kalman_filter(sys, y, init);
  auto smooth = kalman_smoother(sys, filt);
  for (int t = 0; t < n; ++t) {
    CAPTURE(t);
    CHECK(max_rel_err(smooth.alpha_hat[t], gls) < 1e-8);
  }
}

TEST_CASE("uncertainty ordering P_hat <= P_upd <= P_pred in PSD order") {
  RngEngine rng(1234);
  for (int rep = 0; rep < 5; ++rep) {
    auto sys = random_stable_system(rng, 2, 2);
    Mat y = simulate_lgss(sys, 80, rng);
    auto filt = kalman_filter(sys, y);
    auto smooth = kalman_smoother(sys, filt);
    for (int t = 0; t < filt.size(); ++t) {
      CAPTURE(rep);
      CAPTURE(t);
      CHECK(min_eigenvalue(filt.P_pred[t] - filt.P_upd[t]) > -1e-9);
      CHECK(min_eigenvalue(filt.P_upd[t] - smooth.P_hat[t]) > -1e-9);
      CHECK((smooth.N[t] - smooth.N[t].transpose()).cwiseAbs().maxCoeff() <
            1e-12);
    }
  }
}

TEST_CASE("score form reproduces the innovation form") {
  RngEngine rng(2024);
  for (int rep = 0; rep < 20; ++rep) {
    const int m = 1 + static_cast<int>(rng() % 3);
    const int p = 1 + static_cast<int>(rng() % 3);
    auto sys = random_stable_system(rng, m, p);
    Mat y = simulate_lgss(sys, 60, rng);

    auto a = kalman_filter(sys, y);
    auto b = kalman_filter_score_form(sys, y);
    REQUIRE(a.size() == b.size());
    for (int t = 0; t < a.size(); ++t) {
      CAPTURE(rep);
      CAPTURE(t);
      CHECK(max_rel_err(a.a_pred[t], b.a_pred[t]) < 1e-10);
      CHECK(max_rel_err(a.P_pred[t], b.P_pred[t]) < 1e-10);
      CHECK(max_rel_err(a.a_upd[t], b.a_upd[t]) < 1e-10);
      CHECK(max_rel_err(a.P_upd[t], b.P_upd[t]) < 1e-10);
      CHECK(max_rel_err(a.loglik_terms[t], b.loglik_terms[t]) < 1e-10);
    }

    auto sa = kalman_smoother(sys, a);
    auto sb = kalman_smoother_score_form(sys, b);
    for (int t = 0; t < a.size(); ++t) {
      CAPTURE(rep);
      CAPTURE(t);
      CHECK(max_rel_err(sa.alpha_hat[t], sb.alpha_hat[t]) < 1e-10);
      CHECK(max_rel_err(sa.P_hat[t], sb.P_hat[t]) < 1e-10);
      CHECK(max_rel_err(sa.r[t], sb.r[t]) < 1e-10);
      CHECK(max_rel_err(sa.N[t], sb.N[t]) < 1e-10);
      // T (I + P Hess) must equal T - K Z.
      CHECK(max_rel_err(sa.L[t], sb.L[t]) < 1e-10);
    }
  }
}

TEST_CASE("score-form filter with P = 0 leaves the state untouched") {
  auto sys = univariate(1.0, 1.0, 0.5, 0.0, 0.1);
  GaussianState init{Vec::Constant(1, 0.7), Mat::Zero(1, 1)};
  Mat y(3, 1);
  y << 1.0, -2.0, 0.5;
  auto run = kalman_filter_score_form(sys, y, init);
  CHECK(run.a_upd[0](0) == doctest::Approx(0.7).epsilon(1e-14));
  CHECK(run.P_upd[0](0, 0) == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("score-form smoother, single observation") {
  auto sys = univariate(1.0, 1.0, 0.5, 1.0, 0.0);
  Mat y(1, 1);
  y << 2.0;
  GaussianState init = unit_init();
  auto filt = kalman_filter_score_form(sys, y, init);
  auto smooth = kalman_smoother_score_form(sys, filt);
  // r_0 = score at t=1; alpha_hat_1 = a_1 + P_1 score.
  const double score = 2.0 / (1.0 + 1.0);
  CHECK(smooth.r[0](0) == doctest::Approx(score).epsilon(1e-14));
  CHECK(smooth.alpha_hat[0](0) == doctest::Approx(score).epsilon(1e-14));
  CHECK(max_rel_err(smooth.alpha_hat[0], filt.a_upd[0]) < 1e-12);
}

TEST_CASE("stationary initialization solves the Lyapunov equation") {
  RngEngine rng(5150);
  auto sys = random_stable_system(rng, 3, 2);
  GaussianState init = stationary_initial_state(sys);
  Mat residual = sys.T * init.P * sys.T.transpose() + sys.Q - init.P;
  CHECK(residual.cwiseAbs().maxCoeff() < 1e-10);
  Vec mean_residual = sys.c + sys.T * init.a - init.a;
  CHECK(mean_residual.cwiseAbs().maxCoeff() < 1e-10);

  SUBCASE("explosive transition requires explicit init") {
    sys.T = 1.5 * Mat::Identity(3, 3);
    Mat y = Mat::Zero(4, 2);
    CHECK_THROWS_AS(kalman_filter(sys, y), InvalidInputError);
  }
}

TEST_CASE("smoother validates its inputs") {
  auto sys = univariate(1.0, 1.0, 0.5, 1.0, 0.0);
  FilterRun empty;
  CHECK_THROWS_AS(kalman_smoother(sys, empty), InvalidInputError);

  RngEngine rng(3);
  auto other = random_stable_system(rng, 2, 1);
  Mat y = simulate_lgss(other, 10, rng);
  auto filt = kalman_filter(other, y);
  CHECK_THROWS_AS(kalman_smoother(sys, filt), InvalidInputError);
}

TEST_CASE("returned covariances are exactly symmetric") {
  RngEngine rng(777);
  auto sys = random_stable_system(rng, 3, 3);
  Mat y = simulate_lgss(sys, 60, rng);
  auto filt = kalman_filter(sys, y);
  auto smooth = kalman_smoother(sys, filt);
  for (int t = 0; t < filt.size(); ++t) {
    auto asym = [](const Mat &m) {
      return (m - m.transpose()).cwiseAbs().maxCoeff();
    };
    CHECK(asym(filt.P_pred[t]) <= 1e-12);
    CHECK(asym(filt.P_upd[t]) <= 1e-12);
    CHECK(asym(filt.innovation_cov[t]) <= 1e-12);
    CHECK(asym(smooth.P_hat[t]) <= 1e-12);
  }
}
