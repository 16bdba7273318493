#ifndef SDFILTER_TESTS_TEST_SUPPORT_HPP_
#define SDFILTER_TESTS_TEST_SUPPORT_HPP_

#include <random>

#include "sdfilter/lgss.hpp"
#include "sdfilter/numerics.hpp"

namespace sdfilter::test {

// Random stable system with spectral radius scaled below `radius`.
inline SystemMatrices random_stable_system(RngEngine &rng, int m, int p,
                                           double radius = 0.7) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto randn = [&](int r, int c) {
    Mat x(r, c);
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j) x(i, j) = gauss(rng);
    return x;
  };

  SystemMatrices sys;
  sys.Z = randn(p, m);
  Mat h_root = randn(p, p);
  sys.H = symmetrized(h_root * h_root.transpose()) +
          0.2 * Mat::Identity(p, p);
  Mat t_raw = randn(m, m);
  sys.T = t_raw * (radius / spectral_radius(t_raw));
  Mat q_root = randn(m, m);
  sys.Q = symmetrized(q_root * q_root.transpose()) +
          0.1 * Mat::Identity(m, m);
  sys.c = randn(m, 1);
  return sys;
}

// Draws observations from the system itself.
inline Mat simulate_lgss(const SystemMatrices &sys, int n, RngEngine &rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto draw = [&](const Mat &chol) {
    Vec z(chol.cols());
    for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = gauss(rng);
    return Vec(chol * z);
  };
  GaussianState init = stationary_initial_state(sys);
  Mat p_chol = psd_cholesky(init.P);
  Mat q_chol = psd_cholesky(sys.Q);
  Mat h_chol = psd_cholesky(sys.H);

  Vec alpha = init.a + draw(p_chol);
  Mat y(n, sys.obs_dim());
  for (int t = 0; t < n; ++t) {
    y.row(t) = (sys.Z * alpha + draw(h_chol)).transpose();
    alpha = sys.c + sys.T * alpha + draw(q_chol);
  }
  return y;
}

inline double max_rel_err(const Mat &a, const Mat &b) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      const double scale =
          std::max({std::abs(a(i, j)), std::abs(b(i, j)), 1e-8});
      worst = std::max(worst, std::abs(a(i, j) - b(i, j)) / scale);
    }
  return worst;
}

inline double max_rel_err(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

}  // namespace sdfilter::test

#endif  // SDFILTER_TESTS_TEST_SUPPORT_HPP_
