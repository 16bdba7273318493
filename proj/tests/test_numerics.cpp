#include <cmath>

#include "doctest.h"
#include "sdfilter/errors.hpp"
#include "sdfilter/numerics.hpp"

using namespace sdfilter;

TEST_CASE("discrete Lyapunov solution satisfies the fixed point") {
  Mat T(2, 2);
  T << 0.9, 0.2, -0.1, 0.5;
  Mat Q(2, 2);
  Q << 1.0, 0.3, 0.3, 0.5;
  Mat P = solve_discrete_lyapunov(T, Q);
  CHECK((T * P * T.transpose() + Q - P).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(is_psd(P));

  SUBCASE("univariate closed form q / (1 - t^2)") {
    Mat t1 = Mat::Constant(1, 1, 0.98);
    Mat q1 = Mat::Constant(1, 1, 0.01);
    Mat p1 = solve_discrete_lyapunov(t1, q1);
    CHECK(p1(0, 0) == doctest::Approx(0.01 / (1.0 - 0.98 * 0.98)).epsilon(1e-12));
  }
  SUBCASE("explosive transition rejected") {
    Mat t_bad = Mat::Constant(1, 1, 1.0);
    CHECK_THROWS_AS(solve_discrete_lyapunov(t_bad, Q.topLeftCorner(1, 1)),
                    InvalidInputError);
  }
}

TEST_CASE("PSD clipping floors only genuinely negative spectra") {
  Mat ok(2, 2);
  ok << 1.0, 0.2, 0.2, 0.5;
  bool clipped = true;
  Mat same = clip_to_psd(ok, 1e-10, 1e-10, &clipped);
  CHECK_FALSE(clipped);
  CHECK((same - ok).cwiseAbs().maxCoeff() < 1e-15);

  Mat zero = Mat::Zero(2, 2);
  clipped = true;
  clip_to_psd(zero, 1e-10, 1e-10, &clipped);
  CHECK_FALSE(clipped);  // exactly singular is not negative

  Mat bad(2, 2);
  bad << 1.0, 2.0, 2.0, 1.0;  // eigenvalues 3 and -1
  clipped = false;
  Mat fixed = clip_to_psd(bad, 1e-10, 1e-10, &clipped);
  CHECK(clipped);
  CHECK(min_eigenvalue(fixed) >= 1e-11);
}

TEST_CASE("normal quantile") {
  CHECK(normal_quantile(0.975) == doctest::Approx(1.959964).epsilon(1e-6));
  CHECK(normal_quantile(0.5) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(normal_quantile(0.025) ==
        doctest::Approx(-normal_quantile(0.975)).epsilon(1e-12));
  CHECK_THROWS_AS(normal_quantile(0.0), InvalidInputError);
  CHECK_THROWS_AS(normal_quantile(1.0), InvalidInputError);
}

TEST_CASE("seed splitting decorrelates streams") {
  CHECK(split_seed(1, 0) != split_seed(1, 1));
  CHECK(split_seed(1, 0) != split_seed(2, 0));
  CHECK(split_seed(1, 5) == split_seed(1, 5));
}

TEST_CASE("psd_cholesky reproduces the matrix") {
  Mat m(2, 2);
  m << 2.0, 0.5, 0.5, 1.0;
  Mat L = psd_cholesky(m);
  CHECK((L * L.transpose() - m).cwiseAbs().maxCoeff() < 1e-12);

  Mat zero = Mat::Zero(2, 2);
  Mat Lz = psd_cholesky(zero);
  CHECK(Lz.cwiseAbs().maxCoeff() < 1e-12);
}
