#include "sdfilter/numerics.hpp"

#include <boost/math/distributions/normal.hpp>
#include <cmath>

#include "sdfilter/errors.hpp"

namespace sdfilter {

Mat symmetrized(const Mat &m) { return 0.5 * (m + m.transpose()); }

double min_eigenvalue(const Mat &m) {
  if (m.rows() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Mat> es(symmetrized(m),
                                        Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

bool is_psd(const Mat &m, double tol) { return min_eigenvalue(m) >= -tol; }

Mat clip_to_psd(const Mat &m, double floor, double trigger_tol,
                bool *clipped) {
  Mat sym = symmetrized(m);
  Eigen::SelfAdjointEigenSolver<Mat> es(sym);
  if (es.eigenvalues().minCoeff() >= -trigger_tol) {
    if (clipped) *clipped = false;
    return sym;
  }
  Vec ev = es.eigenvalues().cwiseMax(floor);
  if (clipped) *clipped = true;
  return symmetrized(es.eigenvectors() * ev.asDiagonal() *
                     es.eigenvectors().transpose());
}

double spectral_radius(const Mat &m) {
  if (m.rows() == 0) return 0.0;
  return m.eigenvalues().cwiseAbs().maxCoeff();
}

Mat solve_discrete_lyapunov(const Mat &transition, const Mat &noise_cov) {
  const auto m = transition.rows();
  if (transition.cols() != m || noise_cov.rows() != m || noise_cov.cols() != m)
    throw InvalidInputError("lyapunov: dimension mismatch");
  if (spectral_radius(transition) >= 1.0)
    throw InvalidInputError(
        "lyapunov: transition matrix must have spectral radius < 1");
  const auto mm = m * m;
  Mat kron(mm, mm);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j)
      kron.block(i * m, j * m, m, m) = transition(i, j) * transition;
  Mat lhs = Mat::Identity(mm, mm) - kron;
  Vec vec_q = Eigen::Map<const Vec>(noise_cov.data(), mm);
  Vec vec_p = lhs.partialPivLu().solve(vec_q);
  Mat p = Eigen::Map<const Mat>(vec_p.data(), m, m);
  return symmetrized(p);
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0))
    throw InvalidInputError("normal_quantile: p must lie in (0, 1)");
  static const boost::math::normal_distribution<double> unit_normal(0.0, 1.0);
  return boost::math::quantile(unit_normal, p);
}

Mat psd_cholesky(const Mat &m) {
  Mat sym = symmetrized(m);
  Eigen::LLT<Mat> llt(sym);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  // Semi-definite or slightly indefinite input: floor the spectrum.
  Eigen::SelfAdjointEigenSolver<Mat> es(sym);
  if (es.eigenvalues().minCoeff() < -1e-8)
    throw InvalidInputError("psd_cholesky: matrix is not PSD");
  Vec ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  // L such that L L' = V diag(ev)^2 V'; a non-triangular square root is fine
  // for sampling purposes.
  return es.eigenvectors() * ev.asDiagonal();
}

std::uint64_t split_seed(std::uint64_t root, std::uint64_t index) {
  // splitmix64 on root + golden-ratio stride.
  std::uint64_t z = root + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace sdfilter
