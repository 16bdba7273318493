#ifndef SDFILTER_NUMERICS_HPP_
#define SDFILTER_NUMERICS_HPP_

#include <Eigen/Dense>
#include <cstdint>

namespace sdfilter {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Enforce exact symmetry: (M + M') / 2.
Mat symmetrized(const Mat &m);

double min_eigenvalue(const Mat &m);

// True when the smallest eigenvalue of the symmetrized matrix is >= -tol.
bool is_psd(const Mat &m, double tol = 1e-10);

// Eigenvalue floor. Triggers only when the smallest eigenvalue falls below
// -trigger_tol; eigenvalues below `floor` are then raised to `floor` and the
// matrix is rebuilt. Returns whether a clip happened.
Mat clip_to_psd(const Mat &m, double floor, double trigger_tol, bool *clipped);

double spectral_radius(const Mat &m);

// Solves P = T P T' + Q by vectorization:  (I - T (x) T) vec(P) = vec(Q).
// Requires spectral radius of T strictly below one.
Mat solve_discrete_lyapunov(const Mat &transition, const Mat &noise_cov);

// Standard normal quantile (inverse CDF).
double normal_quantile(double p);

// Lower Cholesky factor of a PSD matrix; falls back to an eigenvalue-floored
// factorization when the matrix is only semi-definite.
Mat psd_cholesky(const Mat &m);

// Counter-based seed derivation: independent streams from a root seed.
std::uint64_t split_seed(std::uint64_t root, std::uint64_t index);

}  // namespace sdfilter

#endif  // SDFILTER_NUMERICS_HPP_
