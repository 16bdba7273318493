#ifndef SDFILTER_LGSS_HPP_
#define SDFILTER_LGSS_HPP_

#include <optional>
#include <vector>

#include "sdfilter/numerics.hpp"

namespace sdfilter {

// Linear-Gaussian state-space system
//   y_t     = Z alpha_t + eps_t,   eps_t ~ N(0, H)
//   alpha_t+1 = c + T alpha_t + eta_t,  eta_t ~ N(0, Q)
struct SystemMatrices {
  Mat Z;  // p x m
  Mat H;  // p x p
  Mat T;  // m x m
  Mat Q;  // m x m
  Vec c;  // m

  Eigen::Index state_dim() const { return T.rows(); }
  Eigen::Index obs_dim() const { return Z.rows(); }

  // Checks dimension consistency, finiteness, and that H and Q are
  // symmetric PSD. Throws InvalidInputError.
  void validate() const;
};

struct GaussianState {
  Vec a;  // conditional mean
  Mat P;  // conditional covariance
};

// Stationary moments of the state process: a1 = (I - T)^-1 c and P1 solving
// the discrete Lyapunov equation. Requires spectral radius of T < 1.
GaussianState stationary_initial_state(const Mat &T, const Mat &Q,
                                       const Vec &c);
GaussianState stationary_initial_state(const SystemMatrices &sys);

// Forward-pass output. Index t holds the step-t quantities; r/N in the
// smoother follow the backward-recursion convention documented there.
struct FilterRun {
  std::vector<Vec> innovation;      // v_t
  std::vector<Mat> innovation_cov;  // F_t
  std::vector<Vec> a_pred;          // a_t
  std::vector<Mat> P_pred;          // P_t
  std::vector<Vec> a_upd;           // a_{t|t}
  std::vector<Mat> P_upd;           // P_{t|t}
  std::vector<Mat> gain;            // K_t
  std::vector<double> loglik_terms;

  int size() const { return static_cast<int>(a_pred.size()); }
  double loglik() const;
};

struct SmootherRun {
  // r[t] and N[t] hold r_{t-1} and N_{t-1}, the backward quantities that
  // enter alpha_hat_t and P_hat_t; both start from r_n = 0, N_n = 0.
  std::vector<Vec> r;
  std::vector<Mat> N;
  std::vector<Vec> alpha_hat;  // E[alpha_t | all observations]
  std::vector<Mat> P_hat;      // V[alpha_t | all observations]
  std::vector<Mat> L;          // L_t

  int size() const { return static_cast<int>(alpha_hat.size()); }
};

// Exact Kalman filter, innovation form. Observations are the rows of y
// (n x p). When init is absent the stationary initialization is used.
FilterRun kalman_filter(const SystemMatrices &sys, const Mat &y,
                        const std::optional<GaussianState> &init = {});

// Backward smoothing pass on a run produced by kalman_filter.
SmootherRun kalman_smoother(const SystemMatrices &sys, const FilterRun &filt);

// The same recursions written in terms of the score Z'F^-1 v and the
// Hessian -Z'F^-1 Z of the conditional log-likelihood. Numerically
// equivalent to the innovation form.
FilterRun kalman_filter_score_form(
    const SystemMatrices &sys, const Mat &y,
    const std::optional<GaussianState> &init = {});

SmootherRun kalman_smoother_score_form(const SystemMatrices &sys,
                                       const FilterRun &filt);

namespace detail {
// Symmetric PD inverse and log-determinant of an innovation covariance.
// Throws SingularInnovationError when the condition number exceeds 1e12.
struct SpdInverse {
  Mat inverse;
  double log_det;
};
SpdInverse spd_inverse(const Mat &F, int step);
}  // namespace detail

}  // namespace sdfilter

#endif  // SDFILTER_LGSS_HPP_
