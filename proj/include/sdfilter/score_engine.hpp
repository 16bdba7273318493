#ifndef SDFILTER_SCORE_ENGINE_HPP_
#define SDFILTER_SCORE_ENGINE_HPP_

#include <optional>
#include <vector>

#include "sdfilter/lgss.hpp"
#include "sdfilter/observation_model.hpp"

namespace sdfilter {

// State transition alpha_{t+1} = c + T alpha_t + eta_t, eta_t ~ (0, Q).
struct TransitionSpec {
  Vec c;
  Mat T;
  Mat Q;

  Eigen::Index state_dim() const { return T.rows(); }
  void validate() const;
};

// How the score is normalized in the update.
//
// KalmanConsistent: the loading is T P_t with P_t evolving by the covariance
// recursion P_{t+1} = T P_t (T + T P_t Hess_t)' + Q. ScaledScore: the classic
// score-driven choice A S_t^d per step, with the implied conditional
// covariance P_t = T^-1 A S_t^d.
struct NormalizationScheme {
  enum class Kind { KalmanConsistent, ScaledScore };

  Kind kind = Kind::KalmanConsistent;
  Mat loading;            // A, ScaledScore only (m x m, full column rank)
  double exponent = 1.0;  // d in {0, 1/2, 1}

  static NormalizationScheme kalman_consistent() { return {}; }
  static NormalizationScheme scaled_score(Mat A, double d = 1.0);
};

// Which curvature drives the variance recursion: the Hessian of the
// conditional log-density or the negative squared score. Both yield the same
// approximation order.
enum class CurvatureKind { Hessian, SquaredScore };

struct SdFilterRun {
  std::vector<Vec> a_pred;
  std::vector<Mat> P_pred;
  std::vector<Vec> a_upd;
  std::vector<Mat> P_upd;
  std::vector<Vec> score;
  std::vector<Mat> hessian;          // curvature actually used
  std::vector<double> loglik_terms;  // log p(y_t | .) at a_t

  NormalizationScheme::Kind norm_kind =
      NormalizationScheme::Kind::KalmanConsistent;
  Eigen::Index state_dim = 0;
  Eigen::Index obs_dim = 0;
  int psd_clip_count = 0;  // PSD enforcement events across P_upd / P_pred

  int size() const { return static_cast<int>(a_pred.size()); }
  double loglik() const;
};

// Score-driven approximate filter for an arbitrary twice-differentiable
// conditional density. With a LinearGaussianObservationModel this reproduces
// the exact Kalman filter.
SdFilterRun sd_filter(const ObservationModel &model,
                      const TransitionSpec &trans,
                      const NormalizationScheme &norm, const Mat &y,
                      const std::optional<GaussianState> &init = {},
                      CurvatureKind curvature = CurvatureKind::Hessian);

// Backward smoothing pass with L_t = T (I + P_t Hess_t). Requires a run whose
// normalization identifies P_t: KalmanConsistent always, ScaledScore only
// when the state dimension does not exceed the signal dimension.
SmootherRun sd_smoother(const ObservationModel &model,
                        const TransitionSpec &trans, const SdFilterRun &run);

// Approximate log-likelihood: the sum of per-step conditional log densities
// evaluated at the predictive filter.
double sd_loglik(const SdFilterRun &run);

}  // namespace sdfilter

#endif  // SDFILTER_SCORE_ENGINE_HPP_
