#ifndef SDFILTER_OBSERVATION_MODEL_HPP_
#define SDFILTER_OBSERVATION_MODEL_HPP_

#include <optional>
#include <random>

#include "sdfilter/numerics.hpp"

namespace sdfilter {

using RngEngine = std::mt19937_64;

// Pluggable conditional observation density p(y_t | Y_{t-1}).
//
// The score-driven recursions evaluate the density and its first two
// derivatives with respect to the state at the predictive mean `a`. For the
// approximate nonlinear families the conditional density is the observation
// density p(y_t | alpha_t) evaluated at alpha_t = a and the predictive
// covariance argument is ignored; the exact linear-Gaussian model is the one
// implementation whose conditional density depends on P (through
// F = Z P Z' + H), which is what makes the engine collapse to the exact
// Kalman recursions in that case.
class ObservationModel {
 public:
  virtual ~ObservationModel() = default;

  virtual Eigen::Index state_dim() const = 0;
  virtual Eigen::Index obs_dim() const = 0;

  virtual double log_density(const Vec &y, const Vec &a,
                             const Mat &P) const = 0;
  // d log p / d a, evaluated at a.
  virtual Vec score(const Vec &y, const Vec &a, const Mat &P) const = 0;
  // d^2 log p / da da', evaluated at a.
  virtual Mat hessian(const Vec &y, const Vec &a, const Mat &P) const = 0;

  // Conditional Fisher information -E[hessian | a]. Optional: families
  // without a closed form return nullopt.
  virtual std::optional<Mat> information(const Vec & /*a*/) const {
    return std::nullopt;
  }

  // Fixed normalization S_t for scaled-score filtering, as used by the
  // classic score-driven literature for this family. Defaults to the inverse
  // information when available.
  virtual Mat scaled_score_normalization(const Vec &a) const;

  // The mapped parameter the observations load on (location, log-variance,
  // intensity, ...).
  virtual Vec signal(const Vec &a) const = 0;

  // Draw y ~ p(y | alpha = a). This is the data-generating density; for the
  // linear-Gaussian model it uses H, not F.
  virtual Vec simulate_observation(const Vec &a, RngEngine &rng) const = 0;
};

// Exact linear-Gaussian observation density y ~ N(Z a, Z P Z' + H); plugs the
// Kalman filter into the score-driven engine.
class LinearGaussianObservationModel : public ObservationModel {
 public:
  LinearGaussianObservationModel(Mat Z, Mat H);

  Eigen::Index state_dim() const override { return Z_.cols(); }
  Eigen::Index obs_dim() const override { return Z_.rows(); }

  double log_density(const Vec &y, const Vec &a, const Mat &P) const override;
  Vec score(const Vec &y, const Vec &a, const Mat &P) const override;
  Mat hessian(const Vec &y, const Vec &a, const Mat &P) const override;
  std::optional<Mat> information(const Vec &a) const override;
  Vec signal(const Vec &a) const override { return Z_ * a; }
  Vec simulate_observation(const Vec &a, RngEngine &rng) const override;

 private:
  Mat innovation_cov(const Mat &P) const;
  Mat Z_;
  Mat H_;
  Mat H_chol_;
};

}  // namespace sdfilter

#endif  // SDFILTER_OBSERVATION_MODEL_HPP_
