#ifndef SDFILTER_MODELS_HPP_
#define SDFILTER_MODELS_HPP_

#include <atomic>
#include <cstdint>
#include <memory>
#include <string>

#include "sdfilter/observation_model.hpp"
#include "sdfilter/score_engine.hpp"

namespace sdfilter {

enum class ModelFamily {
  StudentTLocation,
  GaussianScale,
  StudentTScale,
  PoissonDuration,
  TwoComponentSv,
};

std::string family_name(ModelFamily family);
ModelFamily family_from_name(const std::string &name);

// ---------------------------------------------------------------------------
// Location (Student-t):  y_t = alpha_t + eta_t, eta_t ~ t_nu(0, e^lambda),
// variance-standardized so that e^lambda is the noise variance.

struct StudentTLocationParams {
  double lambda = 0.0;  // log noise variance
  double nu = 5.0;      // degrees of freedom, > 2
};

class StudentTLocationModel : public ObservationModel {
 public:
  explicit StudentTLocationModel(StudentTLocationParams params);

  Eigen::Index state_dim() const override { return 1; }
  Eigen::Index obs_dim() const override { return 1; }
  double log_density(const Vec &y, const Vec &a, const Mat &P) const override;
  Vec score(const Vec &y, const Vec &a, const Mat &P) const override;
  Mat hessian(const Vec &y, const Vec &a, const Mat &P) const override;
  std::optional<Mat> information(const Vec &a) const override;
  Mat scaled_score_normalization(const Vec &a) const override;
  Vec signal(const Vec &a) const override { return a; }
  Vec simulate_observation(const Vec &a, RngEngine &rng) const override;

  const StudentTLocationParams &params() const { return params_; }

 private:
  StudentTLocationParams params_;
  double log_norm_const_;
};

// ---------------------------------------------------------------------------
// Scale (Gaussian):  y_t ~ N(0, e^{omega + alpha_t}). The signal
// omega + alpha_t is the log variance.

struct GaussianScaleParams {
  double omega = 0.0;  // log-variance intercept
};

class GaussianScaleModel : public ObservationModel {
 public:
  explicit GaussianScaleModel(GaussianScaleParams params);

  Eigen::Index state_dim() const override { return 1; }
  Eigen::Index obs_dim() const override { return 1; }
  double log_density(const Vec &y, const Vec &a, const Mat &P) const override;
  Vec score(const Vec &y, const Vec &a, const Mat &P) const override;
  Mat hessian(const Vec &y, const Vec &a, const Mat &P) const override;
  std::optional<Mat> information(const Vec &a) const override;
  Mat scaled_score_normalization(const Vec &a) const override;
  Vec signal(const Vec &a) const override;
  Vec simulate_observation(const Vec &a, RngEngine &rng) const override;

  const GaussianScaleParams &params() const { return params_; }

 private:
  GaussianScaleParams params_;
};

// ---------------------------------------------------------------------------
// Scale (Student-t):  y_t ~ t_nu(0, e^{omega + alpha_t}),
// variance-standardized.

struct StudentTScaleParams {
  double omega = 0.0;
  double nu = 5.0;  // > 2
};

class StudentTScaleModel : public ObservationModel {
 public:
  explicit StudentTScaleModel(StudentTScaleParams params);

  Eigen::Index state_dim() const override { return 1; }
  Eigen::Index obs_dim() const override { return 1; }
  double log_density(const Vec &y, const Vec &a, const Mat &P) const override;
  Vec score(const Vec &y, const Vec &a, const Mat &P) const override;
  Mat hessian(const Vec &y, const Vec &a, const Mat &P) const override;
  std::optional<Mat> information(const Vec &a) const override;
  Mat scaled_score_normalization(const Vec &a) const override;
  Vec signal(const Vec &a) const override;
  Vec simulate_observation(const Vec &a, RngEngine &rng) const override;

  const StudentTScaleParams &params() const { return params_; }

 private:
  StudentTScaleParams params_;
  double log_norm_const_;
};

// ---------------------------------------------------------------------------
// Duration (Poisson):  y_t ~ Poiss(alpha_t); the intensity is the state
// itself. The linear transition does not keep the state positive, so the
// intensity is floored at kIntensityFloor before any density evaluation;
// derivatives are those of the floored density (zero below the floor).

class PoissonDurationModel : public ObservationModel {
 public:
  static constexpr double kIntensityFloor = 1e-8;

  PoissonDurationModel() = default;

  Eigen::Index state_dim() const override { return 1; }
  Eigen::Index obs_dim() const override { return 1; }
  double log_density(const Vec &y, const Vec &a, const Mat &P) const override;
  Vec score(const Vec &y, const Vec &a, const Mat &P) const override;
  Mat hessian(const Vec &y, const Vec &a, const Mat &P) const override;
  std::optional<Mat> information(const Vec &a) const override;
  Mat scaled_score_normalization(const Vec &a) const override;
  Vec signal(const Vec &a) const override;
  Vec simulate_observation(const Vec &a, RngEngine &rng) const override;

  // Number of evaluations that hit the intensity floor.
  long floor_count() const { return floor_count_.load(); }

 private:
  double floored(double a) const;
  mutable std::atomic<long> floor_count_{0};
};

// ---------------------------------------------------------------------------
// Two-component stochastic volatility:  y_t = e^{theta_t / 2} eps_t with
// eps_t ~ t_nu standardized, theta_t = omega + alpha_t1 + alpha_t2,
// T = diag(phi1, phi2), Q a full 2x2 PSD matrix.

struct TwoComponentSvParams {
  double omega = 0.0;
  double nu = 5.0;  // > 2
  double phi1 = 0.99;
  double phi2 = 0.9;
  double q11 = 0.01;
  double q22 = 0.01;
  double q12 = 0.0;
};

class TwoComponentSvModel : public ObservationModel {
 public:
  explicit TwoComponentSvModel(TwoComponentSvParams params);

  Eigen::Index state_dim() const override { return 2; }
  Eigen::Index obs_dim() const override { return 1; }
  double log_density(const Vec &y, const Vec &a, const Mat &P) const override;
  Vec score(const Vec &y, const Vec &a, const Mat &P) const override;
  Mat hessian(const Vec &y, const Vec &a, const Mat &P) const override;
  std::optional<Mat> information(const Vec &a) const override;
  // The information matrix Z'Z i_t is singular for m > p; the identity
  // normalization is the conventional fallback.
  Mat scaled_score_normalization(const Vec &a) const override;
  Vec signal(const Vec &a) const override;
  Vec simulate_observation(const Vec &a, RngEngine &rng) const override;

  TransitionSpec transition() const;
  const TwoComponentSvParams &params() const { return params_; }

 private:
  TwoComponentSvParams params_;
  double log_norm_const_;
};

// ---------------------------------------------------------------------------
// Simulation of the full state-space model.

struct SsmSample {
  Mat states;        // n x m
  Mat observations;  // n x p
  std::uint64_t seed = 0;
};

// Draws alpha_1 from the stationary distribution, propagates the linear
// transition with Gaussian noise, and samples observations from the family's
// conditional law. Deterministic given the seed.
SsmSample simulate_ssm(const ObservationModel &model,
                       const TransitionSpec &trans, int n, std::uint64_t seed);

}  // namespace sdfilter

#endif  // SDFILTER_MODELS_HPP_
