#include "sdfilter/observation_model.hpp"

#include <cmath>
#include <numbers>

#include "sdfilter/errors.hpp"
#include "sdfilter/lgss.hpp"

namespace sdfilter {

Mat ObservationModel::scaled_score_normalization(const Vec &a) const {
  auto info = information(a);
  if (!info)
    throw InvalidInputError(
        "model declares no information matrix and no scaled-score "
        "normalization");
  return info->inverse();
}

LinearGaussianObservationModel::LinearGaussianObservationModel(Mat Z, Mat H)
    : Z_(std::move(Z)), H_(symmetrized(std::move(H))) {
  if (H_.rows() != Z_.rows() || H_.cols() != Z_.rows())
    throw InvalidInputError("H dimension does not match Z");
  if (!is_psd(H_)) throw InvalidInputError("H is not symmetric PSD");
  H_chol_ = psd_cholesky(H_);
}

Mat LinearGaussianObservationModel::innovation_cov(const Mat &P) const {
  return symmetrized(Z_ * P * Z_.transpose() + H_);
}

double LinearGaussianObservationModel::log_density(const Vec &y, const Vec &a,
                                                   const Mat &P) const {
  auto [Finv, logdet] = detail::spd_inverse(innovation_cov(P), -1);
  Vec v = y - Z_ * a;
  return -0.5 * (static_cast<double>(obs_dim()) *
                     std::log(2.0 * std::numbers::pi) +
                 logdet + v.dot(Finv * v));
}

Vec LinearGaussianObservationModel::score(const Vec &y, const Vec &a,
                                          const Mat &P) const {
  Mat Finv = detail::spd_inverse(innovation_cov(P), -1).inverse;
  return Z_.transpose() * Finv * (y - Z_ * a);
}

Mat LinearGaussianObservationModel::hessian(const Vec & /*y*/,
                                            const Vec & /*a*/,
                                            const Mat &P) const {
  Mat Finv = detail::spd_inverse(innovation_cov(P), -1).inverse;
  return -(Z_.transpose() * Finv * Z_);
}

std::optional<Mat> LinearGaussianObservationModel::information(
    const Vec & /*a*/) const {
  // Information of the observation density itself (P = 0).
  Mat Hinv = detail::spd_inverse(H_, -1).inverse;
  return Z_.transpose() * Hinv * Z_;
}

Vec LinearGaussianObservationModel::simulate_observation(const Vec &a,
                                                         RngEngine &rng) const {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vec eps(obs_dim());
  for (Eigen::Index i = 0; i < eps.size(); ++i) eps(i) = gauss(rng);
  return Z_ * a + H_chol_ * eps;
}

}  // namespace sdfilter
