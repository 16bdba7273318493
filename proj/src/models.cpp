#include "sdfilter/models.hpp"

#include <cmath>
#include <numbers>

#include "sdfilter/errors.hpp"

namespace sdfilter {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

double scalar1(const Vec &v, const char *what) {
  if (v.size() != 1) throw InvalidInputError(std::string(what) + ": expected a scalar");
  return v(0);
}

Mat mat1(double x) {
  Mat m(1, 1);
  m(0, 0) = x;
  return m;
}

Vec vec1(double x) {
  Vec v(1);
  v(0) = x;
  return v;
}

void require_nu(double nu) {
  if (!(nu > 2.0) || !std::isfinite(nu))
    throw InvalidParameterError("degrees of freedom must satisfy nu > 2");
}

// Log normalizing constant of the variance-standardized Student-t:
// lgamma((nu+1)/2) - lgamma(nu/2) - 0.5 log(pi (nu - 2)).
double t_log_norm_const(double nu) {
  return std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) -
         0.5 * std::log(std::numbers::pi * (nu - 2.0));
}

// Draw from the unit-variance Student-t with nu dof.
double standardized_t_draw(double nu, RngEngine &rng) {
  std::student_t_distribution<double> t_dist(nu);
  return t_dist(rng) * std::sqrt((nu - 2.0) / nu);
}

}  // namespace

std::string family_name(ModelFamily family) {
  switch (family) {
    case ModelFamily::StudentTLocation: return "location_t";
    case ModelFamily::GaussianScale: return "scale_gaussian";
    case ModelFamily::StudentTScale: return "scale_t";
    case ModelFamily::PoissonDuration: return "duration_poisson";
    case ModelFamily::TwoComponentSv: return "two_component_sv";
  }
  throw InvalidInputError("unknown model family");
}

ModelFamily family_from_name(const std::string &name) {
  if (name == "location_t") return ModelFamily::StudentTLocation;
  if (name == "scale_gaussian") return ModelFamily::GaussianScale;
  if (name == "scale_t") return ModelFamily::StudentTScale;
  if (name == "duration_poisson") return ModelFamily::PoissonDuration;
  if (name == "two_component_sv") return ModelFamily::TwoComponentSv;
  throw InvalidInputError("unknown model family: " + name);
}

// --------------------------------------------------------------------------
// Location (Student-t)

StudentTLocationModel::StudentTLocationModel(StudentTLocationParams params)
    : params_(params) {
  require_nu(params_.nu);
  if (!std::isfinite(params_.lambda))
    throw InvalidParameterError("lambda must be finite");
  log_norm_const_ = t_log_norm_const(params_.nu) - 0.5 * params_.lambda;
}

double StudentTLocationModel::log_density(const Vec &y, const Vec &a,
                                          const Mat &) const {
  const double u = scalar1(y, "y") - scalar1(a, "a");
  const double s2 = (params_.nu - 2.0) * std::exp(params_.lambda);
  return log_norm_const_ -
         0.5 * (params_.nu + 1.0) * std::log1p(u * u / s2);
}

Vec StudentTLocationModel::score(const Vec &y, const Vec &a,
                                 const Mat &) const {
  const double u = scalar1(y, "y") - scalar1(a, "a");
  const double s2 = (params_.nu - 2.0) * std::exp(params_.lambda);
  return vec1((params_.nu + 1.0) * u / (s2 + u * u));
}

Mat StudentTLocationModel::hessian(const Vec &y, const Vec &a,
                                   const Mat &) const {
  const double u = scalar1(y, "y") - scalar1(a, "a");
  const double s2 = (params_.nu - 2.0) * std::exp(params_.lambda);
  const double denom = s2 + u * u;
  return mat1((params_.nu + 1.0) * (u * u - s2) / (denom * denom));
}

std::optional<Mat> StudentTLocationModel::information(const Vec &) const {
  const double nu = params_.nu;
  return mat1(nu * (nu + 1.0) /
              ((nu + 3.0) * (nu - 2.0) * std::exp(params_.lambda)));
}

Mat StudentTLocationModel::scaled_score_normalization(const Vec &) const {
  return mat1(params_.nu / (params_.nu + 1.0) * std::exp(2.0 * params_.lambda));
}

Vec StudentTLocationModel::simulate_observation(const Vec &a,
                                                RngEngine &rng) const {
  const double sd = std::exp(0.5 * params_.lambda);
  return vec1(scalar1(a, "a") + sd * standardized_t_draw(params_.nu, rng));
}

// --------------------------------------------------------------------------
// Scale (Gaussian)

GaussianScaleModel::GaussianScaleModel(GaussianScaleParams params)
    : params_(params) {
  if (!std::isfinite(params_.omega))
    throw InvalidParameterError("omega must be finite");
}

double GaussianScaleModel::log_density(const Vec &y, const Vec &a,
                                       const Mat &) const {
  const double log_var = params_.omega + scalar1(a, "a");
  const double yy = scalar1(y, "y");
  return -0.5 * (kLog2Pi + log_var + yy * yy * std::exp(-log_var));
}

Vec GaussianScaleModel::score(const Vec &y, const Vec &a, const Mat &) const {
  const double yy = scalar1(y, "y");
  const double z2 = yy * yy * std::exp(-(params_.omega + scalar1(a, "a")));
  return vec1(0.5 * (z2 - 1.0));
}

Mat GaussianScaleModel::hessian(const Vec &y, const Vec &a,
                                const Mat &) const {
  const double yy = scalar1(y, "y");
  const double z2 = yy * yy * std::exp(-(params_.omega + scalar1(a, "a")));
  return mat1(-0.5 * z2);
}

std::optional<Mat> GaussianScaleModel::information(const Vec &) const {
  return mat1(0.5);
}

Mat GaussianScaleModel::scaled_score_normalization(const Vec &) const {
  return mat1(1.0);
}

Vec GaussianScaleModel::signal(const Vec &a) const {
  return vec1(params_.omega + scalar1(a, "a"));
}

Vec GaussianScaleModel::simulate_observation(const Vec &a,
                                             RngEngine &rng) const {
  std::normal_distribution<double> gauss(0.0, 1.0);
  return vec1(std::exp(0.5 * (params_.omega + scalar1(a, "a"))) * gauss(rng));
}

// --------------------------------------------------------------------------
// Scale (Student-t)

StudentTScaleModel::StudentTScaleModel(StudentTScaleParams params)
    : params_(params) {
  require_nu(params_.nu);
  if (!std::isfinite(params_.omega))
    throw InvalidParameterError("omega must be finite");
  log_norm_const_ = t_log_norm_const(params_.nu);
}

double StudentTScaleModel::log_density(const Vec &y, const Vec &a,
                                       const Mat &) const {
  const double log_var = params_.omega + scalar1(a, "a");
  const double yy = scalar1(y, "y");
  const double s2 = (params_.nu - 2.0) * std::exp(log_var);
  return log_norm_const_ - 0.5 * log_var -
         0.5 * (params_.nu + 1.0) * std::log1p(yy * yy / s2);
}

Vec StudentTScaleModel::score(const Vec &y, const Vec &a, const Mat &) const {
  const double yy = scalar1(y, "y");
  const double e = std::exp(params_.omega + scalar1(a, "a"));
  const double denom = (params_.nu - 2.0) * e + yy * yy;
  return vec1(0.5 * ((params_.nu + 1.0) * yy * yy / denom - 1.0));
}

Mat StudentTScaleModel::hessian(const Vec &y, const Vec &a,
                                const Mat &) const {
  const double yy = scalar1(y, "y");
  const double e = std::exp(params_.omega + scalar1(a, "a"));
  const double denom = (params_.nu - 2.0) * e + yy * yy;
  return mat1(-0.5 * (params_.nu + 1.0) * (params_.nu - 2.0) * e * yy * yy /
              (denom * denom));
}

std::optional<Mat> StudentTScaleModel::information(const Vec &) const {
  return mat1(0.5 * params_.nu / (params_.nu + 3.0));
}

Mat StudentTScaleModel::scaled_score_normalization(const Vec &) const {
  return mat1(1.0);
}

Vec StudentTScaleModel::signal(const Vec &a) const {
  return vec1(params_.omega + scalar1(a, "a"));
}

Vec StudentTScaleModel::simulate_observation(const Vec &a,
                                             RngEngine &rng) const {
  const double sd = std::exp(0.5 * (params_.omega + scalar1(a, "a")));
  return vec1(sd * standardized_t_draw(params_.nu, rng));
}

// --------------------------------------------------------------------------
// Duration (Poisson)

double PoissonDurationModel::floored(double a) const {
  if (a > kIntensityFloor) return a;
  floor_count_.fetch_add(1, std::memory_order_relaxed);
  return kIntensityFloor;
}

double PoissonDurationModel::log_density(const Vec &y, const Vec &a,
                                         const Mat &) const {
  const double yy = scalar1(y, "y");
  if (yy < 0.0 || yy != std::floor(yy))
    throw InvalidInputError("Poisson observation must be a non-negative integer");
  const double lam = floored(scalar1(a, "a"));
  return yy * std::log(lam) - lam - std::lgamma(yy + 1.0);
}

Vec PoissonDurationModel::score(const Vec &y, const Vec &a,
                                const Mat &) const {
  const double aa = scalar1(a, "a");
  if (aa <= kIntensityFloor) {
    floor_count_.fetch_add(1, std::memory_order_relaxed);
    return vec1(0.0);  // the floored density is flat below the floor
  }
  return vec1(scalar1(y, "y") / aa - 1.0);
}

Mat PoissonDurationModel::hessian(const Vec &y, const Vec &a,
                                  const Mat &) const {
  const double aa = scalar1(a, "a");
  if (aa <= kIntensityFloor) {
    floor_count_.fetch_add(1, std::memory_order_relaxed);
    return mat1(0.0);
  }
  return mat1(-scalar1(y, "y") / (aa * aa));
}

std::optional<Mat> PoissonDurationModel::information(const Vec &a) const {
  const double aa = scalar1(a, "a");
  if (aa <= kIntensityFloor) return mat1(0.0);
  return mat1(1.0 / aa);
}

Mat PoissonDurationModel::scaled_score_normalization(const Vec &a) const {
  return mat1(std::exp(-floored(scalar1(a, "a"))));
}

Vec PoissonDurationModel::signal(const Vec &a) const { return a; }

Vec PoissonDurationModel::simulate_observation(const Vec &a,
                                               RngEngine &rng) const {
  std::poisson_distribution<long> pois(floored(scalar1(a, "a")));
  return vec1(static_cast<double>(pois(rng)));
}

// --------------------------------------------------------------------------
// Two-component stochastic volatility

TwoComponentSvModel::TwoComponentSvModel(TwoComponentSvParams params)
    : params_(params) {
  require_nu(params_.nu);
  if (!std::isfinite(params_.omega))
    throw InvalidParameterError("omega must be finite");
  if (std::abs(params_.phi1) >= 1.0 || std::abs(params_.phi2) >= 1.0)
    throw InvalidParameterError("component persistences must lie in (-1, 1)");
  Mat Q(2, 2);
  Q << params_.q11, params_.q12, params_.q12, params_.q22;
  if (!is_psd(Q)) throw InvalidParameterError("Q must be PSD");
  log_norm_const_ = t_log_norm_const(params_.nu);
}

Vec TwoComponentSvModel::signal(const Vec &a) const {
  if (a.size() != 2) throw InvalidInputError("state must be 2-dimensional");
  return vec1(params_.omega + a(0) + a(1));
}

double TwoComponentSvModel::log_density(const Vec &y, const Vec &a,
                                        const Mat &) const {
  const double kappa = signal(a)(0);
  const double yy = scalar1(y, "y");
  const double s2 = (params_.nu - 2.0) * std::exp(kappa);
  return log_norm_const_ - 0.5 * kappa -
         0.5 * (params_.nu + 1.0) * std::log1p(yy * yy / s2);
}

Vec TwoComponentSvModel::score(const Vec &y, const Vec &a, const Mat &) const {
  const double kappa = signal(a)(0);
  const double yy = scalar1(y, "y");
  const double denom = (params_.nu - 2.0) * std::exp(kappa) + yy * yy;
  const double s = 0.5 * ((params_.nu + 1.0) * yy * yy / denom - 1.0);
  Vec g(2);
  g << s, s;
  return g;
}

Mat TwoComponentSvModel::hessian(const Vec &y, const Vec &a,
                                 const Mat &) const {
  const double kappa = signal(a)(0);
  const double yy = scalar1(y, "y");
  const double e = std::exp(kappa);
  const double denom = (params_.nu - 2.0) * e + yy * yy;
  const double h = -0.5 * (params_.nu + 1.0) * (params_.nu - 2.0) * e * yy *
                   yy / (denom * denom);
  Mat out(2, 2);
  out << h, h, h, h;
  return out;
}

std::optional<Mat> TwoComponentSvModel::information(const Vec &) const {
  const double i = 0.5 * params_.nu / (params_.nu + 3.0);
  Mat out(2, 2);
  out << i, i, i, i;
  return out;
}

Mat TwoComponentSvModel::scaled_score_normalization(const Vec &) const {
  return Mat::Identity(2, 2);
}

Vec TwoComponentSvModel::simulate_observation(const Vec &a,
                                              RngEngine &rng) const {
  const double sd = std::exp(0.5 * signal(a)(0));
  return vec1(sd * standardized_t_draw(params_.nu, rng));
}

TransitionSpec TwoComponentSvModel::transition() const {
  TransitionSpec trans;
  trans.c = Vec::Zero(2);
  trans.T = Mat::Zero(2, 2);
  trans.T(0, 0) = params_.phi1;
  trans.T(1, 1) = params_.phi2;
  trans.Q = Mat(2, 2);
  trans.Q << params_.q11, params_.q12, params_.q12, params_.q22;
  return trans;
}

// --------------------------------------------------------------------------
// State-space simulation

SsmSample simulate_ssm(const ObservationModel &model,
                       const TransitionSpec &trans, int n,
                       std::uint64_t seed) {
  if (n < 1) throw InvalidInputError("simulate_ssm: n must be >= 1");
  trans.validate();
  if (spectral_radius(trans.T) >= 1.0)
    throw InvalidParameterError("simulate_ssm: explosive transition");
  if (model.state_dim() != trans.state_dim())
    throw InvalidInputError("simulate_ssm: dimension mismatch");

  const auto m = trans.state_dim();
  GaussianState init = stationary_initial_state(trans.T, trans.Q, trans.c);
  Mat init_chol = psd_cholesky(init.P);
  Mat q_chol = psd_cholesky(trans.Q);

  RngEngine rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto draw_gauss = [&](const Mat &chol) {
    Vec z(m);
    for (Eigen::Index i = 0; i < m; ++i) z(i) = gauss(rng);
    return Vec(chol * z);
  };

  SsmSample sample;
  sample.seed = seed;
  sample.states.resize(n, m);
  sample.observations.resize(n, model.obs_dim());

  Vec alpha = init.a + draw_gauss(init_chol);
  for (int t = 0; t < n; ++t) {
    sample.states.row(t) = alpha.transpose();
    sample.observations.row(t) =
        model.simulate_observation(alpha, rng).transpose();
    alpha = trans.c + trans.T * alpha + draw_gauss(q_chol);
  }
  return sample;
}

}  // namespace sdfilter
