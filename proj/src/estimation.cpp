#include "sdfilter/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sdfilter/errors.hpp"

namespace sdfilter {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Vec vec_of(std::initializer_list<double> xs) {
  Vec v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

double sample_mean(const Mat &y) { return y.col(0).mean(); }

double sample_var(const Mat &y) {
  const double mu = sample_mean(y);
  return (y.col(0).array() - mu).square().mean();
}

}  // namespace

double to_unconstrained(Transform t, double natural) {
  switch (t) {
    case Transform::Identity: return natural;
    case Transform::Log: return std::log(natural);
    case Transform::Logit11: return std::atanh(natural);
    case Transform::LogNuMinus2: return std::log(natural - 2.0);
  }
  throw InvalidInputError("unknown transform");
}

double to_natural(Transform t, double z) {
  switch (t) {
    case Transform::Identity: return z;
    case Transform::Log: return std::exp(z);
    case Transform::Logit11: return std::tanh(z);
    case Transform::LogNuMinus2: return 2.0 + std::exp(z);
  }
  throw InvalidInputError("unknown transform");
}

bool in_domain(Transform t, double natural) {
  if (!std::isfinite(natural)) return false;
  switch (t) {
    case Transform::Identity: return true;
    case Transform::Log: return natural > 0.0;
    case Transform::Logit11: return natural > -1.0 && natural < 1.0;
    case Transform::LogNuMinus2: return natural > 2.0;
  }
  return false;
}

ParameterVector::ParameterVector(std::vector<ParamDef> defs, Vec values)
    : defs_(std::move(defs)) {
  set_values(values);
}

void ParameterVector::set_values(const Vec &natural) {
  if (natural.size() != static_cast<Eigen::Index>(defs_.size()))
    throw InvalidInputError("parameter vector length mismatch");
  for (Eigen::Index i = 0; i < natural.size(); ++i)
    if (!in_domain(defs_[i].transform, natural(i)))
      throw InvalidParameterError("parameter '" + defs_[i].name +
                                  "' outside its domain");
  values_ = natural;
}

bool ParameterVector::values_in_domain(const std::vector<ParamDef> &defs,
                                       const Vec &natural) {
  if (natural.size() != static_cast<Eigen::Index>(defs.size())) return false;
  for (Eigen::Index i = 0; i < natural.size(); ++i)
    if (!in_domain(defs[i].transform, natural(i))) return false;
  return true;
}

double ParameterVector::value(const std::string &name) const {
  return values_(index(name));
}

int ParameterVector::index(const std::string &name) const {
  for (size_t i = 0; i < defs_.size(); ++i)
    if (defs_[i].name == name) return static_cast<int>(i);
  throw InvalidInputError("unknown parameter: " + name);
}

Vec ParameterVector::to_unconstrained() const {
  Vec z(values_.size());
  for (Eigen::Index i = 0; i < z.size(); ++i)
    z(i) = sdfilter::to_unconstrained(defs_[i].transform, values_(i));
  return z;
}

void ParameterVector::set_from_unconstrained(const Vec &z) {
  if (z.size() != static_cast<Eigen::Index>(defs_.size()))
    throw InvalidInputError("parameter vector length mismatch");
  Vec natural(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i)
    natural(i) = to_natural(defs_[i].transform, z(i));
  set_values(natural);
}

// ---------------------------------------------------------------------------

FamilyBinding::FamilyBinding(ModelFamily family,
                             NormalizationScheme::Kind norm_kind,
                             double scaled_score_exponent)
    : family_(family), norm_kind_(norm_kind), exponent_(scaled_score_exponent) {
  switch (family_) {
    case ModelFamily::StudentTLocation:
      defs_ = {{"c", Transform::Identity},
               {"phi", Transform::Logit11},
               {"q", Transform::Log},
               {"lambda", Transform::Identity},
               {"nu", Transform::LogNuMinus2}};
      break;
    case ModelFamily::GaussianScale:
      defs_ = {{"c", Transform::Identity},
               {"phi", Transform::Logit11},
               {"q", Transform::Log},
               {"omega", Transform::Identity}};
      break;
    case ModelFamily::StudentTScale:
      defs_ = {{"c", Transform::Identity},
               {"phi", Transform::Logit11},
               {"q", Transform::Log},
               {"omega", Transform::Identity},
               {"nu", Transform::LogNuMinus2}};
      break;
    case ModelFamily::PoissonDuration:
      defs_ = {{"c", Transform::Identity},
               {"phi", Transform::Logit11},
               {"q", Transform::Log}};
      break;
    case ModelFamily::TwoComponentSv:
      defs_ = {{"omega", Transform::Identity},
               {"nu", Transform::LogNuMinus2},
               {"phi1", Transform::Logit11},
               {"phi2", Transform::Logit11},
               {"chol11", Transform::Log},
               {"chol22", Transform::Log},
               {"chol21", Transform::Identity}};
      break;
  }
  if (norm_kind_ == NormalizationScheme::Kind::ScaledScore) {
    if (family_ == ModelFamily::TwoComponentSv)
      throw InvalidInputError(
          "scaled-score estimation is only supported for scalar-state "
          "families");
    defs_.push_back({"gain", Transform::Log});
  }
}

std::unique_ptr<ObservationModel> FamilyBinding::make_model(
    const Vec &natural) const {
  ParameterVector pv = pack(natural);
  switch (family_) {
    case ModelFamily::StudentTLocation:
      return std::make_unique<StudentTLocationModel>(StudentTLocationParams{
          pv.value("lambda"), pv.value("nu")});
    case ModelFamily::GaussianScale:
      return std::make_unique<GaussianScaleModel>(
          GaussianScaleParams{pv.value("omega")});
    case ModelFamily::StudentTScale:
      return std::make_unique<StudentTScaleModel>(
          StudentTScaleParams{pv.value("omega"), pv.value("nu")});
    case ModelFamily::PoissonDuration:
      return std::make_unique<PoissonDurationModel>();
    case ModelFamily::TwoComponentSv: {
      const double l11 = pv.value("chol11");
      const double l22 = pv.value("chol22");
      const double l21 = pv.value("chol21");
      TwoComponentSvParams p;
      p.omega = pv.value("omega");
      p.nu = pv.value("nu");
      p.phi1 = pv.value("phi1");
      p.phi2 = pv.value("phi2");
      p.q11 = l11 * l11;
      p.q12 = l11 * l21;
      p.q22 = l21 * l21 + l22 * l22;
      return std::make_unique<TwoComponentSvModel>(p);
    }
  }
  throw InvalidInputError("unknown model family");
}

TransitionSpec FamilyBinding::make_transition(const Vec &natural) const {
  ParameterVector pv = pack(natural);
  if (family_ == ModelFamily::TwoComponentSv) {
    auto model = make_model(natural);
    return static_cast<const TwoComponentSvModel &>(*model).transition();
  }
  TransitionSpec trans;
  trans.c = vec_of({pv.value("c")});
  trans.T = Mat::Constant(1, 1, pv.value("phi"));
  trans.Q = Mat::Constant(1, 1, pv.value("q"));
  return trans;
}

NormalizationScheme FamilyBinding::make_normalization(
    const Vec &natural) const {
  if (norm_kind_ == NormalizationScheme::Kind::KalmanConsistent)
    return NormalizationScheme::kalman_consistent();
  ParameterVector pv = pack(natural);
  return NormalizationScheme::scaled_score(
      Mat::Constant(1, 1, pv.value("gain")), exponent_);
}

ParameterVector FamilyBinding::pack(const Vec &natural) const {
  return ParameterVector(defs_, natural);
}

Vec FamilyBinding::heuristic_start(const Mat &y) const {
  const double var_y = std::max(sample_var(y), 1e-8);
  const double mean_y = sample_mean(y);
  Vec start;
  switch (family_) {
    case ModelFamily::StudentTLocation:
      start = vec_of({mean_y * 0.05, 0.95, 0.01, std::log(var_y), 8.0});
      break;
    case ModelFamily::GaussianScale:
      start = vec_of({0.0, 0.95, 0.01, std::log(var_y)});
      break;
    case ModelFamily::StudentTScale:
      start = vec_of({0.0, 0.95, 0.01, std::log(var_y), 8.0});
      break;
    case ModelFamily::PoissonDuration:
      start = vec_of({std::max(mean_y, 0.02) * 0.05, 0.95, 0.01});
      break;
    case ModelFamily::TwoComponentSv:
      start = vec_of({std::log(var_y), 8.0, 0.99, 0.9, 0.07, 0.1, 0.0});
      break;
  }
  if (norm_kind_ == NormalizationScheme::Kind::ScaledScore) {
    Vec padded(start.size() + 1);
    padded << start, 0.05;
    start = padded;
  }
  return start;
}

// ---------------------------------------------------------------------------

double loglik_at(const FamilyBinding &binding, const Mat &y,
                 const Vec &natural, CurvatureKind curvature) {
  if (!ParameterVector::values_in_domain(binding.defs(), natural))
    return -kInf;
  try {
    auto model = binding.make_model(natural);
    TransitionSpec trans = binding.make_transition(natural);
    NormalizationScheme norm = binding.make_normalization(natural);
    SdFilterRun run = sd_filter(*model, trans, norm, y, {}, curvature);
    return sd_loglik(run);
  } catch (const Error &) {
    return -kInf;
  }
}

Mat numerical_hessian(const Objective &objective, const Vec &theta) {
  const auto k = theta.size();
  if (k == 0) throw InvalidInputError("numerical_hessian: empty parameter");
  Vec h(k);
  for (Eigen::Index i = 0; i < k; ++i)
    h(i) = 1e-4 * std::max(1.0, std::abs(theta(i)));

  const double f0 = objective(theta);
  Mat H(k, k);
  Vec probe = theta;
  for (Eigen::Index i = 0; i < k; ++i) {
    probe(i) = theta(i) + h(i);
    const double up = objective(probe);
    probe(i) = theta(i) - h(i);
    const double down = objective(probe);
    probe(i) = theta(i);
    H(i, i) = (up - 2.0 * f0 + down) / (h(i) * h(i));
    for (Eigen::Index j = i + 1; j < k; ++j) {
      probe(i) = theta(i) + h(i);
      probe(j) = theta(j) + h(j);
      const double pp = objective(probe);
      probe(j) = theta(j) - h(j);
      const double pm = objective(probe);
      probe(i) = theta(i) - h(i);
      const double mm = objective(probe);
      probe(j) = theta(j) + h(j);
      const double mp = objective(probe);
      probe(i) = theta(i);
      probe(j) = theta(j);
      H(i, j) = H(j, i) = (pp - pm - mp + mm) / (4.0 * h(i) * h(j));
    }
  }
  if (!H.allFinite())
    throw EstimationFailureError(
        "numerical_hessian: non-finite second differences");
  return symmetrized(H);
}

Mat project_to_psd(const Mat &m, bool *projected) {
  Eigen::SelfAdjointEigenSolver<Mat> es(symmetrized(m));
  if (es.eigenvalues().minCoeff() >= 1e-10) {
    if (projected) *projected = false;
    return symmetrized(m);
  }
  if (projected) *projected = true;
  Vec ev = es.eigenvalues().cwiseMax(1e-10);
  return symmetrized(es.eigenvectors() * ev.asDiagonal() *
                     es.eigenvectors().transpose());
}

FitResult fit(ModelFamily family, const Mat &y, const FitConfig &config) {
  if (y.rows() < 50)
    throw InvalidInputError("fit requires a series of length >= 50");

  FamilyBinding binding(family, config.norm_kind,
                        config.scaled_score_exponent);
  const auto k = static_cast<Eigen::Index>(binding.defs().size());

  // Objective in unconstrained coordinates.
  auto objective = [&](const Vec &z) {
    Vec natural(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i)
      natural(i) = to_natural(binding.defs()[i].transform, z(i));
    return -loglik_at(binding, y, natural, config.curvature);
  };

  // Assemble starts: explicit ones, else heuristic plus jittered copies.
  std::vector<Vec> starts_z;
  if (!config.explicit_starts.empty()) {
    for (const Vec &natural : config.explicit_starts)
      starts_z.push_back(binding.pack(natural).to_unconstrained());
  } else {
    Vec base = binding.pack(binding.heuristic_start(y)).to_unconstrained();
    starts_z.push_back(base);
    RngEngine rng(split_seed(config.seed, 0x5eedull));
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int s = 1; s < std::max(1, config.multistart); ++s) {
      Vec z = base;
      for (Eigen::Index i = 0; i < k; ++i)
        z(i) += 0.3 * gauss(rng) * std::max(1.0, std::abs(base(i)));
      starts_z.push_back(z);
    }
  }

  FitResult result;
  result.family = family;
  result.norm_kind = config.norm_kind;
  result.scaled_score_exponent = config.scaled_score_exponent;
  result.curvature = config.curvature;

  double best_value = kInf;
  Vec best_z;
  for (size_t s = 0; s < starts_z.size(); ++s) {
    StartDiagnostics diag;
    diag.start_index = static_cast<int>(s);
    MinimizeResult min = minimize_bfgs(objective, starts_z[s],
                                       config.optimizer);
    if (!min.converged) {
      MinimizeResult nm = minimize_nelder_mead(
          objective, min.x.size() == k ? min.x : starts_z[s],
          config.optimizer);
      if (nm.converged || nm.value < min.value) min = nm;
    }
    diag.converged = min.converged;
    diag.loglik = -min.value;
    diag.iterations = min.iterations;
    diag.gradient_norm = min.gradient_norm;
    diag.method = min.method;
    if (!std::isfinite(min.value)) diag.note = "non-finite objective";
    result.starts.push_back(diag);
    if (min.converged && min.value < best_value) {
      best_value = min.value;
      best_z = min.x;
      result.best_start = static_cast<int>(s);
    }
  }

  if (result.best_start < 0) {
    std::string msg = "all optimization starts failed:";
    for (const auto &d : result.starts)
      msg += " [start " + std::to_string(d.start_index) + " " + d.method +
             " loglik=" + std::to_string(d.loglik) + "]";
    throw EstimationFailureError(msg);
  }

  ParameterVector params(binding.defs(), Vec::Zero(k));
  params.set_from_unconstrained(best_z);
  result.params = params;
  result.loglik = -best_value;

  if (config.compute_covariance) {
    auto natural_objective = [&](const Vec &natural) {
      return -loglik_at(binding, y, natural, config.curvature);
    };
    Mat hess = numerical_hessian(natural_objective, params.values());
    bool projected = false;
    Mat hess_psd = project_to_psd(hess, &projected);
    if (projected) {
      result.covariance_projected = true;
      result.warnings.push_back(
          "observed information was not positive definite; projected");
    }
    result.covariance =
        symmetrized(hess_psd.selfadjointView<Eigen::Lower>().llt().solve(
            Mat::Identity(k, k)));
  } else {
    result.covariance = Mat::Zero(k, k);
  }
  return result;
}

}  // namespace sdfilter
