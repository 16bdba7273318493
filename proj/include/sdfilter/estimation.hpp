#ifndef SDFILTER_ESTIMATION_HPP_
#define SDFILTER_ESTIMATION_HPP_

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "sdfilter/models.hpp"
#include "sdfilter/optimize.hpp"
#include "sdfilter/score_engine.hpp"

namespace sdfilter {

// Bijections mapping a constrained natural parameter to the real line.
enum class Transform {
  Identity,
  Log,          // (0, inf)
  Logit11,      // (-1, 1), atanh
  LogNuMinus2,  // (2, inf), log(nu - 2)
};

double to_unconstrained(Transform t, double natural);
double to_natural(Transform t, double unconstrained);
bool in_domain(Transform t, double natural);

struct ParamDef {
  std::string name;
  Transform transform = Transform::Identity;
};

// Ordered named parameters in natural coordinates plus their transforms.
class ParameterVector {
 public:
  ParameterVector() = default;
  ParameterVector(std::vector<ParamDef> defs, Vec values);

  Eigen::Index size() const { return values_.size(); }
  const std::vector<ParamDef> &defs() const { return defs_; }
  const Vec &values() const { return values_; }
  double value(const std::string &name) const;
  int index(const std::string &name) const;

  // Throws InvalidParameterError when any entry leaves its domain.
  void set_values(const Vec &natural);

  Vec to_unconstrained() const;
  void set_from_unconstrained(const Vec &z);
  static bool values_in_domain(const std::vector<ParamDef> &defs,
                               const Vec &natural);

 private:
  std::vector<ParamDef> defs_;
  Vec values_;
};

// Maps a model family to its parameter layout and builds model/transition
// objects from a parameter vector. The same names appear in the CLI config
// schema.
class FamilyBinding {
 public:
  FamilyBinding(ModelFamily family, NormalizationScheme::Kind norm_kind =
                                        NormalizationScheme::Kind::KalmanConsistent,
                double scaled_score_exponent = 1.0);

  ModelFamily family() const { return family_; }
  const std::vector<ParamDef> &defs() const { return defs_; }

  std::unique_ptr<ObservationModel> make_model(const Vec &natural) const;
  TransitionSpec make_transition(const Vec &natural) const;
  NormalizationScheme make_normalization(const Vec &natural) const;

  ParameterVector pack(const Vec &natural) const;

  // Heuristic central start for the observed series.
  Vec heuristic_start(const Mat &y) const;

 private:
  ModelFamily family_;
  NormalizationScheme::Kind norm_kind_;
  double exponent_;
  std::vector<ParamDef> defs_;
};

struct StartDiagnostics {
  int start_index = 0;
  bool converged = false;
  double loglik = 0.0;
  int iterations = 0;
  double gradient_norm = 0.0;
  std::string method;
  std::string note;
};

struct FitResult {
  ModelFamily family = ModelFamily::GaussianScale;
  NormalizationScheme::Kind norm_kind =
      NormalizationScheme::Kind::KalmanConsistent;
  double scaled_score_exponent = 1.0;
  CurvatureKind curvature = CurvatureKind::Hessian;
  ParameterVector params;   // maximum-likelihood estimates, natural scale
  double loglik = 0.0;
  Mat covariance;           // inverse Hessian of -loglik, natural scale
  bool covariance_projected = false;
  std::vector<StartDiagnostics> starts;
  int best_start = -1;
  std::vector<std::string> warnings;
};

struct FitConfig {
  int multistart = 5;
  std::uint64_t seed = 0;
  MinimizeOptions optimizer;
  NormalizationScheme::Kind norm_kind =
      NormalizationScheme::Kind::KalmanConsistent;
  double scaled_score_exponent = 1.0;
  CurvatureKind curvature = CurvatureKind::Hessian;
  std::vector<Vec> explicit_starts;  // natural coordinates; overrides heuristics
  bool compute_covariance = true;
};

// Maximum-likelihood estimation of the static parameters by numerical
// maximization of the approximate log-likelihood. Requires at least 50
// observations.
FitResult fit(ModelFamily family, const Mat &y, const FitConfig &config = {});

// Central second differences with per-coordinate step 1e-4 * max(1, |x_i|).
// Symmetrized. Throws EstimationFailureError on non-finite entries.
Mat numerical_hessian(const Objective &objective, const Vec &theta);

// Eigenvalue-floored projection used for the asymptotic covariance; flips
// `projected` when the input was not already PSD.
Mat project_to_psd(const Mat &m, bool *projected);

// The approximate log-likelihood as a function of the natural parameter
// vector (+inf guard outside the domain maps to -inf here).
double loglik_at(const FamilyBinding &binding, const Mat &y,
                 const Vec &natural, CurvatureKind curvature);

}  // namespace sdfilter

#endif  // SDFILTER_ESTIMATION_HPP_
