#include "sdfilter/score_engine.hpp"

#include <cmath>

#include "sdfilter/errors.hpp"

namespace sdfilter {

namespace {

constexpr double kPsdTol = 1e-10;
constexpr double kEigenFloor = 1e-10;

Mat matrix_power(const Mat &m, double d) {
  if (d == 1.0) return m;
  if (d == 0.0) return Mat::Identity(m.rows(), m.cols());
  Eigen::SelfAdjointEigenSolver<Mat> es(symmetrized(m));
  Vec ev = es.eigenvalues().cwiseMax(0.0).array().pow(d);
  return symmetrized(es.eigenvectors() * ev.asDiagonal() *
                     es.eigenvectors().transpose());
}

GaussianState resolve_init(const TransitionSpec &trans,
                           const std::optional<GaussianState> &init) {
  if (init) {
    if (init->a.size() != trans.state_dim() ||
        init->P.rows() != trans.state_dim())
      throw InvalidInputError("initial state dimension mismatch");
    if (!is_psd(init->P, kPsdTol))
      throw InvalidInputError("initial covariance is not PSD");
    return {init->a, symmetrized(init->P)};
  }
  return stationary_initial_state(trans.T, trans.Q, trans.c);
}

}  // namespace

void TransitionSpec::validate() const {
  const auto m = state_dim();
  if (T.cols() != m || Q.rows() != m || Q.cols() != m || c.size() != m)
    throw InvalidInputError("transition spec has inconsistent dimensions");
  if (!T.allFinite() || !Q.allFinite() || !c.allFinite())
    throw InvalidInputError("transition spec contains non-finite entries");
  if (!is_psd(Q, kPsdTol)) throw InvalidInputError("Q is not symmetric PSD");
}

NormalizationScheme NormalizationScheme::scaled_score(Mat A, double d) {
  NormalizationScheme norm;
  norm.kind = Kind::ScaledScore;
  norm.loading = std::move(A);
  norm.exponent = d;
  if (norm.loading.rows() != norm.loading.cols())
    throw InvalidInputError("scaled-score loading matrix must be square");
  Eigen::FullPivLU<Mat> lu(norm.loading);
  if (lu.rank() < norm.loading.cols())
    throw InvalidInputError("scaled-score loading matrix must have full rank");
  return norm;
}

double SdFilterRun::loglik() const {
  double total = 0.0;
  for (double term : loglik_terms) total += term;
  return total;
}

SdFilterRun sd_filter(const ObservationModel &model,
                      const TransitionSpec &trans,
                      const NormalizationScheme &norm, const Mat &y,
                      const std::optional<GaussianState> &init,
                      CurvatureKind curvature) {
  trans.validate();
  const auto m = trans.state_dim();
  if (model.state_dim() != m)
    throw InvalidInputError("model state dimension does not match transition");
  if (y.rows() < 1) throw InvalidInputError("observation sequence is empty");
  if (y.cols() != model.obs_dim())
    throw InvalidInputError("observation dimension does not match model");
  if (!y.allFinite())
    throw InvalidInputError("observations contain non-finite entries");

  const bool scaled = norm.kind == NormalizationScheme::Kind::ScaledScore;
  Mat Tinv_A;
  if (scaled) {
    if (norm.loading.rows() != m)
      throw InvalidInputError("loading matrix dimension mismatch");
    Tinv_A = trans.T.partialPivLu().solve(norm.loading);
  }

  GaussianState state = resolve_init(trans, init);
  const int n = static_cast<int>(y.rows());

  SdFilterRun run;
  run.norm_kind = norm.kind;
  run.state_dim = m;
  run.obs_dim = model.obs_dim();
  run.a_pred.reserve(n);
  run.P_pred.reserve(n);
  run.a_upd.reserve(n);
  run.P_upd.reserve(n);
  run.score.reserve(n);
  run.hessian.reserve(n);
  run.loglik_terms.reserve(n);

  Vec a = state.a;
  Mat P = state.P;
  bool clipped = false;
  for (int t = 0; t < n; ++t) {
    if (scaled) {
      Mat S = model.scaled_score_normalization(a);
      P = clip_to_psd(Tinv_A * matrix_power(S, norm.exponent), kEigenFloor,
                      kPsdTol, &clipped);
      if (clipped) ++run.psd_clip_count;
    }

    Vec y_t = y.row(t).transpose();
    Vec grad = model.score(y_t, a, P);
    Mat curv = curvature == CurvatureKind::Hessian
                   ? model.hessian(y_t, a, P)
                   : Mat(-grad * grad.transpose());
    double ll = model.log_density(y_t, a, P);
    if (!grad.allFinite() || !curv.allFinite() || !std::isfinite(ll))
      throw NumericalFailureError("non-finite score/Hessian/log-density", t);

    Vec a_upd = a + P * grad;
    Mat P_upd = clip_to_psd(P + P * curv * P, kEigenFloor, kPsdTol, &clipped);
    if (clipped) ++run.psd_clip_count;

    run.a_pred.push_back(a);
    run.P_pred.push_back(P);
    run.a_upd.push_back(a_upd);
    run.P_upd.push_back(P_upd);
    run.score.push_back(grad);
    run.hessian.push_back(curv);
    run.loglik_terms.push_back(ll);

    a = trans.c + trans.T * a + trans.T * P * grad;
    if (!a.allFinite())
      throw NumericalFailureError("predictive mean diverged", t);
    if (!scaled) {
      // T P (T + T P Hess)' + Q, carried through the enforced update
      // covariance (identical when no clip occurred).
      P = symmetrized(trans.T * P_upd * trans.T.transpose() + trans.Q);
    }
  }
  return run;
}

SmootherRun sd_smoother(const ObservationModel &model,
                        const TransitionSpec &trans, const SdFilterRun &run) {
  if (run.size() == 0) throw InvalidInputError("smoother: empty filter run");
  const auto m = trans.state_dim();
  if (run.state_dim != m || model.state_dim() != m)
    throw InvalidInputError("smoother: dimension mismatch");
  if (run.norm_kind == NormalizationScheme::Kind::ScaledScore &&
      run.state_dim > run.obs_dim)
    throw IdentificationError(
        "scaled-score smoothing with more latent components than signals "
        "cannot identify P_t; use the Kalman-consistent normalization");

  const int n = run.size();
  Mat ident = Mat::Identity(m, m);

  SmootherRun out;
  out.r.assign(n, Vec::Zero(m));
  out.N.assign(n, Mat::Zero(m, m));
  out.alpha_hat.assign(n, Vec::Zero(m));
  out.P_hat.assign(n, Mat::Zero(m, m));
  out.L.assign(n, Mat::Zero(m, m));

  Vec r = Vec::Zero(m);
  Mat N = Mat::Zero(m, m);
  bool clipped = false;
  for (int t = n - 1; t >= 0; --t) {
    const Mat &P = run.P_pred[t];
    Mat L = trans.T * (ident + P * run.hessian[t]);
    r = run.score[t] + L.transpose() * r;
    N = symmetrized(-run.hessian[t] + L.transpose() * N * L);

    out.L[t] = L;
    out.r[t] = r;
    out.N[t] = N;
    out.alpha_hat[t] = run.a_pred[t] + P * r;
    out.P_hat[t] = clip_to_psd(P - P * N * P, kEigenFloor, kPsdTol, &clipped);
  }
  return out;
}

double sd_loglik(const SdFilterRun &run) {
  double total = 0.0;
  for (int t = 0; t < run.size(); ++t) {
    if (!std::isfinite(run.loglik_terms[t]))
      throw NumericalFailureError("non-finite log-likelihood contribution", t);
    total += run.loglik_terms[t];
  }
  return total;
}

}  // namespace sdfilter
