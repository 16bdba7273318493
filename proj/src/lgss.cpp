#include "sdfilter/lgss.hpp"

#include <cmath>
#include <numbers>

#include "sdfilter/errors.hpp"

namespace sdfilter {

namespace {

constexpr double kPsdTol = 1e-10;
constexpr double kConditionLimit = 1e12;

void check_init(const GaussianState &init, Eigen::Index m) {
  if (init.a.size() != m || init.P.rows() != m || init.P.cols() != m)
    throw InvalidInputError("initial state has inconsistent dimensions");
  if (!init.a.allFinite() || !init.P.allFinite())
    throw InvalidInputError("initial state contains non-finite entries");
  if (!is_psd(init.P, kPsdTol))
    throw InvalidInputError("initial covariance is not PSD");
}

GaussianState resolve_init(const SystemMatrices &sys,
                           const std::optional<GaussianState> &init) {
  if (init) {
    check_init(*init, sys.state_dim());
    return {init->a, symmetrized(init->P)};
  }
  return stationary_initial_state(sys);
}

void check_observations(const SystemMatrices &sys, const Mat &y) {
  if (y.rows() < 1)
    throw InvalidInputError("observation sequence is empty");
  if (y.cols() != sys.obs_dim())
    throw InvalidInputError("observation dimension does not match Z");
  if (!y.allFinite())
    throw InvalidInputError(
        "observations contain non-finite entries (missing data unsupported)");
}

void reserve_run(FilterRun &run, int n) {
  run.innovation.reserve(n);
  run.innovation_cov.reserve(n);
  run.a_pred.reserve(n);
  run.P_pred.reserve(n);
  run.a_upd.reserve(n);
  run.P_upd.reserve(n);
  run.gain.reserve(n);
  run.loglik_terms.reserve(n);
}

void check_smoother_input(const SystemMatrices &sys, const FilterRun &filt) {
  if (filt.size() == 0)
    throw InvalidInputError("smoother: empty filter run");
  if (filt.a_pred[0].size() != sys.state_dim() ||
      filt.innovation[0].size() != sys.obs_dim())
    throw InvalidInputError("smoother: filter run does not match system");
}

}  // namespace

void SystemMatrices::validate() const {
  const auto m = state_dim();
  const auto p = obs_dim();
  if (Z.cols() != m || H.rows() != p || H.cols() != p || T.cols() != m ||
      Q.rows() != m || Q.cols() != m || c.size() != m)
    throw InvalidInputError("system matrices have inconsistent dimensions");
  if (!Z.allFinite() || !H.allFinite() || !T.allFinite() || !Q.allFinite() ||
      !c.allFinite())
    throw InvalidInputError("system matrices contain non-finite entries");
  if (!is_psd(H, kPsdTol)) throw InvalidInputError("H is not symmetric PSD");
  if (!is_psd(Q, kPsdTol)) throw InvalidInputError("Q is not symmetric PSD");
}

GaussianState stationary_initial_state(const Mat &T, const Mat &Q,
                                       const Vec &c) {
  if (spectral_radius(T) >= 1.0)
    throw InvalidInputError(
        "stationary initialization requires spectral radius of T < 1; "
        "supply an explicit initial state");
  Mat ident = Mat::Identity(T.rows(), T.cols());
  Vec a = (ident - T).partialPivLu().solve(c);
  return {a, solve_discrete_lyapunov(T, Q)};
}

GaussianState stationary_initial_state(const SystemMatrices &sys) {
  return stationary_initial_state(sys.T, sys.Q, sys.c);
}

double FilterRun::loglik() const {
  double total = 0.0;
  for (double term : loglik_terms) total += term;
  return total;
}

namespace detail {

SpdInverse spd_inverse(const Mat &F, int step) {
  Eigen::SelfAdjointEigenSolver<Mat> es(symmetrized(F));
  const Vec &ev = es.eigenvalues();
  const double ev_min = ev.minCoeff();
  const double ev_max = ev.maxCoeff();
  if (!(ev_min > 0.0) || ev_max / ev_min > kConditionLimit)
    throw SingularInnovationError("innovation covariance numerically singular",
                                  step);
  Mat inv = es.eigenvectors() * ev.cwiseInverse().asDiagonal() *
            es.eigenvectors().transpose();
  return {symmetrized(inv), ev.array().log().sum()};
}

}  // namespace detail

FilterRun kalman_filter(const SystemMatrices &sys, const Mat &y,
                        const std::optional<GaussianState> &init) {
  sys.validate();
  check_observations(sys, y);
  GaussianState state = resolve_init(sys, init);

  const int n = static_cast<int>(y.rows());
  const double ll_const =
      -0.5 * static_cast<double>(sys.obs_dim()) * std::log(2.0 * std::numbers::pi);
  FilterRun run;
  reserve_run(run, n);

  Vec a = state.a;
  Mat P = state.P;
  for (int t = 0; t < n; ++t) {
    Vec v = y.row(t).transpose() - sys.Z * a;
    Mat F = symmetrized(sys.Z * P * sys.Z.transpose() + sys.H);
    auto [Finv, logdet] = detail::spd_inverse(F, t);
    Mat PZtFinv = P * sys.Z.transpose() * Finv;
    Mat K = sys.T * PZtFinv;

    Vec a_upd = a + PZtFinv * v;
    Mat P_upd = symmetrized(P - PZtFinv * sys.Z * P);
    double ll = ll_const - 0.5 * (logdet + v.dot(Finv * v));

    run.innovation.push_back(v);
    run.innovation_cov.push_back(F);
    run.a_pred.push_back(a);
    run.P_pred.push_back(P);
    run.a_upd.push_back(a_upd);
    run.P_upd.push_back(P_upd);
    run.gain.push_back(K);
    run.loglik_terms.push_back(ll);

    a = sys.c + sys.T * a + K * v;
    P = symmetrized(sys.T * P * (sys.T - K * sys.Z).transpose() + sys.Q);
  }
  return run;
}

SmootherRun kalman_smoother(const SystemMatrices &sys, const FilterRun &filt) {
  check_smoother_input(sys, filt);
  const int n = filt.size();
  const auto m = sys.state_dim();

  SmootherRun out;
  out.r.assign(n, Vec::Zero(m));
  out.N.assign(n, Mat::Zero(m, m));
  out.alpha_hat.assign(n, Vec::Zero(m));
  out.P_hat.assign(n, Mat::Zero(m, m));
  out.L.assign(n, Mat::Zero(m, m));

  Vec r = Vec::Zero(m);
  Mat N = Mat::Zero(m, m);
  for (int t = n - 1; t >= 0; --t) {
    Mat Finv = detail::spd_inverse(filt.innovation_cov[t], t).inverse;
    Mat ZtFinv = sys.Z.transpose() * Finv;
    Mat L = sys.T - filt.gain[t] * sys.Z;
    r = ZtFinv * filt.innovation[t] + L.transpose() * r;
    N = symmetrized(ZtFinv * sys.Z + L.transpose() * N * L);

    out.L[t] = L;
    out.r[t] = r;
    out.N[t] = N;
    out.alpha_hat[t] = filt.a_pred[t] + filt.P_pred[t] * r;
    out.P_hat[t] = symmetrized(filt.P_pred[t] -
                               filt.P_pred[t] * N * filt.P_pred[t]);
  }
  return out;
}

FilterRun kalman_filter_score_form(const SystemMatrices &sys, const Mat &y,
                                   const std::optional<GaussianState> &init) {
  sys.validate();
  check_observations(sys, y);
  GaussianState state = resolve_init(sys, init);

  const int n = static_cast<int>(y.rows());
  const double ll_const =
      -0.5 * static_cast<double>(sys.obs_dim()) * std::log(2.0 * std::numbers::pi);
  FilterRun run;
  reserve_run(run, n);

  Vec a = state.a;
  Mat P = state.P;
  for (int t = 0; t < n; ++t) {
    Vec v = y.row(t).transpose() - sys.Z * a;
    Mat F = symmetrized(sys.Z * P * sys.Z.transpose() + sys.H);
    auto [Finv, logdet] = detail::spd_inverse(F, t);

    // Score and Hessian of the conditional log-likelihood at a_t.
    Vec score = sys.Z.transpose() * Finv * v;
    Mat hess = -(sys.Z.transpose() * Finv * sys.Z);

    Vec a_upd = a + P * score;
    Mat P_upd = symmetrized(P + P * hess * P);
    double ll = ll_const - 0.5 * (logdet + v.dot(Finv * v));
    Mat K = sys.T * P * sys.Z.transpose() * Finv;

    run.innovation.push_back(v);
    run.innovation_cov.push_back(F);
    run.a_pred.push_back(a);
    run.P_pred.push_back(P);
    run.a_upd.push_back(a_upd);
    run.P_upd.push_back(P_upd);
    run.gain.push_back(K);
    run.loglik_terms.push_back(ll);

    Vec a_next = sys.c + sys.T * a + sys.T * P * score;
    Mat P_next = symmetrized(
        sys.T * P * (sys.T + sys.T * P * hess).transpose() + sys.Q);
    a = a_next;
    P = P_next;
  }
  return run;
}

SmootherRun kalman_smoother_score_form(const SystemMatrices &sys,
                                       const FilterRun &filt) {
  check_smoother_input(sys, filt);
  const int n = filt.size();
  const auto m = sys.state_dim();
  Mat ident = Mat::Identity(m, m);

  SmootherRun out;
  out.r.assign(n, Vec::Zero(m));
  out.N.assign(n, Mat::Zero(m, m));
  out.alpha_hat.assign(n, Vec::Zero(m));
  out.P_hat.assign(n, Mat::Zero(m, m));
  out.L.assign(n, Mat::Zero(m, m));

  Vec r = Vec::Zero(m);
  Mat N = Mat::Zero(m, m);
  for (int t = n - 1; t >= 0; --t) {
    Mat Finv = detail::spd_inverse(filt.innovation_cov[t], t).inverse;
    Vec score = sys.Z.transpose() * Finv * filt.innovation[t];
    Mat hess = -(sys.Z.transpose() * Finv * sys.Z);
    Mat L = sys.T * (ident + filt.P_pred[t] * hess);

    r = score + L.transpose() * r;
    N = symmetrized(-hess + L.transpose() * N * L);

    out.L[t] = L;
    out.r[t] = r;
    out.N[t] = N;
    out.alpha_hat[t] = filt.a_pred[t] + filt.P_pred[t] * r;
    out.P_hat[t] = symmetrized(filt.P_pred[t] -
                               filt.P_pred[t] * N * filt.P_pred[t]);
  }
  return out;
}

}  // namespace sdfilter
