#include "sdfilter/uncertainty.hpp"

#include <algorithm>
#include <cmath>

#include "sdfilter/errors.hpp"

namespace sdfilter {

namespace {

constexpr double kVarTol = 1e-10;

double checked_variance(double var, const char *what) {
  if (var < -kVarTol)
    throw Error(std::string("internal invariant: negative ") + what +
                " variance after PSD enforcement");
  return std::max(var, 0.0);
}

// Type-7 (linear interpolation) empirical quantile; sorted input.
double quantile_type7(const std::vector<double> &sorted, double p) {
  const size_t n = sorted.size();
  if (n == 1) return sorted[0];
  const double h = (static_cast<double>(n) - 1.0) * p;
  const size_t lo = static_cast<size_t>(std::floor(h));
  const size_t hi = std::min(lo + 1, n - 1);
  const double frac = h - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

int target_index(BandTarget t) { return static_cast<int>(t); }

void fill_target(const ObservationModel &model, const SdFilterRun &run,
                 BandTarget target, SignalPath &path) {
  const int n = run.size();
  const int k = target_index(target);
  path.mean[k].resize(n);
  path.var[k].resize(n);
  const bool predictive = target == BandTarget::Predictive;
  for (int t = 0; t < n; ++t) {
    const Vec &a = predictive ? run.a_pred[t] : run.a_upd[t];
    const Mat &P = predictive ? run.P_pred[t] : run.P_upd[t];
    Vec load = signal_loading(model, a);
    path.mean[k](t) = model.signal(a)(0);
    path.var[k](t) = load.dot(P * load);
  }
}

void fill_smoothed(const ObservationModel &model, const SmootherRun &run,
                   SignalPath &path) {
  const int n = run.size();
  const int k = target_index(BandTarget::Smoothed);
  path.mean[k].resize(n);
  path.var[k].resize(n);
  for (int t = 0; t < n; ++t) {
    Vec load = signal_loading(model, run.alpha_hat[t]);
    path.mean[k](t) = model.signal(run.alpha_hat[t])(0);
    path.var[k](t) = load.dot(run.P_hat[t] * load);
  }
}

BandSeries normal_bands(const Vec &mean, const Vec &var, double level,
                        const char *what) {
  const double z = normal_quantile(0.5 * (1.0 + level));
  const int n = static_cast<int>(mean.size());
  BandSeries out;
  out.mean = mean;
  out.var_total = Vec(n);
  out.var_filtering = Vec(n);
  out.var_parameter = Vec::Zero(n);
  out.lower = Vec(n);
  out.upper = Vec(n);
  for (int t = 0; t < n; ++t) {
    const double v = checked_variance(var(t), what);
    out.var_total(t) = v;
    out.var_filtering(t) = v;
    const double half = z * std::sqrt(v);
    out.lower(t) = mean(t) - half;
    out.upper(t) = mean(t) + half;
  }
  return out;
}

}  // namespace

void BandSpec::validate() const {
  if (!(level > 0.0 && level < 1.0))
    throw InvalidInputError("band level must lie in (0, 1)");
  if (regime != BandRegime::FilteringOnly && draws < 100)
    throw InvalidInputError("simulation bands require at least 100 draws");
}

Vec signal_loading(const ObservationModel &model, const Vec &a) {
  if (model.signal(a).size() != 1)
    throw InvalidInputError("bands require a scalar signal");
  const auto m = model.state_dim();
  Vec load(m);
  Vec probe = a;
  for (Eigen::Index j = 0; j < m; ++j) {
    const double h = 0.5;
    probe(j) = a(j) + h;
    const double up = model.signal(probe)(0);
    probe(j) = a(j) - h;
    const double down = model.signal(probe)(0);
    probe(j) = a(j);
    load(j) = (up - down) / (2.0 * h);
  }
  return load;
}

BandWorkspace::BandWorkspace(const Mat &y, const FitResult &fit, int draws,
                             std::uint64_t seed, bool include_smoothed)
    : include_smoothed_(include_smoothed) {
  if (draws < 100)
    throw InvalidInputError("simulation bands require at least 100 draws");
  FamilyBinding binding(fit.family, fit.norm_kind, fit.scaled_score_exponent);

  auto run_path = [&](const Vec &natural) {
    auto model = binding.make_model(natural);
    TransitionSpec trans = binding.make_transition(natural);
    NormalizationScheme norm = binding.make_normalization(natural);
    SdFilterRun run = sd_filter(*model, trans, norm, y, {}, fit.curvature);
    SignalPath path;
    fill_target(*model, run, BandTarget::Predictive, path);
    fill_target(*model, run, BandTarget::Update, path);
    if (include_smoothed_)
      fill_smoothed(*model, sd_smoother(*model, trans, run), path);
    return path;
  };

  at_estimate_ = run_path(fit.params.values());

  const auto k = fit.params.size();
  if (fit.covariance.rows() != k || fit.covariance.cols() != k)
    throw InvalidInputError("fit covariance has wrong dimensions");
  if (!is_psd(fit.covariance, 1e-8))
    throw InvalidInputError("fit covariance is not PSD");
  Mat chol = psd_cholesky(fit.covariance);

  RngEngine rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const int budget = 2 * draws;  // caps the rejection rate at 50%
  int attempts = 0;
  draws_.reserve(draws);
  while (static_cast<int>(draws_.size()) < draws) {
    if (attempts >= budget)
      throw PriorDomainError(
          "more than half of the prior draws fell outside the parameter "
          "domain");
    ++attempts;
    Vec z(k);
    for (Eigen::Index i = 0; i < k; ++i) z(i) = gauss(rng);
    Vec theta = fit.params.values() + chol * z;
    if (!ParameterVector::values_in_domain(fit.params.defs(), theta)) {
      ++rejected_;
      continue;
    }
    try {
      draws_.push_back(run_path(theta));
    } catch (const Error &) {
      ++rejected_;
    }
  }
}

void BandWorkspace::require_target(BandTarget target) const {
  if (target == BandTarget::Smoothed && !include_smoothed_)
    throw InvalidInputError("workspace was built without smoothed paths");
}

BandSeries BandWorkspace::combined(double level, BandTarget target) const {
  require_target(target);
  const int k = target_index(target);
  const int n = static_cast<int>(at_estimate_.mean[k].size());
  const int b = static_cast<int>(draws_.size());
  const double z = normal_quantile(0.5 * (1.0 + level));

  BandSeries out;
  out.mean = at_estimate_.mean[k];
  out.lower = Vec(n);
  out.upper = Vec(n);
  out.var_total = Vec(n);
  out.var_filtering = Vec(n);
  out.var_parameter = Vec(n);
  out.rejected_draws = rejected_;

  for (int t = 0; t < n; ++t) {
    double mean_p = 0.0;
    double dev2 = 0.0;
    for (int i = 0; i < b; ++i) {
      mean_p += checked_variance(draws_[i].var[k](t), "draw");
      const double d = draws_[i].mean[k](t) - out.mean(t);
      dev2 += d * d;
    }
    out.var_filtering(t) = mean_p / static_cast<double>(b);
    out.var_parameter(t) = dev2 / static_cast<double>(b);
    out.var_total(t) = out.var_filtering(t) + out.var_parameter(t);
    const double half = z * std::sqrt(out.var_total(t));
    out.lower(t) = out.mean(t) - half;
    out.upper(t) = out.mean(t) + half;
  }
  return out;
}

BandSeries BandWorkspace::parameter_only(double level,
                                         BandTarget target) const {
  require_target(target);
  const int k = target_index(target);
  const int n = static_cast<int>(at_estimate_.mean[k].size());
  const int b = static_cast<int>(draws_.size());

  BandSeries out;
  out.mean = at_estimate_.mean[k];
  out.lower = Vec(n);
  out.upper = Vec(n);
  out.var_total = Vec(n);
  out.var_filtering = Vec::Zero(n);
  out.var_parameter = Vec(n);
  out.rejected_draws = rejected_;

  std::vector<double> column(b);
  const double p_lo = 0.5 * (1.0 - level);
  const double p_hi = 0.5 * (1.0 + level);
  for (int t = 0; t < n; ++t) {
    double dev2 = 0.0;
    for (int i = 0; i < b; ++i) {
      column[i] = draws_[i].mean[k](t);
      const double d = column[i] - out.mean(t);
      dev2 += d * d;
    }
    std::sort(column.begin(), column.end());
    out.lower(t) = quantile_type7(column, p_lo);
    out.upper(t) = quantile_type7(column, p_hi);
    out.var_parameter(t) = dev2 / static_cast<double>(b);
    out.var_total(t) = out.var_parameter(t);
  }
  return out;
}

BandSeries bands_filtering_only(const ObservationModel &model,
                                const SdFilterRun &run, const BandSpec &spec) {
  spec.validate();
  if (spec.regime != BandRegime::FilteringOnly)
    throw InvalidInputError("regime must be FilteringOnly");
  if (spec.target == BandTarget::Smoothed)
    throw InvalidInputError("smoothed bands need a smoother run");
  SignalPath path;
  fill_target(model, run, spec.target, path);
  const int k = target_index(spec.target);
  return normal_bands(path.mean[k], path.var[k], spec.level, "filter");
}

BandSeries bands_filtering_only(const ObservationModel &model,
                                const SmootherRun &run, const BandSpec &spec) {
  spec.validate();
  if (spec.regime != BandRegime::FilteringOnly)
    throw InvalidInputError("regime must be FilteringOnly");
  if (spec.target != BandTarget::Smoothed)
    throw InvalidInputError("smoother runs carry only the smoothed target");
  SignalPath path;
  fill_smoothed(model, run, path);
  const int k = target_index(BandTarget::Smoothed);
  return normal_bands(path.mean[k], path.var[k], spec.level, "smoother");
}

BandSeries bands_parameter_only(const Mat &y, const FitResult &fit,
                                const BandSpec &spec) {
  spec.validate();
  if (spec.regime != BandRegime::ParameterOnly)
    throw InvalidInputError("regime must be ParameterOnly");
  BandWorkspace ws(y, fit, spec.draws, spec.seed,
                   spec.target == BandTarget::Smoothed);
  return ws.parameter_only(spec.level, spec.target);
}

BandSeries bands_combined(const Mat &y, const FitResult &fit,
                          const BandSpec &spec) {
  spec.validate();
  if (spec.regime != BandRegime::Combined)
    throw InvalidInputError("regime must be Combined");
  BandWorkspace ws(y, fit, spec.draws, spec.seed,
                   spec.target == BandTarget::Smoothed);
  return ws.combined(spec.level, spec.target);
}

double coverage_rate(const BandSeries &bands, const Vec &truth) {
  if (truth.size() != bands.mean.size())
    throw InvalidInputError("coverage: length mismatch");
  const int n = bands.size();
  int hits = 0;
  for (int t = 0; t < n; ++t)
    if (bands.lower(t) <= truth(t) && truth(t) <= bands.upper(t)) ++hits;
  return static_cast<double>(hits) / static_cast<double>(n);
}

BandSeries slice_bands(const BandSeries &bands, int from, int to) {
  if (from < 0 || to > bands.size() || from >= to)
    throw InvalidInputError("slice_bands: bad range");
  const int len = to - from;
  BandSeries out;
  out.mean = bands.mean.segment(from, len);
  out.lower = bands.lower.segment(from, len);
  out.upper = bands.upper.segment(from, len);
  out.var_total = bands.var_total.segment(from, len);
  out.var_filtering = bands.var_filtering.segment(from, len);
  out.var_parameter = bands.var_parameter.segment(from, len);
  out.rejected_draws = bands.rejected_draws;
  return out;
}

}  // namespace sdfilter
