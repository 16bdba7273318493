#ifndef SDFILTER_UNCERTAINTY_HPP_
#define SDFILTER_UNCERTAINTY_HPP_

#include <cstdint>
#include <vector>

#include "sdfilter/estimation.hpp"
#include "sdfilter/score_engine.hpp"

namespace sdfilter {

enum class BandRegime { FilteringOnly, ParameterOnly, Combined };
enum class BandTarget { Predictive, Update, Smoothed };

struct BandSpec {
  double level = 0.95;  // nominal coverage in (0, 1)
  BandRegime regime = BandRegime::Combined;
  BandTarget target = BandTarget::Predictive;
  int draws = 1000;     // B, simulation regimes only (>= 100)
  std::uint64_t seed = 0;

  void validate() const;
};

// Per-step bands around the scalar signal, with the total variance split
// into its filtering component E_theta[P_t] and parameter component
// Var_theta[a_t].
struct BandSeries {
  Vec mean;
  Vec lower;
  Vec upper;
  Vec var_total;
  Vec var_filtering;
  Vec var_parameter;
  int rejected_draws = 0;

  int size() const { return static_cast<int>(mean.size()); }
};

// Signal-scale conditional moments of one filter/smoother pass.
struct SignalPath {
  Vec mean[3];  // indexed by BandTarget
  Vec var[3];
};

// Shares one set of prior draws theta_b ~ N(theta_hat, Sigma_hat) across
// several band computations (multiple levels and targets).
class BandWorkspace {
 public:
  BandWorkspace(const Mat &y, const FitResult &fit, int draws,
                std::uint64_t seed, bool include_smoothed);

  BandSeries combined(double level, BandTarget target) const;
  BandSeries parameter_only(double level, BandTarget target) const;
  int rejected_draws() const { return rejected_; }
  const SignalPath &at_estimate() const { return at_estimate_; }

 private:
  void require_target(BandTarget target) const;
  SignalPath at_estimate_;
  std::vector<SignalPath> draws_;
  bool include_smoothed_ = false;
  int rejected_ = 0;
};

// Normal bands mean +- z sqrt(var) from the filter's own conditional
// moments (no parameter uncertainty). Target Predictive or Update.
BandSeries bands_filtering_only(const ObservationModel &model,
                                const SdFilterRun &run, const BandSpec &spec);
// Target Smoothed.
BandSeries bands_filtering_only(const ObservationModel &model,
                                const SmootherRun &run, const BandSpec &spec);

// Simulation bands from the asymptotic parameter distribution only:
// empirical type-7 quantiles of the filtered paths across prior draws.
BandSeries bands_parameter_only(const Mat &y, const FitResult &fit,
                                const BandSpec &spec);

// Bands accounting for both parameter and filtering uncertainty via the
// variance decomposition E_theta[P_t] + E_theta[(a_t - a_t_hat)^2].
BandSeries bands_combined(const Mat &y, const FitResult &fit,
                          const BandSpec &spec);

// Fraction of steps whose truth lies inside [lower, upper].
double coverage_rate(const BandSeries &bands, const Vec &truth);

// Restriction of a band series to steps [from, to).
BandSeries slice_bands(const BandSeries &bands, int from, int to);

// Gradient of the scalar signal with respect to the state (exact for the
// affine signals used by all bundled models).
Vec signal_loading(const ObservationModel &model, const Vec &a);

}  // namespace sdfilter

#endif  // SDFILTER_UNCERTAINTY_HPP_
