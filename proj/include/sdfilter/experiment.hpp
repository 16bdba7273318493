#ifndef SDFILTER_EXPERIMENT_HPP_
#define SDFILTER_EXPERIMENT_HPP_

#include <map>
#include <string>
#include <vector>

#include "sdfilter/estimation.hpp"
#include "sdfilter/io.hpp"
#include "sdfilter/particle.hpp"
#include "sdfilter/uncertainty.hpp"

namespace sdfilter {

// Data-generating parameters of the four univariate simulation designs, in
// the family's natural parameter order (c, phi, q, ...).
Vec design_parameters(ModelFamily family);

struct ExperimentConfig {
  std::vector<ModelFamily> families = {
      ModelFamily::StudentTLocation, ModelFamily::GaussianScale,
      ModelFamily::StudentTScale, ModelFamily::PoissonDuration};
  int replications = 100;
  int series_length = 2000;  // even; first half estimation, second half loss
  int particle_count = 1000;
  int smoother_trajectories = 300;
  int band_draws = 200;
  std::vector<double> band_levels = {0.90, 0.95, 0.99};
  std::uint64_t seed = 1;
  int threads = 0;  // 0 = hardware concurrency
  bool run_oracle = true;
  bool run_bands = true;
  bool dump_losses = false;
  int multistart = 3;
  NormalizationScheme::Kind norm_kind =
      NormalizationScheme::Kind::KalmanConsistent;
  double scaled_score_exponent = 1.0;
  CurvatureKind curvature = CurvatureKind::Hessian;
  double max_failure_fraction = 0.10;
  std::map<ModelFamily, Vec> parameter_overrides;

  void validate() const;
};

struct EstimatorLoss {
  double predictive = 0.0;
  double update = 0.0;
  double smoothed = 0.0;
};

// Coverage of the three targets at one nominal level.
struct CoverageCell {
  double predictive = 0.0;
  double update = 0.0;
  double smoothed = 0.0;
};

struct ReplicationOutcome {
  bool ok = false;
  std::string error;
  EstimatorLoss sd;
  EstimatorLoss oracle;
  std::vector<CoverageCell> combined_coverage;   // one per band level
  std::vector<double> parameter_only_coverage;   // predictive target
  Vec estimates;
  long clip_steps = 0;
  long filter_steps = 0;
  double sd_seconds = 0.0;
  double oracle_seconds = 0.0;
};

struct ModelReport {
  ModelFamily family = ModelFamily::GaussianScale;
  std::vector<std::string> parameter_names;
  Vec true_parameters;
  int replications_requested = 0;
  int replications_used = 0;
  int failures = 0;
  EstimatorLoss sd_mse;
  EstimatorLoss oracle_mse;
  std::vector<CoverageCell> combined_coverage;
  std::vector<double> parameter_only_coverage;
  Vec estimate_mean;
  Vec estimate_std;
  double clip_fraction = 0.0;
  double sd_seconds = 0.0;
  double oracle_seconds = 0.0;
  std::vector<ReplicationOutcome> replications;  // kept when dump_losses
};

struct ExperimentReport {
  ExperimentConfig config;
  std::vector<ModelReport> models;

  // Deterministic content: everything except wall-clock measurements.
  Json to_json() const;
  Json timing_json() const;
  std::vector<Json> models_json_source() const;

  // report.json, mse_table.csv, coverage_table.csv, timing.json and, when
  // configured, losses.csv under out_dir.
  void write_files(const std::string &out_dir) const;
};

// Simulate/fit/filter/smooth/oracle/bands over independent replications with
// per-replication seeds split from the root seed. Replications run
// concurrently; aggregation order is fixed by replication index.
ExperimentReport run_experiment(const ExperimentConfig &config);

}  // namespace sdfilter

#endif  // SDFILTER_EXPERIMENT_HPP_
