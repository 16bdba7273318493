#include "sdfilter/experiment.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <sstream>
#include <thread>

#include "sdfilter/errors.hpp"

namespace sdfilter {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

double mse_on_range(const Mat &estimate, const Mat &truth, int from, int to) {
  double acc = 0.0;
  for (int t = from; t < to; ++t)
    acc += (estimate.row(t) - truth.row(t)).squaredNorm();
  return acc / (static_cast<double>(to - from) *
                static_cast<double>(truth.cols()));
}

double mse_vectors(const std::vector<Vec> &estimate, const Mat &truth,
                   int from, int to) {
  double acc = 0.0;
  for (int t = from; t < to; ++t)
    acc += (estimate[t].transpose() - truth.row(t)).squaredNorm();
  return acc / (static_cast<double>(to - from) *
                static_cast<double>(truth.cols()));
}

ReplicationOutcome run_replication(const ExperimentConfig &config,
                                   ModelFamily family, const Vec &truth,
                                   int rep, std::uint64_t family_seed) {
  ReplicationOutcome out;
  out.combined_coverage.assign(config.band_levels.size(), CoverageCell{});
  out.parameter_only_coverage.assign(config.band_levels.size(), 0.0);

  const std::uint64_t rep_seed = split_seed(family_seed, rep);
  const int n = config.series_length;
  const int half = n / 2;

  try {
    FamilyBinding dgp_binding(family);
    auto dgp_model = dgp_binding.make_model(truth);
    TransitionSpec dgp_trans = dgp_binding.make_transition(truth);
    SsmSample sample =
        simulate_ssm(*dgp_model, dgp_trans, n, split_seed(rep_seed, 1));
    const Mat train = sample.observations.topRows(half);

    // True signal path for coverage.
    Vec true_signal(n);
    for (int t = 0; t < n; ++t)
      true_signal(t) = dgp_model->signal(sample.states.row(t).transpose())(0);

    const auto sd_start = Clock::now();
    FitConfig fc;
    fc.multistart = config.multistart;
    fc.seed = split_seed(rep_seed, 2);
    fc.norm_kind = config.norm_kind;
    fc.scaled_score_exponent = config.scaled_score_exponent;
    fc.curvature = config.curvature;
    fc.compute_covariance = config.run_bands;
    FitResult fitted = fit(family, train, fc);
    out.estimates = fitted.params.values();

    FamilyBinding binding(family, config.norm_kind,
                          config.scaled_score_exponent);
    auto model = binding.make_model(fitted.params.values());
    TransitionSpec trans = binding.make_transition(fitted.params.values());
    NormalizationScheme norm =
        binding.make_normalization(fitted.params.values());

    SdFilterRun run = sd_filter(*model, trans, norm, sample.observations, {},
                                config.curvature);
    SmootherRun smooth = sd_smoother(*model, trans, run);
    out.sd_seconds = seconds_since(sd_start);

    out.clip_steps = run.psd_clip_count;
    out.filter_steps = run.size();
    out.sd.predictive = mse_vectors(run.a_pred, sample.states, half, n);
    out.sd.update = mse_vectors(run.a_upd, sample.states, half, n);
    out.sd.smoothed = mse_vectors(smooth.alpha_hat, sample.states, half, n);

    if (config.run_oracle) {
      const auto oracle_start = Clock::now();
      ParticleFilterResult pf =
          particle_filter(*model, trans, sample.observations,
                          config.particle_count, split_seed(rep_seed, 3));
      ParticleSmootherResult ps =
          particle_smoother(pf, trans, config.smoother_trajectories,
                            split_seed(rep_seed, 4), half);
      out.oracle_seconds = seconds_since(oracle_start);
      out.oracle.predictive = mse_on_range(pf.predictive_mean, sample.states,
                                           half, n);
      out.oracle.update = mse_on_range(pf.filtered_mean, sample.states, half,
                                       n);
      out.oracle.smoothed = mse_on_range(ps.smoothed_mean, sample.states,
                                         half, n);
    }

    if (config.run_bands) {
      BandWorkspace ws(sample.observations, fitted, config.band_draws,
                       split_seed(rep_seed, 5), /*include_smoothed=*/true);
      const Vec eval_truth = true_signal.segment(half, n - half);
      for (size_t li = 0; li < config.band_levels.size(); ++li) {
        const double level = config.band_levels[li];
        CoverageCell cell;
        cell.predictive = coverage_rate(
            slice_bands(ws.combined(level, BandTarget::Predictive), half, n),
            eval_truth);
        cell.update = coverage_rate(
            slice_bands(ws.combined(level, BandTarget::Update), half, n),
            eval_truth);
        cell.smoothed = coverage_rate(
            slice_bands(ws.combined(level, BandTarget::Smoothed), half, n),
            eval_truth);
        out.combined_coverage[li] = cell;
        out.parameter_only_coverage[li] = coverage_rate(
            slice_bands(ws.parameter_only(level, BandTarget::Predictive),
                        half, n),
            eval_truth);
      }
    }
    out.ok = true;
  } catch (const std::exception &e) {
    out.ok = false;
    out.error = e.what();
  }
  return out;
}

}  // namespace

Vec design_parameters(ModelFamily family) {
  Vec v;
  switch (family) {
    case ModelFamily::StudentTLocation:
      v.resize(5);
      v << 0.01, 0.98, 0.01, 0.01, 5.0;
      break;
    case ModelFamily::GaussianScale:
      v.resize(4);
      v << 0.0, 0.98, 0.01, 0.1;
      break;
    case ModelFamily::StudentTScale:
      v.resize(5);
      v << 0.0, 0.98, 0.01, 0.1, 5.0;
      break;
    case ModelFamily::PoissonDuration:
      v.resize(3);
      v << 0.001, 0.98, 0.01;
      break;
    case ModelFamily::TwoComponentSv:
      // From the empirical two-component fit; not part of the simulation
      // designs but usable as a default DGP.
      v.resize(7);
      v << 0.0101, 9.7201, 0.9992, 0.9088, std::sqrt(0.0037),
          std::sqrt(0.0165 - 0.0073 * 0.0073 / 0.0037),
          0.0073 / std::sqrt(0.0037);
      break;
  }
  return v;
}

void ExperimentConfig::validate() const {
  if (families.empty()) throw InvalidInputError("no families configured");
  if (replications < 1) throw InvalidInputError("replications must be >= 1");
  if (series_length < 100 || series_length % 2 != 0)
    throw InvalidInputError("series_length must be even and >= 100");
  if (particle_count < 100)
    throw InvalidInputError("particle_count must be >= 100");
  if (smoother_trajectories < 1)
    throw InvalidInputError("smoother_trajectories must be >= 1");
  if (run_bands && band_draws < 100)
    throw InvalidInputError("band_draws must be >= 100");
  for (double level : band_levels)
    if (!(level > 0.0 && level < 1.0))
      throw InvalidInputError("band levels must lie in (0, 1)");
  if (!(max_failure_fraction >= 0.0 && max_failure_fraction <= 1.0))
    throw InvalidInputError("max_failure_fraction must lie in [0, 1]");
}

ExperimentReport run_experiment(const ExperimentConfig &config) {
  config.validate();
  ExperimentReport report;
  report.config = config;

  int threads = config.threads > 0
                    ? config.threads
                    : static_cast<int>(std::thread::hardware_concurrency());
  threads = std::max(1, std::min(threads, config.replications));

  for (size_t fi = 0; fi < config.families.size(); ++fi) {
    const ModelFamily family = config.families[fi];
    const std::uint64_t family_seed = split_seed(config.seed, 1000 + fi);
    Vec truth;
    if (auto it = config.parameter_overrides.find(family);
        it != config.parameter_overrides.end())
      truth = it->second;
    else
      truth = design_parameters(family);

    std::vector<ReplicationOutcome> outcomes(config.replications);
    std::atomic<int> next{0};
    auto worker = [&]() {
      while (true) {
        const int rep = next.fetch_add(1);
        if (rep >= config.replications) break;
        outcomes[rep] =
            run_replication(config, family, truth, rep, family_seed);
      }
    };
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto &th : pool) th.join();

    ModelReport mr;
    mr.family = family;
    mr.true_parameters = truth;
    for (const auto &def : FamilyBinding(family).defs())
      mr.parameter_names.push_back(def.name);
    mr.replications_requested = config.replications;
    mr.combined_coverage.assign(config.band_levels.size(), CoverageCell{});
    mr.parameter_only_coverage.assign(config.band_levels.size(), 0.0);

    const auto k = static_cast<Eigen::Index>(mr.parameter_names.size());
    Vec est_sum = Vec::Zero(k);
    Vec est_sumsq = Vec::Zero(k);
    long clip_steps = 0;
    long filter_steps = 0;
    std::string first_error;
    for (const auto &o : outcomes) {
      if (!o.ok) {
        ++mr.failures;
        if (first_error.empty()) first_error = o.error;
        continue;
      }
      ++mr.replications_used;
      mr.sd_mse.predictive += o.sd.predictive;
      mr.sd_mse.update += o.sd.update;
      mr.sd_mse.smoothed += o.sd.smoothed;
      mr.oracle_mse.predictive += o.oracle.predictive;
      mr.oracle_mse.update += o.oracle.update;
      mr.oracle_mse.smoothed += o.oracle.smoothed;
      for (size_t li = 0; li < config.band_levels.size(); ++li) {
        mr.combined_coverage[li].predictive +=
            o.combined_coverage[li].predictive;
        mr.combined_coverage[li].update += o.combined_coverage[li].update;
        mr.combined_coverage[li].smoothed += o.combined_coverage[li].smoothed;
        mr.parameter_only_coverage[li] += o.parameter_only_coverage[li];
      }
      Vec est = o.estimates.size() == k ? o.estimates : Vec::Zero(k);
      est_sum += est;
      est_sumsq += est.cwiseProduct(est);
      clip_steps += o.clip_steps;
      filter_steps += o.filter_steps;
      mr.sd_seconds += o.sd_seconds;
      mr.oracle_seconds += o.oracle_seconds;
    }

    if (mr.replications_used <
        std::ceil((1.0 - config.max_failure_fraction) *
                  config.replications)) {
      throw EstimationFailureError(
          "experiment aborted: " + std::to_string(mr.failures) + "/" +
          std::to_string(config.replications) + " replications failed for " +
          family_name(family) + "; first error: " + first_error);
    }

    const double used = static_cast<double>(mr.replications_used);
    mr.sd_mse.predictive /= used;
    mr.sd_mse.update /= used;
    mr.sd_mse.smoothed /= used;
    mr.oracle_mse.predictive /= used;
    mr.oracle_mse.update /= used;
    mr.oracle_mse.smoothed /= used;
    for (size_t li = 0; li < config.band_levels.size(); ++li) {
      mr.combined_coverage[li].predictive /= used;
      mr.combined_coverage[li].update /= used;
      mr.combined_coverage[li].smoothed /= used;
      mr.parameter_only_coverage[li] /= used;
    }
    mr.estimate_mean = est_sum / used;
    mr.estimate_std =
        ((est_sumsq / used) - mr.estimate_mean.cwiseProduct(mr.estimate_mean))
            .cwiseMax(0.0)
            .cwiseSqrt();
    mr.clip_fraction =
        filter_steps > 0
            ? static_cast<double>(clip_steps) / static_cast<double>(filter_steps)
            : 0.0;
    if (config.dump_losses) mr.replications = std::move(outcomes);
    report.models.push_back(std::move(mr));
  }
  return report;
}

Json ExperimentReport::to_json() const {
  Json j;
  Json cfg;
  Json fams = Json::array();
  for (auto f : config.families) fams.push_back(family_name(f));
  cfg["families"] = fams;
  cfg["replications"] = config.replications;
  cfg["series_length"] = config.series_length;
  cfg["particle_count"] = config.particle_count;
  cfg["smoother_trajectories"] = config.smoother_trajectories;
  cfg["band_draws"] = config.band_draws;
  cfg["band_levels"] = config.band_levels;
  cfg["seed"] = config.seed;
  cfg["run_oracle"] = config.run_oracle;
  cfg["run_bands"] = config.run_bands;
  cfg["multistart"] = config.multistart;
  cfg["normalization"] =
      config.norm_kind == NormalizationScheme::Kind::KalmanConsistent
          ? "kalman_consistent"
          : "scaled_score";
  cfg["curvature"] = config.curvature == CurvatureKind::Hessian
                         ? "hessian"
                         : "squared_score";
  j["config"] = cfg;

  Json models = Json::array();
  for (const auto &mr : models_json_source()) models.push_back(mr);
  j["models"] = models;
  return j;
}

// Builds the per-model JSON nodes (shared between report and tests).
std::vector<Json> ExperimentReport::models_json_source() const {
  std::vector<Json> out;
  for (const auto &mr : models) {
    Json m;
    m["family"] = family_name(mr.family);
    Json truth;
    for (size_t i = 0; i < mr.parameter_names.size(); ++i)
      truth[mr.parameter_names[i]] = mr.true_parameters(i);
    m["true_parameters"] = truth;
    m["replications_used"] = mr.replications_used;
    m["failures"] = mr.failures;

    Json mse;
    mse["sd"] = {{"predictive", mr.sd_mse.predictive},
                 {"update", mr.sd_mse.update},
                 {"smoothed", mr.sd_mse.smoothed}};
    if (config.run_oracle) {
      mse["oracle"] = {{"predictive", mr.oracle_mse.predictive},
                       {"update", mr.oracle_mse.update},
                       {"smoothed", mr.oracle_mse.smoothed}};
      mse["ratio"] = {
          {"predictive", mr.sd_mse.predictive / mr.oracle_mse.predictive},
          {"update", mr.sd_mse.update / mr.oracle_mse.update},
          {"smoothed", mr.sd_mse.smoothed / mr.oracle_mse.smoothed}};
    }
    m["mse"] = mse;

    if (config.run_bands) {
      Json cov;
      for (size_t li = 0; li < config.band_levels.size(); ++li) {
        const std::string key = format_double(config.band_levels[li]);
        cov["combined"][key] = {
            {"predictive", mr.combined_coverage[li].predictive},
            {"update", mr.combined_coverage[li].update},
            {"smoothed", mr.combined_coverage[li].smoothed}};
        cov["parameter_only"][key] = {
            {"predictive", mr.parameter_only_coverage[li]}};
      }
      m["coverage"] = cov;
    }

    Json est;
    for (size_t i = 0; i < mr.parameter_names.size(); ++i)
      est[mr.parameter_names[i]] = {{"mean", mr.estimate_mean(i)},
                                    {"std", mr.estimate_std(i)}};
    m["estimates"] = est;
    m["psd_clip_fraction"] = mr.clip_fraction;
    out.push_back(m);
  }
  return out;
}

Json ExperimentReport::timing_json() const {
  Json j;
  Json models_j = Json::array();
  for (const auto &mr : models) {
    Json m;
    m["family"] = family_name(mr.family);
    m["sd_seconds"] = mr.sd_seconds;
    m["oracle_seconds"] = mr.oracle_seconds;
    m["oracle_over_sd"] =
        mr.sd_seconds > 0.0 ? mr.oracle_seconds / mr.sd_seconds : 0.0;
    models_j.push_back(m);
  }
  j["models"] = models_j;
  return j;
}

void ExperimentReport::write_files(const std::string &out_dir) const {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output directory: " + out_dir);

  write_json_file(out_dir + "/report.json", to_json());
  write_json_file(out_dir + "/timing.json", timing_json());

  // Table-3-shaped CSV: one row per method/statistic, one column per model.
  {
    std::vector<std::string> header = {"method", "statistic"};
    for (const auto &mr : models) header.push_back(family_name(mr.family));
    const int cols = static_cast<int>(header.size());
    const int rows = config.run_oracle ? 9 : 3;
    Mat data(rows, cols - 2);
    std::vector<std::pair<std::string, std::string>> labels;
    auto fill_row = [&](int r, const char *method, const char *stat,
                        auto getter) {
      labels.emplace_back(method, stat);
      for (size_t i = 0; i < models.size(); ++i)
        data(r, static_cast<int>(i)) = getter(models[i]);
    };
    fill_row(0, "sd", "predictive",
             [](const ModelReport &m) { return m.sd_mse.predictive; });
    fill_row(1, "sd", "update",
             [](const ModelReport &m) { return m.sd_mse.update; });
    fill_row(2, "sd", "smoothed",
             [](const ModelReport &m) { return m.sd_mse.smoothed; });
    if (config.run_oracle) {
      fill_row(3, "oracle", "predictive",
               [](const ModelReport &m) { return m.oracle_mse.predictive; });
      fill_row(4, "oracle", "update",
               [](const ModelReport &m) { return m.oracle_mse.update; });
      fill_row(5, "oracle", "smoothed",
               [](const ModelReport &m) { return m.oracle_mse.smoothed; });
      fill_row(6, "ratio", "predictive", [](const ModelReport &m) {
        return m.sd_mse.predictive / m.oracle_mse.predictive;
      });
      fill_row(7, "ratio", "update", [](const ModelReport &m) {
        return m.sd_mse.update / m.oracle_mse.update;
      });
      fill_row(8, "ratio", "smoothed", [](const ModelReport &m) {
        return m.sd_mse.smoothed / m.oracle_mse.smoothed;
      });
    }
    std::ostringstream os;
    os << "method,statistic";
    for (const auto &mr : models) os << ',' << family_name(mr.family);
    os << '\n';
    for (int r = 0; r < rows; ++r) {
      os << labels[r].first << ',' << labels[r].second;
      for (Eigen::Index c = 0; c < data.cols(); ++c)
        os << ',' << format_double(data(r, c));
      os << '\n';
    }
    write_text_file(out_dir + "/mse_table.csv", os.str());
  }

  if (config.run_bands) {
    std::ostringstream os;
    os << "regime,level,target";
    for (const auto &mr : models) os << ',' << family_name(mr.family);
    os << '\n';
    auto emit = [&](const std::string &regime, double level,
                    const std::string &target, auto getter) {
      os << regime << ',' << format_double(level) << ',' << target;
      for (const auto &mr : models) os << ',' << format_double(getter(mr));
      os << '\n';
    };
    for (size_t li = 0; li < config.band_levels.size(); ++li) {
      const double level = config.band_levels[li];
      emit("combined", level, "predictive", [&](const ModelReport &m) {
        return m.combined_coverage[li].predictive;
      });
      emit("combined", level, "update", [&](const ModelReport &m) {
        return m.combined_coverage[li].update;
      });
      emit("combined", level, "smoothed", [&](const ModelReport &m) {
        return m.combined_coverage[li].smoothed;
      });
      emit("parameter_only", level, "predictive", [&](const ModelReport &m) {
        return m.parameter_only_coverage[li];
      });
    }
    write_text_file(out_dir + "/coverage_table.csv", os.str());
  }

  if (config.dump_losses) {
    std::ostringstream os;
    os << "family,replication,ok,sd_predictive,sd_update,sd_smoothed,"
          "oracle_predictive,oracle_update,oracle_smoothed\n";
    for (const auto &mr : models) {
      for (size_t r = 0; r < mr.replications.size(); ++r) {
        const auto &o = mr.replications[r];
        os << family_name(mr.family) << ',' << r << ',' << (o.ok ? 1 : 0)
           << ',' << format_double(o.sd.predictive) << ','
           << format_double(o.sd.update) << ','
           << format_double(o.sd.smoothed) << ','
           << format_double(o.oracle.predictive) << ','
           << format_double(o.oracle.update) << ','
           << format_double(o.oracle.smoothed) << '\n';
      }
    }
    write_text_file(out_dir + "/losses.csv", os.str());
  }
}

}  // namespace sdfilter
