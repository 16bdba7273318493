#include "sdfilter/cli.hpp"

#include <filesystem>
#include <iostream>
#include <set>
#include <sstream>

#include "sdfilter/errors.hpp"
#include "sdfilter/experiment.hpp"
#include "sdfilter/particle.hpp"
#include "sdfilter/uncertainty.hpp"

namespace sdfilter::cli {

namespace {

namespace fs = std::filesystem;

void check_keys(const Json &j, const std::set<std::string> &allowed,
                const std::string &where) {
  if (!j.is_object())
    throw InvalidInputError("config section '" + where + "' must be an object");
  for (const auto &item : j.items())
    if (!allowed.contains(item.key()))
      throw InvalidInputError("unknown config key '" + item.key() + "' in " +
                              where);
}

template <typename T>
T require(const Json &j, const std::string &key, const std::string &where) {
  if (!j.contains(key))
    throw InvalidInputError("missing config key '" + key + "' in " + where);
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception &) {
    throw InvalidInputError("config key '" + key + "' in " + where +
                            " has the wrong type");
  }
}

template <typename T>
T value_or(const Json &j, const std::string &key, const T &fallback,
           const std::string &where) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception &) {
    throw InvalidInputError("config key '" + key + "' in " + where +
                            " has the wrong type");
  }
}

std::string out_path(const GlobalOptions &opts, const std::string &name) {
  std::error_code ec;
  fs::create_directories(opts.out_dir, ec);
  if (ec) throw IoError("cannot create output directory: " + opts.out_dir);
  return (fs::path(opts.out_dir) / name).string();
}

std::uint64_t resolve_seed(const Json &config, const GlobalOptions &opts,
                           std::uint64_t fallback) {
  if (opts.seed) return *opts.seed;
  return value_or<std::uint64_t>(config, "seed", fallback, "config");
}

NormalizationScheme::Kind norm_kind_from(const Json &config,
                                         const std::string &where) {
  const std::string name =
      value_or<std::string>(config, "normalization", "kalman_consistent",
                            where);
  if (name == "kalman_consistent")
    return NormalizationScheme::Kind::KalmanConsistent;
  if (name == "scaled_score") return NormalizationScheme::Kind::ScaledScore;
  throw InvalidInputError("unknown normalization '" + name + "' in " + where);
}

CurvatureKind curvature_from(const Json &config, const std::string &where) {
  const std::string name =
      value_or<std::string>(config, "curvature", "hessian", where);
  if (name == "hessian") return CurvatureKind::Hessian;
  if (name == "squared_score") return CurvatureKind::SquaredScore;
  throw InvalidInputError("unknown curvature '" + name + "' in " + where);
}

// Natural parameter vector from a {"name": value} object, in binding order.
Vec params_from_json(const FamilyBinding &binding, const Json &obj) {
  std::set<std::string> allowed;
  for (const auto &def : binding.defs()) allowed.insert(def.name);
  check_keys(obj, allowed, "parameters");
  Vec natural(static_cast<Eigen::Index>(binding.defs().size()));
  for (size_t i = 0; i < binding.defs().size(); ++i) {
    const std::string &name = binding.defs()[i].name;
    natural(static_cast<Eigen::Index>(i)) =
        require<double>(obj, name, "parameters");
  }
  return natural;
}

Mat load_observations(const Json &config, const GlobalOptions &opts) {
  const std::string path = require<std::string>(config, "data", "config");
  CsvTable table = read_csv(path);
  Mat y(table.data.rows(), 1);
  y.col(0) = table.data.col(table.column("y"));
  if (y.rows() == 0) throw InvalidInputError("data file has no rows: " + path);
  return y;
  (void)opts;
}

struct ModelBundle {
  FamilyBinding binding;
  Vec natural;
  std::unique_ptr<ObservationModel> model;
  TransitionSpec trans;
  NormalizationScheme norm;
  CurvatureKind curvature;
};

// Either from an inline "parameters" object or from a fit JSON produced by
// cmd_fit.
ModelBundle resolve_model(const Json &config) {
  const bool has_params = config.contains("parameters");
  const bool has_fit = config.contains("fit");
  if (has_params == has_fit)
    throw InvalidInputError(
        "config must provide exactly one of 'parameters' or 'fit'");
  if (has_fit) {
    FitResult fit =
        fit_result_from_json(read_json_file(require<std::string>(
            config, "fit", "config")));
    FamilyBinding binding(fit.family, fit.norm_kind,
                          fit.scaled_score_exponent);
    Vec natural = fit.params.values();
    return {binding,
            natural,
            binding.make_model(natural),
            binding.make_transition(natural),
            binding.make_normalization(natural),
            fit.curvature};
  }
  const ModelFamily family =
      family_from_name(require<std::string>(config, "family", "config"));
  FamilyBinding binding(family, norm_kind_from(config, "config"),
                        value_or<double>(config, "scaled_score_exponent", 1.0,
                                         "config"));
  Vec natural = params_from_json(binding, config.at("parameters"));
  return {binding,
          natural,
          binding.make_model(natural),
          binding.make_transition(natural),
          binding.make_normalization(natural),
          curvature_from(config, "config")};
}

Mat filter_output_table(const ObservationModel &model, const SdFilterRun &run) {
  const int n = run.size();
  const auto m = run.state_dim;
  Mat table(n, 1 + 4 * m + 1);
  for (int t = 0; t < n; ++t) {
    Eigen::Index col = 0;
    table(t, col++) = t;
    for (Eigen::Index i = 0; i < m; ++i) table(t, col++) = run.a_pred[t](i);
    for (Eigen::Index i = 0; i < m; ++i)
      table(t, col++) = run.P_pred[t](i, i);
    for (Eigen::Index i = 0; i < m; ++i) table(t, col++) = run.a_upd[t](i);
    for (Eigen::Index i = 0; i < m; ++i) table(t, col++) = run.P_upd[t](i, i);
    table(t, col++) = model.signal(run.a_pred[t])(0);
  }
  return table;
}

std::vector<std::string> filter_output_header(Eigen::Index m) {
  std::vector<std::string> header = {"step"};
  auto add = [&](const std::string &base) {
    for (Eigen::Index i = 0; i < m; ++i)
      header.push_back(m == 1 ? base : base + "_" + std::to_string(i + 1));
  };
  add("pred_mean");
  add("pred_var");
  add("upd_mean");
  add("upd_var");
  header.push_back("signal");
  return header;
}

}  // namespace

void cmd_simulate(const Json &config, const GlobalOptions &opts) {
  check_keys(config,
             {"family", "n", "seed", "parameters", "output"}, "config");
  const ModelFamily family =
      family_from_name(require<std::string>(config, "family", "config"));
  const int n = require<int>(config, "n", "config");
  if (n < 1) throw InvalidInputError("n must be >= 1");
  FamilyBinding binding(family);
  Vec natural = params_from_json(binding, config.at("parameters"));
  auto model = binding.make_model(natural);
  TransitionSpec trans = binding.make_transition(natural);

  SsmSample sample =
      simulate_ssm(*model, trans, n, resolve_seed(config, opts, 1));

  const auto m = trans.state_dim();
  Mat table(n, 1 + m + 1);
  for (int t = 0; t < n; ++t) {
    table(t, 0) = t;
    for (Eigen::Index i = 0; i < m; ++i) table(t, 1 + i) = sample.states(t, i);
    table(t, 1 + m) = sample.observations(t, 0);
  }
  std::vector<std::string> header = {"step"};
  for (Eigen::Index i = 0; i < m; ++i)
    header.push_back(m == 1 ? "alpha" : "alpha_" + std::to_string(i + 1));
  header.push_back("y");

  const std::string path = out_path(
      opts, value_or<std::string>(config, "output", "simulated.csv", "config"));
  write_csv(path, header, table);

  const double y_mean = sample.observations.col(0).mean();
  const double y_var =
      (sample.observations.col(0).array() - y_mean).square().mean();
  std::cout << "simulated " << n << " observations of "
            << family_name(family) << " to " << path << "\n"
            << "observation mean " << format_double(y_mean) << ", variance "
            << format_double(y_var) << "\n";
}

void cmd_fit(const Json &config, const GlobalOptions &opts) {
  check_keys(config,
             {"family", "data", "seed", "multistart", "normalization",
              "scaled_score_exponent", "curvature", "max_iterations",
              "output"},
             "config");
  const ModelFamily family =
      family_from_name(require<std::string>(config, "family", "config"));
  Mat y = load_observations(config, opts);

  FitConfig fc;
  fc.multistart = value_or<int>(config, "multistart", 5, "config");
  fc.seed = resolve_seed(config, opts, 1);
  fc.norm_kind = norm_kind_from(config, "config");
  fc.scaled_score_exponent =
      value_or<double>(config, "scaled_score_exponent", 1.0, "config");
  fc.curvature = curvature_from(config, "config");
  fc.optimizer.max_iterations =
      value_or<int>(config, "max_iterations", 300, "config");

  FitResult result = fit(family, y, fc);
  const std::string path = out_path(
      opts, value_or<std::string>(config, "output", "fit.json", "config"));
  write_json_file(path, fit_result_to_json(result));
  std::cout << "fit " << family_name(family) << ": loglik "
            << format_double(result.loglik) << ", wrote " << path << "\n";
}

void cmd_filter(const Json &config, const GlobalOptions &opts) {
  check_keys(config,
             {"family", "data", "parameters", "fit", "normalization",
              "scaled_score_exponent", "curvature", "output"},
             "config");
  Mat y = load_observations(config, opts);
  ModelBundle bundle = resolve_model(config);
  SdFilterRun run = sd_filter(*bundle.model, bundle.trans, bundle.norm, y, {},
                              bundle.curvature);
  const std::string path = out_path(
      opts, value_or<std::string>(config, "output", "filter.csv", "config"));
  write_csv(path, filter_output_header(run.state_dim),
            filter_output_table(*bundle.model, run));
  std::cout << "filtered " << run.size() << " steps, loglik "
            << format_double(run.loglik()) << ", wrote " << path << "\n";
}

void cmd_smooth(const Json &config, const GlobalOptions &opts) {
  check_keys(config,
             {"family", "data", "parameters", "fit", "normalization",
              "scaled_score_exponent", "curvature", "output"},
             "config");
  Mat y = load_observations(config, opts);
  ModelBundle bundle = resolve_model(config);
  SdFilterRun run = sd_filter(*bundle.model, bundle.trans, bundle.norm, y, {},
                              bundle.curvature);
  SmootherRun smooth = sd_smoother(*bundle.model, bundle.trans, run);

  const int n = smooth.size();
  const auto m = run.state_dim;
  Mat table(n, 1 + 2 * m + 1);
  for (int t = 0; t < n; ++t) {
    Eigen::Index col = 0;
    table(t, col++) = t;
    for (Eigen::Index i = 0; i < m; ++i)
      table(t, col++) = smooth.alpha_hat[t](i);
    for (Eigen::Index i = 0; i < m; ++i)
      table(t, col++) = smooth.P_hat[t](i, i);
    table(t, col++) = bundle.model->signal(smooth.alpha_hat[t])(0);
  }
  std::vector<std::string> header = {"step"};
  for (Eigen::Index i = 0; i < m; ++i)
    header.push_back(m == 1 ? "smooth_mean"
                            : "smooth_mean_" + std::to_string(i + 1));
  for (Eigen::Index i = 0; i < m; ++i)
    header.push_back(m == 1 ? "smooth_var"
                            : "smooth_var_" + std::to_string(i + 1));
  header.push_back("signal");

  const std::string path = out_path(
      opts, value_or<std::string>(config, "output", "smooth.csv", "config"));
  write_csv(path, header, table);
  std::cout << "smoothed " << n << " steps, wrote " << path << "\n";
}

void cmd_bands(const Json &config, const GlobalOptions &opts) {
  check_keys(config,
             {"data", "fit", "regime", "target", "level", "draws", "seed",
              "output"},
             "config");
  Mat y = load_observations(config, opts);
  FitResult fit_result = fit_result_from_json(
      read_json_file(require<std::string>(config, "fit", "config")));

  BandSpec spec;
  spec.level = require<double>(config, "level", "config");
  spec.draws = value_or<int>(config, "draws", 1000, "config");
  spec.seed = resolve_seed(config, opts, 1);
  const std::string regime = require<std::string>(config, "regime", "config");
  const std::string target =
      value_or<std::string>(config, "target", "predictive", "config");
  if (target == "predictive") spec.target = BandTarget::Predictive;
  else if (target == "update") spec.target = BandTarget::Update;
  else if (target == "smoothed") spec.target = BandTarget::Smoothed;
  else throw InvalidInputError("unknown band target: " + target);

  BandSeries bands;
  if (regime == "filtering_only") {
    spec.regime = BandRegime::FilteringOnly;
    FamilyBinding binding(fit_result.family, fit_result.norm_kind,
                          fit_result.scaled_score_exponent);
    Vec natural = fit_result.params.values();
    auto model = binding.make_model(natural);
    TransitionSpec trans = binding.make_transition(natural);
    SdFilterRun run = sd_filter(*model, trans,
                                binding.make_normalization(natural), y, {},
                                fit_result.curvature);
    if (spec.target == BandTarget::Smoothed)
      bands = bands_filtering_only(*model, sd_smoother(*model, trans, run),
                                   spec);
    else
      bands = bands_filtering_only(*model, run, spec);
  } else if (regime == "parameter_only") {
    spec.regime = BandRegime::ParameterOnly;
    bands = bands_parameter_only(y, fit_result, spec);
  } else if (regime == "combined") {
    spec.regime = BandRegime::Combined;
    bands = bands_combined(y, fit_result, spec);
  } else {
    throw InvalidInputError("unknown band regime: " + regime);
  }

  const int n = bands.size();
  Mat table(n, 7);
  for (int t = 0; t < n; ++t) {
    table(t, 0) = t;
    table(t, 1) = bands.mean(t);
    table(t, 2) = bands.lower(t);
    table(t, 3) = bands.upper(t);
    table(t, 4) = bands.var_total(t);
    table(t, 5) = bands.var_filtering(t);
    table(t, 6) = bands.var_parameter(t);
  }
  const std::string path = out_path(
      opts, value_or<std::string>(config, "output", "bands.csv", "config"));
  write_csv(path,
            {"step", "mean", "lower", "upper", "var_total", "var_filtering",
             "var_parameter"},
            table);
  std::cout << "bands (" << regime << ", " << target << ", level "
            << format_double(spec.level) << ") wrote " << path;
  if (bands.rejected_draws > 0)
    std::cout << " (" << bands.rejected_draws << " prior draws rejected)";
  std::cout << "\n";
}

void cmd_experiment(const Json &config, const GlobalOptions &opts) {
  check_keys(config,
             {"families", "replications", "series_length", "particle_count",
              "smoother_trajectories", "band_draws", "band_levels", "seed",
              "threads", "run_oracle", "run_bands", "dump_losses",
              "multistart", "normalization", "scaled_score_exponent",
              "curvature", "parameter_overrides", "max_failure_fraction"},
             "config");
  ExperimentConfig ec;
  if (config.contains("families")) {
    ec.families.clear();
    for (const auto &name : config.at("families"))
      ec.families.push_back(family_from_name(name.get<std::string>()));
  }
  ec.replications =
      value_or<int>(config, "replications", ec.replications, "config");
  ec.series_length =
      value_or<int>(config, "series_length", ec.series_length, "config");
  ec.particle_count =
      value_or<int>(config, "particle_count", ec.particle_count, "config");
  ec.smoother_trajectories = value_or<int>(
      config, "smoother_trajectories", ec.smoother_trajectories, "config");
  ec.band_draws = value_or<int>(config, "band_draws", ec.band_draws, "config");
  ec.band_levels = value_or<std::vector<double>>(config, "band_levels",
                                                 ec.band_levels, "config");
  ec.seed = resolve_seed(config, opts, ec.seed);
  ec.threads = opts.threads
                   ? *opts.threads
                   : value_or<int>(config, "threads", 0, "config");
  ec.run_oracle = value_or<bool>(config, "run_oracle", true, "config");
  ec.run_bands = value_or<bool>(config, "run_bands", true, "config");
  ec.dump_losses = value_or<bool>(config, "dump_losses", false, "config");
  ec.multistart = value_or<int>(config, "multistart", ec.multistart, "config");
  ec.norm_kind = norm_kind_from(config, "config");
  ec.scaled_score_exponent =
      value_or<double>(config, "scaled_score_exponent", 1.0, "config");
  ec.curvature = curvature_from(config, "config");
  ec.max_failure_fraction = value_or<double>(
      config, "max_failure_fraction", ec.max_failure_fraction, "config");
  if (config.contains("parameter_overrides")) {
    for (const auto &item : config.at("parameter_overrides").items()) {
      const ModelFamily family = family_from_name(item.key());
      FamilyBinding binding(family);
      ec.parameter_overrides[family] =
          params_from_json(binding, item.value());
    }
  }

  ExperimentReport report = run_experiment(ec);
  report.write_files(opts.out_dir);
  std::cout << "experiment finished; wrote report.json, mse_table.csv";
  if (ec.run_bands) std::cout << ", coverage_table.csv";
  std::cout << ", timing.json under " << opts.out_dir << "\n";
}

void run_command(const std::string &command, const GlobalOptions &opts) {
  Json config = read_json_file(opts.config_path);
  if (command == "simulate") return cmd_simulate(config, opts);
  if (command == "fit") return cmd_fit(config, opts);
  if (command == "filter") return cmd_filter(config, opts);
  if (command == "smooth") return cmd_smooth(config, opts);
  if (command == "bands") return cmd_bands(config, opts);
  if (command == "experiment") return cmd_experiment(config, opts);
  throw InvalidInputError("unknown command: " + command);
}

int exit_code_for_current_exception() {
  try {
    throw;
  } catch (const IoError &) {
    return 3;
  } catch (const InvalidInputError &) {
    return 1;
  } catch (const InvalidParameterError &) {
    return 1;
  } catch (const Error &) {
    return 2;  // numerical/estimation failures
  } catch (const std::exception &) {
    return 2;
  }
}

}  // namespace sdfilter::cli
