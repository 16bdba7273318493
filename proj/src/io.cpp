#include "sdfilter/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "sdfilter/errors.hpp"

namespace sdfilter {

namespace {

Transform transform_from_name(const std::string &name) {
  if (name == "identity") return Transform::Identity;
  if (name == "log") return Transform::Log;
  if (name == "logit11") return Transform::Logit11;
  if (name == "log_nu_minus_2") return Transform::LogNuMinus2;
  throw IoError("unknown transform name: " + name);
}

std::string transform_name(Transform t) {
  switch (t) {
    case Transform::Identity: return "identity";
    case Transform::Log: return "log";
    case Transform::Logit11: return "logit11";
    case Transform::LogNuMinus2: return "log_nu_minus_2";
  }
  throw IoError("unknown transform");
}

}  // namespace

std::string format_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

Eigen::Index CsvTable::column(const std::string &name) const {
  for (size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return static_cast<Eigen::Index>(i);
  throw IoError("CSV column not found: " + name);
}

void write_csv(const std::string &path, const std::vector<std::string> &header,
               const Mat &data) {
  if (static_cast<Eigen::Index>(header.size()) != data.cols())
    throw InvalidInputError("CSV header width does not match data");
  std::ostringstream os;
  for (size_t i = 0; i < header.size(); ++i) {
    if (i) os << ',';
    os << header[i];
  }
  os << '\n';
  for (Eigen::Index r = 0; r < data.rows(); ++r) {
    for (Eigen::Index c = 0; c < data.cols(); ++c) {
      if (c) os << ',';
      os << format_double(data(r, c));
    }
    os << '\n';
  }
  write_text_file(path, os.str());
}

CsvTable read_csv(const std::string &path) {
  std::string content = read_text_file(path);
  std::istringstream is(content);
  std::string line;
  if (!std::getline(is, line)) throw IoError("empty CSV file: " + path);

  CsvTable table;
  {
    std::istringstream hs(line);
    std::string cell;
    while (std::getline(hs, cell, ',')) table.header.push_back(cell);
  }
  if (table.header.empty()) throw IoError("CSV header missing: " + path);

  std::vector<double> values;
  Eigen::Index rows = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    Eigen::Index cols = 0;
    while (std::getline(ls, cell, ',')) {
      try {
        size_t pos = 0;
        values.push_back(std::stod(cell, &pos));
        if (pos != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception &) {
        throw IoError("CSV cell is not a number: '" + cell + "' in " + path);
      }
      ++cols;
    }
    if (cols != static_cast<Eigen::Index>(table.header.size()))
      throw IoError("CSV row width mismatch in " + path);
    ++rows;
  }
  table.data.resize(rows, static_cast<Eigen::Index>(table.header.size()));
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < table.data.cols(); ++c)
      table.data(r, c) = values[static_cast<size_t>(r * table.data.cols() + c)];
  return table;
}

void write_text_file(const std::string &path, const std::string &content) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path);
  os << content;
  if (!os) throw IoError("write failed: " + path);
}

std::string read_text_file(const std::string &path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open for reading: " + path);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

void write_json_file(const std::string &path, const Json &j) {
  write_text_file(path, j.dump(2) + "\n");
}

Json read_json_file(const std::string &path) {
  try {
    return Json::parse(read_text_file(path));
  } catch (const nlohmann::json::parse_error &e) {
    throw IoError("JSON parse error in " + path + ": " + e.what());
  }
}

Json fit_result_to_json(const FitResult &fit) {
  Json j;
  j["family"] = family_name(fit.family);
  j["normalization"] =
      fit.norm_kind == NormalizationScheme::Kind::KalmanConsistent
          ? "kalman_consistent"
          : "scaled_score";
  j["scaled_score_exponent"] = fit.scaled_score_exponent;
  j["curvature"] = fit.curvature == CurvatureKind::Hessian ? "hessian"
                                                           : "squared_score";
  j["loglik"] = fit.loglik;

  Json params = Json::array();
  const auto k = fit.params.size();
  for (Eigen::Index i = 0; i < k; ++i) {
    Json p;
    p["name"] = fit.params.defs()[i].name;
    p["transform"] = transform_name(fit.params.defs()[i].transform);
    p["estimate"] = fit.params.values()(i);
    if (fit.covariance.rows() == k)
      p["std_error"] = std::sqrt(std::max(fit.covariance(i, i), 0.0));
    params.push_back(p);
  }
  j["parameters"] = params;

  Json cov = Json::array();
  for (Eigen::Index r = 0; r < fit.covariance.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < fit.covariance.cols(); ++c)
      row.push_back(fit.covariance(r, c));
    cov.push_back(row);
  }
  j["covariance"] = cov;
  j["covariance_projected"] = fit.covariance_projected;

  Json starts = Json::array();
  for (const auto &s : fit.starts) {
    Json d;
    d["start"] = s.start_index;
    d["converged"] = s.converged;
    d["loglik"] = s.loglik;
    d["iterations"] = s.iterations;
    d["gradient_norm"] = s.gradient_norm;
    d["method"] = s.method;
    if (!s.note.empty()) d["note"] = s.note;
    starts.push_back(d);
  }
  j["starts"] = starts;
  j["best_start"] = fit.best_start;
  j["warnings"] = fit.warnings;
  return j;
}

FitResult fit_result_from_json(const Json &j) {
  FitResult fit;
  try {
    fit.family = family_from_name(j.at("family").get<std::string>());
    const std::string norm = j.at("normalization").get<std::string>();
    if (norm == "kalman_consistent")
      fit.norm_kind = NormalizationScheme::Kind::KalmanConsistent;
    else if (norm == "scaled_score")
      fit.norm_kind = NormalizationScheme::Kind::ScaledScore;
    else
      throw IoError("unknown normalization: " + norm);
    fit.scaled_score_exponent = j.value("scaled_score_exponent", 1.0);
    const std::string curv = j.value("curvature", std::string("hessian"));
    fit.curvature = curv == "squared_score" ? CurvatureKind::SquaredScore
                                            : CurvatureKind::Hessian;
    fit.loglik = j.at("loglik").get<double>();

    std::vector<ParamDef> defs;
    const auto &params = j.at("parameters");
    Vec values(static_cast<Eigen::Index>(params.size()));
    Eigen::Index i = 0;
    for (const auto &p : params) {
      defs.push_back({p.at("name").get<std::string>(),
                      transform_from_name(p.at("transform").get<std::string>())});
      values(i++) = p.at("estimate").get<double>();
    }
    fit.params = ParameterVector(defs, values);

    const auto &cov = j.at("covariance");
    const auto k = static_cast<Eigen::Index>(cov.size());
    fit.covariance.resize(k, k);
    for (Eigen::Index r = 0; r < k; ++r)
      for (Eigen::Index c = 0; c < k; ++c)
        fit.covariance(r, c) = cov.at(r).at(c).get<double>();
    fit.covariance_projected = j.value("covariance_projected", false);
    fit.best_start = j.value("best_start", -1);
  } catch (const nlohmann::json::exception &e) {
    throw IoError(std::string("malformed fit result JSON: ") + e.what());
  }
  return fit;
}

}  // namespace sdfilter
