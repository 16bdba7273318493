#ifndef SDFILTER_IO_HPP_
#define SDFILTER_IO_HPP_

#include <string>
#include <vector>

// Single-header nlohmann/json lives in vendor/.
#include "json.hpp"

#include "sdfilter/estimation.hpp"
#include "sdfilter/numerics.hpp"

namespace sdfilter {

using Json = nlohmann::ordered_json;

// Formats a double with 17 significant digits (round-trip safe).
std::string format_double(double x);

struct CsvTable {
  std::vector<std::string> header;
  Mat data;

  Eigen::Index column(const std::string &name) const;
};

// UTF-8, header row, '.' decimal separator.
void write_csv(const std::string &path, const std::vector<std::string> &header,
               const Mat &data);
CsvTable read_csv(const std::string &path);

void write_text_file(const std::string &path, const std::string &content);
std::string read_text_file(const std::string &path);

void write_json_file(const std::string &path, const Json &j);
Json read_json_file(const std::string &path);

Json fit_result_to_json(const FitResult &fit);
FitResult fit_result_from_json(const Json &j);

}  // namespace sdfilter

#endif  // SDFILTER_IO_HPP_
