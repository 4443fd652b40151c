#include "metaglm/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "metaglm/errors.hpp"

namespace metaglm {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) {
    // trim surrounding whitespace and a trailing \r from CRLF files
    const auto begin = field.find_first_not_of(" \t\r");
    const auto end = field.find_last_not_of(" \t\r");
    fields.push_back(begin == std::string::npos ? "" : field.substr(begin, end - begin + 1));
  }
  if (!line.empty() && line.back() == ',') fields.push_back("");
  return fields;
}

double parse_number(const std::string& text, const std::string& where) {
  double value = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) {
    throw ConfigError("could not parse numeric value '" + text + "' in " + where);
  }
  return value;
}

}  // namespace

void validate_dataset(const Dataset& data) {
  const Eigen::Index n = data.n();
  const auto r = static_cast<Eigen::Index>(data.names.size());
  if (data.covariates.rows() != n || data.covariates.cols() != r) {
    throw ConfigError("dataset: covariate matrix shape does not match outcome/names");
  }
  if (data.b_names.empty()) {
    throw ConfigError("dataset: at least one internal-only covariate (b column) is required");
  }
  if (static_cast<Eigen::Index>(data.x_names.size() + data.b_names.size()) != r) {
    throw ConfigError("dataset: x_names and b_names must partition the covariate names");
  }
  std::set<std::string> seen;
  for (const auto& nm : data.names) {
    if (!seen.insert(nm).second) {
      throw ConfigError("dataset: duplicate covariate name '" + nm + "'");
    }
  }
  for (const auto& nm : data.x_names) {
    if (seen.count(nm) != 1) throw ConfigError("dataset: x name '" + nm + "' not among columns");
  }
  for (const auto& nm : data.b_names) {
    if (seen.count(nm) != 1) throw ConfigError("dataset: b name '" + nm + "' not among columns");
  }
  {
    std::set<std::string> xb(data.x_names.begin(), data.x_names.end());
    for (const auto& nm : data.b_names) {
      if (!xb.insert(nm).second) {
        throw ConfigError("dataset: name '" + nm + "' listed as both x and b");
      }
    }
  }
  if (n < r + 1) {
    throw ConfigError("dataset: need n >= p + q + 1 rows (got n=" + std::to_string(n) +
                      ", p+q=" + std::to_string(r) + ")");
  }
}

Eigen::MatrixXd build_design(const Dataset& data) {
  validate_dataset(data);
  const Eigen::Index n = data.n();
  const Eigen::Index d = data.p() + data.q() + 1;
  Eigen::MatrixXd design(n, d);
  design.col(0).setOnes();

  auto column_of = [&](const std::string& name) {
    const auto it = std::find(data.names.begin(), data.names.end(), name);
    return static_cast<Eigen::Index>(it - data.names.begin());
  };

  Eigen::Index j = 1;
  for (const auto& nm : data.x_names) design.col(j++) = data.covariates.col(column_of(nm));
  for (const auto& nm : data.b_names) design.col(j++) = data.covariates.col(column_of(nm));

  if (!design.allFinite()) {
    throw ConfigError("dataset: covariates contain non-finite entries");
  }
  if (!data.outcome.allFinite()) {
    throw ConfigError("dataset: outcome contains non-finite entries");
  }
  return design;
}

std::vector<std::string> design_column_names(const Dataset& data) {
  std::vector<std::string> cols;
  cols.reserve(data.names.size() + 1);
  cols.emplace_back("(Intercept)");
  cols.insert(cols.end(), data.x_names.begin(), data.x_names.end());
  cols.insert(cols.end(), data.b_names.begin(), data.b_names.end());
  return cols;
}

Dataset load_dataset_csv(const std::string& path, const std::string& outcome_name,
                         const std::vector<std::string>& b_names) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open data file '" + path + "'");

  std::string line;
  if (!std::getline(in, line)) throw ConfigError("data file '" + path + "' is empty");
  const std::vector<std::string> header = split_csv_line(line);

  const auto outcome_it = std::find(header.begin(), header.end(), outcome_name);
  if (outcome_it == header.end()) {
    throw ConfigError("outcome column '" + outcome_name + "' not found in '" + path + "'");
  }
  const auto outcome_col = static_cast<std::size_t>(outcome_it - header.begin());

  std::vector<std::vector<double>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      throw ConfigError("row " + std::to_string(line_no) + " of '" + path + "' has " +
                        std::to_string(fields.size()) + " fields, expected " +
                        std::to_string(header.size()));
    }
    std::vector<double> row(fields.size());
    for (std::size_t j = 0; j < fields.size(); ++j) {
      row[j] = parse_number(fields[j], "'" + path + "' row " + std::to_string(line_no));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ConfigError("data file '" + path + "' has no data rows");

  Dataset data;
  data.b_names = b_names;
  const std::set<std::string> b_set(b_names.begin(), b_names.end());
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (j == outcome_col) continue;
    data.names.push_back(header[j]);
    if (!b_set.count(header[j])) data.x_names.push_back(header[j]);
  }
  for (const auto& nm : b_names) {
    if (std::find(data.names.begin(), data.names.end(), nm) == data.names.end()) {
      throw ConfigError("b column '" + nm + "' not found in '" + path + "'");
    }
  }

  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto r = static_cast<Eigen::Index>(data.names.size());
  data.outcome.resize(n);
  data.covariates.resize(n, r);
  for (Eigen::Index i = 0; i < n; ++i) {
    data.outcome[i] = rows[static_cast<std::size_t>(i)][outcome_col];
    Eigen::Index c = 0;
    for (std::size_t j = 0; j < header.size(); ++j) {
      if (j == outcome_col) continue;
      data.covariates(i, c++) = rows[static_cast<std::size_t>(i)][j];
    }
  }
  validate_dataset(data);
  return data;
}

}  // namespace metaglm
