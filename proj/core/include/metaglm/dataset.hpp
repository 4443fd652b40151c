#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace metaglm {

// Individual-level data for the target model.  `covariates` columns follow
// `names`; `x_names` are the standard covariates shared with external
// models, `b_names` the covariates observed only internally (q >= 1).
// Instances are treated as immutable after construction.
struct Dataset {
  Eigen::VectorXd outcome;
  Eigen::MatrixXd covariates;
  std::vector<std::string> names;
  std::vector<std::string> x_names;
  std::vector<std::string> b_names;

  Eigen::Index n() const { return outcome.size(); }
  Eigen::Index p() const { return static_cast<Eigen::Index>(x_names.size()); }
  Eigen::Index q() const { return static_cast<Eigen::Index>(b_names.size()); }
};

// Throws ConfigError when the structural invariants fail: n >= p+q+1,
// names partition into x_names and b_names with no duplicates, shapes agree.
void validate_dataset(const Dataset& data);

// n x (p+q+1) design: leading intercept column, then x_names columns in
// order, then b_names columns in order.  Throws on duplicate names or
// non-finite entries.
Eigen::MatrixXd build_design(const Dataset& data);

// Labels matching build_design columns: "(Intercept)", x names, b names.
std::vector<std::string> design_column_names(const Dataset& data);

// Reads comma-separated text with a header row ('.' decimal point, no
// quoting).  `outcome_name` selects the response column; `b_names` the
// internal-only covariates; every other column becomes a standard covariate.
Dataset load_dataset_csv(const std::string& path, const std::string& outcome_name,
                         const std::vector<std::string>& b_names);

}  // namespace metaglm
