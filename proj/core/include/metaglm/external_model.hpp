#pragma once

#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "metaglm/dataset.hpp"
#include "metaglm/link.hpp"

namespace metaglm {

// Unit change recorded for one covariate of a published model: the model's
// own covariate equals scale * (value in internal units) - offset.
struct RecenterEntry {
  double offset = 0.0;
  double scale = 1.0;
};

// A published regression model: link, covariate subset (never includes the
// internal-only b columns), coefficient vector with the intercept first,
// and optional recentering metadata for covariates whose published units
// differ from the internal data's units.
struct ExternalModelSpec {
  std::string name;
  Link link = Link::logit;
  std::vector<std::string> covariates;
  Eigen::VectorXd coefficients;
  std::map<std::string, RecenterEntry> recenter;
};

// Structural checks: coefficient length = |covariates| + 1, no duplicate
// covariates, recenter keys subset of covariates, nonzero scales.
void validate_spec(const ExternalModelSpec& spec);

// Folds the recenter map into the intercept and slopes so the returned
// spec takes inputs in internal units directly: slope' = slope * scale and
// the intercept absorbs slope * (-offset).  The linear predictor is
// unchanged at every point; the recenter map of the result is empty.
ExternalModelSpec recenter_external(const ExternalModelSpec& spec);

// Linear predictor of the model at named covariate values given in internal
// units, applying any pending recenter entries.
double linear_predictor(const ExternalModelSpec& spec,
                        const std::map<std::string, double>& values);

// Positions of model k's intercept and covariates inside the full design
// (intercept, x columns, b columns).  Entry 0 is always 0.
struct IndexMap {
  std::vector<std::vector<Eigen::Index>> positions;
};

// Maps every spec's covariates onto design columns.  Reports all unknown
// covariate names at once; the mapping of each spec is independent of the
// order in which specs are listed.
IndexMap map_indices(const std::vector<ExternalModelSpec>& specs, const Dataset& data);

// Sub-design for model k: the design columns selected by positions.
Eigen::MatrixXd subdesign(const Eigen::MatrixXd& design,
                          const std::vector<Eigen::Index>& positions);

// JSON I/O for the one-model-per-file spec format (fields: name, link,
// covariates, coefficients, optional recenter).
ExternalModelSpec load_external_spec(const std::string& path);
std::string external_spec_to_json(const ExternalModelSpec& spec);

}  // namespace metaglm
