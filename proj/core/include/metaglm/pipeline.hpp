#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "metaglm/asymptotics.hpp"
#include "metaglm/combiners.hpp"
#include "metaglm/cspml.hpp"
#include "metaglm/dataset.hpp"
#include "metaglm/external_model.hpp"
#include "metaglm/glm.hpp"

namespace metaglm {

enum class Method { mle, cml, eb, ivw, ocwe, sclearner };

Method parse_method(const std::string& name);
std::string method_name(Method method);

struct PipelineOptions {
  std::set<Method> methods = {Method::mle, Method::cml, Method::eb,
                              Method::ivw, Method::ocwe, Method::sclearner};
  int mc_draws = 5000;
  std::uint64_t seed = 0;
  Link link = Link::logit;
  CmlOptions cml;
};

// Everything the two-step flow produces for one dataset: the unconstrained
// fit, one constrained fit and shrinkage estimate per external model, the
// joint covariance machinery, and the requested combiners.
struct PipelineResult {
  GlmFit internal;
  std::vector<std::string> coefficient_names;
  std::vector<std::string> model_names;
  std::vector<std::vector<Eigen::Index>> positions;

  std::vector<CmlFit> cml;
  std::vector<Eigen::MatrixXd> cml_cov;   // Var(gamma_cml_k) from the joint matrix
  std::optional<JointAsymptoticCov> joint;

  std::vector<Eigen::VectorXd> eb;
  std::optional<EbCovariance> eb_cov;

  std::optional<CombinationResult> ivw;
  std::optional<CombinationResult> ocwe;
  std::optional<CombinationResult> sclearner;
};

// Runs step 1 (one constrained fit and one shrinkage estimate per external
// model) and the requested step-2 combiners.  Specs must already be
// recentered.  With an empty spec list the result degenerates to the
// unconstrained fit.
PipelineResult run_pipeline(const Dataset& data, const std::vector<ExternalModelSpec>& specs,
                            const PipelineOptions& options);

}  // namespace metaglm
