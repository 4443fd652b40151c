#include "metaglm/pipeline.hpp"

#include "metaglm/errors.hpp"

namespace metaglm {

Method parse_method(const std::string& name) {
  if (name == "mle") return Method::mle;
  if (name == "cml") return Method::cml;
  if (name == "eb") return Method::eb;
  if (name == "ivw") return Method::ivw;
  if (name == "ocwe") return Method::ocwe;
  if (name == "sclearner") return Method::sclearner;
  throw ConfigError("unknown method '" + name +
                    "' (expected mle, cml, eb, ivw, ocwe or sclearner)");
}

std::string method_name(Method method) {
  switch (method) {
    case Method::mle: return "mle";
    case Method::cml: return "cml";
    case Method::eb: return "eb";
    case Method::ivw: return "ivw";
    case Method::ocwe: return "ocwe";
    case Method::sclearner: return "sclearner";
  }
  return "?";
}

PipelineResult run_pipeline(const Dataset& data, const std::vector<ExternalModelSpec>& specs,
                            const PipelineOptions& options) {
  if (options.methods.empty()) throw ConfigError("run_pipeline: no methods requested");
  for (const auto& spec : specs) {
    if (!spec.recenter.empty()) {
      throw ConfigError("run_pipeline: spec '" + spec.name +
                        "' still carries recenter metadata; apply recenter_external first");
    }
    if (spec.link != options.link) {
      throw ConfigError("run_pipeline: external model '" + spec.name + "' uses link " +
                        link_name(spec.link) + " but the target model uses " +
                        link_name(options.link));
    }
  }

  const bool want_combiner = options.methods.count(Method::ivw) ||
                             options.methods.count(Method::ocwe) ||
                             options.methods.count(Method::sclearner);
  const bool want_eb = want_combiner || options.methods.count(Method::eb);
  const bool want_cml = want_eb || options.methods.count(Method::cml);

  PipelineResult result;
  result.coefficient_names = design_column_names(data);
  result.internal = fit_mle(data, options.link);

  if (specs.empty() || !want_cml) return result;

  const Eigen::MatrixXd design = build_design(data);
  const IndexMap index_map = map_indices(specs, data);
  result.positions = index_map.positions;

  std::vector<Eigen::MatrixXd> subs;
  std::vector<Eigen::VectorXd> betas;
  std::vector<Link> links;
  for (std::size_t k = 0; k < specs.size(); ++k) {
    result.model_names.push_back(specs[k].name);
    subs.push_back(subdesign(design, index_map.positions[k]));
    betas.push_back(specs[k].coefficients);
    links.push_back(specs[k].link);
  }

  for (std::size_t k = 0; k < specs.size(); ++k) {
    try {
      result.cml.push_back(fit_cml(design, data.outcome, index_map.positions[k], betas[k],
                                   options.link, links[k], result.internal, options.cml));
    } catch (const NumericError& e) {
      throw NumericError(std::string(e.what()) + " [external model '" + specs[k].name + "']");
    }
  }

  // blocks share one evaluation point: the unconstrained MLE
  const AsymptoticBlocks blocks = estimate_blocks(design, subs, betas,
                                                  result.internal.gamma_hat, options.link, links);
  result.joint = joint_cov(blocks);
  for (std::size_t k = 0; k < specs.size(); ++k) {
    result.cml_cov.emplace_back(result.joint->block(static_cast<int>(k), static_cast<int>(k)));
  }

  if (!want_eb) return result;

  std::vector<Eigen::VectorXd> gamma_cml;
  for (const auto& fit : result.cml) gamma_cml.push_back(fit.gamma_cml);
  const Eigen::MatrixXd v_internal = result.internal.cov;
  for (std::size_t k = 0; k < specs.size(); ++k) {
    result.eb.push_back(eb_point(result.internal.gamma_hat, gamma_cml[k], v_internal));
  }
  result.eb_cov = eb_covariance(*result.joint, gamma_cml, result.internal.gamma_hat,
                                options.mc_draws, options.seed);

  if (!want_combiner) return result;

  if (options.methods.count(Method::ivw)) {
    result.ivw = combine_ivw(result.eb, *result.eb_cov, design);
  }
  if (options.methods.count(Method::ocwe)) {
    result.ocwe = combine_ocwe(result.eb, *result.eb_cov, design);
  }
  if (options.methods.count(Method::sclearner)) {
    result.sclearner = combine_sclearner(result.eb, *result.eb_cov, index_map.positions,
                                         result.internal);
  }
  return result;
}

}  // namespace metaglm
