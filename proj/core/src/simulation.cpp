#include "metaglm/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "metaglm/errors.hpp"
#include "metaglm/metrics.hpp"
#include "metaglm/pipeline.hpp"
#include "metaglm/rng.hpp"

namespace metaglm {

namespace {

constexpr double kZ975 = 1.959963984540054;

// stream ids for the per-replicate draws
constexpr std::uint64_t kInternalStream = 0x494e5400ULL;    // "INT"
constexpr std::uint64_t kValidationStream = 0x56414c00ULL;  // "VAL"
constexpr std::uint64_t kMcSaltStream = 0x4d435300ULL;      // "MCS"

// scenario-keyed seeds for the frozen external training draws
std::uint64_t scenario_salt(ScenarioId id) {
  return rng::derive(0x6d657461676c6dULL, static_cast<std::uint64_t>(id));
}

Eigen::VectorXd gamma_for(ScenarioId, double intercept, double slope_x, int p, double slope_b,
                          int q) {
  Eigen::VectorXd g(1 + p + q);
  g[0] = intercept;
  for (int j = 0; j < p; ++j) g[1 + j] = slope_x;
  for (int j = 0; j < q; ++j) g[1 + p + j] = slope_b;
  return g;
}

// equicorrelated standard normal covariates: sqrt(1-rho) z_j + sqrt(rho) z0
Eigen::MatrixXd draw_covariates(int rows, int cols, double corr, rng::Substream& stream) {
  const double shared = std::sqrt(corr);
  const double own = std::sqrt(1.0 - corr);
  Eigen::MatrixXd x(rows, cols);
  for (int i = 0; i < rows; ++i) {
    const double z0 = stream.normal();
    for (int j = 0; j < cols; ++j) x(i, j) = own * stream.normal() + shared * z0;
  }
  return x;
}

Eigen::VectorXd draw_outcome(const Eigen::MatrixXd& covariates, const Eigen::VectorXd& gamma,
                             rng::Substream& stream) {
  const int rows = static_cast<int>(covariates.rows());
  Eigen::VectorXd y(rows);
  for (int i = 0; i < rows; ++i) {
    const double eta = gamma[0] + covariates.row(i).dot(gamma.tail(gamma.size() - 1));
    y[i] = stream.uniform() < expit(eta) ? 1.0 : 0.0;
  }
  return y;
}

std::vector<std::string> x_labels(int p) {
  std::vector<std::string> out;
  for (int j = 1; j <= p; ++j) out.push_back("X" + std::to_string(j));
  return out;
}

std::vector<std::string> b_labels(int q) {
  if (q == 1) return {"B"};
  std::vector<std::string> out;
  for (int j = 1; j <= q; ++j) out.push_back("B" + std::to_string(j));
  return out;
}

Dataset make_sim_dataset(const Eigen::MatrixXd& covariates, const Eigen::VectorXd& y, int p,
                         int q) {
  Dataset data;
  data.outcome = y;
  data.covariates = covariates;
  data.x_names = x_labels(p);
  data.b_names = b_labels(q);
  data.names = data.x_names;
  data.names.insert(data.names.end(), data.b_names.begin(), data.b_names.end());
  return data;
}

std::string format_double(double value) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", value);
  return buf;
}

struct ReplicateData {
  Dataset internal;
  Dataset validation;
  Eigen::VectorXd validation_true_prob;
};

ReplicateData draw_replicate(const Scenario& scenario, std::uint64_t seed,
                             std::uint64_t counter) {
  ReplicateData rep;
  {
    rng::Substream stream(seed, kInternalStream, counter);
    const Eigen::MatrixXd cov =
        draw_covariates(scenario.n_internal, scenario.p + scenario.q, scenario.corr, stream);
    const Eigen::VectorXd y = draw_outcome(cov, scenario.true_gamma, stream);
    rep.internal = make_sim_dataset(cov, y, scenario.p, scenario.q);
  }
  {
    rng::Substream stream(seed, kValidationStream, counter);
    const Eigen::MatrixXd cov =
        draw_covariates(scenario.n_validation, scenario.p + scenario.q, scenario.corr, stream);
    const Eigen::VectorXd y = draw_outcome(cov, scenario.true_gamma, stream);
    rep.validation = make_sim_dataset(cov, y, scenario.p, scenario.q);
    rep.validation_true_prob.resize(scenario.n_validation);
    for (int i = 0; i < scenario.n_validation; ++i) {
      rep.validation_true_prob[i] =
          expit(scenario.true_gamma[0] +
                cov.row(i).dot(scenario.true_gamma.tail(scenario.p + scenario.q)));
    }
  }
  return rep;
}

}  // namespace

ScenarioId parse_scenario(const std::string& name) {
  std::string upper = name;
  std::transform(upper.begin(), upper.end(), upper.begin(), ::toupper);
  if (upper == "I" || upper == "1") return ScenarioId::I;
  if (upper == "II" || upper == "2") return ScenarioId::II;
  if (upper == "III" || upper == "3") return ScenarioId::III;
  if (upper == "IV" || upper == "4") return ScenarioId::IV;
  if (upper == "V" || upper == "5") return ScenarioId::V;
  if (upper == "VI" || upper == "6") return ScenarioId::VI;
  throw ConfigError("unknown scenario '" + name + "' (expected I..VI)");
}

std::string scenario_name(ScenarioId id) {
  switch (id) {
    case ScenarioId::I: return "I";
    case ScenarioId::II: return "II";
    case ScenarioId::III: return "III";
    case ScenarioId::IV: return "IV";
    case ScenarioId::V: return "V";
    case ScenarioId::VI: return "VI";
  }
  return "?";
}

Scenario scenario_by_id(ScenarioId id) {
  Scenario s;
  s.id = id;
  switch (id) {
    case ScenarioId::I:
    case ScenarioId::II:
    case ScenarioId::III:
    case ScenarioId::IV:
      s.p = 4;
      s.q = 1;
      s.n_internal = 200;
      s.true_gamma = gamma_for(id, -1.0, -0.5, 4, 0.5, 1);
      s.external_x = {{0, 1}, {0, 2}, {0, 1, 2, 3}};
      s.m_external = {30000, 30000, 30000};
      break;
    case ScenarioId::V:
      s.p = 9;
      s.q = 1;
      s.n_internal = 500;
      s.true_gamma = gamma_for(id, -1.0, -0.5, 9, 0.5, 1);
      s.external_x = {{0, 1}, {0, 1, 2, 3, 4, 5, 6}, {0, 1, 2, 3, 6, 7}};
      s.m_external = {30000, 30000, 30000};
      break;
    case ScenarioId::VI:
      s.p = 3;
      s.q = 5;
      s.n_internal = 500;
      s.true_gamma = gamma_for(id, -1.0, -0.5, 3, 0.5, 5);
      s.external_x = {{0, 1}, {0, 2}, {0, 1, 2}};
      s.m_external = {30000, 30000, 30000};
      break;
  }
  const auto n_models = s.external_x.size();
  s.ext_b_shift.assign(n_models, 0.0);
  s.ext_outcome_gamma.assign(n_models, Eigen::VectorXd());
  s.ext_stream_salt.assign(n_models, 0);

  switch (id) {
    case ScenarioId::II:
      // external model 1 is fitted once on a small sample; the draw is part
      // of the scenario definition (stream salt frozen after calibration)
      s.m_external[0] = 500;
      s.ext_stream_salt[0] = 7;
      break;
    case ScenarioId::III:
      // external model 1's population shifts the conditional mean of B
      // (+0.5) plus a further marginal shift; total frozen after one
      // calibration pass
      s.ext_b_shift[0] = 1.55;
      s.calibrated = true;
      break;
    case ScenarioId::IV:
      // external model 3's population follows a different outcome model
      // (magnitudes frozen after one calibration pass)
      s.ext_outcome_gamma[2] = gamma_for(id, 0.75, 0.29, 4, 0.5, 1);
      s.calibrated = true;
      break;
    default:
      break;
  }
  return s;
}

std::vector<ExternalModelSpec> fit_external_models(const Scenario& scenario) {
  const std::uint64_t salt = scenario_salt(scenario.id);
  const auto x_names = x_labels(scenario.p);
  std::vector<ExternalModelSpec> specs;
  for (std::size_t k = 0; k < scenario.external_x.size(); ++k) {
    rng::Substream stream(salt, 0x45585400ULL + k, scenario.ext_stream_salt[k]);
    const int m = scenario.m_external[k];
    Eigen::MatrixXd covariates =
        draw_covariates(m, scenario.p + scenario.q, scenario.corr, stream);
    covariates.rightCols(scenario.q).array() += scenario.ext_b_shift[k];
    const Eigen::VectorXd& gamma = scenario.ext_outcome_gamma[k].size() > 0
                                       ? scenario.ext_outcome_gamma[k]
                                       : scenario.true_gamma;
    const Eigen::VectorXd y = draw_outcome(covariates, gamma, stream);

    const auto& cols = scenario.external_x[k];
    Eigen::MatrixXd design(m, static_cast<Eigen::Index>(cols.size()) + 1);
    design.col(0).setOnes();
    for (std::size_t j = 0; j < cols.size(); ++j) {
      design.col(static_cast<Eigen::Index>(j) + 1) = covariates.col(cols[j]);
    }
    const GlmFit fit = fit_mle(design, y, Link::logit);

    ExternalModelSpec spec;
    spec.name = "external_" + std::to_string(k + 1);
    spec.link = Link::logit;
    for (const int c : cols) spec.covariates.push_back(x_names[static_cast<std::size_t>(c)]);
    spec.coefficients = fit.gamma_hat;
    specs.push_back(std::move(spec));
  }
  return specs;
}

GeneratedReplicate generate(const Scenario& scenario, std::uint64_t seed, int replicate_index) {
  GeneratedReplicate rep;
  rep.specs = fit_external_models(scenario);
  ReplicateData data =
      draw_replicate(scenario, seed, static_cast<std::uint64_t>(replicate_index));
  rep.internal = std::move(data.internal);
  rep.validation = std::move(data.validation);
  rep.validation_true_prob = std::move(data.validation_true_prob);
  return rep;
}

const EstimatorSummary& ReplicationSummary::estimator(const std::string& name) const {
  for (const auto& est : estimators) {
    if (est.name == name) return est;
  }
  throw ConfigError("no estimator '" + name + "' in summary");
}

ReplicationSummary run_scenario(const Scenario& scenario, int reps, std::uint64_t seed,
                                int mc_draws) {
  if (reps < 1) throw ConfigError("run_scenario: reps must be >= 1");

  const auto n_models = static_cast<int>(scenario.external_x.size());
  const Eigen::Index d = scenario.true_gamma.size();

  std::vector<std::string> estimator_names;
  estimator_names.emplace_back("direct");
  for (int k = 1; k <= n_models; ++k) estimator_names.push_back("cml_" + std::to_string(k));
  for (int k = 1; k <= n_models; ++k) estimator_names.push_back("eb_" + std::to_string(k));
  estimator_names.emplace_back("ivw");
  estimator_names.emplace_back("ocwe");
  estimator_names.emplace_back("sclearner");
  const auto n_estimators = estimator_names.size();

  std::vector<std::vector<Eigen::VectorXd>> estimates(n_estimators);
  std::vector<std::vector<Eigen::VectorXd>> ses(n_estimators);
  std::vector<Eigen::VectorXd> metric_sums(n_estimators, Eigen::VectorXd::Zero(3));
  Eigen::VectorXd ivw_weight_sum = Eigen::VectorXd::Zero(n_models);
  Eigen::VectorXd ocwe_weight_sum = Eigen::VectorXd::Zero(n_models);
  std::vector<double> z_large_counts(static_cast<std::size_t>(n_models), 0.0);

  const std::vector<ExternalModelSpec> specs = fit_external_models(scenario);

  PipelineOptions options;
  options.mc_draws = mc_draws;
  options.link = Link::logit;

  ReplicationSummary summary;
  summary.scenario = scenario.id;
  summary.model_names.reserve(static_cast<std::size_t>(n_models));
  for (const auto& spec : specs) summary.model_names.push_back(spec.name);
  summary.reps_requested = reps;
  summary.mc_draws = mc_draws;
  summary.seed = seed;
  summary.calibrated = scenario.calibrated;

  for (int rep = 0; rep < reps; ++rep) {
    const auto counter = static_cast<std::uint64_t>(rep);
    const ReplicateData data = draw_replicate(scenario, seed, counter);
    const Dataset& internal = data.internal;
    const Dataset& validation = data.validation;
    const Eigen::VectorXd& true_prob = data.validation_true_prob;

    options.seed = rng::derive(seed, kMcSaltStream, counter);
    PipelineResult result;
    try {
      result = run_pipeline(internal, specs, options);
    } catch (const NumericError&) {
      ++summary.failures;
      continue;
    }
    if (summary.coefficient_names.empty()) {
      summary.coefficient_names = result.coefficient_names;
    }

    const Eigen::MatrixXd validation_design = build_design(validation);

    std::vector<Eigen::VectorXd> point(n_estimators);
    std::vector<Eigen::VectorXd> se(n_estimators);
    std::vector<const Eigen::MatrixXd*> cov_of(n_estimators, nullptr);

    std::size_t idx = 0;
    point[idx] = result.internal.gamma_hat;
    se[idx] = result.internal.cov.diagonal().cwiseSqrt();
    cov_of[idx] = &result.internal.cov;
    ++idx;
    for (int k = 0; k < n_models; ++k, ++idx) {
      point[idx] = result.cml[static_cast<std::size_t>(k)].gamma_cml;
      se[idx] = result.cml_cov[static_cast<std::size_t>(k)].diagonal().cwiseMax(0.0).cwiseSqrt();
      cov_of[idx] = &result.cml_cov[static_cast<std::size_t>(k)];
    }
    for (int k = 0; k < n_models; ++k, ++idx) {
      point[idx] = result.eb[static_cast<std::size_t>(k)];
      se[idx] = result.eb_cov->var[static_cast<std::size_t>(k)].diagonal().cwiseMax(0.0).cwiseSqrt();
      cov_of[idx] = &result.eb_cov->var[static_cast<std::size_t>(k)];
    }
    point[idx] = result.ivw->gamma_final;
    se[idx] = result.ivw->se_final;
    cov_of[idx] = &result.ivw->cov_final;
    ++idx;
    point[idx] = result.ocwe->gamma_final;
    se[idx] = result.ocwe->se_final;
    cov_of[idx] = &result.ocwe->cov_final;
    ++idx;
    point[idx] = result.sclearner->gamma_final;
    se[idx] = result.sclearner->se_final;
    cov_of[idx] = &result.sclearner->cov_final;

    for (std::size_t e = 0; e < n_estimators; ++e) {
      estimates[e].push_back(point[e]);
      ses[e].push_back(se[e]);
      Eigen::VectorXd metric(3);
      metric[0] = avg_prediction_variance(*cov_of[e], validation_design);
      metric[1] = sse(point[e], validation_design, true_prob, Link::logit);
      metric[2] = scaled_brier(point[e], validation_design, validation.outcome, Link::logit);
      metric_sums[e] += metric;
    }
    ivw_weight_sum += result.ivw->weights;
    ocwe_weight_sum += result.ocwe->weights;
    for (int k = 0; k < n_models; ++k) {
      if (result.eb_cov->z_large[static_cast<std::size_t>(k)]) {
        z_large_counts[static_cast<std::size_t>(k)] += 1.0;
      }
    }
  }

  summary.reps_completed = reps - summary.failures;
  if (summary.reps_completed == 0) {
    throw NumericError("run_scenario: every replicate failed");
  }
  const double n_done = static_cast<double>(summary.reps_completed);

  for (std::size_t e = 0; e < n_estimators; ++e) {
    EstimatorSummary est;
    est.name = estimator_names[e];
    est.bias.setZero(d);
    est.sd.setZero(d);
    est.ese.setZero(d);
    est.coverage.setZero(d);

    Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
    for (const auto& v : estimates[e]) mean += v;
    mean /= n_done;
    est.bias = mean - scenario.true_gamma;

    Eigen::VectorXd ss = Eigen::VectorXd::Zero(d);
    for (const auto& v : estimates[e]) ss += (v - mean).cwiseAbs2();
    est.sd = summary.reps_completed > 1
                 ? (ss / (n_done - 1.0)).cwiseSqrt().eval()
                 : Eigen::VectorXd::Zero(d).eval();

    for (std::size_t r = 0; r < estimates[e].size(); ++r) {
      est.ese += ses[e][r];
      for (Eigen::Index j = 0; j < d; ++j) {
        if (std::abs(estimates[e][r][j] - scenario.true_gamma[j]) <= kZ975 * ses[e][r][j]) {
          est.coverage[j] += 1.0;
        }
      }
    }
    est.ese /= n_done;
    est.coverage /= n_done;

    est.mean_avg_pred_var = metric_sums[e][0] / n_done;
    est.mean_sse = metric_sums[e][1] / n_done;
    est.mean_scaled_brier = metric_sums[e][2] / n_done;
    summary.estimators.push_back(std::move(est));
  }
  summary.mean_ivw_weights = ivw_weight_sum / n_done;
  summary.mean_ocwe_weights = ocwe_weight_sum / n_done;
  for (const double c : z_large_counts) summary.z_large_rate.push_back(c / n_done);
  return summary;
}

std::string summary_csv(const ReplicationSummary& summary) {
  std::ostringstream out;
  out << "scenario,estimator,coefficient,bias,sd,ese,coverage\n";
  for (const auto& est : summary.estimators) {
    for (std::size_t j = 0; j < summary.coefficient_names.size(); ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      out << scenario_name(summary.scenario) << ',' << est.name << ','
          << summary.coefficient_names[j] << ',' << format_double(est.bias[jj]) << ','
          << format_double(est.sd[jj]) << ',' << format_double(est.ese[jj]) << ','
          << format_double(est.coverage[jj]) << '\n';
    }
  }
  return out.str();
}

void write_summary_csv(const ReplicationSummary& summary, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write summary table '" + path + "'");
  out << summary_csv(summary);
}

std::string summary_json(const ReplicationSummary& summary) {
  nlohmann::json doc;
  doc["scenario"] = scenario_name(summary.scenario);
  doc["reps_requested"] = summary.reps_requested;
  doc["reps_completed"] = summary.reps_completed;
  doc["failures"] = summary.failures;
  doc["mc_draws"] = summary.mc_draws;
  doc["seed"] = summary.seed;
  doc["calibrated_scenario"] = summary.calibrated;
  doc["coefficients"] = summary.coefficient_names;
  doc["external_models"] = summary.model_names;

  auto to_vec = [](const Eigen::VectorXd& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
  };
  doc["weights"]["ivw"] = to_vec(summary.mean_ivw_weights);
  doc["weights"]["ocwe"] = to_vec(summary.mean_ocwe_weights);
  doc["z_large_rate"] = summary.z_large_rate;

  for (const auto& est : summary.estimators) {
    nlohmann::json m;
    m["avg_pred_var"] = est.mean_avg_pred_var;
    m["sse"] = est.mean_sse;
    m["scaled_brier"] = est.mean_scaled_brier;
    doc["metrics"][est.name] = m;
  }
  return doc.dump(2) + "\n";
}

void write_summary_json(const ReplicationSummary& summary, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write results file '" + path + "'");
  out << summary_json(summary);
}

std::string summary_headline(const ReplicationSummary& summary) {
  std::ostringstream out;
  out << "scenario " << scenario_name(summary.scenario) << ": " << summary.reps_completed << "/"
      << summary.reps_requested << " replicates";
  if (summary.calibrated) out << " [calibrated scenario]";
  out << "\n";
  char buf[160];
  for (const auto& est : summary.estimators) {
    std::snprintf(buf, sizeof(buf),
                  "  %-10s bias[0]=% .3f sd[0]=%.3f ese[0]=%.3f cover[0]=%.0f%%  pred_var=%.4f",
                  est.name.c_str(), est.bias[0], est.sd[0], est.ese[0],
                  100.0 * est.coverage[0], est.mean_avg_pred_var);
    out << buf << "\n";
  }
  std::ostringstream w;
  w << "  mean weights  ivw=(";
  for (Eigen::Index k = 0; k < summary.mean_ivw_weights.size(); ++k) {
    std::snprintf(buf, sizeof(buf), "%s%.3f", k ? ", " : "", summary.mean_ivw_weights[k]);
    w << buf;
  }
  w << ")  ocwe=(";
  for (Eigen::Index k = 0; k < summary.mean_ocwe_weights.size(); ++k) {
    std::snprintf(buf, sizeof(buf), "%s%.3f", k ? ", " : "", summary.mean_ocwe_weights[k]);
    w << buf;
  }
  w << ")";
  out << w.str() << "\n";
  return out.str();
}

}  // namespace metaglm
