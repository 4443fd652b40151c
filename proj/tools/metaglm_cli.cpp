// Command-line front end: `metaglm fit` integrates external model summaries
// into a GLM fit on individual-level data; `metaglm simulate` runs the
// replication study harness.
//
// Exit codes: 0 success, 2 usage or configuration error, 3 numerical
// failure.  All randomness is controlled by --seed; outputs are
// byte-reproducible for a fixed command line.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "metaglm/errors.hpp"
#include "metaglm/metrics.hpp"
#include "metaglm/pipeline.hpp"
#include "metaglm/simulation.hpp"

namespace {

using nlohmann::json;

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<double> to_vec(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

json estimate_entry(const std::vector<std::string>& names, const Eigen::VectorXd& estimate,
                    const Eigen::VectorXd& se) {
  json entry;
  entry["coefficients"] = names;
  entry["estimate"] = to_vec(estimate);
  entry["se"] = to_vec(se);
  return entry;
}

struct FitArgs {
  std::string data_path;
  std::string outcome_name;
  std::string b_cols;
  std::vector<std::string> external_paths;
  std::string methods = "mle,cml,eb,ivw,ocwe,sclearner";
  int mc_draws = 5000;
  std::uint64_t seed = 0;
  std::string validation_path;
  std::string out_path;
  std::string link = "logit";
};

int run_fit(const FitArgs& args) {
  using namespace metaglm;

  PipelineOptions options;
  options.link = parse_link(args.link);
  options.mc_draws = args.mc_draws;
  options.seed = args.seed;
  options.methods.clear();
  for (const auto& name : split_list(args.methods)) options.methods.insert(parse_method(name));
  if (options.methods.empty()) throw ConfigError("--methods: at least one method is required");

  const Dataset data = load_dataset_csv(args.data_path, args.outcome_name,
                                        split_list(args.b_cols));

  std::vector<ExternalModelSpec> specs;
  for (const auto& path : args.external_paths) {
    specs.push_back(recenter_external(load_external_spec(path)));
  }

  const PipelineResult result = run_pipeline(data, specs, options);
  const auto& names = result.coefficient_names;

  std::optional<Dataset> validation;
  std::optional<Eigen::MatrixXd> validation_design;
  if (!args.validation_path.empty()) {
    validation = load_dataset_csv(args.validation_path, args.outcome_name,
                                  split_list(args.b_cols));
    validation_design = build_design(*validation);
  }

  auto metrics_entry = [&](const Eigen::VectorXd& estimate,
                           const Eigen::MatrixXd& cov) -> json {
    json entry;
    entry["avg_pred_var"] = avg_prediction_variance(cov, *validation_design);
    entry["scaled_brier"] =
        scaled_brier(estimate, *validation_design, validation->outcome, options.link);
    return entry;
  };

  json report;
  report["command"] = "fit";
  report["data"] = args.data_path;
  report["link"] = args.link;
  report["n"] = data.n();
  report["seed"] = args.seed;
  report["mc_draws"] = args.mc_draws;

  if (options.methods.count(Method::mle)) {
    json entry = estimate_entry(names, result.internal.gamma_hat,
                                result.internal.cov.diagonal().cwiseSqrt());
    entry["loglik"] = result.internal.loglik;
    entry["converged"] = result.internal.converged;
    report["estimates"]["mle"] = entry;
    if (validation) report["metrics"]["mle"] = metrics_entry(result.internal.gamma_hat,
                                                             result.internal.cov);
  }
  for (std::size_t k = 0; k < result.cml.size(); ++k) {
    const auto& model = result.model_names[k];
    if (options.methods.count(Method::cml)) {
      json entry = estimate_entry(names, result.cml[k].gamma_cml,
                                  result.cml_cov[k].diagonal().cwiseMax(0.0).cwiseSqrt());
      entry["constraint_norm"] = result.cml[k].constraint_norm;
      entry["outer_iterations"] = result.cml[k].outer_iterations;
      report["estimates"]["cml"][model] = entry;
      if (validation) {
        report["metrics"]["cml"][model] = metrics_entry(result.cml[k].gamma_cml,
                                                        result.cml_cov[k]);
      }
    }
    if (options.methods.count(Method::eb) && result.eb_cov) {
      json entry = estimate_entry(names, result.eb[k],
                                  result.eb_cov->var[k].diagonal().cwiseMax(0.0).cwiseSqrt());
      entry["z_large"] = static_cast<bool>(result.eb_cov->z_large[k]);
      report["estimates"]["eb"][model] = entry;
      if (validation) {
        report["metrics"]["eb"][model] = metrics_entry(result.eb[k], result.eb_cov->var[k]);
      }
    }
  }

  auto combiner_entry = [&](const metaglm::CombinationResult& combo) {
    json entry = estimate_entry(names, combo.gamma_final, combo.se_final);
    if (combo.method == CombinerMethod::sclearner) {
      std::vector<std::vector<double>> per_model;
      for (Eigen::Index k = 0; k < combo.coefficient_weights.rows(); ++k) {
        const Eigen::VectorXd row = combo.coefficient_weights.row(k);
        per_model.push_back(to_vec(row));
      }
      entry["coefficient_weights"] = per_model;
    } else {
      entry["weights"] = to_vec(combo.weights);
      entry["objective"] = combo.objective;
    }
    return entry;
  };
  if (result.ivw) {
    report["estimates"]["ivw"] = combiner_entry(*result.ivw);
    if (validation) {
      report["metrics"]["ivw"] = metrics_entry(result.ivw->gamma_final, result.ivw->cov_final);
    }
  }
  if (result.ocwe) {
    report["estimates"]["ocwe"] = combiner_entry(*result.ocwe);
    if (validation) {
      report["metrics"]["ocwe"] = metrics_entry(result.ocwe->gamma_final,
                                                result.ocwe->cov_final);
    }
  }
  if (result.sclearner) {
    report["estimates"]["sclearner"] = combiner_entry(*result.sclearner);
    if (validation) {
      report["metrics"]["sclearner"] =
          metrics_entry(result.sclearner->gamma_final, result.sclearner->cov_final);
    }
  }
  if (result.eb_cov) {
    report["diagnostics"]["z_large"] = std::vector<bool>(result.eb_cov->z_large.begin(),
                                                         result.eb_cov->z_large.end());
    report["diagnostics"]["covariance_repair_warning"] = result.eb_cov->repair_warning;
  }
  report["external_models"] = result.model_names;

  const std::string text = report.dump(2) + "\n";
  if (args.out_path.empty() || args.out_path == "-") {
    std::cout << text;
  } else {
    std::ofstream out(args.out_path);
    if (!out) throw metaglm::ConfigError("cannot write report '" + args.out_path + "'");
    out << text;
    std::cout << "report written to " << args.out_path << "\n";
  }
  return 0;
}

struct SimulateArgs {
  std::string scenario = "I";
  int reps = 500;
  std::uint64_t seed = 0;
  int mc_draws = 5000;
  std::string out_prefix = "metaglm_sim";
};

int run_simulate(const SimulateArgs& args) {
  using namespace metaglm;
  const Scenario scenario = scenario_by_id(parse_scenario(args.scenario));
  const ReplicationSummary summary = run_scenario(scenario, args.reps, args.seed, args.mc_draws);

  const std::string csv_path = args.out_prefix + "_summary.csv";
  const std::string json_path = args.out_prefix + "_results.json";
  write_summary_csv(summary, csv_path);
  write_summary_json(summary, json_path);

  std::cout << summary_headline(summary);
  std::cout << "summary table written to " << csv_path << "\n";
  std::cout << "results written to " << json_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"integration of external regression model summaries into an internal GLM"};
  app.require_subcommand(1);

  FitArgs fit_args;
  CLI::App* fit = app.add_subcommand("fit", "fit on individual-level data with external models");
  fit->add_option("--data", fit_args.data_path, "CSV with header row")->required();
  fit->add_option("--outcome", fit_args.outcome_name, "outcome column name")->required();
  fit->add_option("--b-cols", fit_args.b_cols,
                  "comma-separated internal-only covariate columns")->required();
  fit->add_option("--external", fit_args.external_paths,
                  "external model spec JSON (repeatable)");
  fit->add_option("--methods", fit_args.methods, "subset of mle,cml,eb,ivw,ocwe,sclearner");
  fit->add_option("--mc-draws", fit_args.mc_draws, "Monte Carlo draws for the EB covariance");
  fit->add_option("--seed", fit_args.seed, "random seed")->required();
  fit->add_option("--validation", fit_args.validation_path, "validation CSV for metrics");
  fit->add_option("--out", fit_args.out_path, "report path ('-' for stdout)");
  fit->add_option("--link", fit_args.link, "logit or identity");

  SimulateArgs sim_args;
  CLI::App* simulate = app.add_subcommand("simulate", "run a replication study scenario");
  simulate->add_option("--scenario", sim_args.scenario, "scenario id I..VI")->required();
  simulate->add_option("--reps", sim_args.reps, "number of replicates");
  simulate->add_option("--seed", sim_args.seed, "random seed")->required();
  simulate->add_option("--mc-draws", sim_args.mc_draws, "Monte Carlo draws per replicate");
  simulate->add_option("--out", sim_args.out_prefix, "output file prefix");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (fit->parsed()) return run_fit(fit_args);
    if (simulate->parsed()) return run_simulate(sim_args);
  } catch (const metaglm::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const metaglm::NumericError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
