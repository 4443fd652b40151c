// Drives the installed command-line binary end to end through std::system.
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include <doctest.h>
#include <json.hpp>

#include "metaglm/glm.hpp"
#include "metaglm/rng.hpp"
#include "metaglm/simulation.hpp"

using nlohmann::json;

namespace {

std::string cli_path() {
  const char* path = std::getenv("METAGLM_CLI");
  REQUIRE_MESSAGE(path != nullptr, "METAGLM_CLI must point at the built binary");
  return path;
}

int run_command(const std::string& args, const std::string& log = "/tmp/metaglm_cli_log.txt") {
  const std::string cmd = cli_path() + " " + args + " >" + log + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// writes a small simulated dataset as CSV and returns its true model fit
struct CliFixture {
  std::string data_path = "/tmp/metaglm_cli_data.csv";
  std::string spec_path = "/tmp/metaglm_cli_spec.json";
  metaglm::Dataset data;
};

CliFixture write_fixture() {
  using namespace metaglm;
  CliFixture f;
  const Scenario scenario = scenario_by_id(ScenarioId::I);
  f.data = generate(scenario, 2024, 0).internal;
  std::ofstream out(f.data_path);
  out << "y,X1,X2,X3,X4,B\n";
  for (Eigen::Index i = 0; i < f.data.n(); ++i) {
    out << f.data.outcome[i];
    for (Eigen::Index j = 0; j < 5; ++j) out << ',' << f.data.covariates(i, j);
    out << '\n';
  }
  return f;
}

void write_spec(const std::string& path, const Eigen::VectorXd& beta) {
  std::ofstream out(path);
  out << "{\n  \"name\": \"nested\",\n  \"link\": \"logit\",\n"
      << "  \"covariates\": [\"X1\", \"X2\"],\n  \"coefficients\": [";
  for (Eigen::Index i = 0; i < beta.size(); ++i) out << (i ? ", " : "") << beta[i];
  out << "]\n}\n";
}

}  // namespace

TEST_CASE("fit with no external models and method mle reproduces the library fit") {
  const CliFixture f = write_fixture();
  const std::string out_path = "/tmp/metaglm_cli_report.json";
  const int code = run_command("fit --data " + f.data_path +
                               " --outcome y --b-cols B --methods mle --seed 11 --out " +
                               out_path);
  REQUIRE(code == 0);
  const json report = json::parse(slurp(out_path));
  const auto est = report["estimates"]["mle"]["estimate"].get<std::vector<double>>();

  const metaglm::GlmFit fit = metaglm::fit_mle(f.data, metaglm::Link::logit);
  REQUIRE(est.size() == 6);
  for (int j = 0; j < 6; ++j) CHECK(est[j] == doctest::Approx(fit.gamma_hat[j]).epsilon(1e-9));
}

TEST_CASE("fit with a nested-MLE external spec: eb matches cml matches mle") {
  using namespace metaglm;
  const CliFixture f = write_fixture();
  // external coefficients = internal fit of y ~ X1 + X2
  Eigen::MatrixXd sub(f.data.n(), 3);
  sub.col(0).setOnes();
  sub.col(1) = f.data.covariates.col(0);
  sub.col(2) = f.data.covariates.col(1);
  const GlmFit nested = fit_mle(sub, f.data.outcome, Link::logit);
  write_spec(f.spec_path, nested.gamma_hat);

  const std::string out_path = "/tmp/metaglm_cli_report2.json";
  const int code = run_command("fit --data " + f.data_path +
                               " --outcome y --b-cols B --external " + f.spec_path +
                               " --methods mle,cml,eb --mc-draws 500 --seed 5 --out " +
                               out_path);
  REQUIRE(code == 0);
  const json report = json::parse(slurp(out_path));
  const auto mle = report["estimates"]["mle"]["estimate"].get<std::vector<double>>();
  const auto cml = report["estimates"]["cml"]["nested"]["estimate"].get<std::vector<double>>();
  const auto eb = report["estimates"]["eb"]["nested"]["estimate"].get<std::vector<double>>();
  for (int j = 0; j < 6; ++j) {
    CHECK(cml[j] == doctest::Approx(mle[j]).epsilon(1e-5));
    CHECK(eb[j] == doctest::Approx(mle[j]).epsilon(1e-5));
  }
  // constrained-efficient standard errors never exceed the mle ones
  const auto se_mle = report["estimates"]["mle"]["se"].get<std::vector<double>>();
  const auto se_cml = report["estimates"]["cml"]["nested"]["se"].get<std::vector<double>>();
  for (int j = 0; j < 6; ++j) CHECK(se_cml[j] <= se_mle[j] + 1e-9);
}

TEST_CASE("fit with all methods reports simplex OCWE weights") {
  using namespace metaglm;
  const CliFixture f = write_fixture();
  write_spec(f.spec_path, (Eigen::VectorXd(3) << -0.8, -0.4, -0.5).finished());
  const std::string spec2 = "/tmp/metaglm_cli_spec2.json";
  {
    std::ofstream out(spec2);
    out << "{\"name\": \"wide\", \"link\": \"logit\", \"covariates\": "
        << "[\"X1\", \"X2\", \"X3\", \"X4\"], "
        << "\"coefficients\": [-0.8, -0.4, -0.4, -0.4, -0.4]}\n";
  }
  const std::string out_path = "/tmp/metaglm_cli_report3.json";
  const int code = run_command("fit --data " + f.data_path +
                               " --outcome y --b-cols B --external " + f.spec_path +
                               " --external " + spec2 +
                               " --mc-draws 400 --seed 5 --out " + out_path);
  REQUIRE(code == 0);
  const json report = json::parse(slurp(out_path));
  const auto w = report["estimates"]["ocwe"]["weights"].get<std::vector<double>>();
  REQUIRE(w.size() == 2);
  CHECK(w[0] + w[1] == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(w[0] >= 0.0);
  CHECK(w[1] >= 0.0);
  CHECK(report["estimates"]["sclearner"].contains("coefficient_weights"));
}

TEST_CASE("repeated fit and simulate commands are byte-identical") {
  const CliFixture f = write_fixture();
  write_spec(f.spec_path, (Eigen::VectorXd(3) << -0.8, -0.4, -0.5).finished());
  const std::string a = "/tmp/metaglm_det_a.json";
  const std::string b = "/tmp/metaglm_det_b.json";
  const std::string base = "fit --data " + f.data_path +
                           " --outcome y --b-cols B --external " + f.spec_path +
                           " --mc-draws 300 --seed 9 --out ";
  REQUIRE(run_command(base + a) == 0);
  REQUIRE(run_command(base + b) == 0);
  CHECK(slurp(a) == slurp(b));

  const std::string sim = "simulate --scenario I --reps 2 --seed 7 --mc-draws 200 --out ";
  REQUIRE(run_command(sim + "/tmp/metaglm_sim_a") == 0);
  REQUIRE(run_command(sim + "/tmp/metaglm_sim_b") == 0);
  CHECK(slurp("/tmp/metaglm_sim_a_summary.csv") == slurp("/tmp/metaglm_sim_b_summary.csv"));
  CHECK(slurp("/tmp/metaglm_sim_a_results.json") == slurp("/tmp/metaglm_sim_b_results.json"));
}

TEST_CASE("configuration problems exit with code 2") {
  CHECK(run_command("fit --data /nonexistent.csv --outcome y --b-cols B --seed 1") == 2);
  CHECK(run_command("simulate --scenario IX --reps 2 --seed 1") == 2);
  const CliFixture f = write_fixture();
  CHECK(run_command("fit --data " + f.data_path +
                    " --outcome nope --b-cols B --seed 1") == 2);
  CHECK(run_command("fit --data " + f.data_path +
                    " --outcome y --b-cols B --methods telepathy --seed 1") == 2);
  // missing required flag is a usage error
  CHECK(run_command("fit --data " + f.data_path + " --outcome y --b-cols B") == 2);
}

TEST_CASE("solver failure exits with code 3 and names the external model") {
  const CliFixture f = write_fixture();
  // a model predicting probability ~1 everywhere is infeasible
  write_spec(f.spec_path, (Eigen::VectorXd(3) << 25.0, 0.0, 0.0).finished());
  const std::string log = "/tmp/metaglm_cli_fail.txt";
  const int code = run_command("fit --data " + f.data_path +
                                   " --outcome y --b-cols B --external " + f.spec_path +
                                   " --mc-draws 200 --seed 3 --out /tmp/unused.json",
                               log);
  CHECK(code == 3);
  CHECK(slurp(log).find("nested") != std::string::npos);
}

TEST_CASE("help exits cleanly") {
  CHECK(run_command("--help") == 0);
  CHECK(run_command("fit --help") == 0);
}
