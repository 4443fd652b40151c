#include <cmath>

#include <doctest.h>

#include "metaglm/cspml.hpp"
#include "metaglm/errors.hpp"
#include "metaglm/glm.hpp"
#include "metaglm/rng.hpp"
#include "support/oracles.hpp"

using namespace metaglm;

namespace {

struct SmallProblem {
  Eigen::MatrixXd design;  // intercept, x, b
  Eigen::VectorXd y;
  std::vector<Eigen::Index> positions{0, 1};  // external model on x
};

SmallProblem small_problem(int n, std::uint64_t seed) {
  rng::Substream stream(seed, 1234);
  SmallProblem prob;
  prob.design.resize(n, 3);
  prob.design.col(0).setOnes();
  for (int i = 0; i < n; ++i) {
    const double shared = stream.normal();
    prob.design(i, 1) = std::sqrt(0.7) * stream.normal() + std::sqrt(0.3) * shared;
    prob.design(i, 2) = std::sqrt(0.7) * stream.normal() + std::sqrt(0.3) * shared;
  }
  Eigen::VectorXd gamma(3);
  gamma << -0.5, 0.8, -0.6;
  prob.y.resize(n);
  for (int i = 0; i < n; ++i) {
    prob.y[i] = stream.uniform() < expit(prob.design.row(i).dot(gamma)) ? 1.0 : 0.0;
  }
  return prob;
}

}  // namespace

TEST_CASE("conditional score vanishes when the two means match") {
  Eigen::VectorXd full_row(3), sub_row(2), gamma(3), beta(2);
  full_row << 1.0, 0.4, -0.2;
  sub_row << 1.0, 0.4;
  gamma << 0.3, -0.5, 0.0;
  // choose beta so the sub-model mean equals the full-model mean at this row
  const double eta = full_row.dot(gamma);
  beta << eta - 0.4, 1.0;
  const Eigen::VectorXd u =
      conditional_external_score(gamma, beta, full_row, sub_row, Link::logit, Link::logit);
  CHECK(u.lpNorm<Eigen::Infinity>() < 1e-14);
}

TEST_CASE("logit conditional score matches the two-term exact sum over the outcome") {
  oracles::TestRng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::VectorXd full_row(4);
    full_row << 1.0, rng.normal(), rng.normal(), rng.normal();
    Eigen::VectorXd sub_row(2);
    sub_row << 1.0, full_row[1];
    const Eigen::VectorXd gamma = rng.normal_vector(4);
    const Eigen::VectorXd beta = rng.normal_vector(2);

    // E_Y[ U_beta(Y|x_k) ] under the full model: a two-point mixture
    const double p1 = 1.0 / (1.0 + std::exp(-full_row.dot(gamma)));
    const double mu_beta = 1.0 / (1.0 + std::exp(-sub_row.dot(beta)));
    const Eigen::VectorXd exact =
        p1 * (sub_row * (1.0 - mu_beta)) + (1.0 - p1) * (sub_row * (0.0 - mu_beta));

    const Eigen::VectorXd u =
        conditional_external_score(gamma, beta, full_row, sub_row, Link::logit, Link::logit);
    CHECK((u - exact).lpNorm<Eigen::Infinity>() < 1e-10);
  }
}

TEST_CASE("identity conditional score matches Gauss-Legendre quadrature of the integral") {
  oracles::TestRng rng(32);
  for (int trial = 0; trial < 10; ++trial) {
    Eigen::VectorXd full_row(3);
    full_row << 1.0, rng.normal(), rng.normal();
    Eigen::VectorXd sub_row(2);
    sub_row << 1.0, full_row[1];
    const Eigen::VectorXd gamma = rng.normal_vector(3);
    const Eigen::VectorXd beta = rng.normal_vector(2);

    // integral of sub_row (y - sub'beta) phi(y; full'gamma, 1) dy
    const double mean = full_row.dot(gamma);
    const oracles::Quadrature quad = oracles::gauss_legendre(64, mean - 9.0, mean + 9.0);
    Eigen::VectorXd integral = Eigen::VectorXd::Zero(2);
    for (int i = 0; i < quad.nodes.size(); ++i) {
      const double yv = quad.nodes[i];
      const double density =
          std::exp(-0.5 * (yv - mean) * (yv - mean)) / std::sqrt(2.0 * M_PI);
      integral += quad.weights[i] * density * (sub_row * (yv - sub_row.dot(beta)));
    }
    const Eigen::VectorXd u = conditional_external_score(gamma, beta, full_row, sub_row,
                                                         Link::identity, Link::identity);
    CHECK((u - integral).lpNorm<Eigen::Infinity>() < 1e-10);
  }
}

TEST_CASE("mixed link pairings are rejected") {
  Eigen::VectorXd full_row(2), sub_row(1), gamma(2), beta(1);
  full_row << 1.0, 0.5;
  sub_row << 1.0;
  gamma.setZero();
  beta.setZero();
  CHECK_THROWS_AS(
      conditional_external_score(gamma, beta, full_row, sub_row, Link::identity, Link::logit),
      ConfigError);
}

TEST_CASE("mean conditional score is zero at the MLE when beta is the nested internal fit") {
  const SmallProblem prob = small_problem(150, 5);
  const GlmFit internal = fit_mle(prob.design, prob.y, Link::logit);
  const Eigen::MatrixXd sub = subdesign(prob.design, prob.positions);
  const GlmFit nested = fit_mle(sub, prob.y, Link::logit);
  const Eigen::MatrixXd u = external_score_matrix(internal.gamma_hat, nested.gamma_hat,
                                                  prob.design, sub, Link::logit, Link::logit);
  const Eigen::VectorXd mean_u = u.colwise().mean();
  CHECK(mean_u.norm() < 1e-6);
}

TEST_CASE("degenerate external model: constrained fit equals the MLE, weights uniform") {
  const SmallProblem prob = small_problem(120, 8);
  const GlmFit internal = fit_mle(prob.design, prob.y, Link::logit);
  const Eigen::MatrixXd sub = subdesign(prob.design, prob.positions);
  const GlmFit nested = fit_mle(sub, prob.y, Link::logit);

  const CmlFit fit = fit_cml(prob.design, prob.y, prob.positions, nested.gamma_hat,
                             Link::logit, Link::logit, internal);
  CHECK(fit.converged);
  CHECK((fit.gamma_cml - internal.gamma_hat).lpNorm<Eigen::Infinity>() < 1e-6);
  CHECK((fit.p_weights.array() - 1.0 / prob.design.rows()).abs().maxCoeff() < 1e-6);
}

TEST_CASE("empirical weights satisfy the constraint and normalization") {
  const SmallProblem prob = small_problem(80, 13);
  const GlmFit internal = fit_mle(prob.design, prob.y, Link::logit);
  // external coefficients deliberately off the nested fit
  Eigen::VectorXd beta(2);
  beta << -0.9, 1.1;
  const CmlFit fit = fit_cml(prob.design, prob.y, prob.positions, beta, Link::logit,
                             Link::logit, internal);
  CHECK(fit.converged);
  CHECK(fit.constraint_norm < 1e-6);
  CHECK(std::abs(fit.p_weights.sum() - 1.0) < 1e-10);
  CHECK(fit.p_weights.minCoeff() > 0.0);

  // weighted constraint recomputed from scratch
  const Eigen::MatrixXd sub = subdesign(prob.design, prob.positions);
  const Eigen::MatrixXd u = external_score_matrix(fit.gamma_cml, beta, prob.design, sub,
                                                  Link::logit, Link::logit);
  CHECK((u.transpose() * fit.p_weights).norm() < 1e-6);
}

TEST_CASE("constrained fit matches the joint augmented-Lagrangian oracle") {
  const SmallProblem prob = small_problem(30, 21);
  const GlmFit internal = fit_mle(prob.design, prob.y, Link::logit);
  Eigen::VectorXd beta(2);
  beta << -0.2, 0.5;
  const CmlFit fit = fit_cml(prob.design, prob.y, prob.positions, beta, Link::logit,
                             Link::logit, internal);
  const Eigen::MatrixXd sub = subdesign(prob.design, prob.positions);
  const oracles::BruteForceResult oracle =
      oracles::brute_force_cml(prob.design, prob.y, sub, beta, internal.gamma_hat);
  REQUIRE(oracle.converged);
  CHECK((fit.gamma_cml - oracle.gamma).lpNorm<Eigen::Infinity>() < 1e-4);
}

TEST_CASE("infeasible constraint reports a numerical failure") {
  const SmallProblem prob = small_problem(40, 3);
  const GlmFit internal = fit_mle(prob.design, prob.y, Link::logit);
  // an external model predicting probability ~1 everywhere cannot be
  // reconciled by reweighting
  Eigen::VectorXd beta(2);
  beta << 25.0, 0.0;
  CHECK_THROWS_AS(fit_cml(prob.design, prob.y, prob.positions, beta, Link::logit, Link::logit,
                          internal),
                  NumericError);
}

TEST_CASE("constraint dimension must stay below the sample size") {
  const SmallProblem prob = small_problem(30, 2);
  const GlmFit internal = fit_mle(prob.design, prob.y, Link::logit);
  Eigen::MatrixXd design2(2, 3);
  design2 << prob.design.topRows(2);
  Eigen::VectorXd y2 = prob.y.head(2);
  Eigen::VectorXd beta(2);
  beta << 0.0, 0.0;
  CHECK_THROWS_AS(fit_cml(design2, y2, prob.positions, beta, Link::logit, Link::logit, internal),
                  ConfigError);
}

TEST_CASE("profile objective trace is non-decreasing") {
  const SmallProblem prob = small_problem(90, 17);
  const GlmFit internal = fit_mle(prob.design, prob.y, Link::logit);
  Eigen::VectorXd beta(2);
  beta << -0.7, 0.9;
  const CmlFit fit = fit_cml(prob.design, prob.y, prob.positions, beta, Link::logit,
                             Link::logit, internal);
  for (std::size_t i = 1; i < fit.objective_trace.size(); ++i) {
    CHECK(fit.objective_trace[i] >= fit.objective_trace[i - 1] - 1e-9);
  }
}
