#include <cmath>

#include <doctest.h>

#include "metaglm/asymptotics.hpp"
#include "metaglm/cspml.hpp"
#include "metaglm/errors.hpp"
#include "metaglm/glm.hpp"
#include "metaglm/rng.hpp"
#include "support/oracles.hpp"

using namespace metaglm;

namespace {

struct Setup {
  Eigen::MatrixXd design;
  Eigen::VectorXd y;
  std::vector<std::vector<Eigen::Index>> positions;
  std::vector<Eigen::VectorXd> betas;
  std::vector<Eigen::MatrixXd> subs;
  GlmFit internal;
};

Setup make_setup(int n, std::uint64_t seed) {
  rng::Substream stream(seed, 555);
  Setup s;
  s.design.resize(n, 4);  // intercept, x1, x2, b
  s.design.col(0).setOnes();
  for (int i = 0; i < n; ++i) {
    const double shared = stream.normal();
    for (int j = 1; j < 4; ++j) {
      s.design(i, j) = std::sqrt(0.7) * stream.normal() + std::sqrt(0.3) * shared;
    }
  }
  Eigen::VectorXd gamma(4);
  gamma << -0.8, -0.5, 0.6, 0.4;
  s.y.resize(n);
  for (int i = 0; i < n; ++i) {
    s.y[i] = stream.uniform() < expit(s.design.row(i).dot(gamma)) ? 1.0 : 0.0;
  }
  s.positions = {{0, 1}, {0, 1, 2}};
  for (const auto& pos : s.positions) s.subs.push_back(subdesign(s.design, pos));
  s.internal = fit_mle(s.design, s.y, Link::logit);
  for (const auto& sub : s.subs) {
    s.betas.push_back(fit_mle(sub, s.y, Link::logit).gamma_hat);
  }
  return s;
}

}  // namespace

TEST_CASE("with no external models the blocks reduce to the information matrix") {
  const Setup s = make_setup(60, 2);
  const AsymptoticBlocks blocks =
      estimate_blocks(s.design, {}, {}, s.internal.gamma_hat, Link::logit, {});
  const ScoreInfo si = score_and_info(s.internal.gamma_hat, s.design, s.y, Link::logit);
  CHECK((blocks.b_hat - si.info).lpNorm<Eigen::Infinity>() < 1e-12);
  CHECK(blocks.c.empty());
}

TEST_CASE("C_k matches the finite-difference Jacobian of the mean conditional score") {
  const Setup s = make_setup(50, 4);
  const AsymptoticBlocks blocks =
      estimate_blocks(s.design, s.subs, s.betas, s.internal.gamma_hat, Link::logit,
                      {Link::logit, Link::logit});
  for (std::size_t k = 0; k < s.subs.size(); ++k) {
    const Eigen::MatrixXd jac = oracles::fd_jacobian(
        [&](const Eigen::VectorXd& g) {
          const Eigen::MatrixXd u = external_score_matrix(g, s.betas[k], s.design, s.subs[k],
                                                          Link::logit, Link::logit);
          return (u.colwise().mean()).transpose().eval();
        },
        s.internal.gamma_hat, 1e-5);
    CHECK((blocks.c[k] - jac).lpNorm<Eigen::Infinity>() < 1e-5);
  }
}

TEST_CASE("joint covariance with a zero-information constraint collapses to B^{-1}/n") {
  const Setup s = make_setup(70, 6);
  AsymptoticBlocks blocks =
      estimate_blocks(s.design, {s.subs[0]}, {s.betas[0]}, s.internal.gamma_hat, Link::logit,
                      {Link::logit});
  blocks.c[0].setZero();  // constraint carrying no information
  const JointAsymptoticCov joint = joint_cov(blocks);
  const Eigen::MatrixXd expected =
      blocks.b_hat.inverse() / static_cast<double>(blocks.n);
  for (int r = 0; r < 2; ++r) {
    for (int c = 0; c < 2; ++c) {
      CHECK((joint.block(r, c) - expected).lpNorm<Eigen::Infinity>() < 1e-10);
    }
  }
}

TEST_CASE("covariance with the unconstrained estimator is stored bit-identically") {
  const Setup s = make_setup(90, 8);
  const AsymptoticBlocks blocks = estimate_blocks(
      s.design, s.subs, s.betas, s.internal.gamma_hat, Link::logit, {Link::logit, Link::logit});
  const JointAsymptoticCov joint = joint_cov(blocks);
  const int K = joint.n_models;
  for (int k = 0; k < K; ++k) {
    CHECK((joint.block(k, k).eval().array() == joint.block(k, K).eval().array()).all());
    CHECK((joint.block(K, k).eval().array() == joint.block(k, k).eval().array()).all());
  }
  // overall symmetry and near-PSD
  CHECK((joint.full - joint.full.transpose()).lpNorm<Eigen::Infinity>() < 1e-14);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(joint.full);
  CHECK(es.eigenvalues().minCoeff() > -1e-8 * joint.full.trace());
}

TEST_CASE("constrained variance never exceeds the unconstrained one (Loewner order)") {
  const Setup s = make_setup(120, 10);
  const AsymptoticBlocks blocks = estimate_blocks(
      s.design, s.subs, s.betas, s.internal.gamma_hat, Link::logit, {Link::logit, Link::logit});
  const JointAsymptoticCov joint = joint_cov(blocks);
  const Eigen::MatrixXd v_internal = joint.var_internal();
  for (int k = 0; k < joint.n_models; ++k) {
    const Eigen::MatrixXd diff = v_internal - joint.block(k, k);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(diff);
    CHECK(es.eigenvalues().minCoeff() > -1e-8);
  }
}

TEST_CASE("eb_point reduces to both inputs when they coincide, and matches the matrix form") {
  oracles::TestRng rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    const int d = 5;
    const Eigen::MatrixXd v = rng.random_pd(d);
    const Eigen::VectorXd gi = rng.normal_vector(d);
    CHECK((eb_point(gi, gi, v) - gi).lpNorm<Eigen::Infinity>() < 1e-14);

    const Eigen::VectorXd gc = rng.normal_vector(d);
    const Eigen::VectorXd eb = eb_point(gi, gc, v);
    // independent matrix-weighted average route
    const Eigen::VectorXd z = gi - gc;
    const Eigen::MatrixXd a = z * z.transpose();
    const Eigen::MatrixXd sum_inv = (v + a).inverse();
    const Eigen::VectorXd matrix_form = a * sum_inv * gi + v * sum_inv * gc;
    CHECK((eb - matrix_form).lpNorm<Eigen::Infinity>() < 1e-12);
  }
}

TEST_CASE("eb_point approaches the unconstrained estimate as the discrepancy grows") {
  oracles::TestRng rng(19);
  const int d = 4;
  const Eigen::MatrixXd v = rng.random_pd(d);
  const Eigen::VectorXd gi = rng.normal_vector(d);
  Eigen::VectorXd gc = gi;
  gc[0] += 1e6;
  const Eigen::VectorXd eb = eb_point(gi, gc, v);
  CHECK((eb - gi).norm() / 1e6 < 1e-6);
}

TEST_CASE("eb shrinkage stays on the segment between the two estimates") {
  oracles::TestRng rng(23);
  for (int trial = 0; trial < 20; ++trial) {
    const int d = 3;
    const Eigen::MatrixXd v = rng.random_pd(d);
    const Eigen::VectorXd gi = rng.normal_vector(d);
    const Eigen::VectorXd gc = rng.normal_vector(d);
    const Eigen::VectorXd eb = eb_point(gi, gc, v);
    const Eigen::VectorXd z = gi - gc;
    const Eigen::VectorXd offset = eb - gc;
    // offset is parallel to z with a multiplier in [0, 1)
    const double scale = offset.norm() / z.norm();
    CHECK(scale >= 0.0);
    CHECK(scale < 1.0);
    CHECK(std::abs(offset.dot(z)) / (offset.norm() * z.norm()) ==
          doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("eb_covariance: degenerate joint with cml == internal gives Var(EB) = Var(CML)") {
  oracles::TestRng rng(29);
  const int d = 3;
  const Eigen::MatrixXd v = rng.random_pd(d);
  JointAsymptoticCov joint;
  joint.n_models = 1;
  joint.dim = d;
  joint.full.resize(2 * d, 2 * d);
  // identical blocks everywhere: the cml draw equals the internal draw
  for (int r = 0; r < 2; ++r) {
    for (int c = 0; c < 2; ++c) joint.full.block(r * d, c * d, d, d) = v;
  }
  const Eigen::VectorXd point = rng.normal_vector(d);
  const EbCovariance cov = eb_covariance(joint, {point}, point, 4000, 99);
  CHECK((cov.var[0] - v).lpNorm<Eigen::Infinity>() < 0.15 * v.lpNorm<Eigen::Infinity>());
  CHECK_FALSE(cov.z_large[0]);
}

TEST_CASE("per-draw substreams do not depend on evaluation order") {
  // draw 7 generated alone equals draw 7 generated after draws 0..6
  rng::Substream alone(99, 0x45424d43ULL, 7);
  const Eigen::VectorXd direct = alone.normals(8);
  for (std::uint64_t j = 0; j < 7; ++j) {
    rng::Substream other(99, 0x45424d43ULL, j);
    (void)other.normals(8);
  }
  rng::Substream again(99, 0x45424d43ULL, 7);
  const Eigen::VectorXd replay = again.normals(8);
  CHECK((direct.array() == replay.array()).all());
}

TEST_CASE("eb_covariance determinism") {
  const Setup s = make_setup(100, 31);
  const AsymptoticBlocks blocks = estimate_blocks(
      s.design, s.subs, s.betas, s.internal.gamma_hat, Link::logit, {Link::logit, Link::logit});
  const JointAsymptoticCov joint = joint_cov(blocks);
  std::vector<Eigen::VectorXd> cml_points;
  for (std::size_t k = 0; k < s.subs.size(); ++k) {
    cml_points.push_back(fit_cml(s.design, s.y, s.positions[k], s.betas[k], Link::logit,
                                 Link::logit, s.internal)
                             .gamma_cml);
  }
  const EbCovariance a = eb_covariance(joint, cml_points, s.internal.gamma_hat, 500, 1234);
  const EbCovariance b = eb_covariance(joint, cml_points, s.internal.gamma_hat, 500, 1234);
  for (std::size_t k = 0; k < a.var.size(); ++k) {
    CHECK((a.var[k].array() == b.var[k].array()).all());
  }
  CHECK((a.cross[0][1].array() == b.cross[0][1].array()).all());

  // different seed changes the draws
  const EbCovariance c = eb_covariance(joint, cml_points, s.internal.gamma_hat, 500, 1235);
  CHECK((a.var[0] - c.var[0]).lpNorm<Eigen::Infinity>() > 0.0);

  // too few draws is a configuration error
  CHECK_THROWS_AS(eb_covariance(joint, cml_points, s.internal.gamma_hat, 50, 1), ConfigError);
}

TEST_CASE("draws of Z and the constrained estimator are uncorrelated") {
  const Setup s = make_setup(100, 37);
  const AsymptoticBlocks blocks = estimate_blocks(
      s.design, s.subs, s.betas, s.internal.gamma_hat, Link::logit, {Link::logit, Link::logit});
  const JointAsymptoticCov joint = joint_cov(blocks);

  // regenerate the stacked draws the way eb_covariance does and test the
  // implied Cov(Z_k, cml_k) directly: it equals Cov(cml, I) - Var(cml) = 0
  const rng::MvnSampler sampler(joint.full);
  const int draws = 4000;
  const Eigen::Index d = joint.dim;
  Eigen::MatrixXd z_draws(draws, d), cml_draws(draws, d);
  for (int j = 0; j < draws; ++j) {
    rng::Substream stream(4242, 0x45424d43ULL, static_cast<std::uint64_t>(j));
    const Eigen::VectorXd stacked = sampler.sample(stream);
    cml_draws.row(j) = stacked.segment(0, d).transpose();
    z_draws.row(j) = (stacked.segment(2 * d, d) - stacked.segment(0, d)).transpose();
  }
  const Eigen::RowVectorXd zc = z_draws.colwise().mean();
  const Eigen::RowVectorXd cc = cml_draws.colwise().mean();
  const Eigen::MatrixXd cross = ((z_draws.rowwise() - zc).transpose() *
                                 (cml_draws.rowwise() - cc)) /
                                static_cast<double>(draws - 1);
  // scale for the MC standard error of a covariance entry
  const double sd_z = std::sqrt(z_draws.array().square().sum() / (draws * d));
  const double sd_c = std::sqrt((cml_draws.rowwise() - cc).array().square().sum() / (draws * d));
  const double mc_se = 3.0 * sd_z * sd_c / std::sqrt(static_cast<double>(draws));
  CHECK(cross.lpNorm<Eigen::Infinity>() < mc_se);
}
