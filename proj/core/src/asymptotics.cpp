#include "metaglm/asymptotics.hpp"

#include <cmath>
#include <string>

#include "metaglm/cspml.hpp"
#include "metaglm/errors.hpp"
#include "metaglm/rng.hpp"

namespace metaglm {

namespace {

// stream id for the covariance Monte Carlo; draw index is the counter
constexpr std::uint64_t kEbMcStream = 0x45424d43ULL;  // "EBMC"

Eigen::MatrixXd solve_spd(const Eigen::MatrixXd& a, const Eigen::MatrixXd& rhs,
                          const std::string& what) {
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
    throw NumericError(what + " is singular or indefinite");
  }
  return ldlt.solve(rhs);
}

}  // namespace

AsymptoticBlocks estimate_blocks(const Eigen::MatrixXd& design,
                                 const std::vector<Eigen::MatrixXd>& subs,
                                 const std::vector<Eigen::VectorXd>& betas,
                                 const Eigen::VectorXd& gamma, Link internal_link,
                                 const std::vector<Link>& external_links) {
  if (subs.size() != betas.size() || subs.size() != external_links.size()) {
    throw ConfigError("estimate_blocks: per-model argument sizes disagree");
  }
  const Eigen::Index n = design.rows();
  const double inv_n = 1.0 / static_cast<double>(n);
  const std::size_t n_models = subs.size();

  Eigen::VectorXd w(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    w[i] = mean_derivative(design.row(i).dot(gamma), internal_link);
  }

  AsymptoticBlocks blocks;
  blocks.n = n;
  blocks.b_hat = design.transpose() * w.asDiagonal() * design * inv_n;

  std::vector<Eigen::MatrixXd> u_mats(n_models);
  blocks.c.resize(n_models);
  for (std::size_t k = 0; k < n_models; ++k) {
    // C_k: analytic derivative of the mean conditional score in gamma
    blocks.c[k] = subs[k].transpose() * w.asDiagonal() * design * inv_n;
    u_mats[k] = external_score_matrix(gamma, betas[k], design, subs[k], internal_link,
                                      external_links[k]);
  }
  blocks.l.resize(n_models);
  for (std::size_t j = 0; j < n_models; ++j) {
    blocks.l[j].resize(n_models);
    for (std::size_t k = 0; k < n_models; ++k) {
      blocks.l[j][k] = u_mats[j].transpose() * u_mats[k] * inv_n;
    }
  }
  for (std::size_t k = 0; k < n_models; ++k) {
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(blocks.l[k][k]);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
      throw NumericError("estimate_blocks: L_kk for model " + std::to_string(k + 1) +
                         " is singular");
    }
  }
  return blocks;
}

JointAsymptoticCov joint_cov(const AsymptoticBlocks& blocks) {
  const auto n_models = static_cast<int>(blocks.c.size());
  const Eigen::Index d = blocks.b_hat.rows();
  const double n = static_cast<double>(blocks.n);

  JointAsymptoticCov joint;
  joint.n_models = n_models;
  joint.dim = d;
  joint.full.setZero((n_models + 1) * d, (n_models + 1) * d);

  // per-model variance: (B + C_k' L_kk^{-1} C_k)^{-1} / n, symmetrized
  std::vector<Eigen::MatrixXd> var(n_models);
  for (int k = 0; k < n_models; ++k) {
    const Eigen::MatrixXd gain =
        blocks.c[k].transpose() *
        solve_spd(blocks.l[k][k], blocks.c[k], "joint_cov: L_kk");
    const Eigen::MatrixXd precision = blocks.b_hat + gain;
    Eigen::MatrixXd v = solve_spd(precision, Eigen::MatrixXd::Identity(d, d),
                                  "joint_cov: B + C'L^{-1}C") /
                        n;
    var[k] = 0.5 * (v + v.transpose());
  }
  Eigen::MatrixXd v_internal =
      solve_spd(blocks.b_hat, Eigen::MatrixXd::Identity(d, d), "joint_cov: B") / n;
  v_internal = 0.5 * (v_internal + v_internal.transpose()).eval();

  for (int j = 0; j < n_models; ++j) {
    joint.full.block(j * d, j * d, d, d) = var[j];
    // covariance with the unconstrained estimator equals the variance block
    joint.full.block(j * d, n_models * d, d, d) = var[j];
    joint.full.block(n_models * d, j * d, d, d) = var[j];
    for (int k = j + 1; k < n_models; ++k) {
      const Eigen::MatrixXd inner =
          blocks.b_hat +
          blocks.c[j].transpose() *
              solve_spd(blocks.l[j][j],
                        blocks.l[j][k] * solve_spd(blocks.l[k][k], blocks.c[k],
                                                   "joint_cov: L_kk"),
                        "joint_cov: L_jj");
      const Eigen::MatrixXd cross = var[j] * (n * inner) * var[k];
      joint.full.block(j * d, k * d, d, d) = cross;
      joint.full.block(k * d, j * d, d, d) = cross.transpose();
    }
  }
  joint.full.block(n_models * d, n_models * d, d, d) = v_internal;
  return joint;
}

Eigen::VectorXd eb_point(const Eigen::VectorXd& gamma_i, const Eigen::VectorXd& gamma_cml,
                         const Eigen::MatrixXd& v_internal) {
  const Eigen::LLT<Eigen::MatrixXd> llt(v_internal);
  if (llt.info() != Eigen::Success) {
    throw NumericError("eb_point: V_I is not positive definite");
  }
  const Eigen::VectorXd z = gamma_i - gamma_cml;
  const double t = z.dot(llt.solve(z));
  return gamma_cml + z * (1.0 - 1.0 / (1.0 + t));
}

EbCovariance eb_covariance(const JointAsymptoticCov& joint,
                           const std::vector<Eigen::VectorXd>& gamma_cml,
                           const Eigen::VectorXd& gamma_i, int draws, std::uint64_t seed) {
  const int n_models = joint.n_models;
  const Eigen::Index d = joint.dim;
  if (static_cast<int>(gamma_cml.size()) != n_models) {
    throw ConfigError("eb_covariance: point-estimate count does not match the joint covariance");
  }
  if (draws < 100) {
    throw ConfigError("eb_covariance: need at least 100 draws (got " + std::to_string(draws) +
                      ")");
  }

  const Eigen::MatrixXd v_internal = joint.var_internal();
  const Eigen::LLT<Eigen::MatrixXd> llt(v_internal);
  if (llt.info() != Eigen::Success) {
    throw NumericError("eb_covariance: V_I block is not positive definite");
  }

  EbCovariance out;
  out.draws = draws;
  out.seed = seed;

  const rng::MvnSampler sampler(joint.full);
  out.repair_clipped_mass = sampler.clipped_mass();
  out.repair_warning = out.repair_clipped_mass > 0.01;

  // columns: eb_1 .. eb_K, then the unconstrained draw
  Eigen::MatrixXd samples(draws, (n_models + 1) * d);
  for (int j = 0; j < draws; ++j) {
    rng::Substream stream(seed, kEbMcStream, static_cast<std::uint64_t>(j));
    const Eigen::VectorXd stacked = sampler.sample(stream);
    const Eigen::VectorXd internal_part = stacked.segment(n_models * d, d);
    for (int k = 0; k < n_models; ++k) {
      const Eigen::VectorXd cml_part = stacked.segment(k * d, d);
      const Eigen::VectorXd z = internal_part - cml_part;
      const double t = z.dot(llt.solve(z));
      samples.row(j).segment(k * d, d) =
          (cml_part + z * (1.0 - 1.0 / (1.0 + t))).transpose();
    }
    samples.row(j).segment(n_models * d, d) = internal_part.transpose();
  }

  const Eigen::RowVectorXd means = samples.colwise().mean();
  const Eigen::MatrixXd centered = samples.rowwise() - means;
  const Eigen::MatrixXd big =
      centered.transpose() * centered / static_cast<double>(draws - 1);

  out.var.resize(n_models);
  out.cross.assign(n_models, std::vector<Eigen::MatrixXd>(n_models));
  out.cross_internal.resize(n_models);
  for (int j = 0; j < n_models; ++j) {
    out.var[j] = big.block(j * d, j * d, d, d);
    out.var[j] = 0.5 * (out.var[j] + out.var[j].transpose()).eval();
    out.cross[j][j] = out.var[j];
    for (int k = j + 1; k < n_models; ++k) {
      out.cross[j][k] = big.block(j * d, k * d, d, d);
      out.cross[k][j] = out.cross[j][k].transpose();
    }
    out.cross_internal[j] = big.block(j * d, n_models * d, d, d);
  }
  out.var_internal_mc = big.block(n_models * d, n_models * d, d, d);

  const double z_threshold = 3.0 * std::sqrt(v_internal.trace());
  out.z_large.resize(gamma_cml.size());
  for (std::size_t k = 0; k < gamma_cml.size(); ++k) {
    out.z_large[k] = (gamma_i - gamma_cml[k]).norm() > z_threshold;
  }
  return out;
}

}  // namespace metaglm
