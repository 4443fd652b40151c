#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "metaglm/glm.hpp"

namespace metaglm {

// Plug-in estimates of the building blocks of the joint large-sample
// covariance: the information matrix of the target model, the derivative
// C_k of each model's mean conditional score in gamma, and the second-
// moment matrices L_jk of the conditional scores.  All are sample averages
// over the internal rows at a common evaluation point.
struct AsymptoticBlocks {
  Eigen::MatrixXd b_hat;                         // (p+q+1)^2
  std::vector<Eigen::MatrixXd> c;                // per model: (p_k+1) x (p+q+1)
  std::vector<std::vector<Eigen::MatrixXd>> l;   // L[j][k]: (p_j+1) x (p_k+1)
  Eigen::Index n = 0;
};

AsymptoticBlocks estimate_blocks(const Eigen::MatrixXd& design,
                                 const std::vector<Eigen::MatrixXd>& subs,
                                 const std::vector<Eigen::VectorXd>& betas,
                                 const Eigen::VectorXd& gamma, Link internal_link,
                                 const std::vector<Link>& external_links);

// Joint per-n covariance of (gamma_cml_1, ..., gamma_cml_K, gamma_i),
// stored as one symmetric ((K+1)(p+q+1))^2 matrix.  The covariance block
// between each constrained estimator and the unconstrained one equals that
// estimator's variance block exactly (stored bit-identically).
struct JointAsymptoticCov {
  Eigen::MatrixXd full;
  int n_models = 0;
  Eigen::Index dim = 0;  // p+q+1

  Eigen::Block<const Eigen::MatrixXd> block(int row_model, int col_model) const {
    // model index K (== n_models) addresses the unconstrained estimator
    return full.block(row_model * dim, col_model * dim, dim, dim);
  }
  Eigen::MatrixXd var_internal() const { return block(n_models, n_models); }
};

JointAsymptoticCov joint_cov(const AsymptoticBlocks& blocks);

// Shrinkage combination of the unconstrained and constrained estimates:
// gamma_cml + z (1 - 1/(1 + z' V_I^{-1} z)) with z = gamma_i - gamma_cml.
Eigen::VectorXd eb_point(const Eigen::VectorXd& gamma_i, const Eigen::VectorXd& gamma_cml,
                         const Eigen::MatrixXd& v_internal);

// Monte Carlo covariance of the shrinkage estimators, from zero-mean joint
// normal draws of the stacked estimator vector.  Draw j depends only on
// (seed, j), so chunked or parallel evaluation yields identical results.
struct EbCovariance {
  std::vector<Eigen::MatrixXd> var;                  // Var(eb_k)
  std::vector<std::vector<Eigen::MatrixXd>> cross;   // Cov(eb_j, eb_k)
  std::vector<Eigen::MatrixXd> cross_internal;       // Cov(eb_k, gamma_i draws)
  Eigen::MatrixXd var_internal_mc;                   // Cov of the gamma_i draws
  int draws = 0;
  std::uint64_t seed = 0;
  double repair_clipped_mass = 0.0;  // trace fraction removed by PSD repair
  bool repair_warning = false;       // clipped mass above 1% of the trace
  std::vector<bool> z_large;         // ||z_k|| > 3 sqrt(trace(V_I)) diagnostic
};

EbCovariance eb_covariance(const JointAsymptoticCov& joint,
                           const std::vector<Eigen::VectorXd>& gamma_cml,
                           const Eigen::VectorXd& gamma_i, int draws, std::uint64_t seed);

}  // namespace metaglm
