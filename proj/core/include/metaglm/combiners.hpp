#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "metaglm/asymptotics.hpp"
#include "metaglm/external_model.hpp"

namespace metaglm {

enum class CombinerMethod { ivw, ocwe, sclearner };

std::string combiner_name(CombinerMethod method);

// Final combined estimate.  `weights` holds the per-model weights (IVW,
// OCWE); `coefficient_weights(k, j)` the per-coefficient weight of model k
// for coefficient j (SC-Learner; zero rows for coefficients the model does
// not cover).  `cov_final` is the full covariance of the combined vector,
// from which `se_final` is the diagonal square root.
struct CombinationResult {
  CombinerMethod method = CombinerMethod::ivw;
  Eigen::VectorXd gamma_final;
  Eigen::VectorXd se_final;
  Eigen::MatrixXd cov_final;
  Eigen::VectorXd weights;
  Eigen::MatrixXd coefficient_weights;
  double objective = 0.0;
};

// Minimizes w'Qw over the probability simplex.  For K <= 20 every support
// set is enumerated in lexicographic order and the equality-constrained
// KKT system solved on it; the feasible candidate with the smallest
// objective wins, earlier supports winning ties.  Larger K falls back to
// projected gradient with a 1e-10 objective tolerance.
Eigen::VectorXd simplex_qp(const Eigen::MatrixXd& q, double* objective = nullptr);

// Weights proportional to the inverse total prediction variance
// sum_i d_i' Var(eb_k) d_i of each model, applied to whole vectors.  The
// reported covariance of the combination uses the full cross blocks.
CombinationResult combine_ivw(const std::vector<Eigen::VectorXd>& eb_estimates,
                              const EbCovariance& eb_cov, const Eigen::MatrixXd& design);

// Simplex weights minimizing the total prediction variance of the
// combination, sum_i d_i' Var(sum_k w_k eb_k) d_i.
CombinationResult combine_ocwe(const std::vector<Eigen::VectorXd>& eb_estimates,
                               const EbCovariance& eb_cov, const Eigen::MatrixXd& design);

// Per-coefficient inverse-variance combination over the models whose spec
// includes that covariate (the intercept over all models).  Coefficients no
// external model covers are taken from the unconstrained fit.
CombinationResult combine_sclearner(const std::vector<Eigen::VectorXd>& eb_estimates,
                                    const EbCovariance& eb_cov,
                                    const std::vector<std::vector<Eigen::Index>>& positions,
                                    const GlmFit& internal_fit);

}  // namespace metaglm
