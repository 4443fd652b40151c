#pragma once

#include <vector>

#include <Eigen/Dense>

#include "metaglm/dataset.hpp"
#include "metaglm/external_model.hpp"
#include "metaglm/glm.hpp"

namespace metaglm {

// Conditional score of the external model at one observation: the expected
// external-model score under the target distribution at gamma, with the
// expectation over the outcome taken in closed form.  Supported pairings
// are logit/logit and identity/identity (unit dispersion), where it reduces
// to sub_row * (mu_gamma(full_row) - mu_beta(sub_row)).
Eigen::VectorXd conditional_external_score(const Eigen::VectorXd& gamma,
                                           const Eigen::VectorXd& beta,
                                           const Eigen::VectorXd& full_row,
                                           const Eigen::VectorXd& sub_row,
                                           Link internal_link, Link external_link);

// Row-stacked conditional scores over the whole dataset: n x (p_k+1).
Eigen::MatrixXd external_score_matrix(const Eigen::VectorXd& gamma,
                                      const Eigen::VectorXd& beta,
                                      const Eigen::MatrixXd& design,
                                      const Eigen::MatrixXd& sub,
                                      Link internal_link, Link external_link);

// Inner empirical-likelihood step for fixed gamma: finds the multiplier
// vector minimizing -sum_i log(1 + lambda' u_i) over the region where all
// 1 + lambda' u_i stay positive.  At the solution p_i = 1 / (n (1 +
// lambda' u_i)) satisfy sum_i p_i u_i = 0 and sum_i p_i = 1.
struct ElSolution {
  Eigen::VectorXd lambda;
  bool feasible = false;        // false when 0 is outside the hull of the u_i
  int iterations = 0;
  double constraint_norm = 0.0; // || sum_i p_i u_i ||
};

struct CmlOptions {
  double inner_tol = 1e-10;   // on || sum p_i u_i ||
  double outer_tol = 1e-8;    // on the profile gradient max-norm
  int inner_max_iterations = 200;
  int outer_max_iterations = 100;
  double feasibility_floor = 1e-10;  // keep every 1 + lambda' u_i above this
};

ElSolution solve_el_multiplier(const Eigen::MatrixXd& u, const Eigen::VectorXd& lambda0,
                               const CmlOptions& options = {});

// Constrained fit for one external model.
struct CmlFit {
  Eigen::VectorXd gamma_cml;
  Eigen::VectorXd lambda;
  Eigen::VectorXd p_weights;
  bool converged = false;
  int outer_iterations = 0;
  double profile_value = 0.0;          // log-likelihood + sum log p_i + n log n
  double constraint_norm = 0.0;
  std::vector<double> objective_trace;
};

// Profile empirical-likelihood solve: the inner multiplier step is nested
// inside a BFGS ascent on gamma, started at the unconstrained MLE.  When
// the constraint is infeasible at the starting point, the external
// coefficients are walked in from the implied nested fit (continuation);
// a model incompatible enough to stay infeasible throws NumericError.
CmlFit fit_cml(const Eigen::MatrixXd& design, const Eigen::VectorXd& y,
               const std::vector<Eigen::Index>& positions, const Eigen::VectorXd& beta,
               Link internal_link, Link external_link, const GlmFit& internal_fit,
               const CmlOptions& options = {});

// Convenience overload; the spec must already be recentered to internal
// units (recenter_external).
CmlFit fit_cml(const Dataset& data, const ExternalModelSpec& spec, const GlmFit& internal_fit,
               const CmlOptions& options = {});

// Coefficients of the model form `positions` implied by a target-model fit:
// solves sum_i sub_i (mu_beta(sub_i) - mu_gamma(d_i)) = 0.  This is the
// external-coefficient value that makes the constraint hold exactly on the
// observed covariate distribution.
Eigen::VectorXd implied_nested_coefficients(const Eigen::MatrixXd& design,
                                            const std::vector<Eigen::Index>& positions,
                                            const Eigen::VectorXd& gamma, Link internal_link,
                                            Link external_link);

}  // namespace metaglm
