#pragma once

#include <Eigen/Dense>

#include "metaglm/dataset.hpp"
#include "metaglm/link.hpp"

namespace metaglm {

// Maximum-likelihood fit of the target model on the internal data alone.
// `cov` is the inverse of the total observed information, i.e. the
// estimated covariance of the coefficient vector.
struct GlmFit {
  Eigen::VectorXd gamma_hat;
  Eigen::MatrixXd cov;
  Link link = Link::logit;
  double loglik = 0.0;
  bool converged = false;
  int iterations = 0;
};

struct ScoreInfo {
  Eigen::VectorXd score;  // (1/n) sum_i d_i (y_i - mu_i) / dispersion
  Eigen::MatrixXd info;   // (1/n) sum_i w_i d_i d_i' / dispersion
};

struct GlmOptions {
  double score_tol = 1e-8;      // on the max |total score|
  double step_tol = 1e-10;      // on the relative coefficient change
  int max_iterations = 100;
  double coef_cap = 50.0;       // |coef| beyond this reports separation
  double dispersion = 1.0;      // identity link only
};

double log_likelihood(const Eigen::MatrixXd& design, const Eigen::VectorXd& y,
                      const Eigen::VectorXd& gamma, Link link, double dispersion = 1.0);

// Per-observation average score and information at `gamma`.
ScoreInfo score_and_info(const Eigen::VectorXd& gamma, const Eigen::MatrixXd& design,
                         const Eigen::VectorXd& y, Link link, double dispersion = 1.0);

struct Predictions {
  Eigen::VectorXd eta;
  Eigen::VectorXd mu;
};

Predictions predict(const Eigen::VectorXd& gamma, const Eigen::MatrixXd& design, Link link);

// Newton-Raphson with step-halving (logit) or the normal equations
// (identity).  Throws NumericError on rank deficiency, separation, or
// failure to converge.  Fractional responses in [0,1] are accepted for the
// logit link (used for fitting implied nested models).
GlmFit fit_mle(const Eigen::MatrixXd& design, const Eigen::VectorXd& y, Link link,
               const GlmOptions& options = {});

// Convenience overload building the design from the dataset.  For the
// logit link the outcome must be binary with both classes present.
GlmFit fit_mle(const Dataset& data, Link link, const GlmOptions& options = {});

}  // namespace metaglm
