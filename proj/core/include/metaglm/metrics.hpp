#pragma once

#include <Eigen/Dense>

#include "metaglm/link.hpp"

namespace metaglm {

struct MetricReport {
  double avg_pred_var = 0.0;   // mean_i d_i' Cov(gamma_hat) d_i
  double sse = 0.0;            // mean squared probability error vs the truth
  double scaled_brier = 0.0;   // mean squared residual over outcome variance
  Eigen::Index n_test = 0;
};

// Average estimated variance of the linear-scale prediction over the rows
// of `design`: (1/N) sum_i d_i' cov d_i.
double avg_prediction_variance(const Eigen::MatrixXd& cov, const Eigen::MatrixXd& design);

// (1/N) sum_i (p_hat_i - p_true_i)^2 for a coefficient vector on a
// validation design with known true probabilities (simulation use).
double sse(const Eigen::VectorXd& gamma, const Eigen::MatrixXd& design,
           const Eigen::VectorXd& true_prob, Link link);

// sum_i (y_i - p_hat_i)^2 / sum_i (y_i - ybar)^2 for a binary outcome.
double scaled_brier(const Eigen::VectorXd& gamma, const Eigen::MatrixXd& design,
                    const Eigen::VectorXd& y, Link link);

}  // namespace metaglm
