#include "metaglm/metrics.hpp"

#include "metaglm/errors.hpp"
#include "metaglm/glm.hpp"

namespace metaglm {

double avg_prediction_variance(const Eigen::MatrixXd& cov, const Eigen::MatrixXd& design) {
  if (cov.rows() != cov.cols() || cov.rows() != design.cols()) {
    throw ConfigError("avg_prediction_variance: covariance/design dimension mismatch");
  }
  const Eigen::Index n = design.rows();
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    total += design.row(i) * cov * design.row(i).transpose();
  }
  return total / static_cast<double>(n);
}

double sse(const Eigen::VectorXd& gamma, const Eigen::MatrixXd& design,
           const Eigen::VectorXd& true_prob, Link link) {
  if (true_prob.size() != design.rows()) {
    throw ConfigError("sse: true probability vector length mismatch");
  }
  const Predictions pred = predict(gamma, design, link);
  return (pred.mu - true_prob).squaredNorm() / static_cast<double>(design.rows());
}

double scaled_brier(const Eigen::VectorXd& gamma, const Eigen::MatrixXd& design,
                    const Eigen::VectorXd& y, Link link) {
  if (y.size() != design.rows()) throw ConfigError("scaled_brier: outcome length mismatch");
  const double ybar = y.mean();
  const double denom = (y.array() - ybar).square().sum();
  if (denom <= 0.0) {
    throw ConfigError("scaled_brier: outcome is constant (zero variance)");
  }
  const Predictions pred = predict(gamma, design, link);
  return (y - pred.mu).squaredNorm() / denom;
}

}  // namespace metaglm
