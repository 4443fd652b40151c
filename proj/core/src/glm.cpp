#include "metaglm/glm.hpp"

#include <cmath>
#include <string>

#include "metaglm/errors.hpp"

namespace metaglm {

double log_likelihood(const Eigen::MatrixXd& design, const Eigen::VectorXd& y,
                      const Eigen::VectorXd& gamma, Link link, double dispersion) {
  const Eigen::VectorXd eta = design * gamma;
  double ll = 0.0;
  if (link == Link::logit) {
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      ll += y[i] * eta[i] - log1pexp(eta[i]);
    }
  } else {
    const double n = static_cast<double>(y.size());
    ll = -0.5 * (y - eta).squaredNorm() / dispersion -
         0.5 * n * std::log(2.0 * M_PI * dispersion);
  }
  return ll;
}

ScoreInfo score_and_info(const Eigen::VectorXd& gamma, const Eigen::MatrixXd& design,
                         const Eigen::VectorXd& y, Link link, double dispersion) {
  if (!gamma.allFinite()) throw NumericError("score_and_info: non-finite coefficients");
  const Eigen::Index n = design.rows();
  const Eigen::VectorXd eta = design * gamma;
  if (!eta.allFinite()) throw NumericError("score_and_info: non-finite linear predictor");

  Eigen::VectorXd mu(n), w(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    mu[i] = mean_response(eta[i], link);
    w[i] = mean_derivative(eta[i], link);
  }
  ScoreInfo out;
  const double inv_n = 1.0 / static_cast<double>(n);
  out.score = design.transpose() * (y - mu) * (inv_n / dispersion);
  out.info = design.transpose() * w.asDiagonal() * design * (inv_n / dispersion);
  return out;
}

Predictions predict(const Eigen::VectorXd& gamma, const Eigen::MatrixXd& design, Link link) {
  if (!gamma.allFinite()) throw NumericError("predict: non-finite coefficients");
  Predictions out;
  out.eta = design * gamma;
  out.mu.resize(out.eta.size());
  for (Eigen::Index i = 0; i < out.eta.size(); ++i) {
    out.mu[i] = mean_response(out.eta[i], link);
  }
  return out;
}

namespace {

GlmFit fit_identity(const Eigen::MatrixXd& design, const Eigen::VectorXd& y,
                    const GlmOptions& options) {
  const Eigen::Index d = design.cols();
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  if (qr.rank() < d) {
    throw NumericError("fit_mle: design matrix is rank deficient (rank " +
                       std::to_string(qr.rank()) + " of " + std::to_string(d) + ")");
  }
  GlmFit fit;
  fit.link = Link::identity;
  fit.gamma_hat = qr.solve(y);
  const Eigen::MatrixXd xtx = design.transpose() * design;
  fit.cov = options.dispersion * xtx.inverse();
  fit.loglik = log_likelihood(design, y, fit.gamma_hat, Link::identity, options.dispersion);
  fit.converged = true;
  fit.iterations = 1;
  return fit;
}

}  // namespace

GlmFit fit_mle(const Eigen::MatrixXd& design, const Eigen::VectorXd& y, Link link,
               const GlmOptions& options) {
  if (design.rows() != y.size()) throw ConfigError("fit_mle: design/outcome size mismatch");
  if (link == Link::identity) return fit_identity(design, y, options);

  const Eigen::Index n = design.rows();
  const Eigen::Index d = design.cols();
  {
    const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    if (qr.rank() < d) {
      throw NumericError("fit_mle: design matrix is rank deficient (rank " +
                         std::to_string(qr.rank()) + " of " + std::to_string(d) + ")");
    }
  }

  Eigen::VectorXd gamma = Eigen::VectorXd::Zero(d);
  double ll = log_likelihood(design, y, gamma, Link::logit);
  GlmFit fit;
  fit.link = Link::logit;

  for (int iter = 1; iter <= options.max_iterations; ++iter) {
    fit.iterations = iter;
    const ScoreInfo si = score_and_info(gamma, design, y, Link::logit);
    const Eigen::VectorXd total_score = si.score * static_cast<double>(n);

    if (total_score.lpNorm<Eigen::Infinity>() < options.score_tol) {
      fit.converged = true;
      break;
    }

    Eigen::LDLT<Eigen::MatrixXd> ldlt(si.info * static_cast<double>(n));
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
      throw NumericError("fit_mle: observed information is not positive definite");
    }
    const Eigen::VectorXd step = ldlt.solve(total_score);

    // step-halving keeps the log-likelihood non-decreasing
    double t = 1.0;
    Eigen::VectorXd candidate;
    double ll_new = ll;
    bool improved = false;
    for (int h = 0; h < 40; ++h) {
      candidate = gamma + t * step;
      ll_new = log_likelihood(design, y, candidate, Link::logit);
      if (std::isfinite(ll_new) && ll_new >= ll - 1e-12) {
        improved = true;
        break;
      }
      t *= 0.5;
    }
    if (!improved) {
      throw NumericError("fit_mle: step-halving failed to improve the log-likelihood");
    }
    const double rel_change =
        (candidate - gamma).norm() / std::max(1.0, gamma.norm());
    gamma = candidate;
    ll = ll_new;

    if (gamma.lpNorm<Eigen::Infinity>() > options.coef_cap) {
      throw NumericError(
          "fit_mle: coefficients diverged (complete or quasi-complete separation suspected); "
          "not converged");
    }
    if (rel_change < options.step_tol) {
      fit.converged = true;
      break;
    }
  }

  if (!fit.converged) {
    const ScoreInfo si = score_and_info(gamma, design, y, Link::logit);
    if ((si.score * static_cast<double>(n)).lpNorm<Eigen::Infinity>() < options.score_tol) {
      fit.converged = true;
    } else {
      throw NumericError("fit_mle: no convergence within " +
                         std::to_string(options.max_iterations) + " iterations");
    }
  }

  const ScoreInfo si = score_and_info(gamma, design, y, Link::logit);
  Eigen::LDLT<Eigen::MatrixXd> ldlt(si.info * static_cast<double>(n));
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
    throw NumericError("fit_mle: information at the optimum is not positive definite");
  }
  fit.gamma_hat = gamma;
  fit.cov = ldlt.solve(Eigen::MatrixXd::Identity(d, d));
  fit.cov = 0.5 * (fit.cov + fit.cov.transpose()).eval();
  fit.loglik = ll;
  return fit;
}

GlmFit fit_mle(const Dataset& data, Link link, const GlmOptions& options) {
  const Eigen::MatrixXd design = build_design(data);
  if (link == Link::logit) {
    bool has_zero = false;
    bool has_one = false;
    for (Eigen::Index i = 0; i < data.outcome.size(); ++i) {
      const double v = data.outcome[i];
      if (v == 0.0) {
        has_zero = true;
      } else if (v == 1.0) {
        has_one = true;
      } else {
        throw ConfigError("fit_mle: logit link requires a binary {0,1} outcome");
      }
    }
    if (!has_zero || !has_one) {
      throw ConfigError("fit_mle: logit link requires both outcome classes to be present");
    }
  }
  return fit_mle(design, data.outcome, link, options);
}

}  // namespace metaglm
