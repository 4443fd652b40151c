#include "metaglm/combiners.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

#include "metaglm/errors.hpp"

namespace metaglm {

std::string combiner_name(CombinerMethod method) {
  switch (method) {
    case CombinerMethod::ivw: return "ivw";
    case CombinerMethod::ocwe: return "ocwe";
    case CombinerMethod::sclearner: return "sclearner";
  }
  return "?";
}

namespace {

double prediction_trace(const Eigen::MatrixXd& moment, const Eigen::MatrixXd& cov) {
  return (moment * cov).trace();
}

// lexicographic enumeration of nonempty supports: {0}, {0,1}, {0,1,2}, ...
void enumerate_supports(int k, std::vector<int>& current,
                        const std::function<void(const std::vector<int>&)>& visit,
                        int next = 0) {
  for (int i = next; i < k; ++i) {
    current.push_back(i);
    visit(current);
    enumerate_supports(k, current, visit, i + 1);
    current.pop_back();
  }
}

Eigen::VectorXd project_to_simplex(Eigen::VectorXd v) {
  const Eigen::Index k = v.size();
  std::vector<double> u(v.data(), v.data() + k);
  std::sort(u.begin(), u.end(), std::greater<double>());
  double running = 0.0;
  double threshold = 0.0;
  for (Eigen::Index j = 0; j < k; ++j) {
    running += u[static_cast<std::size_t>(j)];
    const double candidate = (running - 1.0) / static_cast<double>(j + 1);
    if (u[static_cast<std::size_t>(j)] - candidate > 0.0) threshold = candidate;
  }
  for (Eigen::Index j = 0; j < k; ++j) v[j] = std::max(0.0, v[j] - threshold);
  return v;
}

Eigen::VectorXd simplex_qp_projected_gradient(const Eigen::MatrixXd& q, double* objective) {
  const Eigen::Index k = q.rows();
  Eigen::VectorXd w = Eigen::VectorXd::Constant(k, 1.0 / static_cast<double>(k));
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(q);
  const double lipschitz = std::max(2.0 * es.eigenvalues().maxCoeff(), 1e-12);
  double obj = w.dot(q * w);
  for (int iter = 0; iter < 200000; ++iter) {
    const Eigen::VectorXd grad = 2.0 * (q * w);
    const Eigen::VectorXd next = project_to_simplex(w - grad / lipschitz);
    const double next_obj = next.dot(q * next);
    const bool done = std::abs(obj - next_obj) < 1e-10 * (1.0 + std::abs(obj)) &&
                      (next - w).lpNorm<Eigen::Infinity>() < 1e-12;
    w = next;
    obj = next_obj;
    if (done) break;
  }
  if (objective != nullptr) *objective = obj;
  return w;
}

}  // namespace

Eigen::VectorXd simplex_qp(const Eigen::MatrixXd& q, double* objective) {
  const auto k = static_cast<int>(q.rows());
  if (q.rows() != q.cols()) throw ConfigError("simplex_qp: Q must be square");
  if ((q - q.transpose()).lpNorm<Eigen::Infinity>() >
      1e-8 * (1.0 + q.lpNorm<Eigen::Infinity>())) {
    throw ConfigError("simplex_qp: Q must be symmetric");
  }
  if (k == 1) {
    if (objective != nullptr) *objective = q(0, 0);
    return Eigen::VectorXd::Ones(1);
  }
  if (k > 20) return simplex_qp_projected_gradient(q, objective);

  const double ridge = 1e-12 * (1.0 + q.trace());
  double best = std::numeric_limits<double>::infinity();
  Eigen::VectorXd best_w;

  std::vector<int> support;
  auto visit = [&](const std::vector<int>& s) {
    const auto m = static_cast<Eigen::Index>(s.size());
    Eigen::MatrixXd qs(m, m);
    for (Eigen::Index a = 0; a < m; ++a) {
      for (Eigen::Index b = 0; b < m; ++b) {
        qs(a, b) = q(s[static_cast<std::size_t>(a)], s[static_cast<std::size_t>(b)]);
      }
    }
    qs.diagonal().array() += ridge;
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(qs);
    if (ldlt.info() != Eigen::Success) return;
    Eigen::VectorXd x = ldlt.solve(Eigen::VectorXd::Ones(m));
    const double total = x.sum();
    if (!std::isfinite(total) || std::abs(total) < 1e-300) return;
    x /= total;
    if (x.minCoeff() < -1e-12) return;  // KKT point leaves the support face
    x = x.cwiseMax(0.0);
    x /= x.sum();
    Eigen::VectorXd w = Eigen::VectorXd::Zero(k);
    for (Eigen::Index a = 0; a < m; ++a) w[s[static_cast<std::size_t>(a)]] = x[a];
    const double obj = w.dot(q * w);
    if (obj < best - 1e-12) {  // earlier (lexicographically smaller) support wins ties
      best = obj;
      best_w = w;
    }
  };
  enumerate_supports(k, support, visit);

  if (best_w.size() == 0) {
    throw NumericError("simplex_qp: no feasible candidate (numerically corrupted Q)");
  }
  if (objective != nullptr) *objective = best;
  return best_w;
}

CombinationResult combine_ivw(const std::vector<Eigen::VectorXd>& eb_estimates,
                              const EbCovariance& eb_cov, const Eigen::MatrixXd& design) {
  const auto n_models = static_cast<int>(eb_estimates.size());
  if (n_models < 1) throw ConfigError("combine_ivw: need at least one model");
  const Eigen::Index d = eb_estimates[0].size();
  const Eigen::MatrixXd moment = design.transpose() * design;

  Eigen::VectorXd inv_var(n_models);
  for (int k = 0; k < n_models; ++k) {
    const double total = prediction_trace(moment, eb_cov.var[static_cast<std::size_t>(k)]);
    if (!(total > 0.0)) {
      throw NumericError("combine_ivw: degenerate (non-positive) prediction variance for model " +
                         std::to_string(k + 1));
    }
    inv_var[k] = 1.0 / total;
  }

  CombinationResult result;
  result.method = CombinerMethod::ivw;
  result.weights = inv_var / inv_var.sum();
  result.gamma_final = Eigen::VectorXd::Zero(d);
  result.cov_final = Eigen::MatrixXd::Zero(d, d);
  for (int j = 0; j < n_models; ++j) {
    result.gamma_final += result.weights[j] * eb_estimates[static_cast<std::size_t>(j)];
    for (int k = 0; k < n_models; ++k) {
      result.cov_final += result.weights[j] * result.weights[k] *
                          eb_cov.cross[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)];
    }
  }
  result.se_final = result.cov_final.diagonal().cwiseMax(0.0).cwiseSqrt();
  result.objective = prediction_trace(moment, result.cov_final);
  return result;
}

CombinationResult combine_ocwe(const std::vector<Eigen::VectorXd>& eb_estimates,
                               const EbCovariance& eb_cov, const Eigen::MatrixXd& design) {
  const auto n_models = static_cast<int>(eb_estimates.size());
  if (n_models < 1) throw ConfigError("combine_ocwe: need at least one model");
  const Eigen::Index d = eb_estimates[0].size();
  const Eigen::MatrixXd moment = design.transpose() * design;

  Eigen::MatrixXd q(n_models, n_models);
  for (int j = 0; j < n_models; ++j) {
    for (int k = 0; k < n_models; ++k) {
      q(j, k) = prediction_trace(
          moment, eb_cov.cross[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)]);
    }
  }
  q = 0.5 * (q + q.transpose()).eval();

  // PSD repair by eigenvalue clipping; material negativity is an error
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(q);
  const double min_eig = es.eigenvalues().minCoeff();
  if (min_eig < -1e-6 * (1.0 + q.trace())) {
    throw NumericError("combine_ocwe: prediction-variance matrix has material negative "
                       "eigenvalues after symmetrization");
  }
  if (min_eig < 0.0) {
    q = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).asDiagonal() *
        es.eigenvectors().transpose();
  }

  CombinationResult result;
  result.method = CombinerMethod::ocwe;
  result.weights = simplex_qp(q, &result.objective);
  result.gamma_final = Eigen::VectorXd::Zero(d);
  result.cov_final = Eigen::MatrixXd::Zero(d, d);
  for (int j = 0; j < n_models; ++j) {
    result.gamma_final += result.weights[j] * eb_estimates[static_cast<std::size_t>(j)];
    for (int k = 0; k < n_models; ++k) {
      result.cov_final += result.weights[j] * result.weights[k] *
                          eb_cov.cross[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)];
    }
  }
  result.se_final = result.cov_final.diagonal().cwiseMax(0.0).cwiseSqrt();
  return result;
}

CombinationResult combine_sclearner(const std::vector<Eigen::VectorXd>& eb_estimates,
                                    const EbCovariance& eb_cov,
                                    const std::vector<std::vector<Eigen::Index>>& positions,
                                    const GlmFit& internal_fit) {
  const auto n_models = static_cast<int>(eb_estimates.size());
  if (n_models < 1) throw ConfigError("combine_sclearner: need at least one model");
  if (static_cast<int>(positions.size()) != n_models) {
    throw ConfigError("combine_sclearner: positions/estimates size mismatch");
  }
  const Eigen::Index d = eb_estimates[0].size();

  CombinationResult result;
  result.method = CombinerMethod::sclearner;
  result.gamma_final.resize(d);
  result.coefficient_weights = Eigen::MatrixXd::Zero(n_models, d);

  // membership: intercept belongs to every model, covariate j to the models
  // whose index map contains design column j
  std::vector<std::vector<int>> contributors(static_cast<std::size_t>(d));
  for (Eigen::Index j = 0; j < d; ++j) {
    for (int k = 0; k < n_models; ++k) {
      const auto& pos = positions[static_cast<std::size_t>(k)];
      if (j == 0 || std::find(pos.begin(), pos.end(), j) != pos.end()) {
        contributors[static_cast<std::size_t>(j)].push_back(k);
      }
    }
  }

  for (Eigen::Index j = 0; j < d; ++j) {
    const auto& who = contributors[static_cast<std::size_t>(j)];
    if (who.empty()) {
      result.gamma_final[j] = internal_fit.gamma_hat[j];
      continue;
    }
    double denom = 0.0;
    for (const int k : who) {
      const double v = eb_cov.var[static_cast<std::size_t>(k)](j, j);
      if (!(v > 0.0)) {
        throw NumericError("combine_sclearner: non-positive variance entry for model " +
                           std::to_string(k + 1));
      }
      denom += 1.0 / v;
    }
    double combined = 0.0;
    for (const int k : who) {
      const double w = (1.0 / eb_cov.var[static_cast<std::size_t>(k)](j, j)) / denom;
      result.coefficient_weights(k, j) = w;
      combined += w * eb_estimates[static_cast<std::size_t>(k)][j];
    }
    result.gamma_final[j] = combined;
  }

  // full covariance of the combined vector; coefficients taken from the
  // unconstrained fit use its analytic covariance, mixed entries the Monte
  // Carlo cross blocks
  result.cov_final.setZero(d, d);
  for (Eigen::Index j = 0; j < d; ++j) {
    for (Eigen::Index l = 0; l < d; ++l) {
      const auto& who_j = contributors[static_cast<std::size_t>(j)];
      const auto& who_l = contributors[static_cast<std::size_t>(l)];
      double cov = 0.0;
      if (who_j.empty() && who_l.empty()) {
        cov = internal_fit.cov(j, l);
      } else if (who_j.empty()) {
        for (const int k : who_l) {
          cov += result.coefficient_weights(k, l) *
                 eb_cov.cross_internal[static_cast<std::size_t>(k)](l, j);
        }
      } else if (who_l.empty()) {
        for (const int k : who_j) {
          cov += result.coefficient_weights(k, j) *
                 eb_cov.cross_internal[static_cast<std::size_t>(k)](j, l);
        }
      } else {
        for (const int a : who_j) {
          for (const int b : who_l) {
            cov += result.coefficient_weights(a, j) * result.coefficient_weights(b, l) *
                   eb_cov.cross[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)](j, l);
          }
        }
      }
      result.cov_final(j, l) = cov;
    }
  }
  result.cov_final = 0.5 * (result.cov_final + result.cov_final.transpose()).eval();
  result.se_final = result.cov_final.diagonal().cwiseMax(0.0).cwiseSqrt();
  return result;
}

}  // namespace metaglm
