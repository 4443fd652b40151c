#include "metaglm/cspml.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "metaglm/errors.hpp"

namespace metaglm {

namespace {

void check_link_pairing(Link internal_link, Link external_link) {
  if (internal_link != external_link) {
    throw ConfigError("unsupported link pairing: internal " + link_name(internal_link) +
                      " with external " + link_name(external_link));
  }
}

}  // namespace

Eigen::VectorXd conditional_external_score(const Eigen::VectorXd& gamma,
                                           const Eigen::VectorXd& beta,
                                           const Eigen::VectorXd& full_row,
                                           const Eigen::VectorXd& sub_row,
                                           Link internal_link, Link external_link) {
  check_link_pairing(internal_link, external_link);
  const double mu_gamma = mean_response(full_row.dot(gamma), internal_link);
  const double mu_beta = mean_response(sub_row.dot(beta), external_link);
  return sub_row * (mu_gamma - mu_beta);
}

Eigen::MatrixXd external_score_matrix(const Eigen::VectorXd& gamma,
                                      const Eigen::VectorXd& beta,
                                      const Eigen::MatrixXd& design,
                                      const Eigen::MatrixXd& sub,
                                      Link internal_link, Link external_link) {
  check_link_pairing(internal_link, external_link);
  const Eigen::Index n = design.rows();
  Eigen::VectorXd diff(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    diff[i] = mean_response(design.row(i).dot(gamma), internal_link) -
              mean_response(sub.row(i).dot(beta), external_link);
  }
  return sub.array().colwise() * diff.array();
}

ElSolution solve_el_multiplier(const Eigen::MatrixXd& u, const Eigen::VectorXd& lambda0,
                               const CmlOptions& options) {
  const Eigen::Index n = u.rows();
  const Eigen::Index m = u.cols();
  const double inv_n = 1.0 / static_cast<double>(n);

  ElSolution sol;
  sol.lambda = lambda0;

  // make sure the warm start is strictly feasible
  for (int guard = 0; guard < 60; ++guard) {
    const Eigen::VectorXd v = Eigen::VectorXd::Ones(n) + u * sol.lambda;
    if (v.minCoeff() > options.feasibility_floor) break;
    sol.lambda *= 0.5;
  }

  for (int iter = 1; iter <= options.inner_max_iterations; ++iter) {
    sol.iterations = iter;
    const Eigen::VectorXd v = Eigen::VectorXd::Ones(n) + u * sol.lambda;
    const Eigen::ArrayXd inv_v = v.array().inverse();
    const Eigen::VectorXd weighted = (u.array().colwise() * inv_v).colwise().sum() * inv_n;
    sol.constraint_norm = weighted.norm();
    if (sol.constraint_norm < options.inner_tol) {
      sol.feasible = true;
      return sol;
    }

    // Newton direction for the convex dual -sum log v
    const Eigen::MatrixXd scaled = u.array().colwise() * inv_v;
    Eigen::MatrixXd hess = scaled.transpose() * scaled;
    hess.diagonal().array() += 1e-12 * (1.0 + hess.trace());
    const Eigen::VectorXd step =
        Eigen::LDLT<Eigen::MatrixXd>(hess).solve(weighted * static_cast<double>(n));

    const double f0 = -v.array().log().sum();
    double t = 1.0;
    bool moved = false;
    for (int h = 0; h < 60; ++h) {
      const Eigen::VectorXd lam_new = sol.lambda + t * step;
      const Eigen::VectorXd v_new = Eigen::VectorXd::Ones(n) + u * lam_new;
      if (v_new.minCoeff() > options.feasibility_floor &&
          -v_new.array().log().sum() <= f0 + 1e-14 * std::abs(f0)) {
        sol.lambda = lam_new;
        moved = true;
        break;
      }
      t *= 0.5;
    }
    if (!moved) {
      // no feasible descent step: either converged to working precision or
      // the dual is unbounded (0 outside the hull of the u_i)
      sol.feasible = sol.constraint_norm < 1e-6;
      return sol;
    }
    // unbounded dual diagnosed by a runaway multiplier
    if (sol.lambda.lpNorm<Eigen::Infinity>() > 1e12 * (1.0 + static_cast<double>(m))) {
      sol.feasible = false;
      return sol;
    }
  }
  const Eigen::VectorXd v = Eigen::VectorXd::Ones(n) + u * sol.lambda;
  sol.constraint_norm =
      ((u.array().colwise() * v.array().inverse()).colwise().sum() * inv_n).matrix().norm();
  sol.feasible = sol.constraint_norm < 1e-6;
  return sol;
}

namespace {

// Profile objective at gamma (up to the n log n constant): log-likelihood
// minus sum_i log(1 + lambda' u_i), with lambda solved by the inner step.
struct ProfileEval {
  double value = -std::numeric_limits<double>::infinity();
  Eigen::VectorXd gradient;
  Eigen::VectorXd lambda;
  bool feasible = false;
  double constraint_norm = 0.0;
};

struct ProfileProblem {
  const Eigen::MatrixXd& design;
  const Eigen::VectorXd& y;
  const Eigen::MatrixXd& sub;
  Eigen::VectorXd beta;
  Link internal_link;
  Link external_link;
  const CmlOptions& options;

  ProfileEval eval(const Eigen::VectorXd& gamma, const Eigen::VectorXd& lambda_start) const {
    ProfileEval out;
    const Eigen::Index n = design.rows();
    const Eigen::MatrixXd u =
        external_score_matrix(gamma, beta, design, sub, internal_link, external_link);
    const ElSolution el = solve_el_multiplier(u, lambda_start, options);
    if (!el.feasible) return out;

    const Eigen::VectorXd v = Eigen::VectorXd::Ones(n) + u * el.lambda;
    out.value = log_likelihood(design, y, gamma, internal_link) - v.array().log().sum();
    out.lambda = el.lambda;
    out.feasible = true;
    out.constraint_norm = el.constraint_norm;

    // envelope gradient: the lambda-derivative vanishes at the inner optimum
    Eigen::VectorXd mu(n), w(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double eta = design.row(i).dot(gamma);
      mu[i] = mean_response(eta, internal_link);
      w[i] = mean_derivative(eta, internal_link);
    }
    const Eigen::VectorXd score = design.transpose() * (y - mu);
    const Eigen::VectorXd penalty_scale =
        (w.array() * (sub * el.lambda).array() / v.array()).matrix();
    out.gradient = score - design.transpose() * penalty_scale;
    return out;
  }
};

}  // namespace

Eigen::VectorXd implied_nested_coefficients(const Eigen::MatrixXd& design,
                                            const std::vector<Eigen::Index>& positions,
                                            const Eigen::VectorXd& gamma, Link internal_link,
                                            Link external_link) {
  check_link_pairing(internal_link, external_link);
  const Eigen::MatrixXd sub = subdesign(design, positions);
  Eigen::VectorXd mu(design.rows());
  for (Eigen::Index i = 0; i < design.rows(); ++i) {
    mu[i] = mean_response(design.row(i).dot(gamma), internal_link);
  }
  // fractional-response fit of the nested model to the implied means
  GlmOptions opts;
  opts.coef_cap = 1e3;
  return fit_mle(sub, mu, external_link, opts).gamma_hat;
}

CmlFit fit_cml(const Eigen::MatrixXd& design, const Eigen::VectorXd& y,
               const std::vector<Eigen::Index>& positions, const Eigen::VectorXd& beta,
               Link internal_link, Link external_link, const GlmFit& internal_fit,
               const CmlOptions& options) {
  const Eigen::Index n = design.rows();
  const auto m = static_cast<Eigen::Index>(positions.size());
  if (beta.size() != m) {
    throw ConfigError("fit_cml: external coefficient length does not match its index map");
  }
  if (m >= n) {
    throw ConfigError("fit_cml: constraint dimension must be below the sample size");
  }
  const Eigen::MatrixXd sub = subdesign(design, positions);

  ProfileProblem problem{design, y,  sub, beta, internal_link, external_link, options};

  Eigen::VectorXd gamma = internal_fit.gamma_hat;
  Eigen::VectorXd lambda = Eigen::VectorXd::Zero(m);
  ProfileEval cur = problem.eval(gamma, lambda);

  if (!cur.feasible) {
    // Continuation: walk the external coefficients in from the implied
    // nested fit, where the constraint holds exactly at the MLE.
    const Eigen::VectorXd beta0 = implied_nested_coefficients(
        design, positions, internal_fit.gamma_hat, internal_link, external_link);
    double t = 0.0;
    double step = 0.5;
    while (t < 1.0) {
      const double t_next = std::min(1.0, t + step);
      problem.beta = (1.0 - t_next) * beta0 + t_next * beta;
      const ProfileEval trial = problem.eval(gamma, lambda);
      if (trial.feasible) {
        t = t_next;
        cur = trial;
        lambda = trial.lambda;
      } else {
        step *= 0.5;
        if (step < 1.0 / 64.0) {
          throw NumericError(
              "fit_cml: constraint infeasible (external model grossly incompatible "
              "with the internal data)");
        }
        continue;
      }
      if (t < 1.0) {
        // move gamma toward the partial solution before the next leg
        CmlOptions relaxed = options;
        relaxed.outer_tol = std::max(options.outer_tol, 1e-4);
        GlmFit warm = internal_fit;
        warm.gamma_hat = gamma;
        const CmlFit leg = fit_cml(design, y, positions, problem.beta, internal_link,
                                   external_link, warm, relaxed);
        gamma = leg.gamma_cml;
        lambda = leg.lambda;
        cur = problem.eval(gamma, lambda);
      }
    }
    problem.beta = beta;
  }

  CmlFit fit;
  fit.objective_trace.push_back(cur.value);

  // BFGS ascent on the profile objective, preconditioned by the MLE covariance
  const Eigen::MatrixXd h0 = internal_fit.cov;
  Eigen::MatrixXd h = h0;
  bool converged = false;

  for (int iter = 1; iter <= options.outer_max_iterations; ++iter) {
    fit.outer_iterations = iter;
    if (cur.gradient.lpNorm<Eigen::Infinity>() < options.outer_tol) {
      converged = true;
      break;
    }

    Eigen::VectorXd direction = h * cur.gradient;
    if (direction.dot(cur.gradient) <= 0.0) {
      h = h0;
      direction = h * cur.gradient;
    }

    const double slope = direction.dot(cur.gradient);
    double t = 1.0;
    ProfileEval next;
    bool accepted = false;
    for (int ls = 0; ls < 50; ++ls) {
      next = problem.eval(gamma + t * direction, cur.lambda);
      if (next.feasible && next.value >= cur.value + 1e-4 * t * slope) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) {
      if (cur.gradient.lpNorm<Eigen::Infinity>() < 1e-6) {
        converged = true;  // at working precision
        break;
      }
      throw NumericError("fit_cml: line search failed before reaching the profile optimum");
    }

    const Eigen::VectorXd s = t * direction;
    const Eigen::VectorXd yv = next.gradient - cur.gradient;  // gradient of the ascent problem
    const double sy = -s.dot(yv);                             // curvature of the descent form
    if (sy > 1e-12 * s.norm() * yv.norm()) {
      const Eigen::VectorXd hy = h * yv;
      const double yhy = yv.dot(hy);
      h += ((sy + yhy) / (sy * sy)) * (s * s.transpose()) -
           (hy * s.transpose() + s * hy.transpose()) / sy;
    } else {
      h = h0;
    }

    gamma += s;
    cur = next;
    fit.objective_trace.push_back(cur.value);
  }

  if (!converged) {
    throw NumericError("fit_cml: no convergence within " +
                       std::to_string(options.outer_max_iterations) + " outer iterations");
  }

  const Eigen::MatrixXd u =
      external_score_matrix(gamma, beta, design, sub, internal_link, external_link);
  const ElSolution el = solve_el_multiplier(u, cur.lambda, options);
  const Eigen::VectorXd v = Eigen::VectorXd::Ones(n) + u * el.lambda;

  fit.gamma_cml = gamma;
  fit.lambda = el.lambda;
  fit.p_weights = (static_cast<double>(n) * v.array()).inverse();
  fit.converged = true;
  fit.constraint_norm = el.constraint_norm;
  fit.profile_value = cur.value;
  return fit;
}

CmlFit fit_cml(const Dataset& data, const ExternalModelSpec& spec, const GlmFit& internal_fit,
               const CmlOptions& options) {
  if (!spec.recenter.empty()) {
    throw ConfigError("fit_cml: spec '" + spec.name +
                      "' still carries recenter metadata; apply recenter_external first");
  }
  const Eigen::MatrixXd design = build_design(data);
  const IndexMap map = map_indices({spec}, data);
  try {
    return fit_cml(design, data.outcome, map.positions[0], spec.coefficients,
                   internal_fit.link, spec.link, internal_fit, options);
  } catch (const NumericError& e) {
    throw NumericError(std::string(e.what()) + " [external model '" + spec.name + "']");
  }
}

}  // namespace metaglm
