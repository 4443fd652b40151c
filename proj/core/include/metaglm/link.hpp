#pragma once

#include <cmath>
#include <string>

#include "metaglm/errors.hpp"

namespace metaglm {

enum class Link { logit, identity };

inline std::string link_name(Link link) {
  return link == Link::logit ? "logit" : "identity";
}

inline Link parse_link(const std::string& name) {
  if (name == "logit") return Link::logit;
  if (name == "identity") return Link::identity;
  throw ConfigError("unknown link '" + name + "' (expected 'logit' or 'identity')");
}

// Numerically stable inverse logit.
inline double expit(double eta) {
  if (eta >= 0.0) {
    return 1.0 / (1.0 + std::exp(-eta));
  }
  const double e = std::exp(eta);
  return e / (1.0 + e);
}

// log(1 + exp(eta)) without overflow.
inline double log1pexp(double eta) {
  if (eta > 35.0) return eta;
  if (eta < -35.0) return std::exp(eta);
  return std::log1p(std::exp(eta));
}

inline double mean_response(double eta, Link link) {
  return link == Link::logit ? expit(eta) : eta;
}

// d mu / d eta; the IRLS weight for the canonical links used here.
inline double mean_derivative(double eta, Link link) {
  if (link == Link::identity) return 1.0;
  const double mu = expit(eta);
  return mu * (1.0 - mu);
}

}  // namespace metaglm
