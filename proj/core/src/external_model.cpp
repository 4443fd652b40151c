#include "metaglm/external_model.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "metaglm/errors.hpp"

namespace metaglm {

void validate_spec(const ExternalModelSpec& spec) {
  if (spec.name.empty()) throw ConfigError("external model spec: empty name");
  const auto pk = static_cast<Eigen::Index>(spec.covariates.size());
  if (spec.coefficients.size() != pk + 1) {
    throw ConfigError("external model '" + spec.name + "': coefficient length " +
                      std::to_string(spec.coefficients.size()) + " != |covariates| + 1 = " +
                      std::to_string(pk + 1));
  }
  std::set<std::string> seen;
  for (const auto& nm : spec.covariates) {
    if (!seen.insert(nm).second) {
      throw ConfigError("external model '" + spec.name + "': duplicate covariate '" + nm + "'");
    }
  }
  for (const auto& [key, entry] : spec.recenter) {
    if (!seen.count(key)) {
      throw ConfigError("external model '" + spec.name + "': recenter key '" + key +
                        "' is not a covariate of the model");
    }
    if (entry.scale == 0.0) {
      throw ConfigError("external model '" + spec.name + "': zero recenter scale for '" + key + "'");
    }
  }
  if (!spec.coefficients.allFinite()) {
    throw ConfigError("external model '" + spec.name + "': non-finite coefficient");
  }
}

ExternalModelSpec recenter_external(const ExternalModelSpec& spec) {
  validate_spec(spec);
  ExternalModelSpec out = spec;
  // model covariate = scale * internal - offset, so
  //   slope * (scale * internal - offset) = (slope*scale) * internal - slope*offset
  for (const auto& [key, entry] : spec.recenter) {
    const auto it = std::find(out.covariates.begin(), out.covariates.end(), key);
    const auto j = static_cast<Eigen::Index>(it - out.covariates.begin()) + 1;
    const double slope = out.coefficients[j];
    out.coefficients[j] = slope * entry.scale;
    out.coefficients[0] -= slope * entry.offset;
  }
  out.recenter.clear();
  return out;
}

double linear_predictor(const ExternalModelSpec& spec,
                        const std::map<std::string, double>& values) {
  double eta = spec.coefficients[0];
  for (std::size_t j = 0; j < spec.covariates.size(); ++j) {
    const auto& nm = spec.covariates[j];
    const auto it = values.find(nm);
    if (it == values.end()) {
      throw ConfigError("external model '" + spec.name + "': no value for covariate '" + nm + "'");
    }
    double v = it->second;
    const auto rc = spec.recenter.find(nm);
    if (rc != spec.recenter.end()) v = rc->second.scale * v - rc->second.offset;
    eta += spec.coefficients[static_cast<Eigen::Index>(j) + 1] * v;
  }
  return eta;
}

IndexMap map_indices(const std::vector<ExternalModelSpec>& specs, const Dataset& data) {
  IndexMap map;
  map.positions.reserve(specs.size());
  std::vector<std::string> missing;
  for (const auto& spec : specs) {
    std::vector<Eigen::Index> pos;
    pos.reserve(spec.covariates.size() + 1);
    pos.push_back(0);
    for (const auto& nm : spec.covariates) {
      const auto it = std::find(data.x_names.begin(), data.x_names.end(), nm);
      if (it == data.x_names.end()) {
        missing.push_back(spec.name + ":" + nm);
        continue;
      }
      pos.push_back(1 + static_cast<Eigen::Index>(it - data.x_names.begin()));
    }
    map.positions.push_back(std::move(pos));
  }
  if (!missing.empty()) {
    std::string joined;
    for (const auto& m : missing) {
      if (!joined.empty()) joined += ", ";
      joined += m;
    }
    throw ConfigError("external model covariates not measured in the internal data: " + joined);
  }
  return map;
}

Eigen::MatrixXd subdesign(const Eigen::MatrixXd& design,
                          const std::vector<Eigen::Index>& positions) {
  Eigen::MatrixXd sub(design.rows(), static_cast<Eigen::Index>(positions.size()));
  for (std::size_t j = 0; j < positions.size(); ++j) {
    sub.col(static_cast<Eigen::Index>(j)) = design.col(positions[j]);
  }
  return sub;
}

ExternalModelSpec load_external_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open external model spec '" + path + "'");
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("external model spec '" + path + "': invalid JSON: " + e.what());
  }

  ExternalModelSpec spec;
  try {
    spec.name = doc.at("name").get<std::string>();
    spec.link = parse_link(doc.at("link").get<std::string>());
    spec.covariates = doc.at("covariates").get<std::vector<std::string>>();
    const auto coefs = doc.at("coefficients").get<std::vector<double>>();
    spec.coefficients = Eigen::Map<const Eigen::VectorXd>(
        coefs.data(), static_cast<Eigen::Index>(coefs.size()));
    if (doc.contains("recenter")) {
      for (const auto& [key, value] : doc.at("recenter").items()) {
        RecenterEntry entry;
        entry.offset = value.value("offset", 0.0);
        entry.scale = value.value("scale", 1.0);
        spec.recenter.emplace(key, entry);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("external model spec '" + path + "': missing or malformed field: " +
                      e.what());
  }
  validate_spec(spec);
  return spec;
}

std::string external_spec_to_json(const ExternalModelSpec& spec) {
  nlohmann::json doc;
  doc["name"] = spec.name;
  doc["link"] = link_name(spec.link);
  doc["covariates"] = spec.covariates;
  doc["coefficients"] = std::vector<double>(
      spec.coefficients.data(), spec.coefficients.data() + spec.coefficients.size());
  if (!spec.recenter.empty()) {
    nlohmann::json rc;
    for (const auto& [key, entry] : spec.recenter) {
      rc[key] = {{"offset", entry.offset}, {"scale", entry.scale}};
    }
    doc["recenter"] = rc;
  }
  return doc.dump(2) + "\n";
}

}  // namespace metaglm
