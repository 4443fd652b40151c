#include "metaglm/rng.hpp"

#include <cmath>

#include "metaglm/errors.hpp"

namespace metaglm::rng {

std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) {
  return mix(mix(mix(seed) ^ stream) ^ counter);
}

Substream::Substream(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter)
    : engine_(derive(seed, stream, counter)) {}

double Substream::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Substream::uniform_open() {
  return (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53;
}

double Substream::normal() {
  if (has_cached_) {
    has_cached_ = false;
    return cached_;
  }
  const double u1 = uniform_open();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * M_PI * u2;
  cached_ = r * std::sin(theta);
  has_cached_ = true;
  return r * std::cos(theta);
}

Eigen::VectorXd Substream::normals(Eigen::Index count) {
  Eigen::VectorXd out(count);
  for (Eigen::Index i = 0; i < count; ++i) out[i] = normal();
  return out;
}

MvnSampler::MvnSampler(const Eigen::MatrixXd& cov) {
  if (cov.rows() != cov.cols()) {
    throw ConfigError("MvnSampler: covariance must be square");
  }
  const Eigen::MatrixXd sym = 0.5 * (cov + cov.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  if (es.info() != Eigen::Success) {
    throw NumericError("MvnSampler: eigendecomposition failed");
  }
  Eigen::VectorXd evals = es.eigenvalues();
  double clipped = 0.0;
  for (Eigen::Index i = 0; i < evals.size(); ++i) {
    if (evals[i] < 0.0) {
      clipped -= evals[i];
      evals[i] = 0.0;
    }
  }
  const double trace = sym.trace();
  clipped_mass_ = trace > 0.0 ? clipped / trace : 0.0;
  sqrt_ = es.eigenvectors() * evals.cwiseSqrt().asDiagonal() *
          es.eigenvectors().transpose();
}

Eigen::VectorXd MvnSampler::sample(Substream& stream) const {
  return sqrt_ * stream.normals(sqrt_.rows());
}

}  // namespace metaglm::rng
