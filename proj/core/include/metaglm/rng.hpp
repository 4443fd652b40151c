#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Dense>

namespace metaglm::rng {

// splitmix64 finalizer; used to derive well-mixed substream seeds.
std::uint64_t mix(std::uint64_t x);

// Combine a seed with stream/counter identifiers into a fresh seed.
std::uint64_t derive(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter = 0);

// A deterministic random stream addressed by (seed, stream, counter).
// Streams with distinct addresses are independent for practical purposes,
// so consumers can draw chunks in any order (or in parallel) and still
// produce identical results.  Normal variates use an explicit Box-Muller
// transform on top of mt19937_64 so output does not depend on the standard
// library's unspecified std::normal_distribution algorithm.
class Substream {
public:
  Substream(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter = 0);

  double uniform();       // [0, 1)
  double uniform_open();  // (0, 1]
  double normal();
  Eigen::VectorXd normals(Eigen::Index count);

private:
  std::mt19937_64 engine_;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

// Samples from N(0, cov) through the symmetric eigen square root of cov.
// Negative eigenvalues (finite-sample plug-in artifacts) are clipped to
// zero; `clipped_mass` reports how much was removed relative to the trace.
class MvnSampler {
public:
  explicit MvnSampler(const Eigen::MatrixXd& cov);

  Eigen::VectorXd sample(Substream& stream) const;
  double clipped_mass() const { return clipped_mass_; }

private:
  Eigen::MatrixXd sqrt_;
  double clipped_mass_ = 0.0;
};

}  // namespace metaglm::rng
