#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Core>

namespace mtvgp {

/// Seedable, splittable generator.
///
/// A generator is addressed by (seed, stream). Streams with different ids are
/// seeded independently, so chain k or replicate r can be reconstructed
/// directly from (seed, k) without replaying any other stream.
class Rng {
 public:
  using engine_type = std::mt19937_64;

  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  /// Child generator for sub-stream `child`; does not advance this generator.
  Rng split(std::uint64_t child) const;

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream() const noexcept { return stream_; }

  /// Uniform on the open interval (0, 1).
  double uniform();
  double uniform(double low, double high);
  double normal();
  engine_type& engine() noexcept { return engine_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  engine_type engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

/// rows x cols matrix of iid N(0,1) draws, filled column-major.
Eigen::MatrixXd standard_normal_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng);

std::uint64_t splitmix64(std::uint64_t x) noexcept;

}  // namespace mtvgp
