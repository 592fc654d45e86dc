#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <random>
#include <span>
#include <vector>

#include "nrdectl/diffcore/tensor.hpp"

namespace nrdectl {

enum class NoiseKind { brownian, fractional };

struct NoiseSpec {
  NoiseKind kind = NoiseKind::brownian;
  double hurst = 0.5;  // used when kind == fractional; shared by all channels
  std::size_t dim = 1;
  double horizon = 1.0;
  std::size_t steps = 1;
  std::uint64_t seed = 0;

  double dt() const { return horizon / static_cast<double>(steps); }
  void validate() const;
};

/// One sampled path on the uniform grid t_k = k T / K.
struct NoisePath {
  std::vector<double> grid;  // K + 1 times
  Tensor increments;         // [K, dim]

  /// Running sums with a leading zero row: [K + 1, dim].
  Tensor cumulative() const;
};

/// E[W^H_s W^H_t] = (s^{2H} + t^{2H} - |t - s|^{2H}) / 2.
double fbm_covariance(double s, double t, double hurst);

/// Autocovariance of fractional Gaussian noise with step `dt` at integer lag k:
/// dt^{2H} ((k+1)^{2H} + |k-1|^{2H} - 2 k^{2H}) / 2.
double fgn_autocovariance(std::size_t lag, double hurst, double dt);

/// Exact sampler of K consecutive fGN increments.
///
/// Uses the Davies-Harte circulant embedding of size 2K. If the embedding has
/// a clearly negative eigenvalue the sampler falls back to a Cholesky factor of
/// the K x K Toeplitz covariance. Immutable after construction.
class FgnSampler {
 public:
  FgnSampler(double hurst, std::size_t steps, double dt);

  /// Writes `steps` increments into `out`; consumes 2K normals (circulant) or
  /// K normals (Cholesky) from `rng`.
  void sample(std::mt19937_64& rng, std::span<double> out) const;
  bool uses_circulant() const noexcept { return circulant_; }

 private:
  double hurst_;
  std::size_t steps_;
  double scale_;
  bool circulant_ = true;
  std::vector<double> sqrt_eigen_;  // sqrt(lambda_j / (2K)), j = 0..K
  RowMatrix cholesky_;
};

NoisePath sample_brownian(const NoiseSpec& spec);
NoisePath sample_fgn(const NoiseSpec& spec);
/// Dispatches on `spec.kind`.
NoisePath sample_path(const NoiseSpec& spec);

/// Increments of many paths, laid out per time step for batched simulation.
struct NoiseBatch {
  std::vector<double> grid;        // K + 1 times
  std::size_t paths = 0;
  std::size_t dim = 0;
  std::vector<Tensor> increments;  // K tensors of shape [paths, dim]

  std::size_t steps() const noexcept { return increments.size(); }
  /// Sums `factor` consecutive increments; the result lives on every
  /// `factor`-th grid point of this batch.
  NoiseBatch coarsen(std::size_t factor) const;
  /// Paths [begin, end).
  NoiseBatch rows(std::size_t begin, std::size_t end) const;
};

/// Paths `first_path .. first_path + n_paths - 1` of the stream `spec.seed`.
/// Path i is identical whichever batch it is drawn in.
NoiseBatch sample_noise_batch(const NoiseSpec& spec, std::size_t first_path, std::size_t n_paths);

/// CSV with columns t, channel_0, ..., one row per grid point, cumulative values.
void write_path_csv(std::ostream& out, const NoisePath& path);

}  // namespace nrdectl
