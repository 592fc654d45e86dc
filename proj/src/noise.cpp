#include "nrdectl/noise.hpp"

#include <cmath>
#include <complex>
#include <iomanip>
#include <optional>
#include <ostream>
#include <string>

#include <unsupported/Eigen/FFT>

#include "nrdectl/errors.hpp"
#include "nrdectl/random.hpp"

namespace nrdectl {

void NoiseSpec::validate() const {
  if (dim == 0) throw std::invalid_argument("noise dimension must be positive");
  if (steps == 0) throw std::invalid_argument("noise steps must be at least 1");
  if (!(horizon > 0.0)) throw std::invalid_argument("noise horizon must be positive");
  if (kind == NoiseKind::fractional && !(hurst > 0.0 && hurst < 1.0)) {
    throw std::invalid_argument("Hurst index must lie in (0, 1), got " + std::to_string(hurst));
  }
}

Tensor NoisePath::cumulative() const {
  const std::size_t k = increments.rows();
  const std::size_t d = increments.cols();
  Tensor out(Shape{k + 1, d}, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t c = 0; c < d; ++c) out.at(i + 1, c) = out.at(i, c) + increments.at(i, c);
  }
  return out;
}

double fbm_covariance(double s, double t, double hurst) {
  const double two_h = 2.0 * hurst;
  return 0.5 * (std::pow(s, two_h) + std::pow(t, two_h) - std::pow(std::abs(t - s), two_h));
}

double fgn_autocovariance(std::size_t lag, double hurst, double dt) {
  const double two_h = 2.0 * hurst;
  const double k = static_cast<double>(lag);
  const double unit =
      0.5 * (std::pow(k + 1.0, two_h) + std::pow(std::abs(k - 1.0), two_h) - 2.0 * std::pow(k, two_h));
  return std::pow(dt, two_h) * unit;
}

FgnSampler::FgnSampler(double hurst, std::size_t steps, double dt)
    : hurst_(hurst), steps_(steps), scale_(std::pow(dt, hurst)) {
  if (!(hurst > 0.0 && hurst < 1.0)) throw std::invalid_argument("Hurst index must lie in (0, 1)");
  if (steps == 0) throw std::invalid_argument("fGN sampler needs at least one step");
  const std::size_t m = 2 * steps;
  std::vector<std::complex<double>> row(m), eig;
  for (std::size_t j = 0; j <= steps; ++j) row[j] = fgn_autocovariance(j, hurst, 1.0);
  for (std::size_t j = steps + 1; j < m; ++j) row[j] = row[m - j];
  Eigen::FFT<double> fft;
  fft.fwd(eig, row);

  double largest = 0.0;
  for (const auto& e : eig) largest = std::max(largest, std::abs(e.real()));
  const double tol = 1e-12 * std::max(1.0, largest);
  for (std::size_t j = 0; j <= steps; ++j) {
    if (eig[j].real() < -tol) circulant_ = false;
  }
  if (circulant_) {
    sqrt_eigen_.resize(steps + 1);
    for (std::size_t j = 0; j <= steps; ++j) {
      sqrt_eigen_[j] = std::sqrt(std::max(0.0, eig[j].real()) / static_cast<double>(m));
    }
    return;
  }
  RowMatrix cov(steps, steps);
  for (std::size_t i = 0; i < steps; ++i) {
    for (std::size_t j = 0; j < steps; ++j) {
      cov(i, j) = fgn_autocovariance(i > j ? i - j : j - i, hurst, 1.0);
    }
  }
  Eigen::LLT<RowMatrix> llt(cov);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("fGN sampling failed: circulant embedding has negative eigenvalues and the Toeplitz "
                         "covariance is not numerically positive definite (H = " +
                         std::to_string(hurst) + ", K = " + std::to_string(steps) + ")");
  }
  cholesky_ = llt.matrixL();
}

void FgnSampler::sample(std::mt19937_64& rng, std::span<double> out) const {
  if (out.size() != steps_) throw ShapeError("fGN sampler output has wrong length");
  std::normal_distribution<double> normal;
  if (!circulant_) {
    Eigen::VectorXd z(steps_);
    for (std::size_t i = 0; i < steps_; ++i) z[i] = normal(rng);
    Eigen::VectorXd x = cholesky_ * z;
    for (std::size_t i = 0; i < steps_; ++i) out[i] = scale_ * x[i];
    return;
  }
  const std::size_t k = steps_;
  const std::size_t m = 2 * k;
  std::vector<std::complex<double>> w(m), z;
  const double root_half = std::sqrt(0.5);
  w[0] = sqrt_eigen_[0] * normal(rng);
  w[k] = sqrt_eigen_[k] * normal(rng);
  for (std::size_t j = 1; j < k; ++j) {
    const double re = normal(rng);
    const double im = normal(rng);
    w[j] = sqrt_eigen_[j] * root_half * std::complex<double>(re, im);
    w[m - j] = std::conj(w[j]);
  }
  Eigen::FFT<double> fft;
  fft.fwd(z, w);
  for (std::size_t i = 0; i < k; ++i) out[i] = scale_ * z[i].real();
}

namespace {

std::vector<double> uniform_grid(double horizon, std::size_t steps) {
  std::vector<double> grid(steps + 1);
  for (std::size_t k = 0; k <= steps; ++k) grid[k] = horizon * static_cast<double>(k) / static_cast<double>(steps);
  grid[steps] = horizon;
  return grid;
}

/// Fills column-major per channel: out[k * dim + c].
void sample_into(const NoiseSpec& spec, const FgnSampler* fgn, std::mt19937_64& rng, std::vector<double>& channel,
                 double* out) {
  const std::size_t k = spec.steps;
  if (spec.kind == NoiseKind::brownian) {
    std::normal_distribution<double> normal;
    const double sd = std::sqrt(spec.dt());
    for (std::size_t c = 0; c < spec.dim; ++c) {
      for (std::size_t i = 0; i < k; ++i) out[i * spec.dim + c] = sd * normal(rng);
    }
    return;
  }
  for (std::size_t c = 0; c < spec.dim; ++c) {
    fgn->sample(rng, channel);
    for (std::size_t i = 0; i < k; ++i) out[i * spec.dim + c] = channel[i];
  }
}

}  // namespace

NoisePath sample_path(const NoiseSpec& spec) {
  spec.validate();
  NoisePath path;
  path.grid = uniform_grid(spec.horizon, spec.steps);
  path.increments = Tensor(Shape{spec.steps, spec.dim});
  std::optional<FgnSampler> fgn;
  if (spec.kind == NoiseKind::fractional) fgn.emplace(spec.hurst, spec.steps, spec.dt());
  auto rng = path_stream(spec.seed, 0);
  std::vector<double> channel(spec.steps);
  sample_into(spec, fgn ? &*fgn : nullptr, rng, channel, path.increments.data().data());
  return path;
}

NoisePath sample_brownian(const NoiseSpec& spec) {
  if (spec.kind != NoiseKind::brownian) throw std::invalid_argument("sample_brownian needs a brownian spec");
  return sample_path(spec);
}

NoisePath sample_fgn(const NoiseSpec& spec) {
  if (spec.kind != NoiseKind::fractional) throw std::invalid_argument("sample_fgn needs a fractional spec");
  return sample_path(spec);
}

NoiseBatch sample_noise_batch(const NoiseSpec& spec, std::size_t first_path, std::size_t n_paths) {
  spec.validate();
  if (n_paths == 0) throw std::invalid_argument("noise batch needs at least one path");
  NoiseBatch batch;
  batch.grid = uniform_grid(spec.horizon, spec.steps);
  batch.paths = n_paths;
  batch.dim = spec.dim;
  batch.increments.assign(spec.steps, Tensor(Shape{n_paths, spec.dim}));
  std::optional<FgnSampler> fgn;
  if (spec.kind == NoiseKind::fractional) fgn.emplace(spec.hurst, spec.steps, spec.dt());
  std::vector<double> channel(spec.steps);
  std::vector<double> path(spec.steps * spec.dim);
  for (std::size_t p = 0; p < n_paths; ++p) {
    auto rng = path_stream(spec.seed, first_path + p);
    sample_into(spec, fgn ? &*fgn : nullptr, rng, channel, path.data());
    for (std::size_t k = 0; k < spec.steps; ++k) {
      for (std::size_t c = 0; c < spec.dim; ++c) batch.increments[k].at(p, c) = path[k * spec.dim + c];
    }
  }
  return batch;
}

NoiseBatch NoiseBatch::coarsen(std::size_t factor) const {
  if (factor == 0 || steps() % factor != 0) {
    throw std::invalid_argument("cannot coarsen " + std::to_string(steps()) + " steps by a factor of " +
                                std::to_string(factor));
  }
  NoiseBatch out;
  out.paths = paths;
  out.dim = dim;
  for (std::size_t k = 0; k < grid.size(); k += factor) out.grid.push_back(grid[k]);
  for (std::size_t k = 0; k < steps(); k += factor) {
    Tensor sum = increments[k];
    for (std::size_t j = 1; j < factor; ++j) sum.matrix() += increments[k + j].matrix();
    out.increments.push_back(std::move(sum));
  }
  return out;
}

NoiseBatch NoiseBatch::rows(std::size_t begin, std::size_t end) const {
  if (begin >= end || end > paths) throw std::out_of_range("noise batch row range out of bounds");
  NoiseBatch out;
  out.grid = grid;
  out.paths = end - begin;
  out.dim = dim;
  out.increments.reserve(steps());
  for (const auto& inc : increments) {
    Tensor part(Shape{end - begin, dim});
    part.matrix() = inc.matrix().middleRows(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(end - begin));
    out.increments.push_back(std::move(part));
  }
  return out;
}

void write_path_csv(std::ostream& out, const NoisePath& path) {
  const Tensor cum = path.cumulative();
  out << "t";
  for (std::size_t c = 0; c < cum.cols(); ++c) out << ",channel_" << c;
  out << '\n' << std::setprecision(17);
  for (std::size_t k = 0; k < cum.rows(); ++k) {
    out << path.grid[k];
    for (std::size_t c = 0; c < cum.cols(); ++c) out << ',' << cum.at(k, c);
    out << '\n';
  }
}

}  // namespace nrdectl
