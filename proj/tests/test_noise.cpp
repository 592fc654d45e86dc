#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "nrdectl/noise.hpp"
#include "test_util.hpp"

using namespace nrdectl;

namespace {

NoiseSpec spec_of(NoiseKind kind, double hurst, std::size_t dim, double horizon, std::size_t steps,
                  std::uint64_t seed) {
  NoiseSpec s;
  s.kind = kind;
  s.hurst = hurst;
  s.dim = dim;
  s.horizon = horizon;
  s.steps = steps;
  s.seed = seed;
  return s;
}

// Cumulative value of channel c at grid index k for path p.
std::vector<std::vector<double>> cumulative_paths(const NoiseBatch& b, std::size_t channel) {
  std::vector<std::vector<double>> out(b.paths, std::vector<double>(b.steps() + 1, 0.0));
  for (std::size_t p = 0; p < b.paths; ++p)
    for (std::size_t k = 0; k < b.steps(); ++k) out[p][k + 1] = out[p][k] + b.increments[k].at(p, channel);
  return out;
}

double ks_statistic(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(double(i) / a.size() - double(j) / b.size()));
  }
  return d;
}

}  // namespace

TEST_CASE("fbm covariance closed form") {
  CHECK(fbm_covariance(0.7, 0.7, 0.3) == doctest::Approx(std::pow(0.7, 0.6)));
  CHECK(fbm_covariance(0.4, 0.9, 0.5) == doctest::Approx(0.4));
  CHECK(fbm_covariance(1.0, 2.0, 0.3) == doctest::Approx(std::pow(2.0, 0.6) / 2.0));
  CHECK(fbm_covariance(1.0, 2.0, 0.3) == doctest::Approx(0.7579).epsilon(1e-4));
}

TEST_CASE("fgn autocovariance") {
  for (std::size_t k = 1; k < 6; ++k) CHECK(fgn_autocovariance(k, 0.5, 0.1) == doctest::Approx(0.0));
  CHECK(fgn_autocovariance(0, 0.3, 0.25) == doctest::Approx(std::pow(0.25, 0.6)));
  const double ratio = fgn_autocovariance(1, 0.3, 1.0) / fgn_autocovariance(0, 0.3, 1.0);
  CHECK(ratio == doctest::Approx(0.5 * (std::pow(2.0, 0.6) - 2.0)));
  CHECK(ratio == doctest::Approx(-0.2421).epsilon(1e-3));
  // Increment covariance from the fBM covariance.
  const double dt = 0.2, h = 0.3;
  for (std::size_t k = 0; k < 4; ++k) {
    const double s = k * dt;
    const double c = fbm_covariance(s + dt, dt, h) - fbm_covariance(s, dt, h) - fbm_covariance(s + dt, 0.0, h) +
                     fbm_covariance(s, 0.0, h);
    CHECK(fgn_autocovariance(k, h, dt) == doctest::Approx(c).epsilon(1e-12));
  }
}

TEST_CASE("brownian single step has variance T") {
  const double horizon = 1.7;
  std::vector<double> xs;
  for (std::uint64_t seed = 0; seed < 100000; ++seed) {
    xs.push_back(sample_brownian(spec_of(NoiseKind::brownian, 0.5, 1, horizon, 1, seed)).increments[0]);
  }
  const double var = testutil::sample_var(xs);
  const double se = horizon * std::sqrt(2.0 / (xs.size() - 1));
  CHECK(std::abs(var - horizon) < 3.0 * se);
}

TEST_CASE("brownian increments sum to variance T") {
  NoiseBatch b = sample_noise_batch(spec_of(NoiseKind::brownian, 0.5, 1, 2.0, 10, 3), 0, 100000);
  std::vector<double> terminal;
  for (auto& p : cumulative_paths(b, 0)) terminal.push_back(p.back());
  const double se = 2.0 * std::sqrt(2.0 / (terminal.size() - 1));
  CHECK(std::abs(testutil::sample_var(terminal) - 2.0) < 3.0 * se);
}

TEST_CASE("sampling is deterministic in the seed") {
  for (NoiseKind kind : {NoiseKind::brownian, NoiseKind::fractional}) {
    NoiseSpec s = spec_of(kind, 0.3, 2, 1.0, 16, 42);
    CHECK(sample_path(s).increments == sample_path(s).increments);
    s.seed = 43;
    CHECK_FALSE(sample_path(s).increments == sample_path(spec_of(kind, 0.3, 2, 1.0, 16, 42)).increments);
  }
}

TEST_CASE("path i is the same in any batch") {
  NoiseSpec s = spec_of(NoiseKind::fractional, 0.3, 2, 1.0, 8, 5);
  NoiseBatch all = sample_noise_batch(s, 0, 10);
  NoiseBatch part = sample_noise_batch(s, 4, 3);
  NoiseBatch sliced = all.rows(4, 7);
  for (std::size_t k = 0; k < s.steps; ++k) CHECK(part.increments[k] == sliced.increments[k]);
}

TEST_CASE("coarsen sums adjacent increments") {
  NoiseBatch fine = sample_noise_batch(spec_of(NoiseKind::brownian, 0.5, 2, 1.0, 8, 1), 0, 3);
  NoiseBatch coarse = fine.coarsen(4);
  REQUIRE(coarse.steps() == 2);
  CHECK(coarse.grid == std::vector<double>{0.0, 0.5, 1.0});
  for (std::size_t p = 0; p < 3; ++p) {
    double expect = 0.0;
    for (std::size_t k = 4; k < 8; ++k) expect += fine.increments[k].at(p, 1);
    CHECK(coarse.increments[1].at(p, 1) == doctest::Approx(expect).epsilon(1e-15));
  }
  CHECK_THROWS(fine.coarsen(3));
}

TEST_CASE("fractional increments match the fbm covariance") {
  for (double h : {0.3, 0.5, 0.7}) {
    const std::size_t k_steps = 8, n = 100000;
    NoiseBatch b = sample_noise_batch(spec_of(NoiseKind::fractional, h, 1, 1.0, k_steps, 17), 0, n);
    auto paths = cumulative_paths(b, 0);
    for (std::size_t i = 1; i <= k_steps; ++i) {
      for (std::size_t j = i; j <= k_steps; ++j) {
        double c = 0.0;
        for (auto& p : paths) c += p[i] * p[j];
        c /= n;
        const double s = double(i) / k_steps, t = double(j) / k_steps;
        const double expect = 0.5 * (std::pow(s, 2 * h) + std::pow(t, 2 * h) - std::pow(t - s, 2 * h));
        INFO("H=" << h << " i=" << i << " j=" << j);
        CHECK(std::abs(c - expect) / expect < 0.02);
      }
    }
  }
}

TEST_CASE("circulant embedding is used for H in [0.1, 0.9]") {
  for (double h : {0.1, 0.3, 0.5, 0.7, 0.9}) CHECK(FgnSampler(h, 40, 0.025).uses_circulant());
}

TEST_CASE("refined brownian path coarsened matches the coarse law") {
  const std::size_t n = 10000;
  NoiseBatch fine = sample_noise_batch(spec_of(NoiseKind::brownian, 0.5, 1, 1.0, 8, 100), 0, n).coarsen(2);
  NoiseBatch coarse = sample_noise_batch(spec_of(NoiseKind::brownian, 0.5, 1, 1.0, 4, 200), 0, n);
  const double critical = 1.628 * std::sqrt(2.0 / n);
  for (std::size_t k = 0; k < 4; ++k) {
    std::vector<double> a, b;
    for (std::size_t p = 0; p < n; ++p) {
      a.push_back(fine.increments[k].at(p, 0));
      b.push_back(coarse.increments[k].at(p, 0));
    }
    CHECK(ks_statistic(a, b) < critical);
  }
}

TEST_CASE("channels are uncorrelated") {
  for (NoiseKind kind : {NoiseKind::brownian, NoiseKind::fractional}) {
    const std::size_t n = 50000;
    NoiseBatch b = sample_noise_batch(spec_of(kind, 0.3, 2, 1.0, 4, 9), 0, n);
    for (std::size_t k = 0; k < 4; ++k) {
      std::vector<double> prod;
      for (std::size_t p = 0; p < n; ++p) prod.push_back(b.increments[k].at(p, 0) * b.increments[k].at(p, 1));
      const double se = std::sqrt(testutil::sample_var(prod) / n);
      CHECK(std::abs(testutil::sample_mean(prod)) < 3.0 * se);
    }
  }
}

TEST_CASE("spec validation") {
  CHECK_THROWS(spec_of(NoiseKind::fractional, 1.0, 1, 1.0, 4, 0).validate());
  CHECK_THROWS(spec_of(NoiseKind::fractional, 0.0, 1, 1.0, 4, 0).validate());
  CHECK_THROWS(spec_of(NoiseKind::brownian, 0.5, 1, 1.0, 0, 0).validate());
  CHECK_THROWS(spec_of(NoiseKind::brownian, 0.5, 1, -1.0, 4, 0).validate());
  CHECK_THROWS(sample_brownian(spec_of(NoiseKind::fractional, 0.3, 1, 1.0, 4, 0)));
}

TEST_CASE("path csv has one row per grid point") {
  NoisePath p = sample_path(spec_of(NoiseKind::brownian, 0.5, 2, 1.0, 5, 0));
  std::ostringstream out;
  write_path_csv(out, p);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "t,channel_0,channel_1");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 6);
  CHECK(p.cumulative().at(5, 1) == doctest::Approx(p.increments.at(0, 1) + p.increments.at(1, 1) +
                                                   p.increments.at(2, 1) + p.increments.at(3, 1) +
                                                   p.increments.at(4, 1)));
}
