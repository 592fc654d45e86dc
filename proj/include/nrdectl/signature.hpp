#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <vector>

namespace nrdectl {

constexpr std::size_t kMaxSignatureLevel = 5;
constexpr std::size_t kMaxSignatureDim = 4;

/// Letters index channels; 0 is the time channel for time-augmented paths.
using Word = std::vector<std::size_t>;

/// Dense truncated signature: levels[n] holds dim^n coefficients, row-major
/// in the word's letters.
struct TruncatedSignature {
  std::size_t dim = 0;
  std::size_t level = 0;
  std::vector<std::vector<double>> levels;

  static TruncatedSignature trivial(std::size_t dim, std::size_t level);
  double coeff(const Word& word) const;
  /// Levels 0..N concatenated (level 0 first).
  std::vector<double> flatten() const;
  std::size_t feature_count() const;
};

void check_signature_limits(std::size_t dim, std::size_t level);

/// Tensor exponential of one linear segment: level n is v^{(x)n} / n!.
TruncatedSignature sig_of_segment(std::span<const double> increment, std::size_t level);
/// Truncated tensor product (Chen's identity).
TruncatedSignature chen_concat(const TruncatedSignature& a, const TruncatedSignature& b);
/// Signature of the piecewise-linear interpolation of `points` (each of size dim).
TruncatedSignature sig_of_path(const std::vector<std::vector<double>>& points, std::size_t level);

/// Formal sum of words with integer multiplicities.
using WordSum = std::map<Word, long>;

WordSum shuffle(const Word& u, const Word& v);
double pair(const WordSum& sum, const TruncatedSignature& sig);

/// Points of a path with time in channel 0 and a Brownian-like random walk in
/// the other channels.
std::vector<std::vector<double>> sample_time_augmented_path(std::uint64_t seed, std::uint64_t index,
                                                            std::size_t channels, std::size_t segments,
                                                            double horizon = 1.0, double scale = 1.0);

/// int X^i dX^j along a piecewise-linear path, exact midpoint sum.
double iterated_integral(const std::vector<std::vector<double>>& points, std::size_t i, std::size_t j);

/// Terminal value of dZ = cos(Z) dX^1 + sin(Z) dX^2, Z_0 = 0, solved along the
/// piecewise-linear path with RK4 substeps.
double nonlinear_rde_terminal(const std::vector<std::vector<double>>& points, std::size_t substeps = 16);

enum class UniversalityTarget { word, iterated_integral, nonlinear_rde };

struct UniversalityExperiment {
  UniversalityTarget target = UniversalityTarget::nonlinear_rde;
  Word word{1, 2};
  std::size_t level = 2;
  std::size_t train_samples = 2000;
  std::size_t test_samples = 1000;
  std::size_t segments = 20;
  double path_scale = 0.5;
  double ridge = 1e-8;
  /// epsilon = epsilon_fraction * sd(F) over the training sample.
  double epsilon_fraction = 0.1;
  std::uint64_t seed = 0;
};

struct UniversalityResult {
  std::size_t level = 0;
  double train_rmse = 0.0;
  double test_rmse = 0.0;
  double epsilon = 0.0;
  double failure_rate = 0.0;
  std::vector<double> functional;  // coefficients against flatten()
};

double universality_target(const UniversalityExperiment& exp, const std::vector<std::vector<double>>& points);

/// Ridge regression of F onto signature features; failure rate is the
/// held-out fraction with |F - <l, S>| >= epsilon.
UniversalityResult universality_fit(const UniversalityExperiment& exp);

/// universality_fit for N = 1..n_max on the same samples.
std::vector<UniversalityResult> universality_sweep(UniversalityExperiment exp, std::size_t n_max);
void write_universality_csv(std::ostream& out, const std::vector<UniversalityResult>& rows);

}  // namespace nrdectl
