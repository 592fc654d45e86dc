#include "nrdectl/signature.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "nrdectl/random.hpp"

namespace nrdectl {

void check_signature_limits(std::size_t dim, std::size_t level) {
  if (dim == 0 || dim > kMaxSignatureDim) {
    throw std::invalid_argument("signature dimension " + std::to_string(dim) + " outside 1.." +
                                std::to_string(kMaxSignatureDim));
  }
  if (level > kMaxSignatureLevel) {
    throw std::invalid_argument("signature level " + std::to_string(level) + " exceeds the limit " +
                                std::to_string(kMaxSignatureLevel));
  }
}

TruncatedSignature TruncatedSignature::trivial(std::size_t dim, std::size_t level) {
  check_signature_limits(dim, level);
  TruncatedSignature s;
  s.dim = dim;
  s.level = level;
  std::size_t size = 1;
  for (std::size_t n = 0; n <= level; ++n) {
    s.levels.emplace_back(size, 0.0);
    size *= dim;
  }
  s.levels[0][0] = 1.0;
  return s;
}

double TruncatedSignature::coeff(const Word& word) const {
  if (word.size() > level) throw std::invalid_argument("word longer than the truncation level");
  std::size_t index = 0;
  for (std::size_t letter : word) {
    if (letter >= dim) throw std::invalid_argument("word letter outside the alphabet");
    index = index * dim + letter;
  }
  return levels[word.size()][index];
}

std::vector<double> TruncatedSignature::flatten() const {
  std::vector<double> out;
  out.reserve(feature_count());
  for (const auto& l : levels) out.insert(out.end(), l.begin(), l.end());
  return out;
}

std::size_t TruncatedSignature::feature_count() const {
  std::size_t total = 0;
  for (const auto& l : levels) total += l.size();
  return total;
}

TruncatedSignature sig_of_segment(std::span<const double> increment, std::size_t level) {
  TruncatedSignature s = TruncatedSignature::trivial(increment.size(), level);
  const std::size_t d = increment.size();
  for (std::size_t n = 1; n <= level; ++n) {
    const auto& prev = s.levels[n - 1];
    auto& cur = s.levels[n];
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < prev.size(); ++i) {
      for (std::size_t j = 0; j < d; ++j) cur[i * d + j] = prev[i] * increment[j] * inv_n;
    }
  }
  return s;
}

TruncatedSignature chen_concat(const TruncatedSignature& a, const TruncatedSignature& b) {
  if (a.level != b.level) throw std::invalid_argument("chen_concat: signature levels differ");
  if (a.dim != b.dim) throw std::invalid_argument("chen_concat: signature dimensions differ");
  TruncatedSignature out = TruncatedSignature::trivial(a.dim, a.level);
  out.levels[0][0] = 0.0;
  for (std::size_t n = 0; n <= a.level; ++n) {
    auto& cur = out.levels[n];
    for (std::size_t k = 0; k <= n; ++k) {
      const auto& left = a.levels[k];
      const auto& right = b.levels[n - k];
      const std::size_t rs = right.size();
      for (std::size_t i = 0; i < left.size(); ++i) {
        const double l = left[i];
        if (l == 0.0) continue;
        double* dst = cur.data() + i * rs;
        for (std::size_t j = 0; j < rs; ++j) dst[j] += l * right[j];
      }
    }
  }
  return out;
}

TruncatedSignature sig_of_path(const std::vector<std::vector<double>>& points, std::size_t level) {
  if (points.size() < 2) throw std::invalid_argument("sig_of_path needs at least two points");
  const std::size_t d = points.front().size();
  TruncatedSignature acc = TruncatedSignature::trivial(d, level);
  std::vector<double> inc(d);
  for (std::size_t k = 1; k < points.size(); ++k) {
    if (points[k].size() != d) throw std::invalid_argument("sig_of_path: points have different dimensions");
    for (std::size_t j = 0; j < d; ++j) inc[j] = points[k][j] - points[k - 1][j];
    acc = chen_concat(acc, sig_of_segment(inc, level));
  }
  return acc;
}

namespace {

void shuffle_into(const Word& u, std::size_t i, const Word& v, std::size_t j, Word& prefix, WordSum& out) {
  if (i == u.size() && j == v.size()) {
    ++out[prefix];
    return;
  }
  if (i < u.size()) {
    prefix.push_back(u[i]);
    shuffle_into(u, i + 1, v, j, prefix, out);
    prefix.pop_back();
  }
  if (j < v.size()) {
    prefix.push_back(v[j]);
    shuffle_into(u, i, v, j + 1, prefix, out);
    prefix.pop_back();
  }
}

}  // namespace

WordSum shuffle(const Word& u, const Word& v) {
  WordSum out;
  Word prefix;
  prefix.reserve(u.size() + v.size());
  shuffle_into(u, 0, v, 0, prefix, out);
  return out;
}

double pair(const WordSum& sum, const TruncatedSignature& sig) {
  double total = 0.0;
  for (const auto& [word, count] : sum) total += static_cast<double>(count) * sig.coeff(word);
  return total;
}

std::vector<std::vector<double>> sample_time_augmented_path(std::uint64_t seed, std::uint64_t index,
                                                            std::size_t channels, std::size_t segments,
                                                            double horizon, double scale) {
  if (segments == 0) throw std::invalid_argument("a path needs at least one segment");
  auto rng = path_stream(seed, index);
  std::normal_distribution<double> normal;
  const double dt = horizon / static_cast<double>(segments);
  const double sd = scale * std::sqrt(dt);
  std::vector<std::vector<double>> points(segments + 1, std::vector<double>(channels + 1, 0.0));
  for (std::size_t k = 1; k <= segments; ++k) {
    points[k][0] = horizon * static_cast<double>(k) / static_cast<double>(segments);
    for (std::size_t c = 1; c <= channels; ++c) points[k][c] = points[k - 1][c] + sd * normal(rng);
  }
  return points;
}

double iterated_integral(const std::vector<std::vector<double>>& points, std::size_t i, std::size_t j) {
  double total = 0.0;
  for (std::size_t k = 1; k < points.size(); ++k) {
    const double xi = points[k - 1][i] - points[0][i];
    const double dxi = points[k][i] - points[k - 1][i];
    const double dxj = points[k][j] - points[k - 1][j];
    total += (xi + 0.5 * dxi) * dxj;
  }
  return total;
}

double nonlinear_rde_terminal(const std::vector<std::vector<double>>& points, std::size_t substeps) {
  if (substeps == 0) throw std::invalid_argument("substeps must be positive");
  double z = 0.0;
  for (std::size_t k = 1; k < points.size(); ++k) {
    const double a = (points[k][1] - points[k - 1][1]) / static_cast<double>(substeps);
    const double b = (points[k][2] - points[k - 1][2]) / static_cast<double>(substeps);
    auto f = [&](double y) { return std::cos(y) * a + std::sin(y) * b; };
    for (std::size_t s = 0; s < substeps; ++s) {
      const double k1 = f(z);
      const double k2 = f(z + 0.5 * k1);
      const double k3 = f(z + 0.5 * k2);
      const double k4 = f(z + k3);
      z += (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0;
    }
  }
  return z;
}

double universality_target(const UniversalityExperiment& exp, const std::vector<std::vector<double>>& points) {
  switch (exp.target) {
    case UniversalityTarget::word: return sig_of_path(points, exp.word.size()).coeff(exp.word);
    case UniversalityTarget::iterated_integral: return iterated_integral(points, 1, 2);
    case UniversalityTarget::nonlinear_rde: return nonlinear_rde_terminal(points);
  }
  return 0.0;
}

namespace {

struct Sample {
  Eigen::MatrixXd features;
  Eigen::VectorXd targets;
};

Sample build_sample(const UniversalityExperiment& exp, std::uint64_t seed, std::size_t count) {
  Sample s;
  for (std::size_t i = 0; i < count; ++i) {
    const auto points = sample_time_augmented_path(seed, i, 2, exp.segments, 1.0, exp.path_scale);
    const auto feats = sig_of_path(points, exp.level).flatten();
    if (i == 0) {
      s.features.resize(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(feats.size()));
      s.targets.resize(static_cast<Eigen::Index>(count));
    }
    s.features.row(static_cast<Eigen::Index>(i)) =
        Eigen::Map<const Eigen::RowVectorXd>(feats.data(), static_cast<Eigen::Index>(feats.size()));
    s.targets(static_cast<Eigen::Index>(i)) = universality_target(exp, points);
  }
  return s;
}

double rmse(const Eigen::VectorXd& residual) { return std::sqrt(residual.squaredNorm() / double(residual.size())); }

}  // namespace

UniversalityResult universality_fit(const UniversalityExperiment& exp) {
  check_signature_limits(3, exp.level);
  if (exp.train_samples < 2 || exp.test_samples < 1) throw std::invalid_argument("universality_fit needs samples");
  if (!(exp.ridge >= 0.0)) throw std::invalid_argument("ridge must be >= 0");
  const Sample train = build_sample(exp, derive_seed(exp.seed, "sig-train"), exp.train_samples);
  const Sample test = build_sample(exp, derive_seed(exp.seed, "sig-test"), exp.test_samples);

  Eigen::MatrixXd gram = train.features.transpose() * train.features;
  const Eigen::VectorXd rhs = train.features.transpose() * train.targets;
  Eigen::VectorXd w;
  if (exp.ridge == 0.0) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(train.features);
    if (qr.rank() < train.features.cols()) {
      throw std::runtime_error("signature regression is singular without regularization; use ridge > 0");
    }
    w = qr.solve(train.targets);
  } else {
    gram.diagonal().array() += exp.ridge;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
    if (ldlt.info() != Eigen::Success) throw std::runtime_error("signature regression failed to factorize");
    w = ldlt.solve(rhs);
  }

  UniversalityResult out;
  out.level = exp.level;
  out.train_rmse = rmse(train.targets - train.features * w);
  const Eigen::VectorXd test_residual = test.targets - test.features * w;
  out.test_rmse = rmse(test_residual);
  const double mean = train.targets.mean();
  const double sd = std::sqrt((train.targets.array() - mean).square().sum() / double(train.targets.size() - 1));
  out.epsilon = exp.epsilon_fraction * sd;
  std::size_t failures = 0;
  for (Eigen::Index i = 0; i < test_residual.size(); ++i) {
    if (std::abs(test_residual(i)) >= out.epsilon) ++failures;
  }
  out.failure_rate = static_cast<double>(failures) / static_cast<double>(test_residual.size());
  out.functional.assign(w.data(), w.data() + w.size());
  return out;
}

std::vector<UniversalityResult> universality_sweep(UniversalityExperiment exp, std::size_t n_max) {
  check_signature_limits(3, n_max);
  std::vector<UniversalityResult> rows;
  for (std::size_t n = 1; n <= n_max; ++n) {
    exp.level = n;
    rows.push_back(universality_fit(exp));
  }
  return rows;
}

void write_universality_csv(std::ostream& out, const std::vector<UniversalityResult>& rows) {
  out << "N,train_rmse,test_rmse,epsilon,failure_rate\n" << std::setprecision(17);
  for (const auto& r : rows) {
    out << r.level << ',' << r.train_rmse << ',' << r.test_rmse << ',' << r.epsilon << ',' << r.failure_rate << '\n';
  }
}

}  // namespace nrdectl
