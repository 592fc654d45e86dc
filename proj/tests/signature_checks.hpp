#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "nrdectl/signature.hpp"

namespace sigchecks {

using Path = std::vector<std::vector<double>>;

struct Worst {
  double shuffle = 0.0;
  double chen = 0.0;
  double midpoint = 0.0;
  double reversal = 0.0;
};

inline double max_diff(const nrdectl::TruncatedSignature& a, const nrdectl::TruncatedSignature& b) {
  const auto fa = a.flatten(), fb = b.flatten();
  double m = 0.0;
  for (std::size_t i = 0; i < fa.size(); ++i) m = std::max(m, std::abs(fa[i] - fb[i]));
  return m;
}

inline Path random_path(std::mt19937_64& rng, std::size_t dim, std::size_t points) {
  std::normal_distribution<double> n(0.0, 0.5);
  Path p(points, std::vector<double>(dim, 0.0));
  for (std::size_t k = 1; k < points; ++k)
    for (std::size_t j = 0; j < dim; ++j) p[k][j] = p[k - 1][j] + n(rng);
  return p;
}

inline nrdectl::Word random_word(std::mt19937_64& rng, std::size_t dim, std::size_t len) {
  std::uniform_int_distribution<std::size_t> letter(0, dim - 1);
  nrdectl::Word w(len);
  for (auto& l : w) l = letter(rng);
  return w;
}

// Shuffle identity, Chen associativity, midpoint invariance and reversal on `count` random paths.
inline Worst run(std::uint64_t seed, std::size_t count) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> dim_dist(2, 3), pts(3, 8), len(0, 4);
  const std::size_t level = 4;
  Worst w;
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t dim = dim_dist(rng);
    Path x = random_path(rng, dim, pts(rng));
    const auto s = nrdectl::sig_of_path(x, level);

    const std::size_t lu = len(rng);
    std::uniform_int_distribution<std::size_t> lv_dist(0, level - lu);
    const auto u = random_word(rng, dim, lu);
    const auto v = random_word(rng, dim, lv_dist(rng));
    const double lhs = s.coeff(u) * s.coeff(v);
    const double rhs = nrdectl::pair(nrdectl::shuffle(u, v), s);
    w.shuffle = std::max(w.shuffle, std::abs(lhs - rhs));

    const auto a = nrdectl::sig_of_path(random_path(rng, dim, pts(rng)), level);
    const auto b = nrdectl::sig_of_path(random_path(rng, dim, pts(rng)), level);
    const auto c = nrdectl::sig_of_path(random_path(rng, dim, pts(rng)), level);
    const auto left = nrdectl::chen_concat(nrdectl::chen_concat(a, b), c);
    const auto right = nrdectl::chen_concat(a, nrdectl::chen_concat(b, c));
    w.chen = std::max(w.chen, max_diff(left, right));

    Path refined = x;
    std::uniform_int_distribution<std::size_t> seg(0, x.size() - 2);
    const std::size_t k = seg(rng);
    std::uniform_real_distribution<double> frac(0.1, 0.9);
    const double f = frac(rng);
    std::vector<double> mid(dim);
    for (std::size_t j = 0; j < dim; ++j) mid[j] = x[k][j] + f * (x[k + 1][j] - x[k][j]);
    refined.insert(refined.begin() + static_cast<std::ptrdiff_t>(k + 1), mid);
    w.midpoint = std::max(w.midpoint, max_diff(s, nrdectl::sig_of_path(refined, level)));

    Path back(x.rbegin(), x.rend());
    const auto round_trip = nrdectl::chen_concat(s, nrdectl::sig_of_path(back, level));
    w.reversal = std::max(w.reversal, max_diff(round_trip, nrdectl::TruncatedSignature::trivial(dim, level)));
  }
  return w;
}

}  // namespace sigchecks
