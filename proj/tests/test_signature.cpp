#include <doctest.h>

#include <cmath>
#include <sstream>

#include "nrdectl/signature.hpp"
#include "signature_checks.hpp"

using namespace nrdectl;

TEST_CASE("segment signature is the tensor exponential") {
  std::vector<double> zero{0.0, 0.0};
  TruncatedSignature s = sig_of_segment(zero, 3);
  CHECK(s.levels[0][0] == 1.0);
  for (std::size_t n = 1; n <= 3; ++n)
    for (double v : s.levels[n]) CHECK(v == 0.0);

  std::vector<double> time{0.8};
  TruncatedSignature t = sig_of_segment(time, 5);
  double fact = 1.0;
  for (std::size_t n = 1; n <= 5; ++n) {
    fact *= n;
    CHECK(t.levels[n][0] == doctest::Approx(std::pow(0.8, n) / fact).epsilon(1e-14));
  }

  std::vector<double> v{1.0, 2.0};
  TruncatedSignature l2 = sig_of_segment(v, 2);
  CHECK(l2.levels[2] == std::vector<double>{0.5, 1.0, 1.0, 2.0});
}

TEST_CASE("chen concatenation basics") {
  std::vector<double> v{0.3, -1.2, 0.5};
  TruncatedSignature s = sig_of_segment(v, 3);
  CHECK(sigchecks::max_diff(chen_concat(s, TruncatedSignature::trivial(3, 3)), s) == 0.0);
  CHECK(sigchecks::max_diff(chen_concat(TruncatedSignature::trivial(3, 3), s), s) == 0.0);
  std::vector<double> v2{0.6, -2.4, 1.0};
  CHECK(sigchecks::max_diff(chen_concat(s, s), sig_of_segment(v2, 3)) < 1e-14);
  CHECK_THROWS(chen_concat(s, sig_of_segment(v, 2)));
}

TEST_CASE("L-shaped path areas") {
  std::vector<double> e1{1.0, 0.0}, e2{0.0, 1.0};
  TruncatedSignature s = chen_concat(sig_of_segment(e1, 2), sig_of_segment(e2, 2));
  CHECK(s.coeff({0, 1}) == doctest::Approx(1.0));
  CHECK(s.coeff({1, 0}) == 0.0);
}

TEST_CASE("path signature level one and the time channel") {
  std::mt19937_64 rng(4);
  auto x = sigchecks::random_path(rng, 3, 12);
  TruncatedSignature s = sig_of_path(x, 2);
  for (std::size_t j = 0; j < 3; ++j) CHECK(s.coeff({j}) == doctest::Approx(x.back()[j] - x.front()[j]));
  auto aug = sample_time_augmented_path(1, 0, 2, 30, 1.7, 1.0);
  CHECK(sig_of_path(aug, 3).coeff({0}) == doctest::Approx(1.7));
  CHECK_THROWS(sig_of_path({{0.0}}, 2));
}

TEST_CASE("level-two word equals quadrature of the iterated integral") {
  auto x = sample_time_augmented_path(9, 3, 2, 99, 1.0, 1.0);
  REQUIRE(x.size() == 100);
  TruncatedSignature s = sig_of_path(x, 2);
  // Independent quadrature: integrate (X^1_u - X^1_0) dX^2_u exactly on each linear piece.
  double direct = 0.0;
  for (std::size_t k = 1; k < x.size(); ++k) {
    const double a0 = x[k - 1][1] - x[0][1], a1 = x[k][1] - x[0][1];
    direct += 0.5 * (a0 + a1) * (x[k][2] - x[k - 1][2]);
  }
  CHECK(std::abs(s.coeff({1, 2}) - direct) < 1e-10);
  CHECK(std::abs(iterated_integral(x, 1, 2) - direct) < 1e-12);
}

TEST_CASE("shuffle products") {
  CHECK(shuffle({1}, {2}) == WordSum{{{1, 2}, 1}, {{2, 1}, 1}});
  CHECK(shuffle({1, 2}, {}) == WordSum{{{1, 2}, 1}});
  CHECK(shuffle({1, 2}, {3}) == WordSum{{{1, 2, 3}, 1}, {{1, 3, 2}, 1}, {{3, 1, 2}, 1}});
  WordSum repeated = shuffle({1}, {1});
  CHECK(repeated == WordSum{{{1, 1}, 2}});
  std::mt19937_64 rng(1);
  for (int t = 0; t < 50; ++t) {
    std::uniform_int_distribution<std::size_t> len(0, 3);
    const auto u = sigchecks::random_word(rng, 3, len(rng));
    const auto v = sigchecks::random_word(rng, 3, len(rng));
    long total = 0;
    for (const auto& [w, c] : shuffle(u, v)) {
      CHECK(w.size() == u.size() + v.size());
      total += c;
    }
    long binom = 1;
    for (std::size_t i = 1; i <= u.size(); ++i) binom = binom * long(v.size() + i) / long(i);
    CHECK(total == binom);
  }
}

TEST_CASE("signature algebra on random paths") {
  sigchecks::Worst w = sigchecks::run(17, 200);
  CHECK(w.shuffle < 1e-10);
  CHECK(w.chen < 1e-12);
  CHECK(w.midpoint < 1e-12);
  CHECK(w.reversal < 1e-10);
}

TEST_CASE("guard rails") {
  CHECK_THROWS(check_signature_limits(5, 2));
  CHECK_THROWS(check_signature_limits(2, 6));
  CHECK_NOTHROW(check_signature_limits(4, 5));
  CHECK(TruncatedSignature::trivial(3, 2).feature_count() == 13);
}

TEST_CASE("regression recovers a signature word exactly") {
  UniversalityExperiment exp;
  exp.target = UniversalityTarget::word;
  exp.word = {2, 1, 0};
  exp.level = 3;
  exp.train_samples = 400;
  exp.test_samples = 200;
  exp.ridge = 1e-12;
  UniversalityResult r = universality_fit(exp);
  CHECK(r.failure_rate == 0.0);
  CHECK(r.test_rmse < 1e-6);
}

TEST_CASE("iterated integral is exact at level two") {
  UniversalityExperiment exp;
  exp.target = UniversalityTarget::iterated_integral;
  exp.train_samples = 500;
  exp.test_samples = 300;
  exp.ridge = 1e-12;
  exp.path_scale = 1.0;
  auto rows = universality_sweep(exp, 2);
  REQUIRE(rows.size() == 2);
  CHECK(rows[1].test_rmse < 1e-6 * rows[0].test_rmse);
}

TEST_CASE("nonlinear target error falls with the level") {
  UniversalityExperiment exp;
  exp.train_samples = 1000;
  exp.test_samples = 500;
  auto rows = universality_sweep(exp, 4);
  for (std::size_t i = 1; i < rows.size(); ++i) CHECK(rows[i].test_rmse < rows[i - 1].test_rmse);
  std::ostringstream a, b;
  write_universality_csv(a, rows);
  write_universality_csv(b, universality_sweep(exp, 4));
  CHECK(a.str() == b.str());
  CHECK(a.str().rfind("N,train_rmse,test_rmse,epsilon,failure_rate\n", 0) == 0);
}

TEST_CASE("zero ridge on a rank-deficient design asks for a ridge") {
  UniversalityExperiment exp;
  exp.level = 3;
  exp.train_samples = 10;
  exp.test_samples = 5;
  exp.ridge = 0.0;
  try {
    universality_fit(exp);
    FAIL("expected an error");
  } catch (const std::exception& e) {
    CHECK(std::string(e.what()).find("ridge") != std::string::npos);
  }
}
