#include "nrdectl/problems.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <random>
#include <stdexcept>

#include "nrdectl/errors.hpp"
#include "nrdectl/random.hpp"

namespace nrdectl {

namespace {

Var const_matrix(const RowMatrix& m) { return constant(Tensor::from_matrix(m)); }

/// x M' for x [B, n], M [m, n].
Var apply(const Var& x, const RowMatrix& m) { return affine(x, const_matrix(m), Var()); }

/// Row-wise x' M x as [B, 1].
Var quadratic(const Var& x, const RowMatrix& m) { return row_sum(mul(apply(x, m), x)); }

nlohmann::json matrix_json(const RowMatrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

void require_shape(const RowMatrix& m, Eigen::Index rows, Eigen::Index cols, const char* name) {
  if (m.rows() != rows || m.cols() != cols) {
    throw ShapeError(std::string(name) + " must be " + std::to_string(rows) + "x" + std::to_string(cols) + ", got " +
                     std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
  }
}

void require_positive_definite(const RowMatrix& m, const char* name) {
  const bool symmetric = (m - m.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * (1.0 + m.cwiseAbs().maxCoeff());
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (!symmetric || llt.info() != Eigen::Success) {
    throw std::invalid_argument(std::string(name) + " must be symmetric positive definite");
  }
}

void require_positive(const Tensor& t, const char* what) {
  for (double v : t.data()) {
    if (!(v > 0.0)) throw NumericalError(std::string(what) + " must be strictly positive, got " + std::to_string(v));
  }
}

}  // namespace

const char* quadrature_name(Quadrature q) { return q == Quadrature::left ? "left" : "trapezoid"; }

Quadrature parse_quadrature(const std::string& name) {
  if (name == "left") return Quadrature::left;
  if (name == "trapezoid") return Quadrature::trapezoid;
  throw std::invalid_argument("unknown quadrature '" + name + "' (expected left or trapezoid)");
}

NoiseSpec ControlProblem::noise_spec(std::size_t steps, std::uint64_t seed) const {
  NoiseSpec spec;
  spec.kind = noise_kind();
  spec.hurst = hurst();
  spec.dim = noise_dim();
  spec.horizon = horizon();
  spec.steps = steps;
  spec.seed = seed;
  return spec;
}

Var path_functional(const ControlProblem& problem, const TrajectoryBatch& batch, Quadrature quadrature) {
  const std::size_t steps = batch.steps();
  if (steps == 0) throw ShapeError("path_functional: empty trajectory batch");
  if (batch.states.size() != steps + 1 || batch.controls.size() != steps + 1) {
    throw ShapeError("path_functional: batch has inconsistent lengths");
  }
  const bool has_features = !batch.features.empty();
  auto inputs = [&](std::size_t k) {
    return SdeInputs{batch.times[k], batch.states[k], has_features ? batch.features[k] : Var(), Var(),
                     batch.controls[k]};
  };
  Var total;
  auto accumulate = [&](const Var& term) { total = total ? add(total, term) : term; };
  if (quadrature == Quadrature::left) {
    for (std::size_t k = 0; k < steps; ++k) {
      accumulate(scale(problem.running_cost(inputs(k)), batch.times[k + 1] - batch.times[k]));
    }
  } else {
    Var prev = problem.running_cost(inputs(0));
    for (std::size_t k = 0; k < steps; ++k) {
      Var next = problem.running_cost(inputs(k + 1));
      accumulate(scale(add(prev, next), 0.5 * (batch.times[k + 1] - batch.times[k])));
      prev = next;
    }
  }
  accumulate(problem.terminal_cost(inputs(steps)));
  return total;
}

Var objective(const ControlProblem& problem, const TrajectoryBatch& batch, Quadrature quadrature) {
  Var value = path_functional(problem, batch, quadrature);
  return problem.sense() == Sense::maximize ? scale(value, -1.0) : value;
}

DelayMatrices generate_delay_matrices(std::uint64_t seed, std::size_t d, std::size_t d_a, std::size_t d_w,
                                      double bound) {
  std::mt19937_64 rng(derive_seed(seed, "delay-matrices"));
  std::uniform_real_distribution<double> dist(-bound, bound);
  auto draw = [&](std::size_t rows, std::size_t cols) {
    RowMatrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = dist(rng);
    }
    return m;
  };
  DelayMatrices out;
  out.a1 = draw(d, d);
  out.a3 = draw(d, d);
  out.b = draw(d, d_a);
  out.sigma = draw(d, d_w);
  out.a2 = RowMatrix::Zero(d, d);
  return out;
}

// ---------------------------------------------------------------- LqDelayProblem

LqDelayProblem LqDelayProblem::with_random_matrices(std::size_t d, std::size_t d_a, std::size_t d_w,
                                                    std::uint64_t seed, double q_scale, double r_scale,
                                                    double g_scale, double entry_bound) {
  LqDelayProblem p;
  p.d = d;
  p.d_a = d_a;
  p.d_w = d_w;
  p.matrix_seed = seed;
  DelayMatrices m = generate_delay_matrices(seed, d, d_a, d_w, entry_bound);
  p.a1 = m.a1;
  p.a2 = m.a2;
  p.a3 = m.a3;
  p.b = m.b;
  p.sigma = m.sigma;
  p.q = q_scale * RowMatrix::Identity(d, d);
  p.r = r_scale * RowMatrix::Identity(d_a, d_a);
  p.g = g_scale * RowMatrix::Identity(d, d);
  return p;
}

void LqDelayProblem::validate() const {
  const auto n = static_cast<Eigen::Index>(d);
  const auto na = static_cast<Eigen::Index>(d_a);
  const auto nw = static_cast<Eigen::Index>(d_w);
  require_shape(a1, n, n, "A1");
  require_shape(a2, n, n, "A2");
  require_shape(a3, n, n, "A3");
  require_shape(b, n, na, "B");
  require_shape(sigma, n, nw, "sigma");
  require_shape(q, n, n, "Q");
  require_shape(r, na, na, "R");
  require_shape(g, n, n, "G");
  require_positive_definite(r, "R");
  if (!(delta > 0.0)) throw std::invalid_argument("delay window delta must be > 0");
  if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be >= 0");
  if (!(horizon_t > 0.0)) throw std::invalid_argument("horizon T must be > 0");
}

Tensor LqDelayProblem::initial_state() const { return Tensor(Shape{d}, phi); }

Var LqDelayProblem::drift(const SdeInputs& in) const {
  Var out = add(apply(in.x, a1), apply(in.x_delayed, a3));
  if (!a2.isZero(0.0)) out = add(out, apply(in.features, a2));
  return add(out, apply(in.control, b));
}

Var LqDelayProblem::diffusion_times(const SdeInputs&, const Var& dw) const { return apply(dw, sigma); }

Var LqDelayProblem::z(const SdeInputs& in) const {
  const RowMatrix coupling = std::exp(lambda * delta) * a3;
  return add(in.x, apply(in.features, coupling));
}

Var LqDelayProblem::running_cost(const SdeInputs& in) const {
  return add(quadratic(z(in), q), quadratic(in.control, r));
}

Var LqDelayProblem::terminal_cost(const SdeInputs& in) const { return quadratic(z(in), g); }

nlohmann::json LqDelayProblem::to_json() const {
  return {{"kind", name()},         {"d", d},          {"d_a", d_a},          {"d_w", d_w},
          {"lambda", lambda},       {"delta", delta},  {"horizon", horizon_t}, {"phi", phi},
          {"matrix_seed", matrix_seed}, {"A1", matrix_json(a1)}, {"A2", matrix_json(a2)}, {"A3", matrix_json(a3)},
          {"B", matrix_json(b)},    {"sigma", matrix_json(sigma)}, {"Q", matrix_json(q)}, {"R", matrix_json(r)},
          {"G", matrix_json(g)}};
}

Var lq_delay_cost(const TrajectoryBatch& batch, const LqDelayProblem& problem) {
  return path_functional(problem, batch, Quadrature::left);
}

// ---------------------------------------------------------------- LqFbmProblem

LqFbmProblem LqFbmProblem::benchmark(double hurst) {
  LqFbmProblem p;
  p.a = RowMatrix(2, 2);
  p.a << 1.2, 0.2, 0.2, 1.2;
  p.c = RowMatrix(2, 2);
  p.c << 1.5, -0.3, -0.3, 1.5;
  p.sigma = RowMatrix::Identity(2, 2);
  p.q = 0.1 * RowMatrix::Identity(2, 2);
  p.r = 0.1 * RowMatrix::Identity(2, 2);
  p.g = 0.1 * RowMatrix::Identity(2, 2);
  p.x0 = {0.0, 0.0};
  p.hurst_h = hurst;
  p.horizon_t = 1.0;
  return p;
}

void LqFbmProblem::validate() const {
  const Eigen::Index n = a.rows();
  require_shape(a, n, n, "A");
  if (c.rows() != n) throw ShapeError("C must have as many rows as A");
  require_shape(sigma, n, sigma.cols(), "sigma");
  require_shape(q, n, n, "Q");
  require_shape(r, c.cols(), c.cols(), "R");
  require_shape(g, n, n, "G");
  require_positive_definite(r, "R");
  if (static_cast<Eigen::Index>(x0.size()) != n) throw ShapeError("x0 must have the state dimension");
  if (!(hurst_h > 0.0 && hurst_h < 1.0)) throw std::invalid_argument("Hurst index must lie in (0, 1)");
  if (!(horizon_t > 0.0)) throw std::invalid_argument("horizon T must be > 0");
}

Var LqFbmProblem::drift(const SdeInputs& in) const { return add(apply(in.x, a), apply(in.control, c)); }

Var LqFbmProblem::diffusion_times(const SdeInputs&, const Var& dw) const { return apply(dw, sigma); }

Var LqFbmProblem::running_cost(const SdeInputs& in) const {
  return scale(add(quadratic(in.x, q), quadratic(in.control, r)), 0.5);
}

Var LqFbmProblem::terminal_cost(const SdeInputs& in) const { return scale(quadratic(in.x, g), 0.5); }

nlohmann::json LqFbmProblem::to_json() const {
  return {{"kind", name()},         {"hurst", hurst_h},       {"horizon", horizon_t}, {"x0", x0},
          {"A", matrix_json(a)},    {"C", matrix_json(c)},    {"sigma", matrix_json(sigma)},
          {"Q", matrix_json(q)},    {"R", matrix_json(r)},    {"G", matrix_json(g)}};
}

Var lq_fbm_cost(const TrajectoryBatch& batch, const LqFbmProblem& problem) {
  return path_functional(problem, batch, Quadrature::left);
}

// ---------------------------------------------------------------- PortfolioProblem

void PortfolioProblem::validate() const {
  if (!(sigma > 0.0)) throw std::invalid_argument("volatility sigma must be > 0");
  if (!(lambda > 0.0)) throw std::invalid_argument("complete memory needs lambda > 0");
  if (!(beta > 0.0)) throw std::invalid_argument("discount rate beta must be > 0");
  if (!(phi > 0.0)) throw std::invalid_argument("initial wealth phi must be > 0");
  if (!(horizon_t > 0.0)) throw std::invalid_argument("horizon T must be > 0");
  if ((r + lambda) * (r + lambda) + 4.0 * mu2 < 0.0) throw std::invalid_argument("eta is not real for these parameters");
}

std::optional<DelayFeature> PortfolioProblem::delay_feature() const {
  return DelayFeature{lambda, std::numeric_limits<double>::infinity()};
}

double PortfolioProblem::eta() const {
  const double s = r + lambda;
  return 0.5 * (std::sqrt(s * s + 4.0 * mu2) - s);
}

Var PortfolioProblem::admissible_control(const Var& raw) const {
  return concat({slice(raw, 0, 1), softplus(slice(raw, 1, 2))});
}

Var PortfolioProblem::drift(const SdeInputs& in) const {
  Var invest = slice(in.control, 0, 1);
  Var consume = slice(in.control, 1, 2);
  Var rate = shift(sub(scale(invest, mu1 - r), consume), r);
  Var out = mul(rate, in.x);
  if (mu2 != 0.0) out = add(out, scale(in.features, mu2));
  return out;
}

Var PortfolioProblem::diffusion_times(const SdeInputs& in, const Var& dw) const {
  return mul(scale(mul(slice(in.control, 0, 1), in.x), sigma), dw);
}

void PortfolioProblem::check_state(const Tensor& x, std::size_t step) const {
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0)) {
      throw NumericalError("wealth became nonpositive (" + std::to_string(x[i]) + ") on trajectory " +
                           std::to_string(i) + " after step " + std::to_string(step) +
                           "; log utility is undefined there, try a smaller learning rate or a finer grid");
    }
  }
}

Var PortfolioProblem::running_cost(const SdeInputs& in) const {
  Var consumption = mul(slice(in.control, 1, 2), in.x);
  require_positive(consumption.value(), "consumption");
  return scale(log(consumption), std::exp(-beta * in.t));
}

Var PortfolioProblem::terminal_cost(const SdeInputs& in) const {
  Var wealth = in.x;
  const double e = eta();
  if (e != 0.0) wealth = add(wealth, scale(in.features, e));
  require_positive(wealth.value(), "terminal wealth");
  return scale(log(wealth), std::exp(-beta * horizon_t) / beta);
}

nlohmann::json PortfolioProblem::to_json() const {
  return {{"kind", name()}, {"mu1", mu1},       {"mu2", mu2},   {"r", r},     {"sigma", sigma},
          {"lambda", lambda}, {"beta", beta}, {"horizon", horizon_t}, {"phi", phi}};
}

Var portfolio_reward(const TrajectoryBatch& batch, const PortfolioProblem& problem) {
  return path_functional(problem, batch, Quadrature::left);
}

}  // namespace nrdectl
