#include "nrdectl/oracles.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Cholesky>

#include "nrdectl/errors.hpp"

namespace nrdectl {

RiccatiSolution riccati_lqr_oracle(const RowMatrix& a, const RowMatrix& b, const RowMatrix& sigma, const RowMatrix& q,
                                   const RowMatrix& r, const RowMatrix& g, double horizon, std::size_t steps,
                                   const std::vector<double>& x0) {
  const Eigen::Index n = a.rows();
  if (a.cols() != n || b.rows() != n || sigma.rows() != n || q.rows() != n || q.cols() != n || g.rows() != n ||
      g.cols() != n || r.rows() != b.cols() || r.cols() != b.cols() || static_cast<Eigen::Index>(x0.size()) != n) {
    throw ShapeError("riccati_lqr_oracle: inconsistent matrix dimensions");
  }
  if (steps == 0 || !(horizon > 0.0)) throw std::invalid_argument("riccati_lqr_oracle needs steps >= 1 and T > 0");
  Eigen::LLT<RowMatrix> llt(r);
  if (llt.info() != Eigen::Success) throw NumericalError("R is not positive definite");
  const RowMatrix r_inv_bt = llt.solve(b.transpose());
  const RowMatrix b_r_inv_bt = b * r_inv_bt;
  const RowMatrix ss = sigma * sigma.transpose();

  // In reversed time tau = T - t: dP/dtau = A'P + PA - P B R^{-1} B' P + Q, dc/dtau = tr(ss P).
  auto rhs = [&](const RowMatrix& p) -> RowMatrix {
    return a.transpose() * p + p * a - p * b_r_inv_bt * p + q;
  };
  auto trace_rate = [&](const RowMatrix& p) { return (ss * p).trace(); };

  const double h = horizon / static_cast<double>(steps);
  RiccatiSolution out;
  out.times.resize(steps + 1);
  out.p.resize(steps + 1);
  out.gains.resize(steps + 1);
  RowMatrix p = g;
  double c = 0.0;
  out.p[steps] = p;
  for (std::size_t i = 0; i < steps; ++i) {
    const RowMatrix k1 = rhs(p);
    const RowMatrix p2 = p + 0.5 * h * k1;
    const RowMatrix k2 = rhs(p2);
    const RowMatrix p3 = p + 0.5 * h * k2;
    const RowMatrix k3 = rhs(p3);
    const RowMatrix p4 = p + h * k3;
    const RowMatrix k4 = rhs(p4);
    c += h / 6.0 * (trace_rate(p) + 2.0 * trace_rate(p2) + 2.0 * trace_rate(p3) + trace_rate(p4));
    p += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    p = 0.5 * (p + p.transpose()).eval();
    if (!p.allFinite()) {
      throw NumericalError("Riccati solution blew up at t = " + std::to_string(horizon - h * double(i + 1)));
    }
    out.p[steps - i - 1] = p;
  }
  for (std::size_t k = 0; k <= steps; ++k) {
    out.times[k] = horizon * static_cast<double>(k) / static_cast<double>(steps);
    out.gains[k] = r_inv_bt * out.p[k];
  }
  Eigen::Map<const Eigen::VectorXd> x(x0.data(), n);
  out.value = x.dot(out.p[0] * x) + c;
  return out;
}

RiccatiSolution riccati_for(const LqFbmProblem& problem, std::size_t steps) {
  if (problem.hurst_h != 0.5) throw std::invalid_argument("the Riccati oracle needs the Markovian case H = 0.5");
  RiccatiSolution s = riccati_lqr_oracle(problem.a, problem.c, problem.sigma, problem.q, problem.r, problem.g,
                                         problem.horizon_t, steps, problem.x0);
  s.value *= 0.5;
  return s;
}

double merton_constant_value(const PortfolioProblem& p, double investment, double consumption) {
  if (p.mu2 != 0.0) throw std::invalid_argument("constant-control value needs mu2 = 0");
  if (!(consumption > 0.0)) throw std::invalid_argument("consumption must be > 0");
  const double b = p.beta, t = p.horizon_t;
  const double m = (p.mu1 - p.r) * investment - consumption + p.r - 0.5 * p.sigma * p.sigma * investment * investment;
  const double e = std::exp(-b * t);
  const double lx = std::log(p.phi);
  const double int_disc = (1.0 - e) / b;
  const double int_t_disc = (1.0 - e * (1.0 + b * t)) / (b * b);
  const double running = (std::log(consumption) + lx) * int_disc + m * int_t_disc;
  const double terminal = e / b * (lx + m * t);
  return running + terminal;
}

MertonSolution merton_log_oracle(const PortfolioProblem& p) {
  if (p.mu2 != 0.0) throw std::invalid_argument("the Merton oracle needs mu2 = 0");
  MertonSolution s;
  s.investment = (p.mu1 - p.r) / (p.sigma * p.sigma);
  s.consumption = p.beta;
  s.value = merton_constant_value(p, s.investment, s.consumption);
  return s;
}

std::vector<double> portfolio_raw_control(double investment, double consumption) {
  if (!(consumption > 0.0)) throw std::invalid_argument("consumption must be > 0");
  return {investment, std::log(std::expm1(consumption))};
}

}  // namespace nrdectl
