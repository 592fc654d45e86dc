#pragma once

#include <vector>

#include "nrdectl/diffcore/tensor.hpp"
#include "nrdectl/problems.hpp"

namespace nrdectl {

struct RiccatiSolution {
  std::vector<double> times;
  std::vector<RowMatrix> p;      // P(t_k)
  std::vector<RowMatrix> gains;  // K(t_k) = R^{-1} B' P(t_k), alpha* = -K x
  double value = 0.0;            // x0' P(0) x0 + int tr(sigma sigma' P) dt
};

/// Backward RK4 for -P' = A'P + PA - P B R^{-1} B' P + Q, P(T) = G, on a
/// uniform grid of `steps` intervals.
RiccatiSolution riccati_lqr_oracle(const RowMatrix& a, const RowMatrix& b, const RowMatrix& sigma, const RowMatrix& q,
                                   const RowMatrix& r, const RowMatrix& g, double horizon, std::size_t steps,
                                   const std::vector<double>& x0);

/// Riccati solution for the Markovian (H = 1/2) fBM benchmark; the value
/// includes the problem's 1/2 factor.
RiccatiSolution riccati_for(const LqFbmProblem& problem, std::size_t steps);

struct MertonSolution {
  double investment = 0.0;   // (mu1 - r) / sigma^2
  double consumption = 0.0;  // beta, constant in time
  double value = 0.0;
};

/// Log-utility optimum of the portfolio problem when mu2 = 0.
MertonSolution merton_log_oracle(const PortfolioProblem& problem);

/// Reward of a constant (investment, consumption) pair in continuous time
/// (mu2 = 0).
double merton_constant_value(const PortfolioProblem& problem, double investment, double consumption);

/// Raw policy output that the portfolio control map sends to (investment, consumption).
std::vector<double> portfolio_raw_control(double investment, double consumption);

}  // namespace nrdectl
