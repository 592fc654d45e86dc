#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "nrdectl/dynamics.hpp"
#include "nrdectl/noise.hpp"

namespace nrdectl {

enum class Sense { minimize, maximize };
enum class Quadrature { left, trapezoid };

const char* quadrature_name(Quadrature q);
Quadrature parse_quadrature(const std::string& name);

/// An SDE system together with its goal functional
///   J = E[ int_0^T f dt + g(T) ].
/// Costs are returned in the problem's own sign; `objective` flips
/// maximization problems so the trainer always minimizes.
class ControlProblem : public SdeSystem {
 public:
  virtual std::string name() const = 0;
  virtual Sense sense() const { return Sense::minimize; }
  virtual double horizon() const = 0;
  virtual NoiseKind noise_kind() const { return NoiseKind::brownian; }
  virtual double hurst() const { return 0.5; }

  /// f(t, X_t, Y_t, alpha_t) as [B, 1].
  virtual Var running_cost(const SdeInputs& in) const = 0;
  /// g(X_T, Y_T) as [B, 1].
  virtual Var terminal_cost(const SdeInputs& in) const = 0;
  virtual nlohmann::json to_json() const = 0;

  NoiseSpec noise_spec(std::size_t steps, std::uint64_t seed) const;
};

/// Per-trajectory goal functional [B, 1] by quadrature over the batch grid.
Var path_functional(const ControlProblem& problem, const TrajectoryBatch& batch,
                    Quadrature quadrature = Quadrature::left);
/// path_functional negated for maximization problems.
Var objective(const ControlProblem& problem, const TrajectoryBatch& batch, Quadrature quadrature = Quadrature::left);

struct DelayMatrices {
  RowMatrix a1, a2, a3, b, sigma;
};

/// A1, A3, B, sigma with i.i.d. uniform(-bound, bound) entries; A2 = 0.
DelayMatrices generate_delay_matrices(std::uint64_t seed, std::size_t d, std::size_t d_a, std::size_t d_w,
                                      double bound = 0.2);

/// dX = (A1 X + A2 Y + A3 X_{t-delta} + B alpha) dt + sigma dW, X = phi on
/// [-delta, 0]; cost int Z'QZ + a'Ra dt + Z_T'GZ_T with Z = X + e^{lambda delta} A3 Y.
struct LqDelayProblem final : ControlProblem {
  std::size_t d = 10, d_a = 10, d_w = 10;
  RowMatrix a1, a2, a3, b, sigma, q, r, g;
  double lambda = 0.1;
  double delta = 0.1;
  double horizon_t = 1.0;
  double phi = 0.0;
  std::uint64_t matrix_seed = 0;

  /// Random matrices from `matrix_seed`, Q = q_scale I, R = r_scale I, G = g_scale I.
  static LqDelayProblem with_random_matrices(std::size_t d, std::size_t d_a, std::size_t d_w, std::uint64_t seed,
                                             double q_scale = 1.0, double r_scale = 1.0, double g_scale = 1.0,
                                             double entry_bound = 0.2);

  std::string name() const override { return "lq-delay"; }
  double horizon() const override { return horizon_t; }
  std::size_t state_dim() const override { return d; }
  std::size_t control_dim() const override { return d_a; }
  std::size_t noise_dim() const override { return d_w; }
  Tensor initial_state() const override;
  std::optional<DelayFeature> delay_feature() const override { return DelayFeature{lambda, delta}; }
  Var drift(const SdeInputs& in) const override;
  Var diffusion_times(const SdeInputs& in, const Var& dw) const override;
  Var running_cost(const SdeInputs& in) const override;
  Var terminal_cost(const SdeInputs& in) const override;
  nlohmann::json to_json() const override;

  Var z(const SdeInputs& in) const;
  void validate() const;
};

/// dX = (A X + C alpha) dt + sigma dW^H, X_0 = x0;
/// cost 1/2 [int X'QX + a'Ra dt + X_T'GX_T]. H = 1/2 is the Markovian case.
struct LqFbmProblem final : ControlProblem {
  RowMatrix a, c, sigma, q, r, g;
  std::vector<double> x0{0.0, 0.0};
  double hurst_h = 0.3;
  double horizon_t = 1.0;

  /// The two-dimensional benchmark parameters.
  static LqFbmProblem benchmark(double hurst = 0.3);

  std::string name() const override { return "lq-fbm"; }
  double horizon() const override { return horizon_t; }
  NoiseKind noise_kind() const override { return hurst_h == 0.5 ? NoiseKind::brownian : NoiseKind::fractional; }
  double hurst() const override { return hurst_h; }
  std::size_t state_dim() const override { return static_cast<std::size_t>(a.rows()); }
  std::size_t control_dim() const override { return static_cast<std::size_t>(c.cols()); }
  std::size_t noise_dim() const override { return static_cast<std::size_t>(sigma.cols()); }
  Tensor initial_state() const override { return Tensor::vector(x0); }
  Var drift(const SdeInputs& in) const override;
  Var diffusion_times(const SdeInputs& in, const Var& dw) const override;
  Var running_cost(const SdeInputs& in) const override;
  Var terminal_cost(const SdeInputs& in) const override;
  nlohmann::json to_json() const override;
  void validate() const;
};

/// Wealth with complete memory,
///   dX = (((mu1 - r) a1 - a2 + r) X + mu2 Y) dt + sigma a1 X dW,
/// reward int e^{-beta t} log(a2 X) dt + e^{-beta T} (1/beta) log(X_T + eta Y_T).
/// The consumption fraction is a2 = softplus(raw) so that it stays positive.
struct PortfolioProblem final : ControlProblem {
  double mu1 = 0.08, mu2 = 0.02, r = 0.03, sigma = 0.3, lambda = 0.5, beta = 0.1;
  double horizon_t = 1.0;
  double phi = 1.0;

  std::string name() const override { return "portfolio"; }
  Sense sense() const override { return Sense::maximize; }
  double horizon() const override { return horizon_t; }
  std::size_t state_dim() const override { return 1; }
  std::size_t control_dim() const override { return 2; }
  std::size_t noise_dim() const override { return 1; }
  Tensor initial_state() const override { return Tensor::vector({phi}); }
  std::optional<DelayFeature> delay_feature() const override;
  Var admissible_control(const Var& raw) const override;
  Var drift(const SdeInputs& in) const override;
  Var diffusion_times(const SdeInputs& in, const Var& dw) const override;
  void check_state(const Tensor& x, std::size_t step) const override;
  Var running_cost(const SdeInputs& in) const override;
  Var terminal_cost(const SdeInputs& in) const override;
  nlohmann::json to_json() const override;

  /// 1/2 (sqrt((r + lambda)^2 + 4 mu2) - (r + lambda)).
  double eta() const;
  void validate() const;
};

/// Per-trajectory costs [B, 1] (problem sign) with left-rectangle quadrature.
Var lq_delay_cost(const TrajectoryBatch& batch, const LqDelayProblem& problem);
Var lq_fbm_cost(const TrajectoryBatch& batch, const LqFbmProblem& problem);
Var portfolio_reward(const TrajectoryBatch& batch, const PortfolioProblem& problem);

}  // namespace nrdectl
