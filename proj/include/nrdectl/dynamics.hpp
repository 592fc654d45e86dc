#pragma once

#include <cstddef>
#include <deque>
#include <iosfwd>
#include <limits>
#include <optional>
#include <vector>

#include "nrdectl/diffcore/ops.hpp"
#include "nrdectl/noise.hpp"
#include "nrdectl/policies.hpp"

namespace nrdectl {

/// Exponentially weighted memory Y_t = int_{-delta}^0 e^{lambda xi} X_{t+xi} dxi.
/// delta = +inf is complete memory. The componentwise map applied to the
/// delayed state is the identity.
struct DelayFeature {
  double lambda = 0.0;
  double delta = std::numeric_limits<double>::infinity();

  bool complete_memory() const noexcept { return !std::isfinite(delta); }
  /// Y_0 for constant pre-history phi: phi (1 - e^{-lambda delta}) / lambda,
  /// phi delta when lambda = 0, phi / lambda for complete memory.
  Tensor initial_value(const Tensor& phi) const;
  void validate() const;
};

/// Explicit Euler step of dY = (X_t - e^{-lambda delta} X_{t-delta} - lambda Y) dt,
/// or dY = (X_t - lambda Y) dt for complete memory (`x_delayed` unused).
Var delay_update(const DelayFeature& feature, const Var& y, const Var& x_now, const Var& x_delayed, double dt);

/// Number of grid steps spanned by `delta`; throws unless delta is an integer
/// multiple of dt.
std::size_t delay_lag(double delta, double dt);

/// Past states on the simulation grid, with a constant value before time 0.
class HistoryBuffer {
 public:
  HistoryBuffer(std::size_t lag, Var pre_history);

  void push(const Var& x);
  /// X_{k - lag} for the most recently pushed X_k.
  const Var& delayed() const;
  std::size_t capacity() const noexcept { return lag_ + 1; }

 private:
  std::size_t lag_;
  Var pre_history_;
  std::size_t pushed_ = 0;
  std::deque<Var> window_;
};

/// Inputs to the coefficients at one grid point. `features` and `x_delayed`
/// are empty when the system has no delay feature.
struct SdeInputs {
  double t = 0.0;
  Var x;
  Var features;
  Var x_delayed;
  Var control;
};

/// Controlled path-dependent SDE, dX = mu dt + sigma dW, with coefficients
/// reading the current state, the delay feature and the delayed state only.
class SdeSystem {
 public:
  virtual ~SdeSystem() = default;

  virtual std::size_t state_dim() const = 0;
  virtual std::size_t control_dim() const = 0;
  virtual std::size_t noise_dim() const = 0;
  /// x_0, also the constant pre-history for delay features.
  virtual Tensor initial_state() const = 0;
  virtual std::optional<DelayFeature> delay_feature() const { return std::nullopt; }

  /// Maps the policy output to the admissible control (identity by default).
  virtual Var admissible_control(const Var& raw) const { return raw; }
  /// [B, d]
  virtual Var drift(const SdeInputs& in) const = 0;
  /// sigma(...) dW as [B, d].
  virtual Var diffusion_times(const SdeInputs& in, const Var& dw) const = 0;
  /// Hook to reject states outside the model's domain.
  virtual void check_state(const Tensor& /*x*/, std::size_t /*step*/) const {}
};

/// X_{k+1} = X_k + mu dt + sigma dW.
Var em_step(const SdeSystem& system, const SdeInputs& in, double dt, const Var& dw, std::size_t step);

/// Rollout of the joint (state, policy memory, delay feature) system. All
/// vectors have one entry per grid point; controls[k] is held on [t_k, t_{k+1}).
struct TrajectoryBatch {
  std::vector<double> times;
  std::size_t paths = 0;
  std::vector<Var> states;    // [B, d]
  std::vector<Var> controls;  // [B, d_a]
  std::vector<Var> features;  // [B, d] or empty when no delay feature

  std::size_t steps() const noexcept { return times.empty() ? 0 : times.size() - 1; }
  /// Long format: trajectory, t, x_0.., a_0.. .
  void write_csv(std::ostream& out) const;
};

TrajectoryBatch simulate_batch(const SdeSystem& system, const Policy& policy, const BoundParams& params,
                               const NoiseBatch& noise);

}  // namespace nrdectl
