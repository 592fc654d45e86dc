#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "nrdectl/diffcore/nn.hpp"

namespace nrdectl {

/// Per-trajectory-batch memory of a policy. Opaque to the simulator.
struct PolicyState {
  std::vector<Var> hidden;
};

struct PolicyOutput {
  PolicyState state;
  Var control;  // [B, control_dim], raw (before any problem-specific map)
};

/// Grid-agnostic feedback control: fed the state at each grid point, it
/// returns the control to hold over the next interval.
class Policy {
 public:
  virtual ~Policy() = default;

  virtual std::string kind() const = 0;
  virtual std::size_t state_dim() const = 0;
  virtual std::size_t control_dim() const = 0;
  virtual std::size_t param_count() const = 0;
  virtual ParameterSet init_params(std::uint64_t seed) const = 0;
  /// Descriptor stored in checkpoints and checked on load.
  virtual nlohmann::json architecture() const = 0;

  virtual PolicyOutput start(const BoundParams& params, const Var& x0, double t0) const = 0;
  virtual PolicyOutput observe(const BoundParams& params, const PolicyState& state, double t_prev, double t_now,
                               const Var& x_prev, const Var& x_now) const = 0;
};

struct NrdeSpec {
  std::size_t state_dim = 1;
  std::size_t control_dim = 1;
  std::size_t hidden_dim = 16;
  std::vector<std::size_t> widths{64, 64};
  Activation lift_output = Activation::identity;
};

/// Control as the readout of a Neural RDE driven by the observed state:
///
///   Y_0 = lift(x_0),  dY = field(Y) d(t, X),  alpha = readout Y.
///
/// `field` is an MLP with a final tanh whose output is a hidden_dim x (d + 1)
/// matrix; column 0 multiplies the time increment. The Euler update only
/// sees increments (dt, dX), so the same parameters run on any grid.
class NrdePolicy final : public Policy {
 public:
  explicit NrdePolicy(NrdeSpec spec);

  std::string kind() const override { return "nrde"; }
  std::size_t state_dim() const override { return spec_.state_dim; }
  std::size_t control_dim() const override { return spec_.control_dim; }
  std::size_t param_count() const override;
  ParameterSet init_params(std::uint64_t seed) const override;
  nlohmann::json architecture() const override;

  PolicyOutput start(const BoundParams& params, const Var& x0, double t0) const override;
  PolicyOutput observe(const BoundParams& params, const PolicyState& state, double t_prev, double t_now,
                       const Var& x_prev, const Var& x_now) const override;

  /// Y_0 = lift(x_0).
  PolicyState init(const BoundParams& params, const Var& x0) const;
  /// Y <- Y + field(Y) (dt, dX); control from the updated Y.
  PolicyOutput advance(const BoundParams& params, const PolicyState& state, double dt, const Var& dx) const;
  Var readout(const BoundParams& params, const Var& hidden) const;

  const MlpSpec& lift_spec() const noexcept { return lift_; }
  const MlpSpec& field_spec() const noexcept { return field_; }
  const NrdeSpec& spec() const noexcept { return spec_; }

 private:
  NrdeSpec spec_;
  MlpSpec lift_;
  MlpSpec field_;
};

struct RecurrentSpec {
  CellKind cell = CellKind::gru;
  std::size_t state_dim = 1;
  std::size_t control_dim = 1;
  std::size_t hidden_dim = 16;
};

/// Recurrent baseline fed absolute observations (t_k, X_k), one cell update
/// per grid point, linear readout without bias.
class RecurrentPolicy final : public Policy {
 public:
  explicit RecurrentPolicy(RecurrentSpec spec);

  std::string kind() const override { return cell_name(spec_.cell); }
  std::size_t state_dim() const override { return spec_.state_dim; }
  std::size_t control_dim() const override { return spec_.control_dim; }
  std::size_t param_count() const override;
  ParameterSet init_params(std::uint64_t seed) const override;
  nlohmann::json architecture() const override;

  PolicyOutput start(const BoundParams& params, const Var& x0, double t0) const override;
  PolicyOutput observe(const BoundParams& params, const PolicyState& state, double t_prev, double t_now,
                       const Var& x_prev, const Var& x_now) const override;

  PolicyState zero_state(std::size_t batch) const;
  PolicyOutput advance(const BoundParams& params, const PolicyState& state, double t, const Var& x) const;

  const RecurrentCellSpec& cell_spec() const noexcept { return cell_; }

 private:
  RecurrentSpec spec_;
  RecurrentCellSpec cell_;
};

/// alpha(t, x) = -K(t) x with gains K given on a grid (linear interpolation
/// in time). Used to roll out Riccati feedback. No trainable parameters.
class LinearFeedbackPolicy final : public Policy {
 public:
  LinearFeedbackPolicy(std::vector<double> times, std::vector<RowMatrix> gains);

  std::string kind() const override { return "linear-feedback"; }
  std::size_t state_dim() const override;
  std::size_t control_dim() const override;
  std::size_t param_count() const override { return 0; }
  ParameterSet init_params(std::uint64_t) const override { return {}; }
  nlohmann::json architecture() const override;

  PolicyOutput start(const BoundParams& params, const Var& x0, double t0) const override;
  PolicyOutput observe(const BoundParams& params, const PolicyState& state, double t_prev, double t_now,
                       const Var& x_prev, const Var& x_now) const override;

  RowMatrix gain_at(double t) const;

 private:
  std::vector<double> times_;
  std::vector<RowMatrix> gains_;
};

/// Constant raw control; no parameters.
class ConstantPolicy final : public Policy {
 public:
  ConstantPolicy(std::size_t state_dim, std::vector<double> control);

  std::string kind() const override { return "constant"; }
  std::size_t state_dim() const override { return state_dim_; }
  std::size_t control_dim() const override { return control_.size(); }
  std::size_t param_count() const override { return 0; }
  ParameterSet init_params(std::uint64_t) const override { return {}; }
  nlohmann::json architecture() const override;

  PolicyOutput start(const BoundParams& params, const Var& x0, double t0) const override;
  PolicyOutput observe(const BoundParams& params, const PolicyState& state, double t_prev, double t_now,
                       const Var& x_prev, const Var& x_now) const override;

 private:
  Var emit(std::size_t batch) const;
  std::size_t state_dim_;
  std::vector<double> control_;
};

/// Rebuilds an nrde/rnn/lstm/gru policy from its architecture descriptor.
std::unique_ptr<Policy> policy_from_architecture(const nlohmann::json& architecture);

}  // namespace nrdectl
