#include "nrdectl/policies.hpp"

#include <algorithm>
#include <cmath>

#include "nrdectl/errors.hpp"

namespace nrdectl {

namespace {

Var time_column(std::size_t batch, double value) { return constant(Tensor(Shape{batch, 1}, value)); }

void check_observation(const Var& x, std::size_t dim, const char* who) {
  if (x.value().rank() != 2 || x.value().cols() != dim) {
    throw ShapeError(std::string(who) + ": observation " + shape_str(x.shape()) + " does not have last dimension " +
                     std::to_string(dim));
  }
}

}  // namespace

NrdePolicy::NrdePolicy(NrdeSpec spec) : spec_(std::move(spec)) {
  if (spec_.state_dim == 0 || spec_.control_dim == 0 || spec_.hidden_dim == 0) {
    throw ShapeError("nrde policy dimensions must be positive");
  }
  lift_ = MlpSpec{spec_.state_dim, spec_.hidden_dim, spec_.widths, Activation::silu, spec_.lift_output};
  field_ = MlpSpec{spec_.hidden_dim, spec_.hidden_dim * (spec_.state_dim + 1), spec_.widths, Activation::silu,
                   Activation::tanh};
  lift_.validate();
  field_.validate();
}

std::size_t NrdePolicy::param_count() const {
  return lift_.param_count() + field_.param_count() + spec_.hidden_dim * spec_.control_dim;
}

ParameterSet NrdePolicy::init_params(std::uint64_t seed) const {
  std::mt19937_64 rng(seed);
  ParameterSet params;
  mlp_init(lift_, "lift", rng, params);
  mlp_init(field_, "field", rng, params);
  params.add("readout.weight", uniform_tensor(Shape{spec_.control_dim, spec_.hidden_dim},
                                              1.0 / std::sqrt(double(spec_.hidden_dim)), rng));
  return params;
}

nlohmann::json NrdePolicy::architecture() const {
  return {{"kind", "nrde"},
          {"state_dim", spec_.state_dim},
          {"control_dim", spec_.control_dim},
          {"hidden_dim", spec_.hidden_dim},
          {"widths", spec_.widths},
          {"lift_output", activation_name(spec_.lift_output)}};
}

PolicyState NrdePolicy::init(const BoundParams& params, const Var& x0) const {
  check_observation(x0, spec_.state_dim, "nrde lift");
  return PolicyState{{mlp_forward(lift_, params, "lift", x0)}};
}

Var NrdePolicy::readout(const BoundParams& params, const Var& hidden) const {
  return affine(hidden, params["readout.weight"], Var());
}

PolicyOutput NrdePolicy::advance(const BoundParams& params, const PolicyState& state, double dt, const Var& dx) const {
  check_observation(dx, spec_.state_dim, "nrde step");
  const Var& y = state.hidden.at(0);
  Var drive = concat({time_column(dx.value().rows(), dt), dx});
  Var field = mlp_forward(field_, params, "field", y);
  Var next = y + bmv(field, drive);
  return PolicyOutput{PolicyState{{next}}, readout(params, next)};
}

PolicyOutput NrdePolicy::start(const BoundParams& params, const Var& x0, double) const {
  PolicyState s = init(params, x0);
  Var control = readout(params, s.hidden[0]);
  return PolicyOutput{std::move(s), control};
}

PolicyOutput NrdePolicy::observe(const BoundParams& params, const PolicyState& state, double t_prev, double t_now,
                                 const Var& x_prev, const Var& x_now) const {
  return advance(params, state, t_now - t_prev, x_now - x_prev);
}

RecurrentPolicy::RecurrentPolicy(RecurrentSpec spec) : spec_(spec) {
  if (spec_.state_dim == 0 || spec_.control_dim == 0) throw ShapeError("recurrent policy dimensions must be positive");
  cell_ = RecurrentCellSpec{spec_.cell, spec_.state_dim + 1, spec_.hidden_dim};
  cell_.validate();
}

std::size_t RecurrentPolicy::param_count() const { return cell_.param_count() + spec_.hidden_dim * spec_.control_dim; }

ParameterSet RecurrentPolicy::init_params(std::uint64_t seed) const {
  std::mt19937_64 rng(seed);
  ParameterSet params;
  cell_init(cell_, "cell", rng, params);
  params.add("readout.weight", uniform_tensor(Shape{spec_.control_dim, spec_.hidden_dim},
                                              1.0 / std::sqrt(double(spec_.hidden_dim)), rng));
  return params;
}

nlohmann::json RecurrentPolicy::architecture() const {
  return {{"kind", cell_name(spec_.cell)},
          {"state_dim", spec_.state_dim},
          {"control_dim", spec_.control_dim},
          {"hidden_dim", spec_.hidden_dim}};
}

PolicyState RecurrentPolicy::zero_state(std::size_t batch) const {
  CellState c = cell_zero_state(cell_, batch);
  PolicyState s{{c.hidden}};
  if (c.cell) s.hidden.push_back(c.cell);
  return s;
}

PolicyOutput RecurrentPolicy::advance(const BoundParams& params, const PolicyState& state, double t,
                                      const Var& x) const {
  check_observation(x, spec_.state_dim, "recurrent step");
  CellState c{state.hidden.at(0), state.hidden.size() > 1 ? state.hidden[1] : Var()};
  Var input = concat({time_column(x.value().rows(), t), x});
  CellState next = recurrent_step(cell_, params, "cell", c, input);
  PolicyState s{{next.hidden}};
  if (next.cell) s.hidden.push_back(next.cell);
  Var control = affine(next.hidden, params["readout.weight"], Var());
  return PolicyOutput{std::move(s), control};
}

PolicyOutput RecurrentPolicy::start(const BoundParams& params, const Var& x0, double t0) const {
  return advance(params, zero_state(x0.value().rows()), t0, x0);
}

PolicyOutput RecurrentPolicy::observe(const BoundParams& params, const PolicyState& state, double, double t_now,
                                      const Var&, const Var& x_now) const {
  return advance(params, state, t_now, x_now);
}

LinearFeedbackPolicy::LinearFeedbackPolicy(std::vector<double> times, std::vector<RowMatrix> gains)
    : times_(std::move(times)), gains_(std::move(gains)) {
  if (times_.empty() || times_.size() != gains_.size()) throw ShapeError("feedback gains must match their time grid");
}

std::size_t LinearFeedbackPolicy::state_dim() const { return static_cast<std::size_t>(gains_.front().cols()); }
std::size_t LinearFeedbackPolicy::control_dim() const { return static_cast<std::size_t>(gains_.front().rows()); }

nlohmann::json LinearFeedbackPolicy::architecture() const {
  return {{"kind", "linear-feedback"}, {"state_dim", state_dim()}, {"control_dim", control_dim()}};
}

RowMatrix LinearFeedbackPolicy::gain_at(double t) const {
  if (t <= times_.front()) return gains_.front();
  if (t >= times_.back()) return gains_.back();
  auto it = std::upper_bound(times_.begin(), times_.end(), t);
  const std::size_t hi = static_cast<std::size_t>(it - times_.begin());
  const std::size_t lo = hi - 1;
  const double w = (t - times_[lo]) / (times_[hi] - times_[lo]);
  return (1.0 - w) * gains_[lo] + w * gains_[hi];
}

PolicyOutput LinearFeedbackPolicy::start(const BoundParams&, const Var& x0, double t0) const {
  check_observation(x0, state_dim(), "linear feedback");
  RowMatrix k = -gain_at(t0).transpose();
  return PolicyOutput{{}, matmul(x0, constant(Tensor::from_matrix(k)))};
}

PolicyOutput LinearFeedbackPolicy::observe(const BoundParams& params, const PolicyState&, double, double t_now,
                                           const Var&, const Var& x_now) const {
  return start(params, x_now, t_now);
}

ConstantPolicy::ConstantPolicy(std::size_t state_dim, std::vector<double> control)
    : state_dim_(state_dim), control_(std::move(control)) {
  if (control_.empty()) throw ShapeError("constant policy needs a control vector");
}

nlohmann::json ConstantPolicy::architecture() const {
  return {{"kind", "constant"}, {"state_dim", state_dim_}, {"control", control_}};
}

Var ConstantPolicy::emit(std::size_t batch) const {
  Tensor t(Shape{batch, control_.size()});
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t j = 0; j < control_.size(); ++j) t.at(b, j) = control_[j];
  }
  return constant(std::move(t));
}

PolicyOutput ConstantPolicy::start(const BoundParams&, const Var& x0, double) const {
  return PolicyOutput{{}, emit(x0.value().rows())};
}

PolicyOutput ConstantPolicy::observe(const BoundParams&, const PolicyState&, double, double, const Var&,
                                     const Var& x_now) const {
  return PolicyOutput{{}, emit(x_now.value().rows())};
}

std::unique_ptr<Policy> policy_from_architecture(const nlohmann::json& a) {
  const auto kind = a.at("kind").get<std::string>();
  if (kind == "nrde") {
    NrdeSpec s;
    s.state_dim = a.at("state_dim").get<std::size_t>();
    s.control_dim = a.at("control_dim").get<std::size_t>();
    s.hidden_dim = a.at("hidden_dim").get<std::size_t>();
    s.widths = a.at("widths").get<std::vector<std::size_t>>();
    s.lift_output = parse_activation(a.value("lift_output", std::string("identity")));
    return std::make_unique<NrdePolicy>(s);
  }
  RecurrentSpec s;
  s.cell = parse_cell(kind);
  s.state_dim = a.at("state_dim").get<std::size_t>();
  s.control_dim = a.at("control_dim").get<std::size_t>();
  s.hidden_dim = a.at("hidden_dim").get<std::size_t>();
  return std::make_unique<RecurrentPolicy>(s);
}

}  // namespace nrdectl
