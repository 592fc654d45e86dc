#include "nrdectl/diffcore/nn.hpp"

#include <cmath>

#include "nrdectl/errors.hpp"

namespace nrdectl {

void ParameterSet::add(std::string name, Tensor value) {
  if (contains(name)) throw std::invalid_argument("duplicate parameter '" + name + "'");
  index_.emplace(name, entries_.size());
  entries_.emplace_back(std::move(name), std::move(value));
}

const Tensor& ParameterSet::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("unknown parameter '" + name + "'");
  return entries_[it->second].second;
}

Tensor& ParameterSet::get(const std::string& name) {
  return const_cast<Tensor&>(static_cast<const ParameterSet&>(*this).get(name));
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [_, t] : entries_) n += t.size();
  return n;
}

ParameterSet ParameterSet::zeros_like() const {
  ParameterSet out;
  for (const auto& [name, t] : entries_) out.add(name, Tensor(t.shape(), 0.0));
  return out;
}

void ParameterSet::accumulate(const ParameterSet& other) {
  if (other.size() != size()) throw ShapeError("parameter set size mismatch");
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    auto& [name, t] = entries_[i];
    const auto& [oname, o] = other.entries_[i];
    if (name != oname || t.shape() != o.shape()) {
      throw ShapeError("parameter mismatch: '" + name + "' vs '" + oname + "'");
    }
    t.matrix() += o.matrix();
  }
}

BoundParams::BoundParams(const ParameterSet& params, Tape* tape) {
  for (const auto& [name, t] : params.entries()) {
    index_.emplace(name, vars_.size());
    vars_.emplace_back(name, tape ? tape->leaf(t) : constant(t));
  }
}

BoundParams BoundParams::from_vars(std::vector<std::pair<std::string, Var>> vars) {
  BoundParams out;
  for (auto& [name, v] : vars) {
    out.index_.emplace(name, out.vars_.size());
    out.vars_.emplace_back(std::move(name), std::move(v));
  }
  return out;
}

const Var& BoundParams::operator[](const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("unbound parameter '" + name + "'");
  return vars_[it->second].second;
}

ParameterSet BoundParams::gradients(const Tape& tape) const {
  ParameterSet out;
  for (const auto& [name, v] : vars_) out.add(name, tape.grad(v));
  return out;
}

const char* activation_name(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::silu: return "silu";
    case Activation::tanh: return "tanh";
  }
  return "?";
}

Activation parse_activation(const std::string& name) {
  if (name == "identity") return Activation::identity;
  if (name == "silu") return Activation::silu;
  if (name == "tanh") return Activation::tanh;
  throw std::invalid_argument("unknown activation '" + name + "' (expected identity, silu or tanh)");
}

Var apply_activation(Activation a, const Var& x) {
  switch (a) {
    case Activation::identity: return x;
    case Activation::silu: return silu(x);
    case Activation::tanh: return tanh(x);
  }
  return x;
}

std::size_t MlpSpec::param_count() const {
  std::size_t total = 0;
  std::size_t fan_in = input_dim;
  for (auto w : hidden_widths) {
    total += (fan_in + 1) * w;
    fan_in = w;
  }
  return total + (fan_in + 1) * output_dim;
}

void MlpSpec::validate() const {
  if (input_dim == 0 || output_dim == 0) throw ShapeError("MLP input and output dimensions must be positive");
  for (auto w : hidden_widths) {
    if (w == 0) throw ShapeError("MLP hidden widths must be positive");
  }
}

Tensor uniform_tensor(Shape shape, double bound, std::mt19937_64& rng) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (auto& v : t.data()) v = dist(rng);
  return t;
}

void mlp_init(const MlpSpec& spec, const std::string& prefix, std::mt19937_64& rng, ParameterSet& out) {
  spec.validate();
  std::size_t fan_in = spec.input_dim;
  auto layer = [&](std::size_t index, std::size_t fan_out) {
    const std::string base = prefix + "." + std::to_string(index);
    out.add(base + ".weight", uniform_tensor(Shape{fan_out, fan_in}, 1.0 / std::sqrt(double(fan_in)), rng));
    out.add(base + ".bias", Tensor(Shape{fan_out}, 0.0));
    fan_in = fan_out;
  };
  for (std::size_t i = 0; i < spec.hidden_widths.size(); ++i) layer(i, spec.hidden_widths[i]);
  layer(spec.hidden_widths.size(), spec.output_dim);
}

Var mlp_forward(const MlpSpec& spec, const BoundParams& params, const std::string& prefix, const Var& x) {
  if (x.value().cols() != spec.input_dim) {
    throw ShapeError("mlp '" + prefix + "': input " + shape_str(x.shape()) + " does not have last dimension " +
                     std::to_string(spec.input_dim));
  }
  Var h = x;
  const std::size_t layers = spec.hidden_widths.size() + 1;
  for (std::size_t i = 0; i < layers; ++i) {
    const std::string base = prefix + "." + std::to_string(i);
    h = affine(h, params[base + ".weight"], params[base + ".bias"]);
    h = apply_activation(i + 1 < layers ? spec.hidden_activation : spec.output_activation, h);
  }
  return h;
}

const char* cell_name(CellKind k) {
  switch (k) {
    case CellKind::rnn: return "rnn";
    case CellKind::lstm: return "lstm";
    case CellKind::gru: return "gru";
  }
  return "?";
}

CellKind parse_cell(const std::string& name) {
  if (name == "rnn") return CellKind::rnn;
  if (name == "lstm") return CellKind::lstm;
  if (name == "gru") return CellKind::gru;
  throw std::invalid_argument("unknown recurrent cell '" + name + "' (expected rnn, lstm or gru)");
}

std::size_t RecurrentCellSpec::gate_count() const {
  switch (kind) {
    case CellKind::rnn: return 1;
    case CellKind::lstm: return 4;
    case CellKind::gru: return 3;
  }
  return 0;
}

std::size_t RecurrentCellSpec::param_count() const { return gate_count() * hidden_dim * (input_dim + hidden_dim + 1); }

void RecurrentCellSpec::validate() const {
  if (input_dim == 0 || hidden_dim == 0) throw ShapeError("recurrent cell dimensions must be positive");
}

void cell_init(const RecurrentCellSpec& spec, const std::string& prefix, std::mt19937_64& rng, ParameterSet& out) {
  spec.validate();
  const std::size_t rows = spec.gate_count() * spec.hidden_dim;
  out.add(prefix + ".w_input",
          uniform_tensor(Shape{rows, spec.input_dim}, 1.0 / std::sqrt(double(spec.input_dim)), rng));
  out.add(prefix + ".w_hidden",
          uniform_tensor(Shape{rows, spec.hidden_dim}, 1.0 / std::sqrt(double(spec.hidden_dim)), rng));
  out.add(prefix + ".bias", Tensor(Shape{rows}, 0.0));
}

CellState cell_zero_state(const RecurrentCellSpec& spec, std::size_t batch) {
  CellState s;
  s.hidden = constant(Tensor(Shape{batch, spec.hidden_dim}, 0.0));
  if (spec.kind == CellKind::lstm) s.cell = constant(Tensor(Shape{batch, spec.hidden_dim}, 0.0));
  return s;
}

CellState recurrent_step(const RecurrentCellSpec& spec, const BoundParams& params, const std::string& prefix,
                         const CellState& state, const Var& input) {
  const std::size_t h = spec.hidden_dim;
  if (input.value().cols() != spec.input_dim) {
    throw ShapeError(std::string(cell_name(spec.kind)) + " cell: input " + shape_str(input.shape()) +
                     " does not have last dimension " + std::to_string(spec.input_dim));
  }
  if (!state.hidden || state.hidden.value().cols() != h || state.hidden.value().rows() != input.value().rows()) {
    throw ShapeError(std::string(cell_name(spec.kind)) + " cell: state shape " +
                     (state.hidden ? shape_str(state.hidden.shape()) : std::string("<empty>")) + " does not match [" +
                     std::to_string(input.value().rows()) + ", " + std::to_string(h) + "]");
  }
  if (spec.kind == CellKind::lstm && (!state.cell || state.cell.shape() != state.hidden.shape())) {
    throw ShapeError("lstm cell: missing or mis-shaped cell state");
  }
  const Var& w_in = params[prefix + ".w_input"];
  const Var& w_hid = params[prefix + ".w_hidden"];
  const Var& bias = params[prefix + ".bias"];
  Var from_input = affine(input, w_in, bias);
  Var from_hidden = affine(state.hidden, w_hid, Var());

  CellState next;
  switch (spec.kind) {
    case CellKind::rnn:
      next.hidden = tanh(from_input + from_hidden);
      break;
    case CellKind::lstm: {
      Var pre = from_input + from_hidden;
      Var i = sigmoid(slice(pre, 0, h));
      Var f = sigmoid(slice(pre, h, 2 * h));
      Var g = tanh(slice(pre, 2 * h, 3 * h));
      Var o = sigmoid(slice(pre, 3 * h, 4 * h));
      next.cell = f * state.cell + i * g;
      next.hidden = o * tanh(next.cell);
      break;
    }
    case CellKind::gru: {
      Var r = sigmoid(slice(from_input, 0, h) + slice(from_hidden, 0, h));
      Var z = sigmoid(slice(from_input, h, 2 * h) + slice(from_hidden, h, 2 * h));
      Var n = tanh(slice(from_input, 2 * h, 3 * h) + r * slice(from_hidden, 2 * h, 3 * h));
      // h' = (1 - z) n + z h = n + z (h - n)
      next.hidden = n + z * (state.hidden - n);
      break;
    }
  }
  return next;
}

}  // namespace nrdectl
