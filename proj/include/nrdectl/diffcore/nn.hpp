#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "nrdectl/diffcore/ops.hpp"

namespace nrdectl {

/// Named trainable tensors in a fixed order.
class ParameterSet {
 public:
  void add(std::string name, Tensor value);
  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  const Tensor& get(const std::string& name) const;
  Tensor& get(const std::string& name);
  std::size_t size() const noexcept { return entries_.size(); }
  std::size_t scalar_count() const;

  const std::vector<std::pair<std::string, Tensor>>& entries() const noexcept { return entries_; }
  std::vector<std::pair<std::string, Tensor>>& entries() noexcept { return entries_; }

  /// Zero tensors with the same names and shapes.
  ParameterSet zeros_like() const;
  /// Elementwise `*this += other`; names and shapes must match.
  void accumulate(const ParameterSet& other);

  bool operator==(const ParameterSet& other) const { return entries_ == other.entries_; }

 private:
  std::vector<std::pair<std::string, Tensor>> entries_;
  std::map<std::string, std::size_t> index_;
};

/// Parameters as Vars for one forward pass. Leaves when bound to a tape,
/// constants otherwise.
class BoundParams {
 public:
  BoundParams() = default;
  BoundParams(const ParameterSet& params, Tape* tape);
  /// Binds already-created Vars under the given names.
  static BoundParams from_vars(std::vector<std::pair<std::string, Var>> vars);

  const Var& operator[](const std::string& name) const;
  /// Leaf gradients after `tape.backward`, in parameter order.
  ParameterSet gradients(const Tape& tape) const;

 private:
  std::vector<std::pair<std::string, Var>> vars_;
  std::map<std::string, std::size_t> index_;
};

enum class Activation { identity, silu, tanh };

const char* activation_name(Activation a);
Activation parse_activation(const std::string& name);
Var apply_activation(Activation a, const Var& x);

struct MlpSpec {
  std::size_t input_dim = 1;
  std::size_t output_dim = 1;
  std::vector<std::size_t> hidden_widths;
  Activation hidden_activation = Activation::silu;
  Activation output_activation = Activation::identity;

  /// Sum over layers of (fan_in + 1) * fan_out.
  std::size_t param_count() const;
  void validate() const;
};

/// Weights uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)), zero biases. Names are
/// `<prefix>.<layer>.weight` / `.bias`.
void mlp_init(const MlpSpec& spec, const std::string& prefix, std::mt19937_64& rng, ParameterSet& out);
Var mlp_forward(const MlpSpec& spec, const BoundParams& params, const std::string& prefix, const Var& x);

/// Uniform(-bound, bound) tensor.
Tensor uniform_tensor(Shape shape, double bound, std::mt19937_64& rng);

enum class CellKind { rnn, lstm, gru };

const char* cell_name(CellKind k);
CellKind parse_cell(const std::string& name);

struct RecurrentCellSpec {
  CellKind kind = CellKind::gru;
  std::size_t input_dim = 1;
  std::size_t hidden_dim = 1;

  std::size_t gate_count() const;
  /// gates * hidden * (input + hidden + 1)
  std::size_t param_count() const;
  void validate() const;
};

/// Hidden vector, plus the cell vector for LSTM.
struct CellState {
  Var hidden;
  Var cell;
};

void cell_init(const RecurrentCellSpec& spec, const std::string& prefix, std::mt19937_64& rng, ParameterSet& out);
CellState cell_zero_state(const RecurrentCellSpec& spec, std::size_t batch);

/// One update of an RNN (tanh), LSTM (gates i, f, g, o) or GRU (gates r, z, n)
/// cell. The output of the step is the new hidden vector.
CellState recurrent_step(const RecurrentCellSpec& spec, const BoundParams& params, const std::string& prefix,
                         const CellState& state, const Var& input);

}  // namespace nrdectl
