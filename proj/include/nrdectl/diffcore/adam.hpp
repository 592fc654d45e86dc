#pragma once

#include <cstdint>

#include "nrdectl/diffcore/nn.hpp"

namespace nrdectl {

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Bias-corrected Adam. Moments are created lazily on the first update.
class AdamState {
 public:
  AdamState() = default;
  explicit AdamState(AdamOptions options) : options_(options) {}

  /// Applies one update in place; throws NumericalError naming the first
  /// parameter with a non-finite gradient.
  void update(ParameterSet& params, const ParameterSet& grads);

  std::uint64_t step_count() const noexcept { return step_; }
  const AdamOptions& options() const noexcept { return options_; }
  const ParameterSet& first_moment() const noexcept { return m_; }
  const ParameterSet& second_moment() const noexcept { return v_; }

 private:
  AdamOptions options_;
  std::uint64_t step_ = 0;
  ParameterSet m_;
  ParameterSet v_;
};

}  // namespace nrdectl
