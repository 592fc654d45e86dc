#include "nrdectl/dynamics.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>
#include <string>

#include "nrdectl/errors.hpp"

namespace nrdectl {

void DelayFeature::validate() const {
  if (!(lambda >= 0.0)) throw std::invalid_argument("delay decay rate lambda must be >= 0");
  if (!(delta > 0.0)) throw std::invalid_argument("delay window delta must be > 0");
  if (complete_memory() && lambda == 0.0) {
    throw std::invalid_argument("complete memory needs lambda > 0 for a finite initial value");
  }
}

Tensor DelayFeature::initial_value(const Tensor& phi) const {
  validate();
  double factor;
  if (complete_memory()) {
    factor = 1.0 / lambda;
  } else if (lambda == 0.0) {
    factor = delta;
  } else {
    factor = -std::expm1(-lambda * delta) / lambda;
  }
  Tensor y = phi;
  y.matrix() *= factor;
  return y;
}

Var delay_update(const DelayFeature& feature, const Var& y, const Var& x_now, const Var& x_delayed, double dt) {
  Var rate = x_now - scale(y, feature.lambda);
  if (!feature.complete_memory()) {
    rate = rate - scale(x_delayed, std::exp(-feature.lambda * feature.delta));
  }
  return y + scale(rate, dt);
}

std::size_t delay_lag(double delta, double dt) {
  const double ratio = delta / dt;
  const double rounded = std::round(ratio);
  if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-9 * std::max(1.0, ratio)) {
    throw std::invalid_argument("delay window " + std::to_string(delta) + " is not a positive integer multiple of the "
                                "grid step " + std::to_string(dt));
  }
  return static_cast<std::size_t>(rounded);
}

HistoryBuffer::HistoryBuffer(std::size_t lag, Var pre_history) : lag_(lag), pre_history_(std::move(pre_history)) {}

void HistoryBuffer::push(const Var& x) {
  window_.push_back(x);
  ++pushed_;
  while (window_.size() > lag_ + 1) window_.pop_front();
}

const Var& HistoryBuffer::delayed() const {
  if (pushed_ == 0) throw std::logic_error("history buffer is empty");
  if (pushed_ <= lag_) return pre_history_;
  return window_.front();
}

Var em_step(const SdeSystem& system, const SdeInputs& in, double dt, const Var& dw, std::size_t step) {
  if (!(dt > 0.0)) throw std::invalid_argument("em_step needs dt > 0");
  if (dw.value().cols() != system.noise_dim()) {
    throw ShapeError("em_step: noise increment " + shape_str(dw.shape()) + " does not have " +
                     std::to_string(system.noise_dim()) + " channels");
  }
  Var next = in.x + scale(system.drift(in), dt) + system.diffusion_times(in, dw);
  if (!next.value().all_finite()) {
    throw NumericalError("non-finite state after Euler-Maruyama step " + std::to_string(step));
  }
  system.check_state(next.value(), step);
  return next;
}

namespace {

Var replicate_rows(const Tensor& row, std::size_t batch) {
  Tensor out(Shape{batch, row.size()});
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t j = 0; j < row.size(); ++j) out.at(b, j) = row[j];
  }
  return constant(std::move(out));
}

}  // namespace

TrajectoryBatch simulate_batch(const SdeSystem& system, const Policy& policy, const BoundParams& params,
                               const NoiseBatch& noise) {
  const std::size_t batch = noise.paths;
  const std::size_t steps = noise.steps();
  if (steps == 0 || noise.grid.size() != steps + 1) throw ShapeError("noise batch has no steps");
  if (noise.dim != system.noise_dim()) {
    throw ShapeError("noise has " + std::to_string(noise.dim) + " channels, system expects " +
                     std::to_string(system.noise_dim()));
  }
  if (policy.state_dim() != system.state_dim() || policy.control_dim() != system.control_dim()) {
    throw ShapeError("policy dimensions (" + std::to_string(policy.state_dim()) + " -> " +
                     std::to_string(policy.control_dim()) + ") do not match system (" +
                     std::to_string(system.state_dim()) + " -> " + std::to_string(system.control_dim()) + ")");
  }
  const Tensor x0 = system.initial_state();
  if (x0.size() != system.state_dim()) throw ShapeError("initial state has wrong dimension");

  TrajectoryBatch out;
  out.times = noise.grid;
  out.paths = batch;
  out.states.reserve(steps + 1);
  out.controls.reserve(steps + 1);

  const auto feature = system.delay_feature();
  Var x = replicate_rows(x0, batch);
  Var y;
  std::optional<HistoryBuffer> history;
  if (feature) {
    y = replicate_rows(feature->initial_value(x0), batch);
    out.features.reserve(steps + 1);
    if (!feature->complete_memory()) {
      const double dt = noise.grid[1] - noise.grid[0];
      history.emplace(delay_lag(feature->delta, dt), x);
      history->push(x);
    }
  }

  PolicyOutput pol = policy.start(params, x, noise.grid[0]);
  for (std::size_t k = 0; k < steps; ++k) {
    const double t = noise.grid[k];
    const double dt = noise.grid[k + 1] - t;
    Var alpha = system.admissible_control(pol.control);
    out.states.push_back(x);
    out.controls.push_back(alpha);
    if (feature) out.features.push_back(y);

    SdeInputs in{t, x, y, history ? history->delayed() : Var(), alpha};
    Var x_next = em_step(system, in, dt, constant(noise.increments[k]), k);
    if (feature) y = delay_update(*feature, y, x, in.x_delayed, dt);
    pol = policy.observe(params, pol.state, t, noise.grid[k + 1], x, x_next);
    x = x_next;
    if (history) history->push(x);
  }
  out.states.push_back(x);
  out.controls.push_back(system.admissible_control(pol.control));
  if (feature) out.features.push_back(y);
  return out;
}

void TrajectoryBatch::write_csv(std::ostream& out) const {
  if (states.empty()) return;
  const std::size_t d = states.front().value().cols();
  const std::size_t da = controls.front().value().cols();
  out << "trajectory,t";
  for (std::size_t j = 0; j < d; ++j) out << ",x_" << j;
  for (std::size_t j = 0; j < da; ++j) out << ",a_" << j;
  out << '\n' << std::setprecision(17);
  for (std::size_t p = 0; p < paths; ++p) {
    for (std::size_t k = 0; k < times.size(); ++k) {
      out << p << ',' << times[k];
      for (std::size_t j = 0; j < d; ++j) out << ',' << states[k].value().at(p, j);
      for (std::size_t j = 0; j < da; ++j) out << ',' << controls[k].value().at(p, j);
      out << '\n';
    }
  }
}

}  // namespace nrdectl
