#include "nrdectl/diffcore/adam.hpp"

#include <cmath>

#include "nrdectl/errors.hpp"

namespace nrdectl {

void AdamState::update(ParameterSet& params, const ParameterSet& grads) {
  if (grads.size() != params.size()) throw ShapeError("adam: gradient set does not match parameters");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& [name, p] = params.entries()[i];
    const auto& [gname, g] = grads.entries()[i];
    if (name != gname || p.shape() != g.shape()) {
      throw ShapeError("adam: gradient '" + gname + "' " + shape_str(g.shape()) + " does not match parameter '" +
                       name + "' " + shape_str(p.shape()));
    }
    if (!g.all_finite()) throw NumericalError("adam: non-finite gradient for parameter '" + name + "'");
  }
  if (m_.size() == 0) {
    m_ = params.zeros_like();
    v_ = params.zeros_like();
  }
  ++step_;
  const auto& o = options_;
  const double c1 = 1.0 - std::pow(o.beta1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(o.beta2, static_cast<double>(step_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params.entries()[i].second.data();
    auto g = grads.entries()[i].second.data();
    auto m = m_.entries()[i].second.data();
    auto v = v_.entries()[i].second.data();
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = o.beta1 * m[j] + (1.0 - o.beta1) * g[j];
      v[j] = o.beta2 * v[j] + (1.0 - o.beta2) * g[j] * g[j];
      const double m_hat = m[j] / c1;
      const double v_hat = v[j] / c2;
      p[j] -= o.learning_rate * m_hat / (std::sqrt(v_hat) + o.epsilon);
    }
  }
}

}  // namespace nrdectl
