#include "nrdectl/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <stdexcept>

#include "nrdectl/diffcore/ops.hpp"
#include "nrdectl/dynamics.hpp"
#include "nrdectl/policies.hpp"
#include "nrdectl/problems.hpp"
#include "nrdectl/random.hpp"

namespace nrdectl {

namespace {

using Inputs = std::vector<Tensor>;
using Graph = std::function<Var(const std::vector<Var>&)>;

Tensor random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<double> dist(lo, hi);
  for (auto& v : t.data()) v = dist(rng);
  return t;
}

/// Compares tape gradients of sum(graph(inputs) * weights) against central
/// differences on every input entry.
double check_graph(const Graph& graph, Inputs inputs, std::mt19937_64& rng, double h) {
  Tensor weights;
  auto scalar_of = [&](const Inputs& xs, Tape* tape, std::vector<Var>* leaves) {
    std::vector<Var> vars;
    for (const auto& x : xs) vars.push_back(tape ? tape->leaf(x) : constant(x));
    if (leaves) *leaves = vars;
    Var out = graph(vars);
    if (weights.shape() != out.shape()) weights = random_tensor(out.shape(), rng);
    return sum(mul(out, constant(weights)));
  };
  Tape tape;
  std::vector<Var> leaves;
  Var root = scalar_of(inputs, &tape, &leaves);
  tape.backward(root);
  double worst = 0.0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const Tensor analytic = tape.grad(leaves[i]);
    for (std::size_t j = 0; j < inputs[i].size(); ++j) {
      const double saved = inputs[i][j];
      inputs[i][j] = saved + h;
      const double plus = scalar_of(inputs, nullptr, nullptr).value().item();
      inputs[i][j] = saved - h;
      const double minus = scalar_of(inputs, nullptr, nullptr).value().item();
      inputs[i][j] = saved;
      const double numeric = (plus - minus) / (2.0 * h);
      const double a = analytic[j];
      worst = std::max(worst, std::abs(a - numeric) / std::max(1.0, std::abs(a)));
    }
  }
  return worst;
}

/// Same comparison for a policy's parameters through a short rollout.
double check_rollout(const ControlProblem& problem, const Policy& policy, const ParameterSet& params,
                     const NoiseBatch& noise, double h) {
  Tape tape;
  BoundParams bound(params, &tape);
  Var root = sum(path_functional(problem, simulate_batch(problem, policy, bound, noise)));
  tape.backward(root);
  const ParameterSet grads = bound.gradients(tape);
  auto value = [&](const ParameterSet& p) {
    BoundParams b(p, nullptr);
    return sum(path_functional(problem, simulate_batch(problem, policy, b, noise))).value().item();
  };
  ParameterSet work = params;
  double worst = 0.0;
  for (std::size_t e = 0; e < work.entries().size(); ++e) {
    Tensor& t = work.entries()[e].second;
    const Tensor& g = grads.entries()[e].second;
    for (std::size_t j = 0; j < t.size(); ++j) {
      const double saved = t[j];
      t[j] = saved + h;
      const double plus = value(work);
      t[j] = saved - h;
      const double minus = value(work);
      t[j] = saved;
      const double numeric = (plus - minus) / (2.0 * h);
      worst = std::max(worst, std::abs(g[j] - numeric) / std::max(1.0, std::abs(g[j])));
    }
  }
  return worst;
}

/// y = x^2 recorded with the derivative 3x instead of 2x.
Var faulty_square(const Var& a) {
  Tensor out = a.value();
  for (auto& v : out.data()) v *= v;
  return Tape::record(std::move(out), "faulty_square", {a}, [](detail::Node& self) {
    detail::Node* in = self.inputs[0];
    if (!in->requires_grad) return;
    auto acc = in->grad_buffer().data();
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += self.grad[i] * 3.0 * in->value[i];
  });
}

LqFbmProblem scalar_problem(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  LqFbmProblem p;
  p.a = RowMatrix::Constant(1, 1, dist(rng));
  p.c = RowMatrix::Constant(1, 1, 1.0 + 0.5 * dist(rng));
  p.sigma = RowMatrix::Constant(1, 1, 0.5);
  p.q = RowMatrix::Constant(1, 1, 1.0);
  p.r = RowMatrix::Constant(1, 1, 0.5);
  p.g = RowMatrix::Constant(1, 1, 1.0);
  p.x0 = {0.5 * dist(rng)};
  p.hurst_h = 0.5;
  p.horizon_t = 1.0;
  return p;
}

struct CaseSpec {
  const char* name;
  bool simulator;
  std::function<double(std::mt19937_64&, double)> run;
};

std::vector<CaseSpec> case_catalogue() {
  std::vector<CaseSpec> c;
  auto shape = [](std::mt19937_64& rng) {
    std::uniform_int_distribution<std::size_t> dim(1, 4);
    return Shape{dim(rng), dim(rng)};
  };
  auto op1 = [&](const char* name, std::function<Var(const Var&)> f, double lo = -1.0, double hi = 1.0) {
    c.push_back({name, false, [=](std::mt19937_64& rng, double h) {
                   return check_graph([f](const std::vector<Var>& v) { return f(v[0]); },
                                      {random_tensor(shape(rng), rng, lo, hi)}, rng, h);
                 }});
  };
  op1("silu", [](const Var& x) { return silu(x); }, -3.0, 3.0);
  op1("tanh", [](const Var& x) { return tanh(x); }, -2.0, 2.0);
  op1("sigmoid", [](const Var& x) { return sigmoid(x); }, -3.0, 3.0);
  op1("softplus", [](const Var& x) { return softplus(x); }, -3.0, 3.0);
  op1("log", [](const Var& x) { return log(x); }, 0.5, 2.0);
  op1("exp", [](const Var& x) { return exp(x); });
  op1("square", [](const Var& x) { return square(x); });
  op1("sum", [](const Var& x) { return sum(x); });
  op1("mean", [](const Var& x) { return mean(x); });
  op1("row_sum", [](const Var& x) { return row_sum(x); });
  op1("scale_shift", [](const Var& x) { return shift(scale(x, -1.7), 0.3); });
  c.push_back({"slice", false, [](std::mt19937_64& rng, double h) {
                 std::uniform_int_distribution<std::size_t> n(2, 5);
                 const std::size_t cols = n(rng);
                 std::uniform_int_distribution<std::size_t> b(0, cols - 1);
                 const std::size_t begin = b(rng);
                 std::uniform_int_distribution<std::size_t> e(begin + 1, cols);
                 const std::size_t end = e(rng);
                 return check_graph([=](const std::vector<Var>& v) { return slice(v[0], begin, end); },
                                    {random_tensor(Shape{3, cols}, rng)}, rng, h);
               }});
  c.push_back({"concat", false, [](std::mt19937_64& rng, double h) {
                 return check_graph([](const std::vector<Var>& v) { return concat({v[0], v[1], v[0]}); },
                                    {random_tensor(Shape{3, 2}, rng), random_tensor(Shape{3, 4}, rng)}, rng, h);
               }});
  auto binary = [&](const char* name, std::function<Var(const Var&, const Var&)> f, int mode) {
    c.push_back({name, false, [=](std::mt19937_64& rng, double h) {
                   std::uniform_int_distribution<std::size_t> dim(2, 4);
                   const std::size_t rows = dim(rng), cols = dim(rng);
                   Shape other;
                   switch (mode) {
                     case 0: other = Shape{rows, cols}; break;
                     case 1: other = Shape{1, cols}; break;
                     case 2: other = Shape{rows, 1}; break;
                     default: other = Shape{1}; break;
                   }
                   return check_graph([f](const std::vector<Var>& v) { return f(v[0], v[1]); },
                                      {random_tensor(Shape{rows, cols}, rng), random_tensor(other, rng)}, rng, h);
                 }});
  };
  binary("add", [](const Var& a, const Var& b) { return add(a, b); }, 0);
  binary("sub_row", [](const Var& a, const Var& b) { return sub(a, b); }, 1);
  binary("mul", [](const Var& a, const Var& b) { return mul(a, b); }, 0);
  binary("mul_col", [](const Var& a, const Var& b) { return mul(b, a); }, 2);
  binary("mul_scalar", [](const Var& a, const Var& b) { return mul(a, b); }, 3);
  c.push_back({"shared_input", false, [](std::mt19937_64& rng, double h) {
                 return check_graph([](const std::vector<Var>& v) { return mul(tanh(v[0]), add(v[0], v[0])); },
                                    {random_tensor(Shape{2, 3}, rng)}, rng, h);
               }});
  c.push_back({"matmul", false, [](std::mt19937_64& rng, double h) {
                 std::uniform_int_distribution<std::size_t> dim(1, 4);
                 const std::size_t n = dim(rng), k = dim(rng), m = dim(rng);
                 return check_graph([](const std::vector<Var>& v) { return matmul(v[0], v[1]); },
                                    {random_tensor(Shape{n, k}, rng), random_tensor(Shape{k, m}, rng)}, rng, h);
               }});
  c.push_back({"affine", false, [](std::mt19937_64& rng, double h) {
                 std::uniform_int_distribution<std::size_t> dim(1, 4);
                 const std::size_t b = dim(rng), in = dim(rng), out = dim(rng);
                 return check_graph([](const std::vector<Var>& v) { return affine(v[0], v[1], v[2]); },
                                    {random_tensor(Shape{b, in}, rng), random_tensor(Shape{out, in}, rng),
                                     random_tensor(Shape{out}, rng)},
                                    rng, h);
               }});
  c.push_back({"bmv", false, [](std::mt19937_64& rng, double h) {
                 std::uniform_int_distribution<std::size_t> dim(1, 4);
                 const std::size_t b = dim(rng), n = dim(rng), m = dim(rng);
                 return check_graph([](const std::vector<Var>& v) { return bmv(v[0], v[1]); },
                                    {random_tensor(Shape{b, n * m}, rng), random_tensor(Shape{b, m}, rng)}, rng, h);
               }});
  c.push_back({"mlp", false, [](std::mt19937_64& rng, double h) {
                 MlpSpec spec{3, 2, {4, 3}, Activation::silu, Activation::tanh};
                 ParameterSet p;
                 mlp_init(spec, "m", rng, p);
                 for (auto& [name, t] : p.entries()) t = random_tensor(t.shape(), rng);
                 Inputs inputs{random_tensor(Shape{2, 3}, rng)};
                 std::vector<std::string> names;
                 for (auto& [name, t] : p.entries()) {
                   names.push_back(name);
                   inputs.push_back(t);
                 }
                 return check_graph(
                     [=](const std::vector<Var>& v) {
                       std::vector<std::pair<std::string, Var>> bound;
                       for (std::size_t i = 0; i < names.size(); ++i) bound.emplace_back(names[i], v[i + 1]);
                       return mlp_forward(spec, BoundParams::from_vars(std::move(bound)), "m", v[0]);
                     },
                     inputs, rng, h);
               }});
  for (CellKind kind : {CellKind::rnn, CellKind::lstm, CellKind::gru}) {
    c.push_back({cell_name(kind), false, [kind](std::mt19937_64& rng, double h) {
                   RecurrentCellSpec spec{kind, 2, 3};
                   const std::size_t gates = spec.gate_count();
                   Inputs inputs{random_tensor(Shape{2, 2}, rng), random_tensor(Shape{2, 3}, rng),
                                 random_tensor(Shape{2, 3}, rng), random_tensor(Shape{gates * 3, 2}, rng),
                                 random_tensor(Shape{gates * 3, 3}, rng), random_tensor(Shape{gates * 3}, rng)};
                   return check_graph(
                       [spec](const std::vector<Var>& v) {
                         std::vector<std::pair<std::string, Var>> bound{
                             {"c.w_input", v[3]}, {"c.w_hidden", v[4]}, {"c.bias", v[5]}};
                         BoundParams params = BoundParams::from_vars(std::move(bound));
                         CellState state{v[1], spec.kind == CellKind::lstm ? v[2] : Var()};
                         CellState next = recurrent_step(spec, params, "c", state, v[0]);
                         next = recurrent_step(spec, params, "c", next, v[0]);
                         return next.cell ? concat({next.hidden, next.cell}) : next.hidden;
                       },
                       inputs, rng, h);
                 }});
  }
  c.push_back({"simulate_nrde", true, [](std::mt19937_64& rng, double h) {
                 const LqFbmProblem problem = scalar_problem(rng);
                 NrdePolicy policy(NrdeSpec{1, 1, 2, {3}, Activation::identity});
                 ParameterSet params = policy.init_params(rng());
                 for (auto& [name, t] : params.entries()) t = random_tensor(t.shape(), rng, -0.5, 0.5);
                 const NoiseBatch noise = sample_noise_batch(problem.noise_spec(2, rng()), 0, 2);
                 return check_rollout(problem, policy, params, noise, h);
               }});
  c.push_back({"simulate_gru", true, [](std::mt19937_64& rng, double h) {
                 const LqFbmProblem problem = scalar_problem(rng);
                 RecurrentPolicy policy(RecurrentSpec{CellKind::gru, 1, 1, 2});
                 ParameterSet params = policy.init_params(rng());
                 for (auto& [name, t] : params.entries()) t = random_tensor(t.shape(), rng, -0.5, 0.5);
                 const NoiseBatch noise = sample_noise_batch(problem.noise_spec(2, rng()), 0, 2);
                 return check_rollout(problem, policy, params, noise, h);
               }});
  c.push_back({"simulate_delay", true, [](std::mt19937_64& rng, double h) {
                 LqDelayProblem problem = LqDelayProblem::with_random_matrices(1, 1, 1, rng(), 1.0, 1.0, 1.0, 0.8);
                 problem.delta = 0.5;
                 problem.lambda = 0.3;
                 problem.phi = 0.4;
                 problem.a2 = RowMatrix::Constant(1, 1, 0.3);
                 NrdePolicy policy(NrdeSpec{1, 1, 2, {3}, Activation::identity});
                 ParameterSet params = policy.init_params(rng());
                 for (auto& [name, t] : params.entries()) t = random_tensor(t.shape(), rng, -0.5, 0.5);
                 const NoiseBatch noise = sample_noise_batch(problem.noise_spec(2, rng()), 0, 2);
                 return check_rollout(problem, policy, params, noise, h);
               }});
  return c;
}

}  // namespace

bool GradcheckReport::passed() const {
  return std::all_of(cases.begin(), cases.end(), [](const GradcheckCase& c) { return c.passed(); });
}

const GradcheckCase& GradcheckReport::worst() const {
  if (cases.empty()) throw std::logic_error("empty gradcheck report");
  return *std::max_element(cases.begin(), cases.end(), [](const GradcheckCase& a, const GradcheckCase& b) {
    return a.error / a.tolerance < b.error / b.tolerance;
  });
}

GradcheckReport run_gradcheck(const GradcheckOptions& options) {
  const bool was_checking = debug_checks();
  set_debug_checks(true);
  const auto catalogue = case_catalogue();
  GradcheckReport report;
  for (std::size_t i = 0; i < options.trials; ++i) {
    const CaseSpec& spec = catalogue[i % catalogue.size()];
    std::mt19937_64 rng(derive_seed(options.seed, "gradcheck", i));
    GradcheckCase result;
    result.name = spec.name;
    result.tolerance = spec.simulator ? options.simulator_tolerance : options.op_tolerance;
    result.error = spec.run(rng, options.step);
    report.cases.push_back(std::move(result));
  }
  if (options.inject_fault && options.trials > 0) {
    std::mt19937_64 rng(derive_seed(options.seed, "gradcheck-fault"));
    GradcheckCase result{"faulty_square", 0.0, options.op_tolerance};
    result.error = check_graph([](const std::vector<Var>& v) { return faulty_square(v[0]); },
                               {random_tensor(Shape{2, 2}, rng, 0.5, 1.5)}, rng, options.step);
    report.cases.push_back(std::move(result));
  }
  set_debug_checks(was_checking);
  return report;
}

}  // namespace nrdectl
