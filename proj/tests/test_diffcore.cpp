#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "nrdectl/diffcore/adam.hpp"
#include "nrdectl/diffcore/checkpoint.hpp"
#include "nrdectl/diffcore/nn.hpp"
#include "nrdectl/errors.hpp"
#include "test_util.hpp"

using namespace nrdectl;
using testutil::fd_error;
using testutil::fill_all;
using testutil::random_tensor;

namespace {

double silu_ref(double x) { return x / (1.0 + std::exp(-x)); }
double sigmoid_ref(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

TEST_CASE("forward ops at zero") {
  CHECK(silu(constant(Tensor::scalar(0.0))).value().item() == 0.0);
  CHECK(tanh(constant(Tensor::scalar(0.0))).value().item() == 0.0);
  std::mt19937_64 rng(1);
  Var y = matmul(constant(Tensor::zeros({2, 3})), constant(random_tensor({3, 1}, rng)));
  CHECK(y.shape() == Shape{2, 1});
  for (double v : y.value().values()) CHECK(v == 0.0);
}

TEST_CASE("forward_op dispatches by kind") {
  Var a = constant(Tensor::from_rows({{1.0, 2.0}}));
  Var b = constant(Tensor::from_rows({{3.0, 4.0}}));
  std::vector<Var> in{a, b};
  CHECK(forward_op(OpKind::add, in).value() == Tensor::from_rows({{4.0, 6.0}}));
  CHECK(forward_op(OpKind::mul, in).value() == Tensor::from_rows({{3.0, 8.0}}));
  std::vector<Var> one{a};
  CHECK(forward_op(OpKind::slice, one, {1, 2}).value() == Tensor::from_rows({{2.0}}));
  CHECK(forward_op(OpKind::sum, one).value().item() == 3.0);
}

TEST_CASE("shape mismatch names op and shapes") {
  Var a = constant(Tensor::zeros({2, 3}));
  Var b = constant(Tensor::zeros({2, 2}));
  try {
    matmul(a, b);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("matmul") != std::string::npos);
    CHECK(msg.find("[2, 3]") != std::string::npos);
    CHECK(msg.find("[2, 2]") != std::string::npos);
  }
  CHECK_THROWS_AS(add(a, b), ShapeError);
}

TEST_CASE("backward of a square") {
  Tape tape;
  Var x = tape.leaf(Tensor::scalar(3.0));
  tape.backward(square(x));
  CHECK(tape.grad(x).item() == doctest::Approx(6.0));
}

TEST_CASE("backward through tanh with zero weights gives the input") {
  Tape tape;
  Tensor x = Tensor::from_rows({{0.5, -1.5, 2.0}});
  Var w = tape.leaf(Tensor::zeros({4, 3}));
  tape.backward(sum(tanh(affine(constant(x), w, Var()))));
  Tensor g = tape.grad(w);
  for (std::size_t o = 0; o < 4; ++o)
    for (std::size_t i = 0; i < 3; ++i) CHECK(g.at(o, i) == doctest::Approx(x[i]));
}

TEST_CASE("unused leaves get zero gradient") {
  Tape tape;
  Var x = tape.leaf(Tensor::scalar(2.0));
  Var unused = tape.leaf(Tensor::from_rows({{1.0, 2.0}}));
  tape.backward(exp(x));
  Tensor g = tape.grad(unused);
  CHECK(g.shape() == Shape{1, 2});
  for (double v : g.values()) CHECK(v == 0.0);
}

TEST_CASE("backward rejects non-scalar and stale roots") {
  Tape tape;
  Var x = tape.leaf(Tensor::from_rows({{1.0, 2.0}}));
  CHECK_THROWS_AS(tape.backward(square(x)), TapeError);
  Var root = sum(square(x));
  tape.clear();
  CHECK_THROWS_AS(tape.backward(root), TapeError);
}

TEST_CASE("random five-op graph matches finite differences") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor w = random_tensor({3, 4}, rng);
    Tensor b = random_tensor({4}, rng);
    Tensor x = random_tensor({2, 3}, rng);
    auto f = [&](const Var& xv) {
      Var h = affine(xv, constant(w.reshaped({4, 3})), constant(b));
      return mean(square(silu(h)) + exp(scale(tanh(h), 0.5)));
    };
    CHECK(fd_error(f, x) < 1e-5);
  }
}

TEST_CASE("shared input accumulates by the sum rule") {
  std::mt19937_64 rng(3);
  Tensor x = random_tensor({3, 2}, rng);
  auto f = [](const Var& v) { return sum(mul(v, v) + tanh(v) * v); };
  CHECK(fd_error(f, x) < 1e-5);
  Tape tape;
  Var leaf = tape.leaf(x);
  tape.backward(sum(leaf * leaf));
  Tensor g = tape.grad(leaf);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(g[i] == doctest::Approx(2.0 * x[i]));
}

TEST_CASE("every differentiable op matches finite differences at 100 random points") {
  std::mt19937_64 rng(11);
  Tensor other = random_tensor({2, 3}, rng);
  Tensor rowv = random_tensor({1, 3}, rng);
  Tensor mat = random_tensor({3, 2}, rng);
  std::vector<std::pair<std::string, std::function<Var(const Var&)>>> cases{
      {"silu", [](const Var& v) { return sum(silu(v)); }},
      {"tanh", [](const Var& v) { return sum(tanh(v)); }},
      {"sigmoid", [](const Var& v) { return sum(sigmoid(v)); }},
      {"softplus", [](const Var& v) { return sum(softplus(v)); }},
      {"exp", [](const Var& v) { return sum(exp(v)); }},
      {"log", [](const Var& v) { return sum(log(shift(square(v), 1.0))); }},
      {"square", [](const Var& v) { return sum(square(v)); }},
      {"mean", [](const Var& v) { return mean(v * v); }},
      {"row_sum", [](const Var& v) { return sum(square(row_sum(v))); }},
      {"add_row", [&](const Var& v) { return sum(square(v + constant(rowv))); }},
      {"sub", [&](const Var& v) { return sum(square(v - constant(other))); }},
      {"mul", [&](const Var& v) { return sum(v * constant(other) * v); }},
      {"matmul", [&](const Var& v) { return sum(square(matmul(v, constant(mat)))); }},
      {"concat", [](const Var& v) { return sum(square(concat({v, tanh(v)}))); }},
      {"slice", [](const Var& v) { return sum(square(slice(v, 1, 3))); }},
  };
  for (const auto& [name, f] : cases) {
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) worst = std::max(worst, fd_error(f, random_tensor({2, 3}, rng, -2.0, 2.0)));
    INFO(name);
    CHECK(worst < 1e-5);
  }
}

TEST_CASE("mlp with zero parameters returns zero") {
  for (Activation out : {Activation::identity, Activation::tanh}) {
    MlpSpec spec{3, 2, {5, 4}, Activation::silu, out};
    std::mt19937_64 rng(0);
    ParameterSet p;
    mlp_init(spec, "m", rng, p);
    fill_all(p, 0.0);
    Var y = mlp_forward(spec, BoundParams(p, nullptr), "m", constant(Tensor::from_rows({{1.0, -2.0, 3.0}})));
    for (double v : y.value().values()) CHECK(v == 0.0);
  }
}

TEST_CASE("mlp hand evaluation of affine silu affine") {
  MlpSpec spec{1, 1, {1}, Activation::silu, Activation::identity};
  std::mt19937_64 rng(0);
  ParameterSet p;
  mlp_init(spec, "m", rng, p);
  p.get("m.0.weight")[0] = 0.7;
  p.get("m.0.bias")[0] = -0.2;
  p.get("m.1.weight")[0] = 1.5;
  p.get("m.1.bias")[0] = 0.3;
  const double x = 0.9;
  Var y = mlp_forward(spec, BoundParams(p, nullptr), "m", constant(Tensor::from_rows({{x}})));
  CHECK(y.value().item() == doctest::Approx(1.5 * silu_ref(0.7 * x - 0.2) + 0.3).epsilon(1e-14));
  CHECK_THROWS_AS(mlp_forward(spec, BoundParams(p, nullptr), "m", constant(Tensor::from_rows({{1.0, 2.0}}))),
                  ShapeError);
}

TEST_CASE("parameter counts match flattened lengths") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    std::uniform_int_distribution<std::size_t> dim(1, 9);
    MlpSpec spec{dim(rng), dim(rng), {dim(rng), dim(rng)}};
    ParameterSet p;
    mlp_init(spec, "m", rng, p);
    CHECK(p.scalar_count() == spec.param_count());
    for (CellKind k : {CellKind::rnn, CellKind::lstm, CellKind::gru}) {
      RecurrentCellSpec cs{k, dim(rng), dim(rng)};
      ParameterSet q;
      cell_init(cs, "c", rng, q);
      CHECK(q.scalar_count() == cs.param_count());
    }
  }
  CHECK(MlpSpec{2, 2, {64, 64}}.param_count() == 4482);
}

TEST_CASE("initialization bounds and zero biases") {
  MlpSpec spec{16, 3, {8}};
  std::mt19937_64 rng(9);
  ParameterSet p;
  mlp_init(spec, "m", rng, p);
  for (double v : p.get("m.0.weight").values()) CHECK(std::abs(v) <= 0.25);
  for (double v : p.get("m.0.bias").values()) CHECK(v == 0.0);
}

TEST_CASE("zero-parameter GRU and RNN cells keep a zero state") {
  for (CellKind k : {CellKind::gru, CellKind::rnn}) {
    RecurrentCellSpec spec{k, 3, 4};
    std::mt19937_64 rng(0);
    ParameterSet p;
    cell_init(spec, "c", rng, p);
    fill_all(p, 0.0);
    CellState s = recurrent_step(spec, BoundParams(p, nullptr), "c", cell_zero_state(spec, 2),
                                 constant(Tensor::from_rows({{1.0, 2.0, 3.0}, {-1.0, 0.5, 4.0}})));
    for (double v : s.hidden.value().values()) CHECK(v == 0.0);
  }
}

TEST_CASE("single-unit LSTM matches hand gate arithmetic") {
  RecurrentCellSpec spec{CellKind::lstm, 1, 1};
  std::mt19937_64 rng(0);
  ParameterSet p;
  cell_init(spec, "c", rng, p);
  const double wi[4] = {0.5, -0.3, 0.8, 0.2};
  const double wh[4] = {0.1, 0.4, -0.6, 0.7};
  const double bb[4] = {0.05, 1.0, -0.1, 0.0};
  for (int g = 0; g < 4; ++g) {
    p.get("c.w_input")[g] = wi[g];
    p.get("c.w_hidden")[g] = wh[g];
    p.get("c.bias")[g] = bb[g];
  }
  const double x = 0.6, h0 = -0.2, c0 = 0.3;
  CellState state{constant(Tensor::from_rows({{h0}})), constant(Tensor::from_rows({{c0}}))};
  CellState next = recurrent_step(spec, BoundParams(p, nullptr), "c", state, constant(Tensor::from_rows({{x}})));
  auto pre = [&](int g) { return wi[g] * x + wh[g] * h0 + bb[g]; };
  const double i = sigmoid_ref(pre(0)), f = sigmoid_ref(pre(1)), gg = std::tanh(pre(2)), o = sigmoid_ref(pre(3));
  const double c1 = f * c0 + i * gg;
  CHECK(next.cell.value().item() == doctest::Approx(c1).epsilon(1e-14));
  CHECK(next.hidden.value().item() == doctest::Approx(o * std::tanh(c1)).epsilon(1e-14));
  CHECK_THROWS_AS(recurrent_step(spec, BoundParams(p, nullptr), "c", cell_zero_state(spec, 3),
                                 constant(Tensor::from_rows({{x}}))),
                  ShapeError);
}

TEST_CASE("adam first step moves by lr over one plus epsilon") {
  ParameterSet p;
  p.add("w", Tensor::scalar(1.0));
  ParameterSet g;
  g.add("w", Tensor::scalar(1.0));
  AdamState adam(AdamOptions{1e-3});
  adam.update(p, g);
  CHECK(p.get("w").item() == doctest::Approx(1.0 - 1e-3 / (1.0 + 1e-8)).epsilon(1e-15));
  CHECK(adam.step_count() == 1);
}

TEST_CASE("adam with zero gradient or zero learning rate is the identity") {
  ParameterSet p;
  p.add("w", Tensor::from_rows({{0.3, -1.2}}));
  const ParameterSet before = p;
  ParameterSet g = p.zeros_like();
  AdamState adam;
  adam.update(p, g);
  CHECK(p == before);
  g.get("w").fill(2.5);
  AdamState frozen(AdamOptions{0.0});
  for (int i = 0; i < 3; ++i) frozen.update(p, g);
  CHECK(p == before);
  CHECK(frozen.step_count() == 3);
}

TEST_CASE("adam two steps match a scalar reference") {
  const double lr = 0.01, b1 = 0.9, b2 = 0.999, eps = 1e-8, grad = 0.4;
  double ref = 2.0, m = 0.0, v = 0.0;
  for (int t = 1; t <= 2; ++t) {
    m = b1 * m + (1 - b1) * grad;
    v = b2 * v + (1 - b2) * grad * grad;
    ref -= lr * (m / (1 - std::pow(b1, t))) / (std::sqrt(v / (1 - std::pow(b2, t))) + eps);
  }
  ParameterSet p;
  p.add("w", Tensor::scalar(2.0));
  ParameterSet g;
  g.add("w", Tensor::scalar(grad));
  AdamState adam(AdamOptions{lr, b1, b2, eps});
  adam.update(p, g);
  adam.update(p, g);
  CHECK(p.get("w").item() == doctest::Approx(ref).epsilon(1e-15));
  CHECK(adam.first_moment().get("w").shape() == p.get("w").shape());
}

TEST_CASE("adam rejects a NaN gradient naming the parameter") {
  ParameterSet p;
  p.add("layer.weight", Tensor::scalar(1.0));
  ParameterSet g;
  g.add("layer.weight", Tensor::scalar(std::numeric_limits<double>::quiet_NaN()));
  AdamState adam;
  try {
    adam.update(p, g);
    FAIL("expected NumericalError");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("layer.weight") != std::string::npos);
  }
}

TEST_CASE("checkpoint round trip and architecture check") {
  std::mt19937_64 rng(2);
  MlpSpec spec{2, 2, {3}};
  ParameterSet p;
  mlp_init(spec, "m", rng, p);
  nlohmann::json arch{{"kind", "mlp"}};
  nlohmann::json doc = checkpoint_to_json(p, arch);
  CHECK(checkpoint_from_json(nlohmann::json::parse(doc.dump()), arch) == p);
  CHECK_THROWS(checkpoint_from_json(doc, nlohmann::json{{"kind", "other"}}));
}

TEST_CASE("bound parameters without a tape are constants") {
  ParameterSet p;
  p.add("w", Tensor::scalar(1.0));
  BoundParams bound(p, nullptr);
  CHECK_FALSE(bound["w"].requires_grad());
  Tape tape;
  BoundParams leaves(p, &tape);
  CHECK(leaves["w"].requires_grad());
  tape.backward(square(leaves["w"]));
  CHECK(leaves.gradients(tape).get("w").item() == doctest::Approx(2.0));
}
