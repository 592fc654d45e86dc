#include "nrdectl/diffcore/ops.hpp"

#include <cmath>
#include <string>

#include "nrdectl/errors.hpp"

namespace nrdectl {

namespace {

using detail::Node;

enum class Bcast { same, scalar, row, col };

Bcast classify(const Tensor& big, const Tensor& small, const char* op) {
  if (small.shape() == big.shape()) return Bcast::same;
  if (small.size() == 1) return Bcast::scalar;
  if (small.rows() == 1 && small.cols() == big.cols()) return Bcast::row;
  if (small.cols() == 1 && small.rows() == big.rows() && big.rank() == 2) return Bcast::col;
  throw ShapeError(std::string(op) + ": incompatible shapes " + shape_str(big.shape()) + " and " +
                   shape_str(small.shape()));
}

/// Expands `small` to the layout of `big` as an Eigen array expression target.
RowMatrix expand(const Tensor& small, Bcast kind, Eigen::Index rows, Eigen::Index cols) {
  switch (kind) {
    case Bcast::same: return small.matrix();
    case Bcast::scalar: return RowMatrix::Constant(rows, cols, small[0]);
    case Bcast::row: return small.matrix().replicate(rows, 1);
    case Bcast::col: return small.matrix().replicate(1, cols);
  }
  return {};
}

/// Accumulates `g` (shaped like the big operand) into `node`'s gradient,
/// reducing over broadcast axes.
void accumulate_reduced(Node* node, const RowMatrix& g, Bcast kind) {
  if (!node->requires_grad) return;
  auto acc = node->grad_buffer().matrix();
  switch (kind) {
    case Bcast::same: acc += g; break;
    case Bcast::scalar: acc(0, 0) += g.sum(); break;
    case Bcast::row: acc += g.colwise().sum(); break;
    case Bcast::col: acc += g.rowwise().sum(); break;
  }
}

void accumulate(Node* node, const RowMatrix& g) {
  if (node->requires_grad) node->grad_buffer().matrix() += g;
}

template <typename Fwd, typename Deriv>
Var unary(const Var& a, const char* op, Fwd fwd, Deriv deriv) {
  const Tensor& x = a.value();
  Tensor out(x.shape());
  auto xs = x.data();
  auto ys = out.data();
  for (std::size_t i = 0; i < xs.size(); ++i) ys[i] = fwd(xs[i]);
  return Tape::record(std::move(out), op, {a}, [deriv](Node& self) {
    Node* in = self.inputs[0];
    if (!in->requires_grad) return;
    auto xs = in->value.data();
    auto ys = self.value.data();
    auto gs = self.grad.data();
    auto acc = in->grad_buffer().data();
    for (std::size_t i = 0; i < xs.size(); ++i) acc[i] += gs[i] * deriv(xs[i], ys[i]);
  });
}

enum class Binary { add, mul };

Var binary(const Var& a0, const Var& b0, Binary kind, const char* op) {
  bool swap = a0.value().size() < b0.value().size();
  const Var& a = swap ? b0 : a0;
  const Var& b = swap ? a0 : b0;
  Bcast bc = classify(a.value(), b.value(), op);
  const auto rows = static_cast<Eigen::Index>(a.value().rows());
  const auto cols = static_cast<Eigen::Index>(a.value().cols());
  Tensor out(a.value().shape());
  RowMatrix bx = expand(b.value(), bc, rows, cols);
  if (kind == Binary::add) {
    out.matrix() = a.value().matrix() + bx;
  } else {
    out.matrix() = a.value().matrix().array() * bx.array();
  }
  return Tape::record(std::move(out), op, {a, b}, [bc, kind, rows, cols](Node& self) {
    Node* na = self.inputs[0];
    Node* nb = self.inputs[1];
    const auto& g = self.grad.matrix();
    if (kind == Binary::add) {
      accumulate(na, g);
      accumulate_reduced(nb, g, bc);
    } else {
      if (na->requires_grad) {
        RowMatrix bx = expand(nb->value, bc, rows, cols);
        accumulate(na, (g.array() * bx.array()).matrix());
      }
      if (nb->requires_grad) {
        accumulate_reduced(nb, (g.array() * na->value.matrix().array()).matrix(), bc);
      }
    }
  });
}

}  // namespace

Var add(const Var& a, const Var& b) { return binary(a, b, Binary::add, "add"); }
Var mul(const Var& a, const Var& b) { return binary(a, b, Binary::mul, "mul"); }
Var sub(const Var& a, const Var& b) { return add(a, scale(b, -1.0)); }

Var scale(const Var& a, double factor) {
  Tensor out(a.shape());
  out.matrix() = a.value().matrix() * factor;
  return Tape::record(std::move(out), "scale", {a}, [factor](Node& self) {
    accumulate(self.inputs[0], self.grad.matrix() * factor);
  });
}

Var shift(const Var& a, double offset) {
  Tensor out(a.shape());
  out.matrix() = a.value().matrix().array() + offset;
  return Tape::record(std::move(out), "shift", {a},
                      [](Node& self) { accumulate(self.inputs[0], self.grad.matrix()); });
}

Var matmul(const Var& a, const Var& b) {
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  if (x.rank() != 2 || y.rank() != 2 || x.cols() != y.rows()) {
    throw ShapeError("matmul: incompatible shapes " + shape_str(x.shape()) + " and " + shape_str(y.shape()));
  }
  Tensor out(Shape{x.rows(), y.cols()});
  out.matrix().noalias() = x.matrix() * y.matrix();
  return Tape::record(std::move(out), "matmul", {a, b}, [](Node& self) {
    Node* na = self.inputs[0];
    Node* nb = self.inputs[1];
    const auto& g = self.grad.matrix();
    if (na->requires_grad) na->grad_buffer().matrix().noalias() += g * nb->value.matrix().transpose();
    if (nb->requires_grad) nb->grad_buffer().matrix().noalias() += na->value.matrix().transpose() * g;
  });
}

Var affine(const Var& x, const Var& weight, const Var& bias) {
  const Tensor& xv = x.value();
  const Tensor& w = weight.value();
  if (xv.rank() != 2 || w.rank() != 2 || xv.cols() != w.cols()) {
    throw ShapeError("affine: input " + shape_str(xv.shape()) + " incompatible with weight " +
                     shape_str(w.shape()));
  }
  if (bias && bias.value().size() != w.rows()) {
    throw ShapeError("affine: bias " + shape_str(bias.shape()) + " incompatible with weight " +
                     shape_str(w.shape()));
  }
  Tensor out(Shape{xv.rows(), w.rows()});
  out.matrix().noalias() = xv.matrix() * w.matrix().transpose();
  if (bias) {
    Eigen::Map<const Eigen::RowVectorXd> bv(bias.value().data().data(), static_cast<Eigen::Index>(w.rows()));
    out.matrix().rowwise() += bv;
  }
  std::vector<Var> inputs{x, weight};
  if (bias) inputs.push_back(bias);
  return Tape::record(std::move(out), "affine", std::move(inputs), [](Node& self) {
    Node* nx = self.inputs[0];
    Node* nw = self.inputs[1];
    const auto& g = self.grad.matrix();
    if (nx->requires_grad) nx->grad_buffer().matrix().noalias() += g * nw->value.matrix();
    if (nw->requires_grad) nw->grad_buffer().matrix().noalias() += g.transpose() * nx->value.matrix();
    if (self.inputs.size() > 2 && self.inputs[2]->requires_grad) {
      auto& gb = self.inputs[2]->grad_buffer();
      Eigen::Map<Eigen::RowVectorXd> acc(gb.data().data(), static_cast<Eigen::Index>(gb.size()));
      acc += g.colwise().sum();
    }
  });
}

Var bmv(const Var& h, const Var& u) {
  const Tensor& hv = h.value();
  const Tensor& uv = u.value();
  const std::size_t batch = uv.rows();
  const std::size_t m = uv.cols();
  if (hv.rows() != batch || hv.cols() % m != 0) {
    throw ShapeError("bmv: matrices " + shape_str(hv.shape()) + " incompatible with vectors " +
                     shape_str(uv.shape()));
  }
  const std::size_t n = hv.cols() / m;
  Tensor out(Shape{batch, n});
  for (std::size_t b = 0; b < batch; ++b) {
    const double* hb = hv.data().data() + b * n * m;
    const double* ub = uv.data().data() + b * m;
    double* ob = out.data().data() + b * n;
    for (std::size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < m; ++j) acc += hb[i * m + j] * ub[j];
      ob[i] = acc;
    }
  }
  return Tape::record(std::move(out), "bmv", {h, u}, [batch, n, m](Node& self) {
    Node* nh = self.inputs[0];
    Node* nu = self.inputs[1];
    const double* g = self.grad.data().data();
    const double* hv = nh->value.data().data();
    const double* uv = nu->value.data().data();
    double* gh = nh->requires_grad ? nh->grad_buffer().data().data() : nullptr;
    double* gu = nu->requires_grad ? nu->grad_buffer().data().data() : nullptr;
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t i = 0; i < n; ++i) {
        const double gi = g[b * n + i];
        const std::size_t row = b * n * m + i * m;
        if (gh) {
          for (std::size_t j = 0; j < m; ++j) gh[row + j] += gi * uv[b * m + j];
        }
        if (gu) {
          for (std::size_t j = 0; j < m; ++j) gu[b * m + j] += gi * hv[row + j];
        }
      }
    }
  });
}

Var silu(const Var& a) {
  return unary(
      a, "silu", [](double x) { return x / (1.0 + std::exp(-x)); },
      [](double x, double) {
        const double s = 1.0 / (1.0 + std::exp(-x));
        return s * (1.0 + x * (1.0 - s));
      });
}

Var tanh(const Var& a) {
  return unary(
      a, "tanh", [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var sigmoid(const Var& a) {
  return unary(
      a, "sigmoid", [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
      [](double, double y) { return y * (1.0 - y); });
}

Var softplus(const Var& a) {
  return unary(
      a, "softplus", [](double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); },
      [](double x, double) { return 1.0 / (1.0 + std::exp(-x)); });
}

Var log(const Var& a) {
  return unary(
      a, "log", [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var exp(const Var& a) {
  return unary(
      a, "exp", [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var square(const Var& a) {
  return unary(
      a, "square", [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var sum(const Var& a) {
  Tensor out = Tensor::scalar(a.value().matrix().sum());
  return Tape::record(std::move(out), "sum", {a}, [](Node& self) {
    Node* in = self.inputs[0];
    if (in->requires_grad) in->grad_buffer().matrix().array() += self.grad[0];
  });
}

Var mean(const Var& a) {
  const double n = static_cast<double>(a.value().size());
  Tensor out = Tensor::scalar(a.value().matrix().sum() / n);
  return Tape::record(std::move(out), "mean", {a}, [n](Node& self) {
    Node* in = self.inputs[0];
    if (in->requires_grad) in->grad_buffer().matrix().array() += self.grad[0] / n;
  });
}

Var row_sum(const Var& a) {
  const Tensor& x = a.value();
  Tensor out(Shape{x.rows(), 1});
  out.matrix() = x.matrix().rowwise().sum();
  return Tape::record(std::move(out), "row_sum", {a}, [](Node& self) {
    Node* in = self.inputs[0];
    if (!in->requires_grad) return;
    auto acc = in->grad_buffer().matrix();
    acc.colwise() += Eigen::Map<const Eigen::VectorXd>(self.grad.data().data(), acc.rows());
  });
}

Var concat(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const std::size_t rows = parts.front().value().rows();
  std::size_t cols = 0;
  for (const auto& p : parts) {
    if (p.value().rows() != rows) {
      throw ShapeError("concat: row mismatch " + shape_str(parts.front().shape()) + " vs " +
                       shape_str(p.shape()));
    }
    cols += p.value().cols();
  }
  Tensor out(Shape{rows, cols});
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (const auto& p : parts) {
    const auto w = p.value().cols();
    out.matrix().middleCols(static_cast<Eigen::Index>(off), static_cast<Eigen::Index>(w)) = p.value().matrix();
    offsets.push_back(off);
    off += w;
  }
  return Tape::record(std::move(out), "concat", parts, [offsets](Node& self) {
    const auto& g = self.grad.matrix();
    for (std::size_t i = 0; i < self.inputs.size(); ++i) {
      Node* in = self.inputs[i];
      if (!in->requires_grad) continue;
      const auto w = static_cast<Eigen::Index>(in->value.cols());
      in->grad_buffer().matrix() += g.middleCols(static_cast<Eigen::Index>(offsets[i]), w);
    }
  });
}

Var slice(const Var& a, std::size_t begin, std::size_t end) {
  const Tensor& x = a.value();
  if (x.rank() != 2 || begin >= end || end > x.cols()) {
    throw ShapeError("slice: columns [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") out of range for " + shape_str(x.shape()));
  }
  Tensor out(Shape{x.rows(), end - begin});
  out.matrix() = x.matrix().middleCols(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(end - begin));
  return Tape::record(std::move(out), "slice", {a}, [begin, end](Node& self) {
    Node* in = self.inputs[0];
    if (!in->requires_grad) return;
    in->grad_buffer().matrix().middleCols(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(end - begin)) +=
        self.grad.matrix();
  });
}

Var forward_op(OpKind kind, std::span<const Var> in, OpAttrs attrs) {
  auto need = [&](std::size_t n, const char* op) {
    if (in.size() != n) {
      throw ShapeError(std::string(op) + ": expected " + std::to_string(n) + " inputs, got " +
                       std::to_string(in.size()));
    }
  };
  switch (kind) {
    case OpKind::add: need(2, "add"); return add(in[0], in[1]);
    case OpKind::mul: need(2, "mul"); return mul(in[0], in[1]);
    case OpKind::matmul: need(2, "matmul"); return matmul(in[0], in[1]);
    case OpKind::affine:
      if (in.size() == 2) return affine(in[0], in[1], Var());
      need(3, "affine");
      return affine(in[0], in[1], in[2]);
    case OpKind::silu: need(1, "silu"); return silu(in[0]);
    case OpKind::tanh: need(1, "tanh"); return tanh(in[0]);
    case OpKind::log: need(1, "log"); return log(in[0]);
    case OpKind::exp: need(1, "exp"); return exp(in[0]);
    case OpKind::square: need(1, "square"); return square(in[0]);
    case OpKind::sum: need(1, "sum"); return sum(in[0]);
    case OpKind::mean: need(1, "mean"); return mean(in[0]);
    case OpKind::concat: return concat(std::vector<Var>(in.begin(), in.end()));
    case OpKind::slice: need(1, "slice"); return slice(in[0], attrs.begin, attrs.end);
  }
  throw ShapeError("forward_op: unknown op kind");
}

}  // namespace nrdectl
