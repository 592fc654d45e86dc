#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "nrdectl/diffcore/tape.hpp"

namespace nrdectl {

// Elementwise binary ops broadcast the smaller operand when it is a scalar,
// a single row matching the column count, or a single column matching the
// row count of the larger operand.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);

Var scale(const Var& a, double factor);
Var shift(const Var& a, double offset);

/// [m, k] x [k, n] -> [m, n]
Var matmul(const Var& a, const Var& b);
/// x [B, in], weight [out, in], bias [out] -> x weight^T + bias. `bias` may be empty.
Var affine(const Var& x, const Var& weight, const Var& bias);
/// Batched matrix-vector product: h [B, n*m] viewed as B row-major n x m
/// matrices, u [B, m] -> [B, n].
Var bmv(const Var& h, const Var& u);

Var silu(const Var& a);
Var tanh(const Var& a);
Var sigmoid(const Var& a);
Var softplus(const Var& a);
Var log(const Var& a);
Var exp(const Var& a);
Var square(const Var& a);

/// Sum of all entries (scalar).
Var sum(const Var& a);
/// Sum over the last axis: [B, n] -> [B, 1].
Var row_sum(const Var& a);
/// Mean of all entries (scalar).
Var mean(const Var& a);

/// Concatenation along the last axis; all parts share the row count.
Var concat(const std::vector<Var>& parts);
/// Columns [begin, end) of a 2-D tensor.
Var slice(const Var& a, std::size_t begin, std::size_t end);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return mul(a, b); }
inline Var operator*(const Var& a, double s) { return scale(a, s); }
inline Var operator*(double s, const Var& a) { return scale(a, s); }
inline Var operator-(const Var& a) { return scale(a, -1.0); }

enum class OpKind { add, mul, matmul, affine, silu, tanh, log, exp, square, sum, mean, concat, slice };

struct OpAttrs {
  std::size_t begin = 0;
  std::size_t end = 0;
};

/// Uniform entry point over the core op set.
Var forward_op(OpKind kind, std::span<const Var> inputs, OpAttrs attrs = {});

}  // namespace nrdectl
