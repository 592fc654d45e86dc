#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace nrdectl {

using Shape = std::vector<std::size_t>;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;
/// Storage aligned for the widest packet so vectorized reductions do not peel
/// a heap-address-dependent prefix.
using TensorStorage = std::vector<double, Eigen::aligned_allocator<double>>;

std::size_t shape_size(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Dense row-major array of doubles. Rank 0 is a scalar.
///
/// Most of the library works with rank-2 tensors laid out as
/// [trajectories, features]; `matrix()` views rank 0/1 tensors as a single row.
class Tensor {
 public:
  Tensor() : data_(1, 0.0) {}
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor scalar(double value);
  static Tensor zeros(Shape shape) { return Tensor(std::move(shape), 0.0); }
  static Tensor full(Shape shape, double value) { return Tensor(std::move(shape), value); }
  static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor from_matrix(const RowMatrix& m);
  static Tensor vector(std::vector<double> values);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t rows() const noexcept;
  std::size_t cols() const noexcept;

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  std::vector<double> values() const { return {data_.begin(), data_.end()}; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }
  double item() const;

  MatrixMap matrix();
  ConstMatrixMap matrix() const;

  Tensor reshaped(Shape shape) const;
  bool all_finite() const noexcept;
  void fill(double value);

  bool operator==(const Tensor& other) const = default;

 private:
  Shape shape_;
  TensorStorage data_;
};

}  // namespace nrdectl
