#include "nrdectl/diffcore/tensor.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "nrdectl/errors.hpp"

namespace nrdectl {

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << ", ";
    out << shape[i];
  }
  out << ']';
  return out.str();
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  for (auto dim : shape_) {
    if (dim == 0) throw ShapeError("tensor dimensions must be positive, got " + shape_str(shape_));
  }
  data_.assign(shape_size(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(data.begin(), data.end()) {
  for (auto dim : shape_) {
    if (dim == 0) throw ShapeError("tensor dimensions must be positive, got " + shape_str(shape_));
  }
  if (data_.size() != shape_size(shape_)) {
    throw ShapeError("tensor data length " + std::to_string(data_.size()) + " does not match shape " +
                     shape_str(shape_));
  }
}

Tensor Tensor::scalar(double value) { return Tensor(Shape{}, std::vector<double>{value}); }

Tensor Tensor::vector(std::vector<double> values) {
  Shape shape{values.size()};
  return Tensor(std::move(shape), std::move(values));
}

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  std::vector<double> data;
  std::size_t ncols = rows.size() ? rows.begin()->size() : 0;
  for (const auto& row : rows) {
    if (row.size() != ncols) throw ShapeError("ragged rows in Tensor::from_rows");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor(Shape{rows.size(), ncols}, std::move(data));
}

Tensor Tensor::from_matrix(const RowMatrix& m) {
  Tensor out(Shape{static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())});
  out.matrix() = m;
  return out;
}

std::size_t Tensor::rows() const noexcept {
  if (shape_.size() < 2) return 1;
  return shape_size(Shape(shape_.begin(), shape_.end() - 1));
}

std::size_t Tensor::cols() const noexcept { return shape_.empty() ? 1 : shape_.back(); }

double Tensor::item() const {
  if (data_.size() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape_));
  return data_[0];
}

MatrixMap Tensor::matrix() {
  return MatrixMap(data_.data(), static_cast<Eigen::Index>(rows()), static_cast<Eigen::Index>(cols()));
}

ConstMatrixMap Tensor::matrix() const {
  return ConstMatrixMap(data_.data(), static_cast<Eigen::Index>(rows()), static_cast<Eigen::Index>(cols()));
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_size(shape) != data_.size()) {
    throw ShapeError("cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
  }
  Tensor out = *this;
  out.shape_ = std::move(shape);
  return out;
}

bool Tensor::all_finite() const noexcept {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

}  // namespace nrdectl
