#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace pdrfe {

using Shape = std::vector<std::size_t>;

/// Thrown when operand extents do not agree.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown when a NaN or infinity reaches an operation boundary.
class NonFiniteError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

std::string shape_to_string(const Shape& shape);
std::size_t shape_size(const Shape& shape);

/// Dense row-major tensor of doubles. Rank 0 is a scalar with one element.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
  static Tensor filled(Shape shape, double value);
  static Tensor scalar(double value) { return Tensor({}, {value}); }
  static Tensor vector(std::vector<double> values);
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor identity(std::size_t n);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  std::size_t dim(std::size_t axis) const;
  bool empty() const { return data_.empty(); }

  // Leading extent; a rank-0 tensor counts as one row.
  std::size_t rows() const { return shape_.empty() ? 1 : shape_[0]; }
  // Product of trailing extents.
  std::size_t row_width() const;

  std::span<const double> data() const { return data_; }
  std::span<double> mutable_data() { return data_; }
  std::span<const double> row(std::size_t i) const;
  std::span<double> mutable_row(std::size_t i);

  double operator[](std::size_t i) const { return data_[i]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double at(std::size_t i, std::size_t j) const;
  double& at(std::size_t i, std::size_t j);
  double item() const;

  Tensor reshaped(Shape shape) const;

  bool all_finite() const;
  // Throws NonFiniteError naming `where` when any entry is NaN or infinite.
  void require_finite(const std::string& where) const;

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  Shape shape_;
  std::vector<double> data_;
};

Tensor concat_rows(std::span<const Tensor> parts);
// Rows of a rank-2 tensor picked by `rows`, in that order.
Tensor take_rows(const Tensor& t, std::span<const std::size_t> rows);
// [a ‖ b] for row-aligned rank-2 tensors.
Tensor concat_cols(const Tensor& a, const Tensor& b);
double max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace pdrfe
