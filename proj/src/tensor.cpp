#include "pdrfe/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

namespace pdrfe {

std::string shape_to_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

Tensor::Tensor(Shape shape) : shape_(std::move(shape)), data_(shape_size(shape_), 0.0) {}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_size(shape_) != data_.size()) {
    throw ShapeError("tensor shape " + shape_to_string(shape_) + " needs " +
                     std::to_string(shape_size(shape_)) + " values, got " +
                     std::to_string(data_.size()));
  }
}

Tensor Tensor::filled(Shape shape, double value) {
  Tensor t(std::move(shape));
  std::fill(t.data_.begin(), t.data_.end(), value);
  return t;
}

Tensor Tensor::vector(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor({n}, std::move(values));
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r ? rows.begin()->size() : 0;
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw ShapeError("ragged matrix literal");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor({r, c}, std::move(data));
}

Tensor Tensor::identity(std::size_t n) {
  Tensor t({n, n});
  for (std::size_t i = 0; i < n; ++i) t.data_[i * n + i] = 1.0;
  return t;
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= shape_.size()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " +
                     shape_to_string(shape_));
  }
  return shape_[axis];
}

std::size_t Tensor::row_width() const {
  if (shape_.empty()) return 1;
  return std::accumulate(shape_.begin() + 1, shape_.end(), std::size_t{1},
                         std::multiplies<>());
}

std::span<const double> Tensor::row(std::size_t i) const {
  const std::size_t w = row_width();
  return std::span<const double>(data_).subspan(i * w, w);
}

std::span<double> Tensor::mutable_row(std::size_t i) {
  const std::size_t w = row_width();
  return std::span<double>(data_).subspan(i * w, w);
}

double Tensor::at(std::size_t i, std::size_t j) const {
  return data_[i * shape_[1] + j];
}

double& Tensor::at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }

double Tensor::item() const {
  if (data_.size() != 1) {
    throw ShapeError("item() on tensor of shape " + shape_to_string(shape_));
  }
  return data_[0];
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_size(shape) != data_.size()) {
    throw ShapeError("cannot reshape " + shape_to_string(shape_) + " to " +
                     shape_to_string(shape));
  }
  return Tensor(std::move(shape), data_);
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

void Tensor::require_finite(const std::string& where) const {
  for (std::size_t i = 0; i < data_.size(); ++i) {
    if (!std::isfinite(data_[i])) {
      throw NonFiniteError(where + ": non-finite value at flat index " +
                           std::to_string(i));
    }
  }
}

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) return {};
  Shape shape = parts.front().shape();
  if (shape.empty()) throw ShapeError("concat_rows needs rank >= 1");
  std::size_t total = 0;
  std::vector<double> data;
  for (const auto& p : parts) {
    if (p.rank() != shape.size() || p.row_width() != parts.front().row_width()) {
      throw ShapeError("concat_rows: mismatched row shape " +
                       shape_to_string(p.shape()));
    }
    total += p.rows();
    data.insert(data.end(), p.data().begin(), p.data().end());
  }
  shape[0] = total;
  return Tensor(std::move(shape), std::move(data));
}

Tensor take_rows(const Tensor& t, std::span<const std::size_t> rows) {
  if (t.rank() != 2) throw ShapeError("take_rows needs rank 2, got " + shape_to_string(t.shape()));
  const std::size_t w = t.dim(1);
  Tensor out({rows.size(), w});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= t.dim(0)) {
      throw std::out_of_range("take_rows: row " + std::to_string(rows[i]) + " out of range");
    }
    std::copy_n(t.data().begin() + static_cast<std::ptrdiff_t>(rows[i] * w), w,
                out.mutable_data().begin() + static_cast<std::ptrdiff_t>(i * w));
  }
  return out;
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(0) != b.dim(0)) {
    throw ShapeError("concat_cols: " + shape_to_string(a.shape()) + " and " +
                     shape_to_string(b.shape()) + " are not row-aligned matrices");
  }
  const std::size_t n = a.dim(0), wa = a.dim(1), wb = b.dim(1);
  Tensor out({n, wa + wb});
  auto dst = out.mutable_data().begin();
  for (std::size_t i = 0; i < n; ++i) {
    dst = std::copy_n(a.data().begin() + static_cast<std::ptrdiff_t>(i * wa), wa, dst);
    dst = std::copy_n(b.data().begin() + static_cast<std::ptrdiff_t>(i * wb), wb, dst);
  }
  return out;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("max_abs_diff: " + shape_to_string(a.shape()) + " vs " +
                     shape_to_string(b.shape()));
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    worst = std::max(worst, std::abs(a[i] - b[i]));
  }
  return worst;
}

}  // namespace pdrfe
