#include "fsb/numkit/array.hpp"

#include <algorithm>
#include <cstring>
#include <sstream>

#include "fsb/error.hpp"

namespace fsb::numkit {

std::size_t shape_product(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Array::Array(Shape shape) : shape_(std::move(shape)), data_(shape_product(shape_), 0.0f) {
  for (std::size_t d : shape_) {
    if (d == 0) throw ShapeError("array dimensions must be positive, got " + shape_string(shape_));
  }
}

Array::Array(Shape shape, std::vector<float> data) : shape_(std::move(shape)), data_(std::move(data)) {
  for (std::size_t d : shape_) {
    if (d == 0) throw ShapeError("array dimensions must be positive, got " + shape_string(shape_));
  }
  if (shape_product(shape_) != data_.size()) {
    throw ShapeError("shape " + shape_string(shape_) + " does not match " + std::to_string(data_.size()) +
                     " values");
  }
}

Array Array::full(Shape shape, float value) {
  Array a(std::move(shape));
  std::fill(a.data_.begin(), a.data_.end(), value);
  return a;
}

Array Array::from_rows(std::initializer_list<std::initializer_list<float>> rows) {
  if (rows.size() == 0) throw ShapeError("from_rows: no rows");
  const std::size_t cols = rows.begin()->size();
  std::vector<float> data;
  data.reserve(rows.size() * cols);
  for (const auto& r : rows) {
    if (r.size() != cols) throw ShapeError("from_rows: ragged rows");
    data.insert(data.end(), r.begin(), r.end());
  }
  return Array({rows.size(), cols}, std::move(data));
}

Array Array::identity(std::size_t n) {
  Array a({n, n});
  for (std::size_t i = 0; i < n; ++i) a.data_[i * n + i] = 1.0f;
  return a;
}

std::size_t Array::dim(std::size_t axis) const {
  if (axis >= shape_.size()) throw ShapeError("axis out of range for shape " + shape_string(shape_));
  return shape_[axis];
}

Array Array::reshaped(Shape shape) const {
  if (shape_product(shape) != data_.size()) {
    throw ShapeError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  }
  return Array(std::move(shape), data_);
}

bool Array::bit_equal(const Array& other) const {
  return shape_ == other.shape_ &&
         (data_.empty() || std::memcmp(data_.data(), other.data_.data(), data_.size() * sizeof(float)) == 0);
}

ConstMatView as_matrix(const Array& a) {
  if (a.rank() == 0) throw ShapeError("as_matrix: empty array");
  const std::size_t cols = a.shape().back();
  return {a.data().data(), a.size() / cols, cols};
}

MatView as_matrix(Array& a) {
  if (a.rank() == 0) throw ShapeError("as_matrix: empty array");
  const std::size_t cols = a.shape().back();
  return {a.mutable_data().data(), a.size() / cols, cols};
}

MatView as_matrix(std::span<float> data, std::size_t rows, std::size_t cols) {
  if (data.size() < rows * cols) throw ShapeError("as_matrix: span too small");
  return {data.data(), rows, cols};
}

ConstMatView as_matrix(std::span<const float> data, std::size_t rows, std::size_t cols) {
  if (data.size() < rows * cols) throw ShapeError("as_matrix: span too small");
  return {data.data(), rows, cols};
}

}  // namespace fsb::numkit
