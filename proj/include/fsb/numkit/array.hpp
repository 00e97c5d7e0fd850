#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace fsb::numkit {

using Shape = std::vector<std::size_t>;

std::size_t shape_product(const Shape& shape);
std::string shape_string(const Shape& shape);

// Dense row-major float32 tensor. Value type; treat as immutable once it has
// been handed to another component (mutable_data() is for builders).
class Array {
 public:
  Array() = default;
  explicit Array(Shape shape);
  Array(Shape shape, std::vector<float> data);

  static Array zeros(Shape shape) { return Array(std::move(shape)); }
  static Array full(Shape shape, float value);
  static Array from_rows(std::initializer_list<std::initializer_list<float>> rows);
  static Array identity(std::size_t n);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<const float> data() const { return data_; }
  std::span<float> mutable_data() { return data_; }
  const std::vector<float>& vec() const { return data_; }

  float operator[](std::size_t i) const { return data_[i]; }
  float at(std::size_t i, std::size_t j) const { return data_[i * shape_.back() + j]; }
  float& at_mut(std::size_t i, std::size_t j) { return data_[i * shape_.back() + j]; }

  Array reshaped(Shape shape) const;

  // Bitwise equality of shape and payload.
  bool bit_equal(const Array& other) const;

 private:
  Shape shape_;
  std::vector<float> data_;
};

// Lightweight row-major matrix views used by the allocation-free kernels.
struct MatView {
  float* data = nullptr;
  std::size_t rows = 0;
  std::size_t cols = 0;

  float& operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
  std::span<float> row(std::size_t i) const { return {data + i * cols, cols}; }
  std::span<float> flat() const { return {data, rows * cols}; }
};

struct ConstMatView {
  const float* data = nullptr;
  std::size_t rows = 0;
  std::size_t cols = 0;

  ConstMatView() = default;
  ConstMatView(const float* d, std::size_t r, std::size_t c) : data(d), rows(r), cols(c) {}
  ConstMatView(MatView m) : data(m.data), rows(m.rows), cols(m.cols) {}  // NOLINT

  float operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
  std::span<const float> row(std::size_t i) const { return {data + i * cols, cols}; }
  std::span<const float> flat() const { return {data, rows * cols}; }
};

// View of a rank-2 array, or of a higher-rank array folded to
// (prod(leading dims)) x last dim.
ConstMatView as_matrix(const Array& a);
MatView as_matrix(Array& a);
MatView as_matrix(std::span<float> data, std::size_t rows, std::size_t cols);
ConstMatView as_matrix(std::span<const float> data, std::size_t rows, std::size_t cols);

}  // namespace fsb::numkit
