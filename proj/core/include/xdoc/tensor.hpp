#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace xdoc {

// Dense row-major 64-bit float array. Rank 0 (empty shape) is a scalar.
// Dimensions may be zero (e.g. a [0,h] gather result) but never negative.
class Tensor {
 public:
  Tensor() : data_(1, 0.0) {}  // scalar zero
  explicit Tensor(std::vector<int64_t> shape);
  Tensor(std::vector<int64_t> shape, std::vector<double> data);

  static Tensor scalar(double v);
  static Tensor zeros(std::vector<int64_t> shape) { return Tensor(std::move(shape)); }
  static Tensor full(std::vector<int64_t> shape, double v);

  const std::vector<int64_t>& shape() const { return shape_; }
  int64_t rank() const { return static_cast<int64_t>(shape_.size()); }
  int64_t size() const { return static_cast<int64_t>(data_.size()); }
  int64_t dim(int64_t i) const { return shape_[static_cast<size_t>(i)]; }
  // Leading/trailing split: rows() x cols() with cols = last dim.
  int64_t rows() const;
  int64_t cols() const { return shape_.empty() ? 1 : shape_.back(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  double& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
  double operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }
  // Rank-2 element access.
  double& at(int64_t r, int64_t c) { return data_[static_cast<size_t>(r * shape_[1] + c)]; }
  double at(int64_t r, int64_t c) const { return data_[static_cast<size_t>(r * shape_[1] + c)]; }
  double item() const;  // size-1 tensors only

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  bool all_finite() const;
  bool bit_equal(const Tensor& other) const;

  void fill(double v);
  void add_(const Tensor& other);  // in-place accumulate, shapes must match

  std::string shape_str() const;
  static std::string shape_str(const std::vector<int64_t>& shape);

 private:
  std::vector<int64_t> shape_;
  std::vector<double> data_;
};

}  // namespace xdoc
