#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace msr::nn {

// Dense row-major float32 tensor. Deliberately minimal: contiguous storage,
// explicit shape, no views or broadcasting.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int64_t> shape);
  Tensor(std::vector<int64_t> shape, std::vector<float> values);

  static Tensor zeros(std::vector<int64_t> shape) { return Tensor(std::move(shape)); }
  static Tensor full(std::vector<int64_t> shape, float v);
  static Tensor scalar(float v) { return Tensor({1}, {v}); }
  static Tensor identity(int64_t n);

  const std::vector<int64_t>& shape() const { return shape_; }
  int64_t dim(size_t i) const { return shape_[i]; }
  size_t rank() const { return shape_.size(); }
  int64_t size() const { return static_cast<int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  float* data() { return data_.data(); }
  const float* data() const { return data_.data(); }
  float& operator[](int64_t i) { return data_[i]; }
  float operator[](int64_t i) const { return data_[i]; }
  std::span<float> flat() { return data_; }
  std::span<const float> flat() const { return data_; }

  // Last-dimension row access: row i of the [prefix x cols] view.
  int64_t cols() const { return shape_.empty() ? 0 : shape_.back(); }
  int64_t rows() const { return cols() == 0 ? 0 : size() / cols(); }
  std::span<float> row(int64_t i) { return {data_.data() + i * cols(), static_cast<size_t>(cols())}; }
  std::span<const float> row(int64_t i) const { return {data_.data() + i * cols(), static_cast<size_t>(cols())}; }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
  Tensor reshaped(std::vector<int64_t> shape) const;
  std::string shape_str() const;
  bool all_finite() const;

 private:
  std::vector<int64_t> shape_;
  std::vector<float> data_;
};

int64_t shape_size(const std::vector<int64_t>& shape);

}  // namespace msr::nn
