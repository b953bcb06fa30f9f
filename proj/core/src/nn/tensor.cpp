#include "msr/nn/tensor.hpp"

#include <fmt/format.h>

#include <cmath>

#include "msr/common.hpp"

namespace msr::nn {

int64_t shape_size(const std::vector<int64_t>& shape) {
  int64_t n = 1;
  for (int64_t d : shape) n *= d;
  return shape.empty() ? 0 : n;
}

Tensor::Tensor(std::vector<int64_t> shape)
    : shape_(std::move(shape)), data_(shape_size(shape_), 0.0f) {
  for (int64_t d : shape_)
    if (d <= 0) throw ShapeError(fmt::format("invalid tensor shape {}", shape_str()));
}

Tensor::Tensor(std::vector<int64_t> shape, std::vector<float> values)
    : shape_(std::move(shape)), data_(std::move(values)) {
  if (shape_size(shape_) != static_cast<int64_t>(data_.size()))
    throw ShapeError(fmt::format("tensor shape {} does not match {} values",
                                 shape_str(), data_.size()));
}

Tensor Tensor::full(std::vector<int64_t> shape, float v) {
  Tensor t(std::move(shape));
  for (auto& x : t.data_) x = v;
  return t;
}

Tensor Tensor::identity(int64_t n) {
  Tensor t({n, n});
  for (int64_t i = 0; i < n; ++i) t.data_[i * n + i] = 1.0f;
  return t;
}

Tensor Tensor::reshaped(std::vector<int64_t> shape) const {
  if (shape_size(shape) != size())
    throw ShapeError(fmt::format("cannot reshape {} to {} elements",
                                 shape_str(), shape_size(shape)));
  Tensor t = *this;
  t.shape_ = std::move(shape);
  return t;
}

std::string Tensor::shape_str() const {
  std::string s = "[";
  for (size_t i = 0; i < shape_.size(); ++i)
    s += fmt::format("{}{}", i ? ", " : "", shape_[i]);
  return s + "]";
}

bool Tensor::all_finite() const {
  for (float v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace msr::nn
