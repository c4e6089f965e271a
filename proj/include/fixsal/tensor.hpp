#pragma once

#include <cstddef>
#include <algorithm>
#include <cstring>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "fixsal/errors.hpp"

namespace fixsal {

/// Dense row-major float32 array of arbitrary rank.
///
/// Shapes are never broadcast: every operation that combines tensors checks
/// dimensions explicitly and throws ShapeError on mismatch.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<std::size_t> dims) : dims_(std::move(dims)) {
    check_dims();
    data_.assign(count(dims_), 0.0f);
  }

  Tensor(std::vector<std::size_t> dims, std::vector<float> data)
      : dims_(std::move(dims)), data_(std::move(data)) {
    check_dims();
    if (data_.size() != count(dims_)) {
      throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                       " does not match dims product " + std::to_string(count(dims_)));
    }
  }

  static Tensor vector(std::vector<float> values) {
    const std::size_t n = values.size();
    return Tensor({n}, std::move(values));
  }

  static Tensor filled(std::vector<std::size_t> dims, float value) {
    Tensor t(std::move(dims));
    std::fill(t.data_.begin(), t.data_.end(), value);
    return t;
  }

  const std::vector<std::size_t>& dims() const noexcept { return dims_; }
  std::size_t rank() const noexcept { return dims_.size(); }
  std::size_t dim(std::size_t axis) const { return dims_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<float> data() noexcept { return data_; }
  std::span<const float> data() const noexcept { return data_; }
  const std::vector<float>& values() const noexcept { return data_; }

  float& operator[](std::size_t i) { return data_[i]; }
  float operator[](std::size_t i) const { return data_[i]; }

  float& at(std::size_t r, std::size_t c) { return data_[r * dims_[1] + c]; }
  float at(std::size_t r, std::size_t c) const { return data_[r * dims_[1] + c]; }

  /// Contiguous view of row `r` of the leading axis.
  std::span<float> row(std::size_t r) {
    const std::size_t stride = data_.size() / dims_[0];
    return std::span<float>(data_).subspan(r * stride, stride);
  }
  std::span<const float> row(std::size_t r) const {
    const std::size_t stride = data_.size() / dims_[0];
    return std::span<const float>(data_).subspan(r * stride, stride);
  }

  /// Same data with new dims; element count must match.
  Tensor reshaped(std::vector<std::size_t> dims) const { return Tensor(std::move(dims), data_); }

  /// Bitwise equality of dims and payload.
  bool bit_equal(const Tensor& other) const noexcept {
    return dims_ == other.dims_ &&
           (data_.empty() ||
            std::memcmp(data_.data(), other.data_.data(), data_.size() * sizeof(float)) == 0);
  }

  std::string shape_string() const {
    std::string s = "[";
    for (std::size_t i = 0; i < dims_.size(); ++i) {
      if (i) s += "x";
      s += std::to_string(dims_[i]);
    }
    return s + "]";
  }

  static std::size_t count(const std::vector<std::size_t>& dims) {
    return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>());
  }

 private:
  void check_dims() const {
    for (std::size_t d : dims_) {
      if (d == 0) throw ShapeError("tensor dims must be positive");
    }
  }

  std::vector<std::size_t> dims_;
  std::vector<float> data_;
};

}  // namespace fixsal
