#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "pgen/error.hpp"

namespace pgen {

// Dense row-major array of 64-bit reals. Rank 1 arrays are vectors, rank 2
// are matrices; a single-element array doubles as a scalar.
class Array {
 public:
  Array() = default;

  explicit Array(std::vector<std::size_t> shape, double fill = 0.0)
      : shape_(std::move(shape)), data_(numel_of(shape_), fill) {}

  Array(std::vector<std::size_t> shape, std::vector<double> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != numel_of(shape_)) {
      throw ShapeError("Array: data size " + std::to_string(data_.size()) +
                       " does not match shape " + shape_str(shape_));
    }
  }

  static Array scalar(double v) { return Array({1}, {v}); }

  static Array vector(std::vector<double> v) {
    std::size_t n = v.size();
    return Array({n}, std::move(v));
  }

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t numel() const { return data_.size(); }

  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t rows() const { return shape_.at(0); }
  std::size_t cols() const { return shape_.at(1); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double& at2(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
  double at2(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }

  bool same_shape(const Array& o) const { return shape_ == o.shape_; }

  bool all_finite() const {
    for (double v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  static std::size_t numel_of(const std::vector<std::size_t>& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                           std::multiplies<std::size_t>());
  }

  static std::string shape_str(const std::vector<std::size_t>& shape) {
    std::ostringstream os;
    os << "(";
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << ")";
    return os.str();
  }

  std::string shape_str() const { return shape_str(shape_); }

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

}  // namespace pgen
