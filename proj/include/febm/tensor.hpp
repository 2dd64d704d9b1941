#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "febm/errors.hpp"

namespace febm {

// Dense row-major tensor of 64-bit reals. Value semantics; once handed to the
// tape a tensor is treated as immutable.
class Tensor {
 public:
  Tensor() = default;

  Tensor(std::vector<std::size_t> shape, std::vector<double> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != count(shape_)) {
      throw ShapeError("Tensor: data length " + std::to_string(data_.size()) +
                       " does not match shape " + shape_string(shape_));
    }
  }

  static Tensor zeros(std::vector<std::size_t> shape) {
    std::size_t n = count(shape);
    return Tensor(std::move(shape), std::vector<double>(n, 0.0));
  }

  static Tensor full(std::vector<std::size_t> shape, double v) {
    std::size_t n = count(shape);
    return Tensor(std::move(shape), std::vector<double>(n, v));
  }

  static Tensor scalar(double v) { return Tensor({1}, {v}); }

  static Tensor row(std::initializer_list<double> vals) {
    return Tensor({vals.size()}, std::vector<double>(vals));
  }

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::size_t extent(std::size_t axis) const { return shape_.at(axis); }

  // Rows/cols of a rank-2 tensor; a rank-1 tensor is a single row.
  std::size_t rows() const { return rank() == 2 ? shape_[0] : 1; }
  std::size_t cols() const {
    return rank() == 2 ? shape_[1] : (rank() == 1 ? shape_[0] : size());
  }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double& at(std::size_t i, std::size_t j) { return data_[i * cols() + j]; }
  double at(std::size_t i, std::size_t j) const { return data_[i * cols() + j]; }

  double* row_ptr(std::size_t i) { return data_.data() + i * cols(); }
  const double* row_ptr(std::size_t i) const { return data_.data() + i * cols(); }

  double item() const {
    if (size() != 1) {
      throw ShapeError("Tensor::item on tensor of size " + std::to_string(size()));
    }
    return data_[0];
  }

  bool all_finite() const {
    for (double v : data_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  static std::size_t count(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t e : shape) {
      if (e == 0) throw ShapeError("Tensor: zero extent");
      n *= e;
    }
    return shape.empty() ? 0 : n;
  }

  static std::string shape_string(const std::vector<std::size_t>& shape) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
      if (i) os << ",";
      os << shape[i];
    }
    os << "]";
    return os.str();
  }

  std::string shape_string() const { return shape_string(shape_); }

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

inline void require_same_shape(const Tensor& a, const Tensor& b,
                               const char* op) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_string() +
                     " vs " + b.shape_string());
  }
}

inline void require_finite(const Tensor& t, const char* what) {
  if (!t.all_finite()) {
    throw NumericalError(std::string(what) + ": non-finite values");
  }
}

}  // namespace febm
