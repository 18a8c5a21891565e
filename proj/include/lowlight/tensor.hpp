#ifndef LOWLIGHT_TENSOR_HPP
#define LOWLIGHT_TENSOR_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lowlight/errors.hpp"

namespace lowlight {

using Shape = std::vector<std::size_t>;

inline std::string shape_string(const Shape& dims) {
  std::string s = "[";
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(dims[i]);
  }
  return s + "]";
}

inline std::size_t shape_volume(const Shape& dims) {
  return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>());
}

/// Dense row-major array of doubles. Images and feature maps are stored
/// channel-first (C x H x W).
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(Shape dims, double fill = 0.0) : dims_(std::move(dims)) {
    check_extents();
    data_.assign(shape_volume(dims_), fill);
  }

  Tensor(Shape dims, std::vector<double> data) : dims_(std::move(dims)), data_(std::move(data)) {
    check_extents();
    if (data_.size() != shape_volume(dims_)) {
      throw DimensionError("tensor: payload has " + std::to_string(data_.size()) +
                           " values but shape " + shape_string(dims_) + " needs " +
                           std::to_string(shape_volume(dims_)));
    }
  }

  const Shape& dims() const noexcept { return dims_; }
  std::size_t rank() const noexcept { return dims_.size(); }
  std::size_t dim(std::size_t axis) const {
    if (axis >= dims_.size()) {
      throw DimensionError("tensor: axis " + std::to_string(axis) + " out of range for rank " +
                           std::to_string(dims_.size()));
    }
    return dims_[axis];
  }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<double> values() & noexcept { return data_; }
  std::span<const double> values() const& noexcept { return data_; }
  std::vector<double> values() && noexcept { return std::move(data_); }
  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }

  double& operator[](std::size_t i) noexcept { return data_[i]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }

  // Unchecked multi-index access; rank must match the number of indices.
  double& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * dims_[1] + j]; }
  double operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * dims_[1] + j]; }
  double& operator()(std::size_t i, std::size_t j, std::size_t k) noexcept {
    return data_[(i * dims_[1] + j) * dims_[2] + k];
  }
  double operator()(std::size_t i, std::size_t j, std::size_t k) const noexcept {
    return data_[(i * dims_[1] + j) * dims_[2] + k];
  }
  double& operator()(std::size_t i, std::size_t j, std::size_t k, std::size_t l) noexcept {
    return data_[((i * dims_[1] + j) * dims_[2] + k) * dims_[3] + l];
  }
  double operator()(std::size_t i, std::size_t j, std::size_t k, std::size_t l) const noexcept {
    return data_[((i * dims_[1] + j) * dims_[2] + k) * dims_[3] + l];
  }

  Tensor reshaped(Shape dims) const {
    if (shape_volume(dims) != data_.size()) {
      throw DimensionError("reshape: " + shape_string(dims_) + " -> " + shape_string(dims));
    }
    return Tensor(std::move(dims), data_);
  }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
  }

  Tensor& operator+=(const Tensor& o) {
    require_same_shape(o, "operator+=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }
  Tensor& operator-=(const Tensor& o) {
    require_same_shape(o, "operator-=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
    return *this;
  }
  Tensor& operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
  }

  friend Tensor operator+(Tensor a, const Tensor& b) { return a += b; }
  friend Tensor operator-(Tensor a, const Tensor& b) { return a -= b; }
  friend Tensor operator*(Tensor a, double s) { return a *= s; }
  friend Tensor operator*(double s, Tensor a) { return a *= s; }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.dims_ == b.dims_ && a.data_ == b.data_;
  }

  void require_same_shape(const Tensor& o, const char* what) const {
    if (o.dims_ != dims_) {
      throw DimensionError(std::string(what) + ": shape " + shape_string(o.dims_) +
                           " does not match " + shape_string(dims_));
    }
  }

 private:
  void check_extents() const {
    for (std::size_t a = 0; a < dims_.size(); ++a) {
      if (dims_[a] == 0) {
        throw DimensionError("tensor: axis " + std::to_string(a) + " has zero extent");
      }
    }
  }

  Shape dims_;
  std::vector<double> data_;
};

/// Throws DimensionError unless `t` has the given rank.
inline void require_rank(const Tensor& t, std::size_t rank, const std::string& what) {
  if (t.rank() != rank) {
    throw DimensionError(what + ": expected rank " + std::to_string(rank) + ", got " +
                         shape_string(t.dims()));
  }
}

inline void require_axis(std::size_t got, std::size_t want, const std::string& what,
                         const std::string& axis) {
  if (got != want) {
    throw DimensionError(what + ": axis '" + axis + "' is " + std::to_string(got) + ", expected " +
                         std::to_string(want));
  }
}

inline double sum(const Tensor& t) {
  return std::accumulate(t.values().begin(), t.values().end(), 0.0);
}

inline double sum_squares(const Tensor& t) {
  double s = 0.0;
  for (double v : t.values()) s += v * v;
  return s;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  a.require_same_shape(b, "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

/// Convolution weights indexed [out][in][kh][kw].
class ConvWeights {
 public:
  ConvWeights() = default;
  ConvWeights(std::size_t out_channels, std::size_t in_channels, std::size_t kh, std::size_t kw,
              double fill = 0.0)
      : w_(Shape{out_channels, in_channels, kh, kw}, fill) {}
  explicit ConvWeights(Tensor w) : w_(std::move(w)) { require_rank(w_, 4, "ConvWeights"); }

  std::size_t out_channels() const { return w_.dim(0); }
  std::size_t in_channels() const { return w_.dim(1); }
  std::size_t kh() const { return w_.dim(2); }
  std::size_t kw() const { return w_.dim(3); }

  double& operator()(std::size_t o, std::size_t i, std::size_t h, std::size_t t) noexcept {
    return w_(o, i, h, t);
  }
  double operator()(std::size_t o, std::size_t i, std::size_t h, std::size_t t) const noexcept {
    return w_(o, i, h, t);
  }

  Tensor& tensor() noexcept { return w_; }
  const Tensor& tensor() const noexcept { return w_; }

  friend bool operator==(const ConvWeights& a, const ConvWeights& b) { return a.w_ == b.w_; }

 private:
  Tensor w_;
};

}  // namespace lowlight

#endif  // LOWLIGHT_TENSOR_HPP
