#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "unimts/error.hpp"

namespace unimts::diff {

using Shape = std::vector<std::size_t>;

inline std::size_t element_count(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

inline std::string to_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

/// Dense row-major tensor with value semantics. A rank-0 tensor holds one
/// scalar.
template <class Real>
class Tensor {
 public:
  using value_type = Real;

  Tensor() = default;
  explicit Tensor(Shape shape, Real fill = Real{0})
      : shape_(std::move(shape)), values_(element_count(shape_), fill) {}
  Tensor(Shape shape, std::vector<Real> values) : shape_(std::move(shape)), values_(std::move(values)) {
    if (values_.size() != element_count(shape_))
      throw Error(ErrorKind::ShapeMismatch,
                  "value count " + std::to_string(values_.size()) + " does not fill " +
                      diff::to_string(shape_));
  }

  static Tensor scalar(Real v) { return Tensor(Shape{}, std::vector<Real>{v}); }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t extent(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return values_.size(); }

  Real* data() { return values_.data(); }
  const Real* data() const { return values_.data(); }
  std::span<Real> values() { return values_; }
  std::span<const Real> values() const { return values_; }
  std::vector<Real>& storage() { return values_; }
  const std::vector<Real>& storage() const { return values_; }

  Real& operator[](std::size_t i) { return values_[i]; }
  Real operator[](std::size_t i) const { return values_[i]; }

  Real& operator()(std::size_t i, std::size_t j) { return values_[i * shape_[1] + j]; }
  Real operator()(std::size_t i, std::size_t j) const { return values_[i * shape_[1] + j]; }
  Real& operator()(std::size_t i, std::size_t j, std::size_t k) {
    return values_[(i * shape_[1] + j) * shape_[2] + k];
  }
  Real operator()(std::size_t i, std::size_t j, std::size_t k) const {
    return values_[(i * shape_[1] + j) * shape_[2] + k];
  }

  Real item() const {
    if (values_.size() != 1) throw Error(ErrorKind::ShapeMismatch, "item() on a non-scalar tensor");
    return values_[0];
  }

  void fill(Real v) { std::fill(values_.begin(), values_.end(), v); }

  bool all_finite() const {
    return std::all_of(values_.begin(), values_.end(), [](Real v) { return std::isfinite(v); });
  }

  Tensor reshaped(Shape shape) const {
    if (element_count(shape) != values_.size())
      throw Error(ErrorKind::ShapeMismatch,
                  "cannot reshape " + diff::to_string(shape_) + " to " + diff::to_string(shape));
    return Tensor(std::move(shape), values_);
  }

  bool operator==(const Tensor&) const = default;

 private:
  Shape shape_;
  std::vector<Real> values_;
};

/// Named trainable tensor with its gradient and Adam moments.
template <class Real>
struct Parameter {
  std::string name;
  Tensor<Real> value;
  Tensor<Real> grad;
  Tensor<Real> first_moment;
  Tensor<Real> second_moment;
  bool trainable = true;

  Parameter() = default;
  Parameter(std::string n, Tensor<Real> v)
      : name(std::move(n)), value(std::move(v)), grad(value.shape()),
        first_moment(value.shape()), second_moment(value.shape()) {}

  void zero_grad() { grad.fill(Real{0}); }
};

}  // namespace unimts::diff
