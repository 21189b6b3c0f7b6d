#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "snncraft/error.hpp"

namespace snncraft {

using Shape = std::vector<std::size_t>;

inline std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

inline std::string shape_str(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

// Dense N-dimensional array of doubles, row-major. The universal value type
// for images, weights, membrane potentials, spikes and gradients.
struct Tensor {
  Shape shape;
  std::vector<double> data;

  Tensor() = default;
  Tensor(Shape s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
    if (numel(shape) != data.size()) {
      throw ConfigError("tensor data length " + std::to_string(data.size()) +
                        " does not match shape " + shape_str(shape));
    }
  }

  static Tensor zeros(Shape s) {
    std::size_t n = numel(s);
    return Tensor(std::move(s), std::vector<double>(n, 0.0));
  }

  static Tensor full(Shape s, double value) {
    std::size_t n = numel(s);
    return Tensor(std::move(s), std::vector<double>(n, value));
  }

  std::size_t size() const { return data.size(); }
  bool empty() const { return data.empty(); }

  double& operator[](std::size_t i) { return data[i]; }
  double operator[](std::size_t i) const { return data[i]; }

  // [H, W, C] indexing for image-like tensors.
  double& at3(std::size_t h, std::size_t w, std::size_t c) {
    return data[(h * shape[1] + w) * shape[2] + c];
  }
  double at3(std::size_t h, std::size_t w, std::size_t c) const {
    return data[(h * shape[1] + w) * shape[2] + c];
  }

  void fill(double value) { std::fill(data.begin(), data.end(), value); }

  bool same_shape(const Tensor& other) const { return shape == other.shape; }

  bool all_finite() const {
    for (double v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }
};

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (!a.same_shape(b)) {
    throw ConfigError(std::string(what) + ": shape mismatch " + shape_str(a.shape) +
                      " vs " + shape_str(b.shape));
  }
}

// In-place y += x.
inline void add_into(Tensor& acc, const Tensor& x) {
  require_same_shape(acc, x, "add_into");
  for (std::size_t i = 0; i < x.size(); ++i) acc.data[i] += x.data[i];
}

inline void scale_in_place(Tensor& t, double s) {
  for (double& v : t.data) v *= s;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::fabs(a.data[i] - b.data[i]));
  return m;
}

}  // namespace snncraft
