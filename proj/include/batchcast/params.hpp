#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "batchcast/error.hpp"

namespace batchcast {

/// Named dense array with a fixed shape (row-major for matrices).
struct Tensor {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<double> data;

  static Tensor zeros(std::string name, std::vector<std::size_t> shape) {
    const std::size_t n = std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
    return Tensor{std::move(name), std::move(shape), std::vector<double>(n, 0.0)};
  }

  std::size_t size() const noexcept { return data.size(); }
};

inline std::string shape_string(const std::vector<std::size_t>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) s += (i ? "x" : "") + std::to_string(shape[i]);
  return s + "]";
}

/// Ordered collection of named tensors. Used both for parameters and for
/// gradients (same names and shapes).
class TensorSet {
 public:
  std::size_t add(Tensor t) {
    tensors_.push_back(std::move(t));
    return tensors_.size() - 1;
  }

  std::size_t size() const noexcept { return tensors_.size(); }
  Tensor& operator[](std::size_t i) noexcept { return tensors_[i]; }
  const Tensor& operator[](std::size_t i) const noexcept { return tensors_[i]; }
  auto begin() noexcept { return tensors_.begin(); }
  auto end() noexcept { return tensors_.end(); }
  auto begin() const noexcept { return tensors_.begin(); }
  auto end() const noexcept { return tensors_.end(); }

  const Tensor* find(const std::string& name) const {
    for (const auto& t : tensors_)
      if (t.name == name) return &t;
    return nullptr;
  }
  Tensor* find(const std::string& name) {
    for (auto& t : tensors_)
      if (t.name == name) return &t;
    return nullptr;
  }

  /// Same names and shapes, all zeros.
  TensorSet zeros_like() const {
    TensorSet out;
    for (const auto& t : tensors_) out.add(Tensor::zeros(t.name, t.shape));
    return out;
  }

  std::size_t total_size() const noexcept {
    std::size_t n = 0;
    for (const auto& t : tensors_) n += t.size();
    return n;
  }

  /// Throws ShapeMismatch naming the first offending tensor.
  void require_congruent(const TensorSet& other, ErrorKind kind = ErrorKind::Config) const {
    if (other.size() != size())
      throw Error(kind, "ShapeMismatch",
                  "tensor count " + std::to_string(other.size()) + " vs " + std::to_string(size()));
    for (std::size_t i = 0; i < size(); ++i) {
      const auto& a = tensors_[i];
      const auto& b = other.tensors_[i];
      if (a.name != b.name || a.shape != b.shape || a.data.size() != b.data.size())
        throw Error(kind, "ShapeMismatch",
                    "tensor '" + a.name + "' " + shape_string(a.shape) + " vs '" + b.name + "' " +
                        shape_string(b.shape));
    }
  }

  void set_zero() {
    for (auto& t : tensors_) std::fill(t.data.begin(), t.data.end(), 0.0);
  }

  /// this += scale * other (shape-congruent).
  void axpy(double scale, const TensorSet& other) {
    require_congruent(other);
    for (std::size_t i = 0; i < size(); ++i) {
      auto& a = tensors_[i].data;
      const auto& b = other.tensors_[i].data;
      for (std::size_t k = 0; k < a.size(); ++k) a[k] += scale * b[k];
    }
  }

  void scale(double s) {
    for (auto& t : tensors_)
      for (double& v : t.data) v *= s;
  }

  double squared_norm() const {
    double acc = 0.0;
    for (const auto& t : tensors_)
      for (double v : t.data) acc += v * v;
    return acc;
  }

  bool all_finite() const {
    for (const auto& t : tensors_)
      for (double v : t.data)
        if (!std::isfinite(v)) return false;
    return true;
  }

 private:
  std::vector<Tensor> tensors_;
};

using ParamSet = TensorSet;
using GradSet = TensorSet;

}  // namespace batchcast
