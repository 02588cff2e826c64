// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "stemit/error.hpp"
#include "stemit/rng.hpp"

namespace stemit::num {

using Shape = std::vector<std::size_t>;

inline std::size_t element_count(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

inline std::string shape_str(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

/// Dense row-major array of doubles.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(Shape shape, double fill = 0.0)
      : shape_(std::move(shape)), data_(element_count(shape_), fill) {}

  Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (element_count(shape_) != data_.size()) {
      throw DimensionError("tensor data length " + std::to_string(data_.size()) +
                           " does not match shape " + shape_str(shape_));
    }
  }

  static Tensor scalar(double v) { return Tensor({1}, std::vector<double>{v}); }

  /// Builds a 2-D tensor from nested rows.
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r ? rows.begin()->size() : 0;
    std::vector<double> data;
    data.reserve(r * c);
    for (const auto& row : rows) {
      if (row.size() != c) throw DimensionError("ragged matrix literal");
      data.insert(data.end(), row.begin(), row.end());
    }
    return Tensor({r, c}, std::move(data));
  }

  static Tensor identity(std::size_t n) {
    Tensor t({n, n});
    for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
    return t;
  }

  static Tensor uniform(Shape shape, SeededRng& rng, double lo, double hi) {
    Tensor t(std::move(shape));
    for (double& v : t.data_) v = rng.uniform(lo, hi);
    return t;
  }

  static Tensor normal(Shape shape, SeededRng& rng, double stddev = 1.0) {
    Tensor t(std::move(shape));
    for (double& v : t.data_) v = rng.normal(0.0, stddev);
    return t;
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t size() const noexcept { return data_.size(); }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
  const double& operator()(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }

  double& operator()(std::size_t i, std::size_t j, std::size_t k) {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }
  const double& operator()(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }

  /// Same data, new shape of equal element count.
  Tensor reshaped(Shape shape) const { return Tensor(std::move(shape), data_); }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
}

inline void require_rank(const Tensor& a, std::size_t rank, const char* op) {
  if (a.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                         shape_str(a.shape()));
  }
}

// ---------------------------------------------------------------------------
// Value-level kernels. The differentiable wrappers in autograd.hpp call these.

/// C += A·B for A[p×q], B[q×r].
inline void matmul_accumulate(const Tensor& a, const Tensor& b, Tensor& c) {
  const std::size_t p = a.dim(0), q = a.dim(1), r = b.dim(1);
  const double* ad = a.data().data();
  const double* bd = b.data().data();
  double* cd = c.data().data();
  for (std::size_t i = 0; i < p; ++i) {
    double* crow = cd + i * r;
    for (std::size_t k = 0; k < q; ++k) {
      const double aik = ad[i * q + k];
      if (aik == 0.0) continue;
      const double* brow = bd + k * r;
      for (std::size_t j = 0; j < r; ++j) crow[j] += aik * brow[j];
    }
  }
}

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: incompatible shapes " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
  }
  Tensor c({a.dim(0), b.dim(1)});
  matmul_accumulate(a, b, c);
  return c;
}

inline Tensor transpose(const Tensor& a) {
  require_rank(a, 2, "transpose");
  Tensor t({a.dim(1), a.dim(0)});
  for (std::size_t i = 0; i < a.dim(0); ++i)
    for (std::size_t j = 0; j < a.dim(1); ++j) t(j, i) = a(i, j);
  return t;
}

template <class F>
Tensor map(const Tensor& x, F&& f) {
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = f(x[i]);
  return out;
}

inline double sigmoid(double x) {
  // Split on sign so exp never overflows.
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double hardswish(double x) { return x * std::clamp(x + 3.0, 0.0, 6.0) / 6.0; }

inline double hardswish_derivative(double x) {
  if (x <= -3.0) return 0.0;
  if (x >= 3.0) return 1.0;
  return (2.0 * x + 3.0) / 6.0;
}

inline double relu(double x) { return x > 0.0 ? x : 0.0; }

inline Tensor sigmoid(const Tensor& x) { return map(x, [](double v) { return sigmoid(v); }); }
inline Tensor hardswish(const Tensor& x) { return map(x, [](double v) { return hardswish(v); }); }
inline Tensor relu(const Tensor& x) { return map(x, [](double v) { return relu(v); }); }

/// P ⊙ σ(Q).
inline Tensor glu_gate(const Tensor& p, const Tensor& q) {
  require_same_shape(p, q, "glu_gate");
  Tensor out(p.shape());
  for (std::size_t i = 0; i < p.size(); ++i) out[i] = p[i] * sigmoid(q[i]);
  return out;
}

/// Valid convolution along the time axis of X[W×T×Cin] with K[kt×Cin×Cout].
/// Each node row is convolved independently; output is W×(T−kt+1)×Cout.
inline Tensor conv_time(const Tensor& x, const Tensor& k, const Tensor& bias) {
  require_rank(x, 3, "conv_time");
  require_rank(k, 3, "conv_time kernel");
  const std::size_t w = x.dim(0), t = x.dim(1), cin = x.dim(2);
  const std::size_t kt = k.dim(0), cout = k.dim(2);
  if (k.dim(1) != cin) {
    throw DimensionError("conv_time: kernel " + shape_str(k.shape()) + " does not match input " +
                         shape_str(x.shape()));
  }
  if (kt > t) {
    throw DimensionError("conv_time: kernel time extent " + std::to_string(kt) +
                         " exceeds sequence length " + std::to_string(t));
  }
  if (bias.size() != cout) {
    throw DimensionError("conv_time: bias " + shape_str(bias.shape()) + " does not match " +
                         std::to_string(cout) + " output channels");
  }
  const std::size_t tout = t - kt + 1;
  Tensor out({w, tout, cout});
  for (std::size_t v = 0; v < w; ++v) {
    for (std::size_t s = 0; s < tout; ++s) {
      double* o = &out(v, s, 0);
      for (std::size_t c = 0; c < cout; ++c) o[c] = bias[c];
      for (std::size_t dt = 0; dt < kt; ++dt) {
        for (std::size_t ci = 0; ci < cin; ++ci) {
          const double xv = x(v, s + dt, ci);
          const double* kr = &k(dt, ci, 0);
          for (std::size_t c = 0; c < cout; ++c) o[c] += xv * kr[c];
        }
      }
    }
  }
  return out;
}

inline double frobenius_norm(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v * v;
  return std::sqrt(s);
}

}  // namespace stemit::num
