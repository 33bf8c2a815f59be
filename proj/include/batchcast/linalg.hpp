#pragma once

// Dense symmetric positive-definite primitives: Cholesky factorization,
// triangular solves, log-determinant and quadratic forms. All storage is
// row-major double precision.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "batchcast/error.hpp"

namespace batchcast::linalg {

using Vector = std::vector<double>;

/// Dense symmetric matrix. Symmetry is enforced exactly on construction
/// from a full array and maintained by `set`.
class SymMatrix {
 public:
  SymMatrix() = default;

  explicit SymMatrix(std::size_t dim) : dim_(dim), entries_(dim * dim, 0.0) {
    if (dim == 0) throw config_error("DimensionMismatch", "SymMatrix requires dim >= 1");
  }

  /// Builds from a full row-major array; rejects asymmetric input.
  SymMatrix(std::size_t dim, std::vector<double> entries) : dim_(dim), entries_(std::move(entries)) {
    if (dim == 0 || entries_.size() != dim * dim)
      throw config_error("DimensionMismatch", "SymMatrix entries must have dim*dim elements");
    for (std::size_t i = 0; i < dim; ++i)
      for (std::size_t j = i + 1; j < dim; ++j)
        if (entries_[i * dim + j] != entries_[j * dim + i])
          throw config_error("NotSymmetric", "entry (" + std::to_string(i) + "," + std::to_string(j) +
                                                 ") differs from its transpose");
  }

  SymMatrix(std::initializer_list<std::initializer_list<double>> rows) {
    std::vector<double> flat;
    for (const auto& r : rows) {
      if (r.size() != rows.size()) throw config_error("DimensionMismatch", "SymMatrix rows must be square");
      flat.insert(flat.end(), r.begin(), r.end());
    }
    *this = SymMatrix(rows.size(), std::move(flat));
  }

  static SymMatrix identity(std::size_t dim) {
    SymMatrix m(dim);
    for (std::size_t i = 0; i < dim; ++i) m.entries_[i * dim + i] = 1.0;
    return m;
  }

  std::size_t dim() const noexcept { return dim_; }
  double operator()(std::size_t i, std::size_t j) const noexcept { return entries_[i * dim_ + j]; }

  /// Writes both (i,j) and (j,i).
  void set(std::size_t i, std::size_t j, double v) noexcept {
    entries_[i * dim_ + j] = v;
    entries_[j * dim_ + i] = v;
  }

  std::span<const double> data() const noexcept { return entries_; }

  /// Leading principal submatrix of size k.
  SymMatrix leading(std::size_t k) const {
    SymMatrix out(k);
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < k; ++j) out.entries_[i * k + j] = entries_[i * dim_ + j];
    return out;
  }

  /// Trailing principal submatrix of size k (rows/cols dim-k .. dim-1).
  SymMatrix trailing(std::size_t k) const {
    SymMatrix out(k);
    const std::size_t off = dim_ - k;
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < k; ++j) out.entries_[i * k + j] = entries_[(off + i) * dim_ + off + j];
    return out;
  }

 private:
  std::size_t dim_ = 0;
  std::vector<double> entries_;
};

/// Lower-triangular Cholesky factor with strictly positive diagonal.
class CholFactor {
 public:
  std::size_t dim() const noexcept { return dim_; }
  double operator()(std::size_t i, std::size_t j) const noexcept { return lower_[i * dim_ + j]; }
  /// Jitter that was actually added to the diagonal to obtain this factor.
  double jitter() const noexcept { return jitter_; }

 private:
  friend CholFactor cholesky(const SymMatrix& s, double jitter);
  CholFactor(std::size_t dim, std::vector<double> lower, double jitter)
      : dim_(dim), lower_(std::move(lower)), jitter_(jitter) {}

  std::size_t dim_ = 0;
  std::vector<double> lower_;
  double jitter_ = 0.0;
};

namespace detail {

inline bool try_cholesky(const SymMatrix& s, double jitter, std::vector<double>& l) {
  const std::size_t n = s.dim();
  l.assign(n * n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    double d = s(j, j) + jitter;
    for (std::size_t k = 0; k < j; ++k) d -= l[j * n + k] * l[j * n + k];
    if (!(d > 0.0) || !std::isfinite(d)) return false;
    const double ljj = std::sqrt(d);
    l[j * n + j] = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double v = s(i, j);
      for (std::size_t k = 0; k < j; ++k) v -= l[i * n + k] * l[j * n + k];
      l[i * n + j] = v / ljj;
    }
  }
  return true;
}

inline void check_dim(const CholFactor& f, std::size_t n) {
  if (f.dim() != n)
    throw config_error("DimensionMismatch",
                       "vector length " + std::to_string(n) + " vs factor dim " + std::to_string(f.dim()));
}

}  // namespace detail

/// Factorizes S + jitter*I. If a pivot is not positive the factorization is
/// retried with jitter escalated to 1e-10, 1e-8, 1e-6 (never below the
/// requested jitter) before raising NotPositiveDefinite.
inline CholFactor cholesky(const SymMatrix& s, double jitter = 0.0) {
  if (jitter < 0.0) throw config_error("InvalidJitter", "jitter must be nonnegative");
  std::vector<double> l;
  if (detail::try_cholesky(s, jitter, l)) return CholFactor(s.dim(), std::move(l), jitter);
  for (double escalated : {1e-10, 1e-8, 1e-6}) {
    if (escalated <= jitter) continue;
    if (detail::try_cholesky(s, escalated, l)) return CholFactor(s.dim(), std::move(l), escalated);
  }
  throw numerical_error("NotPositiveDefinite",
                        "Cholesky pivot <= 0 for a " + std::to_string(s.dim()) + "x" + std::to_string(s.dim()) +
                            " matrix after jitter escalation");
}

/// Solves L y = b in place.
inline void forward_substitute(const CholFactor& f, std::span<double> b) {
  detail::check_dim(f, b.size());
  const std::size_t n = f.dim();
  for (std::size_t i = 0; i < n; ++i) {
    double v = b[i];
    for (std::size_t k = 0; k < i; ++k) v -= f(i, k) * b[k];
    b[i] = v / f(i, i);
  }
}

/// Solves L^T x = y in place.
inline void backward_substitute(const CholFactor& f, std::span<double> y) {
  detail::check_dim(f, y.size());
  const std::size_t n = f.dim();
  for (std::size_t ii = n; ii-- > 0;) {
    double v = y[ii];
    for (std::size_t k = ii + 1; k < n; ++k) v -= f(k, ii) * y[k];
    y[ii] = v / f(ii, ii);
  }
}

/// x with (L L^T) x = b.
inline Vector chol_solve(const CholFactor& f, std::span<const double> b) {
  detail::check_dim(f, b.size());
  Vector x(b.begin(), b.end());
  forward_substitute(f, x);
  backward_substitute(f, x);
  return x;
}

/// log det(L L^T) = 2 * sum log L_ii.
inline double log_det(const CholFactor& f) {
  double acc = 0.0;
  for (std::size_t i = 0; i < f.dim(); ++i) acc += std::log(f(i, i));
  return 2.0 * acc;
}

/// r^T (L L^T)^{-1} r, computed as ||L^{-1} r||^2.
inline double quad_form(const CholFactor& f, std::span<const double> r) {
  detail::check_dim(f, r.size());
  Vector y(r.begin(), r.end());
  forward_substitute(f, y);
  double acc = 0.0;
  for (double v : y) acc += v * v;
  return acc;
}

/// Full inverse (L L^T)^{-1} as a symmetric matrix.
inline SymMatrix chol_inverse(const CholFactor& f) {
  const std::size_t n = f.dim();
  std::vector<double> inv(n * n, 0.0);
  Vector col(n);
  for (std::size_t j = 0; j < n; ++j) {
    std::fill(col.begin(), col.end(), 0.0);
    col[j] = 1.0;
    forward_substitute(f, col);
    backward_substitute(f, col);
    for (std::size_t i = 0; i < n; ++i) inv[i * n + j] = col[i];
  }
  // Symmetrize to remove rounding asymmetry.
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = 0.5 * (inv[i * n + j] + inv[j * n + i]);
      inv[i * n + j] = v;
      inv[j * n + i] = v;
    }
  return SymMatrix(n, std::move(inv));
}

/// Reconstructs L L^T; used for verification.
inline SymMatrix reconstruct(const CholFactor& f) {
  const std::size_t n = f.dim();
  std::vector<double> out(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j <= i; ++j) {
      double v = 0.0;
      for (std::size_t k = 0; k <= j; ++k) v += f(i, k) * f(j, k);
      out[i * n + j] = v;
      out[j * n + i] = v;
    }
  return SymMatrix(n, std::move(out));
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

}  // namespace batchcast::linalg
