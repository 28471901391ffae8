#pragma once

// Dense row-major matrices and the handful of kernels ridge regression needs:
// products, Gram matrices and a Cholesky-based SPD solve. Solver math is
// always double precision; float matrices are promoted on entry.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <sstream>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "elmdoc/error.hpp"
#include "elmdoc/parallel.hpp"

namespace elmdoc {

template <class T = double>
class Matrix {
  static_assert(std::is_floating_point_v<T>);

 public:
  using value_type = T;

  Matrix() = default;

  Matrix(std::size_t rows, std::size_t cols, T fill = T{0})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  /// Takes ownership of row-major data; rejects wrong lengths and NaN/Inf.
  Matrix(std::size_t rows, std::size_t cols, std::vector<T> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      throw DimensionError("matrix data has " + std::to_string(data_.size()) + " entries, expected " +
                           std::to_string(rows_) + "x" + std::to_string(cols_));
    }
    for (std::size_t i = 0; i < data_.size(); ++i) {
      if (!std::isfinite(data_[i])) {
        throw ValueError("non-finite matrix entry at (" + std::to_string(i / std::max<std::size_t>(cols_, 1)) +
                         ", " + std::to_string(i % std::max<std::size_t>(cols_, 1)) + ")");
      }
    }
  }

  Matrix(std::initializer_list<std::initializer_list<T>> rows) {
    rows_ = rows.size();
    cols_ = rows_ ? rows.begin()->size() : 0;
    std::vector<T> data;
    data.reserve(rows_ * cols_);
    for (const auto& r : rows) {
      if (r.size() != cols_) throw DimensionError("ragged matrix literal");
      data.insert(data.end(), r.begin(), r.end());
    }
    *this = Matrix(rows_, cols_, std::move(data));
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = T{1};
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<T> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const T> row(std::size_t r) const noexcept { return {data_.data() + r * cols_, cols_}; }

  T* data() noexcept { return data_.data(); }
  const T* data() const noexcept { return data_.data(); }
  std::span<const T> values() const noexcept { return data_; }

  template <class U>
  Matrix<U> cast() const {
    Matrix<U> out(rows_, cols_);
    std::transform(data_.begin(), data_.end(), out.data(), [](T v) { return static_cast<U>(v); });
    return out;
  }

  std::string shape() const { return std::to_string(rows_) + "x" + std::to_string(cols_); }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

using DenseMatrix = Matrix<double>;
using FloatMatrix = Matrix<float>;

namespace detail {

// Accumulator width in elements: one cache line, which the compiler maps
// onto however many vector registers the target has.
template <class T>
inline constexpr std::size_t kLanes = 64 / sizeof(T);

template <class T>
T dot(const T* a, const T* b, std::size_t n) noexcept {
  constexpr std::size_t L = kLanes<T>;
  T acc[L] = {};
  const std::size_t nv = n / L * L;
  for (std::size_t k = 0; k < nv; k += L)
    for (std::size_t l = 0; l < L; ++l) acc[l] += a[k + l] * b[k + l];
  T s{0};
  for (std::size_t l = 0; l < L; ++l) s += acc[l];
  for (std::size_t k = nv; k < n; ++k) s += a[k] * b[k];
  return s;
}

// C (m x n) = A (m x k) * B(n x k)^T, all row-major and contiguous.
// With lower_only set, tiles strictly above the diagonal are skipped.
template <class T>
void gemm_nt(const T* A, const T* B, T* C, std::size_t m, std::size_t n, std::size_t k, bool lower_only = false) {
  constexpr std::size_t L = kLanes<T>;
  constexpr std::size_t MR = 4;
  constexpr std::size_t NR = 2;
  constexpr std::size_t KB = 256;
  constexpr std::size_t JB = 64;

  std::fill(C, C + m * n, T{0});
  const std::size_t tiles = (m + MR - 1) / MR;

  parallel_for(0, tiles, [&](std::size_t t0, std::size_t t1) {
    for (std::size_t k0 = 0; k0 < k; k0 += KB) {
      const std::size_t k1 = std::min(k, k0 + KB);
      const std::size_t kv = k0 + (k1 - k0) / L * L;
      for (std::size_t j0 = 0; j0 < n; j0 += JB) {
        const std::size_t j1 = std::min(n, j0 + JB);
        for (std::size_t t = t0; t < t1; ++t) {
          const std::size_t i = t * MR;
          const std::size_t mr = std::min(MR, m - i);
          const std::size_t jend = lower_only ? std::min(j1, i + mr) : j1;
          for (std::size_t j = j0; j < jend; j += NR) {
            const std::size_t nr = std::min(NR, jend - j);
            if (mr == MR && nr == NR) {
              T acc[MR][NR][L] = {};
              for (std::size_t kk = k0; kk < kv; kk += L)
                for (std::size_t r = 0; r < MR; ++r)
                  for (std::size_t c = 0; c < NR; ++c)
                    for (std::size_t l = 0; l < L; ++l)
                      acc[r][c][l] += A[(i + r) * k + kk + l] * B[(j + c) * k + kk + l];
              for (std::size_t r = 0; r < MR; ++r)
                for (std::size_t c = 0; c < NR; ++c) {
                  T s{0};
                  for (std::size_t l = 0; l < L; ++l) s += acc[r][c][l];
                  for (std::size_t kk = kv; kk < k1; ++kk) s += A[(i + r) * k + kk] * B[(j + c) * k + kk];
                  C[(i + r) * n + j + c] += s;
                }
            } else {
              for (std::size_t r = 0; r < mr; ++r)
                for (std::size_t c = 0; c < nr; ++c)
                  C[(i + r) * n + j + c] += dot(A + (i + r) * k + k0, B + (j + c) * k + k0, k1 - k0);
            }
          }
        }
      }
    }
  });
}

// C (m x n) = A (m x k) * B (k x n), row-major. Vectorized across output
// columns, so every C(i, j) is summed over k in index order, the same
// sequence of roundings as the textbook triple loop.
template <class T>
void gemm_nn(const T* A, const T* B, T* C, std::size_t m, std::size_t n, std::size_t k) {
  constexpr std::size_t MR = 4;
  constexpr std::size_t JW = 2 * kLanes<T>;
  const std::size_t tiles = (m + MR - 1) / MR;
  parallel_for(0, tiles, [&](std::size_t t0, std::size_t t1) {
    for (std::size_t t = t0; t < t1; ++t) {
      const std::size_t i = t * MR;
      const std::size_t mr = std::min(MR, m - i);
      std::size_t j = 0;
      if (mr == MR) {
        for (; j + JW <= n; j += JW) {
          T acc[MR][JW] = {};
          for (std::size_t p = 0; p < k; ++p) {
            const T* b = B + p * n + j;
            for (std::size_t r = 0; r < MR; ++r) {
              const T a = A[(i + r) * k + p];
              for (std::size_t l = 0; l < JW; ++l) acc[r][l] += a * b[l];
            }
          }
          for (std::size_t r = 0; r < MR; ++r) std::copy(acc[r], acc[r] + JW, C + (i + r) * n + j);
        }
      }
      for (std::size_t r = 0; r < mr; ++r)
        for (std::size_t jj = j; jj < n; ++jj) {
          T s{0};
          for (std::size_t p = 0; p < k; ++p) s += A[(i + r) * k + p] * B[p * n + jj];
          C[(i + r) * n + jj] = s;
        }
    }
  });
}

inline std::string shapes(const char* op, std::size_t ar, std::size_t ac, std::size_t br, std::size_t bc) {
  std::ostringstream os;
  os << op << ": incompatible shapes " << ar << "x" << ac << " and " << br << "x" << bc;
  return os.str();
}

}  // namespace detail

template <class T>
Matrix<T> transpose(const Matrix<T>& a) {
  Matrix<T> t(a.cols(), a.rows());
  constexpr std::size_t B = 32;
  for (std::size_t i0 = 0; i0 < a.rows(); i0 += B)
    for (std::size_t j0 = 0; j0 < a.cols(); j0 += B)
      for (std::size_t i = i0; i < std::min(a.rows(), i0 + B); ++i)
        for (std::size_t j = j0; j < std::min(a.cols(), j0 + B); ++j) t(j, i) = a(i, j);
  return t;
}

/// a * b^T.
template <class T>
Matrix<T> matmul_nt(const Matrix<T>& a, const Matrix<T>& b) {
  if (a.cols() != b.cols())
    throw DimensionError(detail::shapes("matmul_nt", a.rows(), a.cols(), b.rows(), b.cols()));
  Matrix<T> c(a.rows(), b.rows());
  detail::gemm_nt(a.data(), b.data(), c.data(), a.rows(), b.rows(), a.cols());
  return c;
}

template <class T>
Matrix<T> matmul(const Matrix<T>& a, const Matrix<T>& b) {
  if (a.cols() != b.rows()) throw DimensionError(detail::shapes("matmul", a.rows(), a.cols(), b.rows(), b.cols()));
  Matrix<T> c(a.rows(), b.cols());
  detail::gemm_nn(a.data(), b.data(), c.data(), a.rows(), b.cols(), a.cols());
  return c;
}

/// a^T * b.
template <class T>
Matrix<T> matmul_tn(const Matrix<T>& a, const Matrix<T>& b) {
  if (a.rows() != b.rows())
    throw DimensionError(detail::shapes("matmul_tn", a.rows(), a.cols(), b.rows(), b.cols()));
  return matmul_nt(transpose(a), transpose(b));
}

/// a^T a in double precision. Exactly symmetric: the lower triangle is
/// computed and mirrored.
template <class T>
DenseMatrix gram(const Matrix<T>& a) {
  if (a.empty()) throw DimensionError("gram: empty matrix");
  DenseMatrix at = transpose(a).template cast<double>();
  const std::size_t n = at.rows();
  DenseMatrix g(n, n);
  detail::gemm_nt(at.data(), at.data(), g.data(), n, n, at.cols(), /*lower_only=*/true);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) g(i, j) = g(j, i);
  return g;
}

template <class T>
double frobenius_norm(const Matrix<T>& a) {
  double s = 0;
  for (T v : a.values()) s += static_cast<double>(v) * static_cast<double>(v);
  return std::sqrt(s);
}

template <class T>
Matrix<T> operator-(const Matrix<T>& a, const Matrix<T>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw DimensionError(detail::shapes("subtract", a.rows(), a.cols(), b.rows(), b.cols()));
  Matrix<T> c(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) c.data()[i] = a.data()[i] - b.data()[i];
  return c;
}

template <class T>
Matrix<T> operator+(const Matrix<T>& a, const Matrix<T>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw DimensionError(detail::shapes("add", a.rows(), a.cols(), b.rows(), b.cols()));
  Matrix<T> c(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) c.data()[i] = a.data()[i] + b.data()[i];
  return c;
}

/// Lower-triangular Cholesky factor of an SPD matrix (row-oriented Crout
/// order). Throws SolverError carrying the index of the first non-positive
/// pivot.
inline DenseMatrix cholesky(const DenseMatrix& a) {
  if (a.rows() != a.cols()) throw DimensionError("cholesky: matrix is " + a.shape() + ", not square");
  const std::size_t n = a.rows();
  DenseMatrix l(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    const double* li = l.data() + i * n;
    for (std::size_t j = 0; j < i; ++j) {
      const double s = a(i, j) - detail::dot(li, l.data() + j * n, j);
      l(i, j) = s / l(j, j);
    }
    const double d = a(i, i) - detail::dot(li, li, i);
    if (!(d > 0.0) || !std::isfinite(d)) {
      throw SolverError("cholesky: non-positive pivot " + std::to_string(d) + " at index " + std::to_string(i) +
                            "; matrix is not positive definite",
                        i);
    }
    l(i, i) = std::sqrt(d);
  }
  return l;
}

/// Solves L L^T X = B in place of B.
inline DenseMatrix cholesky_solve(const DenseMatrix& l, DenseMatrix b) {
  const std::size_t n = l.rows();
  const std::size_t m = b.cols();
  if (b.rows() != n) throw DimensionError(detail::shapes("cholesky_solve", n, n, b.rows(), b.cols()));
  // forward: L y = b
  for (std::size_t i = 0; i < n; ++i) {
    double* bi = b.data() + i * m;
    for (std::size_t k = 0; k < i; ++k) {
      const double lik = l(i, k);
      if (lik == 0.0) continue;
      const double* bk = b.data() + k * m;
      for (std::size_t c = 0; c < m; ++c) bi[c] -= lik * bk[c];
    }
    const double inv = 1.0 / l(i, i);
    for (std::size_t c = 0; c < m; ++c) bi[c] *= inv;
  }
  // backward: L^T x = y, eliminating with rows of L
  for (std::size_t i = n; i-- > 0;) {
    double* bi = b.data() + i * m;
    const double inv = 1.0 / l(i, i);
    for (std::size_t c = 0; c < m; ++c) bi[c] *= inv;
    for (std::size_t k = 0; k < i; ++k) {
      const double lik = l(i, k);
      if (lik == 0.0) continue;
      double* bk = b.data() + k * m;
      for (std::size_t c = 0; c < m; ++c) bk[c] -= lik * bi[c];
    }
  }
  return b;
}

inline constexpr double kSymmetryTolerance = 1e-10;

/// Solves a X = b for symmetric positive definite a. The input is checked
/// for symmetry (relative to its largest entry), symmetrized and factored.
inline DenseMatrix spd_solve(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != a.cols()) throw DimensionError("spd_solve: matrix is " + a.shape() + ", not square");
  if (b.rows() != a.rows()) throw DimensionError(detail::shapes("spd_solve", a.rows(), a.cols(), b.rows(), b.cols()));
  const std::size_t n = a.rows();
  double scale = 0;
  for (double v : a.values()) scale = std::max(scale, std::abs(v));
  DenseMatrix sym(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      const double lo = a(i, j);
      const double hi = a(j, i);
      if (std::abs(lo - hi) > kSymmetryTolerance * scale) {
        throw SolverError("spd_solve: matrix is not symmetric at (" + std::to_string(i) + ", " + std::to_string(j) +
                          ")");
      }
      sym(i, j) = sym(j, i) = 0.5 * (lo + hi);
    }
  }
  return cholesky_solve(cholesky(sym), b);
}

}  // namespace elmdoc
