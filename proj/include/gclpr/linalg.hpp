#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "gclpr/error.hpp"

namespace gclpr::linalg {

/// Dense row-major matrix of doubles. Sized for the small normal-equation
/// systems of local fits, not for large-scale work.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const {
    return {data_.data() + i * cols_, cols_};
  }

  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }

  bool all_finite() const {
    for (double v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline Matrix transpose(const Matrix& a) {
  Matrix t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

inline Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw DimensionError("matmul: inner dimensions disagree");
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
    }
  }
  return c;
}

inline std::vector<double> matvec(const Matrix& a, std::span<const double> x) {
  if (a.cols() != x.size()) throw DimensionError("matvec: size mismatch");
  std::vector<double> y(a.rows(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j) s += a(i, j) * x[j];
    y[i] = s;
  }
  return y;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("dot: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

namespace detail {

// In-place lower Cholesky. Returns false on a non-positive or non-finite
// pivot instead of throwing so callers can retry with a ridge.
inline bool cholesky_in_place(Matrix& a) {
  const std::size_t n = a.rows();
  for (std::size_t j = 0; j < n; ++j) {
    double d = a(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= a(j, k) * a(j, k);
    if (!(d > 0.0) || !std::isfinite(d)) return false;
    const double ljj = std::sqrt(d);
    a(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= a(i, k) * a(j, k);
      a(i, j) = s / ljj;
    }
  }
  return true;
}

inline std::vector<double> cholesky_solve(const Matrix& l, std::span<const double> b) {
  const std::size_t n = l.rows();
  std::vector<double> x(b.begin(), b.end());
  for (std::size_t i = 0; i < n; ++i) {
    double s = x[i];
    for (std::size_t k = 0; k < i; ++k) s -= l(i, k) * x[k];
    x[i] = s / l(i, i);
  }
  for (std::size_t ii = n; ii > 0; --ii) {
    const std::size_t i = ii - 1;
    double s = x[i];
    for (std::size_t k = i + 1; k < n; ++k) s -= l(k, i) * x[k];
    x[i] = s / l(i, i);
  }
  return x;
}

inline void check_spd_inputs(const Matrix& a, std::size_t bsize) {
  if (a.rows() != a.cols()) throw DimensionError("solve_spd: matrix not square");
  if (a.rows() != bsize) throw DimensionError("solve_spd: rhs size mismatch");
  if (!a.all_finite()) throw NonFiniteError("solve_spd: non-finite matrix entry");
  double scale = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) scale = std::max(scale, std::abs(a(i, j)));
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = i + 1; j < a.cols(); ++j)
      if (std::abs(a(i, j) - a(j, i)) > 1e-10 * std::max(1.0, scale))
        throw DimensionError("solve_spd: matrix not symmetric");
}

// Shared ridge-escalation driver: calls attempt(lambda) with lambda = 0 first,
// then multiplier * trace/n for multiplier = floor, 10*floor, ... up to 1e-2.
template <typename Attempt>
void ridge_ladder(const Matrix& a, double ridge_floor, Attempt&& attempt) {
  const std::size_t n = a.rows();
  if (attempt(0.0)) return;
  double trace = 0.0;
  for (std::size_t i = 0; i < n; ++i) trace += a(i, i);
  const double unit = trace / static_cast<double>(n);
  if (ridge_floor > 0.0 && unit > 0.0) {
    for (double mult = ridge_floor; mult <= 1e-2 * (1.0 + 1e-12); mult *= 10.0) {
      if (attempt(mult * unit)) return;
    }
  }
  throw SingularError("solve_spd: matrix singular after ridge escalation");
}

}  // namespace detail

/// Solves a x = b for a symmetric positive definite. When the plain Cholesky
/// factorization fails, retries with a + lambda I for lambda on a geometric
/// ladder from ridge_floor*trace/n up to 1e-2*trace/n, then throws
/// SingularError. Throws NonFiniteError on NaN/inf input.
inline std::vector<double> solve_spd(const Matrix& a, std::span<const double> b,
                                     double ridge_floor = 1e-8) {
  detail::check_spd_inputs(a, b.size());
  for (double v : b)
    if (!std::isfinite(v)) throw NonFiniteError("solve_spd: non-finite rhs entry");
  std::vector<double> x;
  detail::ridge_ladder(a, ridge_floor, [&](double lambda) {
    Matrix l = a;
    for (std::size_t i = 0; i < l.rows(); ++i) l(i, i) += lambda;
    if (!detail::cholesky_in_place(l)) return false;
    x = detail::cholesky_solve(l, b);
    return true;
  });
  return x;
}

/// Inverse of a symmetric positive definite matrix, with the same ridge
/// ladder as solve_spd. Result is exactly symmetric.
inline Matrix invert_spd(const Matrix& a, double ridge_floor = 1e-8) {
  detail::check_spd_inputs(a, a.rows());
  const std::size_t n = a.rows();
  Matrix inv(n, n);
  detail::ridge_ladder(a, ridge_floor, [&](double lambda) {
    Matrix l = a;
    for (std::size_t i = 0; i < n; ++i) l(i, i) += lambda;
    if (!detail::cholesky_in_place(l)) return false;
    std::vector<double> e(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      e[j] = 1.0;
      const std::vector<double> col = detail::cholesky_solve(l, e);
      for (std::size_t i = 0; i < n; ++i) inv(i, j) = col[i];
      e[j] = 0.0;
    }
    return true;
  });
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double s = 0.5 * (inv(i, j) + inv(j, i));
      inv(i, j) = s;
      inv(j, i) = s;
    }
  return inv;
}

/// Sample covariance (denominator n-1) of the rows of x.
/// Requires at least two rows.
inline Matrix covariance(const Matrix& x) {
  const std::size_t n = x.rows();
  const std::size_t d = x.cols();
  if (n < 2) throw DegenerateError("covariance: needs at least two rows");
  if (!x.all_finite()) throw NonFiniteError("covariance: non-finite entry");
  std::vector<double> mean(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) mean[j] += x(i, j);
  for (double& m : mean) m /= static_cast<double>(n);
  Matrix c(d, d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t a = 0; a < d; ++a) {
      const double da = x(i, a) - mean[a];
      for (std::size_t b = a; b < d; ++b) c(a, b) += da * (x(i, b) - mean[b]);
    }
  }
  const double denom = static_cast<double>(n - 1);
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t b = a; b < d; ++b) {
      c(a, b) /= denom;
      c(b, a) = c(a, b);
    }
  return c;
}

/// Column-wise affine map fitted on training data: (x - mean) / scale.
/// Zero-variance columns get scale 1, so they map to exactly 0 in training.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;

  static Standardizer fit(const Matrix& x) {
    const std::size_t n = x.rows();
    const std::size_t d = x.cols();
    Standardizer s;
    s.mean.assign(d, 0.0);
    s.scale.assign(d, 1.0);
    if (n == 0) return s;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j) s.mean[j] += x(i, j);
    for (double& m : s.mean) m /= static_cast<double>(n);
    if (n >= 2) {
      for (std::size_t j = 0; j < d; ++j) {
        double ss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          const double dv = x(i, j) - s.mean[j];
          ss += dv * dv;
        }
        const double sd = std::sqrt(ss / static_cast<double>(n - 1));
        if (sd > 0.0) s.scale[j] = sd;
      }
    }
    return s;
  }

  static Standardizer identity(std::size_t d) {
    Standardizer s;
    s.mean.assign(d, 0.0);
    s.scale.assign(d, 1.0);
    return s;
  }

  void apply_row(std::span<const double> in, std::span<double> out) const {
    for (std::size_t j = 0; j < mean.size(); ++j) out[j] = (in[j] - mean[j]) / scale[j];
  }

  Matrix apply(const Matrix& x) const {
    if (x.cols() != mean.size()) throw DimensionError("Standardizer: column mismatch");
    Matrix out(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.rows(); ++i) apply_row(x.row(i), out.row(i));
    return out;
  }
};

}  // namespace gclpr::linalg
