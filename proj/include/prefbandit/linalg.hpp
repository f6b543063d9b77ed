#pragma once

// Dense matrices just big enough for ridge accumulators and their SPD solves.
// Row-major storage; Cholesky factorization with forward/back substitution.

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace prefbandit {

struct Mat {
  int rows = 0, cols = 0;
  std::vector<double> a;

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * static_cast<std::size_t>(c), 0.0) {}

  double& operator()(int i, int j) { return a[static_cast<std::size_t>(i) * static_cast<std::size_t>(cols) + static_cast<std::size_t>(j)]; }
  double operator()(int i, int j) const { return a[static_cast<std::size_t>(i) * static_cast<std::size_t>(cols) + static_cast<std::size_t>(j)]; }

  static Mat identity(int n, double scale = 1.0) {
    Mat m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = scale;
    return m;
  }
};

inline void add_outer(Mat& m, const std::vector<double>& x, const std::vector<double>& y, double scale = 1.0) {
  if (m.rows != static_cast<int>(x.size()) || m.cols != static_cast<int>(y.size()))
    throw std::invalid_argument("add_outer: shape mismatch");
  for (int i = 0; i < m.rows; ++i)
    for (int j = 0; j < m.cols; ++j) m(i, j) += scale * x[static_cast<std::size_t>(i)] * y[static_cast<std::size_t>(j)];
}

inline void add_mat(Mat& m, const Mat& other, double scale = 1.0) {
  if (m.rows != other.rows || m.cols != other.cols) throw std::invalid_argument("add_mat: shape mismatch");
  for (std::size_t i = 0; i < m.a.size(); ++i) m.a[i] += scale * other.a[i];
}

inline std::vector<double> matvec(const Mat& m, const std::vector<double>& x) {
  if (m.cols != static_cast<int>(x.size())) throw std::invalid_argument("matvec: shape mismatch");
  std::vector<double> y(static_cast<std::size_t>(m.rows), 0.0);
  for (int i = 0; i < m.rows; ++i) {
    double s = 0.0;
    for (int j = 0; j < m.cols; ++j) s += m(i, j) * x[static_cast<std::size_t>(j)];
    y[static_cast<std::size_t>(i)] = s;
  }
  return y;
}

// y = m^T x
inline std::vector<double> matvec_t(const Mat& m, const std::vector<double>& x) {
  if (m.rows != static_cast<int>(x.size())) throw std::invalid_argument("matvec_t: shape mismatch");
  std::vector<double> y(static_cast<std::size_t>(m.cols), 0.0);
  for (int i = 0; i < m.rows; ++i)
    for (int j = 0; j < m.cols; ++j) y[static_cast<std::size_t>(j)] += m(i, j) * x[static_cast<std::size_t>(i)];
  return y;
}

inline double dot(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw std::invalid_argument("dot: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

// Lower-triangular Cholesky factor of an SPD matrix.
struct CholFactor {
  Mat L;

  std::vector<double> solve(const std::vector<double>& b) const {
    const int n = L.rows;
    if (static_cast<int>(b.size()) != n) throw std::invalid_argument("chol solve: length mismatch");
    std::vector<double> y(b);
    for (int i = 0; i < n; ++i) {
      double s = y[static_cast<std::size_t>(i)];
      for (int j = 0; j < i; ++j) s -= L(i, j) * y[static_cast<std::size_t>(j)];
      y[static_cast<std::size_t>(i)] = s / L(i, i);
    }
    for (int i = n - 1; i >= 0; --i) {
      double s = y[static_cast<std::size_t>(i)];
      for (int j = i + 1; j < n; ++j) s -= L(j, i) * y[static_cast<std::size_t>(j)];
      y[static_cast<std::size_t>(i)] = s / L(i, i);
    }
    return y;
  }

  // x^T A^-1 x via one forward substitution.
  double quad_inv(const std::vector<double>& x) const {
    const int n = L.rows;
    if (static_cast<int>(x.size()) != n) throw std::invalid_argument("quad_inv: length mismatch");
    std::vector<double> y(x);
    double q = 0.0;
    for (int i = 0; i < n; ++i) {
      double s = y[static_cast<std::size_t>(i)];
      for (int j = 0; j < i; ++j) s -= L(i, j) * y[static_cast<std::size_t>(j)];
      s /= L(i, i);
      y[static_cast<std::size_t>(i)] = s;
      q += s * s;
    }
    return q;
  }
};

inline CholFactor cholesky(const Mat& m) {
  if (m.rows != m.cols) throw std::invalid_argument("cholesky: not square");
  const int n = m.rows;
  CholFactor f;
  f.L = Mat(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j <= i; ++j) {
      double s = m(i, j);
      for (int k = 0; k < j; ++k) s -= f.L(i, k) * f.L(j, k);
      if (i == j) {
        if (s <= 0.0 || !std::isfinite(s)) throw std::domain_error("cholesky: matrix not positive definite");
        f.L(i, j) = std::sqrt(s);
      } else {
        f.L(i, j) = s / f.L(j, j);
      }
    }
  }
  return f;
}

}  // namespace prefbandit
