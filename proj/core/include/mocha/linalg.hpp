#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <vector>

namespace mocha::linalg {

// Dense row-major f64 matrix. Just now enough for the linear encoders.
class Mat {
 public:
  Mat() = default;
  Mat(size_t rows, size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  size_t rows() const { return rows_; }
  size_t cols() const { return cols_; }
  double& operator()(size_t r, size_t c) { return data_[r * cols_ + c]; }
  double operator()(size_t r, size_t c) const { return data_[r * cols_ + c]; }
  double* row(size_t r) { return data_.data() + r * cols_; }
  const double* row(size_t r) const { return data_.data() + r * cols_; }
  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool operator==(const Mat& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_ && data_ == o.data_;
  }

 private:
  size_t rows_ = 0;
  size_t cols_ = 0;
  std::vector<double> data_;
};

inline double dot(const double* a, const double* b, size_t n) {
  double s = 0.0;
  for (size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

inline double sqdist(const double* a, const double* b, size_t n) {
  double s = 0.0;
  for (size_t i = 0; i < n; ++i) {
    double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

inline double norm(const double* a, size_t n) { return std::sqrt(dot(a, a, n)); }

// Cosine of two unit vectors, computed through the squared chord so that
// bitwise-identical inputs give exactly 1.
inline double unit_cos(const double* a, const double* b, size_t n) {
  return 1.0 - 0.5 * sqdist(a, b, n);
}

// Angle in degrees between unit vectors via the chord, exact 0 for
// bitwise-identical inputs and accurate for small angles.
inline double unit_angle_deg(const double* a, const double* b, size_t n) {
  double half_chord = 0.5 * std::sqrt(sqdist(a, b, n));
  if (half_chord > 1.0) half_chord = 1.0;
  return 2.0 * std::asin(half_chord) * 180.0 / M_PI;
}

// S = A * B^T where A is n x d and B is m x d.
inline Mat gram(const Mat& a, const Mat& b) {
  assert(a.cols() == b.cols());
  Mat s(a.rows(), b.rows());
  for (size_t i = 0; i < a.rows(); ++i)
    for (size_t j = 0; j < b.rows(); ++j) s(i, j) = dot(a.row(i), b.row(j), a.cols());
  return s;
}

// C = A * B where A is n x m and B is m x d.
inline Mat matmul(const Mat& a, const Mat& b) {
  assert(a.cols() == b.rows());
  Mat c(a.rows(), b.cols());
  for (size_t i = 0; i < a.rows(); ++i) {
    for (size_t k = 0; k < a.cols(); ++k) {
      double aik = a(i, k);
      if (aik == 0.0) continue;
      const double* brow = b.row(k);
      double* crow = c.row(i);
      for (size_t j = 0; j < b.cols(); ++j) crow[j] += aik * brow[j];
    }
  }
  return c;
}

// C = A^T * B where A is n x m and B is n x d.
inline Mat matmul_tn(const Mat& a, const Mat& b) {
  assert(a.rows() == b.rows());
  Mat c(a.cols(), b.cols());
  for (size_t k = 0; k < a.rows(); ++k) {
    for (size_t i = 0; i < a.cols(); ++i) {
      double aki = a(k, i);
      if (aki == 0.0) continue;
      const double* brow = b.row(k);
      double* crow = c.row(i);
      for (size_t j = 0; j < b.cols(); ++j) crow[j] += aki * brow[j];
    }
  }
  return c;
}

}  // namespace mocha::linalg
