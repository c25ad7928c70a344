#ifndef SISEPI_LINALG_HPP
#define SISEPI_LINALG_HPP

#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <vector>

#include "sisepi/rng.hpp"

namespace sisepi {

/// Dense square matrix, row major. Only the handful of operations the
/// samplers need; dimensions here are tiny (parameter and statistic spaces).
class Matrix {
 public:
  Matrix() = default;
  explicit Matrix(std::size_t n, double fill = 0.0) : n_(n), data_(n * n, fill) {}

  static Matrix identity(std::size_t n, double scale = 1.0) {
    Matrix m(n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = scale;
    return m;
  }

  std::size_t size() const { return n_; }
  double& operator()(std::size_t i, std::size_t j) { return data_[i * n_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * n_ + j]; }

  Matrix& operator+=(const Matrix& other) {
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
    return *this;
  }

  Matrix& operator*=(double s) {
    for (auto& v : data_) v *= s;
    return *this;
  }

  void add_diagonal(double s) {
    for (std::size_t i = 0; i < n_; ++i) (*this)(i, i) += s;
  }

 private:
  std::size_t n_ = 0;
  std::vector<double> data_;
};

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
/// Empty when the matrix is not (numerically) positive definite.
inline std::optional<Matrix> cholesky(const Matrix& a) {
  const std::size_t n = a.size();
  Matrix l(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double sum = a(i, j);
      for (std::size_t k = 0; k < j; ++k) sum -= l(i, k) * l(j, k);
      if (i == j) {
        if (!(sum > 0.0) || !std::isfinite(sum)) return std::nullopt;
        l(i, i) = std::sqrt(sum);
      } else {
        l(i, j) = sum / l(j, j);
      }
    }
  }
  return l;
}

// Solves L y = b for lower-triangular L.
inline std::vector<double> forward_solve(const Matrix& l, const std::vector<double>& b) {
  const std::size_t n = l.size();
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    double sum = b[i];
    for (std::size_t k = 0; k < i; ++k) sum -= l(i, k) * y[k];
    y[i] = sum / l(i, i);
  }
  return y;
}

inline double log_det_from_cholesky(const Matrix& l) {
  double sum = 0.0;
  for (std::size_t i = 0; i < l.size(); ++i) sum += std::log(l(i, i));
  return 2.0 * sum;
}

/// theta = mean + L z with z standard normal; L a Cholesky factor.
inline std::vector<double> mvn_sample(const std::vector<double>& mean, const Matrix& l, Rng& rng) {
  const std::size_t n = mean.size();
  std::vector<double> z(n);
  for (auto& v : z) v = rng.normal();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    double sum = mean[i];
    for (std::size_t k = 0; k <= i; ++k) sum += l(i, k) * z[k];
    out[i] = sum;
  }
  return out;
}

/// log N(x | mean, Sigma) via the Cholesky factor of Sigma.
inline double mvn_log_density(const std::vector<double>& x, const std::vector<double>& mean,
                              const Matrix& l) {
  const std::size_t n = x.size();
  std::vector<double> r(n);
  for (std::size_t i = 0; i < n; ++i) r[i] = x[i] - mean[i];
  const auto y = forward_solve(l, r);
  double quad = 0.0;
  for (double v : y) quad += v * v;
  constexpr double kLog2Pi = 1.8378770664093454836;
  return -0.5 * quad - 0.5 * log_det_from_cholesky(l) -
         0.5 * static_cast<double>(n) * kLog2Pi;
}

// Mean and unbiased sample covariance (divisor n-1) of row vectors.
inline std::vector<double> column_means(const std::vector<std::vector<double>>& rows) {
  const std::size_t d = rows.at(0).size();
  std::vector<double> mean(d, 0.0);
  for (const auto& r : rows)
    for (std::size_t j = 0; j < d; ++j) mean[j] += r[j];
  for (auto& v : mean) v /= static_cast<double>(rows.size());
  return mean;
}

inline Matrix sample_covariance(const std::vector<std::vector<double>>& rows) {
  const std::size_t n = rows.size();
  const std::size_t d = rows.at(0).size();
  if (n < 2) throw std::invalid_argument("sample covariance needs at least 2 rows");
  const auto mean = column_means(rows);
  Matrix cov(d);
  for (const auto& r : rows)
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) cov(i, j) += (r[i] - mean[i]) * (r[j] - mean[j]);
  cov *= 1.0 / static_cast<double>(n - 1);
  return cov;
}

}  // namespace sisepi

#endif
