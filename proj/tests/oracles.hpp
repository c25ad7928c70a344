// Test-side reference implementations, kept independent of the library code
// paths they check.
#ifndef SISEPI_TESTS_ORACLES_HPP
#define SISEPI_TESTS_ORACLES_HPP

#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace oracles {

// Dense matrices as nested vectors; sizes here are tiny.
using Mat = std::vector<std::vector<double>>;

inline Mat mat_mul(const Mat& a, const Mat& b) {
  const std::size_t n = a.size();
  Mat c(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t j = 0; j < n; ++j) c[i][j] += a[i][k] * b[k][j];
  return c;
}

inline Mat mat_identity(std::size_t n) {
  Mat m(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) m[i][i] = 1.0;
  return m;
}

// Matrix exponential by scaling-and-squaring with a Taylor series. Accurate
// enough at the generator norms used in the tests.
inline Mat expm(Mat a) {
  const std::size_t n = a.size();
  double norm = 0.0;
  for (const auto& row : a) {
    double s = 0.0;
    for (double v : row) s += std::abs(v);
    norm = std::max(norm, s);
  }
  int squarings = 0;
  while (norm > 0.5) {
    norm /= 2.0;
    ++squarings;
  }
  const double scale = std::ldexp(1.0, -squarings);
  for (auto& row : a)
    for (auto& v : row) v *= scale;

  Mat result = mat_identity(n);
  Mat term = mat_identity(n);
  for (int k = 1; k <= 24; ++k) {
    term = mat_mul(term, a);
    const double inv = 1.0 / static_cast<double>(k);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        term[i][j] *= inv;
        result[i][j] += term[i][j];
      }
  }
  for (int s = 0; s < squarings; ++s) result = mat_mul(result, result);
  return result;
}

/// Transient distribution of the single-node SIS jump chain with frozen phi:
/// states are I = 0..n, infection rate upsilon*phi*(n-I), recovery gamma*I.
/// Returns P(I(t) = j | I(0) = i0).
inline std::vector<double> sis_master_equation(std::int64_t n, std::int64_t i0, double upsilon,
                                               double phi, double gamma, double t) {
  const auto dim = static_cast<std::size_t>(n + 1);
  Mat generator(dim, std::vector<double>(dim, 0.0));
  for (std::size_t i = 0; i < dim; ++i) {
    const double up = upsilon * phi * static_cast<double>(n - static_cast<std::int64_t>(i));
    const double down = gamma * static_cast<double>(i);
    if (i + 1 < dim) generator[i][i + 1] = up;
    if (i > 0) generator[i][i - 1] = down;
    generator[i][i] = -(up + down);
  }
  for (auto& row : generator)
    for (auto& v : row) v *= t;
  const Mat p = expm(generator);
  return p[static_cast<std::size_t>(i0)];
}

inline double ln_binomial(std::int64_t n, std::int64_t k) {
  return std::lgamma(static_cast<double>(n + 1)) - std::lgamma(static_cast<double>(k + 1)) -
         std::lgamma(static_cast<double>(n - k + 1));
}

/// Exact hypergeometric pmf: k marked among `draws` draws from a population
/// `total` with `marked` marked.
inline double hypergeometric_pmf(std::int64_t total, std::int64_t marked, std::int64_t draws,
                                 std::int64_t k) {
  if (k < 0 || k > marked || k > draws || draws - k > total - marked) return 0.0;
  return std::exp(ln_binomial(marked, k) + ln_binomial(total - marked, draws - k) -
                  ln_binomial(total, draws));
}

/// Upper-tail chi-square p-value for observed counts against expected
/// probabilities, pooling cells with expected count below `min_expected`.
inline double chi_square_p_value(const std::vector<std::int64_t>& observed,
                                 const std::vector<double>& probabilities,
                                 double min_expected = 5.0) {
  if (observed.size() != probabilities.size())
    throw std::invalid_argument("chi-square inputs must have equal length");
  std::int64_t total = 0;
  for (auto c : observed) total += c;
  std::vector<double> expected_pool;
  std::vector<double> observed_pool;
  double e_acc = 0.0;
  double o_acc = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    e_acc += probabilities[i] * static_cast<double>(total);
    o_acc += static_cast<double>(observed[i]);
    if (e_acc >= min_expected) {
      expected_pool.push_back(e_acc);
      observed_pool.push_back(o_acc);
      e_acc = 0.0;
      o_acc = 0.0;
    }
  }
  if (e_acc > 0.0 && !expected_pool.empty()) {
    expected_pool.back() += e_acc;
    observed_pool.back() += o_acc;
  }
  if (expected_pool.size() < 2) throw std::invalid_argument("chi-square needs >= 2 pooled cells");
  double stat = 0.0;
  for (std::size_t i = 0; i < expected_pool.size(); ++i) {
    const double d = observed_pool[i] - expected_pool[i];
    stat += d * d / expected_pool[i];
  }
  boost::math::chi_squared dist(static_cast<double>(expected_pool.size() - 1));
  return boost::math::cdf(boost::math::complement(dist, stat));
}

}  // namespace oracles

#endif
