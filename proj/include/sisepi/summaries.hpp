#ifndef SISEPI_SUMMARIES_HPP
#define SISEPI_SUMMARIES_HPP

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "sisepi/io.hpp"

namespace sisepi {

constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

inline bool is_missing(double v) { return std::isnan(v); }

/// A time-binned data series: one value per bin with the number of
/// measurements behind it (count 0 marks a missing bin) and the bin's
/// quarter-of-year in 0..3.
struct BinnedSeries {
  std::vector<double> values;
  std::vector<double> counts;
  std::vector<int> qoy;

  std::size_t size() const { return values.size(); }

  void validate() const {
    if (values.size() != counts.size() || values.size() != qoy.size())
      throw ConfigError("binned series fields must have equal length");
    for (auto q : qoy)
      if (q < 0 || q > 3) throw ConfigError("quarter-of-year must lie in 0..3");
  }
};

/// The 6-coefficient summary vector: a weighted mean per quarter-of-year and
/// the two largest DFT magnitudes over nonzero frequencies, sorted
/// descending. Seasons without measurements are marked missing.
struct SummaryStats {
  std::array<double, 4> seasonal_means{kMissing, kMissing, kMissing, kMissing};
  std::array<double, 2> fourier{0.0, 0.0};

  std::array<double, 6> as_vector() const {
    return {seasonal_means[0], seasonal_means[1], seasonal_means[2], seasonal_means[3],
            fourier[0], fourier[1]};
  }

  std::array<bool, 6> available() const {
    std::array<bool, 6> a{};
    for (std::size_t i = 0; i < 4; ++i) a[i] = !is_missing(seasonal_means[i]);
    a[4] = a[5] = true;
    return a;
  }
};

struct StatWeights {
  std::array<double, 6> w{};
};

inline std::vector<double> normalize_weights(std::vector<double> raw) {
  double total = 0.0;
  for (double v : raw) {
    if (v < 0.0) throw ConfigError("weights must be non-negative");
    total += v;
  }
  if (total <= 0.0) throw ConfigError("weights must not all vanish");
  for (double& v : raw) v /= total;
  return raw;
}

/// Magnitudes of the DFT over frequencies 1..n/2 (the DC term is excluded;
/// conjugate-symmetric upper half dropped). Returns the two largest, ties
/// broken toward the lower frequency, sorted descending.
inline std::array<double, 2> dominant_fourier_magnitudes(const std::vector<double>& series) {
  const std::size_t n = series.size();
  std::vector<double> mags;  // index 0 holds frequency 1
  for (std::size_t k = 1; k <= n / 2; ++k) {
    std::complex<double> coeff{0.0, 0.0};
    for (std::size_t t = 0; t < n; ++t) {
      const double angle =
          -2.0 * std::numbers::pi * static_cast<double>(k * t) / static_cast<double>(n);
      coeff += series[t] * std::complex<double>(std::cos(angle), std::sin(angle));
    }
    mags.push_back(std::abs(coeff));
  }
  if (mags.empty()) return {0.0, 0.0};
  // Strict comparisons keep the lower frequency on ties.
  std::size_t first = 0;
  for (std::size_t i = 1; i < mags.size(); ++i)
    if (mags[i] > mags[first]) first = i;
  if (mags.size() == 1) return {mags[first], 0.0};
  std::size_t second = first == 0 ? 1 : 0;
  for (std::size_t i = 0; i < mags.size(); ++i)
    if (i != first && mags[i] > mags[second]) second = i;
  return {mags[first], mags[second]};
}

/// Reduces a series to the 6 summary coefficients. Seasonal means are
/// measurement-count weighted; the Fourier magnitudes are computed on the
/// series with missing bins imputed by the mean of the available ones.
inline SummaryStats summarize(const BinnedSeries& series) {
  series.validate();
  if (series.size() < 4) throw ConfigError("summary statistics need at least 4 bins");
  SummaryStats stats;
  std::array<double, 4> weighted_sum{};
  std::array<double, 4> count_sum{};
  double available_sum = 0.0;
  std::size_t available_n = 0;
  for (std::size_t t = 0; t < series.size(); ++t) {
    if (series.counts[t] <= 0.0 || is_missing(series.values[t])) continue;
    const auto q = static_cast<std::size_t>(series.qoy[t]);
    weighted_sum[q] += series.counts[t] * series.values[t];
    count_sum[q] += series.counts[t];
    available_sum += series.values[t];
    ++available_n;
  }
  for (std::size_t q = 0; q < 4; ++q)
    stats.seasonal_means[q] = count_sum[q] > 0.0 ? weighted_sum[q] / count_sum[q] : kMissing;

  const double fill = available_n > 0 ? available_sum / static_cast<double>(available_n) : 0.0;
  std::vector<double> imputed(series.size());
  for (std::size_t t = 0; t < series.size(); ++t)
    imputed[t] = (series.counts[t] > 0.0 && !is_missing(series.values[t])) ? series.values[t]
                                                                           : fill;
  stats.fourier = dominant_fourier_magnitudes(imputed);
  return stats;
}

/// Measurement-count weights: one per seasonal mean (zero when the season is
/// missing), the Fourier pair carries the mean of the four seasonal raw
/// weights; all six normalized to sum 1.
inline StatWeights make_weights(const BinnedSeries& series) {
  series.validate();
  std::array<double, 4> count_sum{};
  for (std::size_t t = 0; t < series.size(); ++t)
    if (series.counts[t] > 0.0 && !is_missing(series.values[t]))
      count_sum[static_cast<std::size_t>(series.qoy[t])] += series.counts[t];
  const double seasonal_mean_weight =
      (count_sum[0] + count_sum[1] + count_sum[2] + count_sum[3]) / 4.0;
  std::vector<double> raw(count_sum.begin(), count_sum.end());
  raw.push_back(seasonal_mean_weight);
  raw.push_back(seasonal_mean_weight);
  const auto normalized = normalize_weights(std::move(raw));
  StatWeights w;
  for (std::size_t i = 0; i < 6; ++i) w.w[i] = normalized[i];
  return w;
}

/// Weighted Euclidean distance sqrt(sum w_i (a_i - b_i)^2) over the available
/// statistics. The two sides must miss the same seasons.
inline double stat_distance(const SummaryStats& a, const SummaryStats& b, const StatWeights& w) {
  const auto av = a.as_vector();
  const auto bv = b.as_vector();
  const auto aa = a.available();
  const auto ba = b.available();
  double sum = 0.0;
  for (std::size_t i = 0; i < 6; ++i) {
    if (aa[i] != ba[i]) throw ConfigError("summary statistics have mismatched availability");
    if (!aa[i]) continue;
    const double d = av[i] - bv[i];
    sum += w.w[i] * d * d;
  }
  return std::sqrt(sum);
}

}  // namespace sisepi

#endif
