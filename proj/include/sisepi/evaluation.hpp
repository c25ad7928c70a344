#ifndef SISEPI_EVALUATION_HPP
#define SISEPI_EVALUATION_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "sisepi/io.hpp"
#include "sisepi/linalg.hpp"
#include "sisepi/parallel.hpp"
#include "sisepi/rng.hpp"
#include "sisepi/summaries.hpp"

namespace sisepi {

inline double sample_mean(const std::vector<double>& v) {
  double sum = 0.0;
  for (double x : v) sum += x;
  return sum / static_cast<double>(v.size());
}

inline double sample_variance(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double mean = sample_mean(v);
  double sum = 0.0;
  for (double x : v) sum += (x - mean) * (x - mean);
  return sum / static_cast<double>(v.size() - 1);
}

// Linear-interpolation quantile of a sample (R type 7), q in [0,1].
inline double quantile(std::vector<double> v, double q) {
  if (v.empty()) throw ConfigError("quantile of empty sample");
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(pos);
  if (lo + 1 >= v.size()) return v.back();
  const double frac = pos - static_cast<double>(lo);
  return v[lo] * (1.0 - frac) + v[lo + 1] * frac;
}

/// Posterior mean, coordinate-wise: the minimum mean square error point
/// estimator.
inline std::vector<double> mmse(const std::vector<std::vector<double>>& samples) {
  if (samples.empty()) throw ConfigError("mmse needs at least one sample");
  return column_means(samples);
}

// ---------------------------------------------------------------------------
// Error quantification
// ---------------------------------------------------------------------------

struct ErrorReport {
  std::vector<std::string> names;
  std::vector<double> estimate;   // theta_hat (MMSE of the parent posterior)
  std::vector<double> variance;   // pooled variance of the parent posterior
  std::vector<double> bias;       // bootstrap-imputed bias
  std::vector<double> mse;        // variance + bias^2, by construction
  std::vector<double> nrmse;      // sqrt(mse)/|estimate|
  std::size_t replicates_used = 0;
  std::size_t replicates_dropped = 0;
};

/// Runs the full inference pipeline on M_boot synthetic datasets generated
/// from theta_hat, imputes the estimator bias as the mean of (bootstrap
/// posterior mean - theta_hat) across replicates, and combines it with the
/// parent posterior variance into the MSE decomposition. Failed replicates
/// are dropped and counted.
inline ErrorReport parametric_bootstrap(
    const std::vector<double>& theta_hat, const std::vector<std::vector<double>>& parent_samples,
    std::size_t m_boot,
    const std::function<std::vector<std::vector<double>>(const std::vector<double>&, Rng&)>&
        pipeline,
    Rng& rng, std::vector<std::string> names = {}, unsigned workers = 0) {
  if (m_boot < 1) throw ConfigError("parametric bootstrap needs M_boot >= 1");
  const std::size_t dim = theta_hat.size();
  std::vector<std::vector<double>> replicate_bias(m_boot);
  std::vector<char> ok(m_boot, 0);
  Rng master = rng.substream("bootstrap");
  parallel_for(
      m_boot,
      [&](std::size_t m) {
        Rng sub = master.substream(m);
        try {
          const auto samples = pipeline(theta_hat, sub);
          if (samples.empty()) return;
          const auto mean = column_means(samples);
          std::vector<double> bias(dim);
          for (std::size_t j = 0; j < dim; ++j) bias[j] = mean[j] - theta_hat[j];
          replicate_bias[m] = std::move(bias);
          ok[m] = 1;
        } catch (const std::exception& e) {
          log_warn("bootstrap replicate " + std::to_string(m) + " failed: " + e.what());
        }
      },
      workers);

  ErrorReport report;
  report.names = names.empty() ? std::vector<std::string>(dim, "") : std::move(names);
  report.estimate = theta_hat;
  report.bias.assign(dim, 0.0);
  for (std::size_t m = 0; m < m_boot; ++m) {
    if (!ok[m]) {
      ++report.replicates_dropped;
      continue;
    }
    ++report.replicates_used;
    for (std::size_t j = 0; j < dim; ++j) report.bias[j] += replicate_bias[m][j];
  }
  if (report.replicates_used == 0) throw ConfigError("all bootstrap replicates failed");
  for (auto& b : report.bias) b /= static_cast<double>(report.replicates_used);

  report.variance.resize(dim);
  report.mse.resize(dim);
  report.nrmse.resize(dim);
  for (std::size_t j = 0; j < dim; ++j) {
    std::vector<double> column;
    column.reserve(parent_samples.size());
    for (const auto& s : parent_samples) column.push_back(s[j]);
    report.variance[j] = sample_variance(column);
    report.mse[j] = report.variance[j] + report.bias[j] * report.bias[j];
    report.nrmse[j] = std::sqrt(report.mse[j]) / std::abs(theta_hat[j]);
  }
  return report;
}

/// Known-truth error of a posterior: MSE = posterior variance + squared bias
/// of the posterior mean, normalized by the true parameter magnitude.
inline std::vector<double> known_truth_nrmse(const std::vector<std::vector<double>>& samples,
                                             const std::vector<double>& truth) {
  const auto mean = mmse(samples);
  std::vector<double> out(truth.size());
  for (std::size_t j = 0; j < truth.size(); ++j) {
    std::vector<double> column;
    column.reserve(samples.size());
    for (const auto& s : samples) column.push_back(s[j]);
    const double bias = mean[j] - truth[j];
    out[j] = std::sqrt(sample_variance(column) + bias * bias) / std::abs(truth[j]);
  }
  return out;
}

inline void write_error_report(const ErrorReport& report, const std::string& path) {
  CsvWriter w(path);
  w.raw("param,estimate,variance,bias,mse,nrmse");
  for (std::size_t j = 0; j < report.estimate.size(); ++j)
    w.row({report.names[j], format_double(report.estimate[j]), format_double(report.variance[j]),
           format_double(report.bias[j]), format_double(report.mse[j]),
           format_double(report.nrmse[j])});
}

// ---------------------------------------------------------------------------
// Convergence diagnostics
// ---------------------------------------------------------------------------

struct PsrfReport {
  std::vector<double> per_parameter;  // NaN when within-chain variance is 0
  double multivariate = kMissing;
};

/// Potential scale reduction factors over >= 2 equal-length chains:
/// univariate per parameter, plus the Brooks-Gelman multivariate factor from
/// the largest eigenvalue of W^-1 B/n.
inline PsrfReport gelman_rubin(const std::vector<std::vector<std::vector<double>>>& chains) {
  const std::size_t m = chains.size();
  if (m < 2) throw ConfigError("gelman_rubin needs at least 2 chains");
  const std::size_t n = chains.front().size();
  if (n < 10) throw ConfigError("gelman_rubin needs chains of length >= 10");
  for (const auto& c : chains)
    if (c.size() != n) throw ConfigError("gelman_rubin chains must have equal length");
  const std::size_t d = chains.front().front().size();

  PsrfReport report;
  report.per_parameter.assign(d, kMissing);

  std::vector<std::vector<double>> chain_means(m);
  Matrix within(d);
  for (std::size_t c = 0; c < m; ++c) {
    chain_means[c] = column_means(chains[c]);
    within += sample_covariance(chains[c]);
  }
  within *= 1.0 / static_cast<double>(m);
  const Matrix between_over_n = sample_covariance(chain_means);  // B/n

  const double nn = static_cast<double>(n);
  const double mm = static_cast<double>(m);
  for (std::size_t j = 0; j < d; ++j) {
    const double w = within(j, j);
    if (!(w > 0.0)) continue;  // unavailable
    const double v_hat = (nn - 1.0) / nn * w + (1.0 + 1.0 / mm) * between_over_n(j, j);
    report.per_parameter[j] = std::sqrt(v_hat / w);
  }

  // Multivariate: lambda_max of W^-1 B/n via the Cholesky-whitened form.
  const auto l = cholesky(within);
  if (l.has_value()) {
    Matrix whitened(d);
    // columns of B/n solved against L, then rows, giving L^-1 (B/n) L^-T
    std::vector<std::vector<double>> cols(d, std::vector<double>(d));
    for (std::size_t j = 0; j < d; ++j) {
      std::vector<double> col(d);
      for (std::size_t i = 0; i < d; ++i) col[i] = between_over_n(i, j);
      cols[j] = forward_solve(*l, col);
    }
    for (std::size_t i = 0; i < d; ++i) {
      std::vector<double> row(d);
      for (std::size_t j = 0; j < d; ++j) row[j] = cols[j][i];
      const auto solved = forward_solve(*l, row);
      for (std::size_t j = 0; j < d; ++j) whitened(i, j) = solved[j];
    }
    // power iteration; the matrix is symmetric PSD
    std::vector<double> v(d, 1.0);
    double lambda = 0.0;
    for (int iter = 0; iter < 200; ++iter) {
      std::vector<double> next(d, 0.0);
      for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) next[i] += whitened(i, j) * v[j];
      double norm = 0.0;
      for (double x : next) norm += x * x;
      norm = std::sqrt(norm);
      if (norm == 0.0) break;
      for (auto& x : next) x /= norm;
      lambda = norm;
      v = std::move(next);
    }
    report.multivariate = std::sqrt((nn - 1.0) / nn + (mm + 1.0) / mm * lambda);
  }
  return report;
}

// ---------------------------------------------------------------------------
// Posterior predictive check
// ---------------------------------------------------------------------------

struct PredictiveBand {
  std::vector<double> mean;
  std::vector<double> lo;
  std::vector<double> hi;
};

/// Simulates n_draws posterior parameterizations through the observation
/// pipeline and reports the per-bin mean and central credible band.
inline PredictiveBand posterior_predictive(
    const std::vector<std::vector<double>>& posterior_samples, std::size_t n_draws,
    const std::function<BinnedSeries(const std::vector<double>&, Rng&)>& simulate, Rng& rng,
    double level = 0.99, unsigned workers = 0) {
  if (n_draws < 2) throw ConfigError("posterior predictive needs n_draws >= 2");
  if (posterior_samples.empty()) throw ConfigError("posterior predictive needs samples");
  std::vector<std::size_t> picks(n_draws);
  for (auto& p : picks)
    p = static_cast<std::size_t>(
        rng.uniform_int(static_cast<std::int64_t>(posterior_samples.size())));
  Rng master = rng.substream("predictive");
  std::vector<std::vector<double>> values(n_draws);
  parallel_for(
      n_draws,
      [&](std::size_t i) {
        Rng sub = master.substream(i);
        values[i] = simulate(posterior_samples[picks[i]], sub).values;
      },
      workers);
  const std::size_t bins = values.front().size();
  PredictiveBand band;
  band.mean.resize(bins);
  band.lo.resize(bins);
  band.hi.resize(bins);
  const double tail = (1.0 - level) / 2.0;
  for (std::size_t t = 0; t < bins; ++t) {
    std::vector<double> column;
    column.reserve(n_draws);
    for (const auto& v : values)
      if (!is_missing(v[t])) column.push_back(v[t]);
    if (column.empty()) {
      band.mean[t] = band.lo[t] = band.hi[t] = kMissing;
      continue;
    }
    band.mean[t] = sample_mean(column);
    band.lo[t] = quantile(column, tail);
    band.hi[t] = quantile(column, 1.0 - tail);
  }
  return band;
}

}  // namespace sisepi

#endif
