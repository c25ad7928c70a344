#ifndef SISEPI_SYNLIK_HPP
#define SISEPI_SYNLIK_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "sisepi/io.hpp"
#include "sisepi/linalg.hpp"
#include "sisepi/parallel.hpp"
#include "sisepi/rng.hpp"
#include "sisepi/summaries.hpp"

namespace sisepi {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// Independent uniform prior on a positive box per parameter.
struct PriorBox {
  std::vector<double> lo;
  std::vector<double> hi;

  std::size_t dim() const { return lo.size(); }

  void validate() const {
    if (lo.size() != hi.size()) throw ConfigError("prior box bounds must have equal length");
    for (std::size_t i = 0; i < lo.size(); ++i)
      if (!(0.0 <= lo[i] && lo[i] < hi[i]))
        throw ConfigError("prior box must satisfy 0 <= lo < hi");
  }

  bool contains(const std::vector<double>& theta) const {
    for (std::size_t i = 0; i < theta.size(); ++i)
      if (!(theta[i] >= lo[i] && theta[i] <= hi[i]) || theta[i] <= 0.0) return false;
    return true;
  }

  std::vector<double> sample(Rng& rng) const {
    std::vector<double> theta(dim());
    for (std::size_t i = 0; i < dim(); ++i) theta[i] = rng.uniform(lo[i], hi[i]);
    return theta;
  }
};

// ---------------------------------------------------------------------------
// Bootstrapped synthetic likelihood
// ---------------------------------------------------------------------------

/// Empirical bootstrap across trajectories: output series r takes, at each
/// time bin independently, the bin value of a uniformly chosen input series.
inline std::vector<std::vector<double>> bootstrap_series(
    const std::vector<std::vector<double>>& series, std::size_t r_out, Rng& rng) {
  if (series.empty() || r_out == 0) throw ConfigError("bootstrap needs N >= 1 and R >= 1");
  const std::size_t n = series.size();
  const std::size_t bins = series.front().size();
  for (const auto& s : series)
    if (s.size() != bins) throw ConfigError("bootstrap input series must have equal length");
  std::vector<std::vector<double>> out(r_out, std::vector<double>(bins));
  for (auto& row : out)
    for (std::size_t t = 0; t < bins; ++t)
      row[t] = series[static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(n)))][t];
  return out;
}

/// Gaussian surrogate likelihood moments and value.
struct SlEstimate {
  std::vector<double> mu_hat;
  Matrix sigma_hat;
  double log_sl = kNegInf;
};

/// log N(s_obs | mu_hat, Sigma_hat) from R summary vectors, with the sample
/// moment estimates and a small diagonal ridge before factorization. A
/// singular covariance yields -inf (the proposal is then never accepted).
inline SlEstimate log_synthetic_likelihood(const std::vector<double>& s_obs,
                                           const std::vector<std::vector<double>>& stats,
                                           double ridge = 1e-10) {
  if (stats.size() < 2) throw ConfigError("synthetic likelihood needs at least 2 summary vectors");
  SlEstimate est;
  est.mu_hat = column_means(stats);
  est.sigma_hat = sample_covariance(stats);
  Matrix regularized = est.sigma_hat;
  regularized.add_diagonal(ridge);
  const auto l = cholesky(regularized);
  if (!l.has_value()) return est;
  est.log_sl = mvn_log_density(s_obs, est.mu_hat, *l);
  if (!std::isfinite(est.log_sl)) est.log_sl = kNegInf;
  return est;
}

// ---------------------------------------------------------------------------
// Adaptive Metropolis covariance recursion
// ---------------------------------------------------------------------------

struct AmConfig {
  double xi = 1e-3;        // proposal scale
  double epsilon = 1e-5;   // degeneration guard inside the recursion
  std::size_t i0 = 1;      // iterations that keep the initial covariance
  double c0_scale = 1e-9;  // C_0 = c0_scale * I unless c0_diag is given
  std::vector<double> c0_diag;
};

/// Running mean and proposal covariance, maintained recursively. After i
/// pushed states the covariance equals xi * (sample covariance of the i
/// states + epsilon I) exactly.
class AmAdaptation {
 public:
  AmAdaptation(std::size_t dim, double xi, double epsilon)
      : xi_(xi), epsilon_(epsilon), mean_(dim, 0.0), cov_(dim) {}

  void push(const std::vector<double>& theta) {
    const std::size_t d = mean_.size();
    ++count_;
    if (count_ == 1) {
      mean_ = theta;
      return;
    }
    const std::vector<double> prev_mean = mean_;
    for (std::size_t j = 0; j < d; ++j)
      mean_[j] = prev_mean[j] + (theta[j] - prev_mean[j]) / static_cast<double>(count_);
    // One step of the rank-one covariance recursion; h counts prior states.
    const double h = static_cast<double>(count_ - 1);
    for (std::size_t a = 0; a < d; ++a)
      for (std::size_t b = 0; b < d; ++b)
        cov_(a, b) = (h - 1.0) / h * cov_(a, b) +
                     xi_ / h *
                         (h * prev_mean[a] * prev_mean[b] -
                          (h + 1.0) * mean_[a] * mean_[b] + theta[a] * theta[b] +
                          (a == b ? epsilon_ : 0.0));
  }

  std::size_t count() const { return count_; }
  const std::vector<double>& running_mean() const { return mean_; }

  // Defined once two states have been pushed.
  const Matrix& covariance() const {
    if (count_ < 2) throw ConfigError("adaptive covariance needs at least 2 states");
    return cov_;
  }

 private:
  double xi_;
  double epsilon_;
  std::size_t count_ = 0;
  std::vector<double> mean_;
  Matrix cov_;
};

/// Covariance after the recursion has absorbed the given chain prefix
/// (length >= 2).
inline Matrix am_update_covariance(const std::vector<std::vector<double>>& chain_prefix,
                                   std::size_t i, double xi, double epsilon) {
  if (i < 2 || i > chain_prefix.size())
    throw ConfigError("covariance recursion needs a prefix of length >= 2");
  AmAdaptation am(chain_prefix.front().size(), xi, epsilon);
  for (std::size_t k = 0; k < i; ++k) am.push(chain_prefix[k]);
  return am.covariance();
}

// ---------------------------------------------------------------------------
// Samplers
// ---------------------------------------------------------------------------

enum class Phase : std::uint8_t { AM, MIS };

inline const char* to_string(Phase p) { return p == Phase::AM ? "AM" : "MIS"; }

struct ChainEntry {
  std::vector<double> theta;
  double log_sl = kNegInf;
  bool accepted = false;
};

struct Chain {
  Phase phase = Phase::AM;
  std::vector<ChainEntry> entries;

  std::size_t accepted_count() const {
    std::size_t n = 0;
    for (const auto& e : entries) n += e.accepted ? 1 : 0;
    return n;
  }
};

/// Evaluates the bootstrapped synthetic likelihood of a parameter proposal:
/// N forward simulations, R bootstrap series, summary statistics on the
/// observed cadence, then the Gaussian surrogate on the active coordinates.
class SlContext {
 public:
  using SeriesSimulator = std::function<BinnedSeries(const std::vector<double>&, Rng&)>;

  SlContext(BinnedSeries observed, SeriesSimulator simulate, std::size_t n_sim,
            std::size_t n_bootstrap, unsigned workers = 0, double ridge = 1e-10)
      : observed_(std::move(observed)),
        simulate_(std::move(simulate)),
        n_sim_(n_sim),
        n_bootstrap_(n_bootstrap),
        workers_(workers),
        ridge_(ridge) {
    observed_.validate();
    const SummaryStats stats = summarize(observed_);
    active_ = stats.available();
    s_obs_ = pack(stats);
  }

  const BinnedSeries& observed() const { return observed_; }
  std::size_t n_sim() const { return n_sim_; }
  std::size_t n_bootstrap() const { return n_bootstrap_; }

  double eval(const std::vector<double>& theta, Rng& rng) const {
    // Distinct substreams per simulation keep the batch scheduling-free.
    Rng batch(rng.next_u64());
    std::vector<std::vector<double>> sims(n_sim_);
    std::vector<std::string> failures(n_sim_);
    parallel_for(
        n_sim_,
        [&](std::size_t j) {
          Rng sub = batch.substream(j);
          const BinnedSeries series = simulate_(theta, sub);
          if (series.size() != observed_.size())
            throw ConfigError("simulated series length differs from observed");
          sims[j] = series.values;
        },
        workers_);
    const auto boots = bootstrap_series(sims, n_bootstrap_, rng);
    std::vector<std::vector<double>> stats;
    stats.reserve(boots.size());
    for (const auto& values : boots) {
      BinnedSeries series = observed_;
      series.values = values;
      const SummaryStats s = summarize(series);
      const auto avail = s.available();
      for (std::size_t i = 0; i < 6; ++i)
        if (active_[i] && !avail[i]) return kNegInf;
      stats.push_back(pack(s));
    }
    return log_synthetic_likelihood(s_obs_, stats, ridge_).log_sl;
  }

 private:
  std::vector<double> pack(const SummaryStats& stats) const {
    const auto v = stats.as_vector();
    std::vector<double> out;
    for (std::size_t i = 0; i < 6; ++i)
      if (active_[i]) out.push_back(v[i]);
    return out;
  }

  BinnedSeries observed_;
  SeriesSimulator simulate_;
  std::size_t n_sim_;
  std::size_t n_bootstrap_;
  unsigned workers_;
  double ridge_;
  std::array<bool, 6> active_{};
  std::vector<double> s_obs_;
};

namespace detail {

inline Matrix initial_covariance(const AmConfig& cfg, std::size_t dim) {
  if (!cfg.c0_diag.empty()) {
    if (cfg.c0_diag.size() != dim) throw ConfigError("c0_diag dimension mismatch");
    Matrix c(dim);
    for (std::size_t i = 0; i < dim; ++i) c(i, i) = cfg.c0_diag[i];
    return c;
  }
  return Matrix::identity(dim, cfg.c0_scale);
}

inline Matrix ensure_factorable(Matrix cov, double epsilon) {
  for (int tries = 0; tries < 8; ++tries) {
    if (cholesky(cov).has_value()) return cov;
    cov.add_diagonal(epsilon);
    epsilon *= 10.0;
  }
  throw ConfigError("proposal covariance cannot be made positive definite");
}

}  // namespace detail

/// Synthetic Likelihood Adaptive Metropolis training phase. The current
/// state's likelihood is stored, never re-estimated; proposals outside the
/// prior box are rejected outright.
inline Chain slam_train(const SlContext& ctx, const std::vector<double>& theta_init,
                        std::size_t n_train, const AmConfig& am_cfg, const PriorBox& prior,
                        Rng& rng) {
  prior.validate();
  if (!prior.contains(theta_init)) throw ConfigError("initial parameter outside prior support");
  const std::size_t dim = theta_init.size();
  Chain chain;
  chain.phase = Phase::AM;
  AmAdaptation am(dim, am_cfg.xi, am_cfg.epsilon);

  double current_log_sl = ctx.eval(theta_init, rng);
  if (!std::isfinite(current_log_sl))
    throw ConfigError("initial parameter has non-finite synthetic likelihood");
  std::vector<double> current = theta_init;
  chain.entries.push_back({current, current_log_sl, true});
  am.push(current);

  const Matrix c0 = detail::initial_covariance(am_cfg, dim);
  for (std::size_t i = 2; i <= n_train; ++i) {
    // Eq. (8) covariance once past i0 and once two states exist.
    const bool adaptive = i > am_cfg.i0 && am.count() >= 2;
    const Matrix cov = detail::ensure_factorable(adaptive ? am.covariance() : c0, am_cfg.epsilon);
    const auto l = cholesky(cov);
    const std::vector<double> proposal = mvn_sample(current, *l, rng);

    bool accept = false;
    double proposal_log_sl = kNegInf;
    if (prior.contains(proposal)) {
      proposal_log_sl = ctx.eval(proposal, rng);
      const double log_u = std::log(rng.uniform());
      accept = std::isfinite(proposal_log_sl) && log_u < proposal_log_sl - current_log_sl;
    }
    if (accept) {
      current = proposal;
      current_log_sl = proposal_log_sl;
    }
    chain.entries.push_back({current, current_log_sl, accept});
    am.push(current);
  }
  return chain;
}

/// Static proposal for the refinement phase: across replicas, the mean of the
/// post-burn-in chain means and the mean of the post-burn-in covariances.
struct MisProposal {
  std::vector<double> mean;
  Matrix cov;
};

inline MisProposal aggregate_training(const std::vector<Chain>& chains, std::size_t burn_in,
                                      double jitter_epsilon = 1e-12) {
  if (chains.empty()) throw ConfigError("no training chains");
  std::vector<double> mean;
  Matrix cov;
  for (const auto& chain : chains) {
    if (chain.entries.size() < burn_in + 2)
      throw ConfigError("training chain shorter than burn-in + 2");
    std::vector<std::vector<double>> tail;
    for (std::size_t i = burn_in; i < chain.entries.size(); ++i)
      tail.push_back(chain.entries[i].theta);
    const auto m = column_means(tail);
    const auto c = sample_covariance(tail);
    if (mean.empty()) {
      mean = m;
      cov = c;
    } else {
      for (std::size_t j = 0; j < mean.size(); ++j) mean[j] += m[j];
      cov += c;
    }
  }
  const double scale = 1.0 / static_cast<double>(chains.size());
  for (auto& v : mean) v *= scale;
  cov *= scale;
  if (!cholesky(cov).has_value()) {
    log_warn("aggregated MIS proposal covariance not positive definite; jittering");
    cov = detail::ensure_factorable(std::move(cov), jitter_epsilon);
  }
  return {std::move(mean), std::move(cov)};
}

/// Metropolized Independent Sampler refinement: proposals are drawn from the
/// static aggregate, independent of the current state. The acceptance ratio
/// is likelihood-only unless `corrected` adds the q(theta)/q(theta*) factor.
inline Chain mis_refine(const SlContext& ctx, const MisProposal& proposal, std::size_t n_sample,
                        const PriorBox& prior, Rng& rng, bool corrected = false,
                        std::optional<std::vector<double>> start = std::nullopt) {
  prior.validate();
  Chain chain;
  chain.phase = Phase::MIS;
  const auto l = cholesky(proposal.cov);
  if (!l.has_value()) throw ConfigError("MIS proposal covariance not positive definite");

  std::vector<double> current = start.value_or(proposal.mean);
  if (!prior.contains(current)) throw ConfigError("MIS start outside prior support");
  double current_log_sl = ctx.eval(current, rng);
  if (!std::isfinite(current_log_sl))
    throw ConfigError("MIS start has non-finite synthetic likelihood");
  chain.entries.push_back({current, current_log_sl, true});

  for (std::size_t i = 1; i < n_sample; ++i) {
    const std::vector<double> theta = mvn_sample(proposal.mean, *l, rng);
    bool accept = false;
    double log_sl = kNegInf;
    if (prior.contains(theta)) {
      log_sl = ctx.eval(theta, rng);
      double log_ratio = log_sl - current_log_sl;
      if (corrected)
        log_ratio += mvn_log_density(current, proposal.mean, *l) -
                     mvn_log_density(theta, proposal.mean, *l);
      accept = std::isfinite(log_sl) && std::log(rng.uniform()) < log_ratio;
    }
    if (accept) {
      current = theta;
      current_log_sl = log_sl;
    }
    chain.entries.push_back({current, current_log_sl, accept});
  }
  return chain;
}

// ---------------------------------------------------------------------------
// Parallel replicas
// ---------------------------------------------------------------------------

struct ReplicaConfig {
  std::size_t n_train = 1500;
  std::size_t n_sample = 0;        // 0 disables the MIS phase
  std::size_t train_burn_in = 500;  // removed before aggregating the proposal
  AmConfig am;
  bool corrected_mis = false;
  unsigned workers = 0;
  std::size_t init_attempts = 64;  // prior draws tried for a finite start
};

struct ReplicaRun {
  std::vector<Chain> training;
  std::vector<Chain> refined;
  MisProposal proposal;
};

/// P independent replicas with independent prior starting points, then a
/// shared static MIS proposal aggregated over all training chains.
inline ReplicaRun run_replicas(std::size_t p, const SlContext& ctx, const PriorBox& prior,
                               const ReplicaConfig& cfg, Rng master) {
  if (p < 1) throw ConfigError("need at least one replica");
  ReplicaRun run;
  run.training.resize(p);
  parallel_for(
      p,
      [&](std::size_t r) {
        Rng rng = master.substream("train").substream(r);
        std::vector<double> start;
        for (std::size_t attempt = 0; attempt < cfg.init_attempts; ++attempt) {
          start = prior.sample(rng);
          Rng probe = rng.substream("init-probe").substream(attempt);
          if (std::isfinite(ctx.eval(start, probe))) break;
          start.clear();
        }
        if (start.empty())
          throw ConfigError("no prior draw with finite synthetic likelihood found");
        run.training[r] = slam_train(ctx, start, cfg.n_train, cfg.am, prior, rng);
      },
      cfg.workers);
  if (cfg.n_sample == 0) return run;

  run.proposal = aggregate_training(run.training, cfg.train_burn_in, cfg.am.epsilon);
  run.refined.resize(p);
  parallel_for(
      p,
      [&](std::size_t r) {
        Rng rng = master.substream("mis").substream(r);
        const auto& tail = run.training[r].entries.back();
        run.refined[r] = mis_refine(ctx, run.proposal, cfg.n_sample, prior, rng,
                                    cfg.corrected_mis, tail.theta);
      },
      cfg.workers);
  return run;
}

/// Post-processing: burn-in removal and thinning, applied explicitly.
inline std::vector<std::vector<double>> extract_samples(const std::vector<Chain>& chains,
                                                        std::size_t burn_in, std::size_t thin) {
  if (thin == 0) throw ConfigError("thinning must be >= 1");
  std::vector<std::vector<double>> samples;
  for (const auto& chain : chains)
    for (std::size_t i = burn_in; i < chain.entries.size(); i += thin)
      samples.push_back(chain.entries[i].theta);
  return samples;
}

// Chain CSV: `replica,iter,phase,<param names...>,log_sl,accepted`.
inline void write_chains(const std::vector<Chain>& chains, const std::vector<std::string>& names,
                         const std::string& path) {
  CsvWriter w(path);
  std::string header = "replica,iter,phase";
  for (const auto& n : names) header += "," + n;
  header += ",log_sl,accepted";
  w.raw(header);
  for (std::size_t r = 0; r < chains.size(); ++r)
    for (std::size_t i = 0; i < chains[r].entries.size(); ++i) {
      const auto& e = chains[r].entries[i];
      std::vector<std::string> row = {std::to_string(r), std::to_string(i),
                                      to_string(chains[r].phase)};
      for (double v : e.theta) row.push_back(format_double(v));
      row.push_back(format_double(e.log_sl));
      row.push_back(e.accepted ? "1" : "0");
      w.row(row);
    }
}

inline std::vector<Chain> parse_chains(const std::string& path, std::size_t dim) {
  CsvReader reader(path);
  std::vector<std::string> fields;
  bool saw_header = false;
  std::vector<Chain> chains;
  while (reader.next(fields)) {
    if (!saw_header) {
      saw_header = true;
      if (fields.size() != dim + 5 || fields[0] != "replica")
        reader.fail("chain file header does not match expected parameter count");
      continue;
    }
    if (fields.size() != dim + 5) reader.fail("wrong field count");
    const auto replica = static_cast<std::size_t>(reader.to_int(fields[0]));
    while (chains.size() <= replica) chains.push_back({});
    Chain& chain = chains[replica];
    chain.phase = fields[2] == "MIS" ? Phase::MIS : Phase::AM;
    ChainEntry e;
    for (std::size_t j = 0; j < dim; ++j) e.theta.push_back(reader.to_double(fields[3 + j]));
    e.log_sl = reader.to_double(fields[3 + dim]);
    e.accepted = fields[4 + dim] == "1";
    chain.entries.push_back(std::move(e));
  }
  return chains;
}

}  // namespace sisepi

#endif
