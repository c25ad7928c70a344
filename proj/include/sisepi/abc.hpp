#ifndef SISEPI_ABC_HPP
#define SISEPI_ABC_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "sisepi/io.hpp"
#include "sisepi/parallel.hpp"
#include "sisepi/rng.hpp"
#include "sisepi/summaries.hpp"
#include "sisepi/synlik.hpp"

namespace sisepi {

struct AbcProposal {
  std::vector<double> theta;
  double distance = std::numeric_limits<double>::infinity();
};

struct AbcRun {
  std::vector<AbcProposal> proposals;  // in proposal-index order
  double epsilon = std::numeric_limits<double>::infinity();

  bool is_accepted(std::size_t i) const { return proposals[i].distance < epsilon; }

  std::vector<std::vector<double>> accepted() const {
    std::vector<std::vector<double>> out;
    for (const auto& p : proposals)
      if (p.distance < epsilon) out.push_back(p.theta);
    return out;
  }
};

/// ABC rejection with forward simulation and a uniform kernel. All proposals
/// and distances are stored; epsilon is set afterwards so that roughly
/// accept_fraction of them fall strictly below it (ties at the threshold are
/// included). A failing simulation records an infinite distance.
inline AbcRun abc_rejection(
    const SummaryStats& observed, const StatWeights& weights, const PriorBox& prior,
    const std::function<BinnedSeries(const std::vector<double>&, Rng&)>& simulate,
    std::size_t n_proposals, double accept_fraction, Rng& rng, unsigned workers = 0) {
  prior.validate();
  if (!(accept_fraction > 0.0 && accept_fraction <= 1.0))
    throw ConfigError("accept fraction must lie in (0,1]");
  if (n_proposals == 0) throw ConfigError("need at least one proposal");

  AbcRun run;
  run.proposals.resize(n_proposals);
  Rng master = rng.substream("abc");
  parallel_for(
      n_proposals,
      [&](std::size_t i) {
        Rng sub = master.substream(i);
        AbcProposal& p = run.proposals[i];
        p.theta = prior.sample(sub);
        try {
          const BinnedSeries series = simulate(p.theta, sub);
          p.distance = stat_distance(summarize(series), observed, weights);
        } catch (const std::exception& e) {
          log_warn("ABC proposal " + std::to_string(i) + " failed: " + e.what());
          p.distance = std::numeric_limits<double>::infinity();
        }
      },
      workers);

  // epsilon via the accept_fraction quantile of the stored distances.
  std::vector<double> distances;
  distances.reserve(n_proposals);
  for (const auto& p : run.proposals) distances.push_back(p.distance);
  std::sort(distances.begin(), distances.end());
  const auto target = static_cast<std::size_t>(std::llround(
      accept_fraction * static_cast<double>(n_proposals)));
  if (target >= n_proposals) {
    run.epsilon = std::numeric_limits<double>::infinity();
  } else {
    const double kth = distances[std::max<std::size_t>(target, 1) - 1];
    run.epsilon = std::nextafter(kth, std::numeric_limits<double>::infinity());
  }
  return run;
}

/// Re-selects epsilon offline for a different acceptance fraction, without
/// re-simulating.
inline double select_epsilon(const AbcRun& run, double accept_fraction) {
  std::vector<double> distances;
  for (const auto& p : run.proposals) distances.push_back(p.distance);
  std::sort(distances.begin(), distances.end());
  const auto n = distances.size();
  const auto target =
      static_cast<std::size_t>(std::llround(accept_fraction * static_cast<double>(n)));
  if (target >= n) return std::numeric_limits<double>::infinity();
  return std::nextafter(distances[std::max<std::size_t>(target, 1) - 1],
                        std::numeric_limits<double>::infinity());
}

// Output CSV: `<param names...>,distance,accepted`.
inline void write_abc_run(const AbcRun& run, const std::vector<std::string>& names,
                          const std::string& path) {
  CsvWriter w(path);
  std::string header;
  for (const auto& n : names) header += n + ",";
  w.raw(header + "distance,accepted");
  for (std::size_t i = 0; i < run.proposals.size(); ++i) {
    std::vector<std::string> row;
    for (double v : run.proposals[i].theta) row.push_back(format_double(v));
    row.push_back(format_double(run.proposals[i].distance));
    row.push_back(run.is_accepted(i) ? "1" : "0");
    w.row(row);
  }
}

}  // namespace sisepi

#endif
