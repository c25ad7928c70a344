#ifndef SISEPI_SCENARIOS_HPP
#define SISEPI_SCENARIOS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "sisepi/evaluation.hpp"
#include "sisepi/events.hpp"
#include "sisepi/io.hpp"
#include "sisepi/model.hpp"
#include "sisepi/parallel.hpp"
#include "sisepi/rng.hpp"
#include "sisepi/simulator.hpp"

namespace sisepi {

// ---------------------------------------------------------------------------
// Sentinel selection
// ---------------------------------------------------------------------------

enum class SentinelStrategy : std::uint8_t { indegree, outdegree, largest, random, observation };

inline const char* to_string(SentinelStrategy s) {
  switch (s) {
    case SentinelStrategy::indegree: return "indegree";
    case SentinelStrategy::outdegree: return "outdegree";
    case SentinelStrategy::largest: return "largest";
    case SentinelStrategy::random: return "random";
    case SentinelStrategy::observation: return "observation";
  }
  return "?";
}

inline SentinelStrategy sentinel_strategy_from(const std::string& name) {
  for (auto s : {SentinelStrategy::indegree, SentinelStrategy::outdegree,
                 SentinelStrategy::largest, SentinelStrategy::random,
                 SentinelStrategy::observation})
    if (name == to_string(s)) return s;
  throw ConfigError("unknown sentinel strategy '" + name + "'");
}

struct SentinelSet {
  SentinelStrategy strategy = SentinelStrategy::random;
  std::vector<std::int32_t> nodes;  // distinct, ranked
};

/// Everything a scenario simulation needs besides the parameters.
struct ScenarioSetup {
  std::vector<std::int64_t> totals;
  const EventStream* events = nullptr;
  const SeasonCalendar* calendar = nullptr;
  int dt = 1;
  unsigned workers = 0;
};

namespace detail {

inline std::vector<std::int32_t> top_k(const std::vector<double>& score, std::size_t k) {
  std::vector<std::int32_t> order(score.size());
  std::iota(order.begin(), order.end(), 0);
  // ties resolved toward the lower node id
  std::stable_sort(order.begin(), order.end(), [&](std::int32_t a, std::int32_t b) {
    return score[static_cast<std::size_t>(a)] > score[static_cast<std::size_t>(b)];
  });
  order.resize(std::min(k, order.size()));
  return order;
}

// Advances `state` one step, handing the step the events in its window.
class EventCursor {
 public:
  explicit EventCursor(const EventStream& events) : events_(&events) {}

  std::span<const EventRecord> window(int day, int dt) {
    while (begin_ < events_->events.size() && events_->events[begin_].time < day) ++begin_;
    std::size_t end = begin_;
    while (end < events_->events.size() && events_->events[end].time < day + dt) ++end;
    const std::span<const EventRecord> out(events_->events.data() + begin_, end - begin_);
    begin_ = end;
    return out;
  }

 private:
  const EventStream* events_;
  std::size_t begin_ = 0;
};

}  // namespace detail

/// Ranks nodes by the chosen criterion: in/outdegree over the transfer
/// events, time-averaged population, uniformly at random, or mean simulated
/// infectious pressure phi (the near-optimal `observation` strategy: an
/// extended pre-simulation recording phi over the final tail).
inline SentinelSet rank_sentinels(SentinelStrategy strategy, const ScenarioSetup& setup,
                                  const std::vector<Parameters>& posterior_draws, std::size_t size,
                                  Rng& rng, int presim_horizon = 0, int tail_days = 0) {
  const auto node_count = static_cast<std::size_t>(setup.events->node_count);
  if (size > node_count) throw ConfigError("sentinel set larger than node count");
  SentinelSet out;
  out.strategy = strategy;
  switch (strategy) {
    case SentinelStrategy::indegree:
    case SentinelStrategy::outdegree: {
      std::vector<double> degree(node_count, 0.0);
      for (const auto& e : setup.events->events) {
        if (e.kind != EventKind::transfer) continue;
        const auto node = strategy == SentinelStrategy::indegree ? e.dst : e.src;
        degree[static_cast<std::size_t>(node)] += static_cast<double>(e.count);
      }
      out.nodes = detail::top_k(degree, size);
      break;
    }
    case SentinelStrategy::largest: {
      // Population totals evolve only through events, so the time average is
      // deterministic.
      std::vector<double> average(node_count, 0.0);
      std::vector<std::int64_t> pop = setup.totals;
      pop.resize(node_count, 0);
      detail::EventCursor cursor(*setup.events);
      const int horizon = setup.events->horizon > 0 ? setup.events->horizon : 1;
      for (int day = 0; day < horizon; ++day) {
        for (const auto& e : cursor.window(day, 1)) {
          switch (e.kind) {
            case EventKind::enter: pop[static_cast<std::size_t>(e.dst)] += e.count; break;
            case EventKind::exit:
              pop[static_cast<std::size_t>(e.src)] -=
                  std::min(e.count, pop[static_cast<std::size_t>(e.src)]);
              break;
            case EventKind::transfer: {
              const auto moved = std::min(e.count, pop[static_cast<std::size_t>(e.src)]);
              pop[static_cast<std::size_t>(e.src)] -= moved;
              pop[static_cast<std::size_t>(e.dst)] += moved;
              break;
            }
          }
        }
        for (std::size_t i = 0; i < node_count; ++i)
          average[i] += static_cast<double>(pop[i]) / static_cast<double>(horizon);
      }
      out.nodes = detail::top_k(average, size);
      break;
    }
    case SentinelStrategy::random: {
      std::vector<std::int32_t> ids(node_count);
      std::iota(ids.begin(), ids.end(), 0);
      rng.shuffle(ids);
      ids.resize(size);
      out.nodes = std::move(ids);
      break;
    }
    case SentinelStrategy::observation: {
      if (posterior_draws.empty())
        throw ConfigError("observation strategy needs posterior parameter draws");
      if (presim_horizon <= 0) presim_horizon = setup.events->horizon;
      if (tail_days <= 0) tail_days = presim_horizon / 2;
      const int tail_start = presim_horizon - tail_days;
      std::vector<std::vector<double>> phi_sums(posterior_draws.size(),
                                                std::vector<double>(node_count, 0.0));
      Rng master = rng.substream("observation-presim");
      parallel_for(
          posterior_draws.size(),
          [&](std::size_t d) {
            Rng sub = master.substream(d);
            NetworkState state =
                make_initial_state(setup.totals, posterior_draws[d], *setup.calendar, sub);
            detail::EventCursor cursor(*setup.events);
            while (state.day < presim_horizon) {
              step(state, cursor.window(state.day, setup.dt), posterior_draws[d],
                   *setup.calendar, setup.dt);
              if (state.day > tail_start)
                for (std::size_t i = 0; i < node_count; ++i)
                  phi_sums[d][i] += state.nodes[i].phi;
            }
          },
          setup.workers);
      std::vector<double> mean_phi(node_count, 0.0);
      for (const auto& sums : phi_sums)
        for (std::size_t i = 0; i < node_count; ++i) mean_phi[i] += sums[i];
      out.nodes = detail::top_k(mean_phi, size);
      break;
    }
  }
  std::sort(out.nodes.begin(), out.nodes.end());
  return out;
}

// ---------------------------------------------------------------------------
// Detection probability
// ---------------------------------------------------------------------------

/// Per-node detection response to the environmental pressure.
struct SigmoidTest {
  double k = 15.0;     // sharpness
  double phi0 = 0.375; // cut-off

  void validate() const {
    if (!(k > 0.0)) throw ConfigError("sigmoid sharpness must be positive");
  }

  double probability(double phi) const { return 1.0 / (1.0 + std::exp(-k * (phi - phi0))); }
};

/// Pr(detect) = 1 - prod_i (1 - P(phi_i)); the empty set detects nothing.
inline double detection_probability(std::span<const double> phis, const SigmoidTest& test) {
  double miss = 1.0;
  for (double phi : phis) miss *= 1.0 - test.probability(phi);
  return 1.0 - miss;
}

struct DetectionResult {
  std::vector<int> days;
  std::vector<std::string> set_names;
  std::vector<PredictiveBand> bands;  // one per set, aggregated across draws
};

/// Simulates each posterior draw and evaluates the sentinel-set detection
/// probability at every recorded day; reports mean and central credible
/// interval across draws.
inline DetectionResult evaluate_detection(const std::vector<SentinelSet>& sets,
                                          const std::vector<Parameters>& posterior_draws,
                                          const SigmoidTest& test, const ScenarioSetup& setup,
                                          int horizon, int record_interval, Rng& rng,
                                          double level = 0.95) {
  test.validate();
  if (posterior_draws.size() < 2) throw ConfigError("need at least 2 posterior draws");
  if (record_interval <= 0 || record_interval % setup.dt != 0)
    throw ConfigError("record interval must be a positive multiple of dt");
  DetectionResult result;
  for (int day = record_interval; day <= horizon; day += record_interval)
    result.days.push_back(day);
  for (const auto& s : sets) result.set_names.push_back(to_string(s.strategy));

  const std::size_t n_draws = posterior_draws.size();
  // probabilities[draw][set][day index]
  std::vector<std::vector<std::vector<double>>> probabilities(
      n_draws, std::vector<std::vector<double>>(sets.size()));
  Rng master = rng.substream("detection");
  parallel_for(
      n_draws,
      [&](std::size_t d) {
        Rng sub = master.substream(d);
        NetworkState state =
            make_initial_state(setup.totals, posterior_draws[d], *setup.calendar, sub);
        detail::EventCursor cursor(*setup.events);
        std::size_t next_day = 0;
        while (state.day < horizon && next_day < result.days.size()) {
          step(state, cursor.window(state.day, setup.dt), posterior_draws[d], *setup.calendar,
               setup.dt);
          if (state.day == result.days[next_day]) {
            for (std::size_t s = 0; s < sets.size(); ++s) {
              std::vector<double> phis;
              phis.reserve(sets[s].nodes.size());
              for (auto n : sets[s].nodes)
                phis.push_back(state.nodes[static_cast<std::size_t>(n)].phi);
              probabilities[d][s].push_back(detection_probability(phis, test));
            }
            ++next_day;
          }
        }
      },
      setup.workers);

  const double tail = (1.0 - level) / 2.0;
  for (std::size_t s = 0; s < sets.size(); ++s) {
    PredictiveBand band;
    for (std::size_t t = 0; t < result.days.size(); ++t) {
      std::vector<double> column;
      for (std::size_t d = 0; d < n_draws; ++d) column.push_back(probabilities[d][s][t]);
      band.mean.push_back(sample_mean(column));
      band.lo.push_back(quantile(column, tail));
      band.hi.push_back(quantile(column, 1.0 - tail));
    }
    result.bands.push_back(std::move(band));
  }
  return result;
}

// ---------------------------------------------------------------------------
// Interventions
// ---------------------------------------------------------------------------

enum class InterventionStrategy : std::uint8_t {
  none,
  transport_clearing,  // moved infected arrive susceptible
  decay_boost,         // beta scaled by (1 + magnitude)
  uptake_cut,          // upsilon scaled by (1 - magnitude)
};

inline const char* to_string(InterventionStrategy s) {
  switch (s) {
    case InterventionStrategy::none: return "none";
    case InterventionStrategy::transport_clearing: return "transport-clearing";
    case InterventionStrategy::decay_boost: return "decay-boost";
    case InterventionStrategy::uptake_cut: return "uptake-cut";
  }
  return "?";
}

inline InterventionStrategy intervention_strategy_from(const std::string& name) {
  for (auto s : {InterventionStrategy::none, InterventionStrategy::transport_clearing,
                 InterventionStrategy::decay_boost, InterventionStrategy::uptake_cut})
    if (name == to_string(s)) return s;
  throw ConfigError("unknown intervention strategy '" + name + "'");
}

struct InterventionSpec {
  InterventionStrategy strategy = InterventionStrategy::none;
  double magnitude = 0.1;  // fraction, in (0,1] for boost/cut
  int day = 0;

  void validate() const {
    if (strategy == InterventionStrategy::decay_boost ||
        strategy == InterventionStrategy::uptake_cut) {
      if (!(magnitude >= 0.0 && magnitude <= 1.0))
        throw ConfigError("intervention magnitude must lie in [0,1]");
    }
    if (day < 0) throw ConfigError("intervention day must be non-negative");
  }

  Parameters modified(const Parameters& params) const {
    Parameters out = params;
    switch (strategy) {
      case InterventionStrategy::decay_boost:
        for (auto& b : out.beta) b *= 1.0 + magnitude;
        break;
      case InterventionStrategy::uptake_cut:
        out.upsilon *= 1.0 - magnitude;
        break;
      default:
        break;
    }
    return out;
  }
};

struct ReductionFactor {
  int year = 0;
  double mean = kMissing;
  double lo = kMissing;
  double hi = kMissing;
  std::size_t draws_used = 0;
};

struct InterventionResult {
  std::vector<int> days;
  PredictiveBand baseline;
  PredictiveBand treated;
  std::vector<ReductionFactor> reductions;
};

namespace detail {

// Population prevalence sum I / sum (S+I) over the whole network, recorded
// daily over [0, horizon).
inline std::vector<double> run_prevalence(const Parameters& params, const InterventionSpec& spec,
                                          const ScenarioSetup& setup, int horizon, Rng rng) {
  const Parameters post = spec.modified(params);
  ApplyOptions post_options;
  post_options.clear_infected_on_arrival =
      spec.strategy == InterventionStrategy::transport_clearing;
  NetworkState state = make_initial_state(setup.totals, params, *setup.calendar, rng);
  EventCursor cursor(*setup.events);
  std::vector<double> prevalence;
  prevalence.reserve(static_cast<std::size_t>(horizon));
  while (state.day < horizon) {
    const bool after = state.day >= spec.day;
    step(state, cursor.window(state.day, setup.dt), after ? post : params, *setup.calendar,
         setup.dt, after ? post_options : ApplyOptions{});
    std::int64_t infected = 0;
    std::int64_t total = 0;
    for (const auto& n : state.nodes) {
      infected += n.I;
      total += n.population();
    }
    prevalence.push_back(total > 0 ? static_cast<double>(infected) / static_cast<double>(total)
                                   : 0.0);
  }
  return prevalence;
}

}  // namespace detail

/// Runs each posterior draw twice with common random numbers, without and
/// with the intervention applied from `pre_years` on, and reports the
/// prevalence response plus per-year reduction factors
/// prevalence(strategy) / prevalence(none) averaged over the final quarter
/// of each post-intervention year.
inline InterventionResult evaluate_intervention(InterventionSpec spec,
                                                const std::vector<Parameters>& posterior_draws,
                                                const ScenarioSetup& setup, int pre_years,
                                                int post_years, Rng& rng, double level = 0.95,
                                                int record_interval = 10) {
  spec.validate();
  if (posterior_draws.size() < 2) throw ConfigError("need at least 2 posterior draws");
  if (setup.dt != 1) throw ConfigError("intervention evaluation requires dt = 1");
  const int intervention_day = pre_years * kDaysPerYear;
  spec.day = intervention_day;
  const int horizon = (pre_years + post_years) * kDaysPerYear;
  const std::size_t n_draws = posterior_draws.size();

  std::vector<std::vector<double>> base(n_draws), treat(n_draws);
  Rng master = rng.substream("intervention");
  parallel_for(
      n_draws,
      [&](std::size_t d) {
        Rng sub = master.substream(d);
        InterventionSpec none = spec;
        none.strategy = InterventionStrategy::none;
        base[d] = detail::run_prevalence(posterior_draws[d], none, setup, horizon, sub);
        treat[d] = detail::run_prevalence(posterior_draws[d], spec, setup, horizon, sub);
      },
      setup.workers);

  InterventionResult result;
  for (int day = record_interval; day <= horizon; day += record_interval)
    result.days.push_back(day);
  const double tail = (1.0 - level) / 2.0;
  auto aggregate = [&](const std::vector<std::vector<double>>& runs) {
    PredictiveBand band;
    for (int day : result.days) {
      std::vector<double> column;
      for (const auto& run : runs) column.push_back(run[static_cast<std::size_t>(day - 1)]);
      band.mean.push_back(sample_mean(column));
      band.lo.push_back(quantile(column, tail));
      band.hi.push_back(quantile(column, 1.0 - tail));
    }
    return band;
  };
  result.baseline = aggregate(base);
  result.treated = aggregate(treat);

  for (int year = 1; year <= post_years; ++year) {
    const int window_end = intervention_day + year * kDaysPerYear;
    const int window_start = window_end - 91;
    std::vector<double> ratios;
    for (std::size_t d = 0; d < n_draws; ++d) {
      double base_sum = 0.0;
      double treat_sum = 0.0;
      for (int day = window_start; day < window_end; ++day) {
        base_sum += base[d][static_cast<std::size_t>(day)];
        treat_sum += treat[d][static_cast<std::size_t>(day)];
      }
      if (base_sum > 0.0) ratios.push_back(treat_sum / base_sum);
    }
    ReductionFactor rf;
    rf.year = year;
    rf.draws_used = ratios.size();
    if (!ratios.empty()) {
      rf.mean = sample_mean(ratios);
      rf.lo = quantile(ratios, tail);
      rf.hi = quantile(ratios, 1.0 - tail);
    }
    result.reductions.push_back(rf);
  }
  return result;
}

// Scenario series CSV: `day,set_or_strategy,mean,lo,hi`.
inline void write_scenario_bands(const std::vector<int>& days,
                                 const std::vector<std::string>& names,
                                 const std::vector<PredictiveBand>& bands,
                                 const std::string& path) {
  CsvWriter w(path);
  w.raw("day,set_or_strategy,mean,lo,hi");
  for (std::size_t s = 0; s < bands.size(); ++s)
    for (std::size_t t = 0; t < days.size(); ++t)
      w.row({std::to_string(days[t]), names[s], format_double(bands[s].mean[t]),
             format_double(bands[s].lo[t]), format_double(bands[s].hi[t])});
}

inline void write_reduction_factors(const std::string& strategy,
                                    const std::vector<ReductionFactor>& reductions,
                                    const std::string& path) {
  CsvWriter w(path);
  w.raw("strategy,year,mean,lo,hi,draws");
  for (const auto& r : reductions)
    w.row({strategy, std::to_string(r.year), format_double(r.mean), format_double(r.lo),
           format_double(r.hi), std::to_string(r.draws_used)});
}

}  // namespace sisepi

#endif
