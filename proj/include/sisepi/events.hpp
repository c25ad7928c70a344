#ifndef SISEPI_EVENTS_HPP
#define SISEPI_EVENTS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "sisepi/io.hpp"
#include "sisepi/model.hpp"
#include "sisepi/rng.hpp"

namespace sisepi {

struct EventError : std::runtime_error {
  EventError(std::int32_t node_, int time_, const std::string& what)
      : std::runtime_error("event at day " + std::to_string(time_) + ", node " +
                           std::to_string(node_) + ": " + what),
        node(node_),
        time(time_) {}
  std::int32_t node;
  int time;
};

enum class EventKind : std::uint8_t { enter, exit, transfer };

constexpr std::int32_t kNoNode = -1;

/// One scheduled demographic action. enter has dst only, exit has src only,
/// transfer has both with src != dst.
struct EventRecord {
  int time = 0;
  EventKind kind = EventKind::enter;
  std::int32_t src = kNoNode;
  std::int32_t dst = kNoNode;
  std::int64_t count = 1;

  bool operator==(const EventRecord&) const = default;
};

struct EventStream {
  std::vector<EventRecord> events;  // sorted by time, stable among equals
  std::int32_t node_count = 0;
  int horizon = 0;  // days; 1 + last event time for nonempty streams
};

inline const char* to_string(EventKind k) {
  switch (k) {
    case EventKind::enter: return "enter";
    case EventKind::exit: return "exit";
    case EventKind::transfer: return "transfer";
  }
  return "?";
}

inline void validate_record(const EventRecord& e, std::int32_t node_count) {
  if (e.count < 1) throw EventError(e.src != kNoNode ? e.src : e.dst, e.time, "count must be >= 1");
  auto check_node = [&](std::int32_t n, const char* role) {
    if (n < 0 || n >= node_count)
      throw EventError(n, e.time, std::string(role) + " node id out of range");
  };
  switch (e.kind) {
    case EventKind::enter:
      if (e.src != kNoNode) throw EventError(e.src, e.time, "enter must not have a source");
      check_node(e.dst, "destination");
      break;
    case EventKind::exit:
      if (e.dst != kNoNode) throw EventError(e.dst, e.time, "exit must not have a destination");
      check_node(e.src, "source");
      break;
    case EventKind::transfer:
      check_node(e.src, "source");
      check_node(e.dst, "destination");
      if (e.src == e.dst) throw EventError(e.src, e.time, "transfer must have src != dst");
      break;
  }
}

enum class UnderflowPolicy : std::uint8_t { strict, clamp };

struct ApplyOptions {
  UnderflowPolicy underflow = UnderflowPolicy::strict;
  // Intervention hook: moved infected individuals arrive susceptible.
  bool clear_infected_on_arrival = false;
};

/// Applies one event to the network state. Individuals leaving a node are
/// sampled hypergeometrically from (S, I), ignoring infection state; a
/// transfer keeps the sampled split at the destination. phi never changes.
inline void apply_event(std::vector<NodeState>& nodes, const EventRecord& event, Rng& rng,
                        const ApplyOptions& options = {}) {
  auto remove_split = [&](std::int32_t src) {
    NodeState& node = nodes[static_cast<std::size_t>(src)];
    std::int64_t count = event.count;
    const std::int64_t pop = node.population();
    if (count > pop) {
      if (options.underflow == UnderflowPolicy::strict)
        throw EventError(src, event.time,
                         "requested " + std::to_string(count) + " individuals from population " +
                             std::to_string(pop));
      count = pop;
    }
    const std::int64_t removed_infected = rng.hypergeometric(pop, node.I, count);
    node.I -= removed_infected;
    node.S -= count - removed_infected;
    return std::pair<std::int64_t, std::int64_t>{count - removed_infected, removed_infected};
  };

  switch (event.kind) {
    case EventKind::enter:
      // Individuals entering the network are susceptible.
      nodes[static_cast<std::size_t>(event.dst)].S += event.count;
      break;
    case EventKind::exit:
      remove_split(event.src);
      break;
    case EventKind::transfer: {
      auto [moved_s, moved_i] = remove_split(event.src);
      NodeState& dst = nodes[static_cast<std::size_t>(event.dst)];
      if (options.clear_infected_on_arrival) {
        dst.S += moved_s + moved_i;
      } else {
        dst.S += moved_s;
        dst.I += moved_i;
      }
      break;
    }
  }
}

// ---------------------------------------------------------------------------
// CSV format: header `time,kind,src,dst,count`; enter leaves src empty and
// exit leaves dst empty.
// ---------------------------------------------------------------------------

inline EventStream parse_events(const std::string& path) {
  CsvReader reader(path);
  std::vector<std::string> fields;
  EventStream stream;
  bool saw_header = false;
  std::int32_t max_node = -1;
  bool sorted = true;
  while (reader.next(fields)) {
    if (!saw_header) {
      saw_header = true;
      if (fields.size() != 5 || fields[0] != "time")
        reader.fail("expected header 'time,kind,src,dst,count'");
      continue;
    }
    if (fields.size() != 5) reader.fail("expected 5 fields");
    EventRecord e;
    e.time = static_cast<int>(reader.to_int(fields[0]));
    if (e.time < 0) reader.fail("negative event time");
    if (fields[1] == "enter") e.kind = EventKind::enter;
    else if (fields[1] == "exit") e.kind = EventKind::exit;
    else if (fields[1] == "transfer") e.kind = EventKind::transfer;
    else reader.fail("unknown event kind '" + fields[1] + "'");
    e.src = fields[2].empty() ? kNoNode : static_cast<std::int32_t>(reader.to_int(fields[2]));
    e.dst = fields[3].empty() ? kNoNode : static_cast<std::int32_t>(reader.to_int(fields[3]));
    e.count = reader.to_int(fields[4]);
    try {
      validate_record(e, std::numeric_limits<std::int32_t>::max());
    } catch (const EventError& err) {
      reader.fail(err.what());
    }
    max_node = std::max({max_node, e.src, e.dst});
    if (!stream.events.empty() && e.time < stream.events.back().time) sorted = false;
    stream.events.push_back(e);
  }
  if (!sorted) {
    log_warn(path + ": events not sorted by time; sorting (stable)");
    std::stable_sort(stream.events.begin(), stream.events.end(),
                     [](const EventRecord& a, const EventRecord& b) { return a.time < b.time; });
  }
  stream.node_count = max_node + 1;
  stream.horizon = stream.events.empty() ? 0 : stream.events.back().time + 1;
  return stream;
}

inline void write_events(const EventStream& stream, const std::string& path) {
  CsvWriter w(path);
  w.raw("time,kind,src,dst,count");
  for (const auto& e : stream.events) {
    w.row({std::to_string(e.time), to_string(e.kind),
           e.src == kNoNode ? "" : std::to_string(e.src),
           e.dst == kNoNode ? "" : std::to_string(e.dst), std::to_string(e.count)});
  }
}

// populations CSV: header `node,total`, one row per node.
inline std::vector<std::int64_t> parse_populations(const std::string& path) {
  CsvReader reader(path);
  std::vector<std::string> fields;
  bool saw_header = false;
  std::vector<std::pair<std::int32_t, std::int64_t>> rows;
  std::int32_t max_node = -1;
  while (reader.next(fields)) {
    if (!saw_header) {
      saw_header = true;
      if (fields.size() != 2 || fields[0] != "node") reader.fail("expected header 'node,total'");
      continue;
    }
    if (fields.size() != 2) reader.fail("expected 2 fields");
    const auto node = static_cast<std::int32_t>(reader.to_int(fields[0]));
    const auto total = reader.to_int(fields[1]);
    if (node < 0) reader.fail("negative node id");
    if (total < 0) reader.fail("negative population");
    rows.push_back({node, total});
    max_node = std::max(max_node, node);
  }
  std::vector<std::int64_t> totals(static_cast<std::size_t>(max_node + 1), 0);
  for (auto [node, total] : rows) totals[static_cast<std::size_t>(node)] = total;
  return totals;
}

inline void write_populations(const std::vector<std::int64_t>& totals, const std::string& path) {
  CsvWriter w(path);
  w.raw("node,total");
  for (std::size_t i = 0; i < totals.size(); ++i)
    w.row({std::to_string(i), std::to_string(totals[i])});
}

// ---------------------------------------------------------------------------
// Synthetic demography
// ---------------------------------------------------------------------------

/// Generator settings for event streams mimicking seasonal livestock
/// demography. Rates are annual per-node expectations; the daily intensity is
/// modulated by 1 + amplitude * sin(2 pi (day - phase)/365).
struct DemographyConfig {
  double init_population_mean = 50.0;
  double enter_per_node_year = 28.5;
  double exit_per_node_year = 28.5;
  double transfer_per_node_year = 15.9;
  double seasonal_amplitude = 0.3;
  int seasonal_phase_day = 120;
  std::int64_t batch_size = 1;

  static DemographyConfig from_json(const nlohmann::json& j) {
    DemographyConfig c;
    if (j.contains("init_population_mean")) c.init_population_mean = j.at("init_population_mean");
    if (j.contains("enter_per_node_year")) c.enter_per_node_year = j.at("enter_per_node_year");
    if (j.contains("exit_per_node_year")) c.exit_per_node_year = j.at("exit_per_node_year");
    if (j.contains("transfer_per_node_year"))
      c.transfer_per_node_year = j.at("transfer_per_node_year");
    if (j.contains("seasonal_amplitude")) c.seasonal_amplitude = j.at("seasonal_amplitude");
    if (j.contains("seasonal_phase_day")) c.seasonal_phase_day = j.at("seasonal_phase_day");
    if (j.contains("batch_size")) c.batch_size = j.at("batch_size");
    return c;
  }
};

inline std::vector<std::int64_t> generate_initial_populations(std::int32_t node_count,
                                                              const DemographyConfig& config,
                                                              Rng& rng) {
  std::vector<std::int64_t> totals(static_cast<std::size_t>(node_count));
  for (auto& t : totals) t = 1 + rng.poisson(std::max(0.0, config.init_population_mean - 1.0));
  return totals;
}

/// Generates a seasonally modulated event stream. Exit and transfer sources
/// are weighted by current population so the stream never underflows;
/// transfer destinations are uniform.
inline EventStream generate_synthetic_events(std::int32_t node_count, int years,
                                             const DemographyConfig& config, Rng& rng,
                                             std::vector<std::int64_t> populations = {}) {
  if (node_count < 2) throw ConfigError("generator needs at least 2 nodes");
  if (years < 1) throw ConfigError("generator needs at least 1 year");
  if (populations.empty()) populations = generate_initial_populations(node_count, config, rng);
  if (populations.size() != static_cast<std::size_t>(node_count))
    throw ConfigError("populations length must equal node count");

  std::vector<std::int64_t> pop = populations;
  std::int64_t total_pop = 0;
  for (auto p : pop) total_pop += p;

  // Weighted source choice by current population; linear scan is fine at the
  // stream sizes used here.
  auto pick_source = [&]() -> std::int32_t {
    if (total_pop <= 0) return kNoNode;
    std::int64_t target = rng.uniform_int(total_pop);
    for (std::size_t i = 0; i < pop.size(); ++i) {
      target -= pop[i];
      if (target < 0) return static_cast<std::int32_t>(i);
    }
    return static_cast<std::int32_t>(pop.size() - 1);
  };

  EventStream stream;
  stream.node_count = node_count;
  stream.horizon = years * kDaysPerYear;
  const double per_day = static_cast<double>(node_count) / static_cast<double>(kDaysPerYear);
  for (int day = 0; day < stream.horizon; ++day) {
    const double phase = 2.0 * std::numbers::pi *
                         static_cast<double>(day - config.seasonal_phase_day) /
                         static_cast<double>(kDaysPerYear);
    const double season_factor = 1.0 + config.seasonal_amplitude * std::sin(phase);
    const std::int64_t n_enter = rng.poisson(config.enter_per_node_year * per_day * season_factor);
    const std::int64_t n_exit = rng.poisson(config.exit_per_node_year * per_day * season_factor);
    const std::int64_t n_transfer =
        rng.poisson(config.transfer_per_node_year * per_day * season_factor);

    for (std::int64_t k = 0; k < n_enter; ++k) {
      const auto dst = static_cast<std::int32_t>(rng.uniform_int(node_count));
      stream.events.push_back({day, EventKind::enter, kNoNode, dst, config.batch_size});
      pop[static_cast<std::size_t>(dst)] += config.batch_size;
      total_pop += config.batch_size;
    }
    for (std::int64_t k = 0; k < n_exit; ++k) {
      const auto src = pick_source();
      if (src == kNoNode) break;
      const std::int64_t count = std::min(config.batch_size, pop[static_cast<std::size_t>(src)]);
      stream.events.push_back({day, EventKind::exit, src, kNoNode, count});
      pop[static_cast<std::size_t>(src)] -= count;
      total_pop -= count;
    }
    for (std::int64_t k = 0; k < n_transfer; ++k) {
      const auto src = pick_source();
      if (src == kNoNode) break;
      std::int32_t dst = static_cast<std::int32_t>(rng.uniform_int(node_count - 1));
      if (dst >= src) ++dst;
      const std::int64_t count = std::min(config.batch_size, pop[static_cast<std::size_t>(src)]);
      stream.events.push_back({day, EventKind::transfer, src, dst, count});
      pop[static_cast<std::size_t>(src)] -= count;
      pop[static_cast<std::size_t>(dst)] += count;
    }
  }
  return stream;
}

}  // namespace sisepi

#endif
