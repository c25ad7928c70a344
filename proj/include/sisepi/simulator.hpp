#ifndef SISEPI_SIMULATOR_HPP
#define SISEPI_SIMULATOR_HPP

#include <algorithm>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "sisepi/events.hpp"
#include "sisepi/io.hpp"
#include "sisepi/model.hpp"
#include "sisepi/parallel.hpp"
#include "sisepi/rng.hpp"

namespace sisepi {

struct NetworkState {
  std::vector<NodeState> nodes;
  int day = 0;
  Rng rng;

  NetworkState(std::size_t node_count, Rng rng_) : nodes(node_count), rng(rng_) {}

  std::int64_t total_population() const {
    std::int64_t total = 0;
    for (const auto& n : nodes) total += n.population();
    return total;
  }
};

/// Draws the initial state: per-node binomial prevalence p0 and equilibrium
/// phi, per-node season taken at day 0.
inline NetworkState make_initial_state(const std::vector<std::int64_t>& totals,
                                       const Parameters& params, const SeasonCalendar& calendar,
                                       Rng rng) {
  NetworkState state(totals.size(), rng);
  for (std::size_t i = 0; i < totals.size(); ++i)
    state.nodes[i] =
        init_state(totals[i], params, calendar.season_of(static_cast<std::int32_t>(i), 0),
                   state.rng);
  return state;
}

struct RecordingSpec {
  std::vector<int> days;            // strictly increasing
  std::vector<std::int32_t> nodes;  // recorded subset, ascending

  static RecordingSpec every(int interval, int horizon, std::vector<std::int32_t> nodes) {
    if (interval <= 0) throw ConfigError("recording interval must be positive");
    RecordingSpec spec;
    for (int d = 0; d <= horizon; d += interval) spec.days.push_back(d);
    spec.nodes = std::move(nodes);
    return spec;
  }

  void validate(std::int32_t node_count) const {
    for (std::size_t i = 1; i < days.size(); ++i)
      if (days[i] <= days[i - 1]) throw ConfigError("recording days must be strictly increasing");
    for (auto n : nodes)
      if (n < 0 || n >= node_count) throw ConfigError("recorded node id out of range");
  }
};

/// Snapshots of (S, I, phi) on the recorded node subset at the recorded days.
struct Trajectory {
  std::vector<int> days;
  std::vector<std::int32_t> nodes;
  std::vector<std::vector<NodeState>> snapshots;  // [day index][node index]

  std::size_t day_index(int day) const {
    const auto it = std::lower_bound(days.begin(), days.end(), day);
    if (it == days.end() || *it != day)
      throw ConfigError("day " + std::to_string(day) + " not recorded in trajectory");
    return static_cast<std::size_t>(it - days.begin());
  }

  std::size_t node_index(std::int32_t node) const {
    const auto it = std::lower_bound(nodes.begin(), nodes.end(), node);
    if (it == nodes.end() || *it != node)
      throw ConfigError("node " + std::to_string(node) + " not recorded in trajectory");
    return static_cast<std::size_t>(it - nodes.begin());
  }
};

namespace detail {

// Exact stochastic simulation of the local jumps over [0, dt) with phi frozen
// at its start-of-step value. S and I do update between jumps.
inline void ssa_node(NodeState& node, const Parameters& params, Season, double phi_frozen,
                     double dt, Rng& rng) {
  double t = 0.0;
  for (;;) {
    const double infection = params.upsilon * phi_frozen * static_cast<double>(node.S);
    const double recovery = params.gamma * static_cast<double>(node.I);
    const double total = infection + recovery;
    if (total <= 0.0) return;
    t += rng.exponential(total);
    if (t >= dt) return;
    if (rng.uniform() * total < infection) {
      --node.S;
      ++node.I;
    } else {
      --node.I;
      ++node.S;
    }
  }
}

}  // namespace detail

/// One operator-splitting step of length dt: (1) local jumps node by node
/// with phi frozen, (2) scheduled events in time order, (3) forward-Euler
/// update of phi. The Euler shedding term uses the post-jump, pre-event
/// counts; beta is resolved at the step's start day.
inline void step(NetworkState& state, std::span<const EventRecord> events_in_window,
                 const Parameters& params, const SeasonCalendar& calendar, double dt,
                 const ApplyOptions& options = {}) {
  if (!(dt > 0.0)) throw ConfigError("dt must be positive");
  const std::size_t n = state.nodes.size();
  std::vector<double> shed(n);
  for (std::size_t i = 0; i < n; ++i) {
    NodeState& node = state.nodes[i];
    const Season season = calendar.season_of(static_cast<std::int32_t>(i), state.day);
    if (!std::isfinite(node.phi)) throw ModelError("non-finite environmental pressure");
    detail::ssa_node(node, params, season, node.phi, dt, state.rng);
    shed[i] = shedding_fraction(node);
  }
  for (const auto& e : events_in_window) {
    if (e.time < state.day || static_cast<double>(e.time) >= state.day + dt)
      throw EventError(e.src != kNoNode ? e.src : e.dst, e.time, "event outside step window");
    apply_event(state.nodes, e, state.rng, options);
  }
  for (std::size_t i = 0; i < n; ++i) {
    NodeState& node = state.nodes[i];
    const Season season = calendar.season_of(static_cast<std::int32_t>(i), state.day);
    node.phi += dt * (shed[i] - params.beta_for(season) * node.phi);
  }
  state.day = static_cast<int>(state.day + dt);
}

/// Advances the state to `horizon` days in steps of dt, replaying the event
/// stream and recording snapshots per the spec. Deterministic given the
/// state's generator seed.
inline Trajectory simulate(NetworkState state, const EventStream& events, const Parameters& params,
                           const SeasonCalendar& calendar, int horizon, int dt,
                           const RecordingSpec& recording, const ApplyOptions& options = {}) {
  if (dt <= 0) throw ConfigError("dt must be positive");
  recording.validate(static_cast<std::int32_t>(state.nodes.size()));
  for (std::size_t i = 1; i < recording.days.size(); ++i)
    if ((recording.days[i] - recording.days[i - 1]) % dt != 0)
      throw ConfigError("dt must divide the recording interval");

  Trajectory traj;
  traj.days = recording.days;
  traj.nodes = recording.nodes;
  std::sort(traj.nodes.begin(), traj.nodes.end());

  auto record = [&](int day) {
    if (!std::binary_search(traj.days.begin(), traj.days.end(), day)) return;
    std::vector<NodeState> snap;
    snap.reserve(traj.nodes.size());
    for (auto n : traj.nodes) snap.push_back(state.nodes[static_cast<std::size_t>(n)]);
    traj.snapshots.push_back(std::move(snap));
  };

  std::size_t next_event = 0;
  while (next_event < events.events.size() && events.events[next_event].time < state.day)
    ++next_event;

  record(state.day);
  while (state.day < horizon) {
    const int window_end = state.day + dt;
    std::size_t last = next_event;
    while (last < events.events.size() && events.events[last].time < window_end) ++last;
    step(state,
         std::span<const EventRecord>(events.events.data() + next_event, last - next_event),
         params, calendar, dt, options);
    next_event = last;
    record(state.day);
  }
  return traj;
}

/// n independent trajectories from substreams of one master generator; the
/// result does not depend on the worker count.
inline std::vector<Trajectory> simulate_batch(std::size_t n,
                                              const std::vector<std::int64_t>& totals,
                                              const EventStream& events, const Parameters& params,
                                              const SeasonCalendar& calendar, int horizon, int dt,
                                              const RecordingSpec& recording, Rng master,
                                              unsigned workers = 0,
                                              const ApplyOptions& options = {}) {
  std::vector<Trajectory> out(n);
  parallel_for(
      n,
      [&](std::size_t i) {
        Rng rng = master.substream(i);
        NetworkState state = make_initial_state(totals, params, calendar, rng);
        out[i] = simulate(std::move(state), events, params, calendar, horizon, dt, recording,
                          options);
      },
      workers);
  return out;
}

// Trajectory CSV: `day,node,S,I,phi`.
inline void write_trajectory(const Trajectory& traj, const std::string& path) {
  CsvWriter w(path);
  w.raw("day,node,S,I,phi");
  for (std::size_t d = 0; d < traj.days.size(); ++d)
    for (std::size_t j = 0; j < traj.nodes.size(); ++j) {
      const auto& s = traj.snapshots[d][j];
      w.row({std::to_string(traj.days[d]), std::to_string(traj.nodes[j]), std::to_string(s.S),
             std::to_string(s.I), format_double(s.phi)});
    }
}

inline Trajectory parse_trajectory(const std::string& path) {
  CsvReader reader(path);
  std::vector<std::string> fields;
  bool saw_header = false;
  Trajectory traj;
  std::vector<std::tuple<int, std::int32_t, NodeState>> rows;
  while (reader.next(fields)) {
    if (!saw_header) {
      saw_header = true;
      if (fields.size() != 5 || fields[0] != "day")
        reader.fail("expected header 'day,node,S,I,phi'");
      continue;
    }
    if (fields.size() != 5) reader.fail("expected 5 fields");
    NodeState s{reader.to_int(fields[2]), reader.to_int(fields[3]), reader.to_double(fields[4])};
    rows.emplace_back(static_cast<int>(reader.to_int(fields[0])),
                      static_cast<std::int32_t>(reader.to_int(fields[1])), s);
  }
  for (const auto& [day, node, s] : rows) {
    if (traj.days.empty() || traj.days.back() != day) traj.days.push_back(day);
    if (traj.days.size() == 1) traj.nodes.push_back(node);
  }
  traj.snapshots.assign(traj.days.size(), std::vector<NodeState>(traj.nodes.size()));
  std::size_t r = 0;
  for (std::size_t d = 0; d < traj.days.size(); ++d)
    for (std::size_t j = 0; j < traj.nodes.size(); ++j, ++r) {
      if (r >= rows.size()) throw ConfigError(path + ": truncated trajectory");
      traj.snapshots[d][j] = std::get<2>(rows[r]);
    }
  if (r != rows.size()) throw ConfigError(path + ": ragged trajectory");
  return traj;
}

}  // namespace sisepi

#endif
