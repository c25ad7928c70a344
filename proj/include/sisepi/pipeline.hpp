#ifndef SISEPI_PIPELINE_HPP
#define SISEPI_PIPELINE_HPP

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "sisepi/events.hpp"
#include "sisepi/io.hpp"
#include "sisepi/model.hpp"
#include "sisepi/observation.hpp"
#include "sisepi/simulator.hpp"
#include "sisepi/summaries.hpp"
#include "sisepi/synlik.hpp"

namespace sisepi {

// ---------------------------------------------------------------------------
// Parameter vector <-> model parameters
// ---------------------------------------------------------------------------

/// Names the inferred components of the parameter vector; everything else is
/// pinned at the base values. With tie_beta3_to_beta1, beta3 follows beta1
/// (the spring/fall equivalence).
struct ParamMap {
  Parameters base;
  std::vector<std::string> free_names;
  bool tie_beta3_to_beta1 = false;

  std::size_t dim() const { return free_names.size(); }

  static double& component(Parameters& p, const std::string& name) {
    if (name == "upsilon") return p.upsilon;
    if (name == "beta1") return p.beta[0];
    if (name == "beta2") return p.beta[1];
    if (name == "beta3") return p.beta[2];
    if (name == "beta4") return p.beta[3];
    if (name == "gamma") return p.gamma;
    if (name == "p0") return p.p0;
    throw ConfigError("unknown parameter component '" + name + "'");
  }

  Parameters to_params(const std::vector<double>& theta) const {
    if (theta.size() != free_names.size())
      throw ConfigError("parameter vector dimension mismatch");
    Parameters p = base;
    for (std::size_t i = 0; i < theta.size(); ++i) component(p, free_names[i]) = theta[i];
    if (tie_beta3_to_beta1) p.beta[2] = p.beta[0];
    return p;
  }

  std::vector<double> to_vector(const Parameters& params) const {
    Parameters copy = params;
    std::vector<double> theta(free_names.size());
    for (std::size_t i = 0; i < theta.size(); ++i) theta[i] = component(copy, free_names[i]);
    return theta;
  }

  static ParamMap from_json(const nlohmann::json& j) {
    ParamMap map;
    const auto& b = j.at("base");
    map.base.upsilon = b.value("upsilon", 1e-3);
    map.base.gamma = b.value("gamma", 0.1);
    map.base.p0 = b.value("p0", 0.1);
    const double beta = b.value("beta", 0.1);
    map.base.beta = {b.value("beta1", beta), b.value("beta2", beta), b.value("beta3", beta),
                     b.value("beta4", beta)};
    map.free_names = j.at("free").get<std::vector<std::string>>();
    map.tie_beta3_to_beta1 = j.value("tie_beta3_to_beta1", false);
    for (const auto& n : map.free_names) component(map.base, n);  // name check
    return map;
  }
};

inline PriorBox prior_from_json(const nlohmann::json& j, const ParamMap& map) {
  PriorBox prior;
  for (const auto& name : map.free_names) {
    const auto& bounds = j.at(name);
    prior.lo.push_back(bounds.at(0).get<double>());
    prior.hi.push_back(bounds.at(1).get<double>());
  }
  prior.validate();
  return prior;
}

// ---------------------------------------------------------------------------
// Data-generating setup
// ---------------------------------------------------------------------------

enum class DataKind : std::uint8_t { prevalence, binary };

inline const char* to_string(DataKind k) {
  return k == DataKind::prevalence ? "prevalence" : "binary";
}

inline DataKind data_kind_from(const std::string& name) {
  if (name == "prevalence") return DataKind::prevalence;
  if (name == "binary") return DataKind::binary;
  throw ConfigError("unknown data kind '" + name + "'");
}

/// Fixed ingredients of the simulation-driven measurement process: the
/// network, the demographic events, the season calendar, and the observation
/// cadence. The parameter vector is the only thing that varies across
/// inference proposals.
struct SimulationSetup {
  std::vector<std::int64_t> totals;
  EventStream events;
  SeasonCalendar calendar;
  int dt = 1;
  int horizon = 0;
  DataKind kind = DataKind::binary;
  SwabConfig swab;                      // binary filter; holds tested nodes and days
  std::vector<std::int32_t> observed_nodes;  // prevalence subset
  std::vector<int> observation_days;         // prevalence recording days
  unsigned workers = 0;

  RecordingSpec recording() const {
    RecordingSpec spec;
    if (kind == DataKind::binary) {
      spec.days = swab.test_days;
      spec.nodes = swab.tested_nodes;
    } else {
      spec.days = observation_days;
      spec.nodes = observed_nodes;
    }
    if (spec.days.empty() || spec.days.front() != 0)
      spec.days.insert(spec.days.begin(), 0);
    return spec;
  }
};

/// One draw of the measured data series under the given parameters.
inline BinnedSeries simulate_series(const SimulationSetup& setup, const Parameters& params,
                                    Rng& rng) {
  NetworkState state = make_initial_state(setup.totals, params, setup.calendar,
                                          rng.substream("sim"));
  const Trajectory traj = simulate(std::move(state), setup.events, params, setup.calendar,
                                   setup.horizon, setup.dt, setup.recording());
  if (setup.kind == DataKind::binary) {
    Rng obs_rng = rng.substream("swab");
    return binary_filter(traj, setup.swab, obs_rng).to_series();
  }
  return prevalence(traj, setup.observed_nodes, setup.swab.start_quarter);
}

/// Simulator closure for the inference modules. The setup must outlive the
/// returned closure.
inline SlContext::SeriesSimulator make_series_simulator(const SimulationSetup& setup,
                                                        const ParamMap& map) {
  const SimulationSetup* s = &setup;
  return [s, map](const std::vector<double>& theta, Rng& rng) {
    return simulate_series(*s, map.to_params(theta), rng);
  };
}

}  // namespace sisepi

#endif
