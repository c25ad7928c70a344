#ifndef SISEPI_MODEL_HPP
#define SISEPI_MODEL_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "sisepi/io.hpp"
#include "sisepi/rng.hpp"

namespace sisepi {

struct ModelError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

constexpr int kDaysPerYear = 365;

enum class Season : std::uint8_t { spring = 0, summer = 1, fall = 2, winter = 3 };

constexpr std::array<const char*, 4> kSeasonNames = {"spring", "summer", "fall", "winter"};

/// Local infection model parameters. beta is the seasonal decay of the
/// environmental pressure, indexed by Season.
struct Parameters {
  double upsilon = 0.0;             // indirect transmission rate, per unit phi per day
  std::array<double, 4> beta{};     // decay rate per day, [spring, summer, fall, winter]
  double gamma = 0.0;               // recovery rate per day
  double p0 = 0.0;                  // initial prevalence fraction

  double beta_for(Season s) const { return beta[static_cast<std::size_t>(s)]; }

  // tied_seasons enforces beta[spring] == beta[fall].
  void validate(bool tied_seasons = false) const {
    auto positive = [](double v, const char* name) {
      if (!(v > 0.0) || !std::isfinite(v))
        throw ModelError(std::string("parameter ") + name + " must be strictly positive");
    };
    positive(upsilon, "upsilon");
    positive(gamma, "gamma");
    for (std::size_t i = 0; i < 4; ++i) positive(beta[i], kSeasonNames[i]);
    if (!(p0 >= 0.0 && p0 <= 1.0)) throw ModelError("p0 must lie in [0,1]");
    if (tied_seasons && beta[0] != beta[2])
      throw ModelError("tied seasons require beta[spring] == beta[fall]");
  }
};

/// Per-node compartment counts plus the continuous environmental pressure.
struct NodeState {
  std::int64_t S = 0;
  std::int64_t I = 0;
  double phi = 0.0;

  std::int64_t population() const { return S + I; }
};

/// Maps (node, day) to a season. Nodes are partitioned into groups, each with
/// its own day-of-year table covering all 365 days exactly once.
class SeasonCalendar {
 public:
  // Default calendar: spring 60-151, summer 152-243, fall 244-334,
  // winter 335-59 (wrapping), for all nodes.
  using Ranges = std::array<std::vector<std::pair<int, int>>, 4>;

  SeasonCalendar() {
    tables_.push_back(
        make_table(Ranges{{{{60, 151}}, {{152, 243}}, {{244, 334}}, {{335, 59}}}}));
  }

  static SeasonCalendar uniform(const Ranges& ranges) {
    SeasonCalendar cal;
    cal.tables_.clear();
    cal.tables_.push_back(make_table(ranges));
    return cal;
  }

  // Two-season variant: beta[spring] covers the first half year,
  // beta[summer] the second.
  static SeasonCalendar half_year() {
    return uniform({{{{0, 181}}, {{182, 364}}, {}, {}}});
  }

  Season season_of(std::int32_t node, int day) const {
    const auto& table = tables_[group_of(node)];
    int doy = day % kDaysPerYear;
    if (doy < 0) doy += kDaysPerYear;
    return table[static_cast<std::size_t>(doy)];
  }

  // Node groups: entries are [first_node, last_node] -> group index; nodes not
  // covered fall into group 0.
  void assign_group(std::int32_t first, std::int32_t last, std::size_t group) {
    if (group >= tables_.size()) throw ConfigError("calendar group out of range");
    assignments_.push_back({first, last, group});
  }

  std::size_t add_table(const Ranges& ranges) {
    tables_.push_back(make_table(ranges));
    return tables_.size() - 1;
  }

  std::size_t group_count() const { return tables_.size(); }

 private:
  std::size_t group_of(std::int32_t node) const {
    for (auto it = assignments_.rbegin(); it != assignments_.rend(); ++it)
      if (node >= it->first && node <= it->last) return it->group;
    return 0;
  }

  static std::array<Season, kDaysPerYear> make_table(const Ranges& ranges) {
    std::array<int, kDaysPerYear> cover{};
    std::array<Season, kDaysPerYear> table{};
    for (std::size_t s = 0; s < 4; ++s) {
      for (auto [lo, hi] : ranges[s]) {
        if (lo < 0 || lo >= kDaysPerYear || hi < 0 || hi >= kDaysPerYear)
          throw ConfigError("season day range outside [0,364]");
        // hi < lo wraps over new year.
        for (int d = lo; ; d = (d + 1) % kDaysPerYear) {
          ++cover[static_cast<std::size_t>(d)];
          table[static_cast<std::size_t>(d)] = static_cast<Season>(s);
          if (d == hi) break;
        }
      }
    }
    for (int d = 0; d < kDaysPerYear; ++d)
      if (cover[static_cast<std::size_t>(d)] != 1)
        throw ConfigError("calendar must assign every day of year to exactly one season (day " +
                          std::to_string(d) + " covered " +
                          std::to_string(cover[static_cast<std::size_t>(d)]) + " times)");
    return table;
  }

  struct Assignment {
    std::int32_t first;
    std::int32_t last;
    std::size_t group;
  };

  std::vector<std::array<Season, kDaysPerYear>> tables_;
  std::vector<Assignment> assignments_;
};

/// Loads a calendar from JSON: {"groups":[{"nodes":[first,last] (optional),
/// "spring":[[lo,hi],...] or [lo,hi], ...}]}. The first group without a
/// "nodes" entry becomes the default table.
inline SeasonCalendar load_calendar(const nlohmann::json& j) {
  if (!j.contains("groups")) throw ConfigError("calendar config needs a 'groups' array");
  SeasonCalendar cal;
  bool have_default = false;
  std::vector<std::pair<std::array<std::int32_t, 2>, SeasonCalendar::Ranges>> groups;
  SeasonCalendar::Ranges default_ranges;
  for (const auto& g : j.at("groups")) {
    SeasonCalendar::Ranges ranges;
    for (std::size_t s = 0; s < 4; ++s) {
      if (!g.contains(kSeasonNames[s])) continue;
      const auto& spec = g.at(kSeasonNames[s]);
      if (spec.empty()) continue;
      if (spec.at(0).is_number()) {
        ranges[s].push_back({spec.at(0).get<int>(), spec.at(1).get<int>()});
      } else {
        for (const auto& r : spec) ranges[s].push_back({r.at(0).get<int>(), r.at(1).get<int>()});
      }
    }
    if (g.contains("nodes")) {
      const auto& n = g.at("nodes");
      groups.push_back({{n.at(0).get<std::int32_t>(), n.at(1).get<std::int32_t>()}, ranges});
    } else {
      if (have_default) throw ConfigError("calendar config has more than one default group");
      default_ranges = ranges;
      have_default = true;
    }
  }
  if (have_default) {
    cal = SeasonCalendar::uniform(default_ranges);
  }
  for (const auto& [span, ranges] : groups) {
    const std::size_t g = cal.add_table(ranges);
    cal.assign_group(span[0], span[1], g);
  }
  return cal;
}

inline SeasonCalendar load_calendar_file(const std::string& path) {
  return load_calendar(nlohmann::json::parse(read_file(path)));
}

// ---------------------------------------------------------------------------
// Local model dynamics
// ---------------------------------------------------------------------------

struct RatePair {
  double infection = 0.0;  // S -> I, upsilon * phi * S
  double recovery = 0.0;   // I -> S, gamma * I
  double total() const { return infection + recovery; }
};

inline RatePair transition_rates(const NodeState& state, const Parameters& params, Season) {
  if (!std::isfinite(state.phi)) throw ModelError("non-finite environmental pressure");
  return {params.upsilon * state.phi * static_cast<double>(state.S),
          params.gamma * static_cast<double>(state.I)};
}

// Shedding term I/(S+I); an empty node sheds nothing.
inline double shedding_fraction(const NodeState& state) {
  const std::int64_t n = state.population();
  return n > 0 ? static_cast<double>(state.I) / static_cast<double>(n) : 0.0;
}

inline double phi_derivative(const NodeState& state, const Parameters& params, Season season) {
  return shedding_fraction(state) - params.beta_for(season) * state.phi;
}

/// Draws the initial node state for a proposed prevalence p0: I0 is a
/// binomial(total, p0) draw, and phi0 the equilibrium value beta^-1 I0/total
/// for the season at simulation day 0.
inline NodeState init_state(std::int64_t total, const Parameters& params, Season season_at_start,
                            Rng& rng) {
  if (total < 0) throw ModelError("node population must be non-negative");
  if (total == 0) return {0, 0, 0.0};
  const std::int64_t infected = rng.binomial(total, params.p0);
  NodeState state;
  state.I = infected;
  state.S = total - infected;
  state.phi = infected > 0 ? shedding_fraction(state) / params.beta_for(season_at_start) : 0.0;
  return state;
}

}  // namespace sisepi

#endif
