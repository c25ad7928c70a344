#ifndef SISEPI_OBSERVATION_HPP
#define SISEPI_OBSERVATION_HPP

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sisepi/io.hpp"
#include "sisepi/model.hpp"
#include "sisepi/rng.hpp"
#include "sisepi/simulator.hpp"
#include "sisepi/summaries.hpp"

namespace sisepi {

/// Swab protocol settings: individuals are pooled into testing units of
/// `unit_size`; a unit containing j infected fires positive with probability
/// sensitivity[j]. sensitivity[0] must be 0 and the table must be monotone.
struct SwabConfig {
  int unit_size = 3;
  std::vector<double> sensitivity = {0.0, 0.5, 0.75, 0.9};
  std::vector<std::int32_t> tested_nodes;
  std::vector<int> test_days;
  int start_quarter = 0;  // quarter-of-year containing simulation day 0

  void validate() const {
    if (unit_size < 1) throw ConfigError("unit size must be >= 1");
    if (sensitivity.size() != static_cast<std::size_t>(unit_size) + 1)
      throw ConfigError("sensitivity table must have unit_size + 1 entries");
    if (sensitivity[0] != 0.0) throw ConfigError("sensitivity for 0 infected must be 0");
    for (std::size_t j = 0; j < sensitivity.size(); ++j) {
      if (sensitivity[j] < 0.0 || sensitivity[j] > 1.0)
        throw ConfigError("sensitivities must lie in [0,1]");
      if (j > 0 && sensitivity[j] < sensitivity[j - 1])
        throw ConfigError("sensitivity table must be nondecreasing");
    }
    if (start_quarter < 0 || start_quarter > 3) throw ConfigError("start quarter must be 0..3");
  }

  static SwabConfig from_json(const nlohmann::json& j) {
    SwabConfig c;
    if (j.contains("unit_size")) c.unit_size = j.at("unit_size");
    if (j.contains("sensitivity")) c.sensitivity = j.at("sensitivity").get<std::vector<double>>();
    if (j.contains("tested_nodes"))
      c.tested_nodes = j.at("tested_nodes").get<std::vector<std::int32_t>>();
    if (j.contains("test_days")) c.test_days = j.at("test_days").get<std::vector<int>>();
    if (j.contains("start_quarter")) c.start_quarter = j.at("start_quarter");
    c.validate();
    return c;
  }
};

// ---------------------------------------------------------------------------
// Quarter binning. Quarter lengths follow the civil calendar pattern
// (90, 91, 92, 92) for Q1..Q4 of a 365-day year, rotated so that simulation
// day 0 opens the configured start quarter.
// ---------------------------------------------------------------------------

class QuarterGrid {
 public:
  explicit QuarterGrid(int start_quarter = 0) : start_(start_quarter) {
    if (start_quarter < 0 || start_quarter > 3) throw ConfigError("start quarter must be 0..3");
  }

  static constexpr std::array<int, 4> kQuarterDays = {90, 91, 92, 92};

  int bin_of(int day) const {
    if (day < 0) throw ConfigError("negative day");
    const int year = day / kDaysPerYear;
    int rest = day % kDaysPerYear;
    for (int q = 0; q < 4; ++q) {
      const int len = kQuarterDays[static_cast<std::size_t>((start_ + q) % 4)];
      if (rest < len) return 4 * year + q;
      rest -= len;
    }
    return 4 * year + 3;  // unreachable: quarter lengths sum to 365
  }

  int qoy_of(int bin) const { return (start_ + bin) % 4; }

  int start_day_of(int bin) const {
    int day = (bin / 4) * kDaysPerYear;
    for (int q = 0; q < bin % 4; ++q)
      day += kQuarterDays[static_cast<std::size_t>((start_ + q) % 4)];
    return day;
  }

 private:
  int start_;
};

/// Quarterly aggregated binary detections: positives out of tests per bin.
struct ObservationBin {
  std::string label;  // quarter start: ISO date for real data, day for simulated
  int qoy = 0;
  std::int64_t positives = 0;
  std::int64_t tests = 0;
};

struct ObservationSeries {
  std::vector<ObservationBin> bins;

  void validate() const {
    for (const auto& b : bins)
      if (b.positives < 0 || b.positives > b.tests)
        throw ConfigError("bin positives must lie in [0, tests]");
  }

  // Series of raw positive counts; bins without tests are missing.
  BinnedSeries to_series() const {
    BinnedSeries s;
    for (const auto& b : bins) {
      s.values.push_back(b.tests > 0 ? static_cast<double>(b.positives) : kMissing);
      s.counts.push_back(static_cast<double>(b.tests));
      s.qoy.push_back(b.qoy);
    }
    return s;
  }
};

// ---------------------------------------------------------------------------
// Measurement filters
// ---------------------------------------------------------------------------

/// Exact prevalence over a node subset at each recorded day; one bin per day,
/// count 1, missing when the subset holds no individuals.
inline BinnedSeries prevalence(const Trajectory& traj, const std::vector<std::int32_t>& subset,
                               int start_quarter = 0) {
  if (subset.empty()) throw ConfigError("prevalence needs a nonempty node subset");
  std::vector<std::size_t> idx;
  idx.reserve(subset.size());
  for (auto n : subset) idx.push_back(traj.node_index(n));
  const QuarterGrid grid(start_quarter);
  BinnedSeries series;
  for (std::size_t d = 0; d < traj.days.size(); ++d) {
    std::int64_t infected = 0;
    std::int64_t total = 0;
    for (auto j : idx) {
      infected += traj.snapshots[d][j].I;
      total += traj.snapshots[d][j].population();
    }
    const bool missing = total == 0;
    series.values.push_back(missing ? kMissing
                                    : static_cast<double>(infected) / static_cast<double>(total));
    series.counts.push_back(missing ? 0.0 : 1.0);
    series.qoy.push_back(grid.qoy_of(grid.bin_of(traj.days[d])));
  }
  return series;
}

/// One swab measurement: the node population is split uniformly at random
/// into testing units (remainder forms a smaller final unit); the node reads
/// positive if any unit does. Empty node: no measurement.
inline std::optional<bool> swab_node(const NodeState& node, const SwabConfig& config, Rng& rng) {
  std::int64_t remaining = node.population();
  if (remaining == 0) return std::nullopt;
  std::int64_t remaining_infected = node.I;
  while (remaining > 0) {
    const std::int64_t unit = std::min<std::int64_t>(config.unit_size, remaining);
    const std::int64_t infected_in_unit = rng.hypergeometric(remaining, remaining_infected, unit);
    if (rng.uniform() < config.sensitivity[static_cast<std::size_t>(infected_in_unit)])
      return true;
    remaining -= unit;
    remaining_infected -= infected_in_unit;
  }
  return false;
}

/// Applies the swab protocol at every (test day, tested node) and sums the
/// binary outcomes into quarter bins (single cluster). Missing measurements
/// are excluded from the test counts.
inline ObservationSeries binary_filter(const Trajectory& traj, const SwabConfig& config, Rng& rng) {
  config.validate();
  if (config.tested_nodes.empty() || config.test_days.empty())
    throw ConfigError("binary filter needs tested nodes and test days");
  const QuarterGrid grid(config.start_quarter);
  const int last_day = config.test_days.back();
  const int n_bins = grid.bin_of(last_day) + 1;
  ObservationSeries out;
  out.bins.resize(static_cast<std::size_t>(n_bins));
  for (int b = 0; b < n_bins; ++b) {
    out.bins[static_cast<std::size_t>(b)].label = std::to_string(grid.start_day_of(b));
    out.bins[static_cast<std::size_t>(b)].qoy = grid.qoy_of(b);
  }
  for (int day : config.test_days) {
    const std::size_t d = traj.day_index(day);
    auto& bin = out.bins[static_cast<std::size_t>(grid.bin_of(day))];
    for (auto node : config.tested_nodes) {
      const auto result = swab_node(traj.snapshots[d][traj.node_index(node)], config, rng);
      if (!result.has_value()) continue;
      ++bin.tests;
      if (*result) ++bin.positives;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Observation file formats
// ---------------------------------------------------------------------------

namespace detail {

struct QuarterKey {
  int year;
  int quarter;
  auto operator<=>(const QuarterKey&) const = default;
};

inline bool parse_iso_quarter(const std::string& date, QuarterKey& key) {
  if (date.size() < 7 || date[4] != '-') return false;
  for (std::size_t i = 0; i < date.size(); ++i)
    if (i != 4 && i != 7 && !std::isdigit(static_cast<unsigned char>(date[i]))) return false;
  const int year = std::stoi(date.substr(0, 4));
  const int month = std::stoi(date.substr(5, 2));
  if (month < 1 || month > 12) return false;
  key = {year, (month - 1) / 3};
  return true;
}

}  // namespace detail

/// Per-node binary observation rows `node,date,result` with result in
/// {0,1,-}; dates are ISO (YYYY-MM-DD) or integer simulation days. Rows are
/// aggregated into consecutive calendar quarters.
inline ObservationSeries parse_observations(const std::string& path) {
  CsvReader reader(path);
  std::vector<std::string> fields;
  bool saw_header = false;
  std::map<detail::QuarterKey, std::pair<std::int64_t, std::int64_t>> acc;  // positives, tests
  const QuarterGrid grid(0);
  bool any_iso = false;
  while (reader.next(fields)) {
    if (!saw_header) {
      saw_header = true;
      if (fields.size() != 3 || fields[0] != "node")
        reader.fail("expected header 'node,date,result'");
      continue;
    }
    if (fields.size() != 3) reader.fail("expected 3 fields");
    detail::QuarterKey key{};
    if (detail::parse_iso_quarter(fields[1], key)) {
      any_iso = true;
    } else {
      const int day = static_cast<int>(reader.to_int(fields[1]));
      if (day < 0) reader.fail("negative day");
      const int bin = grid.bin_of(day);
      key = {bin / 4, bin % 4};
    }
    auto& [positives, tests] = acc[key];
    if (fields[2] == "-") {
      // missing measurement; contributes nothing
    } else if (fields[2] == "0") {
      ++tests;
    } else if (fields[2] == "1") {
      ++tests;
      ++positives;
    } else {
      reader.fail("result must be 0, 1 or -");
    }
  }
  ObservationSeries out;
  if (acc.empty()) return out;
  const auto first = acc.begin()->first;
  const auto last = acc.rbegin()->first;
  for (detail::QuarterKey k = first; k <= last;) {
    ObservationBin bin;
    bin.qoy = k.quarter;
    if (any_iso) {
      char label[16];
      std::snprintf(label, sizeof(label), "%04d-%02d-01", k.year, k.quarter * 3 + 1);
      bin.label = label;
    } else {
      bin.label = std::to_string(grid.start_day_of(k.year * 4 + k.quarter));
    }
    if (auto it = acc.find(k); it != acc.end()) {
      bin.positives = it->second.first;
      bin.tests = it->second.second;
    }
    out.bins.push_back(std::move(bin));
    if (k.quarter == 3) {
      k = {k.year + 1, 0};
    } else {
      k = {k.year, k.quarter + 1};
    }
  }
  out.validate();
  return out;
}

// Aggregated series CSV: `quarter_start,positives,tests`.
inline void write_observation_series(const ObservationSeries& series, const std::string& path) {
  CsvWriter w(path);
  w.raw("quarter_start,positives,tests");
  for (const auto& b : series.bins)
    w.row({b.label, std::to_string(b.positives), std::to_string(b.tests)});
}

inline ObservationSeries parse_observation_series(const std::string& path, int start_quarter = 0) {
  CsvReader reader(path);
  std::vector<std::string> fields;
  bool saw_header = false;
  ObservationSeries out;
  const QuarterGrid grid(start_quarter);
  while (reader.next(fields)) {
    if (!saw_header) {
      saw_header = true;
      if (fields.size() != 3 || fields[0] != "quarter_start")
        reader.fail("expected header 'quarter_start,positives,tests'");
      continue;
    }
    if (fields.size() != 3) reader.fail("expected 3 fields");
    ObservationBin bin;
    bin.label = fields[0];
    detail::QuarterKey key{};
    if (detail::parse_iso_quarter(fields[0], key)) {
      bin.qoy = key.quarter;
    } else {
      bin.qoy = grid.qoy_of(grid.bin_of(static_cast<int>(reader.to_int(fields[0]))));
    }
    bin.positives = reader.to_int(fields[1]);
    bin.tests = reader.to_int(fields[2]);
    out.bins.push_back(std::move(bin));
  }
  out.validate();
  return out;
}

}  // namespace sisepi

#endif
