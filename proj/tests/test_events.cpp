#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <fstream>

#include "oracles.hpp"
#include "sisepi/events.hpp"

using namespace sisepi;

namespace {

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& p, const std::string& contents) : path(p) {
    std::ofstream f(path);
    f << contents;
  }
  ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("apply_event basics") {
  Rng rng(1);
  SECTION("enters are susceptible") {
    std::vector<NodeState> nodes{{10, 2, 0.1}};
    apply_event(nodes, {0, EventKind::enter, kNoNode, 0, 5}, rng);
    REQUIRE(nodes[0].S == 15);
    REQUIRE(nodes[0].I == 2);
    REQUIRE(nodes[0].phi == 0.1);
  }
  SECTION("all-susceptible source forces the transfer split") {
    std::vector<NodeState> nodes{{12, 0, 0.4}, {0, 0, 0.0}};
    apply_event(nodes, {0, EventKind::transfer, 0, 1, 12}, rng);
    REQUIRE(nodes[0].S == 0);
    REQUIRE(nodes[0].I == 0);
    REQUIRE(nodes[0].phi == 0.4);  // phi untouched at both endpoints
    REQUIRE(nodes[1].S == 12);
    REQUIRE(nodes[1].I == 0);
  }
  SECTION("whole-population transfer moves the exact split") {
    Rng r2(7);
    std::vector<NodeState> nodes{{3, 4, 0.0}, {0, 0, 0.0}};
    apply_event(nodes, {0, EventKind::transfer, 0, 1, 7}, r2);
    REQUIRE(nodes[0].population() == 0);
    REQUIRE(nodes[1].S == 3);
    REQUIRE(nodes[1].I == 4);
  }
  SECTION("underflow: strict errors, clamp moves what is there") {
    std::vector<NodeState> nodes{{1, 1, 0.0}};
    EventRecord e{3, EventKind::exit, 0, kNoNode, 5};
    REQUIRE_THROWS_AS(apply_event(nodes, e, rng), EventError);
    try {
      apply_event(nodes, e, rng);
    } catch (const EventError& err) {
      REQUIRE(err.node == 0);
      REQUIRE(err.time == 3);
    }
    ApplyOptions clamp{UnderflowPolicy::clamp, false};
    apply_event(nodes, e, rng, clamp);
    REQUIRE(nodes[0].population() == 0);
  }
}

TEST_CASE("exit removal is hypergeometric") {
  // exit(2) from (S=2, I=2): removed infected ~ Hypergeometric(4,2,2),
  // P(0)=1/6, P(1)=4/6, P(2)=1/6.
  Rng rng(42);
  std::vector<std::int64_t> counts(3, 0);
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    std::vector<NodeState> nodes{{2, 2, 0.0}};
    apply_event(nodes, {0, EventKind::exit, 0, kNoNode, 2}, rng);
    ++counts[static_cast<std::size_t>(2 - nodes[0].I)];
  }
  for (int k = 0; k <= 2; ++k) {
    const double p = oracles::hypergeometric_pmf(4, 2, 2, k);
    const double sigma = std::sqrt(p * (1 - p) * n);
    REQUIRE(std::abs(static_cast<double>(counts[static_cast<std::size_t>(k)]) - p * n) <
            3 * sigma);
  }
}

TEST_CASE("population conservation over random event sequences") {
  Rng rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    Rng local = rng.substream(static_cast<std::uint64_t>(trial));
    std::vector<NodeState> nodes(4);
    for (auto& n : nodes) {
      n.S = local.uniform_int(30);
      n.I = local.uniform_int(10);
    }
    std::int64_t expected = 0;
    for (const auto& n : nodes) expected += n.population();
    for (int k = 0; k < 50; ++k) {
      const int kind = static_cast<int>(local.uniform_int(3));
      const auto a = static_cast<std::int32_t>(local.uniform_int(4));
      auto b = static_cast<std::int32_t>(local.uniform_int(3));
      if (b >= a) ++b;
      const std::int64_t count = 1 + local.uniform_int(4);
      EventRecord e;
      if (kind == 0) {
        e = {k, EventKind::enter, kNoNode, a, count};
        expected += count;
      } else if (kind == 1) {
        const auto have = nodes[static_cast<std::size_t>(a)].population();
        if (have == 0) continue;
        const auto c = std::min(count, have);
        e = {k, EventKind::exit, a, kNoNode, c};
        expected -= c;
      } else {
        const auto have = nodes[static_cast<std::size_t>(a)].population();
        if (have == 0) continue;
        e = {k, EventKind::transfer, a, b, std::min(count, have)};
      }
      apply_event(nodes, e, local);
    }
    std::int64_t total = 0;
    for (const auto& n : nodes) total += n.population();
    REQUIRE(total == expected);
  }
}

TEST_CASE("event csv parsing") {
  SECTION("empty file yields empty stream with horizon 0") {
    TempFile f("events_empty.csv", "time,kind,src,dst,count\n");
    const auto stream = parse_events(f.path);
    REQUIRE(stream.events.empty());
    REQUIRE(stream.horizon == 0);
  }
  SECTION("format definition") {
    TempFile f("events_one.csv", "time,kind,src,dst,count\n30,transfer,5,7,3\n");
    const auto stream = parse_events(f.path);
    REQUIRE(stream.events.size() == 1);
    REQUIRE(stream.events[0] == EventRecord{30, EventKind::transfer, 5, 7, 3});
    REQUIRE(stream.node_count == 8);
    REQUIRE(stream.horizon == 31);
  }
  SECTION("transfer with src == dst is rejected with a line number") {
    TempFile f("events_bad.csv", "time,kind,src,dst,count\n1,transfer,5,5,3\n");
    try {
      parse_events(f.path);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      REQUIRE(e.line_number == 2);
    }
  }
  SECTION("unsorted input is sorted stably with a warning") {
    TempFile f("events_unsorted.csv",
               "time,kind,src,dst,count\n5,enter,,0,1\n2,enter,,1,1\n5,exit,0,,1\n");
    const auto stream = parse_events(f.path);
    REQUIRE(stream.events[0].time == 2);
    REQUIRE(stream.events[1].kind == EventKind::enter);  // stable among equals
    REQUIRE(stream.events[2].kind == EventKind::exit);
  }
  SECTION("round-trip") {
    TempFile f("events_rt.csv", "");
    EventStream stream;
    stream.events = {{0, EventKind::enter, kNoNode, 1, 2},
                     {3, EventKind::transfer, 1, 0, 1},
                     {4, EventKind::exit, 0, kNoNode, 1}};
    stream.node_count = 2;
    stream.horizon = 5;
    write_events(stream, f.path);
    const auto parsed = parse_events(f.path);
    REQUIRE(parsed.events == stream.events);
    REQUIRE(parsed.node_count == 2);
    REQUIRE(parsed.horizon == 5);
  }
}

TEST_CASE("synthetic event generation") {
  DemographyConfig config;
  SECTION("pre-conditions") {
    Rng rng(1);
    REQUIRE_THROWS_AS(generate_synthetic_events(1600, 0, config, rng), ConfigError);
    REQUIRE_THROWS_AS(generate_synthetic_events(1, 1, config, rng), ConfigError);
  }
  SECTION("deterministic given the seed") {
    Rng r1(99), r2(99);
    const auto a = generate_synthetic_events(50, 1, config, r1);
    const auto b = generate_synthetic_events(50, 1, config, r2);
    REQUIRE(a.events == b.events);
  }
  SECTION("volume matches the configured intensities at the 1600-node scale") {
    // Defaults are tuned to the published synthetic dataset totals:
    // exit 182535, enter 182685, transfer 101472 over 1600 nodes x 4 years.
    Rng rng(7);
    const auto stream = generate_synthetic_events(1600, 4, config, rng);
    std::int64_t enters = 0, exits = 0, transfers = 0;
    for (const auto& e : stream.events) {
      if (e.kind == EventKind::enter) ++enters;
      else if (e.kind == EventKind::exit) ++exits;
      else ++transfers;
    }
    REQUIRE(std::abs(enters - 182685) < 0.2 * 182685);
    REQUIRE(std::abs(exits - 182535) < 0.2 * 182535);
    REQUIRE(std::abs(transfers - 101472) < 0.2 * 101472);
    const auto total = static_cast<std::int64_t>(stream.events.size());
    REQUIRE(std::abs(total - 466692) < 0.2 * 466692);
  }
  SECTION("streams never underflow the tracked populations") {
    Rng rng(31337);
    auto totals = generate_initial_populations(20, config, rng);
    const auto stream = generate_synthetic_events(20, 2, config, rng, totals);
    std::vector<std::int64_t> pop = totals;
    for (const auto& e : stream.events) {
      switch (e.kind) {
        case EventKind::enter: pop[static_cast<std::size_t>(e.dst)] += e.count; break;
        case EventKind::exit:
          pop[static_cast<std::size_t>(e.src)] -= e.count;
          REQUIRE(pop[static_cast<std::size_t>(e.src)] >= 0);
          break;
        case EventKind::transfer:
          pop[static_cast<std::size_t>(e.src)] -= e.count;
          REQUIRE(pop[static_cast<std::size_t>(e.src)] >= 0);
          pop[static_cast<std::size_t>(e.dst)] += e.count;
          break;
      }
    }
  }
}
