#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "sisepi/model.hpp"

using namespace sisepi;

namespace {

Parameters params_with(double upsilon, double beta, double gamma, double p0) {
  return {upsilon, {beta, beta, beta, beta}, gamma, p0};
}

}  // namespace

TEST_CASE("transition rates") {
  const Season s = Season::spring;
  SECTION("no pressure and no infected gives zero rates") {
    const auto r = transition_rates({10, 0, 0.0}, params_with(0.1, 0.1, 0.1, 0.0), s);
    REQUIRE(r.infection == 0.0);
    REQUIRE(r.recovery == 0.0);
  }
  SECTION("values from the fitted national model") {
    const auto r = transition_rates({100, 2, 0.5}, params_with(0.0151, 0.141, 0.0965, 0.0), s);
    REQUIRE_THAT(r.infection, Catch::Matchers::WithinRel(0.755, 1e-12));
    REQUIRE_THAT(r.recovery, Catch::Matchers::WithinRel(0.193, 1e-12));
  }
  SECTION("no susceptibles means no infection") {
    const auto r = transition_rates({0, 5, 1.0}, params_with(0.7, 0.1, 0.1, 0.0), s);
    REQUIRE(r.infection == 0.0);
    REQUIRE(r.recovery == 0.5);
  }
  SECTION("non-finite pressure is a model-state error") {
    NodeState bad{1, 1, std::numeric_limits<double>::infinity()};
    REQUIRE_THROWS_AS(transition_rates(bad, params_with(0.1, 0.1, 0.1, 0.0), s), ModelError);
  }
  SECTION("homogeneous of degree 1 in S at fixed phi") {
    const auto p = params_with(0.3, 0.1, 0.2, 0.0);
    const auto r1 = transition_rates({25, 3, 0.7}, p, s);
    const auto r2 = transition_rates({50, 3, 0.7}, p, s);
    REQUIRE(r2.infection == 2.0 * r1.infection);
  }
}

TEST_CASE("phi derivative") {
  const auto p = params_with(0.1, 0.141, 0.1, 0.0);
  SECTION("empty node sheds nothing, pure decay") {
    REQUIRE_THAT(phi_derivative({0, 0, 0.3}, p, Season::spring),
                 Catch::Matchers::WithinAbs(-0.0423, 1e-12));
  }
  SECTION("half infected, no decay at phi = 0") {
    REQUIRE(phi_derivative({50, 50, 0.0}, p, Season::spring) == 0.5);
  }
  SECTION("exactly zero at the equilibrium point") {
    for (auto [S, I] : {std::pair<int, int>{3, 1}, {10, 90}, {0, 7}}) {
      NodeState st{S, I, 0.0};
      st.phi = shedding_fraction(st) / p.beta[0];
      REQUIRE_THAT(phi_derivative(st, p, Season::spring), Catch::Matchers::WithinAbs(0.0, 1e-15));
    }
  }
  SECTION("shedding term bounded in [0,1]") {
    for (auto [S, I] : {std::pair<int, int>{0, 0}, {1, 0}, {0, 1}, {123, 456}}) {
      const double f = shedding_fraction({S, I, 0.0});
      REQUIRE(f >= 0.0);
      REQUIRE(f <= 1.0);
    }
  }
}

TEST_CASE("initial state") {
  Rng rng(77);
  SECTION("zero prevalence") {
    const auto s = init_state(100, params_with(0.1, 0.141, 0.1, 0.0), Season::spring, rng);
    REQUIRE(s.S == 100);
    REQUIRE(s.I == 0);
    REQUIRE(s.phi == 0.0);
  }
  SECTION("full prevalence hits the equilibrium formula") {
    const auto s = init_state(100, params_with(0.1, 0.141, 0.1, 1.0), Season::spring, rng);
    REQUIRE(s.S == 0);
    REQUIRE(s.I == 100);
    REQUIRE_THAT(s.phi, Catch::Matchers::WithinRel(1.0 / 0.141, 1e-12));
  }
  SECTION("empty node") {
    const auto s = init_state(0, params_with(0.1, 0.141, 0.1, 0.5), Season::spring, rng);
    REQUIRE(s.S == 0);
    REQUIRE(s.I == 0);
    REQUIRE(s.phi == 0.0);
  }
  SECTION("binomial sampling reproduces the prevalence in expectation") {
    const auto p = params_with(0.1, 0.141, 0.1, 0.0247);
    const int n = 100000;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) sum += static_cast<double>(init_state(100, p, Season::spring, rng).I);
    const double sigma = std::sqrt(100 * 0.0247 * (1 - 0.0247) / n);
    REQUIRE(std::abs(sum / n - 2.47) < 3 * sigma);
  }
  SECTION("total is always conserved") {
    Rng r2(5);
    const auto p = params_with(0.1, 0.141, 0.1, 0.3);
    for (int total = 0; total < 50; ++total) {
      const auto s = init_state(total, p, Season::winter, r2);
      REQUIRE(s.S + s.I == total);
    }
  }
}

TEST_CASE("parameter validation") {
  REQUIRE_NOTHROW(params_with(0.1, 0.1, 0.1, 0.5).validate());
  REQUIRE_THROWS_AS(params_with(0.0, 0.1, 0.1, 0.5).validate(), ModelError);
  REQUIRE_THROWS_AS(params_with(0.1, -0.1, 0.1, 0.5).validate(), ModelError);
  REQUIRE_THROWS_AS(params_with(0.1, 0.1, 0.1, 1.5).validate(), ModelError);
  Parameters tied{0.1, {0.1, 0.2, 0.3, 0.4}, 0.1, 0.5};
  REQUIRE_THROWS_AS(tied.validate(true), ModelError);
  tied.beta[2] = tied.beta[0];
  REQUIRE_NOTHROW(tied.validate(true));
}

TEST_CASE("season calendar") {
  SECTION("default calendar boundaries") {
    const SeasonCalendar cal;
    REQUIRE(cal.season_of(0, 60) == Season::spring);
    REQUIRE(cal.season_of(0, 151) == Season::spring);
    REQUIRE(cal.season_of(0, 152) == Season::summer);
    REQUIRE(cal.season_of(0, 334) == Season::fall);
    REQUIRE(cal.season_of(0, 335) == Season::winter);
    REQUIRE(cal.season_of(0, 0) == Season::winter);   // wraps over new year
    REQUIRE(cal.season_of(0, 59) == Season::winter);
    REQUIRE(cal.season_of(0, 365 + 60) == Season::spring);  // day of year repeats
  }
  SECTION("half-year split") {
    const auto cal = SeasonCalendar::half_year();
    REQUIRE(cal.season_of(0, 0) == Season::spring);
    REQUIRE(cal.season_of(0, 181) == Season::spring);
    REQUIRE(cal.season_of(0, 182) == Season::summer);
    REQUIRE(cal.season_of(0, 364) == Season::summer);
  }
  SECTION("incomplete cover is rejected") {
    REQUIRE_THROWS_AS(
        SeasonCalendar::uniform({{{{0, 100}}, {{102, 364}}, {}, {}}}),  // day 101 uncovered
        ConfigError);
    REQUIRE_THROWS_AS(
        SeasonCalendar::uniform({{{{0, 100}}, {{100, 364}}, {}, {}}}),  // day 100 double
        ConfigError);
  }
  SECTION("json config with per-group ranges") {
    const auto j = nlohmann::json::parse(R"({
      "groups": [
        {"spring": [60,151], "summer": [152,243], "fall": [244,334], "winter": [335,59]},
        {"nodes": [10, 19], "spring": [0,181], "summer": [182,364]}
      ]})");
    const auto cal = load_calendar(j);
    REQUIRE(cal.season_of(0, 0) == Season::winter);
    REQUIRE(cal.season_of(10, 0) == Season::spring);
    REQUIRE(cal.season_of(19, 200) == Season::summer);
    REQUIRE(cal.season_of(20, 0) == Season::winter);
  }
}
