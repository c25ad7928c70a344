#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "sisepi/rng.hpp"

using sisepi::Rng;

TEST_CASE("substreams are independent of parent consumption") {
  Rng a(42);
  Rng b(42);
  b.uniform();
  b.normal();
  Rng sub_a = a.substream(7);
  Rng sub_b = b.substream(7);
  for (int i = 0; i < 16; ++i) REQUIRE(sub_a.next_u64() == sub_b.next_u64());
}

TEST_CASE("distinct substreams and tags differ") {
  Rng a(42);
  REQUIRE(a.substream(0).next_u64() != a.substream(1).next_u64());
  REQUIRE(a.substream("x").next_u64() != a.substream("y").next_u64());
  REQUIRE(Rng(1).next_u64() != Rng(2).next_u64());
}

TEST_CASE("uniform_int covers its range uniformly") {
  Rng rng(11);
  std::vector<std::int64_t> counts(7, 0);
  const int n = 70000;
  for (int i = 0; i < n; ++i) ++counts[static_cast<std::size_t>(rng.uniform_int(7))];
  const std::vector<double> probs(7, 1.0 / 7.0);
  REQUIRE(oracles::chi_square_p_value(counts, probs) > 1e-3);
}

TEST_CASE("binomial mean and variance") {
  Rng rng(5);
  const int n = 100000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) sum += static_cast<double>(rng.binomial(100, 0.0247));
  const double mean = sum / n;
  // 3 sigma of the sample mean around 2.47
  const double sigma = std::sqrt(100 * 0.0247 * (1 - 0.0247) / n);
  REQUIRE(std::abs(mean - 2.47) < 3 * sigma);
}

TEST_CASE("hypergeometric matches the exact pmf") {
  Rng rng(123);
  const std::int64_t total = 9, marked = 4, draws = 3;
  std::vector<std::int64_t> counts(static_cast<std::size_t>(draws) + 1, 0);
  const int n = 100000;
  for (int i = 0; i < n; ++i)
    ++counts[static_cast<std::size_t>(rng.hypergeometric(total, marked, draws))];
  std::vector<double> probs;
  for (std::int64_t k = 0; k <= draws; ++k)
    probs.push_back(oracles::hypergeometric_pmf(total, marked, draws, k));
  REQUIRE(oracles::chi_square_p_value(counts, probs, 1.0) > 1e-3);
}

TEST_CASE("poisson split regime stays exact in mean") {
  Rng rng(9);
  const double lambda = 80.0;  // exercises the recursive split
  const int n = 40000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) sum += static_cast<double>(rng.poisson(lambda));
  const double sigma = std::sqrt(lambda / n);
  REQUIRE(std::abs(sum / n - lambda) < 4 * sigma);
}

TEST_CASE("exponential has the right mean") {
  Rng rng(3);
  const int n = 200000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) sum += rng.exponential(2.0);
  REQUIRE(std::abs(sum / n - 0.5) < 0.01);
}
