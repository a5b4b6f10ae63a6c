#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <initializer_list>
#include <limits>
#include <random>
#include <vector>

#include "doctest.h"
#include "meanfield/oracles.hpp"
#include "meanfield/projection.hpp"

using namespace meanfield;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double weighted_dist2(const std::vector<double>& a, const std::vector<double>& b,
                      const std::vector<double>& w) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += w[i] * (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

}  // namespace

TEST_CASE("projection conserves mass and respects the box") {
  std::vector<double> w{0.3, 1.1, 0.7, 2.0, 0.9};
  std::vector<double> target{-0.4, 0.2, 1.9, 0.5, 0.05};
  for (double ub : {1.0, kInf}) {
    auto r = bathtub_project(target, w, 1.7, ub);
    double mass = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      CHECK(r.values[i] >= 0.0);
      CHECK(r.values[i] <= ub);
      mass += w[i] * r.values[i];
    }
    CHECK(mass == doctest::Approx(1.7).epsilon(1e-10));
  }
}

TEST_CASE("projection is idempotent") {
  std::vector<double> w{0.5, 0.5, 1.5, 1.0};
  std::vector<double> target{3.0, -1.0, 0.4, 0.6};
  auto once = bathtub_project(target, w, 1.2, 1.0);
  auto twice = bathtub_project(once.values, w, 1.2, 1.0);
  for (std::size_t i = 0; i < w.size(); ++i)
    CHECK(twice.values[i] == doctest::Approx(once.values[i]).epsilon(1e-12));
}

TEST_CASE("saturated and empty cells satisfy complementarity with the shift") {
  std::vector<double> w{1.0, 1.0, 1.0, 1.0, 1.0, 1.0};
  std::vector<double> target{2.5, -3.0, 0.1, 0.9, 1.4, -0.2};
  auto r = bathtub_project(target, w, 2.0, 1.0);
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double free_value = target[i] - r.shift;
    if (r.values[i] > 1e-12 && r.values[i] < 1.0 - 1e-12)
      CHECK(r.values[i] == doctest::Approx(free_value).epsilon(1e-10));
    if (r.values[i] <= 1e-12) CHECK(free_value <= 1e-10);
    if (r.values[i] >= 1.0 - 1e-12) CHECK(free_value >= 1.0 - 1e-10);
  }
}

TEST_CASE("projection matches the exhaustive active-set oracle") {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> u(-1.5, 2.5);
  std::uniform_real_distribution<double> uw(0.2, 2.0);
  std::uniform_int_distribution<int> un(3, 10);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = un(rng);
    std::vector<double> w(n), target(n);
    for (auto& x : w) x = uw(rng);
    for (auto& x : target) x = u(rng);
    const double ub = (trial % 2 == 0) ? 1.0 : kInf;
    double cap = 0.0;
    for (auto x : w) cap += x;
    if (ub == 1.0) cap *= 0.8;
    const double mass = cap * (0.1 + 0.8 * (trial % 7) / 7.0);

    auto fast = bathtub_project(target, w, mass, ub);
    auto brute = brute_force_bathtub(target, w, mass, ub);
    for (int i = 0; i < n; ++i)
      CHECK(fast.values[i] == doctest::Approx(brute[i]).epsilon(1e-9).scale(1.0));
    CHECK(weighted_dist2(fast.values, target, w) <=
          weighted_dist2(brute, target, w) + 1e-10);
  }
}

TEST_CASE("infeasible requests are rejected") {
  std::vector<double> w{1.0, 1.0};
  std::vector<double> t{0.5, 0.5};
  CHECK_THROWS_AS(bathtub_project(t, w, 3.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(bathtub_project(t, w, -0.1, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(brute_force_bathtub(std::vector<double>(13, 0.0),
                                      std::vector<double>(13, 1.0), 1.0, 1.0),
                  std::invalid_argument);
}
