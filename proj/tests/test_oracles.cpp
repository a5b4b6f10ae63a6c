#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <vector>

#include "doctest.h"
#include "meanfield/kernels.hpp"
#include "meanfield/oracles.hpp"

using namespace meanfield;

namespace {

bool within_sigmas(const McEstimate& e, double exact, double k) {
  return std::fabs(e.value - exact) <= k * e.std_error;
}

}  // namespace

TEST_CASE("fixed seed gives bitwise identical estimates") {
  McConfig cfg;
  cfg.samples = 50000;
  cfg.seed = 42;
  auto a = mc_double_integral_ball(3, 1.0, 1.0, PowerKernel{-1.0}, cfg);
  auto b = mc_double_integral_ball(3, 1.0, 1.0, PowerKernel{-1.0}, cfg);
  CHECK(a.value == b.value);
  CHECK(a.std_error == b.std_error);
  CHECK(a.seed == 42);
  CHECK(a.samples == 50000);
}

TEST_CASE("ball estimates agree with the closed forms within three sigma") {
  McConfig cfg;
  cfg.samples = 200000;
  const double c15 = 16.0 * M_PI * M_PI / 15.0;
  auto riesz = mc_double_integral_ball(3, 1.0, 1.0, PowerKernel{-1.0}, cfg);
  CHECK(riesz.std_error > 0.0);
  CHECK(riesz.std_error < 0.1);
  CHECK(within_sigmas(riesz, c15, 3.0));

  auto quad = mc_double_integral_ball(3, 1.0, 1.0, PowerKernel{2.0}, cfg);
  CHECK(within_sigmas(quad, c15, 3.0));

  auto quart = mc_double_integral_ball(3, 1.0, 1.0, PowerKernel{4.0}, cfg);
  CHECK(within_sigmas(quart, 64.0 * M_PI * M_PI / 35.0, 3.0));

  // interval [-1, 1] at unit height, kernel |x-y|^{-1/4}
  auto interval = mc_double_integral_ball(1, 1.0, 1.0, PowerKernel{-0.25}, cfg);
  CHECK(within_sigmas(interval, std::pow(2.0, 0.75) * 32.0 / 21.0, 3.0));
}

TEST_CASE("two sigma coverage across seeds is near the nominal rate") {
  McConfig cfg;
  cfg.samples = 20000;
  const double exact = 16.0 * M_PI * M_PI / 15.0;
  int covered = 0;
  for (std::uint64_t s = 1; s <= 50; ++s) {
    cfg.seed = s;
    if (within_sigmas(mc_double_integral_ball(3, 1.0, 1.0, PowerKernel{-1.0}, cfg),
                      exact, 2.0))
      ++covered;
  }
  CHECK(covered >= 44);
}

TEST_CASE("density sampler agrees with the quadratic moment identity") {
  auto g = make_radial_grid(3, 2.0, 128);
  std::vector<double> v(g->size());
  for (int i = 0; i < g->size(); ++i) v[i] = std::exp(-g->r[i] * g->r[i]);
  RadialDensity rho(g, std::move(v));
  const double exact = rho.mass() * radial_moment(rho, 2.0);
  McConfig cfg;
  cfg.samples = 200000;
  auto est = mc_double_integral(rho, PowerKernel{2.0}, cfg);
  CHECK(within_sigmas(est, exact, 3.0));
}

TEST_CASE("variance and sample-count validation") {
  McConfig cfg;
  cfg.samples = 5000;
  CHECK_THROWS_AS(mc_double_integral_ball(3, 1.0, 1.0, PowerKernel{-1.0}, cfg),
                  std::invalid_argument);
  cfg.samples = 20000;
  // 2p <= -dim: the pair estimator has infinite variance
  CHECK_THROWS_AS(mc_double_integral_ball(1, 1.0, 1.0, PowerKernel{-0.5}, cfg),
                  std::invalid_argument);
  CHECK_THROWS_AS(mc_double_integral_ball(3, -1.0, 1.0, PowerKernel{-1.0}, cfg),
                  std::invalid_argument);
}

TEST_CASE("constant-ball scan finds the droplet for small flocking mass") {
  ScanSpec spec;  // flocking, dim 3, lambda 1, alpha 2, mass 1
  auto r = constant_on_ball_scan(spec);
  CHECK(r.radius == doctest::Approx(std::pow(2.0, -1.0 / 3.0)).epsilon(1e-2));
  CHECK(r.height == doctest::Approx(3.0 / (2.0 * M_PI)).epsilon(1e-2));
  CHECK(r.energy == doctest::Approx(1.8 * std::pow(2.0, -2.0 / 3.0)).epsilon(1e-3));
}

TEST_CASE("constant-ball scan saturates at large flocking mass") {
  ScanSpec spec;
  spec.mass = 100.0;
  auto r = constant_on_ball_scan(spec);
  CHECK(r.height == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(r.radius ==
        doctest::Approx(std::cbrt(300.0 / (4.0 * M_PI))).epsilon(1e-3));
}

TEST_CASE("constant-ball scan respects the unit mass in the aggregation model") {
  ScanSpec spec;
  spec.model = ScanModel::Gks;
  spec.dim = 3;
  spec.q = 0.8;
  spec.alpha = 2.0;
  auto r = constant_on_ball_scan(spec);
  CHECK(r.radius > 0.0);
  const double vol = 4.0 * M_PI / 3.0 * std::pow(r.radius, 3);
  CHECK(r.height * vol == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(r.energy < 0.0);
}
