#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <initializer_list>

#include "doctest.h"
#include "meanfield/kernels.hpp"
#include "meanfield/liquid_drop.hpp"

using namespace meanfield;

namespace {

// 3d, lambda = 1: both thresholds are elementary because the two energy terms
// scale as m^{2/3} and m^{5/3}.
const double kMStar31 = 5.0 * (std::cbrt(2.0) - 1.0) / (1.0 - std::pow(2.0, -2.0 / 3.0));
const double kCoulombBall = 16.0 * M_PI * M_PI / 15.0;

}  // namespace

TEST_CASE("unit ball riesz constant: 1d closed form, 3d quadrature, injection") {
  CHECK(unit_ball_riesz(1, 0.5) ==
        doctest::Approx(8.0 * std::sqrt(2.0) / 3.0).epsilon(1e-13));
  CHECK(unit_ball_riesz(3, 1.0) == doctest::Approx(kCoulombBall).epsilon(1e-12));
  CHECK(unit_ball_riesz(3, 1.0, 7.25) == 7.25);
  CHECK_THROWS_AS(unit_ball_riesz(3, 3.0), std::invalid_argument);
  CHECK_THROWS_AS(unit_ball_riesz(3, 1.0, -2.0), std::invalid_argument);
}

TEST_CASE("ball energy breakdown follows the two scaling laws") {
  GldParams p;
  p.dim = 3;
  p.lambda = 1.0;
  p.mass = 2.0;
  auto e = ball_energy(p, kCoulombBall);
  const double radius = std::cbrt(3.0 * p.mass / (4.0 * M_PI));
  CHECK(e.perimeter == doctest::Approx(4.0 * M_PI * radius * radius).epsilon(1e-12));
  CHECK(e.repulsive == doctest::Approx(kCoulombBall * std::pow(radius, 5)).epsilon(1e-12));
  CHECK(e.total == doctest::Approx(e.perimeter + e.repulsive).epsilon(1e-14));
}

TEST_CASE("fission and stability thresholds at dim 3, lambda 1") {
  auto t = gld_thresholds(3, 1.0, kCoulombBall);
  CHECK(t.m_star == doctest::Approx(kMStar31).epsilon(1e-12));
  CHECK(t.m_c_stab == doctest::Approx(10.0).epsilon(1e-12));
  // default quadrature constant is itself accurate to ~1e-13
  auto tq = gld_thresholds(3, 1.0);
  CHECK(tq.m_star == doctest::Approx(kMStar31).epsilon(1e-9));
  CHECK(tq.m_c_stab == doctest::Approx(10.0).epsilon(1e-9));
  CHECK(t.m_star < t.m_c_stab);
}

TEST_CASE("thresholds stay ordered across dimensions and exponents") {
  // quadrature constant for the disk hits the closed form 8 pi / 3
  CHECK(unit_ball_riesz(2, 1.0) == doctest::Approx(8.0 * M_PI / 3.0).epsilon(2e-8));
  auto t2 = gld_thresholds(2, 1.0);
  CHECK(t2.m_star > 0.0);
  CHECK(t2.m_star < t2.m_c_stab);
  auto t4 = gld_thresholds(4, 1.5);
  CHECK(t4.m_star > 0.0);
  CHECK(t4.m_star < t4.m_c_stab);
  for (double lambda : {0.3, 0.8}) {
    auto t1 = gld_thresholds(1, lambda);
    CHECK(t1.m_star < t1.m_c_stab);
  }
}

TEST_CASE("binary split sign flips exactly at the fission threshold") {
  for (double mass : {0.5 * kMStar31, 0.99 * kMStar31}) {
    CHECK(charmstar_sign(3, 1.0, mass, kCoulombBall) == SplitSign::Negative);
  }
  for (double mass : {1.01 * kMStar31, 3.0 * kMStar31}) {
    CHECK(charmstar_sign(3, 1.0, mass, kCoulombBall) == SplitSign::Positive);
  }
  CHECK(charmstar_sign(3, 1.0, kMStar31, kCoulombBall) == SplitSign::Zero);
}

TEST_CASE("splitting beats the ball only above the threshold") {
  GldParams p;
  p.dim = 3;
  p.lambda = 1.0;
  p.mass = 0.9 * kMStar31;
  BallSplit halves{{p.mass / 2.0, p.mass / 2.0}};
  CHECK(ball_energy(p, kCoulombBall).total < split_energy(p, halves, kCoulombBall));
  p.mass = 1.2 * kMStar31;
  halves.masses = {p.mass / 2.0, p.mass / 2.0};
  CHECK(ball_energy(p, kCoulombBall).total > split_energy(p, halves, kCoulombBall));
  // unequal halves cost more than equal ones
  BallSplit skew{{0.7 * p.mass, 0.3 * p.mass}};
  CHECK(split_energy(p, halves, kCoulombBall) < split_energy(p, skew, kCoulombBall));
}

TEST_CASE("one-dimensional thresholds agree with the interval solver") {
  const double m_star_1d = m_star(1, 0.5);
  CHECK(m_star_1d == doctest::Approx(2.9711275392247596).epsilon(1e-12));
  CHECK(m_c_stab(1, 0.5) == doctest::Approx(5.2414827884177919).epsilon(1e-12));
  CHECK(solve_1d(0.5, m_star_1d * 0.999).k_opt == 1);
  CHECK(solve_1d(0.5, m_star_1d * 1.001).k_opt == 2);
}

TEST_CASE("interval solver: closed-form energies and the optimal split count") {
  auto one = solve_1d(0.5, 1.0);
  CHECK(one.k_opt == 1);
  CHECK(one.energy == doctest::Approx(10.0 / 3.0).epsilon(1e-13));
  auto four = solve_1d(0.5, 4.0);
  CHECK(four.k_opt == 2);
  CHECK(four.piece_mass == doctest::Approx(2.0).epsilon(1e-13));
  CHECK(four.energy == doctest::Approx(11.542472332656507).epsilon(1e-12));
  // K pieces of mass m/K at lambda: K * (2 + I_1(lambda) (m/K)^{2-lambda})
  const double i1 = unit_ball_riesz(1, 0.5);
  const double direct = 2.0 * (2.0 + i1 * std::pow(2.0 / 2.0, 1.5));
  CHECK(four.energy == doctest::Approx(direct).epsilon(1e-12));
  CHECK(solve_1d(0.5, 12.0).k_opt > 2);
}

TEST_CASE("solver and threshold formulas stay concordant across lambda") {
  for (double lambda : {0.05, 0.25, 0.45, 0.65, 0.85, 0.95}) {
    const double m = m_star(1, lambda);
    CHECK(solve_1d(lambda, m * (1.0 - 1e-6)).k_opt == 1);
    CHECK(solve_1d(lambda, m * (1.0 + 1e-6)).k_opt == 2);
  }
}

TEST_CASE("domain violations are rejected") {
  CHECK_THROWS_AS(gld_thresholds(3, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(solve_1d(1.5, 1.0), std::invalid_argument);
  GldParams p;
  p.mass = -1.0;
  CHECK_THROWS_AS(ball_energy(p), std::invalid_argument);
}
