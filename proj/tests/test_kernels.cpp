#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <initializer_list>
#include <random>
#include <vector>

#include "doctest.h"
#include "meanfield/kernels.hpp"
#include "meanfield/radial_grid.hpp"

using namespace meanfield;

namespace {

// Reference angular average by plain Simpson on the polar angle; valid away
// from r == s where the integrand is smooth.
double angular_average_reference(int dim, double p, double r, double s) {
  const int n = 20000;
  const double h = M_PI / n;
  double num = 0.0, den = 0.0;
  for (int k = 0; k <= n; ++k) {
    const double t = k * h;
    const double w = (k == 0 || k == n) ? 1.0 : (k % 2 ? 4.0 : 2.0);
    const double sh = std::sin(0.5 * t);
    const double d2 = (r - s) * (r - s) + 4.0 * r * s * sh * sh;
    double f = std::pow(d2, 0.5 * p);
    if (dim > 2) f *= std::pow(std::sin(t), dim - 2);
    num += w * f;
    den += w * (dim > 2 ? std::pow(std::sin(t), dim - 2) : 1.0);
  }
  return num / den;
}

RadialDensity smooth_bump(int dim, double rmax, int n) {
  auto g = make_radial_grid(dim, rmax, n);
  std::vector<double> v(g->size());
  for (int i = 0; i < g->size(); ++i) {
    const double r = g->r[i];
    v[i] = r < 1.0 ? (1.0 - r * r) * (1.0 - r * r) : 0.0;
  }
  return RadialDensity(g, std::move(v));
}

}  // namespace

TEST_CASE("radial grid cells partition the domain with exact shell volumes") {
  for (int dim : {1, 2, 3, 6}) {
    auto g = make_radial_grid(dim, 2.5, 256);
    CHECK(g->size() == 256);
    CHECK(g->edges.front() == 0.0);
    CHECK(g->edges.back() == doctest::Approx(2.5).epsilon(1e-14));
    const double sigma_over_dim =
        std::pow(M_PI, dim / 2.0) / std::tgamma(dim / 2.0 + 1.0);
    for (int i = 0; i < g->size(); ++i) {
      CHECK(g->edges[i] < g->edges[i + 1]);
      const double shell = sigma_over_dim * (std::pow(g->edges[i + 1], dim) -
                                             std::pow(g->edges[i], dim));
      CHECK(g->w[i] == doctest::Approx(shell).epsilon(1e-12));
      CHECK(g->r[i] == doctest::Approx(cell_radial_moment(*g, i, 1.0)).epsilon(1e-13));
    }
    // graded inner section, then uniform: widths never shrink
    for (int i = 0; i + 1 < g->size(); ++i)
      CHECK(g->cell_width(i + 1) >= g->cell_width(i) * (1.0 - 1e-12));
  }
}

TEST_CASE("cell radial moments match quadrature, including the log case") {
  auto g = make_radial_grid(3, 2.0, 64);
  const int i = 17;
  const double a = g->edges[i], b = g->edges[i + 1];
  for (double k : {2.0, 4.0, -1.0, 0.5}) {
    double num = 0.0, den = 0.0;
    const int m = 40000;
    for (int j = 0; j < m; ++j) {
      const double r = a + (b - a) * (j + 0.5) / m;
      num += std::pow(r, k) * std::pow(r, 2) * (b - a) / m;
      den += std::pow(r, 2) * (b - a) / m;
    }
    CHECK(cell_radial_moment(*g, i, k) == doctest::Approx(num / den).epsilon(1e-8));
  }
  // k = -dim reduces to dim log(b/a) / (b^dim - a^dim)
  const double expect = 3.0 * std::log(b / a) / (std::pow(b, 3) - std::pow(a, 3));
  CHECK(cell_radial_moment(*g, i, -3.0) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("angular kernel average: 1d two-point form and 3d closed form") {
  CHECK(angular_kernel_average(1, -0.5, 0.3, 0.8) ==
        doctest::Approx(0.5 * (std::pow(0.5, -0.5) + std::pow(1.1, -0.5))).epsilon(1e-14));
  for (double p : {-1.0, -0.5, -2.5, 1.3}) {
    CHECK(angular_kernel_average(3, p, 0.7, 1.2) ==
          doctest::Approx(angular_average_reference(3, p, 0.7, 1.2)).epsilon(1e-8));
  }
  CHECK(angular_kernel_average(2, -0.5, 0.7, 1.2) ==
        doctest::Approx(angular_average_reference(2, -0.5, 0.7, 1.2)).epsilon(1e-7));
  // self-average diverges once the sphere average itself is non-integrable
  CHECK(std::isinf(angular_kernel_average(3, -2.0, 1.0, 1.0)));
  CHECK(std::isfinite(angular_kernel_average(3, -1.0, 1.0, 1.0)));
  CHECK_THROWS_AS(angular_kernel_average(3, -3.0, 0.5, 0.5), std::invalid_argument);
}

TEST_CASE("table is symmetric and every entry is finite for singular kernels") {
  for (double p : {-0.5, -1.0, -1.9, -2.5}) {
    auto g = make_radial_grid(3, 1.5, 96);
    AngularAverageTable t(g, PowerKernel{p});
    for (int i = 0; i < t.size(); ++i)
      for (int j = i; j < t.size(); ++j) {
        CHECK(std::isfinite(t.at(i, j)));
        CHECK(t.at(i, j) == t.at(j, i));
        CHECK(t.at(i, j) > 0.0);
      }
  }
}

TEST_CASE("even-power tables factor through exact cell moments") {
  auto g = make_radial_grid(3, 2.0, 128);
  AngularAverageTable t2(g, PowerKernel{2.0});
  AngularAverageTable t4(g, PowerKernel{4.0});
  for (int i : {0, 3, 40, 127})
    for (int j : {0, 7, 90, 127}) {
      const double m2i = cell_radial_moment(*g, i, 2.0);
      const double m2j = cell_radial_moment(*g, j, 2.0);
      const double m4i = cell_radial_moment(*g, i, 4.0);
      const double m4j = cell_radial_moment(*g, j, 4.0);
      CHECK(t2.at(i, j) == doctest::Approx(m2i + m2j).epsilon(1e-14));
      CHECK(t4.at(i, j) ==
            doctest::Approx(m4i + m4j + (2.0 + 4.0 / 3.0) * m2i * m2j).epsilon(1e-14));
    }
}

TEST_CASE("interaction energy of a random density matches the moment identities") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int dim : {1, 3, 6}) {
    auto g = make_radial_grid(dim, 1.7, 200);
    std::vector<double> v(g->size());
    for (auto& x : v) x = u(rng);
    RadialDensity rho(g, std::move(v));
    const double m0 = rho.mass();
    const double m2 = radial_moment(rho, 2.0);
    const double m4 = radial_moment(rho, 4.0);
    const double e2 = interaction_energy(rho, PowerKernel{2.0});
    const double e4 = interaction_energy(rho, PowerKernel{4.0});
    CHECK(e2 == doctest::Approx(m0 * m2).epsilon(1e-12));
    CHECK(e4 == doctest::Approx(m0 * m4 + (1.0 + 2.0 / dim) * m2 * m2).epsilon(1e-12));
  }
}

TEST_CASE("potential is the exact gradient pairing of the energy") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto g = make_radial_grid(3, 1.5, 160);
  std::vector<double> v(g->size());
  for (auto& x : v) x = u(rng);
  RadialDensity rho(g, std::move(v));
  for (double p : {-1.0, -0.5, 2.0}) {
    AngularAverageTable t(g, PowerKernel{p});
    auto phi = potential(rho, t);
    double pairing = 0.0;
    for (int i = 0; i < g->size(); ++i) pairing += g->w[i] * rho.values[i] * phi[i];
    CHECK(pairing == doctest::Approx(2.0 * interaction_energy(rho, t)).epsilon(1e-13));
  }
}

TEST_CASE("coulomb potential of the uniform ball matches the closed form") {
  auto g = make_radial_grid(3, 1.0, 512);
  std::vector<double> v(g->size(), 1.0);
  RadialDensity rho(g, std::move(v));
  auto phi = potential(rho, PowerKernel{-1.0});
  // unit-density ball of radius 1: phi(r) = 2 pi (1 - r^2 / 3) inside
  for (int i : {10, 100, 300, 500}) {
    const double r = g->r[i];
    CHECK(phi[i] == doctest::Approx(2.0 * M_PI * (1.0 - r * r / 3.0)).epsilon(2e-5));
  }
}

TEST_CASE("riesz quadratic form is positive definite on signed perturbations") {
  std::mt19937_64 rng(23);
  std::normal_distribution<double> n01(0.0, 1.0);
  auto g = make_radial_grid(3, 1.5, 96);
  AngularAverageTable t(g, PowerKernel{-1.0});
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> y(g->size());
    double mean = 0.0, wsum = 0.0;
    for (int i = 0; i < g->size(); ++i) {
      y[i] = n01(rng);
      mean += g->w[i] * y[i];
      wsum += g->w[i];
    }
    for (int i = 0; i < g->size(); ++i) y[i] -= mean / wsum;  // mass-zero
    double form = 0.0;
    for (int i = 0; i < g->size(); ++i) {
      double row = 0.0;
      for (int j = 0; j < g->size(); ++j) row += g->w[j] * t.at(i, j) * y[j];
      form += g->w[i] * y[i] * row;
    }
    CHECK(form > 0.0);
  }
}

TEST_CASE("ball self-energy closed forms") {
  const double pi2 = M_PI * M_PI;
  CHECK(ball_self_energy(1, -0.5) ==
        doctest::Approx(8.0 * std::sqrt(2.0) / 3.0).epsilon(1e-13));
  CHECK(ball_self_energy(3, 2.0) == doctest::Approx(16.0 * pi2 / 15.0).epsilon(1e-13));
  CHECK(ball_self_energy(3, 4.0) == doctest::Approx(64.0 * pi2 / 35.0).epsilon(1e-13));
  CHECK(ball_self_energy(3, 0.0) ==
        doctest::Approx(0.5 * std::pow(4.0 * M_PI / 3.0, 2)).epsilon(1e-13));
  // Coulomb value via the graded Galerkin quadrature
  CHECK(ball_self_energy(3, -1.0) == doctest::Approx(16.0 * pi2 / 15.0).epsilon(1e-12));
}

TEST_CASE("galerkin energy converges at second order for smooth densities") {
  for (double p : {-1.5, -2.5}) {
    const double ref = interaction_energy(smooth_bump(3, 1.2, 512), PowerKernel{p});
    const double e64 =
        std::fabs(interaction_energy(smooth_bump(3, 1.2, 64), PowerKernel{p}) - ref);
    const double e128 =
        std::fabs(interaction_energy(smooth_bump(3, 1.2, 128), PowerKernel{p}) - ref);
    CHECK(e64 / e128 > 3.0);
  }
}

TEST_CASE("shared table cache returns one instance per grid and exponent") {
  auto g = make_radial_grid(3, 1.0, 32);
  auto a = shared_angular_table(g, PowerKernel{-1.0});
  auto b = shared_angular_table(g, PowerKernel{-1.0});
  CHECK(a.get() == b.get());
  auto c = shared_angular_table(g, PowerKernel{-0.5});
  CHECK(a.get() != c.get());
  AngularAverageTable fresh(g, PowerKernel{-1.0});
  CHECK(fresh.at(5, 9) == a->at(5, 9));
  clear_kernel_caches();
  auto d = shared_angular_table(g, PowerKernel{-1.0});
  CHECK(d->at(5, 9) == a->at(5, 9));
}
