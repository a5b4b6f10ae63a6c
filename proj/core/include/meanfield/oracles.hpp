#pragma once

#include <cstdint>
#include <vector>

#include "meanfield/kernels.hpp"
#include "meanfield/radial_grid.hpp"

namespace meanfield {

struct McConfig {
  std::int64_t samples = 1000000;  // >= 10^4
  std::uint64_t seed = 0x1234abcd5678ef00ull;
};

struct McEstimate {
  double value = 0.0;
  double std_error = 0.0;
  std::uint64_t seed = 0;
  std::int64_t samples = 0;
};

/// Monte Carlo estimate of (1/2) iint rho(x) |x-y|^p rho(y) dx dy by sampling
/// independent pairs from rho/mass. Deterministic for a fixed seed and
/// independent of the thread count (fixed 64-chunk partition). Requires
/// 2p > -dim so the estimator variance is finite.
McEstimate mc_double_integral(const RadialDensity& rho, PowerKernel kernel,
                              const McConfig& cfg);

/// Same estimator for the constant density `height` on the ball of the given
/// radius.
McEstimate mc_double_integral_ball(int dim, double radius, double height,
                                   PowerKernel kernel, const McConfig& cfg);

/// Exact weighted projection onto {0 <= v <= ub, sum w v = mass} by
/// exhaustive active-set enumeration (3^n cases). Refuses more than 12 cells.
std::vector<double> brute_force_bathtub(const std::vector<double>& target,
                                        const std::vector<double>& w, double mass,
                                        double ub);

enum class ScanModel { Flocking, Gks };

struct ScanSpec {
  ScanModel model = ScanModel::Flocking;
  int dim = 3;
  double lambda = 1.0;  // flocking repulsion exponent; ignored for Gks
  double q = 0.7;       // gks entropy exponent; ignored for Flocking
  double alpha = 2.0;
  double mass = 1.0;    // flocking mass; the gks mass is fixed to 1
  int radius_samples = 1024;
};

struct ScanResult {
  double radius = 0.0;
  double height = 0.0;
  double energy = 0.0;
};

/// Best constant-on-ball candidate h * indicator(B_R) under h |B_R| = mass
/// (and h <= 1 for flocking), energies evaluated through the closed scaling
/// of the unit-ball self-energies. The scan range extends itself while the
/// argmin sits on an edge.
ScanResult constant_on_ball_scan(const ScanSpec& spec);

}  // namespace meanfield
