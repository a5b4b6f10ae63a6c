#pragma once

#include <memory>

#include "meanfield/radial_grid.hpp"
#include "meanfield/solve_report.hpp"

namespace meanfield {

/// Repulsion |x-y|^{-lambda} plus attraction |x-y|^{alpha}, minimized over
/// densities 0 <= rho <= 1 of fixed mass.
struct FlockParams {
  int dim = 3;
  double lambda = 1.0;
  double alpha = 2.0;
  double mass = 1.0;
};

enum class Phase { Liquid, Intermediate, Solid };

struct PhaseLabel {
  Phase phase = Phase::Liquid;
  double max_rho = 0.0;
  double plateau_measure = 0.0;  // |{rho >= 1 - tol}|
  double band_measure = 0.0;     // |{tol < rho < 1 - tol}|
  double support_measure = 0.0;  // |{rho > tol}|
  double support_radius = 0.0;   // outer edge of the last cell with rho > tol
};

enum class InitPolicy {
  Ball,     // characteristic function of the ball of volume m
  Measure,  // m times the unconstrained unit-mass minimizer, reprojected
  Uniform,  // flat density over the whole domain
  Best,     // run all of the above, keep the lowest energy
};

struct FlockOptions {
  int grid_n = 1024;
  double rmax = 0.0;  // <= 0: three times the radius of the mass-m ball
  int max_iter = 20000;
  double energy_tol = 1e-12;  // absolute energy-decrease threshold
  double kkt_tol = 1e-6;
  bool polish = true;  // exact stationarity solve on the final free set
};

/// Energy of a feasible density (0 <= rho <= 1 within 1e-9, mass within 1e-6
/// relative of params.mass). Breakdown: repulsive kernel -lambda, attractive
/// kernel +alpha.
EnergyBreakdown flock_energy(const RadialDensity& rho, const FlockParams& params);

/// Projected gradient descent with adaptive steps and monotone backtracking.
/// The energy history is exactly nonincreasing. converged means the energy
/// decrease fell below energy_tol (or the arithmetic floor) and the KKT
/// complementarity residual is below kkt_tol.
SolveReport minimize_flock(const FlockParams& params,
                           InitPolicy init = InitPolicy::Best,
                           const FlockOptions& options = {});

/// Same bilinear energy over probability densities with no upper bound
/// (mass 1), for probing the regime where the height constraint is inactive.
SolveReport minimize_measure(int dim, double lambda, double alpha,
                             const FlockOptions& options = {});

/// Solid: a plateau {rho >= 1-tol} exists and the band {tol < rho < 1-tol},
/// minus an interface strip of at most two cells past the outermost plateau
/// cell, has measure <= 1e-3 * mass; Liquid: max rho <= 1 - tol;
/// Intermediate otherwise.
PhaseLabel classify_phase(const RadialDensity& rho, double tol = 1e-3);

/// Characteristic function of the ball of volume `mass` on this grid, with a
/// fractional boundary cell so the grid mass is exact.
RadialDensity ball_indicator(std::shared_ptr<const RadialGrid> grid, double mass);

}  // namespace meanfield
