#pragma once

#include <memory>
#include <vector>

#include "meanfield/radial_grid.hpp"

namespace meanfield {

/// Power-law pair kernel K(t) = t^p. Repulsive Riesz kernels have p = -lambda
/// with 0 < lambda < dim; attractive confinement has p = alpha > 0.
struct PowerKernel {
  double p = 0.0;
};

/// Average of |r e - s omega|^p over omega uniform on S^{dim-1} (e fixed unit
/// vector). In 1d this is the two-point average (|r-s|^p + (r+s)^p) / 2.
/// Requires r, s > 0 and p > -dim. Returns +inf at r == s when p + dim - 1 <= 0
/// (the sphere average itself diverges there).
double angular_kernel_average(int dim, double p, double r, double s);

/// Dense symmetric table A[i][j] of angular kernel averages at grid centers,
/// the quadrature kernel of the reduced double integral
///   (1/2) iint rho K rho  ~=  (1/2) sum_ij w_i w_j rho_i rho_j A[i][j].
/// For p < 0 every entry is the average of the kernel over the cell pair
/// (closed form in 1d, graded panel quadrature otherwise), making the matrix
/// the Galerkin form of the Riesz kernel on piecewise-constant densities:
/// positive definite, with the integrable diagonal singularity integrated
/// analytically near r = s. For p >= 0 entries are point values at the cell
/// centroids, which keeps the p = 2 and p = 4 energies identical to the
/// centroid moment identities.
class AngularAverageTable {
 public:
  AngularAverageTable(std::shared_ptr<const RadialGrid> grid, PowerKernel kernel);

  const RadialGrid& grid() const { return *grid_; }
  const std::shared_ptr<const RadialGrid>& grid_ptr() const { return grid_; }
  double p() const { return p_; }
  int size() const { return n_; }
  double at(int i, int j) const { return a_[static_cast<std::size_t>(i) * n_ + j]; }
  const double* row(int i) const { return a_.data() + static_cast<std::size_t>(i) * n_; }

 private:
  std::shared_ptr<const RadialGrid> grid_;
  double p_;
  int n_;
  std::vector<double> a_;
};

/// Process-wide table cache keyed by (grid instance, exponent). The cache owns
/// the grid through the table, so cached entries never dangle.
std::shared_ptr<const AngularAverageTable> shared_angular_table(
    const std::shared_ptr<const RadialGrid>& grid, PowerKernel kernel);
void clear_kernel_caches();

/// (1/2) iint rho(x) |x-y|^p rho(y) dx dy on the density's grid.
double interaction_energy(const RadialDensity& rho, PowerKernel kernel);
double interaction_energy(const RadialDensity& rho, const AngularAverageTable& table);

/// phi_i = sum_j w_j A[i][j] rho_j, the radial profile of int |x-y|^p rho(y) dy.
/// Satisfies sum_i w_i rho_i phi_i == 2 * interaction_energy exactly.
std::vector<double> potential(const RadialDensity& rho, PowerKernel kernel);
std::vector<double> potential(const RadialDensity& rho, const AngularAverageTable& table);

/// Integral of |x|^k rho, computed with exact per-cell moments of r^k, so it
/// is the true k-th moment of the piecewise-constant density.
double radial_moment(const RadialDensity& rho, double k);

/// (1/2) iint_{B_1 x B_1} |x-y|^p dx dy for the unit ball. Closed form in 1d
/// and for p in {0, 2, 4}; otherwise grid quadrature with `grid_n` cells,
/// memoized per (dim, p, grid_n).
double ball_self_energy(int dim, double p, int grid_n = 1024);

}  // namespace meanfield
