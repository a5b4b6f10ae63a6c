#pragma once

#include <memory>
#include <vector>

namespace meanfield {

/// Radial quadrature grid for R^N integrals of radial functions:
///   integral f(|x|) dx  ~=  sum_i w[i] f(r[i]).
/// Cells are the shells between consecutive edges; w[i] is the exact shell
/// volume and r[i] the volume centroid of the shell, so constants and the
/// first radial moment are integrated exactly.
struct RadialGrid {
  int dim = 0;
  double rmax = 0.0;
  std::vector<double> edges;  // size n+1, edges[0] == 0, edges[n] == rmax
  std::vector<double> r;      // size n, strictly increasing, r[0] > 0
  std::vector<double> w;      // size n, strictly positive

  int size() const { return static_cast<int>(r.size()); }
  double cell_width(int i) const { return edges[i + 1] - edges[i]; }

  /// Throws std::invalid_argument when the invariants above fail.
  void validate() const;
};

/// Builds the hybrid radial grid on [0, rmax]: for n >= 64 the first quarter
/// of the cells grow geometrically from a tenth of the uniform width up to
/// exactly the uniform width, the rest are uniform up to rmax; small n fall
/// back to a uniform grid. Dense near the origin to resolve peaked profiles,
/// with no width jump anywhere (jumps show up as quadrature seams that
/// minimizers latch onto).
std::shared_ptr<const RadialGrid> make_radial_grid(int dim, double rmax, int n);

/// Exact volume-average of r^k over cell i:
///   dim (b^{dim+k} - a^{dim+k}) / ((dim+k) (b^dim - a^dim)),
/// log form at k = -dim. Requires k > -dim on the innermost cell.
double cell_radial_moment(const RadialGrid& grid, int i, double k);

/// Nonnegative density values at the grid centers.
struct RadialDensity {
  std::shared_ptr<const RadialGrid> grid;
  std::vector<double> values;

  RadialDensity() = default;
  RadialDensity(std::shared_ptr<const RadialGrid> g, std::vector<double> v);

  double mass() const;
  /// max_i values[i]
  double sup() const;
  /// L1 distance to another density on the same grid.
  double l1_distance(const RadialDensity& other) const;
};

}  // namespace meanfield
