#include "meanfield/radial_grid.hpp"

#include <cmath>
#include <stdexcept>

#include "meanfield/geometry.hpp"

namespace meanfield {

void RadialGrid::validate() const {
  if (dim < 1) throw std::invalid_argument("grid: dim must be >= 1");
  if (!(rmax > 0)) throw std::invalid_argument("grid: rmax must be > 0");
  const std::size_t n = r.size();
  if (n < 2 || w.size() != n || edges.size() != n + 1)
    throw std::invalid_argument("grid: inconsistent sizes");
  if (edges.front() != 0.0 || edges.back() != rmax)
    throw std::invalid_argument("grid: edges must span [0, rmax]");
  double prev = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(edges[i] < edges[i + 1])) throw std::invalid_argument("grid: edges not increasing");
    if (!(r[i] > prev)) throw std::invalid_argument("grid: centers not increasing or r[0] <= 0");
    if (!(w[i] > 0)) throw std::invalid_argument("grid: weights must be > 0");
    prev = r[i];
  }
}

std::shared_ptr<const RadialGrid> make_radial_grid(int dim, double rmax, int n) {
  if (dim < 1) throw std::invalid_argument("make_radial_grid: dim must be >= 1");
  if (!(rmax > 0)) throw std::invalid_argument("make_radial_grid: rmax must be > 0");
  if (n < 2) throw std::invalid_argument("make_radial_grid: n must be >= 2");

  auto g = std::make_shared<RadialGrid>();
  g->dim = dim;
  g->rmax = rmax;
  g->edges.resize(n + 1);
  g->edges[0] = 0.0;

  if (n < 64) {
    for (int i = 1; i <= n; ++i) g->edges[i] = rmax * i / n;
  } else {
    // Geometric cell widths a1 g^k from h/10 up to exactly h, then uniform h.
    // The refined span follows from the width sum, so no cell is ever wider
    // than the uniform spacing.
    const int n_geo = n / 4;
    const int n_uni = n - n_geo;
    const double ratio = std::pow(10.0, 1.0 / (n_geo - 1));
    const double span_per_h = 0.1 * (10.0 * ratio - 1.0) / (ratio - 1.0);
    const double h_uni = rmax / (n_uni + span_per_h);
    const double a1 = h_uni / 10.0;
    const double span_geo = span_per_h * h_uni;
    for (int i = 1; i < n_geo; ++i)
      g->edges[i] = a1 * (std::pow(ratio, i) - 1.0) / (ratio - 1.0);
    g->edges[n_geo] = span_geo;
    for (int k = 1; k < n_uni; ++k) g->edges[n_geo + k] = span_geo + k * h_uni;
  }
  g->edges[n] = rmax;

  g->r.resize(n);
  g->w.resize(n);
  const double sigma = sphere_measure(dim);
  for (int i = 0; i < n; ++i) {
    const double a = g->edges[i], b = g->edges[i + 1];
    const double pa = std::pow(a, dim), pb = std::pow(b, dim);
    g->w[i] = sigma * (pb - pa) / dim;
    // volume centroid of the shell
    g->r[i] = (double(dim) / (dim + 1)) * (std::pow(b, dim + 1) - std::pow(a, dim + 1)) / (pb - pa);
  }
  g->validate();
  return g;
}

double cell_radial_moment(const RadialGrid& grid, int i, double k) {
  const double a = grid.edges[i], b = grid.edges[i + 1];
  const int dim = grid.dim;
  if (a == 0.0 && !(k > -dim))
    throw std::invalid_argument("cell_radial_moment: k must exceed -dim on the innermost cell");
  const double pa = std::pow(a, dim), pb = std::pow(b, dim);
  if (k + dim == 0.0) return dim * std::log(b / a) / (pb - pa);
  return dim * (std::pow(b, dim + k) - std::pow(a, dim + k)) / ((k + dim) * (pb - pa));
}

RadialDensity::RadialDensity(std::shared_ptr<const RadialGrid> g, std::vector<double> v)
    : grid(std::move(g)), values(std::move(v)) {
  if (!grid) throw std::invalid_argument("density: null grid");
  if (values.size() != static_cast<std::size_t>(grid->size()))
    throw std::invalid_argument("density: value count does not match grid");
  for (double& x : values) {
    if (std::isnan(x)) throw std::invalid_argument("density: NaN value");
    if (x < 0) {
      if (x < -1e-12) throw std::invalid_argument("density: negative value");
      x = 0.0;
    }
  }
}

double RadialDensity::mass() const {
  double m = 0.0;
  for (int i = 0; i < grid->size(); ++i) m += grid->w[i] * values[i];
  return m;
}

double RadialDensity::sup() const {
  double s = 0.0;
  for (double v : values) s = std::max(s, v);
  return s;
}

double RadialDensity::l1_distance(const RadialDensity& other) const {
  if (grid.get() != other.grid.get())
    throw std::invalid_argument("l1_distance: densities live on different grids");
  double d = 0.0;
  for (int i = 0; i < grid->size(); ++i) d += grid->w[i] * std::abs(values[i] - other.values[i]);
  return d;
}

}  // namespace meanfield
