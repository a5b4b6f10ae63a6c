#include "meanfield/geometry.hpp"

#include <cmath>
#include <stdexcept>

namespace meanfield {

namespace {
void check_dim(int dim) {
  if (dim < 1) throw std::invalid_argument("dimension must be >= 1");
}
}  // namespace

double sphere_measure(int dim) {
  check_dim(dim);
  // 2 pi^{N/2} / Gamma(N/2)
  return 2.0 * std::pow(M_PI, 0.5 * dim) / std::tgamma(0.5 * dim);
}

double unit_ball_volume(int dim) { return sphere_measure(dim) / dim; }

double ball_volume(int dim, double r) {
  if (r < 0) throw std::invalid_argument("radius must be >= 0");
  return unit_ball_volume(dim) * std::pow(r, dim);
}

double ball_radius(int dim, double volume) {
  if (volume < 0) throw std::invalid_argument("volume must be >= 0");
  return std::pow(volume / unit_ball_volume(dim), 1.0 / dim);
}

double ball_perimeter_for_volume(int dim, double volume) {
  if (volume <= 0) throw std::invalid_argument("volume must be > 0");
  if (dim == 1) return 2.0;
  const double r = ball_radius(dim, volume);
  return sphere_measure(dim) * std::pow(r, dim - 1);
}

}  // namespace meanfield
