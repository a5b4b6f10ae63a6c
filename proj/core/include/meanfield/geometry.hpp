#pragma once

namespace meanfield {

/// Surface measure of the unit sphere S^{N-1} in R^N, |S^0| = 2.
double sphere_measure(int dim);

/// Volume of the unit ball B_1 in R^N.
double unit_ball_volume(int dim);

/// Volume of the ball of radius r.
double ball_volume(int dim, double r);

/// Radius of the ball of given volume.
double ball_radius(int dim, double volume);

/// Perimeter (surface measure of the boundary) of the ball of given volume.
/// In 1d an interval has perimeter 2 regardless of length.
double ball_perimeter_for_volume(int dim, double volume);

}  // namespace meanfield
