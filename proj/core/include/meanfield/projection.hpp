#pragma once

#include <limits>
#include <vector>

namespace meanfield {

struct BathtubResult {
  std::vector<double> values;
  double shift;  // the multiplier mu with values = clamp(target - mu, 0, ub)
};

/// Euclidean projection in the w-weighted metric of `target` onto
///   { 0 <= v_i <= ub,  sum_i w_i v_i = mass }.
/// The solution is clamp(target - mu, 0, ub) for a scalar mu found by
/// bisection and then recomputed exactly from the active sets. Pass
/// ub = +infinity for the simplex without an upper bound. Requires
/// 0 <= mass <= ub * sum(w) with strict feasibility checked up front.
BathtubResult bathtub_project(const std::vector<double>& target,
                              const std::vector<double>& w, double mass,
                              double ub = std::numeric_limits<double>::infinity());

}  // namespace meanfield
