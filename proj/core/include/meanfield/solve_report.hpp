#pragma once

#include <vector>

#include "meanfield/radial_grid.hpp"

namespace meanfield {

struct EnergyBreakdown {
  double perimeter = 0.0;
  double repulsive = 0.0;
  double attractive = 0.0;
  double entropy = 0.0;
  double atom_coupling = 0.0;
  double total = 0.0;
};

struct SolveReport {
  RadialDensity density;
  double energy = 0.0;
  EnergyBreakdown breakdown;
  std::vector<double> energy_history;  // one entry per accepted iterate, non-increasing
  int iterations = 0;
  double final_step = 0.0;
  double kkt_residual = 0.0;
  bool converged = false;
  double max_mass_drift = 0.0;
};

}  // namespace meanfield
