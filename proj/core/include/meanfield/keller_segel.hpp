#pragma once

#include <optional>

#include "meanfield/radial_grid.hpp"
#include "meanfield/solve_report.hpp"

namespace meanfield {

/// -int rho^q + (1/2) iint rho |x-y|^alpha rho over probability densities,
/// plus the relaxed variant with a point mass M at the origin.
struct GksParams {
  int dim = 3;
  double q = 0.7;      // in (0, 1)
  double alpha = 2.0;  // > 0
};

enum class GksVerdict { MinusInfinity, Finite };
enum class GksRegime { Subconformal, Conformal, Superconformal };

struct ExistenceVerdict {
  GksVerdict verdict = GksVerdict::Finite;
  GksRegime regime = GksRegime::Subconformal;
};

struct RelaxedState {
  RadialDensity rho;
  double atom = 0.0;  // M in [0, 1]; mass(rho) + M = 1
};

struct GksOptions {
  int grid_n = 1024;
  double rmax = 0.0;  // <= 0: adaptive so the stationary tail mass < 1e-6
  int max_iter = 400;          // outer alternating iterations
  int rho_steps = 8;           // projected-gradient steps per outer iteration
  double energy_tol = 1e-10;   // absolute outer energy-decrease threshold
  double kkt_tol = 1e-6;
  double atom_tol = 1e-3;  // atom masses at or below this count as zero
  bool multistart = true;
};

struct RelaxedOutcome {
  RelaxedState state;
  SolveReport report;
  double forced_zero_energy = 0.0;  // best energy with the atom pinned to 0
  bool atom_positive = false;       // state.atom > atom_tol
};

/// The energy is -infinity iff q <= N/(N+alpha); regime tag relative to the
/// conformal exponent 2N/(2N+alpha). Comparisons are done on integer-weighted
/// products, never on rounded quotients.
ExistenceVerdict existence_verdict(const GksParams& params);

/// Exponent e with E(m) = m^e E(1): e = (2N-(2N+alpha)q)/(N-alpha-Nq).
/// Requires a finite-energy regime and N - alpha - Nq != 0.
double mass_scaling_exponent(const GksParams& params);

/// Breakdown: entropy = -sum w rho^q, attractive = kernel +alpha interaction.
/// The density mass must match declared_mass within 1e-6.
EnergyBreakdown gks_energy(const RadialDensity& rho, const GksParams& params,
                           double declared_mass = 1.0);

/// gks_energy terms plus the atom coupling M * sum w r^alpha rho. The atom
/// carries no entropy and no self-interaction.
EnergyBreakdown relaxed_energy(const RelaxedState& state, const GksParams& params);

/// Alternating minimization over (rho, M): projected-gradient steps on rho, a
/// stationarity fixed-point accelerator guarded by energy decrease, and an
/// atom/innermost-cell mass-exchange line search. Multistart keeps the best
/// of atom-free, atom-seeded, and atom-pinned runs, so the pinned value can
/// never undercut the reported one.
RelaxedOutcome minimize_relaxed(const GksParams& params, const GksOptions& options = {});

/// Stationary profile for alpha = 2: rho = (q/(|x|^2+c))^{1/(1-q)} with c > 0
/// bisected until the grid mass is 1 within 1e-8. Requires q > N/(N+2).
RadialDensity alpha2_exact_profile(int dim, double q, int grid_n = 1024,
                                   double rmax = 0.0);

/// Concentration threshold in q for alpha = 4: (N-2)(3N+4)/(3N(N+2)) for
/// N >= 6, nothing for N <= 5.
std::optional<double> alpha4_threshold(int dim);

/// (1/2) iint rho |x-y|^4 rho for a mass-1 radial density via the moment
/// identity m4 + (1 + 2/N) m2^2.
double alpha4_moment_energy(const RadialDensity& rho);

/// Domain radius from the polynomial tail of the stationary profile,
/// clamped to [2, 50].
double gks_default_rmax(const GksParams& params);

}  // namespace meanfield
