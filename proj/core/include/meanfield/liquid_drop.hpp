#pragma once

#include <optional>
#include <vector>

#include "meanfield/solve_report.hpp"

namespace meanfield {

/// Perimeter-plus-repulsion model on sets, reduced to balls and unions of
/// balls at infinite separation. dim >= 1, 0 < lambda < dim, mass > 0.
struct GldParams {
  int dim = 3;
  double lambda = 1.0;
  double mass = 1.0;
};

struct BallSplit {
  std::vector<double> masses;  // all > 0, summing to the params mass
};

struct GldThresholds {
  double m_star = 0.0;
  double m_c_stab = 0.0;
};

struct Solve1dResult {
  double energy = 0.0;
  int k_opt = 1;
  double piece_mass = 0.0;
};

enum class SplitSign { Negative, Zero, Positive };

/// I_N(lambda) = (1/2) * double integral of |x-y|^{-lambda} over B_1 x B_1.
/// Closed form in dim 1, cached grid quadrature otherwise. `override_value`
/// short-circuits the computation; it exists so callers can inject an
/// externally known exact value (e.g. 16 pi^2 / 15 for dim 3, lambda 1) and
/// read thresholds at closed-form accuracy.
double unit_ball_riesz(int dim, double lambda,
                       std::optional<double> override_value = std::nullopt);

/// Energy of the ball of volume `mass`: exact perimeter plus the scaled
/// unit-ball repulsion (m/|B_1|)^{(2N-lambda)/N} * I_N(lambda).
EnergyBreakdown ball_energy(const GldParams& params,
                            std::optional<double> i_ball = std::nullopt);

/// Sum of ball energies of the pieces, cross terms dropped (infinite
/// separation). Upper bound for the ground-state energy. Throws if the piece
/// masses do not sum to params.mass within 1e-12 relative.
double split_energy(const GldParams& params, const BallSplit& split,
                    std::optional<double> i_ball = std::nullopt);

/// Mass at which the ball ties with two half-mass balls infinitely far apart:
///   m_* = [ (2^{1/N}-1)/(1-2^{-(N-lambda)/N}) * Per(B_1)/I_N(lambda) ]^{N/(N-lambda+1)} |B_1|.
/// Always re-checks the defining sign change of ball_energy(m) - 2 ball_energy(m/2)
/// around the returned value and throws std::logic_error if it fails.
double m_star(int dim, double lambda, std::optional<double> i_ball = std::nullopt);

/// Mass above which the ball is linearly unstable to volume-preserving
/// perturbations:
///   m_c^stab = [ (N+1)/(lambda (N-lambda)) * Per(B_1)/I_N(lambda) ]^{N/(N-lambda+1)} |B_1|.
double m_c_stab(int dim, double lambda, std::optional<double> i_ball = std::nullopt);

GldThresholds gld_thresholds(int dim, double lambda,
                             std::optional<double> i_ball = std::nullopt);

/// Complete 1d ground state for 0 < lambda < 1: the optimum is K equal
/// intervals infinitely far apart, E = min_K [2K + K^{lambda-1} m^{2-lambda} /
/// ((1-lambda)(2-lambda))]. Ties go to the smaller K.
Solve1dResult solve_1d(double lambda, double mass);

/// Sign of ball_energy(m) - 2 ball_energy(m/2), Zero within 1e-9 relative to
/// the ball energy.
SplitSign charmstar_sign(int dim, double lambda, double mass,
                         std::optional<double> i_ball = std::nullopt);

}  // namespace meanfield
