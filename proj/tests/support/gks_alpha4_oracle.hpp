#pragma once

#include <cmath>

// Independent closed form for the quartic-attraction relaxed problem in
// dimension N >= 6. With an atom of mass M at the origin and a diffuse part
// rho, stationarity of -int rho^q + m4 + (1 + 2/N) m2^2 pins the multiplier
// to the quartic moment coefficient and forces
//   rho(x) = [q / (r^2 (r^2 + b))]^{1/(1-q)},   b = (2 + 4/N) m2.
// Matching b and the diffuse mass m0 through the two Beta integrals below
// gives m0 in closed form; the atom carries the remainder 1 - m0.
namespace gks_oracle {

inline double log_beta(double a, double b) {
  return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

// Atom mass of the continuum stationary state, clamped at 0 when the diffuse
// part already holds the whole unit mass. Valid for 1/2 < q < 1 - 2/N;
// returns NaN outside that window.
inline double continuum_atom_mass(int N, double q) {
  const double s = 1.0 / (1.0 - q);
  if (!(4.0 * s - N - 2.0 > 0.0) || !(N - 2.0 * s > 0.0)) return std::nan("");
  const double sigma = 2.0 * std::pow(M_PI, N / 2.0) / std::tgamma(N / 2.0);
  const double qs = std::pow(q, s);
  const double cb = std::exp(log_beta((N - 2.0 * s) / 2.0, (4.0 * s - N) / 2.0));
  const double db =
      std::exp(log_beta((N + 2.0 - 2.0 * s) / 2.0, (4.0 * s - N - 2.0) / 2.0));
  const double b = std::pow((1.0 + 2.0 / N) * sigma * qs * db, 2.0 / (4.0 * s - N));
  const double m0 = 0.5 * sigma * qs * std::pow(b, (N - 4.0 * s) / 2.0) * cb;
  const double atom = 1.0 - m0;
  return atom > 0.0 ? atom : 0.0;
}

// q at which the continuum atom mass vanishes, by bisection on [lo, hi].
inline double atom_vanishing_point(int N, double lo, double hi) {
  for (int i = 0; i < 60; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (continuum_atom_mass(N, mid) > 0.0)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace gks_oracle
