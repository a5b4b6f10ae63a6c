#pragma once

#include <array>
#include <cmath>
#include <cstddef>

namespace meanfield {

/// Abscissae/weights for Gauss-Legendre rules on [-1,1], positive half only.
extern const std::array<double, 4> kGl8Nodes;
extern const std::array<double, 4> kGl8Weights;
extern const std::array<double, 8> kGl16Nodes;
extern const std::array<double, 8> kGl16Weights;

template <class F>
double gauss_legendre_8(F&& f, double a, double b) {
  const double c = 0.5 * (a + b), h = 0.5 * (b - a);
  double s = 0.0;
  for (std::size_t k = 0; k < kGl8Nodes.size(); ++k) {
    const double x = h * kGl8Nodes[k];
    s += kGl8Weights[k] * (f(c - x) + f(c + x));
  }
  return s * h;
}

template <class F>
double gauss_legendre_16(F&& f, double a, double b) {
  const double c = 0.5 * (a + b), h = 0.5 * (b - a);
  double s = 0.0;
  for (std::size_t k = 0; k < kGl16Nodes.size(); ++k) {
    const double x = h * kGl16Nodes[k];
    s += kGl16Weights[k] * (f(c - x) + f(c + x));
  }
  return s * h;
}

namespace detail {

template <class F>
double adaptive_simpson_rec(F& f, double a, double b, double fa, double fm, double fb,
                            double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return adaptive_simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         adaptive_simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace detail

/// Adaptive Simpson on [a,b]. `tol` is absolute; callers scale it by an estimate
/// of the integral when they want a relative tolerance.
template <class F>
double adaptive_simpson(F&& f, double a, double b, double tol, int max_depth = 48) {
  if (a == b) return 0.0;
  const double fa = f(a), fm = f(0.5 * (a + b)), fb = f(b);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return detail::adaptive_simpson_rec(f, a, b, fa, fm, fb, whole, tol, max_depth);
}

}  // namespace meanfield
