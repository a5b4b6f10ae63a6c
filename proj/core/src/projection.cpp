#include "meanfield/projection.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace meanfield {
namespace {

double clamped_mass(const std::vector<double>& t, const std::vector<double>& w,
                    double ub, double mu) {
  double m = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i)
    m += w[i] * std::clamp(t[i] - mu, 0.0, ub);
  return m;
}

}  // namespace

BathtubResult bathtub_project(const std::vector<double>& target,
                              const std::vector<double>& w, double mass, double ub) {
  const std::size_t n = target.size();
  if (n == 0 || w.size() != n)
    throw std::invalid_argument("bathtub_project: size mismatch");
  if (!(ub > 0.0)) throw std::invalid_argument("bathtub_project: ub must be positive");
  double w_total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(w[i] > 0.0)) throw std::invalid_argument("bathtub_project: weights must be positive");
    if (std::isnan(target[i])) throw std::invalid_argument("bathtub_project: NaN target");
    w_total += w[i];
  }
  const double cap = ub * w_total;  // +inf when ub is
  if (std::isnan(mass) || mass < -1e-12 * std::max(1.0, std::abs(mass)) || mass > cap * (1.0 + 1e-12))
    throw std::invalid_argument("bathtub_project: mass outside [0, ub * total weight]");
  mass = std::clamp(mass, 0.0, cap);

  const double t_min = *std::min_element(target.begin(), target.end());
  const double t_max = *std::max_element(target.begin(), target.end());

  if (mass == 0.0) return {std::vector<double>(n, 0.0), t_max};

  // mass(mu) is continuous and non-increasing; bracket then bisect
  double hi = t_max;  // mass 0
  double lo = std::isfinite(ub) ? t_min - ub : t_min - mass / w_total - 1.0;
  for (int guard = 0; clamped_mass(target, w, ub, lo) < mass; ++guard) {
    if (guard > 120) throw std::runtime_error("bathtub_project: bracket failure");
    lo -= std::max(1.0, hi - lo);
  }
  for (int it = 0; it < 128; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    (clamped_mass(target, w, ub, mid) >= mass ? lo : hi) = mid;
  }
  double mu = 0.5 * (lo + hi);

  // exact multiplier from the active sets the bisected mu selects
  for (int pass = 0; pass < 2; ++pass) {
    double w_free = 0.0, wt_free = 0.0, m_upper = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double v = target[i] - mu;
      if (v >= ub) {
        m_upper += w[i] * ub;
      } else if (v > 0.0) {
        w_free += w[i];
        wt_free += w[i] * target[i];
      }
    }
    if (w_free == 0.0) break;
    mu = (wt_free + m_upper - mass) / w_free;
  }

  BathtubResult out;
  out.shift = mu;
  out.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.values[i] = std::clamp(target[i] - mu, 0.0, ub);
  return out;
}

}  // namespace meanfield
