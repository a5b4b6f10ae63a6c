#include "meanfield/flocking.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "meanfield/geometry.hpp"
#include "meanfield/kernels.hpp"
#include "meanfield/projection.hpp"

namespace meanfield {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_flock(const FlockParams& p) {
  if (p.dim < 1) throw std::invalid_argument("flocking: dim must be >= 1");
  if (!(p.lambda > 0.0) || !(p.lambda < p.dim))
    throw std::invalid_argument("flocking: lambda must lie in (0, dim)");
  if (!(p.alpha > 0.0)) throw std::invalid_argument("flocking: alpha must be > 0");
  if (!(p.mass > 0.0)) throw std::invalid_argument("flocking: mass must be > 0");
}

std::vector<double> summed_table(const std::shared_ptr<const RadialGrid>& grid,
                                 double lambda, double alpha) {
  auto rep = shared_angular_table(grid, PowerKernel{-lambda});
  auto att = shared_angular_table(grid, PowerKernel{alpha});
  const std::size_t nn = static_cast<std::size_t>(grid->size()) * grid->size();
  std::vector<double> sum(nn);
  for (std::size_t k = 0; k < nn; ++k) sum[k] = rep->row(0)[k] + att->row(0)[k];
  return sum;
}

// phi_i = sum_j A_ij w_j rho_j; energy = (1/2) sum_i w_i rho_i phi_i
void apply_table(const std::vector<double>& a, const std::vector<double>& w,
                 const std::vector<double>& rho, std::vector<double>& phi) {
  const int n = static_cast<int>(w.size());
  for (int i = 0; i < n; ++i) {
    const double* row = a.data() + static_cast<std::size_t>(i) * n;
    double s = 0.0;
    for (int j = 0; j < n; ++j) s += row[j] * w[j] * rho[j];
    phi[i] = s;
  }
}

double quadratic_energy(const std::vector<double>& w, const std::vector<double>& rho,
                        const std::vector<double>& phi) {
  double e = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) e += w[i] * rho[i] * phi[i];
  return 0.5 * e;
}

double kkt_residual(const std::vector<double>& rho, const std::vector<double>& w,
                    const std::vector<double>& phi, double ub) {
  const int n = static_cast<int>(rho.size());
  double mu;
  double w_free = 0.0, wphi_free = 0.0;
  for (int i = 0; i < n; ++i) {
    const bool lower = rho[i] <= 1e-9;
    const bool upper = std::isfinite(ub) && rho[i] >= ub - 1e-9;
    if (!lower && !upper) {
      w_free += w[i];
      wphi_free += w[i] * phi[i];
    }
  }
  if (w_free > 0.0) {
    mu = wphi_free / w_free;
  } else {
    double hi = -kInf, lo = kInf;
    for (int i = 0; i < n; ++i) {
      if (std::isfinite(ub) && rho[i] >= ub - 1e-9) hi = std::max(hi, phi[i]);
      else lo = std::min(lo, phi[i]);
    }
    if (!std::isfinite(hi)) mu = lo;
    else if (!std::isfinite(lo)) mu = hi;
    else mu = 0.5 * (hi + lo);
  }
  double res = 0.0;
  for (int i = 0; i < n; ++i) {
    const bool lower = rho[i] <= 1e-9;
    const bool upper = std::isfinite(ub) && rho[i] >= ub - 1e-9;
    double v;
    if (upper) v = std::max(0.0, phi[i] - mu);
    else if (lower) v = std::max(0.0, mu - phi[i]);
    else v = std::abs(phi[i] - mu);
    res = std::max(res, v);
  }
  return res;
}

// Gaussian elimination with partial pivoting; a is n x n row-major, b length n.
// Returns false on a singular pivot.
bool dense_solve(std::vector<double>& a, std::vector<double>& b, int n) {
  for (int col = 0; col < n; ++col) {
    int piv = col;
    double best = std::abs(a[static_cast<std::size_t>(col) * n + col]);
    for (int r = col + 1; r < n; ++r) {
      const double v = std::abs(a[static_cast<std::size_t>(r) * n + col]);
      if (v > best) { best = v; piv = r; }
    }
    if (best < 1e-300) return false;
    if (piv != col) {
      for (int c = 0; c < n; ++c)
        std::swap(a[static_cast<std::size_t>(piv) * n + c], a[static_cast<std::size_t>(col) * n + c]);
      std::swap(b[piv], b[col]);
    }
    const double d = a[static_cast<std::size_t>(col) * n + col];
    for (int r = col + 1; r < n; ++r) {
      const double f = a[static_cast<std::size_t>(r) * n + col] / d;
      if (f == 0.0) continue;
      for (int c = col; c < n; ++c)
        a[static_cast<std::size_t>(r) * n + c] -= f * a[static_cast<std::size_t>(col) * n + c];
      b[r] -= f * b[col];
    }
  }
  for (int r = n - 1; r >= 0; --r) {
    double s = b[r];
    for (int c = r + 1; c < n; ++c) s -= a[static_cast<std::size_t>(r) * n + c] * b[c];
    b[r] = s / a[static_cast<std::size_t>(r) * n + r];
  }
  return true;
}

// Stationarity is linear in rho once the clamped sets are fixed: solve
// phi_i = mu on the free set together with the mass constraint. An active-set
// loop handles a slightly wrong initial partition: infeasible free cells get
// clamped and the worst clamped cell whose multiplier has the wrong sign is
// released, one per pass. Only a feasible, non-increasing result is kept.
bool polish_free_set(const std::vector<double>& table, const std::vector<double>& w,
                     double mass, double ub, std::vector<double>& rho, double& energy,
                     std::vector<double>& phi) {
  const int n = static_cast<int>(rho.size());
  enum class Set : unsigned char { Lower, Free, Upper };
  std::vector<Set> part(n, Set::Lower);
  for (int i = 0; i < n; ++i) {
    if (std::isfinite(ub) && rho[i] >= ub - 1e-9) part[i] = Set::Upper;
    else if (rho[i] > 1e-9) part[i] = Set::Free;
  }

  const double scale = std::max(1.0, std::abs(energy));
  std::vector<double> cand(n), phi_cand(n);
  for (int pass = 0; pass < 60; ++pass) {
    std::vector<int> free_idx;
    for (int i = 0; i < n; ++i)
      if (part[i] == Set::Free) free_idx.push_back(i);
    const int f = static_cast<int>(free_idx.size());
    if (f == 0 || f > 1500) return false;

    const int m = f + 1;  // unknowns: y_j = w_j rho_j on the free set, then mu
    std::vector<double> sys(static_cast<std::size_t>(m) * m, 0.0), rhs(m, 0.0);
    double upper_mass = 0.0;
    for (int i = 0; i < n; ++i)
      if (part[i] == Set::Upper) upper_mass += w[i] * ub;
    for (int a = 0; a < f; ++a) {
      const int i = free_idx[a];
      const double* row = table.data() + static_cast<std::size_t>(i) * n;
      for (int b = 0; b < f; ++b) sys[static_cast<std::size_t>(a) * m + b] = row[free_idx[b]];
      sys[static_cast<std::size_t>(a) * m + f] = -1.0;
      double c = 0.0;
      for (int u = 0; u < n; ++u)
        if (part[u] == Set::Upper) c += row[u] * w[u] * ub;
      rhs[a] = -c;
    }
    for (int b = 0; b < f; ++b) sys[static_cast<std::size_t>(f) * m + b] = 1.0;
    rhs[f] = mass - upper_mass;

    if (!dense_solve(sys, rhs, m)) return false;

    bool clamped = false;
    for (int a = 0; a < f; ++a) {
      const int i = free_idx[a];
      const double v = rhs[a] / w[i];
      if (v < -1e-12) { part[i] = Set::Lower; clamped = true; }
      else if (std::isfinite(ub) && v > ub + 1e-12) { part[i] = Set::Upper; clamped = true; }
    }
    if (clamped) continue;

    for (int i = 0; i < n; ++i)
      cand[i] = part[i] == Set::Upper ? ub : 0.0;
    for (int a = 0; a < f; ++a) cand[free_idx[a]] = std::clamp(rhs[a] / w[free_idx[a]], 0.0, ub);
    apply_table(table, w, cand, phi_cand);
    const double mu = rhs[f];

    // Multiplier signs on the clamped sets; release only the worst offender so
    // the partition cannot oscillate wildly.
    int worst = -1;
    double worst_v = 1e-9 * std::max(1.0, std::abs(mu));
    for (int i = 0; i < n; ++i) {
      double v = 0.0;
      if (part[i] == Set::Lower) v = mu - phi_cand[i];
      else if (part[i] == Set::Upper) v = phi_cand[i] - mu;
      if (v > worst_v) { worst_v = v; worst = i; }
    }
    if (worst >= 0) {
      part[worst] = Set::Free;
      continue;
    }

    const double e_cand = quadratic_energy(w, cand, phi_cand);
    if (!(e_cand <= energy + 1e-12 * scale)) return false;
    rho = cand;
    phi = phi_cand;
    energy = e_cand;
    return true;
  }
  return false;
}

SolveReport run_quadratic_pgd(std::shared_ptr<const RadialGrid> grid,
                              const std::vector<double>& table, double mass, double ub,
                              std::vector<double> init, const FlockOptions& opts) {
  const auto& w = grid->w;
  const int n = grid->size();

  std::vector<double> rho = bathtub_project(init, w, mass, ub).values;
  std::vector<double> phi(n), phi_trial(n);
  apply_table(table, w, rho, phi);
  double energy = quadratic_energy(w, rho, phi);

  double row_bound = 0.0;
  for (int i = 0; i < n; ++i) {
    const double* row = table.data() + static_cast<std::size_t>(i) * n;
    double s = 0.0;
    for (int j = 0; j < n; ++j) s += std::abs(row[j]) * w[j];
    row_bound = std::max(row_bound, s);
  }
  double step = 1.0 / row_bound;

  SolveReport rep;
  rep.energy_history.push_back(energy);
  double mass_drift = 0.0;
  int stalls = 0;
  bool converged = false;
  int it = 0;
  for (; it < opts.max_iter; ++it) {
    std::vector<double> target(n), trial;
    bool accepted = false;
    double t = step;
    for (int bt = 0; bt < 60; ++bt) {
      for (int i = 0; i < n; ++i) target[i] = rho[i] - t * phi[i];
      trial = bathtub_project(target, w, mass, ub).values;
      double move2 = 0.0;
      for (int i = 0; i < n; ++i) {
        const double d = trial[i] - rho[i];
        move2 += w[i] * d * d;
      }
      apply_table(table, w, trial, phi_trial);
      const double e_trial = quadratic_energy(w, trial, phi_trial);
      if (move2 == 0.0 || e_trial <= energy - 1e-4 * move2 / t) {
        // Barzilai-Borwein step for the next iteration
        double num = move2, den = 0.0;
        for (int i = 0; i < n; ++i) den += w[i] * (trial[i] - rho[i]) * (phi_trial[i] - phi[i]);
        step = den > 0.0 ? std::clamp(num / den, 1e-18, 1e18) : t * 4.0;
        const double dE = energy - e_trial;
        rho.swap(trial);
        phi.swap(phi_trial);
        energy = e_trial;
        rep.energy_history.push_back(energy);
        rep.final_step = t;
        double m_now = 0.0;
        for (int i = 0; i < n; ++i) m_now += w[i] * rho[i];
        mass_drift = std::max(mass_drift, std::abs(m_now - mass));
        accepted = true;
        const double floor = std::max(opts.energy_tol, 8.0 * std::numeric_limits<double>::epsilon() * std::abs(energy));
        if (dE <= floor) {
          if (kkt_residual(rho, w, phi, ub) <= opts.kkt_tol) {
            converged = true;
          } else if (++stalls >= 30) {
            // leave the loop; the free-set polish may still finish the job
          } else {
            if (move2 == 0.0) step *= 4.0;
            break;
          }
        } else {
          stalls = 0;
        }
        break;
      }
      t *= 0.5;
      if (t < 1e-300) break;
    }
    if (!accepted || converged || stalls >= 30) break;
  }

  if (opts.polish) polish_free_set(table, w, mass, ub, rho, energy, phi);
  if (energy < rep.energy_history.back()) rep.energy_history.push_back(energy);

  rep.kkt_residual = kkt_residual(rho, w, phi, ub);
  rep.converged = rep.kkt_residual <= opts.kkt_tol;
  rep.iterations = it;
  rep.max_mass_drift = mass_drift;
  rep.density = RadialDensity(std::move(grid), std::move(rho));
  rep.energy = energy;
  return rep;
}

double sample_piecewise(const RadialDensity& rho, double r) {
  const auto& e = rho.grid->edges;
  if (r < e.front() || r >= e.back()) return 0.0;
  const auto it = std::upper_bound(e.begin(), e.end(), r);
  const int idx = std::clamp(static_cast<int>(it - e.begin()) - 1, 0, rho.grid->size() - 1);
  return rho.values[idx];
}

void fill_breakdown(const FlockParams& p, SolveReport& rep) {
  rep.breakdown.repulsive = interaction_energy(rep.density, PowerKernel{-p.lambda});
  rep.breakdown.attractive = interaction_energy(rep.density, PowerKernel{p.alpha});
  rep.breakdown.total = rep.breakdown.repulsive + rep.breakdown.attractive;
  rep.energy = rep.breakdown.total;
}

}  // namespace

EnergyBreakdown flock_energy(const RadialDensity& rho, const FlockParams& params) {
  check_flock(params);
  if (rho.sup() > 1.0 + 1e-9)
    throw std::invalid_argument("flock_energy: density exceeds the height bound 1");
  const double m = rho.mass();
  if (std::abs(m - params.mass) > 1e-6 * std::max(1.0, std::abs(params.mass)))
    throw std::invalid_argument("flock_energy: density mass does not match params.mass");
  EnergyBreakdown out;
  out.repulsive = interaction_energy(rho, PowerKernel{-params.lambda});
  out.attractive = interaction_energy(rho, PowerKernel{params.alpha});
  out.total = out.repulsive + out.attractive;
  return out;
}

RadialDensity ball_indicator(std::shared_ptr<const RadialGrid> grid, double mass) {
  if (!grid) throw std::invalid_argument("ball_indicator: null grid");
  const int n = grid->size();
  std::vector<double> v(n, 0.0);
  double cum = 0.0;
  for (int i = 0; i < n; ++i) {
    const double wi = grid->w[i];
    if (cum + wi <= mass) {
      v[i] = 1.0;
      cum += wi;
    } else {
      v[i] = (mass - cum) / wi;
      cum = mass;
      break;
    }
  }
  if (mass - cum > 1e-9 * std::max(1.0, mass))
    throw std::invalid_argument("ball_indicator: mass exceeds the grid capacity");
  return RadialDensity(std::move(grid), std::move(v));
}

SolveReport minimize_flock(const FlockParams& params, InitPolicy init,
                           const FlockOptions& options) {
  check_flock(params);
  if (options.grid_n < 8) throw std::invalid_argument("minimize_flock: grid_n too small");
  const double rmax =
      options.rmax > 0.0 ? options.rmax : 3.0 * ball_radius(params.dim, params.mass);
  auto grid = make_radial_grid(params.dim, rmax, options.grid_n);

  double capacity = 0.0;
  for (double wi : grid->w) capacity += wi;
  if (params.mass > capacity * (1.0 + 1e-12))
    throw std::invalid_argument("minimize_flock: mass exceeds the domain capacity");
  if (params.mass < grid->w[0])
    throw std::invalid_argument(
        "minimize_flock: mass is below the innermost cell capacity; increase grid_n or shrink rmax");

  const auto table = summed_table(grid, params.lambda, params.alpha);
  const int n = grid->size();

  std::vector<InitPolicy> menu;
  if (init == InitPolicy::Best)
    menu = {InitPolicy::Ball, InitPolicy::Measure, InitPolicy::Uniform};
  else
    menu = {init};

  SolveReport best;
  bool have = false;
  for (InitPolicy pol : menu) {
    std::vector<double> start(n, 0.0);
    if (pol == InitPolicy::Ball) {
      start = ball_indicator(grid, params.mass).values;
    } else if (pol == InitPolicy::Uniform) {
      start.assign(n, params.mass / capacity);
    } else {
      FlockOptions mopts = options;
      mopts.rmax = 0.0;
      mopts.polish = false;
      const SolveReport msol = minimize_measure(params.dim, params.lambda, params.alpha, mopts);
      for (int i = 0; i < n; ++i)
        start[i] = params.mass * sample_piecewise(msol.density, grid->r[i]);
    }
    SolveReport rep = run_quadratic_pgd(grid, table, params.mass, 1.0, std::move(start), options);
    if (!have || rep.energy < best.energy) {
      best = std::move(rep);
      have = true;
    }
  }
  fill_breakdown(params, best);
  return best;
}

SolveReport minimize_measure(int dim, double lambda, double alpha,
                             const FlockOptions& options) {
  FlockParams p{dim, lambda, alpha, 1.0};
  check_flock(p);
  const double rmax = options.rmax > 0.0 ? options.rmax : 3.0 * ball_radius(dim, 1.0);
  auto grid = make_radial_grid(dim, rmax, options.grid_n);
  const auto table = summed_table(grid, lambda, alpha);
  const int n = grid->size();
  double capacity = 0.0;
  for (double wi : grid->w) capacity += wi;

  SolveReport best;
  bool have = false;
  for (int which = 0; which < 2; ++which) {
    std::vector<double> start;
    if (which == 0) start = ball_indicator(grid, 1.0).values;
    else start.assign(n, 1.0 / capacity);
    SolveReport rep = run_quadratic_pgd(grid, table, 1.0, kInf, std::move(start), options);
    if (!have || rep.energy < best.energy) {
      best = std::move(rep);
      have = true;
    }
  }
  fill_breakdown(p, best);
  return best;
}

PhaseLabel classify_phase(const RadialDensity& rho, double tol) {
  if (!(tol > 0.0) || !(tol < 0.5)) throw std::invalid_argument("classify_phase: tol out of range");
  PhaseLabel out;
  const auto& g = *rho.grid;
  double mass = 0.0;
  double support_radius = 0.0;
  int last_plateau = -1;
  for (int i = 0; i < g.size(); ++i) {
    const double v = rho.values[i];
    out.max_rho = std::max(out.max_rho, v);
    mass += g.w[i] * v;
    if (v > tol) {
      out.support_measure += g.w[i];
      support_radius = g.edges[i + 1];
    }
    if (v >= 1.0 - tol) {
      out.plateau_measure += g.w[i];
      last_plateau = i;
    }
    if (v > tol && v < 1.0 - tol) out.band_measure += g.w[i];
  }
  out.support_radius = support_radius;
  // A sharp interface lands inside at most a couple of cells however the
  // support cuts the grid; that strip does not count against Solid.
  double excess_band = 0.0;
  for (int i = 0; i < g.size(); ++i) {
    const double v = rho.values[i];
    if (v > tol && v < 1.0 - tol && (i <= last_plateau || i > last_plateau + 2))
      excess_band += g.w[i];
  }
  if (out.max_rho <= 1.0 - tol) out.phase = Phase::Liquid;
  else if (out.plateau_measure > 0.0 && excess_band <= 1e-3 * std::max(mass, 1e-300))
    out.phase = Phase::Solid;
  else
    out.phase = Phase::Intermediate;
  return out;
}

}  // namespace meanfield
