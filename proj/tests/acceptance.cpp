// End-to-end acceptance checks. Each criterion prints one PASS/FAIL line with
// its wall time; the process exits nonzero when any criterion fails.

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <limits>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "meanfield/flocking.hpp"
#include "meanfield/keller_segel.hpp"
#include "meanfield/kernels.hpp"
#include "meanfield/liquid_drop.hpp"
#include "meanfield/oracles.hpp"
#include "meanfield/projection.hpp"
#include "meanfield/sweep.hpp"

using namespace meanfield;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

struct Check {
  bool ok = true;
  std::string detail;

  void expect(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      if (!detail.empty()) detail += "; ";
      detail += what;
    }
  }
};

template <typename F>
void criterion(int number, const char* name, double budget_s, F&& body) {
  Check c;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    body(c);
  } catch (const std::exception& e) {
    c.expect(false, std::string("exception: ") + e.what());
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  c.expect(secs < budget_s, "over time budget");
  std::printf("[%s] %d %s (%.1f s)%s%s\n", c.ok ? "PASS" : "FAIL", number, name,
              secs, c.detail.empty() ? "" : " -- ", c.detail.c_str());
  std::fflush(stdout);
  if (!c.ok) ++g_failures;
}

nlohmann::json run_cli_json(const std::string& args, Check& c) {
  const std::string cmd = std::string(MEANFIELD_CLI_PATH) + " " + args +
                          " --json 2>/dev/null";
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) {
    c.expect(false, "popen failed");
    return nlohmann::json::object();
  }
  std::string out;
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) out.append(buf, n);
  const int rc = pclose(pipe);
  c.expect(WIFEXITED(rc) && WEXITSTATUS(rc) == 0, "cli exit != 0 for: " + args);
  auto j = nlohmann::json::parse(out, nullptr, false);
  if (j.is_discarded()) {
    c.expect(false, "cli output is not JSON for: " + args);
    return nlohmann::json::object();
  }
  return j;
}

double rel_err(double got, double want) {
  return std::fabs(got - want) / std::fabs(want);
}

// Closed form for the two-endpoint interval model: the unit interval constant
// I_1(lambda) and the mass where one interval ties with two half-mass ones.
double interval_riesz(double lambda) {
  return std::pow(2.0, 2.0 - lambda) / ((1.0 - lambda) * (2.0 - lambda));
}

double interval_split_mass(double lambda) {
  const double i1 = interval_riesz(lambda);
  const double base = 2.0 / (i1 * (1.0 - std::pow(2.0, lambda - 1.0)));
  return 2.0 * std::pow(base, 1.0 / (2.0 - lambda));
}

double quantile_by_mass(const RadialDensity& rho, double level) {
  std::vector<std::pair<double, double>> cells;
  double total = 0.0;
  for (std::size_t i = 0; i < rho.values.size(); ++i) {
    const double m = rho.grid->w[i] * rho.values[i];
    if (m > 0.0) {
      cells.push_back(std::make_pair(rho.values[i], m));
      total += m;
    }
  }
  std::sort(cells.begin(), cells.end());
  double acc = 0.0;
  for (const auto& cell : cells) {
    acc += cell.second;
    if (acc >= level * total) return cell.first;
  }
  return cells.empty() ? 0.0 : cells.back().first;
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("meanfield-acceptance-" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

const double kCoulombBall = 16.0 * M_PI * M_PI / 15.0;

void fission_mass_three_d(Check& c) {
  const double exact = 5.0 * (std::cbrt(2.0) - 1.0) /
                       (1.0 - std::pow(2.0, -2.0 / 3.0));
  auto quad = run_cli_json("gld thresholds --dim 3 --lambda 1", c);
  c.expect(rel_err(quad["m_star"].get<double>(), exact) < 1e-3,
           "quadrature m_star off");
  auto inj = run_cli_json(
      "gld thresholds --dim 3 --lambda 1 --i-ball 10.527578027828649", c);
  c.expect(rel_err(inj["m_star"].get<double>(), exact) < 1e-9,
           "injected m_star off");
}

void stability_mass_three_d(Check& c) {
  auto quad = run_cli_json("gld thresholds --dim 3 --lambda 1", c);
  c.expect(rel_err(quad["m_c_stab"].get<double>(), 10.0) < 1e-3,
           "quadrature m_c_stab off");
  auto inj = run_cli_json(
      "gld thresholds --dim 3 --lambda 1 --i-ball 10.527578027828649", c);
  c.expect(rel_err(inj["m_c_stab"].get<double>(), 10.0) < 1e-12,
           "injected m_c_stab off");
}

void one_d_concordance(Check& c) {
  for (double lambda = 0.05; lambda < 0.96; lambda += 0.15) {
    const double closed = interval_split_mass(lambda);
    const double formula = gld_thresholds(1, lambda).m_star;
    c.expect(rel_err(formula, closed) < 1e-9, "formula vs closed form");

    double lo = 0.5 * closed, hi = 1.5 * closed;
    c.expect(solve_1d(lambda, lo).k_opt == 1, "k_opt at lo");
    c.expect(solve_1d(lambda, hi).k_opt >= 2, "k_opt at hi");
    while (hi - lo > 1e-4) {
      const double mid = 0.5 * (lo + hi);
      (solve_1d(lambda, mid).k_opt == 1 ? lo : hi) = mid;
    }
    c.expect(std::fabs(0.5 * (lo + hi) - closed) < 2e-4, "k flip location");
  }
}

void quartic_concentration_sweep(Check& c) {
  TempDir tmp;
  SweepConfig cfg;
  cfg.model = "gks";
  cfg.swept = "q";
  for (int k = 0; k < 28; ++k) cfg.grid.push_back(0.605 + 0.005 * k);
  cfg.numbers["dim"] = 6;
  cfg.numbers["alpha"] = 4;
  cfg.numbers["grid_n"] = 1024;
  cfg.output = (tmp.path / "quartic.csv").string();
  auto outcome = run_sweep(cfg);
  c.expect(outcome.newly_computed == 28, "sweep did not compute all points");

  std::ifstream in(outcome.csv_path);
  std::string line;
  std::vector<std::string> header;
  std::map<double, std::map<std::string, std::string>> rows;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> parts;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) parts.push_back(cell);
    if (header.empty()) {
      header = parts;
      continue;
    }
    std::map<std::string, std::string> row;
    for (std::size_t i = 0; i < header.size() && i < parts.size(); ++i)
      row[header[i]] = parts[i];
    rows[std::stod(row.at("param"))] = row;
  }
  c.expect(rows.size() == 28, "row count");

  double last_positive = 0.0, first_zero = 1.0;
  for (const auto& [q, row] : rows) {
    c.expect(row.at("status") == "ok", "point failed at q=" + std::to_string(q));
    if (row.at("atom_positive") == "1")
      last_positive = std::max(last_positive, q);
    else
      first_zero = std::min(first_zero, q);
  }
  const double threshold = 11.0 / 18.0;
  c.expect(last_positive >= threshold - 0.02, "transition too low");
  c.expect(first_zero <= threshold + 0.02, "transition too high");
  c.expect(last_positive < first_zero, "atom positivity is not monotone");
  // cfg.grid[0] is q = 0.605 and cfg.grid[9] is q = 0.65, keyed bitwise
  c.expect(std::stod(rows.at(cfg.grid[0]).at("atom_mass")) > 1e-3,
           "atom at q=0.605");
  c.expect(std::stod(rows.at(cfg.grid[9]).at("atom_mass")) <= 1e-3,
           "atom at q=0.65");
}

void quadratic_cross_validation(Check& c) {
  GksParams p;
  p.dim = 3;
  p.q = 0.8;
  p.alpha = 2.0;
  auto out = minimize_relaxed(p);
  c.expect(out.report.converged, "not converged");
  c.expect(out.state.atom <= 1e-3, "spurious atom");
  auto exact = alpha2_exact_profile(3, 0.8, out.state.rho.grid->size(),
                                    out.state.rho.grid->rmax);
  double l1 = 0.0;
  for (std::size_t i = 0; i < exact.values.size(); ++i)
    l1 += exact.grid->w[i] * std::fabs(exact.values[i] - out.state.rho.values[i]);
  c.expect(l1 <= 1e-2, "L1 distance to the exact profile");
}

void flocking_phases(Check& c) {
  FlockOptions o;
  o.grid_n = 512;

  FlockParams big;
  big.mass = 100.0;
  auto solid = minimize_flock(big, InitPolicy::Best, o);
  c.expect(solid.converged, "large mass not converged");
  auto solid_label = classify_phase(solid.density);
  c.expect(solid_label.phase == Phase::Solid, "large mass not solid");
  const double r_exact = std::cbrt(3.0 * big.mass / (4.0 * M_PI));
  const double two_cells =
      2.0 * solid.density.grid->cell_width(solid.density.grid->size() - 1);
  c.expect(std::fabs(solid_label.support_radius - r_exact) <= two_cells,
           "solid support radius");

  FlockParams small;
  small.mass = 1.0;
  auto liquid = minimize_flock(small, InitPolicy::Best, o);
  c.expect(liquid.converged, "small mass not converged");
  auto liquid_label = classify_phase(liquid.density);
  c.expect(liquid_label.phase == Phase::Liquid, "small mass not liquid");

  ScanSpec spec;
  spec.mass = 1.0;
  auto scan = constant_on_ball_scan(spec);
  c.expect(std::fabs(quantile_by_mass(liquid.density, 0.5) - scan.height) <= 1e-2,
           "droplet height vs scan");
  c.expect(std::fabs(liquid_label.support_radius - scan.radius) <= 1e-2,
           "droplet radius vs scan");
  c.expect(std::fabs(quantile_by_mass(liquid.density, 0.1) -
                     quantile_by_mass(liquid.density, 0.9)) <= 1e-2,
           "droplet height not near-constant");
}

void property_suite(Check& c) {
  // mass scaling of every energy term on random densities
  std::mt19937_64 rng(7041776);
  std::uniform_real_distribution<double> um(0.3, 3.0);
  for (int trial = 0; trial < 20; ++trial) {
    const double alpha = (trial % 2 == 0) ? 2.0 : 3.0;
    std::uniform_real_distribution<double> uq(3.0 / (3.0 + alpha) + 0.02, 0.95);
    GksParams p;
    p.dim = 3;
    p.q = uq(rng);
    p.alpha = alpha;
    const double m = um(rng);

    auto g1 = make_radial_grid(3, 4.0, 192);
    std::vector<double> v(g1->size());
    for (int i = 0; i < g1->size(); ++i)
      v[i] = std::exp(-g1->r[i]) * (1.0 + 0.3 * std::sin(3.0 * g1->r[i]));
    RadialDensity rho1(g1, std::move(v));
    const double m1 = rho1.mass();
    for (double& x : rho1.values) x /= m1;
    auto e1 = gks_energy(rho1, p, 1.0);

    const double b = (2.0 - p.q) / (3.0 * p.q - 3.0 + alpha);
    const double a = 1.0 + 3.0 * b;
    auto g2 = make_radial_grid(3, 4.0 * std::pow(m, -b), 192);
    std::vector<double> v2(rho1.values.size());
    for (std::size_t i = 0; i < v2.size(); ++i)
      v2[i] = std::pow(m, a) * rho1.values[i];
    auto e2 = gks_energy(RadialDensity(g2, std::move(v2)), p, m);
    const double scale = std::pow(m, mass_scaling_exponent(p));
    c.expect(rel_err(e2.entropy, scale * e1.entropy) < 1e-6, "entropy scaling");
    c.expect(rel_err(e2.attractive, scale * e1.attractive) < 1e-6,
             "attraction scaling");
  }

  // box-and-mass projection against the exhaustive active-set oracle
  std::uniform_real_distribution<double> ut(-1.0, 2.0);
  std::uniform_real_distribution<double> uw(0.2, 1.5);
  std::uniform_int_distribution<int> un(3, 8);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = un(rng);
    std::vector<double> target(n), w(n);
    double cap = 0.0;
    for (int i = 0; i < n; ++i) {
      target[i] = ut(rng);
      w[i] = uw(rng);
      cap += w[i];
    }
    const double ub =
        (trial % 2 == 0) ? 1.0 : std::numeric_limits<double>::infinity();
    const double frac = 0.1 + 0.8 * (trial % 9) / 9.0;
    const double mass = (ub == 1.0 ? cap : 2.0 * cap) * frac;
    auto fast = bathtub_project(target, w, mass, ub);
    auto brute = brute_force_bathtub(target, w, mass, ub);
    for (int i = 0; i < n; ++i)
      c.expect(std::fabs(fast.values[i] - brute[i]) <= 1e-10,
               "projection mismatch");
  }

  // sampling oracle vs the closed forms and the quadrature path
  McConfig mc;
  mc.samples = 100000;
  auto check_mc = [&](int dim, double pw, double exact, const char* what) {
    auto est = mc_double_integral_ball(dim, 1.0, 1.0, PowerKernel{pw}, mc);
    c.expect(std::fabs(est.value - exact) <= 3.0 * est.std_error, what);
  };
  check_mc(3, -1.0, kCoulombBall, "mc riesz ball");
  check_mc(3, 2.0, kCoulombBall, "mc quadratic ball");
  check_mc(3, 4.0, 64.0 * M_PI * M_PI / 35.0, "mc quartic ball");
  check_mc(1, -0.25, std::pow(2.0, 0.75) * 32.0 / 21.0, "mc interval");
  auto est = mc_double_integral_ball(3, 1.0, 1.0, PowerKernel{-1.0}, mc);
  c.expect(std::fabs(ball_self_energy(3, -1.0) - est.value) <= 3.0 * est.std_error,
           "quadrature vs mc");

  // monotone energy histories and KKT residuals at convergence
  FlockOptions fo;
  fo.grid_n = 128;
  FlockParams fp;
  auto flock = minimize_flock(fp, InitPolicy::Best, fo);
  GksOptions go;
  go.grid_n = 128;
  GksParams gp;
  gp.q = 0.8;
  auto gks = minimize_relaxed(gp, go);
  for (const SolveReport* rep : {&flock, &gks.report}) {
    c.expect(rep->converged, "solver not converged");
    c.expect(rep->kkt_residual < 1e-6, "kkt residual at convergence");
    for (std::size_t i = 1; i < rep->energy_history.size(); ++i)
      c.expect(rep->energy_history[i] <= rep->energy_history[i - 1],
               "energy history not monotone");
  }
}

}  // namespace

int main() {
  setvbuf(stdout, nullptr, _IOLBF, 0);
  criterion(1, "three-dimensional fission mass matches the closed form", 5.0,
            fission_mass_three_d);
  criterion(2, "three-dimensional stability mass equals 10", 5.0,
            stability_mass_three_d);
  criterion(3, "one-dimensional threshold formula concords with direct search",
            1.0, one_d_concordance);
  criterion(4, "quartic attraction concentration transition near q = 11/18",
            1800.0, quartic_concentration_sweep);
  criterion(5, "quadratic attraction minimizer matches the exact profile",
            300.0, quadratic_cross_validation);
  criterion(6, "flocking solid ball at large mass, liquid droplet at small",
            600.0, flocking_phases);
  criterion(7, "scaling, projection, sampling, and optimality properties",
            600.0, property_suite);
  if (g_failures > 0) {
    std::printf("%d criterion(s) failed\n", g_failures);
    return 1;
  }
  std::printf("all criteria passed\n");
  return 0;
}
