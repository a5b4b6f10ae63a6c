// meanfield: command-line front end for the mean-field variational models.
//
// Every subcommand builds one flat result record; --json prints it as a single
// JSON object, otherwise it is printed as `key = value` lines. Both printers
// read the same record, so the numbers agree bit for bit.
//
// Exit codes: 0 success, 2 validation or usage error, 3 solver did not
// converge (the partial result is still printed).

#include <charconv>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "meanfield/flocking.hpp"
#include "meanfield/keller_segel.hpp"
#include "meanfield/kernels.hpp"
#include "meanfield/liquid_drop.hpp"
#include "meanfield/oracles.hpp"
#include "meanfield/radial_grid.hpp"
#include "meanfield/sweep.hpp"
#include "meanfield/version.hpp"

namespace {

using nlohmann::ordered_json;

// Shortest decimal string that parses back to the same double.
std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string scalar_to_string(const ordered_json& v) {
  switch (v.type()) {
    case ordered_json::value_t::number_float:
      return format_double(v.get<double>());
    case ordered_json::value_t::number_integer:
      return std::to_string(v.get<long long>());
    case ordered_json::value_t::number_unsigned:
      return std::to_string(v.get<unsigned long long>());
    case ordered_json::value_t::boolean:
      return v.get<bool>() ? "true" : "false";
    case ordered_json::value_t::string:
      return v.get<std::string>();
    case ordered_json::value_t::null:
      return "none";
    default:
      return v.dump();
  }
}

void print_human(const ordered_json& obj, const std::string& prefix) {
  for (const auto& item : obj.items()) {
    std::string key = prefix.empty() ? item.key() : prefix + "." + item.key();
    if (item.value().is_object()) {
      print_human(item.value(), key);
    } else {
      std::printf("%s = %s\n", key.c_str(), scalar_to_string(item.value()).c_str());
    }
  }
}

struct CliState {
  bool json = false;
  ordered_json out = ordered_json::object();
  int code = 0;
};

const char* phase_name(meanfield::Phase p) {
  switch (p) {
    case meanfield::Phase::Liquid: return "Liquid";
    case meanfield::Phase::Intermediate: return "Intermediate";
    case meanfield::Phase::Solid: return "Solid";
  }
  return "Liquid";
}

// Profile CSV: one header comment carrying the grid parameters, a column
// line, then one row per cell. Loading rebuilds the grid from the header.
void save_profile(const std::string& path, const meanfield::RadialDensity& rho) {
  const auto& g = *rho.grid;
  std::ofstream f(path);
  if (!f) throw std::invalid_argument("cannot open profile file for writing: " + path);
  f << "# meanfield-profile dim=" << g.dim << " n=" << g.size()
    << " rmax=" << format_double(g.rmax) << "\n";
  f << "r,weight,rho\n";
  for (int i = 0; i < g.size(); ++i) {
    f << format_double(g.r[i]) << ',' << format_double(g.w[i]) << ','
      << format_double(rho.values[i]) << "\n";
  }
  if (!f) throw std::invalid_argument("failed writing profile file: " + path);
}

meanfield::RadialDensity load_profile(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::invalid_argument("cannot open profile file: " + path);
  std::string line;
  if (!std::getline(f, line)) throw std::invalid_argument("empty profile file: " + path);
  int dim = 0, n = 0;
  double rmax = 0.0;
  if (std::sscanf(line.c_str(), "# meanfield-profile dim=%d n=%d rmax=%lf", &dim, &n,
                  &rmax) != 3) {
    throw std::invalid_argument("profile header must be '# meanfield-profile dim=.. n=.. rmax=..'");
  }
  if (!std::getline(f, line) || line != "r,weight,rho") {
    throw std::invalid_argument("profile column line must be 'r,weight,rho'");
  }
  auto grid = meanfield::make_radial_grid(dim, rmax, n);
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(n));
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    double r = 0.0, w = 0.0, v = 0.0;
    if (std::sscanf(line.c_str(), "%lf,%lf,%lf", &r, &w, &v) != 3) {
      throw std::invalid_argument("malformed profile row: " + line);
    }
    values.push_back(v);
  }
  if (static_cast<int>(values.size()) != n) {
    throw std::invalid_argument("profile row count does not match its header n");
  }
  return meanfield::RadialDensity(grid, std::move(values));
}

void add_phase_fields(ordered_json& out, const meanfield::PhaseLabel& label) {
  out["phase"] = phase_name(label.phase);
  out["max_rho"] = label.max_rho;
  out["plateau_measure"] = label.plateau_measure;
  out["band_measure"] = label.band_measure;
  out["support_measure"] = label.support_measure;
  out["support_radius"] = label.support_radius;
}

void add_report_fields(ordered_json& out, const meanfield::SolveReport& report) {
  out["iterations"] = report.iterations;
  out["kkt_residual"] = report.kkt_residual;
  out["max_mass_drift"] = report.max_mass_drift;
  out["converged"] = report.converged;
}

}  // namespace

int main(int argc, char** argv) {
  CliState st;
  CLI::App app{"Mean-field variational models: liquid drop, flocking, Keller-Segel"};
  app.set_version_flag("--version", MEANFIELD_VERSION_STRING);
  app.add_flag("--json", st.json, "Emit one JSON object instead of key = value lines");
  app.require_subcommand(1);
  app.fallthrough();

  auto* gld = app.add_subcommand("gld", "Generalized liquid drop model");
  auto* flock = app.add_subcommand("flock", "Flocking model");
  auto* gks = app.add_subcommand("gks", "Generalized Keller-Segel model");
  auto* sweep = app.add_subcommand("sweep", "Parameter sweeps and transition bisection");
  auto* oracle = app.add_subcommand("oracle", "Independent numerical oracles");
  for (auto* group : {gld, flock, gks, sweep, oracle}) {
    group->require_subcommand(1);
    group->fallthrough();
  }

  // gld ball-energy
  {
    auto* c = gld->add_subcommand("ball-energy", "Energy of the single ball");
    auto dim = std::make_shared<int>(3);
    auto lambda = std::make_shared<double>(1.0);
    auto mass = std::make_shared<double>(1.0);
    auto i_ball = std::make_shared<double>(0.0);
    c->add_option("--dim", *dim, "Ambient dimension N");
    c->add_option("--lambda", *lambda, "Riesz repulsion exponent");
    c->add_option("--mass", *mass, "Total mass");
    auto* ib = c->add_option("--i-ball", *i_ball, "Override the unit-ball Riesz constant I_N(lambda)");
    c->fallthrough();
    c->callback([&st, dim, lambda, mass, i_ball, ib] {
      meanfield::GldParams p;
      p.dim = *dim;
      p.lambda = *lambda;
      p.mass = *mass;
      std::optional<double> inject;
      if (ib->count() > 0) inject = *i_ball;
      auto e = meanfield::ball_energy(p, inject);
      st.out["dim"] = p.dim;
      st.out["lambda"] = p.lambda;
      st.out["mass"] = p.mass;
      st.out["i_ball"] = meanfield::unit_ball_riesz(p.dim, p.lambda, inject);
      st.out["perimeter"] = e.perimeter;
      st.out["repulsive"] = e.repulsive;
      st.out["energy"] = e.total;
    });
  }

  // gld thresholds
  {
    auto* c = gld->add_subcommand("thresholds", "Fission mass m_* and stability mass m_c_stab");
    auto dim = std::make_shared<int>(3);
    auto lambda = std::make_shared<double>(1.0);
    auto i_ball = std::make_shared<double>(0.0);
    c->add_option("--dim", *dim, "Ambient dimension N");
    c->add_option("--lambda", *lambda, "Riesz repulsion exponent");
    auto* ib = c->add_option("--i-ball", *i_ball, "Override the unit-ball Riesz constant I_N(lambda)");
    c->fallthrough();
    c->callback([&st, dim, lambda, i_ball, ib] {
      std::optional<double> inject;
      if (ib->count() > 0) inject = *i_ball;
      auto t = meanfield::gld_thresholds(*dim, *lambda, inject);
      st.out["dim"] = *dim;
      st.out["lambda"] = *lambda;
      st.out["i_ball"] = meanfield::unit_ball_riesz(*dim, *lambda, inject);
      st.out["m_star"] = t.m_star;
      st.out["m_c_stab"] = t.m_c_stab;
    });
  }

  // gld solve-1d
  {
    auto* c = gld->add_subcommand("solve-1d", "Exact 1d minimizer over equal-interval splits");
    auto lambda = std::make_shared<double>(0.5);
    auto mass = std::make_shared<double>(1.0);
    c->add_option("--lambda", *lambda, "Riesz repulsion exponent, in (0, 1)");
    c->add_option("--mass", *mass, "Total mass");
    c->fallthrough();
    c->callback([&st, lambda, mass] {
      auto r = meanfield::solve_1d(*lambda, *mass);
      st.out["lambda"] = *lambda;
      st.out["mass"] = *mass;
      st.out["energy"] = r.energy;
      st.out["k"] = r.k_opt;
      st.out["piece_mass"] = r.piece_mass;
    });
  }

  // gld charmstar
  {
    auto* c = gld->add_subcommand("charmstar", "Sign of E(ball m) - 2 E(ball m/2)");
    auto dim = std::make_shared<int>(3);
    auto lambda = std::make_shared<double>(1.0);
    auto mass = std::make_shared<double>(1.0);
    auto i_ball = std::make_shared<double>(0.0);
    c->add_option("--dim", *dim, "Ambient dimension N");
    c->add_option("--lambda", *lambda, "Riesz repulsion exponent");
    c->add_option("--mass", *mass, "Mass at which the sign is evaluated");
    auto* ib = c->add_option("--i-ball", *i_ball, "Override the unit-ball Riesz constant I_N(lambda)");
    c->fallthrough();
    c->callback([&st, dim, lambda, mass, i_ball, ib] {
      std::optional<double> inject;
      if (ib->count() > 0) inject = *i_ball;
      auto sign = meanfield::charmstar_sign(*dim, *lambda, *mass, inject);
      meanfield::GldParams whole{*dim, *lambda, *mass};
      meanfield::GldParams half{*dim, *lambda, *mass / 2.0};
      double gap = meanfield::ball_energy(whole, inject).total -
                   2.0 * meanfield::ball_energy(half, inject).total;
      st.out["dim"] = *dim;
      st.out["lambda"] = *lambda;
      st.out["mass"] = *mass;
      st.out["split_gap"] = gap;
      st.out["sign"] = sign == meanfield::SplitSign::Negative   ? "Negative"
                       : sign == meanfield::SplitSign::Positive ? "Positive"
                                                                : "Zero";
    });
  }

  // flock minimize
  {
    auto* c = flock->add_subcommand("minimize", "Minimize over densities 0 <= rho <= 1 of fixed mass");
    auto dim = std::make_shared<int>(3);
    auto lambda = std::make_shared<double>(1.0);
    auto alpha = std::make_shared<double>(2.0);
    auto mass = std::make_shared<double>(1.0);
    auto opts = std::make_shared<meanfield::FlockOptions>();
    auto init = std::make_shared<std::string>("best");
    auto save = std::make_shared<std::string>();
    auto no_polish = std::make_shared<bool>(false);
    c->add_option("--dim", *dim, "Ambient dimension N");
    c->add_option("--lambda", *lambda, "Riesz repulsion exponent, in (0, N)");
    c->add_option("--alpha", *alpha, "Attraction power, > 0");
    c->add_option("--mass", *mass, "Total mass");
    c->add_option("--grid-n", opts->grid_n, "Radial cells");
    c->add_option("--rmax", opts->rmax, "Domain radius (<= 0: automatic)");
    c->add_option("--max-iter", opts->max_iter, "Iteration cap");
    c->add_option("--tol", opts->kkt_tol, "KKT residual tolerance");
    c->add_option("--init", *init, "Initial density: ball | measure | uniform | best")
        ->check(CLI::IsMember({"ball", "measure", "uniform", "best"}));
    c->add_flag("--no-polish", *no_polish, "Skip the exact free-set stationarity solve");
    c->add_option("--save-profile", *save, "Write the minimizer as a profile CSV");
    c->fallthrough();
    c->callback([&st, dim, lambda, alpha, mass, opts, init, save, no_polish] {
      meanfield::FlockParams p;
      p.dim = *dim;
      p.lambda = *lambda;
      p.alpha = *alpha;
      p.mass = *mass;
      opts->polish = !*no_polish;
      meanfield::InitPolicy policy = meanfield::InitPolicy::Best;
      if (*init == "ball") policy = meanfield::InitPolicy::Ball;
      if (*init == "measure") policy = meanfield::InitPolicy::Measure;
      if (*init == "uniform") policy = meanfield::InitPolicy::Uniform;
      auto rep = meanfield::minimize_flock(p, policy, *opts);
      st.out["dim"] = p.dim;
      st.out["lambda"] = p.lambda;
      st.out["alpha"] = p.alpha;
      st.out["mass"] = p.mass;
      st.out["grid_n"] = static_cast<int>(rep.density.grid->size());
      st.out["rmax"] = rep.density.grid->rmax;
      st.out["energy"] = rep.energy;
      st.out["repulsive"] = rep.breakdown.repulsive;
      st.out["attractive"] = rep.breakdown.attractive;
      add_report_fields(st.out, rep);
      add_phase_fields(st.out, meanfield::classify_phase(rep.density));
      if (!save->empty()) {
        save_profile(*save, rep.density);
        st.out["profile"] = *save;
      }
      if (!rep.converged) st.code = 3;
    });
  }

  // flock measure
  {
    auto* c = flock->add_subcommand("measure", "Minimize over probability measures (no height bound)");
    auto dim = std::make_shared<int>(3);
    auto lambda = std::make_shared<double>(1.0);
    auto alpha = std::make_shared<double>(2.0);
    auto opts = std::make_shared<meanfield::FlockOptions>();
    auto save = std::make_shared<std::string>();
    c->add_option("--dim", *dim, "Ambient dimension N");
    c->add_option("--lambda", *lambda, "Riesz repulsion exponent, in (0, N)");
    c->add_option("--alpha", *alpha, "Attraction power, > 0");
    c->add_option("--grid-n", opts->grid_n, "Radial cells");
    c->add_option("--rmax", opts->rmax, "Domain radius (<= 0: automatic)");
    c->add_option("--max-iter", opts->max_iter, "Iteration cap");
    c->add_option("--tol", opts->kkt_tol, "KKT residual tolerance");
    c->add_option("--save-profile", *save, "Write the minimizer as a profile CSV");
    c->fallthrough();
    c->callback([&st, dim, lambda, alpha, opts, save] {
      auto rep = meanfield::minimize_measure(*dim, *lambda, *alpha, *opts);
      auto label = meanfield::classify_phase(rep.density);
      st.out["dim"] = *dim;
      st.out["lambda"] = *lambda;
      st.out["alpha"] = *alpha;
      st.out["grid_n"] = static_cast<int>(rep.density.grid->size());
      st.out["rmax"] = rep.density.grid->rmax;
      st.out["energy"] = rep.energy;
      st.out["repulsive"] = rep.breakdown.repulsive;
      st.out["attractive"] = rep.breakdown.attractive;
      st.out["sup_rho"] = rep.density.sup();
      st.out["support_radius"] = label.support_radius;
      add_report_fields(st.out, rep);
      if (!save->empty()) {
        save_profile(*save, rep.density);
        st.out["profile"] = *save;
      }
      if (!rep.converged) st.code = 3;
    });
  }

  // flock classify
  {
    auto* c = flock->add_subcommand("classify", "Phase label of a saved or freshly minimized profile");
    auto dim = std::make_shared<int>(3);
    auto lambda = std::make_shared<double>(1.0);
    auto alpha = std::make_shared<double>(2.0);
    auto mass = std::make_shared<double>(1.0);
    auto tol = std::make_shared<double>(1e-3);
    auto profile = std::make_shared<std::string>();
    auto opts = std::make_shared<meanfield::FlockOptions>();
    c->add_option("--profile", *profile, "Profile CSV to classify (skips the solve)");
    c->add_option("--dim", *dim, "Ambient dimension N");
    c->add_option("--lambda", *lambda, "Riesz repulsion exponent, in (0, N)");
    c->add_option("--alpha", *alpha, "Attraction power, > 0");
    c->add_option("--mass", *mass, "Total mass");
    c->add_option("--grid-n", opts->grid_n, "Radial cells");
    c->add_option("--rmax", opts->rmax, "Domain radius (<= 0: automatic)");
    c->add_option("--tol", *tol, "Phase classification tolerance");
    c->fallthrough();
    c->callback([&st, dim, lambda, alpha, mass, tol, profile, opts] {
      if (!profile->empty()) {
        auto rho = load_profile(*profile);
        st.out["profile"] = *profile;
        st.out["mass"] = rho.mass();
        add_phase_fields(st.out, meanfield::classify_phase(rho, *tol));
        return;
      }
      meanfield::FlockParams p;
      p.dim = *dim;
      p.lambda = *lambda;
      p.alpha = *alpha;
      p.mass = *mass;
      auto rep = meanfield::minimize_flock(p, meanfield::InitPolicy::Best, *opts);
      st.out["dim"] = p.dim;
      st.out["lambda"] = p.lambda;
      st.out["alpha"] = p.alpha;
      st.out["mass"] = p.mass;
      st.out["energy"] = rep.energy;
      st.out["converged"] = rep.converged;
      add_phase_fields(st.out, meanfield::classify_phase(rep.density, *tol));
      if (!rep.converged) st.code = 3;
    });
  }

  // gks verdict
  {
    auto* c = gks->add_subcommand("verdict", "Finiteness and conformal regime of the infimum");
    auto dim = std::make_shared<int>(3);
    auto q = std::make_shared<double>(0.7);
    auto alpha = std::make_shared<double>(2.0);
    c->add_option("--dim", *dim, "Ambient dimension N");
    c->add_option("--q", *q, "Entropy exponent, in (0, 1)");
    c->add_option("--alpha", *alpha, "Attraction power, > 0");
    c->fallthrough();
    c->callback([&st, dim, q, alpha] {
      meanfield::GksParams p;
      p.dim = *dim;
      p.q = *q;
      p.alpha = *alpha;
      auto v = meanfield::existence_verdict(p);
      st.out["dim"] = p.dim;
      st.out["q"] = p.q;
      st.out["alpha"] = p.alpha;
      st.out["verdict"] =
          v.verdict == meanfield::GksVerdict::Finite ? "Finite" : "MinusInfinity";
      st.out["regime"] = v.regime == meanfield::GksRegime::Subconformal ? "Subconformal"
                         : v.regime == meanfield::GksRegime::Conformal  ? "Conformal"
                                                                        : "Superconformal";
    });
  }

  // gks exponent
  {
    auto* c = gks->add_subcommand("exponent", "Mass scaling exponent of the ground-state energy");
    auto dim = std::make_shared<int>(3);
    auto q = std::make_shared<double>(0.7);
    auto alpha = std::make_shared<double>(2.0);
    c->add_option("--dim", *dim, "Ambient dimension N");
    c->add_option("--q", *q, "Entropy exponent, in (0, 1)");
    c->add_option("--alpha", *alpha, "Attraction power, > 0");
    c->fallthrough();
    c->callback([&st, dim, q, alpha] {
      meanfield::GksParams p;
      p.dim = *dim;
      p.q = *q;
      p.alpha = *alpha;
      st.out["dim"] = p.dim;
      st.out["q"] = p.q;
      st.out["alpha"] = p.alpha;
      st.out["exponent"] = meanfield::mass_scaling_exponent(p);
    });
  }

  // gks relaxed
  {
    auto* c = gks->add_subcommand("relaxed", "Minimize the relaxed energy over (rho, atom)");
    auto dim = std::make_shared<int>(3);
    auto q = std::make_shared<double>(0.7);
    auto alpha = std::make_shared<double>(2.0);
    auto opts = std::make_shared<meanfield::GksOptions>();
    auto save = std::make_shared<std::string>();
    auto no_multistart = std::make_shared<bool>(false);
    c->add_option("--dim", *dim, "Ambient dimension N");
    c->add_option("--q", *q, "Entropy exponent, in (0, 1)");
    c->add_option("--alpha", *alpha, "Attraction power, > 0");
    c->add_option("--grid-n", opts->grid_n, "Radial cells");
    c->add_option("--rmax", opts->rmax, "Domain radius (<= 0: automatic)");
    c->add_option("--max-iter", opts->max_iter, "Outer iteration cap");
    c->add_option("--tol", opts->kkt_tol, "KKT residual tolerance");
    c->add_option("--atom-tol", opts->atom_tol, "Atom masses at or below this count as zero");
    c->add_flag("--no-multistart", *no_multistart, "Single atom-free run instead of three starts");
    c->add_option("--save-profile", *save, "Write the diffuse part as a profile CSV");
    c->fallthrough();
    c->callback([&st, dim, q, alpha, opts, save, no_multistart] {
      meanfield::GksParams p;
      p.dim = *dim;
      p.q = *q;
      p.alpha = *alpha;
      auto v = meanfield::existence_verdict(p);
      if (v.verdict == meanfield::GksVerdict::MinusInfinity) {
        throw std::invalid_argument("q <= N/(N+alpha): energy is -infinity");
      }
      opts->multistart = !*no_multistart;
      auto outcome = meanfield::minimize_relaxed(p, *opts);
      st.out["dim"] = p.dim;
      st.out["q"] = p.q;
      st.out["alpha"] = p.alpha;
      st.out["grid_n"] = static_cast<int>(outcome.state.rho.grid->size());
      st.out["rmax"] = outcome.state.rho.grid->rmax;
      st.out["atom"] = outcome.state.atom;
      st.out["atom_positive"] = outcome.atom_positive;
      st.out["energy"] = outcome.report.energy;
      st.out["entropy"] = outcome.report.breakdown.entropy;
      st.out["attractive"] = outcome.report.breakdown.attractive;
      st.out["atom_coupling"] = outcome.report.breakdown.atom_coupling;
      st.out["forced_zero_energy"] = outcome.forced_zero_energy;
      add_report_fields(st.out, outcome.report);
      if (!save->empty()) {
        save_profile(*save, outcome.state.rho);
        st.out["profile"] = *save;
      }
      if (!outcome.report.converged) st.code = 3;
    });
  }

  // gks alpha2
  {
    auto* c = gks->add_subcommand("alpha2", "Exact stationary profile for alpha = 2");
    auto dim = std::make_shared<int>(3);
    auto q = std::make_shared<double>(0.8);
    auto grid_n = std::make_shared<int>(1024);
    auto rmax = std::make_shared<double>(0.0);
    auto save = std::make_shared<std::string>();
    c->add_option("--dim", *dim, "Ambient dimension N");
    c->add_option("--q", *q, "Entropy exponent, in (N/(N+2), 1)");
    c->add_option("--grid-n", *grid_n, "Radial cells");
    c->add_option("--rmax", *rmax, "Domain radius (<= 0: automatic)");
    c->add_option("--save-profile", *save, "Write the profile as a CSV");
    c->fallthrough();
    c->callback([&st, dim, q, grid_n, rmax, save] {
      auto rho = meanfield::alpha2_exact_profile(*dim, *q, *grid_n, *rmax);
      meanfield::GksParams p;
      p.dim = *dim;
      p.q = *q;
      p.alpha = 2.0;
      auto e = meanfield::gks_energy(rho, p);
      st.out["dim"] = *dim;
      st.out["q"] = *q;
      st.out["grid_n"] = static_cast<int>(rho.grid->size());
      st.out["rmax"] = rho.grid->rmax;
      st.out["mass"] = rho.mass();
      st.out["sup_rho"] = rho.sup();
      st.out["energy"] = e.total;
      st.out["entropy"] = e.entropy;
      st.out["attractive"] = e.attractive;
      if (!save->empty()) {
        save_profile(*save, rho);
        st.out["profile"] = *save;
      }
    });
  }

  // gks alpha4-threshold
  {
    auto* c = gks->add_subcommand("alpha4-threshold", "Concentration threshold in q for alpha = 4");
    auto dim = std::make_shared<int>(6);
    c->add_option("--dim", *dim, "Ambient dimension N");
    c->fallthrough();
    c->callback([&st, dim] {
      auto t = meanfield::alpha4_threshold(*dim);
      st.out["dim"] = *dim;
      if (t) {
        st.out["q_threshold"] = *t;
      } else {
        st.out["q_threshold"] = nullptr;
      }
    });
  }

  // sweep run
  {
    auto* c = sweep->add_subcommand("run", "Run a sweep config, resuming an existing CSV");
    auto config = std::make_shared<std::string>();
    auto threads = std::make_shared<int>(0);
    c->add_option("--config", *config, "key = value sweep config file")->required();
    auto* th = c->add_option("--threads", *threads, "Worker threads (overrides the config)");
    c->fallthrough();
    c->callback([&st, config, threads, th] {
      auto cfg = meanfield::parse_sweep_config(*config);
      if (th->count() > 0) cfg.threads = *threads;
      auto outcome = meanfield::run_sweep(cfg);
      st.out["model"] = cfg.model;
      st.out["swept"] = cfg.swept;
      st.out["total_points"] = outcome.total_points;
      st.out["newly_computed"] = outcome.newly_computed;
      st.out["skipped_existing"] = outcome.skipped_existing;
      st.out["csv"] = outcome.csv_path;
      st.out["manifest"] = outcome.manifest_path;
      st.out["options_hash"] = meanfield::sweep_options_hash(cfg);
    });
  }

  // sweep bisect
  {
    auto* c = sweep->add_subcommand("bisect", "Bisect a predicate transition in one parameter");
    auto config = std::make_shared<std::string>();
    auto swept = std::make_shared<std::string>();
    auto predicate = std::make_shared<std::string>();
    auto lo = std::make_shared<double>(0.0);
    auto hi = std::make_shared<double>(0.0);
    auto tol = std::make_shared<double>(1e-3);
    c->add_option("--config", *config, "key = value sweep config file")->required();
    c->add_option("--swept", *swept, "Parameter to bisect on")->required();
    c->add_option("--lo", *lo, "Lower bracket end")->required();
    c->add_option("--hi", *hi, "Upper bracket end")->required();
    c->add_option("--predicate", *predicate,
                  "k_opt_gt_1 | charmstar_positive | phase_solid | atom_positive")
        ->required();
    c->add_option("--tol", *tol, "Bracket half-width target");
    c->fallthrough();
    c->callback([&st, config, swept, predicate, lo, hi, tol] {
      auto cfg = meanfield::parse_sweep_config(*config);
      auto r = meanfield::bisect_transition(cfg, *swept, *lo, *hi, *predicate, *tol);
      st.out["model"] = cfg.model;
      st.out["swept"] = *swept;
      st.out["predicate"] = *predicate;
      st.out["critical"] = r.critical;
      st.out["half_width"] = r.half_width;
      st.out["evaluations"] = r.evaluations;
    });
  }

  // oracle mc
  {
    auto* c = oracle->add_subcommand("mc", "Monte Carlo double integral over a constant ball");
    auto dim = std::make_shared<int>(3);
    auto power = std::make_shared<double>(-1.0);
    auto radius = std::make_shared<double>(1.0);
    auto height = std::make_shared<double>(1.0);
    auto cfg = std::make_shared<meanfield::McConfig>();
    c->add_option("--dim", *dim, "Ambient dimension N");
    c->add_option("--power", *power, "Kernel power p in |x-y|^p, p > -N/2");
    c->add_option("--radius", *radius, "Ball radius");
    c->add_option("--height", *height, "Constant density height");
    c->add_option("--samples", cfg->samples, "Sample pairs");
    c->add_option("--seed", cfg->seed, "RNG seed");
    c->fallthrough();
    c->callback([&st, dim, power, radius, height, cfg] {
      auto est = meanfield::mc_double_integral_ball(*dim, *radius, *height,
                                                    meanfield::PowerKernel{*power}, *cfg);
      st.out["dim"] = *dim;
      st.out["power"] = *power;
      st.out["radius"] = *radius;
      st.out["height"] = *height;
      st.out["value"] = est.value;
      st.out["std_error"] = est.std_error;
      st.out["samples"] = est.samples;
      st.out["seed"] = est.seed;
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }

  if (st.json) {
    std::printf("%s\n", st.out.dump(2).c_str());
  } else {
    print_human(st.out, "");
  }
  return st.code;
}
