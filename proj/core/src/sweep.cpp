#include "meanfield/sweep.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "meanfield/flocking.hpp"
#include "meanfield/keller_segel.hpp"
#include "meanfield/liquid_drop.hpp"
#include "meanfield/parallel.hpp"
#include "meanfield/version.hpp"

namespace meanfield {
namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string fmt17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

double parse_number(const std::string& key, const std::string& text) {
  try {
    std::size_t used = 0;
    double v = std::stod(text, &used);
    if (trim(text.substr(used)).empty()) return v;
  } catch (const std::exception&) {
  }
  throw std::invalid_argument("sweep config: bad number for '" + key + "': " + text);
}

std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> out;
  if (text.find(':') != std::string::npos) {
    std::istringstream in(text);
    std::string a, b, c;
    if (!std::getline(in, a, ':') || !std::getline(in, b, ':') || !std::getline(in, c))
      throw std::invalid_argument("sweep config: grid range needs lo:hi:step");
    double lo = parse_number("grid", a);
    double hi = parse_number("grid", b);
    double step = parse_number("grid", c);
    if (step == 0.0 || (hi - lo) * step < 0.0)
      throw std::invalid_argument("sweep config: grid step has the wrong sign");
    double slack = 1e-9 * std::abs(step);
    for (int i = 0;; ++i) {
      double v = lo + i * step;
      if ((step > 0.0 && v > hi + slack) || (step < 0.0 && v < hi - slack)) break;
      out.push_back(v);
      if (i > 1000000) throw std::invalid_argument("sweep config: grid too large");
    }
  } else {
    std::istringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
      item = trim(item);
      if (!item.empty()) out.push_back(parse_number("grid", item));
    }
  }
  if (out.empty()) throw std::invalid_argument("sweep config: empty grid");
  for (std::size_t i = 1; i < out.size(); ++i) {
    if ((out[i] - out[i - 1]) * (out[1] - out[0]) <= 0.0)
      throw std::invalid_argument("sweep config: grid must be strictly monotone");
  }
  return out;
}

const std::set<std::string>& swept_keys(const std::string& model) {
  static const std::set<std::string> gld = {"lambda", "mass"};
  static const std::set<std::string> flock = {"lambda", "alpha", "mass"};
  static const std::set<std::string> gks = {"q", "alpha"};
  if (model == "gld1d" || model == "gld") return gld;
  if (model == "flock") return flock;
  if (model == "gks") return gks;
  throw std::invalid_argument("sweep config: unknown model '" + model + "'");
}

void validate_config(const SweepConfig& config) {
  const auto& keys = swept_keys(config.model);
  if (!keys.count(config.swept))
    throw std::invalid_argument("sweep config: cannot sweep '" + config.swept +
                                "' for model " + config.model);
}

double getd(const std::map<std::string, double>& m, const std::string& key,
            double fallback) {
  auto it = m.find(key);
  return it == m.end() ? fallback : it->second;
}

int geti(const std::map<std::string, double>& m, const std::string& key, int fallback) {
  auto it = m.find(key);
  if (it == m.end()) return fallback;
  double v = it->second;
  if (v != std::floor(v) || std::abs(v) > 1e9)
    throw std::invalid_argument("sweep config: '" + key + "' must be an integer");
  return static_cast<int>(v);
}

std::optional<double> get_opt(const std::map<std::string, double>& m,
                              const std::string& key) {
  auto it = m.find(key);
  if (it == m.end()) return std::nullopt;
  return it->second;
}

std::string sanitize_status(const std::string& s) {
  std::string out = s;
  for (char& c : out) {
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  }
  return out;
}

const char* sign_name(SplitSign s) {
  switch (s) {
    case SplitSign::Negative: return "negative";
    case SplitSign::Zero: return "zero";
    default: return "positive";
  }
}

const char* phase_name(Phase p) {
  switch (p) {
    case Phase::Liquid: return "liquid";
    case Phase::Intermediate: return "intermediate";
    default: return "solid";
  }
}

void eval_gld1d(const std::map<std::string, double>& num, SweepRow& row) {
  Solve1dResult res = solve_1d(getd(num, "lambda", 0.5), getd(num, "mass", 1.0));
  row.cells["energy"] = fmt17(res.energy);
  row.cells["k_opt"] = std::to_string(res.k_opt);
  row.cells["piece_mass"] = fmt17(res.piece_mass);
}

void eval_gld(const std::map<std::string, double>& num, SweepRow& row) {
  GldParams params;
  params.dim = geti(num, "dim", 3);
  params.lambda = getd(num, "lambda", 1.0);
  params.mass = getd(num, "mass", 1.0);
  std::optional<double> i_ball = get_opt(num, "i_ball");
  EnergyBreakdown ball = ball_energy(params, i_ball);
  row.cells["perimeter"] = fmt17(ball.perimeter);
  row.cells["repulsive"] = fmt17(ball.repulsive);
  row.cells["total"] = fmt17(ball.total);
  BallSplit half{{params.mass / 2, params.mass / 2}};
  row.cells["split2"] = fmt17(split_energy(params, half, i_ball));
  row.cells["sign"] = sign_name(charmstar_sign(params.dim, params.lambda, params.mass, i_ball));
  GldThresholds th = gld_thresholds(params.dim, params.lambda, i_ball);
  row.cells["m_star"] = fmt17(th.m_star);
  row.cells["m_c_stab"] = fmt17(th.m_c_stab);
}

void eval_flock(const std::map<std::string, double>& num, SweepRow& row) {
  FlockParams params;
  params.dim = geti(num, "dim", 3);
  params.lambda = getd(num, "lambda", 1.0);
  params.alpha = getd(num, "alpha", 2.0);
  params.mass = getd(num, "mass", 1.0);
  FlockOptions options;
  options.grid_n = geti(num, "grid_n", options.grid_n);
  options.rmax = getd(num, "rmax", options.rmax);
  options.max_iter = geti(num, "max_iter", options.max_iter);
  options.kkt_tol = getd(num, "kkt_tol", options.kkt_tol);
  SolveReport report = minimize_flock(params, InitPolicy::Best, options);
  PhaseLabel label = classify_phase(report.density, getd(num, "phase_tol", 1e-3));
  row.cells["energy"] = fmt17(report.energy);
  row.cells["repulsive"] = fmt17(report.breakdown.repulsive);
  row.cells["attractive"] = fmt17(report.breakdown.attractive);
  row.cells["phase"] = phase_name(label.phase);
  row.cells["max_rho"] = fmt17(label.max_rho);
  row.cells["support_radius"] = fmt17(label.support_radius);
  row.cells["kkt"] = fmt17(report.kkt_residual);
  row.cells["converged"] = report.converged ? "1" : "0";
  row.cells["iterations"] = std::to_string(report.iterations);
}

void eval_gks(const std::map<std::string, double>& num, SweepRow& row) {
  GksParams params;
  params.dim = geti(num, "dim", 3);
  params.q = getd(num, "q", 0.7);
  params.alpha = getd(num, "alpha", 2.0);
  GksOptions options;
  options.grid_n = geti(num, "grid_n", options.grid_n);
  options.rmax = getd(num, "rmax", options.rmax);
  options.max_iter = geti(num, "max_iter", options.max_iter);
  options.rho_steps = geti(num, "rho_steps", options.rho_steps);
  options.atom_tol = getd(num, "atom_tol", options.atom_tol);
  options.multistart = getd(num, "multistart", 1.0) != 0.0;
  RelaxedOutcome outcome = minimize_relaxed(params, options);
  row.cells["energy"] = fmt17(outcome.report.energy);
  row.cells["entropy"] = fmt17(outcome.report.breakdown.entropy);
  row.cells["attractive"] = fmt17(outcome.report.breakdown.attractive);
  row.cells["atom_coupling"] = fmt17(outcome.report.breakdown.atom_coupling);
  row.cells["atom_mass"] = fmt17(outcome.state.atom);
  row.cells["atom_positive"] = outcome.atom_positive ? "1" : "0";
  row.cells["kkt"] = fmt17(outcome.report.kkt_residual);
  row.cells["converged"] = outcome.report.converged ? "1" : "0";
  row.cells["iterations"] = std::to_string(outcome.report.iterations);
}

std::string join_csv(const std::vector<std::string>& parts) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += ',';
    out += parts[i];
  }
  return out;
}

std::string row_to_line(const SweepRow& row, const std::vector<std::string>& columns,
                        const std::string& hash) {
  std::vector<std::string> parts;
  parts.reserve(columns.size());
  char buf[32];
  for (const auto& name : columns) {
    if (name == "index") {
      parts.push_back(std::to_string(row.index));
    } else if (name == "param") {
      parts.push_back(fmt17(row.param));
    } else if (name == "status") {
      parts.push_back(sanitize_status(row.status));
    } else if (name == "wall_ms") {
      std::snprintf(buf, sizeof buf, "%.3f", row.wall_ms);
      parts.push_back(buf);
    } else if (name == "options_hash") {
      parts.push_back(hash);
    } else {
      auto it = row.cells.find(name);
      parts.push_back(it == row.cells.end() ? "nan" : it->second);
    }
  }
  return join_csv(parts);
}

std::string canonical_serialization(const SweepConfig& config) {
  std::ostringstream out;
  out << "model=" << config.model << '\n';
  out << "sweep=" << config.swept << '\n';
  out << "threads=" << config.threads << '\n';
  for (const auto& [key, value] : config.numbers) out << key << '=' << fmt17(value) << '\n';
  out << "grid=";
  for (std::size_t i = 0; i < config.grid.size(); ++i) {
    if (i) out << ',';
    out << fmt17(config.grid[i]);
  }
  out << '\n';
  return out.str();
}

std::string utc_timestamp() {
  std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_manifest(const SweepConfig& config, const std::vector<std::string>& columns,
                    const std::string& hash, const std::string& path, int rows_completed) {
  nlohmann::json j;
  j["model"] = config.model;
  j["swept"] = config.swept;
  j["grid"] = config.grid;
  j["numbers"] = config.numbers;
  j["output"] = config.output;
  j["threads"] = config.threads;
  j["columns"] = columns;
  j["options_hash"] = hash;
  j["library_version"] = MEANFIELD_VERSION_STRING;
  j["generated_at"] = utc_timestamp();
  j["points_total"] = static_cast<int>(config.grid.size());
  j["rows_completed"] = rows_completed;
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("sweep: cannot write manifest " + path);
  out << j.dump(2) << '\n';
}

}  // namespace

SweepConfig parse_sweep_config_text(const std::string& text) {
  SweepConfig config;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("sweep config line " + std::to_string(lineno) +
                                  ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw std::invalid_argument("sweep config line " + std::to_string(lineno) +
                                  ": empty key or value");
    if (key == "model") {
      config.model = value;
    } else if (key == "sweep") {
      config.swept = value;
    } else if (key == "grid") {
      config.grid = parse_grid(value);
    } else if (key == "output") {
      config.output = value;
    } else if (key == "threads") {
      config.threads = static_cast<int>(parse_number(key, value));
    } else {
      config.numbers[key] = parse_number(key, value);
    }
  }
  if (config.model.empty()) throw std::invalid_argument("sweep config: missing model");
  if (config.swept.empty()) throw std::invalid_argument("sweep config: missing sweep key");
  if (config.grid.empty()) throw std::invalid_argument("sweep config: missing grid");
  validate_config(config);
  return config;
}

SweepConfig parse_sweep_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("sweep: cannot read config " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_sweep_config_text(buf.str());
}

std::vector<std::string> sweep_columns(const std::string& model) {
  std::vector<std::string> cols = {"index", "param"};
  if (model == "gld1d") {
    for (const char* c : {"energy", "k_opt", "piece_mass"}) cols.push_back(c);
  } else if (model == "gld") {
    for (const char* c : {"perimeter", "repulsive", "total", "split2", "sign", "m_star",
                          "m_c_stab"})
      cols.push_back(c);
  } else if (model == "flock") {
    for (const char* c : {"energy", "repulsive", "attractive", "phase", "max_rho",
                          "support_radius", "kkt", "converged", "iterations"})
      cols.push_back(c);
  } else if (model == "gks") {
    for (const char* c : {"energy", "entropy", "attractive", "atom_coupling", "atom_mass",
                          "atom_positive", "kkt", "converged", "iterations"})
      cols.push_back(c);
  } else {
    throw std::invalid_argument("sweep: unknown model '" + model + "'");
  }
  for (const char* c : {"status", "wall_ms", "options_hash"}) cols.push_back(c);
  return cols;
}

SweepRow evaluate_sweep_point(const SweepConfig& config, int index, double value) {
  validate_config(config);
  SweepRow row;
  row.index = index;
  row.param = value;
  std::map<std::string, double> num = config.numbers;
  num[config.swept] = value;
  auto start = std::chrono::steady_clock::now();
  try {
    if (config.model == "gld1d") {
      eval_gld1d(num, row);
    } else if (config.model == "gld") {
      eval_gld(num, row);
    } else if (config.model == "flock") {
      eval_flock(num, row);
    } else {
      eval_gks(num, row);
    }
  } catch (const std::exception& e) {
    row.status = std::string("error: ") + e.what();
  }
  row.wall_ms = std::chrono::duration<double, std::milli>(
                    std::chrono::steady_clock::now() - start)
                    .count();
  return row;
}

SweepOutcome run_sweep(const SweepConfig& config) {
  validate_config(config);
  if (config.output.empty()) throw std::invalid_argument("sweep: missing output path");
  const std::vector<std::string> columns = sweep_columns(config.model);
  const std::string hash = sweep_options_hash(config);
  const std::string header = join_csv(columns);
  const int total = static_cast<int>(config.grid.size());

  int existing = 0;
  bool have_file = false;
  {
    std::ifstream in(config.output);
    if (in) {
      std::string line;
      bool header_seen = false;
      while (std::getline(in, line)) {
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        have_file = true;
        if (!header_seen) {
          if (t != header)
            throw std::runtime_error("sweep: existing output " + config.output +
                                     " has a different header; refusing to resume");
          header_seen = true;
        } else {
          ++existing;
        }
      }
      if (have_file && !header_seen)
        throw std::runtime_error("sweep: existing output " + config.output +
                                 " has no header line");
    }
  }
  if (existing > total)
    throw std::runtime_error("sweep: existing output has more rows than the grid");

  std::ofstream out(config.output, std::ios::app);
  if (!out) throw std::runtime_error("sweep: cannot write " + config.output);
  if (!have_file) {
    out << "# model=" << config.model << " swept=" << config.swept << " points=" << total
        << " options=" << hash << '\n';
    out << header << '\n';
    out.flush();
  }

  const std::string manifest_path = config.output + ".manifest.json";
  int threads = config.threads > 0 ? config.threads : thread_budget();
  int batch = std::max(1, threads);
  int computed = 0;
  for (int base = existing; base < total; base += batch) {
    int count = std::min(batch, total - base);
    std::vector<SweepRow> rows(count);
    parallel_for(0, count, [&](int lo, int hi) {
      for (int k = lo; k < hi; ++k)
        rows[k] = evaluate_sweep_point(config, base + k, config.grid[base + k]);
    });
    for (const SweepRow& row : rows) out << row_to_line(row, columns, hash) << '\n';
    out.flush();
    computed += count;
    write_manifest(config, columns, hash, manifest_path, base + count);
  }
  if (computed == 0) write_manifest(config, columns, hash, manifest_path, existing);

  SweepOutcome outcome;
  outcome.total_points = total;
  outcome.newly_computed = computed;
  outcome.skipped_existing = existing;
  outcome.csv_path = config.output;
  outcome.manifest_path = manifest_path;
  return outcome;
}

bool sweep_predicate(const std::string& name, const SweepConfig& config,
                     const SweepRow& row) {
  if (row.status != "ok")
    throw std::runtime_error("sweep: point at " + fmt17(row.param) +
                             " failed: " + row.status);
  auto cell = [&](const char* key) -> const std::string& {
    auto it = row.cells.find(key);
    if (it == row.cells.end())
      throw std::invalid_argument("sweep: predicate '" + name + "' does not apply to model " +
                                  config.model);
    return it->second;
  };
  if (name == "k_opt_gt_1") return std::stod(cell("k_opt")) > 1.5;
  if (name == "charmstar_positive") return cell("sign") == "positive";
  if (name == "phase_solid") return cell("phase") == "solid";
  if (name == "atom_positive") return cell("atom_positive") == "1";
  throw std::invalid_argument("sweep: unknown predicate '" + name + "'");
}

BisectResult bisect_transition(const SweepConfig& config, const std::string& swept,
                               double lo, double hi, const std::string& predicate,
                               double tol) {
  if (!(tol > 0.0)) throw std::invalid_argument("bisect: tol must be positive");
  if (!(lo < hi)) throw std::invalid_argument("bisect: need lo < hi");
  SweepConfig cfg = config;
  cfg.swept = swept;
  validate_config(cfg);
  int evaluations = 0;
  auto probe = [&](double x) {
    ++evaluations;
    return sweep_predicate(predicate, cfg, evaluate_sweep_point(cfg, -1, x));
  };
  bool at_lo = probe(lo);
  bool at_hi = probe(hi);
  if (at_lo == at_hi)
    throw std::invalid_argument("bisect: predicate '" + predicate +
                                "' does not change over [" + fmt17(lo) + ", " + fmt17(hi) + "]");
  while ((hi - lo) / 2 > tol) {
    double mid = lo + (hi - lo) / 2;
    if (probe(mid) == at_lo)
      lo = mid;
    else
      hi = mid;
  }
  BisectResult result;
  result.critical = lo + (hi - lo) / 2;
  result.half_width = (hi - lo) / 2;
  result.evaluations = evaluations;
  return result;
}

std::string sweep_options_hash(const SweepConfig& config) {
  const std::string text = canonical_serialization(config);
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace meanfield
