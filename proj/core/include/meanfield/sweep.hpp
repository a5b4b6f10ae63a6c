#pragma once

#include <map>
#include <string>
#include <vector>

namespace meanfield {

/// Parsed from a key = value config file. Recognized keys: model (gld1d |
/// gld | flock | gks), sweep (the swept parameter name), grid (lo:hi:step or
/// a comma list), output (CSV path), threads, and the model's numeric
/// parameters (dim, lambda, alpha, q, mass, grid_n, rmax, max_iter, kkt_tol,
/// atom_tol, phase_tol). '#' starts a comment.
struct SweepConfig {
  std::string model;
  std::string swept;
  std::vector<double> grid;  // nonempty, strictly monotone
  std::map<std::string, double> numbers;
  std::string output;
  int threads = 0;  // 0: use the process default
};

SweepConfig parse_sweep_config_text(const std::string& text);
SweepConfig parse_sweep_config(const std::string& path);

/// One computed sweep point: the CSV cells keyed by column name, plus status.
struct SweepRow {
  int index = 0;
  double param = 0.0;
  std::map<std::string, std::string> cells;
  std::string status = "ok";  // "ok" or an error description
  double wall_ms = 0.0;
};

struct SweepOutcome {
  int total_points = 0;
  int newly_computed = 0;
  int skipped_existing = 0;
  std::string csv_path;
  std::string manifest_path;  // csv path with a .manifest.json suffix
};

/// Runs every grid point, appending CSV rows in index order as batches
/// complete. An existing output file resumes the sweep: rows already present
/// are skipped (the header must match). Per-point failures are recorded in
/// the row's status column and never abort the sweep. A JSON manifest with
/// the config echo, column names, versions, and the options hash is written
/// next to the CSV.
SweepOutcome run_sweep(const SweepConfig& config);

/// Column names for a model's CSV, in output order.
std::vector<std::string> sweep_columns(const std::string& model);

/// Evaluates one point of the configured model at the given swept value.
SweepRow evaluate_sweep_point(const SweepConfig& config, int index, double value);

/// Named threshold predicates on a computed row: "k_opt_gt_1" (gld1d),
/// "charmstar_positive" (gld), "phase_solid" (flock), "atom_positive" (gks).
bool sweep_predicate(const std::string& name, const SweepConfig& config,
                     const SweepRow& row);

struct BisectResult {
  double critical = 0.0;
  double half_width = 0.0;
  int evaluations = 0;
};

/// Bisection on a named predicate over the swept parameter. The predicate
/// must differ at the two bracket ends; the result half-width is <= tol.
BisectResult bisect_transition(const SweepConfig& config, const std::string& swept,
                               double lo, double hi, const std::string& predicate,
                               double tol);

/// FNV-1a hash of the canonical config serialization, as fixed-width hex.
std::string sweep_options_hash(const SweepConfig& config);

}  // namespace meanfield
