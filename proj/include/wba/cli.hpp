#pragma once

#include "wba/analysis.hpp"
#include "wba/engine.hpp"

#include <json.hpp>

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace wba {

// Plain-text experiment description: one `key = value` per line, `#` starts a
// comment. Keys:
//   observable, rotation, weight      spec strings of the respective modules
//   theta0        comma-separated start point (default all zeros)
//   mode          discrete | continuous
//   grid          comma-separated explicit N (or T) values, or
//   grid.start, grid.factor, grid.count   geometric grid (rounded to integers in
//                 discrete mode)
//   precision     digits (default $WBA_PRECISION, else 50)
//   quad_tol      continuous per-mode quadrature tolerance (default 10^{10-precision})
//   tail_tol      observable truncation tolerance (default 10^{-precision})
//   fit           poly | sexp (default poly for the flat weight, sexp otherwise)
//   record_timing true | false (default false: wall_ms is written as 0)
//   output        sweep/check output path (default stdout)
// Hypothesis block (for `check`):
//   check = H1 | H2 | H3 | H4
//   check.delta, check.dtilde   approximation functions (H2/H4: d and Dtilde_inf)
//   check.m, check.d, check.eta, check.nu_max, check.phi, check.alpha (H3) or
//   check.gamma (H4), check.grid.start, check.grid.factor, check.grid.count
struct ConfigEntry {
  std::string value;
  int line = 0;
};

struct ExperimentConfig {
  std::map<std::string, ConfigEntry> entries;

  bool has(const std::string& key) const { return entries.count(key) != 0; }
  const std::string& get(const std::string& key) const;
  std::string get_or(const std::string& key, const std::string& fallback) const;
  int line_of(const std::string& key) const;
};

// Throws ParseError on malformed lines, unknown or duplicate keys.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

// Precision used when the config has none: $WBA_PRECISION or 50.
int default_precision();

struct SweepPlan {
  Observable observable;
  RotationVector rotation;
  WeightFunction weight;
  std::vector<ExtReal> theta0;
  bool continuous = false;
  std::vector<std::string> grid;  // decimal literals, strictly increasing
  int precision = 50;
  std::optional<ExtReal> quad_tol, tail_tol;
  RateModel fit = RateModel::StretchedExp;
  bool record_timing = false;
  std::optional<std::string> output;

  AveragingRun run_at(std::size_t i) const;
};

// Builds every module object at the plan precision (which it makes current).
// Errors carry the config line of the offending key.
SweepPlan make_sweep_plan(const ExperimentConfig& cfg);

struct SweepOutcome {
  std::vector<RunResult> rows;  // in grid order, up to the first failure
  std::optional<RateFit> fit;
  std::optional<std::string> error;  // message of the first failing point
  bool error_is_parse = false;
};

// Runs the grid on `threads` workers and writes the CSV to `out`. Output is
// independent of the thread count.
SweepOutcome run_sweep(const SweepPlan& plan, std::ostream& out, int threads);

// Verdict object of the configured hypothesis plus a config echo.
nlohmann::json run_check(const ExperimentConfig& cfg);

struct OracleCheckRow {
  std::string N;
  ExtReal engine_error, oracle_error, difference, allowance;
  bool ok = false;
};

// Engine abs_error against the per-mode Fourier oracle at each discrete grid
// point; ok when they differ by at most the engine's precision floor plus the
// oracle's tail bound.
std::vector<OracleCheckRow> run_oracle_check(const SweepPlan& plan);

// Full command-line entry point; returns the process exit code.
int cli_main(int argc, char** argv);

}  // namespace wba
