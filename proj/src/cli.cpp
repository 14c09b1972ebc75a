#include "wba/cli.hpp"

#include "wba/errors.hpp"
#include "wba/spec_parse.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>
#include <thread>

namespace wba {

namespace mp = boost::multiprecision;

namespace {

const std::set<std::string> kKeys = {
    "observable",  "rotation",    "weight",      "theta0",       "mode",
    "grid",        "grid.start",  "grid.factor", "grid.count",   "precision",
    "quad_tol",    "tail_tol",    "fit",         "record_timing", "output",
    "check",       "check.delta", "check.dtilde", "check.m",     "check.d",
    "check.eta",   "check.nu_max", "check.phi",  "check.alpha",  "check.gamma",
    "check.grid.start", "check.grid.factor", "check.grid.count"};

// Runs `fn`, re-throwing library errors with the config location of `key`.
template <class F>
auto in_context(const ExperimentConfig& cfg, const std::string& key, F&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const ParseError& e) {
    std::string msg = e.what();
    if (e.field() == key) msg = msg.substr(key.size() + 2);
    throw ParseError(key, "line " + std::to_string(cfg.line_of(key)) + ": " + msg);
  } catch (const DimensionError& e) {
    throw DimensionError(key + ": line " + std::to_string(cfg.line_of(key)) + ": " + e.what());
  } catch (const DomainError& e) {
    throw DomainError(key + ": line " + std::to_string(cfg.line_of(key)) + ": " + e.what());
  }
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(spec::trim(item));
  return out;
}

bool parse_bool(const ExperimentConfig& cfg, const std::string& key, bool fallback) {
  if (!cfg.has(key)) return fallback;
  const std::string& v = cfg.get(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ParseError(key, "line " + std::to_string(cfg.line_of(key)) + ": expected true or false");
}

std::int64_t get_int(const ExperimentConfig& cfg, const std::string& key, std::int64_t fallback) {
  if (!cfg.has(key)) return fallback;
  return in_context(cfg, key, [&] { return spec::to_int(cfg.get(key), key); });
}

ExtReal get_real(const ExperimentConfig& cfg, const std::string& key) {
  return in_context(cfg, key, [&] { return ExtReal(spec::real_literal(cfg.get(key), key)); });
}

std::string grid_literal(const ExtReal& x) {
  ExtReal r = mp::round(x);
  if (mp::abs(x - r) <= ExtReal("1e-20") * mp::abs(x) && mp::abs(r) < ExtReal("1e18"))
    return std::to_string(r.convert_to<long long>());
  return x.str(20, std::ios_base::fmtflags(0));
}

std::vector<std::string> make_grid(const ExperimentConfig& cfg, const std::string& prefix,
                                   bool integral) {
  std::vector<std::string> grid;
  if (cfg.has(prefix)) {
    if (cfg.has(prefix + ".start"))
      throw ParseError(prefix, "give either " + prefix + " or " + prefix + ".start, not both");
    for (const auto& item : split_list(cfg.get(prefix)))
      grid.push_back(in_context(cfg, prefix, [&] { return spec::real_literal(item, prefix); }));
  } else {
    for (const char* k : {".start", ".factor", ".count"})
      if (!cfg.has(prefix + k)) throw ParseError(prefix + k, "missing");
    ExtReal start = get_real(cfg, prefix + ".start");
    ExtReal factor = get_real(cfg, prefix + ".factor");
    std::int64_t count = get_int(cfg, prefix + ".count", 0);
    if (count < 1) throw ParseError(prefix + ".count", "must be >= 1");
    if (!(factor > 1)) throw ParseError(prefix + ".factor", "must exceed 1");
    ExtReal x = start;
    for (std::int64_t i = 0; i < count; ++i, x *= factor)
      grid.push_back(grid_literal(integral ? ExtReal(mp::round(x)) : x));
  }
  ExtReal prev(-1);
  for (const auto& g : grid) {
    ExtReal x(g);
    if (!(x > prev)) throw ParseError(prefix, "grid must be strictly increasing");
    if (integral && x != mp::round(x))
      throw ParseError(prefix, "discrete grid values must be integers, got " + g);
    prev = x;
  }
  return grid;
}

std::string fmt_ms(double ms) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(3) << ms;
  return os.str();
}

void write_fit(std::ostream& out, RateModel model, const std::optional<RateFit>& fit,
               const std::string& why) {
  out << "#fit model=" << to_string(model);
  if (!fit) {
    out << " status=no-fit reason=" << why << "\n";
    return;
  }
  std::ostringstream os;
  os << std::setprecision(10);
  os << (model == RateModel::PolySlope ? " m=" : " xi=") << fit->value << " c=" << fit->c
     << " stderr=" << fit->stderr_ << " r2=" << fit->r2 << " points=" << fit->used.size()
     << " excluded=" << fit->excluded.size();
  out << os.str() << "\n";
}

}  // namespace

// ---------------------------------------------------------------- config

const std::string& ExperimentConfig::get(const std::string& key) const {
  auto it = entries.find(key);
  if (it == entries.end()) throw ParseError(key, "missing");
  return it->second.value;
}

std::string ExperimentConfig::get_or(const std::string& key, const std::string& fallback) const {
  return has(key) ? get(key) : fallback;
}

int ExperimentConfig::line_of(const std::string& key) const {
  auto it = entries.find(key);
  return it == entries.end() ? 0 : it->second.line;
}

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig cfg;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    auto hash = raw.find('#');
    std::string s = spec::trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (s.empty()) continue;
    auto eq = s.find('=');
    if (eq == std::string::npos)
      throw ParseError("config", "line " + std::to_string(line) + ": expected key = value");
    std::string key = spec::trim(s.substr(0, eq)), value = spec::trim(s.substr(eq + 1));
    if (!kKeys.count(key))
      throw ParseError("config", "line " + std::to_string(line) + ": unknown key '" + key + "'");
    if (value.empty())
      throw ParseError(key, "line " + std::to_string(line) + ": empty value");
    if (!cfg.entries.emplace(key, ConfigEntry{value, line}).second)
      throw ParseError(key, "line " + std::to_string(line) + ": duplicate key");
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ParseError("config", "cannot read '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str());
}

int default_precision() {
  const char* env = std::getenv("WBA_PRECISION");
  if (!env || !*env) return 50;
  auto p = spec::to_int(env, "WBA_PRECISION");
  if (p < 30 || p > 100000) throw ParseError("WBA_PRECISION", "must lie in [30, 100000]");
  return static_cast<int>(p);
}

// ---------------------------------------------------------------- sweep

AveragingRun SweepPlan::run_at(std::size_t i) const {
  AveragingMode mode;
  if (continuous) {
    ExtReal tol = quad_tol ? *quad_tol : ten_pow_neg(precision - 10);
    mode = ContinuousMode{ExtReal(grid.at(i)), tol};
  } else {
    mode = DiscreteMode{ExtReal(grid.at(i)).convert_to<long long>()};
  }
  return AveragingRun{observable, rotation, weight, theta0, mode, precision, tail_tol};
}

SweepPlan make_sweep_plan(const ExperimentConfig& cfg) {
  const int P = cfg.has("precision") ? static_cast<int>(get_int(cfg, "precision", 50))
                                     : default_precision();
  if (P < 30) throw ParseError("precision", "must be >= 30");
  PrecisionScope scope(P);

  auto rotation = in_context(cfg, "rotation", [&] { return make_rotation(cfg.get("rotation")); });
  auto observable = in_context(cfg, "observable", [&] {
    return Observable::parse(cfg.get("observable"), rotation.regime());
  });
  auto weight = in_context(cfg, "weight", [&] { return WeightFunction::parse(cfg.get("weight")); });

  std::vector<ExtReal> theta0;
  if (cfg.has("theta0")) {
    for (const auto& item : split_list(cfg.get("theta0")))
      theta0.emplace_back(in_context(cfg, "theta0", [&] { return spec::real_literal(item, "theta0"); }));
  } else {
    theta0.assign(rotation.dim(), ExtReal(0));
  }

  const std::string mode = cfg.get_or("mode", "discrete");
  if (mode != "discrete" && mode != "continuous")
    throw ParseError("mode", "line " + std::to_string(cfg.line_of("mode")) +
                                 ": expected discrete or continuous");
  const bool continuous = mode == "continuous";

  SweepPlan plan{observable, rotation, weight, theta0, continuous,
                 make_grid(cfg, "grid", !continuous), P, {}, {}, RateModel::StretchedExp, false, {}};
  if (cfg.has("quad_tol")) plan.quad_tol = get_real(cfg, "quad_tol");
  if (cfg.has("tail_tol")) plan.tail_tol = get_real(cfg, "tail_tol");
  plan.fit = cfg.has("fit") ? in_context(cfg, "fit", [&] { return parse_rate_model(cfg.get("fit")); })
             : weight.kind() == WeightKind::TrivialFlat ? RateModel::PolySlope
                                                        : RateModel::StretchedExp;
  plan.record_timing = parse_bool(cfg, "record_timing", false);
  if (cfg.has("output")) plan.output = cfg.get("output");
  for (std::size_t i = 0; i < plan.grid.size(); ++i) validate(plan.run_at(i));
  return plan;
}

SweepOutcome run_sweep(const SweepPlan& plan, std::ostream& out, int threads) {
  PrecisionScope scope(plan.precision);
  const std::size_t n = plan.grid.size();
  std::vector<std::optional<RunResult>> results(n);
  std::vector<std::string> errors(n);
  std::vector<char> parse_err(n, 0);
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < n;) {
      try {
        results[i] = run(plan.run_at(i));
      } catch (const Error& e) {
        errors[i] = e.what();
        parse_err[i] = e.is_parse();
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  const int t = std::max(1, std::min<int>(threads, static_cast<int>(n)));
  if (t == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < t; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  SweepOutcome outcome;
  out << "# wba-sweep v1\n";
  out << "# observable=" << plan.observable.spec() << " rotation=" << plan.rotation.spec()
      << " weight=" << plan.weight.spec() << " mode=" << (plan.continuous ? "continuous" : "discrete")
      << " precision=" << plan.precision << "\n";
  out << "N_or_T,value_re,value_im,abs_error,precision_floor,wall_ms\n";
  const int vd = std::min(plan.precision, 30);
  for (std::size_t i = 0; i < n; ++i) {
    if (!results[i]) {
      out << "#error N_or_T=" << plan.grid[i] << " message=" << errors[i] << "\n";
      outcome.error = plan.grid[i] + ": " + errors[i];
      outcome.error_is_parse = parse_err[i];
      break;
    }
    const RunResult& r = *results[i];
    out << plan.grid[i] << "," << to_sci(r.value.re, vd) << "," << to_sci(r.value.im, vd) << ","
        << to_sci(r.abs_error, 20) << "," << to_sci(r.diag.precision_floor, 6) << ","
        << (plan.record_timing ? fmt_ms(r.wall_ms) : "0") << "\n";
    outcome.rows.push_back(r);
  }
  std::vector<RatePoint> pts;
  for (std::size_t i = 0; i < outcome.rows.size(); ++i)
    pts.push_back({ExtReal(plan.grid[i]).convert_to<double>(), outcome.rows[i].abs_error,
                   outcome.rows[i].saturated()});
  std::string why;
  try {
    outcome.fit = fit_rate(pts, plan.fit);
  } catch (const InsufficientData&) {
    why = "insufficient-data";
  }
  write_fit(out, plan.fit, outcome.fit, why);
  out.flush();
  return outcome;
}

// ---------------------------------------------------------------- check

nlohmann::json run_check(const ExperimentConfig& cfg) {
  const int P = cfg.has("precision") ? static_cast<int>(get_int(cfg, "precision", 50))
                                     : default_precision();
  if (P < 30) throw ParseError("precision", "must be >= 30");
  PrecisionScope scope(P);
  const std::string h = cfg.get("check");
  auto approx = [&](const std::string& key) {
    return in_context(cfg, key, [&] { return ApproximationFunction::parse(cfg.get(key)); });
  };
  auto phi = [&] {
    return in_context(cfg, "check.phi",
                      [&] { return AdaptiveFunction::parse(cfg.get_or("check.phi", "pow:v=0.5")); });
  };
  auto grid = [&] {
    SmallnessGrid g;
    if (cfg.has("check.grid.start")) g.x_min = get_real(cfg, "check.grid.start").convert_to<double>();
    if (cfg.has("check.grid.factor"))
      g.ratio = get_real(cfg, "check.grid.factor").convert_to<double>();
    g.count = static_cast<int>(get_int(cfg, "check.grid.count", g.count));
    if (!(g.x_min >= 1) || !(g.ratio > 1) || g.count < 3)
      throw ParseError("check.grid", "need start >= 1, factor > 1, count >= 3");
    return g;
  };
  auto dim = [&]() -> int {
    if (cfg.has("check.d")) return static_cast<int>(get_int(cfg, "check.d", 1));
    if (cfg.has("rotation"))
      return in_context(cfg, "rotation", [&] { return make_rotation(cfg.get("rotation")).dim(); });
    throw ParseError("check.d", "missing (and no rotation to take it from)");
  };
  const int m = static_cast<int>(get_int(cfg, "check.m", 2));
  const int eta = static_cast<int>(get_int(cfg, "check.eta", 2));

  HypothesisResult res;
  auto dctx = [&](auto&& fn) { return in_context(cfg, "check", fn); };
  if (h == "H1") {
    auto a = approx("check.delta"), b = approx("check.dtilde");
    int d = dim();
    res = dctx([&] { return check_H1(a, b, m, d); });
  } else if (h == "H2") {
    auto a = approx("check.delta"), b = approx("check.dtilde");
    auto nu = get_int(cfg, "check.nu_max", 40);
    res = dctx([&] { return check_H2(a, b, m, eta, nu); });
  } else if (h == "H3") {
    auto a = approx("check.delta"), b = approx("check.dtilde");
    auto f = phi();
    auto g = grid();
    ExtReal alpha = get_real(cfg, "check.alpha");
    int d = dim();
    res = dctx([&] { return check_H3(a, b, f, alpha, d, g); });
  } else if (h == "H4") {
    auto a = approx("check.delta"), b = approx("check.dtilde");
    auto f = phi();
    auto g = grid();
    ExtReal gamma = get_real(cfg, "check.gamma");
    res = dctx([&] { return check_H4(a, b, f, gamma, eta, g); });
  } else {
    throw ParseError("check", "line " + std::to_string(cfg.line_of("check")) +
                                  ": expected H1, H2, H3 or H4");
  }
  nlohmann::json j = to_json(res);
  auto& echo = j["config"] = nlohmann::json::object();
  for (const auto& [k, v] : cfg.entries) echo[k] = v.value;
  return j;
}

// ---------------------------------------------------------------- oracle

std::vector<OracleCheckRow> run_oracle_check(const SweepPlan& plan) {
  if (plan.continuous) throw DomainError("oracle-check needs a discrete grid");
  PrecisionScope scope(plan.precision);
  std::vector<OracleCheckRow> rows;
  for (std::size_t i = 0; i < plan.grid.size(); ++i) {
    AveragingRun r = plan.run_at(i);
    RunResult e = run(r);
    OracleResult o = fourier_error_oracle(r);
    OracleCheckRow row;
    row.N = plan.grid[i];
    row.engine_error = e.abs_error;
    row.oracle_error = abs(o.error);
    row.difference = mp::abs(row.engine_error - row.oracle_error);
    row.allowance = e.diag.precision_floor + o.tail_bound;
    row.ok = row.difference <= row.allowance;
    rows.push_back(std::move(row));
  }
  return rows;
}

// ---------------------------------------------------------------- main

namespace {

int exit_code(const Error& e) { return e.is_parse() ? 2 : 3; }

int write_to(const std::optional<std::string>& path, const std::function<int(std::ostream&)>& fn) {
  if (!path) return fn(std::cout);
  std::ofstream f(*path);
  if (!f) throw ParseError("output", "cannot write '" + *path + "'");
  return fn(f);
}

}  // namespace

int cli_main(int argc, char** argv) {
  CLI::App app{"Weighted Birkhoff averages of irrational rotations"};
  app.require_subcommand(1);

  std::string config_path;
  int threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  auto* sweep = app.add_subcommand("sweep", "run an N (or T) grid and write the sweep CSV");
  sweep->add_option("config", config_path, "experiment config")->required();
  sweep->add_option("--threads", threads, "worker threads");
  std::string out_override;
  sweep->add_option("--out", out_override, "output path (overrides the config)");

  auto* check = app.add_subcommand("check", "evaluate the configured hypothesis, print JSON");
  check->add_option("config", config_path, "experiment config")->required();

  std::string rot_spec, approx_spec, scan_mode = "discrete";
  std::int64_t K = 40;
  int scan_digits = 0;
  auto* scan = app.add_subcommand("scan", "estimate the nonresonance constant up to a radius");
  scan->add_option("rotation", rot_spec, "rotation spec")->required();
  scan->add_option("approx", approx_spec, "approximation function spec")->required();
  scan->add_option("--K", K, "norm radius")->check(CLI::PositiveNumber);
  scan->add_option("--mode", scan_mode, "discrete | continuous");
  scan->add_option("--precision", scan_digits, "digits");

  int n_max = 16, norm_digits = 30;
  auto* norms = app.add_subcommand("weight-norms", "L1 norms of the exp-bump derivatives");
  norms->add_option("--n-max", n_max, "highest order")->check(CLI::Range(1, 64));
  norms->add_option("--digits", norm_digits, "digits")->check(CLI::Range(30, 2000));

  auto* oracle = app.add_subcommand("oracle-check", "engine error against the Fourier oracle");
  oracle->add_option("config", config_path, "experiment config")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*sweep) {
      auto plan = make_sweep_plan(load_config(config_path));
      if (!out_override.empty()) plan.output = out_override;
      return write_to(plan.output, [&](std::ostream& os) {
        auto outcome = run_sweep(plan, os, threads);
        if (!outcome.error) return 0;
        std::cerr << "wba: " << *outcome.error << "\n";
        return outcome.error_is_parse ? 2 : 3;
      });
    }
    if (*check) {
      auto cfg = load_config(config_path);
      auto j = run_check(cfg);
      std::optional<std::string> path;
      if (cfg.has("output")) path = cfg.get("output");
      return write_to(path, [&](std::ostream& os) {
        os << j.dump(2) << "\n";
        return 0;
      });
    }
    if (*scan) {
      PrecisionScope p(scan_digits ? scan_digits : default_precision());
      auto rho = make_rotation(rot_spec);
      auto delta = ApproximationFunction::parse(approx_spec);
      auto r = nonresonance_scan(rho, delta, K, parse_divisor_mode(scan_mode));
      std::cout << "rotation " << rho.spec() << "\n"
                << "approx " << delta.spec() << "\n"
                << "mode " << scan_mode << "\n"
                << "radius " << r.radius << "\n"
                << "scanned " << r.scanned << "\n"
                << "alpha " << to_sci(r.alpha, 20) << "\n"
                << "argmin " << r.argmin.str() << "\n";
      return 0;
    }
    if (*norms) {
      PrecisionScope p(norm_digits);
      auto table = l1_norm_table(n_max, norm_digits);
      std::cout << "n,l1_norm,exponent\n";
      for (const auto& row : table)
        std::cout << row.n << "," << to_sci(row.value, 20) << "," << std::setprecision(10)
                  << row.exponent << "\n";
      std::cout << "#beta " << std::setprecision(10) << empirical_beta(table) << "\n";
      return 0;
    }
    if (*oracle) {
      auto plan = make_sweep_plan(load_config(config_path));
      auto rows = run_oracle_check(plan);
      bool all = true;
      std::cout << "N,engine_error,oracle_error,difference,allowance,status\n";
      for (const auto& r : rows) {
        std::cout << r.N << "," << to_sci(r.engine_error, 15) << "," << to_sci(r.oracle_error, 15)
                  << "," << to_sci(r.difference, 3) << "," << to_sci(r.allowance, 3) << ","
                  << (r.ok ? "ok" : "MISMATCH") << "\n";
        all = all && r.ok;
      }
      return all ? 0 : 3;
    }
  } catch (const Error& e) {
    std::cerr << "wba: " << e.what() << "\n";
    return exit_code(e);
  } catch (const std::exception& e) {
    std::cerr << "wba: " << e.what() << "\n";
    return 3;
  }
  return 0;
}

}  // namespace wba
