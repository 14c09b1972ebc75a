#pragma once

#include "wba/numeric.hpp"
#include "wba/observables.hpp"
#include "wba/rotations.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace wba {

enum class AdaptiveKind { LogPow, Pow };

// phi(x) = log^u(1 + x) (u > 0) or x^v (0 < v < 1). Both are nondecreasing,
// unbounded and o(x), which the constructors enforce through the parameter
// ranges.
// Grammar: logpow:u=<r> | pow:v=<r>
class AdaptiveFunction {
 public:
  static AdaptiveFunction log_pow(double u);
  static AdaptiveFunction pow(double v);
  static AdaptiveFunction parse(const std::string& spec);

  AdaptiveKind kind() const { return kind_; }
  double param() const { return p_; }
  const std::string& spec() const { return spec_; }
  ExtReal operator()(const ExtReal& x) const;

 private:
  AdaptiveFunction() = default;
  AdaptiveKind kind_ = AdaptiveKind::Pow;
  double p_ = 0.5;
  std::string spec_;
};

enum class Verdict { Converges, Diverges, Holds, Fails, Inconclusive };
std::string to_string(Verdict v);

struct LineFit {
  double slope = 0, intercept = 0, slope_stderr = 0, r2 = 0;
  int points = 0;
};

// Ordinary least squares; throws InsufficientData below 3 points.
LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

struct HypothesisResult {
  std::string hypothesis;  // "H1" .. "H4"
  Verdict verdict = Verdict::Inconclusive;
  std::string reason;
  // H1: partial integral up to the last block; H2: partial sum
  std::optional<ExtReal> estimate;
  // (abscissa, natural log of the quantity): H1 dyadic block integrals,
  // H2 shell terms, H3/H4 tails T(x)
  std::vector<std::pair<double, double>> table;
  std::optional<LineFit> linear_fit;     // log T against x
  std::optional<LineFit> stretched_fit;  // log(-log T) against log x
  double decay_constant = 0;             // c with T(x) <= e^{-c x} on the tail window
};

nlohmann::json to_json(const HypothesisResult& r);

// (H1): int_1^inf r^{d-1} Delta^m(r) / Dtilde(r) dr < inf.
HypothesisResult check_H1(const ApproximationFunction& delta, const ApproximationFunction& dtilde,
                          int m, int d);

// (H2): sum over 0 != k in Z_*^inf of d^m(|k|_eta) / Dtilde_inf(|k|_eta), by
// exact shell counts for nu = 1..nu_max (nu_max >= 8).
HypothesisResult check_H2(const ApproximationFunction& dd, const ApproximationFunction& dtilde_inf,
                          int m, int eta, std::int64_t nu_max);

// x-grid for the smallness checks: x_i = x_min * ratio^i, i < count.
struct SmallnessGrid {
  double x_min = 16;
  double ratio = 1.4142135623730951;
  int count = 33;
};

// log of int_{lower}^inf r^{d-1} Delta^2(r) / Dtilde(r) dr, lower clamped to
// >= 1; +inf when the integral diverges.
ExtReal log_tail_integral(const ApproximationFunction& delta, const ApproximationFunction& dtilde,
                          int d, const ExtReal& lower);
// Delta^{-1}(2 pi alpha x / phi(x))
ExtReal partition_threshold(const ApproximationFunction& delta, const ExtReal& alpha,
                            const AdaptiveFunction& phi, const ExtReal& x);

// (H3): the tail integral from Delta^{-1}(2 pi alpha x/phi(x)) is O(e^{-cx}).
HypothesisResult check_H3(const ApproximationFunction& delta, const ApproximationFunction& dtilde,
                          const AdaptiveFunction& phi, const ExtReal& alpha, int d,
                          const SmallnessGrid& grid = {});

// (H4): the shell tail over |k|_eta > d^{-1}(2 pi gamma x/phi(x)) is O(e^{-cx}).
HypothesisResult check_H4(const ApproximationFunction& dd, const ApproximationFunction& dtilde_inf,
                          const AdaptiveFunction& phi, const ExtReal& gamma, int eta,
                          const SmallnessGrid& grid = {});

enum class RateModel { PolySlope, StretchedExp };
std::string to_string(RateModel m);
RateModel parse_rate_model(const std::string& s);

struct RatePoint {
  double x;     // N or T
  ExtReal err;  // abs_error
  bool saturated = false;
};

struct RateFit {
  RateModel model = RateModel::PolySlope;
  // PolySlope: err ~ C x^{-m}, value = m.
  // StretchedExp: err ~ exp(-c x^xi), value = xi, c = c.
  double value = 0, c = 0, stderr_ = 0, r2 = 0;
  std::vector<std::size_t> used;      // indices into the grid
  std::vector<std::size_t> excluded;  // saturated, zero-error or early-half points
};

// Fits the tail half of the non-saturated points. Needs at least 6 of them.
RateFit fit_rate(const std::vector<RatePoint>& grid, RateModel model);

struct BudgetInputs {
  std::int64_t N = 0;
  ApproximationFunction delta;   // small-divisor function, ||k rho|| >= alpha / Delta(||k||_1)
  ApproximationFunction dtilde;  // coefficient class, |f_k| <= C_f / Dtilde(||k||_1)
  ExtReal alpha;
  AdaptiveFunction phi;
  int d = 1;
  ExtReal class_constant = 1;  // C_f
  double beta = 0;             // 0: take the empirical value from the L1 table
  int max_order = 16;          // cap on the integration-by-parts order actually used
};

struct BudgetRow {
  std::int64_t norm = 0;  // ||k||_1
  ExtReal count;          // lattice points on the shell
  std::int64_t L1 = 0;    // theoretical order at this norm
  int order_used = 0;     // min(L1, max_order)
  ExtReal per_mode;       // bound on |S_N(k . rho)| for one k on the shell
};

struct BudgetResult {
  ExtReal threshold;  // Delta^{-1}(2 pi alpha N / phi(N))
  double beta = 0, beta_star = 0;
  std::vector<BudgetRow> rows;  // Lambda_1 shells
  ExtReal S1, S2, total;
  ExtReal lambda2_log_integral;  // log_tail_integral at the threshold
};

// Upper bound for the w-bar weighted error of an observable in the class
// (dtilde, C_f) under the small-divisor condition (delta, alpha). Throws
// BudgetDegenerate when some shell of Lambda_1 has L1 < 2.
BudgetResult error_budget(const BudgetInputs& in);

// beta from the weights module's L1 table (orders up to 16), cached.
double budget_beta();

}  // namespace wba
