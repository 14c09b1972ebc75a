#pragma once

#include "wba/numeric.hpp"
#include "wba/observables.hpp"
#include "wba/rotations.hpp"
#include "wba/weights.hpp"

#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

namespace wba {

struct DiscreteMode {
  std::int64_t N = 2;
};

struct ContinuousMode {
  ExtReal T;
  ExtReal quad_tol;  // certified per-mode quadrature tolerance
};

using AveragingMode = std::variant<DiscreteMode, ContinuousMode>;

// One averaging experiment. The run executes at `precision` digits; if the
// process default differs, run() switches it for the duration of the call,
// so concurrent callers must all preset the same precision.
struct AveragingRun {
  Observable observable;
  RotationVector rotation;
  WeightFunction weight;
  std::vector<ExtReal> theta0;
  AveragingMode mode;
  int precision = 50;
  std::optional<ExtReal> tail_tol;  // default 10^{-precision}
};

struct RunDiagnostics {
  ExtReal A_N;             // discrete only
  ExtReal orbit_residual;  // |cumulative orbit - directly reduced orbit| at the last point
  ExtReal precision_floor;
  ExtReal tail_bound;
  std::int64_t radius = 0;
  std::int64_t modes = 0;
  std::int64_t panels = 0;  // continuous only
};

struct RunResult {
  ExtComplex value;
  ExtReal abs_error;  // |value - mean|
  ExtReal N_or_T;
  double wall_ms = 0;
  RunDiagnostics diag;

  bool saturated() const { return abs_error <= 10 * diag.precision_floor; }
};

// Throws DomainError / DimensionError when the run violates its invariants.
void validate(const AveragingRun& run);

// (1/N) sum_{n<N} f(theta0 + n rho); requires the flat weight, N >= 1.
RunResult birkhoff_unweighted(const AveragingRun& run);
// (1/A_N) sum_{n<N} w(n/N) f(theta0 + n rho)
RunResult birkhoff_weighted_discrete(const AveragingRun& run);

// (1/A_N) sum_{n<N} w(n/N) e^{2 pi i n x}
ExtComplex kernel_S_N(const WeightFunction& w, std::int64_t N, const ExtReal& x);

struct OracleResult {
  ExtComplex error;  // value - mean, summed mode by mode
  ExtReal tail_bound;
  std::int64_t modes = 0;
};

// sum_{k != 0} f_k e^{2 pi i k.theta0} S_N(k.rho) over the observable's plan
// (or the modes with norm <= radius). Discrete mode only.
OracleResult fourier_error_oracle(const AveragingRun& run,
                                  std::optional<std::int64_t> radius = {});

// int_0^1 w(y) e^{2 pi i omega y} dy for each omega, adaptive Gauss-Legendre
// with at least ceil(panels_per_cycle * (1 + max|omega|)) initial panels and
// estimated error <= tol per component.
std::vector<ExtComplex> oscillatory_weight_integrals(const WeightFunction& w,
                                                     const std::vector<ExtReal>& omegas,
                                                     const ExtReal& tol,
                                                     int panels_per_cycle = 1,
                                                     std::int64_t* panels = nullptr);

// Per-mode continuous average: mean + sum_k f_k e^{2 pi i k.theta0} I_T(k.rho).
RunResult birkhoff_weighted_continuous(const AveragingRun& run);
// Same quantity by adaptive quadrature of w(t/T) f(theta0 + rho t) in time.
RunResult birkhoff_continuous_time_domain(const AveragingRun& run);

// Dispatch: flat discrete -> unweighted, discrete -> weighted, continuous ->
// per-mode continuous.
RunResult run(const AveragingRun& run);

}  // namespace wba
