#include "wba/engine.hpp"

#include "wba/errors.hpp"
#include "wba/quadrature.hpp"
#include "wba/summation.hpp"

#include <chrono>
#include <cmath>
#include <map>
#include <unordered_map>

namespace wba {

namespace mp = boost::multiprecision;

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

ExtReal tail_tol_of(const AveragingRun& run) {
  return run.tail_tol ? *run.tail_tol : ten_pow_neg(run.precision);
}

// Switches to the run's precision unless it is already in effect.
class RunPrecision {
 public:
  explicit RunPrecision(int digits) {
    if (current_digits() != digits) scope_.emplace(digits);
  }

 private:
  std::optional<PrecisionScope> scope_;
};

ExtReal rounding_floor(const AveragingRun& run, const EvaluationPlan& plan) {
  return 100 * ten_pow_neg(run.precision) * plan.grad_abs_sum + plan.tail_bound;
}

// theta0 + n rho mod 1 with the rounding error of every step carried in a
// second word: the pair (s, c) represents the orbit point s + c exactly up to
// the carried error's own rounding.
class Orbit {
 public:
  Orbit(const std::vector<ExtReal>& theta0, const std::vector<ExtReal>& rho) {
    for (std::size_t j = 0; j < rho.size(); ++j) {
      step_.push_back(frac(rho[j]));
      s_.push_back(frac(theta0[j]));
      c_.emplace_back(0);
    }
  }

  const std::vector<ExtReal>& point() const { return s_; }

  void advance() {
    ExtReal t, e;
    for (std::size_t j = 0; j < s_.size(); ++j) {
      two_sum(s_[j], step_[j], t, e);
      c_[j] += e;
      two_sum(t, c_[j], s_[j], e);
      c_[j] = e;
      if (s_[j] >= 1 || s_[j] < 0) {
        two_sum(s_[j], ExtReal(s_[j] >= 1 ? -1 : 1), t, e);
        s_[j] = t;
        c_[j] += e;
      }
    }
  }

  // max_j distance between s + c and frac(theta0 + n rho) formed with
  // enough extra bits that n * rho is exact
  ExtReal residual(const std::vector<ExtReal>& theta0, const std::vector<ExtReal>& rho,
                   std::int64_t n) const {
    ExtReal worst = 0;
    for (std::size_t j = 0; j < s_.size(); ++j) {
      mpfr_prec_t p = mpfr_get_prec(rho[j].backend().data()) + 72;
      mpfr_t a;
      mpfr_init2(a, p);
      mpfr_mul_si(a, rho[j].backend().data(), static_cast<long>(n), MPFR_RNDN);
      mpfr_add(a, a, theta0[j].backend().data(), MPFR_RNDN);
      mpfr_frac(a, a, MPFR_RNDN);
      mpfr_sub(a, a, s_[j].backend().data(), MPFR_RNDN);
      mpfr_sub(a, a, c_[j].backend().data(), MPFR_RNDN);
      ExtReal d;
      mpfr_set(d.backend().data(), a, MPFR_RNDN);
      mpfr_clear(a);
      d = mp::abs(d);
      if (d > ExtReal("0.5")) d = 1 - d;
      if (d > worst) worst = d;
    }
    return worst;
  }

 private:
  std::vector<ExtReal> step_, s_, c_;
};

RunResult orbit_average(const AveragingRun& run) {
  auto t0 = Clock::now();
  const std::int64_t N = std::get<DiscreteMode>(run.mode).N;
  RunPrecision prec(run.precision);
  WeightFunction w = run.weight.at_precision(run.precision);
  RotationVector rho = run.rotation.at_precision(run.precision);
  EvaluationPlan plan = run.observable.plan(tail_tol_of(run));
  std::vector<ExtReal> theta0;
  for (const auto& x : run.theta0) theta0.push_back(at_current_precision(x));

  RunResult r;
  r.diag.A_N = w.normalization_A_N(N);
  std::vector<ExtReal> wn = w.samples(N);
  // accumulate f - mean so constants come out exact
  EvaluationPlan fluct = plan;
  fluct.mean = ExtComplex();
  Orbit orbit(theta0, rho.coords());
  ComplexCompensatedSum acc;
  for (std::int64_t n = 0; n < N; ++n) {
    if (n > 0) orbit.advance();
    if (wn[n] == 0) continue;
    acc.add(evaluate(fluct, orbit.point()) * wn[n]);
  }
  r.value = plan.mean + acc.result() * ExtReal(1 / r.diag.A_N);
  r.abs_error = abs(r.value - plan.mean);
  r.N_or_T = ExtReal(N);
  r.diag.orbit_residual = orbit.residual(theta0, rho.coords(), N - 1);
  r.diag.precision_floor = rounding_floor(run, plan);
  r.diag.tail_bound = plan.tail_bound;
  r.diag.radius = plan.radius;
  r.diag.modes = static_cast<std::int64_t>(plan.indices.size());
  r.wall_ms = elapsed_ms(t0);
  return r;
}

std::int64_t pow2_at_least(double x) {
  std::int64_t n = 1;
  while (static_cast<double>(n) < x && n < (std::int64_t(1) << 40)) n <<= 1;
  return n;
}

// ContinuousMode, with the fields read at the run precision.
struct ContinuousParams {
  ExtReal T, tol;
};

ContinuousParams continuous_params(const AveragingRun& run) {
  const auto& c = std::get<ContinuousMode>(run.mode);
  return {at_current_precision(c.T), at_current_precision(c.quad_tol)};
}

}  // namespace

void validate(const AveragingRun& run) {
  if (run.precision < 30) throw DomainError("precision must be at least 30 digits");
  if (static_cast<int>(run.theta0.size()) != run.rotation.dim())
    throw DimensionError("theta0 has " + std::to_string(run.theta0.size()) +
                         " coordinates, rotation has " + std::to_string(run.rotation.dim()));
  if (run.observable.regime().dim != run.rotation.dim() ||
      run.observable.regime().kind != run.rotation.regime().kind)
    throw DimensionError("observable and rotation live on different tori");
  if (const auto* d = std::get_if<DiscreteMode>(&run.mode)) {
    std::int64_t min_n = run.weight.kind() == WeightKind::TrivialFlat ? 1 : 2;
    if (d->N < min_n) throw DomainError("N must be at least " + std::to_string(min_n));
  } else {
    const auto& c = std::get<ContinuousMode>(run.mode);
    if (c.T < 1) throw DomainError("T must be at least 1");
    if (c.quad_tol <= 0) throw DomainError("quad_tol must be positive");
  }
}

RunResult birkhoff_unweighted(const AveragingRun& run) {
  validate(run);
  if (run.weight.kind() != WeightKind::TrivialFlat)
    throw DomainError("birkhoff_unweighted needs the flat weight");
  if (!std::holds_alternative<DiscreteMode>(run.mode))
    throw DomainError("birkhoff_unweighted needs discrete mode");
  return orbit_average(run);
}

RunResult birkhoff_weighted_discrete(const AveragingRun& run) {
  validate(run);
  if (!std::holds_alternative<DiscreteMode>(run.mode))
    throw DomainError("birkhoff_weighted_discrete needs discrete mode");
  return orbit_average(run);
}

ExtComplex kernel_S_N(const WeightFunction& w, std::int64_t N, const ExtReal& x) {
  if (N < 2) throw DomainError("kernel_S_N: N must be >= 2");
  ExtReal A = w.normalization_A_N(N);
  ExtReal xr = frac(x);
  if (xr == 0) return ExtComplex(ExtReal(1));
  std::vector<ExtReal> wn = w.samples(N);
  // Horner in z = e^{2 pi i x}
  ExtComplex z = unit_phase(xr);
  ExtComplex h(wn[N - 1]);
  for (std::int64_t n = N - 2; n >= 0; --n) {
    h *= z;
    h.re += wn[n];
  }
  return h * ExtReal(1 / A);
}

OracleResult fourier_error_oracle(const AveragingRun& run, std::optional<std::int64_t> radius) {
  validate(run);
  const auto* d = std::get_if<DiscreteMode>(&run.mode);
  if (!d) throw DomainError("fourier_error_oracle needs discrete mode");
  RunPrecision prec(run.precision);
  WeightFunction w = run.weight.at_precision(run.precision);
  RotationVector rho = run.rotation.at_precision(run.precision);
  EvaluationPlan plan = run.observable.plan(tail_tol_of(run), radius);
  std::vector<ExtReal> theta0;
  for (const auto& x : run.theta0) theta0.push_back(at_current_precision(x));

  const std::int64_t N = d->N;
  ExtReal A = w.normalization_A_N(N);
  ExtReal inv_A = 1 / A;
  std::vector<ExtReal> wn = w.samples(N);
  ComplexCompensatedSum acc;
  for (std::size_t i = 0; i < plan.indices.size(); ++i) {
    const MultiIndex& k = plan.indices[i];
    ExtReal kt = 0;
    for (const auto& e : k.entries()) kt += e.value * theta0[e.index];
    ExtReal x = frac(rho.dot(k));
    ExtComplex s;
    if (x == 0) {
      s = ExtComplex(ExtReal(1));
    } else {
      ExtComplex z = unit_phase(x);
      ExtComplex h(wn[N - 1]);
      for (std::int64_t n = N - 2; n >= 0; --n) {
        h *= z;
        h.re += wn[n];
      }
      s = h * inv_A;
    }
    acc.add(plan.coeffs[i] * unit_phase(kt) * s);
  }
  return {acc.result(), plan.tail_bound, static_cast<std::int64_t>(plan.indices.size())};
}

std::vector<ExtComplex> oscillatory_weight_integrals(const WeightFunction& w,
                                                     const std::vector<ExtReal>& omegas,
                                                     const ExtReal& tol, int panels_per_cycle,
                                                     std::int64_t* panels) {
  const std::size_t M = omegas.size();
  if (M == 0) return {};
  ExtReal max_w = 0;
  for (const auto& o : omegas) max_w = mp::max(max_w, ExtReal(mp::abs(o)));
  const double cycles = std::max(1, panels_per_cycle) * (1 + to_double(max_w));
  const std::int64_t n0 = pow2_at_least(cycles);
  if (n0 > (std::int64_t(1) << 30)) throw QuadratureBudgetExceeded("frequency too large");

  const auto& rule = gauss_legendre(default_gl_order(current_digits()));
  const int G = rule.order;
  // panels have widths 2^-j exactly, so node phase offsets are cached per width
  std::map<ExtReal, std::vector<ExtComplex>> offsets;
  auto offsets_for = [&](const ExtReal& h) -> const std::vector<ExtComplex>& {
    auto it = offsets.find(h);
    if (it != offsets.end()) return it->second;
    std::vector<ExtComplex> v;
    v.reserve(M * G);
    for (std::size_t j = 0; j < M; ++j)
      for (int i = 0; i < G; ++i) v.push_back(unit_phase(omegas[j] * h * rule.nodes[i]));
    return offsets.emplace(h, std::move(v)).first->second;
  };

  PanelEstimator est = [&](const ExtReal& a, const ExtReal& b, std::vector<ExtReal>& out) {
    ExtReal h = (b - a) / 2;
    ExtReal c = (a + b) / 2;
    const auto& off = offsets_for(h);
    std::vector<ExtReal> wy(G);
    for (int i = 0; i < G; ++i) wy[i] = rule.weights[i] * w(c + h * rule.nodes[i]);
    for (std::size_t j = 0; j < M; ++j) {
      ExtComplex sum;
      for (int i = 0; i < G; ++i) sum += off[j * G + i] * wy[i];
      sum *= unit_phase(omegas[j] * c);
      out[2 * j] = sum.re * h;
      out[2 * j + 1] = sum.im * h;
    }
  };
  AdaptiveOptions opt;
  opt.abs_tol = tol;
  opt.initial_panels = static_cast<int>(n0);
  AdaptiveReport rep;
  auto q = integrate_adaptive(est, 2 * M, ExtReal(0), ExtReal(1), opt, &rep);
  if (panels) *panels = rep.panels;
  std::vector<ExtComplex> res(M);
  for (std::size_t j = 0; j < M; ++j) res[j] = ExtComplex(q[2 * j], q[2 * j + 1]);
  return res;
}

RunResult birkhoff_weighted_continuous(const AveragingRun& run) {
  validate(run);
  auto t0 = Clock::now();
  RunPrecision prec(run.precision);
  auto [T, tol] = continuous_params(run);
  WeightFunction w = run.weight.at_precision(run.precision);
  RotationVector rho = run.rotation.at_precision(run.precision);
  EvaluationPlan plan = run.observable.plan(tail_tol_of(run));
  std::vector<ExtReal> theta0;
  for (const auto& x : run.theta0) theta0.push_back(at_current_precision(x));

  // I_T(-w) = conj(I_T(w)) for real weights: integrate positive modes only
  std::unordered_map<std::string, std::size_t> slot;
  std::vector<ExtReal> omegas;
  for (const auto& k : plan.indices) {
    const MultiIndex& kp = k.is_positive() ? k : -k;
    auto key = kp.str();
    if (slot.count(key)) continue;
    slot.emplace(key, omegas.size());
    omegas.push_back(T * rho.dot(kp));
  }
  RunResult r;
  auto I = oscillatory_weight_integrals(w, omegas, tol, 1, &r.diag.panels);
  ComplexCompensatedSum acc;
  acc.add(plan.mean);
  for (std::size_t i = 0; i < plan.indices.size(); ++i) {
    const MultiIndex& k = plan.indices[i];
    bool pos = k.is_positive();
    const ExtComplex& v = I[slot.at((pos ? k : -k).str())];
    ExtReal kt = 0;
    for (const auto& e : k.entries()) kt += e.value * theta0[e.index];
    acc.add(plan.coeffs[i] * unit_phase(kt) * (pos ? v : conj(v)));
  }
  r.value = acc.result();
  r.abs_error = abs(r.value - plan.mean);
  r.N_or_T = T;
  r.diag.orbit_residual = 0;
  r.diag.precision_floor = rounding_floor(run, plan) + tol * plan.abs_sum;
  r.diag.tail_bound = plan.tail_bound;
  r.diag.radius = plan.radius;
  r.diag.modes = static_cast<std::int64_t>(plan.indices.size());
  r.wall_ms = elapsed_ms(t0);
  return r;
}

RunResult birkhoff_continuous_time_domain(const AveragingRun& run) {
  validate(run);
  auto t0 = Clock::now();
  RunPrecision prec(run.precision);
  auto [T, tol] = continuous_params(run);
  WeightFunction w = run.weight.at_precision(run.precision);
  RotationVector rho = run.rotation.at_precision(run.precision);
  EvaluationPlan plan = run.observable.plan(tail_tol_of(run));
  std::vector<ExtReal> theta0;
  for (const auto& x : run.theta0) theta0.push_back(at_current_precision(x));

  ExtReal max_freq = 0;
  for (const auto& k : plan.indices) max_freq = mp::max(max_freq, ExtReal(mp::abs(rho.dot(k))));
  const auto& rule = gauss_legendre(default_gl_order(current_digits()));
  const std::size_t d = theta0.size();
  // y in [0,1] is time t = T y
  PanelEstimator est = [&](const ExtReal& a, const ExtReal& b, std::vector<ExtReal>& out) {
    ExtReal h = (b - a) / 2, c = (a + b) / 2;
    ExtComplex sum;
    std::vector<ExtReal> pt(d);
    for (int i = 0; i < rule.order; ++i) {
      ExtReal y = c + h * rule.nodes[i];
      ExtReal wy = w(y);
      if (wy == 0) continue;
      ExtReal t = T * y;
      for (std::size_t j = 0; j < d; ++j) pt[j] = frac(theta0[j] + rho.coords()[j] * t);
      sum += evaluate(plan, pt) * ExtReal(rule.weights[i] * wy);
    }
    out[0] = sum.re * h;
    out[1] = sum.im * h;
  };
  AdaptiveOptions opt;
  opt.abs_tol = tol;
  opt.initial_panels = static_cast<int>(pow2_at_least(1 + to_double(T * max_freq)));
  AdaptiveReport rep;
  auto q = integrate_adaptive(est, 2, ExtReal(0), ExtReal(1), opt, &rep);
  RunResult r;
  r.value = ExtComplex(q[0], q[1]);
  r.abs_error = abs(r.value - plan.mean);
  r.N_or_T = T;
  r.diag.orbit_residual = 0;
  r.diag.precision_floor = rounding_floor(run, plan) + tol;
  r.diag.tail_bound = plan.tail_bound;
  r.diag.radius = plan.radius;
  r.diag.modes = static_cast<std::int64_t>(plan.indices.size());
  r.diag.panels = rep.panels;
  r.wall_ms = elapsed_ms(t0);
  return r;
}

RunResult run(const AveragingRun& r) {
  if (std::holds_alternative<ContinuousMode>(r.mode)) return birkhoff_weighted_continuous(r);
  if (r.weight.kind() == WeightKind::TrivialFlat) return birkhoff_unweighted(r);
  return birkhoff_weighted_discrete(r);
}

}  // namespace wba
