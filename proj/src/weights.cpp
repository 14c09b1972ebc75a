#include "wba/weights.hpp"

#include "wba/errors.hpp"
#include "wba/quadrature.hpp"
#include "wba/spec_parse.hpp"
#include "wba/summation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>

namespace wba {

namespace mp = boost::multiprecision;

namespace {

constexpr int kGuardDigits = 10;

std::mutex g_norm_mutex;
std::map<std::pair<std::string, int>, ExtReal> g_norm_cache;

// exp(-t) for t beyond this would leave MPFR's exponent range
const ExtReal& underflow_knee() {
  static const ExtReal knee("5e8");
  return knee;
}

ExtReal bump_exponent(const ExtReal& x, const ExtReal& p, const ExtReal& q) {
  return mp::pow(x, -p) * mp::pow(1 - x, -q);
}

ExtReal integrate_bump(const ExtReal& p, const ExtReal& q) {
  const ExtReal& knee = underflow_knee();
  auto f = [&](const ExtReal& x) -> ExtReal {
    if (x <= 0 || x >= 1) return ExtReal(0);
    ExtReal t = bump_exponent(x, p, q);
    if (t > knee) return ExtReal(0);
    return mp::exp(-t);
  };
  ExtReal peak = 0;
  for (int i = 1; i < 256; ++i) peak = mp::max(peak, f(ExtReal(i) / 256));
  return integrate(f, ExtReal(0), ExtReal(1), peak * ten_pow_neg(current_digits() - 5), 0, 16);
}

ExtReal factorial(int n) {
  ExtReal r = 1;
  for (int i = 2; i <= n; ++i) r *= i;
  return r;
}

}  // namespace

WeightFunction WeightFunction::exp_bump() {
  WeightFunction w;
  w.kind_ = WeightKind::ExpBump;
  w.spec_ = "exp";
  w.p_str_ = w.q_str_ = "1";
  w.init();
  return w;
}

WeightFunction WeightFunction::bump(const std::string& p, const std::string& q) {
  WeightFunction w;
  w.kind_ = WeightKind::BumpPQ;
  w.p_str_ = spec::real_literal(p, "weight.p");
  w.q_str_ = spec::real_literal(q, "weight.q");
  if (spec::to_double(p, "weight.p") <= 0 || spec::to_double(q, "weight.q") <= 0)
    throw ParseError("weight", "bump exponents must be positive");
  w.spec_ = "bump:p=" + w.p_str_ + ",q=" + w.q_str_;
  w.init();
  return w;
}

WeightFunction WeightFunction::poly(int s) {
  if (s < 3) throw ParseError("weight.s", "poly weight needs s >= 3");
  WeightFunction w;
  w.kind_ = WeightKind::PolyBump;
  w.s_ = s;
  w.spec_ = "poly:s=" + std::to_string(s);
  w.init();
  return w;
}

WeightFunction WeightFunction::flat() {
  WeightFunction w;
  w.kind_ = WeightKind::TrivialFlat;
  w.spec_ = "flat";
  w.init();
  return w;
}

WeightFunction WeightFunction::parse(const std::string& text) {
  auto [head, body] = spec::split_head(text);
  auto kv = spec::parse_kv(body, "weight");
  if (head == "exp" && kv.empty()) return exp_bump();
  if (head == "flat" && kv.empty()) return flat();
  if (head == "bump") {
    spec::require_keys(kv, {"p", "q"}, "weight");
    return bump(spec::get(kv, "p", "weight"), spec::get(kv, "q", "weight"));
  }
  if (head == "poly") {
    spec::require_keys(kv, {"s"}, "weight");
    return poly(static_cast<int>(spec::to_int(spec::get(kv, "s", "weight"), "weight.s")));
  }
  throw ParseError("weight", "unknown weight spec '" + text + "'");
}

void WeightFunction::init() {
  digits_ = current_digits();
  {
    PrecisionScope scope(digits_ + kGuardDigits);
    compute_normalizer();
  }
  // store everything at the working precision: mixed-precision arithmetic
  // would make Boost switch the process-wide default precision mid-expression
  p_ = at_current_precision(p_);
  q_ = at_current_precision(q_);
  normalizer_ = at_current_precision(normalizer_);
}

void WeightFunction::compute_normalizer() {
  if (kind_ == WeightKind::BumpPQ || kind_ == WeightKind::ExpBump) {
    p_ = ExtReal(p_str_);
    q_ = ExtReal(q_str_);
  }
  switch (kind_) {
    case WeightKind::TrivialFlat:
      normalizer_ = 1;
      return;
    case WeightKind::PolyBump: {
      // int_0^1 (x(1-x))^s = (s!)^2/(2s+1)!
      normalizer_ = factorial(2 * s_ + 1) / (factorial(s_) * factorial(s_));
      // Gauss-Legendre with s+1 nodes is exact for this degree-2s integrand.
      const auto& rule = gauss_legendre(s_ + 1);
      ExtReal q = 0;
      for (int j = 0; j < rule.order; ++j) {
        ExtReal x = (rule.nodes[j] + 1) / 2;
        q += rule.weights[j] * mp::pow(x * (1 - x), s_) / 2;
      }
      if (mp::abs(q * normalizer_ - 1) > ten_pow_neg(digits_))
        throw PrecisionExhausted("poly weight normalization check failed");
      return;
    }
    case WeightKind::BumpPQ:
    case WeightKind::ExpBump: {
      std::lock_guard<std::mutex> lock(g_norm_mutex);
      auto key = std::make_pair(spec_, digits_);
      auto it = g_norm_cache.find(key);
      if (it == g_norm_cache.end())
        it = g_norm_cache.emplace(key, ExtReal(1 / integrate_bump(p_, q_))).first;
      normalizer_ = it->second;
      return;
    }
  }
}

std::optional<int> WeightFunction::smoothness_order() const {
  switch (kind_) {
    case WeightKind::PolyBump:
      return s_ - 1;
    case WeightKind::TrivialFlat:
      return 0;
    default:
      return std::nullopt;
  }
}

bool WeightFunction::symmetric() const {
  if (kind_ == WeightKind::BumpPQ) return p_str_ == q_str_ || p_ == q_;
  return true;
}

WeightFunction WeightFunction::at_precision(int digits) const {
  if (digits <= digits_) return *this;
  PrecisionScope scope(digits);
  WeightFunction w = *this;
  w.init();
  return w;
}

ExtReal WeightFunction::unnormalized(const ExtReal& x) const {
  if (x < 0 || x > 1) throw DomainError("weight evaluated outside [0,1]: " + to_sci(x, 10));
  switch (kind_) {
    case WeightKind::TrivialFlat:
      return ExtReal(1);
    case WeightKind::PolyBump:
      return mp::pow(x * (1 - x), s_);
    default: {
      if (x == 0 || x == 1) return ExtReal(0);
      ExtReal t = kind_ == WeightKind::ExpBump ? ExtReal(1 / (x * (1 - x)))
                                               : bump_exponent(x, p_, q_);
      if (t > underflow_knee()) return ExtReal(0);
      return mp::exp(-t);
    }
  }
}

ExtReal WeightFunction::operator()(const ExtReal& x) const {
  if (kind_ == WeightKind::TrivialFlat) {
    if (x < 0 || x > 1) throw DomainError("weight evaluated outside [0,1]: " + to_sci(x, 10));
    return ExtReal(1);
  }
  ExtReal u = unnormalized(x);
  if (u == 0) return u;
  return u * normalizer_;
}

std::vector<ExtReal> WeightFunction::samples(std::int64_t N) const {
  if (N < 1) throw DomainError("samples: N must be >= 1");
  std::vector<ExtReal> out;
  out.reserve(static_cast<std::size_t>(N));
  for (std::int64_t n = 0; n < N; ++n) out.push_back((*this)(ExtReal(n) / N));
  return out;
}

ExtReal WeightFunction::normalization_A_N(std::int64_t N) const {
  if (N < 1) throw DegenerateWindow("A_N needs N >= 1");
  if (kind_ == WeightKind::TrivialFlat) return ExtReal(N);
  CompensatedSum<ExtReal> s;
  for (std::int64_t n = 1; n < N; ++n) s.add((*this)(ExtReal(n) / N));
  ExtReal a = s.result();
  if (a <= 0) throw DegenerateWindow("A_N = 0 for " + spec_ + " at N = " + std::to_string(N));
  return a;
}

DerivCoeffTable deriv_coeff_table(int n) {
  if (n < 0) throw DomainError("deriv_coeff_table: n must be >= 0");
  return deriv_coeff_tables(n).back();
}

std::vector<DerivCoeffTable> deriv_coeff_tables(int n_max) {
  std::vector<DerivCoeffTable> out;
  DerivCoeffTable t;
  t.order = 0;
  t.coeffs = {BigInt(1)};
  t.b = 1;
  out.push_back(t);
  for (int n = 1; n <= n_max; ++n) {
    const auto& prev = out.back().coeffs;
    DerivCoeffTable next;
    next.order = n;
    next.coeffs.assign(2 * n + 1, BigInt(0));
    // d/dx [x^{-j} e^{-1/x}] = (x^{-j-2} - j x^{-j-1}) e^{-1/x}
    for (std::size_t j = 0; j < prev.size(); ++j) {
      if (prev[j] == 0) continue;
      next.coeffs[j + 2] += prev[j];
      next.coeffs[j + 1] -= BigInt(static_cast<long>(j)) * prev[j];
    }
    next.b = 0;
    for (const auto& a : next.coeffs) next.b = std::max(next.b, BigInt(abs(a)));
    out.push_back(std::move(next));
  }
  return out;
}

namespace {

// wbar^(n)(x) = C* e^{-1/(x(1-x))} Q_n(x),
// Q_n(x) = sum_i C(n,i) (-1)^{n-i} p_i(1/x) p_{n-i}(1/(1-x))
class DerivativeEvaluator {
 public:
  explicit DerivativeEvaluator(int n) : n_(n) {
    auto tables = deriv_coeff_tables(n);
    BigInt binom = 1;
    for (int i = 0; i <= n; ++i) {
      std::vector<ExtReal> c;
      for (const auto& a : tables[i].coeffs) c.emplace_back(a);
      poly_.push_back(std::move(c));
      ExtReal bi(binom);
      binom_.push_back((n - i) % 2 == 0 ? bi : ExtReal(-bi));
      binom = binom * (n - i) / (i + 1);
    }
  }

  ExtReal q(const ExtReal& x) const {
    ExtReal u = 1 / x, v = 1 / (1 - x);
    std::vector<ExtReal> pu(n_ + 1), pv(n_ + 1);
    for (int i = 0; i <= n_; ++i) {
      pu[i] = horner(poly_[i], u);
      pv[i] = horner(poly_[i], v);
    }
    CompensatedSum<ExtReal> s;
    for (int i = 0; i <= n_; ++i) s.add(binom_[i] * pu[i] * pv[n_ - i]);
    return s.result();
  }

  // |Q| upper bound using |a_j| and v <= 2 (x <= 1/2)
  ExtReal q_bound(const ExtReal& u) const {
    ExtReal total = 0;
    for (int i = 0; i <= n_; ++i)
      total += mp::abs(binom_[i]) * abs_horner(poly_[i], u) * abs_horner(poly_[n_ - i], ExtReal(2));
    return total;
  }

 private:
  static ExtReal horner(const std::vector<ExtReal>& c, const ExtReal& u) {
    ExtReal r = 0;
    for (auto it = c.rbegin(); it != c.rend(); ++it) r = r * u + *it;
    return r;
  }
  static ExtReal abs_horner(const std::vector<ExtReal>& c, const ExtReal& u) {
    ExtReal r = 0;
    for (auto it = c.rbegin(); it != c.rend(); ++it) r = r * u + mp::abs(*it);
    return r;
  }

  int n_;
  std::vector<std::vector<ExtReal>> poly_;
  std::vector<ExtReal> binom_;
};

int sign_of(const ExtReal& v) { return v > 0 ? 1 : (v < 0 ? -1 : 0); }

}  // namespace

ExtReal l1_derivative_norm(int n, int digits) {
  if (n < 1) throw DomainError("l1_derivative_norm: n must be >= 1");
  const int out_digits = current_digits();
  // Terms of Q_n cancel heavily; carry enough digits to cover the coefficient
  // growth on top of the requested accuracy.
  double b_digits = 0;
  {
    auto t = deriv_coeff_table(n);
    b_digits = 2 * static_cast<double>(t.b.str().size()) + n * 0.31 + 4 * std::log10(2.0 * n + 2);
  }
  const int work = digits + static_cast<int>(b_digits) + 10;
  PrecisionScope scope(work);
  WeightFunction wbar = WeightFunction::exp_bump();
  const ExtReal& cstar = wbar.normalizer();
  DerivativeEvaluator ev(n);

  // Left cut-off: below x_min the integrand is under 10^{-(work)}.
  const ExtReal tiny = ten_pow_neg(work + 10);
  ExtReal u_max = 4;
  while (cstar * mp::exp(-u_max) * ev.q_bound(u_max) * 4 > tiny) u_max *= 2;
  const ExtReal x_min = 1 / u_max;
  const ExtReal half = ExtReal(1) / 2;

  auto g = [&](const ExtReal& x) -> ExtReal {
    if (x <= 0 || x >= 1) return ExtReal(0);
    return cstar * mp::exp(-1 / (x * (1 - x))) * ev.q(x);
  };

  // Sign changes of Q on [x_min, 1/2): mixed linear/logarithmic grid, then
  // bisection to full precision. For odd n, Q(1/2) = 0 by antisymmetry.
  const ExtReal right = n % 2 == 1 ? ExtReal(half * (1 - ExtReal(1e-12))) : half;
  std::vector<ExtReal> roots;
  const ExtReal eps = ldexp(ExtReal(1), -static_cast<int>(work * 3.33) + 4);
  for (int refine = 1; refine <= 16; refine *= 4) {
    const int m = 1500 * refine;
    std::vector<ExtReal> grid;
    grid.reserve(2 * m + 2);
    for (int i = 0; i <= m; ++i) grid.push_back(x_min + (right - x_min) * i / m);
    ExtReal lr = mp::log(right / x_min);
    for (int i = 1; i < m; ++i) grid.push_back(x_min * mp::exp(lr * i / m));
    std::sort(grid.begin(), grid.end());
    roots.clear();
    ExtReal prev_x = grid.front();
    int prev_s = sign_of(ev.q(prev_x));
    for (std::size_t i = 1; i < grid.size(); ++i) {
      int s = sign_of(ev.q(grid[i]));
      if (s != 0 && prev_s != 0 && s != prev_s) {
        ExtReal lo = prev_x, hi = grid[i];
        int slo = prev_s;
        while (hi - lo > eps * hi) {
          ExtReal mid = (lo + hi) / 2;
          int sm = sign_of(ev.q(mid));
          if (sm == 0) {
            lo = hi = mid;
            break;
          }
          if (sm == slo)
            lo = mid;
          else
            hi = mid;
        }
        roots.push_back((lo + hi) / 2);
      }
      if (s != 0) {
        prev_s = s;
        prev_x = grid[i];
      }
    }
    // wbar^(n) has at least n sign changes in (0,1) (Rolle); by symmetry the
    // left half holds floor(n/2) of them.
    if (static_cast<int>(roots.size()) >= n / 2) break;
  }

  std::vector<ExtReal> cuts;
  cuts.push_back(x_min);
  for (auto& r : roots) cuts.push_back(r);
  cuts.push_back(half);

  // rough magnitude for the absolute tolerance
  const auto& rule = gauss_legendre(default_gl_order(work));
  ExtReal rough = 0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    ExtReal c = (cuts[i] + cuts[i + 1]) / 2, h = (cuts[i + 1] - cuts[i]) / 2;
    ExtReal s = 0;
    for (int j = 0; j < rule.order; ++j) s += rule.weights[j] * g(c + h * rule.nodes[j]);
    rough += mp::abs(h * s);
  }
  const ExtReal tol = rough * ten_pow_neg(digits / 2 + 12) / cuts.size();

  CompensatedSum<ExtReal> total;
  try {
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
      ExtReal piece = integrate(g, cuts[i], cuts[i + 1], tol, 0, 4);
      total.add(mp::abs(piece));
    }
  } catch (const QuadratureBudgetExceeded& e) {
    throw PrecisionExhausted(std::string("l1_derivative_norm: ") + e.what());
  }
  return ExtReal(2 * total.result(), static_cast<unsigned>(out_digits));
}

std::vector<L1NormRow> l1_norm_table(int n_max, int digits) {
  std::vector<L1NormRow> rows;
  for (int n = 2; n <= n_max; ++n) {
    ExtReal v = l1_derivative_norm(n, digits);
    double e = to_double(mp::log(v)) / (n * std::log(static_cast<double>(n)));
    rows.push_back({n, v, e});
  }
  return rows;
}

double empirical_beta(const std::vector<L1NormRow>& table) {
  const double log_cstar = std::log(to_double(WeightFunction::exp_bump().normalizer()));
  double beta = 0;
  for (const auto& r : table)
    beta = std::max(beta, (to_double(mp::log(r.value)) - log_cstar) /
                              (r.n * std::log(static_cast<double>(r.n))));
  return beta;
}

}  // namespace wba
