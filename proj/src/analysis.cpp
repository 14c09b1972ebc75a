#include "wba/analysis.hpp"

#include "wba/errors.hpp"
#include "wba/lattice.hpp"
#include "wba/quadrature.hpp"
#include "wba/spec_parse.hpp"
#include "wba/summation.hpp"
#include "wba/weights.hpp"

#include <boost/math/special_functions/zeta.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>

namespace wba {

namespace mp = boost::multiprecision;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// log f(r) ~ e * exp(r) + sum_nu c_nu r^nu + l * log r as r -> inf
struct Growth {
  double e = 0;
  std::map<double, double> pw;
  double l = 0;
};

std::optional<Growth> growth_of(const ApproximationFunction& f) {
  Growth g;
  switch (f.kind()) {
    case ApproxKind::Power:
      g.l = f.param1();
      return g;
    case ApproxKind::StretchedExp:
      g.pw[f.param2()] = f.param1();
      return g;
    case ApproxKind::DoubleExp:
      g.e = 1;
      return g;
    default:
      return std::nullopt;
  }
}

void accumulate(Growth& into, const Growth& g, double s) {
  into.e += s * g.e;
  for (const auto& [nu, c] : g.pw) into.pw[nu] += s * c;
  into.l += s * g.l;
}

// int^inf exp(G(r)) dr < inf ?
bool integrable(const Growth& g) {
  constexpr double eps = 1e-12;
  if (std::abs(g.e) > eps) return g.e < 0;
  for (auto it = g.pw.rbegin(); it != g.pw.rend(); ++it)
    if (std::abs(it->second) > eps) return it->second < 0;
  return g.l < -1 - eps;
}

double to_log_double(const ExtReal& x) {
  if (mp::isinf(x)) return x > 0 ? kInf : -kInf;
  return to_double(x);
}

ExtReal log_sum_exp(const ExtReal& a, const ExtReal& b) {
  if (mp::isinf(a) && a < 0) return b;
  if (mp::isinf(b) && b < 0) return a;
  const ExtReal& hi = a > b ? a : b;
  const ExtReal& lo = a > b ? b : a;
  return hi + mp::log1p(mp::exp(lo - hi));
}

ExtReal neg_inf() { return ExtReal(-std::numeric_limits<double>::infinity()); }
ExtReal pos_inf() { return ExtReal(std::numeric_limits<double>::infinity()); }

// log of r^{d-1} Delta^m(r) / Dtilde(r)
ExtReal log_integrand(const ApproximationFunction& delta, const ApproximationFunction& dtilde,
                      int m, int d, const ExtReal& r) {
  return (d - 1) * mp::log(r) + m * delta.log_value(r) - dtilde.log_value(r);
}

// number of k in Z^d with ||k||_1 = r
ExtReal l1_shell_count(int d, std::int64_t r) {
  if (r == 0) return ExtReal(1);
  ExtReal total = 0, binom_d = 1, binom_r = 1;
  // sum_{i=1}^{min(d,r)} 2^i C(d,i) C(r-1,i-1)
  for (int i = 1; i <= d && i <= r; ++i) {
    binom_d = binom_d * (d - i + 1) / i;
    if (i > 1) binom_r = binom_r * (r - i + 1) / (i - 1);
    total += mp::ldexp(binom_d * binom_r, i);
  }
  return total;
}

std::vector<ExtReal> log_eta_shell_counts(int eta, std::int64_t nu_max) {
  auto counts = shell_counts(eta_weights(eta, nu_max, std::nullopt), nu_max);
  std::vector<ExtReal> out;
  out.reserve(counts.size());
  for (const auto& c : counts) out.push_back(c == 0 ? neg_inf() : ExtReal(mp::log(ExtReal(c.str()))));
  return out;
}

struct TailVerdict {
  Verdict verdict;
  std::string reason;
  std::optional<LineFit> linear, stretched;
  double decay = 0;
};

// Shared decision for (H3)/(H4) on the table (x, log T(x)).
TailVerdict smallness_verdict(const std::vector<std::pair<double, double>>& table) {
  TailVerdict v{Verdict::Fails, "", {}, {}, 0};
  for (const auto& [x, lt] : table)
    if (lt == kInf) {
      v.reason = "tail diverges at x = " + std::to_string(x);
      return v;
    }
  const std::size_t n = table.size(), start = n / 2;
  std::vector<double> xs, ys, lx, lly;
  for (std::size_t i = start; i < n; ++i) {
    const auto& [x, lt] = table[i];
    if (lt == -kInf) continue;
    xs.push_back(x);
    ys.push_back(lt);
    if (lt < 0) {
      lx.push_back(std::log(x));
      lly.push_back(std::log(-lt));
    }
  }
  if (xs.size() >= 3) v.linear = fit_line(xs, ys);
  if (lx.size() >= 3) v.stretched = fit_line(lx, lly);
  // r(x) = -log T(x) / x must stay positive and not decay over the tail window
  double min_a = kInf, min_b = kInf;
  const std::size_t mid = start + (n - start) / 2;
  for (std::size_t i = start; i < n; ++i) {
    double r = table[i].second == -kInf ? kInf : -table[i].second / table[i].first;
    (i < mid ? min_a : min_b) = std::min(i < mid ? min_a : min_b, r);
  }
  bool linear_ok = v.linear && v.linear->slope < 0 && v.linear->r2 >= 0.99;
  bool rate_ok = min_a > 0 && min_b >= min_a;
  if (linear_ok) {
    v.verdict = Verdict::Holds;
    v.decay = -v.linear->slope;
    v.reason = "log T(x) is linear in x with negative slope";
  } else if (rate_ok) {
    v.verdict = Verdict::Holds;
    v.decay = std::min(min_a, min_b);
    v.reason = "-log T(x)/x is positive and non-decaying on the tail window";
  } else {
    v.decay = std::max(0.0, std::min(min_a, min_b));
    v.reason = "tail decays slower than e^{-cx}";
  }
  return v;
}

nlohmann::json fit_json(const LineFit& f) {
  return {{"slope", f.slope},
          {"intercept", f.intercept},
          {"slope_stderr", f.slope_stderr},
          {"r2", f.r2},
          {"points", f.points}};
}

}  // namespace

// ---------------------------------------------------------------- adaptive

AdaptiveFunction AdaptiveFunction::log_pow(double u) {
  if (!(u > 0)) throw ParseError("phi.u", "must be positive");
  AdaptiveFunction f;
  f.kind_ = AdaptiveKind::LogPow;
  f.p_ = u;
  std::ostringstream os;
  os << "logpow:u=" << u;
  f.spec_ = os.str();
  return f;
}

AdaptiveFunction AdaptiveFunction::pow(double v) {
  if (!(v > 0 && v < 1)) throw ParseError("phi.v", "must lie in (0,1)");
  AdaptiveFunction f;
  f.kind_ = AdaptiveKind::Pow;
  f.p_ = v;
  std::ostringstream os;
  os << "pow:v=" << v;
  f.spec_ = os.str();
  return f;
}

AdaptiveFunction AdaptiveFunction::parse(const std::string& text) {
  auto [head, body] = spec::split_head(text);
  auto kv = spec::parse_kv(body, "phi");
  if (head == "logpow") {
    spec::require_keys(kv, {"u"}, "phi");
    return log_pow(spec::to_double(spec::get(kv, "u", "phi"), "phi.u"));
  }
  if (head == "pow") {
    spec::require_keys(kv, {"v"}, "phi");
    return pow(spec::to_double(spec::get(kv, "v", "phi"), "phi.v"));
  }
  throw ParseError("phi", "unknown adaptive function '" + text + "'");
}

ExtReal AdaptiveFunction::operator()(const ExtReal& x) const {
  if (x < 1) throw DomainError("adaptive functions live on [1, inf)");
  if (kind_ == AdaptiveKind::LogPow) return mp::pow(mp::log1p(x), ExtReal(p_));
  return mp::pow(x, ExtReal(p_));
}

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::Converges:
      return "converges";
    case Verdict::Diverges:
      return "diverges";
    case Verdict::Holds:
      return "holds";
    case Verdict::Fails:
      return "fails";
    default:
      return "inconclusive";
  }
}

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  if (n < 3 || y.size() != n) throw InsufficientData("line fit needs at least 3 points");
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0) throw InsufficientData("line fit needs distinct abscissae");
  LineFit f;
  f.points = static_cast<int>(n);
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double ssr = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double r = y[i] - (f.intercept + f.slope * x[i]);
    ssr += r * r;
  }
  f.r2 = syy > 0 ? std::clamp(1 - ssr / syy, 0.0, 1.0) : 1.0;
  f.slope_stderr = std::sqrt(ssr / (n - 2) / sxx);
  return f;
}

nlohmann::json to_json(const HypothesisResult& r) {
  nlohmann::json j;
  j["schema"] = "wba-verdict/1";
  j["hypothesis"] = r.hypothesis;
  j["verdict"] = to_string(r.verdict);
  j["reason"] = r.reason;
  if (r.estimate) j["estimate"] = to_sci(*r.estimate, 17);
  auto& t = j["table"] = nlohmann::json::array();
  for (const auto& [x, v] : r.table) {
    nlohmann::json row = {x, nullptr};
    if (std::isfinite(v)) row[1] = v;
    t.push_back(row);
  }
  if (r.linear_fit) j["linear_fit"] = fit_json(*r.linear_fit);
  if (r.stretched_fit) j["stretched_fit"] = fit_json(*r.stretched_fit);
  j["decay_constant"] = r.decay_constant;
  return j;
}

// ---------------------------------------------------------------- H1

HypothesisResult check_H1(const ApproximationFunction& delta, const ApproximationFunction& dtilde,
                          int m, int d) {
  if (m < 2 || d < 1) throw DomainError("check_H1 needs m >= 2 and d >= 1");
  HypothesisResult res;
  res.hypothesis = "H1";

  // numeric trend: integrals over dyadic blocks [2^j, 2^{j+1}] in log r
  bool bounded = delta.kind() == ApproxKind::DiophProduct || delta.kind() == ApproxKind::Tabulated ||
                 dtilde.kind() == ApproxKind::DiophProduct || dtilde.kind() == ApproxKind::Tabulated;
  const int blocks = bounded ? 12 : 24;
  const auto& rule = gauss_legendre(24);
  const ExtReal ln2 = mp::log(ExtReal(2));
  ExtReal total = neg_inf();
  std::vector<ExtReal> logs;
  try {
    for (int j = 0; j < blocks; ++j) {
      ExtReal a = j * ln2, h = ln2 / 2;
      ExtReal acc = neg_inf();
      for (int i = 0; i < rule.order; ++i) {
        ExtReal s = a + h + h * rule.nodes[i];
        ExtReal v = log_integrand(delta, dtilde, m, d, mp::exp(s)) + s + mp::log(rule.weights[i] * h);
        acc = log_sum_exp(acc, v);
      }
      logs.push_back(acc);
      res.table.emplace_back(std::ldexp(1.0, j), to_log_double(acc));
      total = log_sum_exp(total, acc);
    }
  } catch (const DomainError&) {
    // tabulated functions end at their last knot
  }
  res.estimate = mp::exp(total);

  enum class Trend { Down, Up, Unclear } trend = Trend::Unclear;
  const std::size_t k = logs.size();
  if (k >= 6) {
    bool down = true, up = true;
    for (std::size_t i = k - 5; i < k; ++i) {
      if (!(logs[i] < logs[i - 1]) && !(mp::isinf(logs[i]) && logs[i] < 0)) down = false;
      if (!(logs[i] >= logs[i - 1])) up = false;
    }
    if (down) trend = Trend::Down;
    if (up && !down) trend = Trend::Up;
  }

  auto gd = growth_of(delta), gt = growth_of(dtilde);
  if (gd && gt) {
    Growth g;
    g.l = d - 1;
    accumulate(g, *gd, m);
    accumulate(g, *gt, -1);
    bool conv = integrable(g);
    if ((conv && trend == Trend::Up) || (!conv && trend == Trend::Down && k >= 6 &&
                                         logs.back() - logs.front() < -40)) {
      res.verdict = Verdict::Inconclusive;
      res.reason = "asymptotic comparison and the numeric block trend disagree";
    } else {
      res.verdict = conv ? Verdict::Converges : Verdict::Diverges;
      res.reason = conv ? "integrand decays faster than 1/r at infinity"
                        : "integrand does not decay faster than 1/r at infinity";
    }
    return res;
  }
  // no closed-form growth: decide from the block trend alone
  if (trend == Trend::Down) {
    ExtReal q = mp::exp(logs[k - 1] - logs[k - 2]);
    ExtReal rem = mp::exp(logs[k - 1]) * q / (1 - q);
    if (q < ExtReal("0.9") && rem <= ExtReal("1e-3") * mp::exp(total)) {
      res.verdict = Verdict::Converges;
      res.reason = "dyadic blocks decay geometrically";
      return res;
    }
  }
  if (trend == Trend::Up) {
    res.verdict = Verdict::Diverges;
    res.reason = "dyadic block integrals do not decrease";
    return res;
  }
  res.verdict = Verdict::Inconclusive;
  res.reason = "numeric block trend is not decisive";
  return res;
}

// ---------------------------------------------------------------- H2

HypothesisResult check_H2(const ApproximationFunction& dd, const ApproximationFunction& dtilde_inf,
                          int m, int eta, std::int64_t nu_max) {
  if (nu_max < 8) throw DomainError("check_H2 needs nu_max >= 8");
  if (m < 1 || eta < 1) throw DomainError("check_H2 needs m >= 1 and eta >= 1");
  HypothesisResult res;
  res.hypothesis = "H2";
  auto lc = log_eta_shell_counts(eta, nu_max);
  std::vector<ExtReal> t(nu_max + 1);
  ExtReal total = neg_inf();
  for (std::int64_t nu = 1; nu <= nu_max; ++nu) {
    ExtReal x(nu);
    t[nu] = lc[nu] + m * dd.log_value(x) - dtilde_inf.log_value(x);
    total = log_sum_exp(total, t[nu]);
    res.table.emplace_back(static_cast<double>(nu), to_log_double(t[nu]));
  }
  res.estimate = mp::exp(total);
  bool down = true, up = true;
  ExtReal worst_ratio = neg_inf();
  for (std::int64_t nu = nu_max - 6; nu <= nu_max; ++nu) {
    ExtReal dlt = t[nu] - t[nu - 1];
    if (!(dlt < 0)) down = false;
    if (!(dlt >= 0)) up = false;
    if (nu > nu_max - 3) worst_ratio = mp::max(worst_ratio, dlt);
  }
  if (down) {
    ExtReal q = mp::exp(worst_ratio);
    ExtReal rem = t[nu_max] + mp::log(q / (1 - q));
    if (rem - total < mp::log(ExtReal("1e-3"))) {
      res.verdict = Verdict::Converges;
      res.reason = "shell terms decay geometrically; remainder below 1e-3 of the partial sum";
      return res;
    }
    res.verdict = Verdict::Inconclusive;
    res.reason = "shell terms decrease but the remainder is not yet small";
    return res;
  }
  if (up) {
    res.verdict = Verdict::Diverges;
    res.reason = "shell terms grow over the last shells";
    return res;
  }
  res.verdict = Verdict::Inconclusive;
  res.reason = "shell terms are not monotone over the last shells";
  return res;
}

// ---------------------------------------------------------------- H3

ExtReal partition_threshold(const ApproximationFunction& delta, const ExtReal& alpha,
                            const AdaptiveFunction& phi, const ExtReal& x) {
  return delta.inverse(2 * const_pi() * alpha * x / phi(x));
}

ExtReal log_tail_integral(const ApproximationFunction& delta, const ApproximationFunction& dtilde,
                          int d, const ExtReal& lower) {
  auto gd = growth_of(delta), gt = growth_of(dtilde);
  if (gd && gt) {
    Growth g;
    g.l = d - 1;
    accumulate(g, *gd, 2);
    accumulate(g, *gt, -1);
    if (!integrable(g)) return pos_inf();
  }
  const ExtReal lo = mp::max(ExtReal(1), lower);
  // r = lo e^t; H(t) = log integrand + t
  auto H = [&](const ExtReal& t) { return log_integrand(delta, dtilde, 2, d, lo * mp::exp(t)) + t; };
  ExtReal hmax = H(ExtReal(0));
  ExtReal t = ldexp(ExtReal(1), -60), t_end = 0;
  while (true) {
    ExtReal h = H(t);
    if (h > hmax) hmax = h;
    if (h < hmax - 120) {
      t_end = t;
      break;
    }
    if (t > 1e5) return pos_inf();
    t *= 2;
  }
  std::function<ExtReal(const ExtReal&)> f = [&](const ExtReal& s) { return mp::exp(H(s) - hmax); };
  ExtReal I = integrate(f, ExtReal(0), t_end, ExtReal("1e-25") * t_end, 0, 64);
  return mp::log(lo) + hmax + mp::log(I);
}

HypothesisResult check_H3(const ApproximationFunction& delta, const ApproximationFunction& dtilde,
                          const AdaptiveFunction& phi, const ExtReal& alpha, int d,
                          const SmallnessGrid& grid) {
  if (d < 1) throw DomainError("check_H3 needs d >= 1");
  HypothesisResult res;
  res.hypothesis = "H3";
  for (int i = 0; i < grid.count; ++i) {
    double x = grid.x_min * std::pow(grid.ratio, i);
    ExtReal lower = partition_threshold(delta, alpha, phi, ExtReal(x));
    res.table.emplace_back(x, to_log_double(log_tail_integral(delta, dtilde, d, lower)));
  }
  auto v = smallness_verdict(res.table);
  res.verdict = v.verdict;
  res.reason = v.reason;
  res.linear_fit = v.linear;
  res.stretched_fit = v.stretched;
  res.decay_constant = v.decay;
  return res;
}

// ---------------------------------------------------------------- H4

HypothesisResult check_H4(const ApproximationFunction& dd, const ApproximationFunction& dtilde_inf,
                          const AdaptiveFunction& phi, const ExtReal& gamma, int eta,
                          const SmallnessGrid& grid) {
  if (eta < 1) throw DomainError("check_H4 needs eta >= 1");
  HypothesisResult res;
  res.hypothesis = "H4";
  constexpr std::int64_t kCap = 2048;
  std::vector<ExtReal> lc;
  std::vector<ExtReal> terms(1, neg_inf());
  auto term = [&](std::int64_t nu) -> const ExtReal& {
    if (static_cast<std::int64_t>(lc.size()) <= nu)
      lc = log_eta_shell_counts(eta, std::min(kCap, std::max<std::int64_t>(2 * nu, 64)));
    while (static_cast<std::int64_t>(terms.size()) <= nu) {
      ExtReal x(static_cast<std::int64_t>(terms.size()));
      terms.push_back(lc[terms.size()] + 2 * dd.log_value(x) - dtilde_inf.log_value(x));
    }
    return terms[nu];
  };
  for (int i = 0; i < grid.count; ++i) {
    double x = grid.x_min * std::pow(grid.ratio, i);
    ExtReal nu0 = partition_threshold(dd, gamma, phi, ExtReal(x));
    std::int64_t first = static_cast<std::int64_t>(mp::floor(nu0).convert_to<long long>()) + 1;
    first = std::max<std::int64_t>(first, 1);
    ExtReal acc = neg_inf(), peak = neg_inf();
    bool converged = false;
    for (std::int64_t nu = first; nu < kCap; ++nu) {
      const ExtReal& tn = term(nu);
      acc = log_sum_exp(acc, tn);
      peak = mp::max(peak, tn);
      if (nu > first + 3 && tn < peak - 80 && tn < term(nu - 1)) {
        converged = true;
        break;
      }
    }
    res.table.emplace_back(x, converged ? to_log_double(acc) : kInf);
  }
  auto v = smallness_verdict(res.table);
  res.verdict = v.verdict;
  res.reason = v.reason;
  res.linear_fit = v.linear;
  res.stretched_fit = v.stretched;
  res.decay_constant = v.decay;
  return res;
}

// ---------------------------------------------------------------- rates

std::string to_string(RateModel m) {
  return m == RateModel::PolySlope ? "PolySlope" : "StretchedExp";
}

RateModel parse_rate_model(const std::string& s) {
  if (s == "poly" || s == "PolySlope") return RateModel::PolySlope;
  if (s == "sexp" || s == "StretchedExp") return RateModel::StretchedExp;
  throw ParseError("fit", "unknown rate model '" + s + "'");
}

RateFit fit_rate(const std::vector<RatePoint>& grid, RateModel model) {
  RateFit f;
  f.model = model;
  std::vector<std::size_t> order(grid.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return grid[a].x < grid[b].x; });
  std::vector<std::size_t> good;
  for (auto i : order) {
    bool usable = !grid[i].saturated && grid[i].err > 0;
    if (model == RateModel::StretchedExp) usable = usable && grid[i].err < 1;
    (usable ? good : f.excluded).push_back(i);
  }
  if (good.size() < 6)
    throw InsufficientData("rate fit needs at least 6 non-saturated points, have " +
                           std::to_string(good.size()));
  const std::size_t start = good.size() / 2;
  for (std::size_t i = 0; i < start; ++i) f.excluded.push_back(good[i]);
  std::sort(f.excluded.begin(), f.excluded.end());
  std::vector<double> xs, ys;
  for (std::size_t i = start; i < good.size(); ++i) {
    const auto& p = grid[good[i]];
    f.used.push_back(good[i]);
    double le = to_double(mp::log(p.err));
    xs.push_back(std::log(p.x));
    ys.push_back(model == RateModel::PolySlope ? le : std::log(-le));
  }
  LineFit lf = fit_line(xs, ys);
  f.value = model == RateModel::PolySlope ? -lf.slope : lf.slope;
  f.c = std::exp(lf.intercept);
  f.stderr_ = lf.slope_stderr;
  f.r2 = lf.r2;
  return f;
}

// ---------------------------------------------------------------- budget

double budget_beta() {
  static const double beta = [] {
    PrecisionScope p(30);
    return empirical_beta(l1_norm_table(16, 30));
  }();
  return beta;
}

namespace {

ExtReal cached_l1_norm(int n) {
  static std::mutex mu;
  static std::map<int, std::string> cache;
  std::string s;
  {
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(n);
    if (it != cache.end()) s = it->second;
  }
  if (s.empty()) {
    s = to_sci(l1_derivative_norm(n, 30), 25);
    std::lock_guard<std::mutex> lock(mu);
    cache.emplace(n, s);
  }
  return ExtReal(s);
}

// (N / A_N) ||w^(L)||_1 [q^L + 2 (2 pi N)^{-L} zeta(L, 1/2)], capped at 1
ExtReal kernel_bound(const ExtReal& n_over_a, int L, const ExtReal& q, std::int64_t N) {
  // zeta(L, 1/2) = (2^L - 1) zeta(L)
  ExtReal hz = (mp::ldexp(ExtReal(1), L) - 1) * ExtReal(boost::math::zeta(static_cast<double>(L)));
  ExtReal b = n_over_a * cached_l1_norm(L) *
              (mp::pow(q, L) + 2 * hz * mp::pow(2 * const_pi() * N, -L));
  return mp::min(b, ExtReal(1));
}

}  // namespace

BudgetResult error_budget(const BudgetInputs& in) {
  if (in.N < 2) throw DomainError("error_budget needs N >= 2");
  if (in.max_order < 2) throw DomainError("error_budget needs max_order >= 2");
  BudgetResult r;
  r.beta = in.beta > 0 ? in.beta : budget_beta();
  r.beta_star = 1 / (2 * r.beta);
  const ExtReal N(in.N);
  const ExtReal scale = 2 * const_pi() * in.alpha * N;
  r.threshold = partition_threshold(in.delta, in.alpha, in.phi, N);
  if (r.threshold > 1e6) throw DomainError("error_budget: partition threshold above 1e6");
  const std::int64_t X = r.threshold.convert_to<long long>();

  WeightFunction w = WeightFunction::exp_bump();
  const ExtReal n_over_a = N / w.normalization_A_N(in.N);

  CompensatedSum<ExtReal> s1;
  for (std::int64_t k = 1; k <= X; ++k) {
    BudgetRow row;
    row.norm = k;
    row.count = l1_shell_count(in.d, k);
    ExtReal q = in.delta.value(ExtReal(k)) / scale;
    ExtReal l1 = mp::floor(mp::pow(q, -1 / ExtReal(r.beta)) / mp::exp(ExtReal(1)));
    row.L1 = l1 > 1e9 ? std::int64_t(1e9) : l1.convert_to<long long>();
    if (row.L1 < 2)
      throw BudgetDegenerate("L1 = " + std::to_string(row.L1) + " < 2 at ||k|| = " +
                             std::to_string(k) + ", N = " + std::to_string(in.N));
    row.order_used = static_cast<int>(std::min<std::int64_t>(row.L1, in.max_order));
    row.per_mode = kernel_bound(n_over_a, row.order_used, q, in.N);
    s1.add(row.count * row.per_mode / in.dtilde.value(ExtReal(k)));
    r.rows.push_back(std::move(row));
  }
  r.S1 = in.class_constant * s1.result();

  // Lambda_2 shells with order 2 until the terms are negligible
  CompensatedSum<ExtReal> s2;
  ExtReal prev = pos_inf();
  int small = 0;
  bool converged = false;
  for (std::int64_t k = X + 1; k <= X + 100000; ++k) {
    ExtReal q = in.delta.value(ExtReal(k)) / scale;
    ExtReal t = l1_shell_count(in.d, k) * kernel_bound(n_over_a, 2, q, in.N) /
                in.dtilde.value(ExtReal(k));
    s2.add(t);
    ExtReal ref = s2.result() + s1.result();
    small = (t < ref * ExtReal("1e-30") && t <= prev) ? small + 1 : 0;
    prev = t;
    if (small >= 20) {
      converged = true;
      break;
    }
  }
  r.S2 = converged ? ExtReal(in.class_constant * s2.result()) : pos_inf();
  r.total = r.S1 + r.S2;
  r.lambda2_log_integral = log_tail_integral(in.delta, in.dtilde, in.d, r.threshold);
  return r;
}

}  // namespace wba
