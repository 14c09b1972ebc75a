#include "wba/quadrature.hpp"

#include "wba/errors.hpp"
#include "wba/summation.hpp"

#include <cmath>
#include <map>
#include <memory>
#include <utility>

namespace wba {

namespace mp = boost::multiprecision;

namespace {

// P_n(x) and P_n'(x) by the three-term recurrence.
void legendre(int n, const ExtReal& x, ExtReal& p, ExtReal& dp) {
  ExtReal p0 = 1, p1 = x;
  for (int k = 2; k <= n; ++k) {
    ExtReal p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
    p0 = std::move(p1);
    p1 = std::move(p2);
  }
  p = p1;
  dp = n * (x * p1 - p0) / (x * x - 1);
}

GaussLegendreRule build_rule(int n) {
  GaussLegendreRule r;
  r.order = n;
  r.nodes.resize(n);
  r.weights.resize(n);
  const ExtReal eps = ldexp(ExtReal(1), -static_cast<int>(
                                            std::ceil(current_digits() * 3.3219280948873623)));
  const ExtReal pi = const_pi();
  for (int i = 0; i < (n + 1) / 2; ++i) {
    ExtReal x = mp::cos(pi * (i + ExtReal(0.75)) / (n + ExtReal(0.5)));
    ExtReal p, dp;
    for (int it = 0; it < 200; ++it) {
      legendre(n, x, p, dp);
      ExtReal dx = p / dp;
      x -= dx;
      if (mp::abs(dx) <= eps) break;
    }
    legendre(n, x, p, dp);
    ExtReal w = 2 / ((1 - x * x) * dp * dp);
    // descending cos order -> ascending nodes
    r.nodes[n - 1 - i] = x;
    r.weights[n - 1 - i] = w;
    r.nodes[i] = -x;
    r.weights[i] = w;
  }
  if (n % 2 == 1) r.nodes[n / 2] = 0;
  return r;
}

}  // namespace

const GaussLegendreRule& gauss_legendre(int order) {
  if (order < 1) throw DomainError("gauss_legendre: order must be >= 1");
  thread_local std::map<std::pair<int, int>, std::unique_ptr<GaussLegendreRule>> cache;
  auto key = std::make_pair(order, current_digits());
  auto it = cache.find(key);
  if (it == cache.end())
    it = cache.emplace(key, std::make_unique<GaussLegendreRule>(build_rule(order))).first;
  return *it->second;
}

int default_gl_order(int digits) {
  return static_cast<int>(std::ceil(0.4 * digits)) + 8;
}

std::vector<ExtReal> integrate_adaptive(const PanelEstimator& est, std::size_t m,
                                        const ExtReal& a, const ExtReal& b,
                                        const AdaptiveOptions& opt, AdaptiveReport* report) {
  struct Panel {
    ExtReal lo, hi;
    std::vector<ExtReal> q;
    int depth;
  };
  std::vector<CompensatedSum<ExtReal>> acc(m);
  CompensatedSum<ExtReal> err_total;
  std::int64_t estimates = 0, accepted = 0;
  const ExtReal total_width = b - a;

  auto estimate = [&](const ExtReal& lo, const ExtReal& hi) {
    std::vector<ExtReal> q(m);
    est(lo, hi, q);
    ++estimates;
    return q;
  };

  std::vector<Panel> stack;
  const int n0 = std::max(1, opt.initial_panels);
  for (int i = n0 - 1; i >= 0; --i) {
    ExtReal lo = a + total_width * i / n0;
    ExtReal hi = i + 1 == n0 ? b : ExtReal(a + total_width * (i + 1) / n0);
    stack.push_back({lo, hi, {}, 0});
  }
  // seed estimates in left-to-right order for determinism
  for (auto it = stack.rbegin(); it != stack.rend(); ++it) it->q = estimate(it->lo, it->hi);

  std::vector<ExtReal> ql, qr;
  while (!stack.empty()) {
    Panel p = std::move(stack.back());
    stack.pop_back();
    ExtReal mid = (p.lo + p.hi) / 2;
    ql = estimate(p.lo, mid);
    qr = estimate(mid, p.hi);
    ExtReal err = 0;
    for (std::size_t c = 0; c < m; ++c) {
      ExtReal d = mp::abs(p.q[c] - ql[c] - qr[c]);
      if (d > err) err = d;
    }
    ExtReal allowed = opt.abs_tol * (p.hi - p.lo) / total_width;
    if (err <= allowed) {
      for (std::size_t c = 0; c < m; ++c) {
        acc[c].add(ql[c]);
        acc[c].add(qr[c]);
      }
      err_total.add(err);
      ++accepted;
      continue;
    }
    if (p.depth + 1 > opt.max_depth ||
        static_cast<std::int64_t>(stack.size()) + accepted + 2 > opt.max_panels)
      throw QuadratureBudgetExceeded("adaptive quadrature: tolerance " + to_sci(opt.abs_tol, 3) +
                                     " not reached within panel budget");
    stack.push_back({mid, p.hi, std::move(qr), p.depth + 1});
    stack.push_back({p.lo, mid, std::move(ql), p.depth + 1});
    ql.clear();
    qr.clear();
  }
  std::vector<ExtReal> out(m);
  for (std::size_t c = 0; c < m; ++c) out[c] = acc[c].result();
  if (report) {
    report->panels = accepted;
    report->estimates = estimates;
    report->error_estimate = err_total.result();
  }
  return out;
}

ExtReal integrate(const std::function<ExtReal(const ExtReal&)>& f, const ExtReal& a,
                  const ExtReal& b, const ExtReal& abs_tol, int order, int initial_panels,
                  AdaptiveReport* report) {
  const auto& rule = gauss_legendre(order > 0 ? order : default_gl_order(current_digits()));
  PanelEstimator est = [&](const ExtReal& lo, const ExtReal& hi, std::vector<ExtReal>& out) {
    ExtReal c = (lo + hi) / 2, h = (hi - lo) / 2;
    CompensatedSum<ExtReal> s;
    for (int j = 0; j < rule.order; ++j) s.add(rule.weights[j] * f(c + h * rule.nodes[j]));
    out[0] = h * s.result();
  };
  AdaptiveOptions opt;
  opt.abs_tol = abs_tol;
  opt.initial_panels = initial_panels;
  return integrate_adaptive(est, 1, a, b, opt, report)[0];
}

}  // namespace wba
