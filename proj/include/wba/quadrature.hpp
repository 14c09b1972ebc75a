#pragma once

#include "wba/numeric.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace wba {

// Gauss-Legendre nodes/weights on [-1,1], ascending nodes. Computed by Newton
// iteration at the current precision and cached per (order, precision).
struct GaussLegendreRule {
  int order = 0;
  std::vector<ExtReal> nodes;
  std::vector<ExtReal> weights;
};

const GaussLegendreRule& gauss_legendre(int order);

// Rule order giving roughly full accuracy per panel at `digits` once panels
// resolve the integrand.
int default_gl_order(int digits);

// Fills `out` (m components) with the rule estimate of the integral over
// [a, b]. Letting callers own the per-panel loop allows caching work that
// depends only on the panel geometry.
using PanelEstimator =
    std::function<void(const ExtReal& a, const ExtReal& b, std::vector<ExtReal>& out)>;

struct AdaptiveOptions {
  ExtReal abs_tol;
  int initial_panels = 1;
  std::int64_t max_panels = 1 << 20;
  int max_depth = 64;
};

struct AdaptiveReport {
  std::int64_t panels = 0;
  std::int64_t estimates = 0;
  ExtReal error_estimate = 0;
};

// Bisects panels until parent/children estimates differ by at most
// abs_tol * (panel width)/(b - a) componentwise; accepted panels are summed
// left to right. Throws QuadratureBudgetExceeded when the limits are hit.
std::vector<ExtReal> integrate_adaptive(const PanelEstimator& est, std::size_t m,
                                        const ExtReal& a, const ExtReal& b,
                                        const AdaptiveOptions& opt,
                                        AdaptiveReport* report = nullptr);

// Scalar convenience wrapper using a pointwise integrand.
ExtReal integrate(const std::function<ExtReal(const ExtReal&)>& f, const ExtReal& a,
                  const ExtReal& b, const ExtReal& abs_tol, int order = 0,
                  int initial_panels = 1, AdaptiveReport* report = nullptr);

}  // namespace wba
