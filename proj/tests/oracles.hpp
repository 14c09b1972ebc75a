#pragma once
// Reference computations used by the tests. None of these call into the
// library routines they check.

#include "wba/numeric.hpp"

#include <boost/multiprecision/cpp_int.hpp>

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

namespace oracle {

using wba::ExtComplex;
using wba::ExtReal;
namespace mp = boost::multiprecision;

// int_0^1 exp(-1/(s(1-s))) ds to 60 digits (mpmath, tanh-sinh, 120 digits)
inline const char* kBumpIntegral = "0.00702985840660965623924127053035395607615539947535724879612974";
inline const char* kCStar = "142.250375777095868134485183695448154080459251214488624859535";
inline const char* kWbarHalf = "2.60540651452002772477762398744275498981231088037292182069099";

// p_n with d^n/dx^n e^{-1/x} = p_n(1/x) e^{-1/x}; p_{n+1}(u) = u^2 (p_n(u) - p_n'(u))
inline std::vector<std::vector<mp::cpp_int>> u_polys(int n_max) {
  std::vector<std::vector<mp::cpp_int>> p{{1}};
  for (int n = 0; n < n_max; ++n) {
    const auto& c = p.back();
    std::vector<mp::cpp_int> d(c.size() + 2, 0);
    for (std::size_t j = 0; j < c.size(); ++j) {
      d[j + 2] += c[j];
      if (j > 0) d[j + 1] -= mp::cpp_int(j) * c[j];
    }
    while (d.size() > 1 && d.back() == 0) d.pop_back();
    p.push_back(d);
  }
  return p;
}

// d^m/dx^m of the normalized e^{-1/(x(1-x))}
class WbarDerivative {
 public:
  explicit WbarDerivative(int m_max) {
    for (const auto& c : u_polys(m_max)) {
      std::vector<ExtReal> e;
      for (const auto& v : c) e.emplace_back(v);
      p_.push_back(std::move(e));
    }
  }

  ExtReal poly_part(int m, const ExtReal& x) const {
    ExtReal u = 1 / x, v = 1 / (1 - x), total = 0;
    mp::cpp_int binom = 1;
    for (int i = 0; i <= m; ++i) {
      ExtReal term = ExtReal(binom) * eval(p_[i], u) * eval(p_[m - i], v);
      total += (m - i) % 2 == 0 ? term : ExtReal(-term);
      binom = binom * (m - i) / (i + 1);
    }
    return total;
  }

  ExtReal value(int m, const ExtReal& x) const {
    if (x <= 0 || x >= 1) return ExtReal(0);
    return ExtReal(kCStar) * mp::exp(-1 / (x * (1 - x))) * poly_part(m, x);
  }

 private:
  static ExtReal eval(const std::vector<ExtReal>& c, const ExtReal& u) {
    ExtReal r = 0;
    for (auto it = c.rbegin(); it != c.rend(); ++it) r = r * u + *it;
    return r;
  }
  std::vector<std::vector<ExtReal>> p_;
};

// ||wbar^(n)||_1 through the fundamental theorem of calculus:
// sum over sign intervals of |wbar^(n-1)(b) - wbar^(n-1)(a)|. Runs at the
// caller's precision, which must absorb the cancellation in poly_part.
inline ExtReal l1_norm_ftc(int n) {
  WbarDerivative d(n);
  std::vector<ExtReal> grid;
  const ExtReal lo = ExtReal(1) / 400, hi = 1 - lo;
  for (int i = 0; i <= 8000; ++i) grid.push_back(lo + (hi - lo) * i / 8000);
  for (int i = 1; i < 2000; ++i) {
    ExtReal x = lo * mp::pow(ExtReal(200), ExtReal(i) / 2000);
    grid.push_back(x);
    grid.push_back(1 - x);
  }
  std::sort(grid.begin(), grid.end());
  auto sgn = [&](const ExtReal& x) { return d.poly_part(n, x) > 0 ? 1 : -1; };
  std::vector<ExtReal> pts{ExtReal(0)};
  ExtReal prev = grid.front();
  int sp = sgn(prev);
  for (std::size_t i = 1; i < grid.size(); ++i) {
    int s = sgn(grid[i]);
    if (s != sp) {
      ExtReal a = prev, b = grid[i];
      for (int it = 0; it < 4 * wba::current_digits(); ++it) {
        ExtReal c = (a + b) / 2;
        if (sgn(c) == sp)
          a = c;
        else
          b = c;
      }
      pts.push_back((a + b) / 2);
      sp = s;
    }
    prev = grid[i];
  }
  pts.push_back(ExtReal(1));
  ExtReal total = 0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i)
    total += mp::abs(d.value(n - 1, pts[i + 1]) - d.value(n - 1, pts[i]));
  return total;
}

}  // namespace oracle
