#include "wba/numeric.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace wba {

namespace mp = boost::multiprecision;

PrecisionScope::PrecisionScope(int digits) : saved_(ExtReal::default_precision()) {
  ExtReal::default_precision(static_cast<unsigned>(digits));
}

PrecisionScope::~PrecisionScope() { ExtReal::default_precision(saved_); }

int current_digits() { return static_cast<int>(ExtReal::default_precision()); }

ExtReal const_pi() {
  ExtReal r;
  mpfr_const_pi(r.backend().data(), MPFR_RNDN);
  return r;
}

ExtReal two_pi() {
  ExtReal r = const_pi();
  r *= 2;
  return r;
}

ExtComplex unit_phase(const ExtReal& x) {
  // reduce first so the trig argument stays in [0, 2pi)
  ExtReal t = two_pi() * frac(x);
  ExtReal s, c;
  mpfr_sin_cos(s.backend().data(), c.backend().data(), t.backend().data(), MPFR_RNDN);
  return {c, s};
}

ExtReal at_current_precision(const ExtReal& x) {
  ExtReal r;
  mpfr_set(r.backend().data(), x.backend().data(), MPFR_RNDN);
  return r;
}

ExtReal frac(const ExtReal& x) {
  ExtReal r = x - mp::floor(x);
  if (r >= 1) r -= 1;
  return r;
}

ExtReal dist_to_int(const ExtReal& x) {
  ExtReal f = frac(x);
  ExtReal g = 1 - f;
  return f < g ? f : g;
}

ExtReal ten_pow_neg(int digits) {
  ExtReal r = mp::pow(ExtReal(10), -digits);
  return r;
}

ExtReal from_string(const std::string& s) { return ExtReal(s); }

ExtReal from_uint64(std::uint64_t v) {
  ExtReal r;
  mpfr_set_uj(r.backend().data(), v, MPFR_RNDN);
  return r;
}

std::string to_sci(const ExtReal& x, int digits) {
  if (mp::isinf(x)) return x > 0 ? "inf" : "-inf";
  if (mp::isnan(x)) return "nan";
  return x.str(digits, std::ios_base::scientific);
}

double to_double(const ExtReal& x) { return x.convert_to<double>(); }

ExtReal safe_log(const ExtReal& x) {
  if (x <= 0) {
    ExtReal r;
    mpfr_set_inf(r.backend().data(), -1);
    return r;
  }
  return mp::log(x);
}

}  // namespace wba
