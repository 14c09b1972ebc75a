#pragma once

#include <boost/multiprecision/mpfr.hpp>

#include <cstdint>
#include <string>

namespace wba {

// Runtime-precision reals. New values take the thread-wide default precision
// at construction time, see PrecisionScope.
using ExtReal = boost::multiprecision::mpfr_float;

struct ExtComplex {
  ExtReal re;
  ExtReal im;

  ExtComplex() : re(0), im(0) {}
  ExtComplex(ExtReal r) : re(std::move(r)), im(0) {}
  ExtComplex(ExtReal r, ExtReal i) : re(std::move(r)), im(std::move(i)) {}

  ExtComplex& operator+=(const ExtComplex& o) {
    re += o.re;
    im += o.im;
    return *this;
  }
  ExtComplex& operator-=(const ExtComplex& o) {
    re -= o.re;
    im -= o.im;
    return *this;
  }
  ExtComplex& operator*=(const ExtComplex& o) {
    ExtReal r = re * o.re - im * o.im;
    im = re * o.im + im * o.re;
    re = std::move(r);
    return *this;
  }
  ExtComplex& operator*=(const ExtReal& s) {
    re *= s;
    im *= s;
    return *this;
  }
};

inline ExtComplex operator+(ExtComplex a, const ExtComplex& b) { return a += b; }
inline ExtComplex operator-(ExtComplex a, const ExtComplex& b) { return a -= b; }
inline ExtComplex operator*(ExtComplex a, const ExtComplex& b) { return a *= b; }
inline ExtComplex operator*(ExtComplex a, const ExtReal& s) { return a *= s; }
inline ExtComplex operator*(const ExtReal& s, ExtComplex a) { return a *= s; }
inline ExtComplex operator-(const ExtComplex& a) { return {-a.re, -a.im}; }
inline ExtComplex conj(const ExtComplex& a) { return {a.re, -a.im}; }
inline ExtReal abs(const ExtComplex& a) { return boost::multiprecision::hypot(a.re, a.im); }
inline ExtReal norm2(const ExtComplex& a) { return a.re * a.re + a.im * a.im; }

// Sets the default precision (decimal digits) for values created in scope.
// The default is process-wide: create scopes before spawning workers.
class PrecisionScope {
 public:
  explicit PrecisionScope(int digits);
  ~PrecisionScope();
  PrecisionScope(const PrecisionScope&) = delete;
  PrecisionScope& operator=(const PrecisionScope&) = delete;

 private:
  unsigned saved_;
};

int current_digits();

ExtReal const_pi();
ExtReal two_pi();

// e^{2 pi i x}
ExtComplex unit_phase(const ExtReal& x);

// x - floor(x), in [0,1)
ExtReal frac(const ExtReal& x);

// distance from x to the nearest integer
ExtReal dist_to_int(const ExtReal& x);

// 10^{-digits}
ExtReal ten_pow_neg(int digits);

ExtReal from_string(const std::string& s);
ExtReal from_uint64(std::uint64_t v);

// Scientific notation with `digits` significant digits, stable across runs.
std::string to_sci(const ExtReal& x, int digits = 20);

double to_double(const ExtReal& x);

// x rounded to the current default precision (copies keep the source's).
ExtReal at_current_precision(const ExtReal& x);

// Natural log that accepts 0 (returns -inf as an ExtReal).
ExtReal safe_log(const ExtReal& x);

}  // namespace wba
