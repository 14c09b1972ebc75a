#pragma once

#include "wba/numeric.hpp"

namespace wba {

// Neumaier's variant of Kahan summation.
template <class T>
class CompensatedSum {
 public:
  CompensatedSum() : sum_(0), comp_(0) {}

  void add(const T& x) {
    T t = sum_ + x;
    if (abs_(sum_) >= abs_(x))
      comp_ += (sum_ - t) + x;
    else
      comp_ += (x - t) + sum_;
    sum_ = std::move(t);
  }

  T result() const { return sum_ + comp_; }
  const T& compensation() const { return comp_; }

 private:
  static T abs_(const T& v) { return v < 0 ? T(-v) : v; }
  T sum_;
  T comp_;
};

class ComplexCompensatedSum {
 public:
  void add(const ExtComplex& z) {
    re_.add(z.re);
    im_.add(z.im);
  }
  ExtComplex result() const { return {re_.result(), im_.result()}; }

 private:
  CompensatedSum<ExtReal> re_;
  CompensatedSum<ExtReal> im_;
};

// s + e == a + b exactly (Knuth).
inline void two_sum(const ExtReal& a, const ExtReal& b, ExtReal& s, ExtReal& e) {
  s = a + b;
  ExtReal bb = s - a;
  e = (a - (s - bb)) + (b - bb);
}

}  // namespace wba
