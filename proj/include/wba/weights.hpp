#pragma once

#include "wba/numeric.hpp"

#include <boost/multiprecision/cpp_int.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace wba {

using BigInt = boost::multiprecision::cpp_int;

enum class WeightKind { BumpPQ, ExpBump, PolyBump, TrivialFlat };

// Normalized weighting function on [0,1]. Immutable; the normalizer is
// computed at construction with the precision in effect at that moment.
//
// Spec grammar: exp | bump:p=<r>,q=<r> | poly:s=<int> | flat
class WeightFunction {
 public:
  static WeightFunction exp_bump();
  static WeightFunction bump(const std::string& p, const std::string& q);
  static WeightFunction poly(int s);
  static WeightFunction flat();
  static WeightFunction parse(const std::string& spec);

  WeightKind kind() const { return kind_; }
  // nullopt means C-infinity
  std::optional<int> smoothness_order() const;
  const std::string& spec() const { return spec_; }
  int digits() const { return digits_; }
  bool symmetric() const;

  // Same weight with the normalizer recomputed for `digits` (no-op if the
  // stored one is already at least that precise).
  WeightFunction at_precision(int digits) const;

  ExtReal operator()(const ExtReal& x) const;
  ExtReal unnormalized(const ExtReal& x) const;
  const ExtReal& normalizer() const { return normalizer_; }

  // w(n/N) for n = 0..N-1
  std::vector<ExtReal> samples(std::int64_t N) const;
  // A_N = sum_{n<N} w(n/N), compensated. Throws DegenerateWindow if 0.
  ExtReal normalization_A_N(std::int64_t N) const;

 private:
  WeightFunction() = default;
  void init();
  void compute_normalizer();

  WeightKind kind_ = WeightKind::TrivialFlat;
  std::string spec_;
  std::string p_str_, q_str_;
  int s_ = 0;
  int digits_ = 0;
  ExtReal p_, q_;
  ExtReal normalizer_;
};

// Coefficients of the n-th derivative of e^{-1/x}:
//   P^(n)(x) = (sum_{j=1}^{2n} a_j x^{-j}) e^{-1/x}
// coeffs[j] holds a_j for j = 0..2n (coeffs[0] is 0 for n >= 1; the n = 0
// table is the constant 1).
struct DerivCoeffTable {
  int order = 0;
  std::vector<BigInt> coeffs;
  BigInt b;  // max_j |a_j|
};

DerivCoeffTable deriv_coeff_table(int n);
// tables for orders 0..n_max
std::vector<DerivCoeffTable> deriv_coeff_tables(int n_max);

// int_0^1 |d^n/dx^n wbar(x)| dx with relative accuracy about
// 10^{-(digits/2 + 10)}; the result is an ExtReal at precision `digits`.
ExtReal l1_derivative_norm(int n, int digits);

struct L1NormRow {
  int n;
  ExtReal value;
  double exponent;  // log(value) / (n log n)
};

std::vector<L1NormRow> l1_norm_table(int n_max, int digits);

// Smallest beta with L1_n <= C* n^{beta n} on the table, C* the w-bar
// normalizer.
double empirical_beta(const std::vector<L1NormRow>& table);

}  // namespace wba
