#pragma once

#include "wba/lattice.hpp"
#include "wba/numeric.hpp"

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace wba {

enum class ApproxKind { Power, StretchedExp, DiophProduct, DoubleExp, Tabulated };

// Grammar:
//   pow:tau=<r>            x^tau
//   sexp:mu=<r>,nu=<r>     e^{mu x^nu}
//   dioprod:mu=<r>,eta=<int>   prod_j (1 + |k_j|^mu <j>^mu) on Z^inf
//   dexp                   e^{e^x}
//   table:<x>:<y>;<x>:<y>;...   log-linear interpolation, strictly increasing
//
// value(x) is the scalar form. For DiophProduct it is the envelope
//   max{ prod(k) : |k|_eta <= x }  (log-linear between integers).
class ApproximationFunction {
 public:
  static ApproximationFunction power(const std::string& tau);
  static ApproximationFunction stretched_exp(const std::string& mu, const std::string& nu);
  static ApproximationFunction dioph_product(const std::string& mu, int eta);
  static ApproximationFunction double_exp();
  static ApproximationFunction tabulated(std::vector<std::pair<double, double>> table);
  static ApproximationFunction parse(const std::string& spec);

  ApproxKind kind() const { return kind_; }
  const std::string& spec() const { return spec_; }
  double param1() const { return a_; }  // tau or mu
  double param2() const { return b_; }  // nu (sexp)
  int eta() const { return eta_; }

  ExtReal value(const ExtReal& x) const;
  ExtReal log_value(const ExtReal& x) const;
  ExtReal inverse(const ExtReal& y) const;

  // Weight used in small-divisor conditions: the product for DiophProduct,
  // otherwise value(norm) with norm = ||k||_1 (finite) or |k|_eta.
  ExtReal of_index(const MultiIndex& k, std::optional<int> eta) const;
  ExtReal log_of_index(const MultiIndex& k, std::optional<int> eta) const;

  // Same function divided by its value at 1 (so Delta(1) = 1).
  ApproximationFunction normalized() const;
  ExtReal scale() const;  // the divisor applied by normalized(); 1 if none

 private:
  ApproximationFunction() = default;
  ExtReal p1() const;
  ExtReal p2() const;
  double envelope_log(std::int64_t nu) const;

  ApproxKind kind_ = ApproxKind::Power;
  std::string spec_;
  std::string s1_, s2_;
  double a_ = 0, b_ = 0;
  int eta_ = 0;
  bool normalized_ = false;
  std::vector<std::pair<double, double>> table_;
  struct EnvelopeCache;
  std::shared_ptr<EnvelopeCache> env_;
};

enum class RegimeKind { Finite, InfiniteTruncated };

struct Regime {
  RegimeKind kind = RegimeKind::Finite;
  int dim = 1;  // d or the truncation dimension D
  int eta = 2;  // only for InfiniteTruncated
  bool finite() const { return kind == RegimeKind::Finite; }
  std::optional<int> norm_eta() const {
    return finite() ? std::nullopt : std::optional<int>(eta);
  }
};

enum class DivisorMode { Discrete, Continuous };

struct NonresonanceClaim {
  ExtReal constant;      // alpha or gamma
  std::string approx;    // spec of the approximation function
  std::int64_t radius;   // verified for norms up to this
  DivisorMode mode;
  MultiIndex argmin;
};

// Grammar:
//   golden | sqrtprimes:d=<int> | sqrtprimes:D=<int>[,eta=<int>]
//   list:<r>,<r>,... | uniform:D=<int>,seed=<int>[,eta=<int>]
// Finite coordinates are reduced mod 1; infinite-truncated ones lie in [1,2].
// uniform draws 4 words per coordinate from std::mt19937_64(seed):
//   rho_j = 1 + sum_{i=1}^{4} u_i 2^{-64 i}.
class RotationVector {
 public:
  static RotationVector parse(const std::string& spec);

  const std::vector<ExtReal>& coords() const { return coords_; }
  const Regime& regime() const { return regime_; }
  int dim() const { return regime_.dim; }
  const std::string& spec() const { return spec_; }
  int digits() const { return digits_; }
  RotationVector at_precision(int digits) const;

  const std::optional<NonresonanceClaim>& claim() const { return claim_; }
  RotationVector with_claim(NonresonanceClaim c) const;

  // k . rho with every product formed exactly and a single rounding.
  ExtReal dot(const MultiIndex& k) const;

 private:
  RotationVector() = default;
  std::string spec_;
  Regime regime_;
  std::vector<ExtReal> coords_;
  int digits_ = 0;
  std::optional<NonresonanceClaim> claim_;
};

RotationVector make_rotation(const std::string& spec);

ExtReal small_divisor(const RotationVector& rho, const MultiIndex& k, DivisorMode mode);

struct ScanResult {
  ExtReal alpha;
  MultiIndex argmin;
  std::int64_t radius = 0;
  std::int64_t scanned = 0;
};

// min over 0 != k with norm <= K of Delta(k) * small_divisor(rho, k). Only one
// of each pair +-k is visited (the divisor is even in k).
ScanResult nonresonance_scan(const RotationVector& rho, const ApproximationFunction& delta,
                             std::int64_t K, DivisorMode mode);

// Smallest tau with prod(k) <= exp((tau / rho*^{1/eta}) log(tau/rho*)) e^{rho* |k|_eta}
// for all |k|_eta <= nu_max, for the DiophProduct function `d`.
double calibrate_product_bound(const ApproximationFunction& d, double rho_star,
                               std::int64_t nu_max);

DivisorMode parse_divisor_mode(const std::string& s);

}  // namespace wba
