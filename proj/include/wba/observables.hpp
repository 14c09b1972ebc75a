#pragma once

#include "wba/lattice.hpp"
#include "wba/numeric.hpp"
#include "wba/rotations.hpp"

#include <optional>
#include <string>
#include <vector>

namespace wba {

enum class DecayKind { TrigPoly, PolyDecay, Analytic, Gevrey, EtaAnalytic, DoubleExp };

// Modes with norm <= radius and their coefficients, ready for evaluation.
struct EvaluationPlan {
  int dim = 1;
  ExtComplex mean;
  std::int64_t radius = 0;
  ExtReal tail_bound;  // bound on sum of |f_k| over the omitted modes
  std::vector<MultiIndex> indices;
  std::vector<std::int64_t> max_abs;  // per coordinate, max |k_j| over the plan
  std::vector<ExtComplex> coeffs;
  ExtReal abs_sum;       // sum |f_k| over the plan
  ExtReal grad_abs_sum;  // sum (1 + ||k||_1) |f_k| over the plan
  // d = 1: pos[m] = f_m, neg[m] = f_{-m}, m = 1..radius
  std::vector<ExtComplex> pos, neg;
};

struct ClassCertificate {
  ExtReal sup;       // sup over norm <= K of Dtilde(norm) |f_k|
  ExtReal sup_half;  // same over norm <= K/2
  MultiIndex worst;
  bool member = false;
};

// Grammar (options after the rule parameters, all optional):
//   trig:<k>:<re>,<im>;<k>:<re>,<im>;...   k components joined by '/'
//   poly:M=<r> | analytic:mu=<r> | gevrey:mu=<r>,nu=<r>
//   eta-analytic:mu=<r> | double-exp
//   options: mean=<r>  (default 1)   phase=hash|one   seed=<int>
// Rule observables have f_k = modulus(k) e^{2 pi i sigma(k)}, sigma a
// splitmix64 hash of (seed, support, values) mapped to [0,1), with
// sigma(-k) = -sigma(k). Missing Hermitian partners of trig entries are
// filled in; inconsistent ones are rejected.
class Observable {
 public:
  static Observable parse(const std::string& spec, const Regime& regime);
  static Observable trig(const std::vector<std::pair<MultiIndex, ExtComplex>>& terms,
                         const Regime& regime);

  DecayKind decay() const { return kind_; }
  const Regime& regime() const { return regime_; }
  const std::string& spec() const { return spec_; }
  ExtComplex mean() const;

  // norm used by the decay rule: |k|_eta for the eta kinds, ||k||_1 otherwise
  std::int64_t rule_norm(const MultiIndex& k) const;
  ExtReal modulus(const MultiIndex& k) const;
  ExtComplex coefficient(const MultiIndex& k) const;

  // bound on sum_{rule_norm(k) > R} |f_k|; TailBoundUnavailable if none
  ExtReal tail_bound(std::int64_t R) const;
  std::int64_t cutoff_radius(const ExtReal& tail_tol) const;
  // all modes with rule_norm <= radius (default: cutoff_radius(tail_tol))
  EvaluationPlan plan(const ExtReal& tail_tol, std::optional<std::int64_t> radius = {}) const;

  ExtComplex evaluate(const std::vector<ExtReal>& theta, const ExtReal& tail_tol) const;

  ClassCertificate class_certificate(const ApproximationFunction& dtilde, std::int64_t K) const;

 private:
  Observable() = default;
  ExtReal rule_modulus(std::int64_t norm) const;
  ExtReal phase_of(const MultiIndex& k) const;  // sigma(k)
  BallEnumerator enumerate(std::int64_t radius) const;

  DecayKind kind_ = DecayKind::TrigPoly;
  Regime regime_;
  std::string spec_;
  std::string p1_, p2_;  // rule parameters as decimal literals
  std::string mean_str_ = "1";
  bool unit_phase_ = false;
  std::uint64_t seed_ = 0;
  // trig terms as decimal strings so they re-read at any precision
  struct Term {
    MultiIndex k;
    ExtComplex value;
    std::string re, im;  // empty for programmatic terms
  };
  ExtComplex term_value(const Term& t) const;
  std::vector<Term> terms_;
};

ExtComplex evaluate(const EvaluationPlan& plan, const std::vector<ExtReal>& theta);

}  // namespace wba
