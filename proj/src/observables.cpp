#include "wba/observables.hpp"

#include "wba/errors.hpp"
#include "wba/spec_parse.hpp"
#include "wba/summation.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace wba {

namespace mp = boost::multiprecision;

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

bool is_eta_kind(DecayKind k) { return k == DecayKind::EtaAnalytic || k == DecayKind::DoubleExp; }

MultiIndex parse_index(const std::string& text, const Regime& regime) {
  std::vector<std::int64_t> v;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, '/')) v.push_back(spec::to_int(item, "observable.k"));
  if (v.empty()) throw ParseError("observable.k", "empty index");
  if (regime.finite()) {
    if (static_cast<int>(v.size()) != regime.dim)
      throw ParseError("observable.k", "index '" + text + "' has " + std::to_string(v.size()) +
                                           " components, rotation has " +
                                           std::to_string(regime.dim));
    return MultiIndex::dense(v);
  }
  if (static_cast<int>(v.size()) > regime.dim)
    throw ParseError("observable.k", "index '" + text + "' exceeds the truncation dimension");
  std::vector<MultiIndex::Entry> e;
  for (std::size_t j = 0; j < v.size(); ++j)
    if (v[j]) e.push_back({static_cast<int>(j), v[j]});
  return MultiIndex::sparse(e);
}

// Gamma(s, x) upper bound for x > max(0, s - 1)
ExtReal upper_gamma_bound(const ExtReal& s, const ExtReal& x) {
  ExtReal b = mp::pow(x, s - 1) * mp::exp(-x);
  if (s > 1) b *= x / (x - (s - 1));
  return b;
}

ExtReal factorial(int n) {
  ExtReal r = 1;
  for (int i = 2; i <= n; ++i) r *= i;
  return r;
}

}  // namespace

Observable Observable::trig(const std::vector<std::pair<MultiIndex, ExtComplex>>& terms,
                            const Regime& regime) {
  Observable o;
  o.kind_ = DecayKind::TrigPoly;
  o.regime_ = regime;
  std::ostringstream os;
  os << "trig:";
  for (const auto& [k, c] : terms) {
    if (k.support_end() > regime.dim) throw SupportMismatch("trig term beyond dimension");
    MultiIndex kk = regime.finite() ? MultiIndex::dense(k.to_dense(regime.dim))
                                    : MultiIndex::sparse(k.entries());
    o.terms_.push_back({kk, c, "", ""});
  }
  // Hermitian completion / check
  std::vector<Term> extra;
  for (const auto& t : o.terms_) {
    auto it = std::find_if(o.terms_.begin(), o.terms_.end(),
                           [&](const Term& u) { return u.k == -t.k; });
    if (it == o.terms_.end()) {
      extra.push_back({-t.k, conj(t.value), "", ""});
    } else {
      ExtReal tol = ten_pow_neg(current_digits() - 3) * (1 + abs(t.value));
      if (abs(it->value - conj(t.value)) > tol)
        throw ParseError("observable", "coefficients of " + t.k.str() + " and " + it->k.str() +
                                           " are not complex conjugates");
    }
  }
  for (auto& e : extra) o.terms_.push_back(std::move(e));
  for (std::size_t i = 0; i < o.terms_.size(); ++i)
    os << (i ? ";" : "") << o.terms_[i].k.str() << ':' << to_sci(o.terms_[i].value.re, 20) << ','
       << to_sci(o.terms_[i].value.im, 20);
  o.spec_ = os.str();
  return o;
}

Observable Observable::parse(const std::string& text, const Regime& regime) {
  auto [head, body] = spec::split_head(spec::trim(text));
  if (head == "trig") {
    Observable o;
    o.kind_ = DecayKind::TrigPoly;
    o.regime_ = regime;
    o.spec_ = spec::trim(text);
    std::stringstream ss(body);
    std::string item;
    std::vector<Term> terms;
    while (std::getline(ss, item, ';')) {
      if (spec::trim(item).empty()) continue;
      auto c1 = item.find(':');
      if (c1 == std::string::npos) throw ParseError("observable", "trig term '" + item + "'");
      auto rest = item.substr(c1 + 1);
      auto comma = rest.find(',');
      if (comma == std::string::npos)
        throw ParseError("observable", "trig term '" + item + "' needs <re>,<im>");
      Term t;
      t.k = parse_index(spec::trim(item.substr(0, c1)), regime);
      t.re = spec::real_literal(rest.substr(0, comma), "observable");
      t.im = spec::real_literal(rest.substr(comma + 1), "observable");
      t.value = ExtComplex(ExtReal(t.re), ExtReal(t.im));
      for (const auto& u : terms)
        if (u.k == t.k) throw ParseError("observable", "duplicate trig index " + t.k.str());
      terms.push_back(std::move(t));
    }
    if (terms.empty()) throw ParseError("observable", "trig needs at least one term");
    std::vector<Term> extra;
    for (const auto& t : terms) {
      auto it = std::find_if(terms.begin(), terms.end(), [&](const Term& u) { return u.k == -t.k; });
      if (it == terms.end()) {
        std::string im = t.im[0] == '-' ? t.im.substr(1) : (t.im[0] == '+' ? "-" + t.im.substr(1) : "-" + t.im);
        extra.push_back({-t.k, conj(t.value), t.re, im});
      } else if (ExtReal(it->re) != ExtReal(t.re) || ExtReal(it->im) != -ExtReal(t.im)) {
        throw ParseError("observable", "coefficients of " + t.k.str() + " and " + it->k.str() +
                                           " are not complex conjugates");
      }
    }
    for (auto& e : extra) terms.push_back(std::move(e));
    o.terms_ = std::move(terms);
    return o;
  }

  Observable o;
  o.regime_ = regime;
  auto kv = spec::parse_kv(body, "observable");
  auto options = [&](std::initializer_list<const char*> rule_keys) {
    std::vector<const char*> allowed(rule_keys);
    for (auto k : {"mean", "phase", "seed"}) allowed.push_back(k);
    for (const auto& [k, v] : kv)
      if (std::find_if(allowed.begin(), allowed.end(), [&](const char* a) { return k == a; }) ==
          allowed.end())
        throw ParseError("observable", "unknown key '" + k + "'");
    if (kv.count("mean")) o.mean_str_ = spec::real_literal(kv.at("mean"), "observable.mean");
    if (kv.count("phase")) {
      const auto& p = kv.at("phase");
      if (p != "hash" && p != "one") throw ParseError("observable.phase", "expected hash or one");
      o.unit_phase_ = p == "one";
    }
    if (kv.count("seed"))
      o.seed_ = static_cast<std::uint64_t>(spec::to_int(kv.at("seed"), "observable.seed"));
  };
  auto positive = [&](const char* key) {
    auto s = spec::real_literal(spec::get(kv, key, "observable"), std::string("observable.") + key);
    if (spec::to_double(s, "observable") <= 0)
      throw ParseError(std::string("observable.") + key, "must be positive");
    return s;
  };
  if (head == "poly") {
    options({"M"});
    o.kind_ = DecayKind::PolyDecay;
    o.p1_ = positive("M");
  } else if (head == "analytic") {
    options({"mu"});
    o.kind_ = DecayKind::Analytic;
    o.p1_ = positive("mu");
  } else if (head == "gevrey") {
    options({"mu", "nu"});
    o.kind_ = DecayKind::Gevrey;
    o.p1_ = positive("mu");
    o.p2_ = positive("nu");
    if (spec::to_double(o.p2_, "observable.nu") > 1)
      throw ParseError("observable.nu", "Gevrey exponent must be in (0,1]");
  } else if (head == "eta-analytic") {
    options({"mu"});
    o.kind_ = DecayKind::EtaAnalytic;
    o.p1_ = positive("mu");
  } else if (head == "double-exp") {
    options({});
    o.kind_ = DecayKind::DoubleExp;
  } else {
    throw ParseError("observable", "unknown observable spec '" + text + "'");
  }
  o.spec_ = spec::trim(text);
  return o;
}

ExtComplex Observable::term_value(const Term& t) const {
  if (!t.re.empty()) return ExtComplex(ExtReal(t.re), ExtReal(t.im));
  return t.value;
}

ExtComplex Observable::mean() const {
  if (kind_ == DecayKind::TrigPoly) {
    for (const auto& t : terms_)
      if (t.k.is_zero()) return term_value(t);
    return ExtComplex();
  }
  return ExtComplex(ExtReal(mean_str_));
}

std::int64_t Observable::rule_norm(const MultiIndex& k) const {
  return is_eta_kind(kind_) ? k.eta_norm(regime_.eta) : k.l1();
}

ExtReal Observable::rule_modulus(std::int64_t n) const {
  switch (kind_) {
    case DecayKind::PolyDecay:
      return mp::pow(ExtReal(n), -ExtReal(p1_));
    case DecayKind::Analytic:
    case DecayKind::EtaAnalytic:
      return mp::exp(-ExtReal(p1_) * n);
    case DecayKind::Gevrey:
      return mp::exp(-ExtReal(p1_) * mp::pow(ExtReal(n), ExtReal(p2_)));
    case DecayKind::DoubleExp:
      return mp::exp(-mp::exp(ExtReal(n)));
    case DecayKind::TrigPoly:
      break;
  }
  return ExtReal(0);
}

ExtReal Observable::phase_of(const MultiIndex& k) const {
  if (unit_phase_ || k.is_zero()) return ExtReal(0);
  bool pos = k.is_positive();
  std::uint64_t h = splitmix64(seed_);
  for (const auto& e : k.entries()) {
    h = splitmix64(h ^ static_cast<std::uint64_t>(e.index));
    h = splitmix64(h ^ static_cast<std::uint64_t>(pos ? e.value : -e.value));
  }
  ExtReal s = ldexp(from_uint64(h), -64);
  return pos ? s : ExtReal(-s);
}

ExtReal Observable::modulus(const MultiIndex& k) const { return abs(coefficient(k)); }

ExtComplex Observable::coefficient(const MultiIndex& k) const {
  if (k.support_end() > regime_.dim)
    throw SupportMismatch("coefficient: index " + k.str() + " beyond dimension " +
                          std::to_string(regime_.dim));
  if (kind_ == DecayKind::TrigPoly) {
    for (const auto& t : terms_)
      if (t.k.entries() == k.entries()) return term_value(t);
    return ExtComplex();
  }
  if (k.is_zero()) return mean();
  ExtReal m = rule_modulus(rule_norm(k));
  if (unit_phase_) return ExtComplex(m);
  // evaluate on the positive representative so f_{-k} = conj(f_k) exactly
  if (k.is_positive()) return unit_phase(phase_of(k)) * m;
  return conj(unit_phase(phase_of(-k))) * m;
}

BallEnumerator Observable::enumerate(std::int64_t radius) const {
  if (is_eta_kind(kind_)) return enumerate_ball_eta(regime_.eta, radius, regime_.dim);
  return enumerate_ball_finite(regime_.dim, radius);
}

ExtReal Observable::tail_bound(std::int64_t R) const {
  if (R < 0) R = 0;
  if (kind_ == DecayKind::TrigPoly) {
    ExtReal s = 0;
    for (const auto& t : terms_)
      if (rule_norm(t.k) > R) s += abs(term_value(t));
    return s;
  }
  if (is_eta_kind(kind_)) {
    // explicit shells until terms fall off geometrically
    std::int64_t cap = std::max<std::int64_t>(2 * R + 32, 64);
    for (;;) {
      auto counts = shell_counts(eta_weights(regime_.eta, cap, regime_.dim), cap);
      ExtReal sum = 0, prev = -1, prev2 = -1;
      for (std::int64_t r = R + 1; r <= cap; ++r) {
        ExtReal t = ExtReal(counts[r]) * rule_modulus(r);
        sum += t;
        bool geometric = prev >= 0 && prev2 >= 0 && 2 * t <= prev && 2 * prev <= prev2;
        if (geometric && t <= sum * ten_pow_neg(current_digits())) return sum + 2 * t;
        prev2 = prev;
        prev = t;
      }
      if (cap > 8192) throw TailBoundUnavailable("no geometric tail for " + spec_);
      cap *= 2;
    }
  }
  // l1 shells in Z^d: #{||k|| = r} <= A_d r^{d-1} for r >= d
  const int d = regime_.dim;
  const ExtReal A = ldexp(ExtReal(1), 2 * d - 1) / factorial(d - 1);
  std::int64_t r0 = std::max<std::int64_t>(R, d);
  ExtReal integral;
  if (kind_ == DecayKind::PolyDecay) {
    ExtReal M(p1_);
    if (M <= d) throw TailBoundUnavailable("poly:M=" + p1_ + " is not summable in dimension " +
                                           std::to_string(d));
    integral = A * mp::pow(ExtReal(r0), d - M) / (M - d);
  } else {
    ExtReal mu(p1_);
    ExtReal nu = kind_ == DecayKind::Gevrey ? ExtReal(p2_) : ExtReal(1);
    ExtReal s = ExtReal(d) / nu;
    // integrand r^{d-1} e^{-mu r^nu} decreasing and gamma bound within factor 2
    while (mu * nu * mp::pow(ExtReal(r0), nu) <= 2 * d) ++r0;
    ExtReal x = mu * mp::pow(ExtReal(r0), nu);
    integral = A / nu * mp::pow(mu, -s) * upper_gamma_bound(s, x);
  }
  ExtReal explicit_part = 0;
  if (r0 > R) {
    auto counts = shell_counts(std::vector<std::int64_t>(d, 1), r0);
    for (std::int64_t r = R + 1; r <= r0; ++r) explicit_part += ExtReal(counts[r]) * rule_modulus(r);
  }
  return explicit_part + integral;
}

std::int64_t Observable::cutoff_radius(const ExtReal& tail_tol) const {
  if (kind_ == DecayKind::TrigPoly) {
    std::int64_t r = 0;
    for (const auto& t : terms_) r = std::max(r, rule_norm(t.k));
    return r;
  }
  if (tail_tol <= 0) throw TailBoundUnavailable("infinite series needs tail_tol > 0");
  const std::int64_t limit = 1 << 20;
  std::int64_t hi = 1;
  while (tail_bound(hi) >= tail_tol) {
    if (hi >= limit) throw TailBoundUnavailable("cutoff radius beyond " + std::to_string(limit));
    hi *= 2;
  }
  std::int64_t lo = 0;
  while (hi - lo > 1) {
    std::int64_t mid = (lo + hi) / 2;
    (tail_bound(mid) < tail_tol ? hi : lo) = mid;
  }
  return hi;
}

EvaluationPlan Observable::plan(const ExtReal& tail_tol, std::optional<std::int64_t> radius) const {
  EvaluationPlan p;
  p.dim = regime_.dim;
  p.mean = mean();
  p.radius = radius ? *radius : cutoff_radius(tail_tol);
  p.tail_bound = tail_bound(p.radius);
  p.max_abs.assign(p.dim, 0);
  p.abs_sum = abs(p.mean);
  p.grad_abs_sum = abs(p.mean);
  auto add = [&](const MultiIndex& k, const ExtComplex& c) {
    if (c.re == 0 && c.im == 0) return;
    for (const auto& e : k.entries())
      p.max_abs[e.index] = std::max<std::int64_t>(p.max_abs[e.index], std::llabs(e.value));
    ExtReal a = abs(c);
    p.abs_sum += a;
    p.grad_abs_sum += a * (1 + k.l1());
    p.indices.push_back(k);
    p.coeffs.push_back(c);
  };
  if (kind_ == DecayKind::TrigPoly) {
    for (const auto& t : terms_)
      if (!t.k.is_zero() && rule_norm(t.k) <= p.radius) add(t.k, term_value(t));
  } else {
    auto en = enumerate(p.radius);
    while (auto k = en.next()) add(*k, coefficient(*k));
  }
  if (p.dim == 1) {
    p.pos.assign(p.max_abs[0] + 1, ExtComplex());
    p.neg.assign(p.max_abs[0] + 1, ExtComplex());
    for (std::size_t i = 0; i < p.indices.size(); ++i) {
      std::int64_t m = p.indices[i][0];
      (m > 0 ? p.pos[m] : p.neg[-m]) = p.coeffs[i];
    }
  }
  return p;
}

ExtComplex evaluate(const EvaluationPlan& plan, const std::vector<ExtReal>& theta) {
  if (static_cast<int>(theta.size()) != plan.dim)
    throw DimensionError("evaluate: point has " + std::to_string(theta.size()) +
                         " coordinates, observable lives in dimension " + std::to_string(plan.dim));
  if (plan.dim == 1) {
    const std::int64_t R = plan.max_abs[0];
    ExtComplex out = plan.mean;
    if (R == 0) return out;
    ExtComplex z = unit_phase(theta[0]);
    ExtComplex zc = conj(z);
    ExtComplex a = plan.pos[R], b = plan.neg[R];
    for (std::int64_t m = R - 1; m >= 1; --m) {
      a *= z;
      a += plan.pos[m];
      b *= zc;
      b += plan.neg[m];
    }
    a *= z;
    b *= zc;
    out += a;
    out += b;
    return out;
  }
  std::vector<std::vector<ExtComplex>> pw(plan.dim);
  for (int j = 0; j < plan.dim; ++j) {
    if (plan.max_abs[j] == 0) continue;
    ExtComplex z = unit_phase(theta[j]);
    pw[j].reserve(plan.max_abs[j] + 1);
    pw[j].emplace_back(ExtReal(1));
    for (std::int64_t m = 1; m <= plan.max_abs[j]; ++m) pw[j].push_back(pw[j].back() * z);
  }
  ComplexCompensatedSum acc;
  acc.add(plan.mean);
  for (std::size_t i = 0; i < plan.indices.size(); ++i) {
    ExtComplex t = plan.coeffs[i];
    for (const auto& e : plan.indices[i].entries()) {
      const auto& zp = pw[e.index][std::llabs(e.value)];
      t *= e.value > 0 ? zp : conj(zp);
    }
    acc.add(t);
  }
  return acc.result();
}

ExtComplex Observable::evaluate(const std::vector<ExtReal>& theta, const ExtReal& tail_tol) const {
  return wba::evaluate(plan(tail_tol), theta);
}

ClassCertificate Observable::class_certificate(const ApproximationFunction& dtilde,
                                               std::int64_t K) const {
  if (K < 1) throw DomainError("class_certificate: K must be >= 1");
  ClassCertificate c;
  c.sup = 0;
  c.sup_half = 0;
  auto consider = [&](const MultiIndex& k, const ExtComplex& f) {
    std::int64_t n = rule_norm(k);
    if (n > K || k.is_zero()) return;
    ExtReal v = dtilde.value(ExtReal(n)) * abs(f);
    if (v > c.sup) {
      c.sup = v;
      c.worst = k;
    }
    if (2 * n <= K && v > c.sup_half) c.sup_half = v;
  };
  if (kind_ == DecayKind::TrigPoly) {
    for (const auto& t : terms_) consider(t.k, term_value(t));
  } else {
    auto en = enumerate(K);
    while (auto k = en.next()) consider(*k, coefficient(*k));
  }
  // bounded: doubling the radius does not raise the sup
  c.member = c.sup <= c.sup_half * (1 + ten_pow_neg(std::min(20, current_digits() - 5)));
  return c;
}

}  // namespace wba
