#include "wba/rotations.hpp"

#include "wba/errors.hpp"
#include "wba/spec_parse.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <random>
#include <sstream>

namespace wba {

namespace mp = boost::multiprecision;

struct ApproximationFunction::EnvelopeCache {
  std::mutex m;
  std::vector<double> log_env;  // log_env[nu], nu = 0..size-1
};

ApproximationFunction ApproximationFunction::power(const std::string& tau) {
  ApproximationFunction f;
  f.kind_ = ApproxKind::Power;
  f.s1_ = spec::real_literal(tau, "approx.tau");
  f.a_ = spec::to_double(tau, "approx.tau");
  if (f.a_ <= 0) throw ParseError("approx.tau", "must be positive");
  f.spec_ = "pow:tau=" + f.s1_;
  return f;
}

ApproximationFunction ApproximationFunction::stretched_exp(const std::string& mu,
                                                           const std::string& nu) {
  ApproximationFunction f;
  f.kind_ = ApproxKind::StretchedExp;
  f.s1_ = spec::real_literal(mu, "approx.mu");
  f.s2_ = spec::real_literal(nu, "approx.nu");
  f.a_ = spec::to_double(mu, "approx.mu");
  f.b_ = spec::to_double(nu, "approx.nu");
  if (f.a_ <= 0 || f.b_ <= 0) throw ParseError("approx", "sexp parameters must be positive");
  f.spec_ = "sexp:mu=" + f.s1_ + ",nu=" + f.s2_;
  return f;
}

ApproximationFunction ApproximationFunction::dioph_product(const std::string& mu, int eta) {
  ApproximationFunction f;
  f.kind_ = ApproxKind::DiophProduct;
  f.s1_ = spec::real_literal(mu, "approx.mu");
  f.a_ = spec::to_double(mu, "approx.mu");
  f.eta_ = eta;
  if (f.a_ <= 0) throw ParseError("approx.mu", "must be positive");
  if (eta < 1) throw ParseError("approx.eta", "must be >= 1");
  f.spec_ = "dioprod:mu=" + f.s1_ + ",eta=" + std::to_string(eta);
  f.env_ = std::make_shared<EnvelopeCache>();
  return f;
}

ApproximationFunction ApproximationFunction::double_exp() {
  ApproximationFunction f;
  f.kind_ = ApproxKind::DoubleExp;
  f.spec_ = "dexp";
  return f;
}

ApproximationFunction ApproximationFunction::tabulated(std::vector<std::pair<double, double>> t) {
  if (t.size() < 2) throw ParseError("approx", "table needs at least two points");
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i].second <= 0) throw ParseError("approx", "table values must be positive");
    if (i && (t[i].first <= t[i - 1].first || t[i].second <= t[i - 1].second))
      throw ParseError("approx", "table must be strictly increasing");
  }
  ApproximationFunction f;
  f.kind_ = ApproxKind::Tabulated;
  f.table_ = std::move(t);
  std::ostringstream os;
  os.precision(17);
  os << "table:";
  for (std::size_t i = 0; i < f.table_.size(); ++i)
    os << (i ? ";" : "") << f.table_[i].first << ':' << f.table_[i].second;
  f.spec_ = os.str();
  return f;
}

ApproximationFunction ApproximationFunction::parse(const std::string& text) {
  auto [head, body] = spec::split_head(text);
  if (head == "dexp" && spec::trim(body).empty()) return double_exp();
  if (head == "table") {
    std::vector<std::pair<double, double>> t;
    std::stringstream ss(body);
    std::string item;
    while (std::getline(ss, item, ';')) {
      auto c = item.find(':');
      if (c == std::string::npos) throw ParseError("approx", "table item '" + item + "'");
      t.emplace_back(spec::to_double(item.substr(0, c), "approx"),
                     spec::to_double(item.substr(c + 1), "approx"));
    }
    return tabulated(std::move(t));
  }
  auto kv = spec::parse_kv(body, "approx");
  if (head == "pow") {
    spec::require_keys(kv, {"tau"}, "approx");
    return power(spec::get(kv, "tau", "approx"));
  }
  if (head == "sexp") {
    spec::require_keys(kv, {"mu", "nu"}, "approx");
    return stretched_exp(spec::get(kv, "mu", "approx"), spec::get(kv, "nu", "approx"));
  }
  if (head == "dioprod") {
    spec::require_keys(kv, {"mu", "eta"}, "approx");
    return dioph_product(spec::get(kv, "mu", "approx"),
                         static_cast<int>(spec::to_int(spec::get(kv, "eta", "approx"), "approx.eta")));
  }
  throw ParseError("approx", "unknown approximation function '" + text + "'");
}

ExtReal ApproximationFunction::p1() const { return ExtReal(s1_); }
ExtReal ApproximationFunction::p2() const { return ExtReal(s2_); }

double ApproximationFunction::envelope_log(std::int64_t nu) const {
  if (nu <= 0) return 0.0;
  std::lock_guard<std::mutex> lock(env_->m);
  auto& env = env_->log_env;
  if (static_cast<std::int64_t>(env.size()) <= nu) {
    std::int64_t cap = std::max<std::int64_t>(64, 2 * nu);
    auto w = eta_weights(eta_, cap);
    std::vector<double> best(cap + 1, 0.0);
    for (std::size_t i = w.size(); i-- > 0;) {
      double bj = std::pow(std::max(1.0, static_cast<double>(i)), a_);
      std::vector<double> nb(cap + 1, 0.0);
      for (std::int64_t r = 0; r <= cap; ++r) {
        double m = best[r];
        for (std::int64_t t = 1; t * w[i] <= r; ++t)
          m = std::max(m, std::log1p(std::pow(static_cast<double>(t), a_) * bj) + best[r - t * w[i]]);
        nb[r] = m;
      }
      best = std::move(nb);
    }
    env = std::move(best);
  }
  return env[nu];
}

ExtReal ApproximationFunction::log_value(const ExtReal& x) const {
  ExtReal v;
  switch (kind_) {
    case ApproxKind::Power:
      v = p1() * safe_log(x);
      break;
    case ApproxKind::StretchedExp:
      v = p1() * mp::pow(x, p2());
      break;
    case ApproxKind::DoubleExp:
      v = mp::exp(x);
      break;
    case ApproxKind::DiophProduct: {
      if (x <= 0) return ExtReal(0);
      ExtReal fl = mp::floor(x);
      auto lo = fl.convert_to<std::int64_t>();
      double a = envelope_log(lo), b = envelope_log(lo + 1);
      ExtReal t = x - fl;
      v = ExtReal(a) + t * (b - a);
      break;
    }
    case ApproxKind::Tabulated: {
      double xd = to_double(x);
      if (xd < table_.front().first || xd > table_.back().first)
        throw DomainError("tabulated approximation function evaluated outside its table");
      std::size_t i = 1;
      while (i + 1 < table_.size() && table_[i].first < xd) ++i;
      double x0 = table_[i - 1].first, x1 = table_[i].first;
      ExtReal l0 = mp::log(ExtReal(table_[i - 1].second)), l1 = mp::log(ExtReal(table_[i].second));
      v = l0 + (x - x0) / (x1 - x0) * (l1 - l0);
      break;
    }
  }
  if (normalized_) v -= mp::log(scale());
  return v;
}

ExtReal ApproximationFunction::value(const ExtReal& x) const {
  if (kind_ == ApproxKind::Power && !normalized_) return mp::pow(x, p1());
  return mp::exp(log_value(x));
}

ExtReal ApproximationFunction::scale() const {
  if (!normalized_) return ExtReal(1);
  ApproximationFunction raw = *this;
  raw.normalized_ = false;
  return raw.value(ExtReal(1));
}

ApproximationFunction ApproximationFunction::normalized() const {
  if (kind_ == ApproxKind::Power || kind_ == ApproxKind::DiophProduct || normalized_) return *this;
  ApproximationFunction f = *this;
  f.normalized_ = true;
  f.spec_ = spec_;
  return f;
}

ExtReal ApproximationFunction::inverse(const ExtReal& y) const {
  ExtReal ly = safe_log(y);
  if (normalized_) ly += mp::log(scale());
  switch (kind_) {
    case ApproxKind::Power:
      return mp::exp(ly / p1());
    case ApproxKind::StretchedExp:
      if (ly <= 0) return ExtReal(0);
      return mp::pow(ly / p1(), 1 / p2());
    case ApproxKind::DoubleExp:
      if (ly <= 1) return ExtReal(0);
      return mp::log(ly);
    case ApproxKind::DiophProduct: {
      if (ly <= 0) return ExtReal(0);
      double target = to_double(ly);
      std::int64_t nu = 1;
      while (envelope_log(nu) < target) {
        if (nu > (std::int64_t(1) << 24)) throw DomainError("dioprod inverse out of range");
        nu *= 2;
      }
      std::int64_t lo = nu / 2, hi = nu;  // envelope(lo) < target <= envelope(hi)
      while (hi - lo > 1) {
        std::int64_t mid = (lo + hi) / 2;
        if (envelope_log(mid) < target)
          lo = mid;
        else
          hi = mid;
      }
      double a = envelope_log(lo), b = envelope_log(hi);
      return ExtReal(lo) + (ly - a) / (b - a);
    }
    case ApproxKind::Tabulated: {
      const ExtReal& t = ly;
      for (std::size_t i = 1; i < table_.size(); ++i) {
        ExtReal l0 = mp::log(ExtReal(table_[i - 1].second)), l1 = mp::log(ExtReal(table_[i].second));
        if (t <= l1 || i + 1 == table_.size()) {
          if (t < l0 && i == 1) throw DomainError("tabulated inverse below table");
          if (t > l1) throw DomainError("tabulated inverse above table");
          return ExtReal(table_[i - 1].first) +
                 (ly - l0) / (l1 - l0) * (table_[i].first - table_[i - 1].first);
        }
      }
      throw DomainError("tabulated inverse");
    }
  }
  return ExtReal(0);
}

ExtReal ApproximationFunction::log_of_index(const MultiIndex& k, std::optional<int> eta) const {
  if (kind_ == ApproxKind::DiophProduct) {
    ExtReal s = 0, mu = p1();
    for (const auto& e : k.entries()) {
      ExtReal b = std::max(1, e.index);
      s += mp::log1p(mp::pow(ExtReal(std::llabs(e.value)) * b, mu));
    }
    return s;
  }
  std::int64_t n = eta ? k.eta_norm(*eta) : k.l1();
  return log_value(ExtReal(n));
}

ExtReal ApproximationFunction::of_index(const MultiIndex& k, std::optional<int> eta) const {
  if (kind_ == ApproxKind::DiophProduct) return mp::exp(log_of_index(k, eta));
  std::int64_t n = eta ? k.eta_norm(*eta) : k.l1();
  return value(ExtReal(n));
}

namespace {

std::vector<int> first_primes(int n) {
  std::vector<int> p;
  for (int c = 2; static_cast<int>(p.size()) < n; ++c) {
    bool prime = true;
    for (int q : p) {
      if (q * q > c) break;
      if (c % q == 0) {
        prime = false;
        break;
      }
    }
    if (prime) p.push_back(c);
  }
  return p;
}

int checked_dim(std::int64_t v, const std::string& field) {
  if (v < 1 || v > 4096) throw DimensionError(field + ": dimension must be in [1, 4096]");
  return static_cast<int>(v);
}

}  // namespace

RotationVector RotationVector::parse(const std::string& text) {
  RotationVector r;
  r.spec_ = spec::trim(text);
  r.digits_ = current_digits();
  auto [head, body] = spec::split_head(r.spec_);
  if (head == "golden" && spec::trim(body).empty()) {
    r.regime_ = {RegimeKind::Finite, 1, 2};
    r.coords_.push_back((mp::sqrt(ExtReal(5)) - 1) / 2);
    return r;
  }
  if (head == "list") {
    std::stringstream ss(body);
    std::string item;
    while (std::getline(ss, item, ','))
      r.coords_.push_back(frac(ExtReal(spec::real_literal(item, "rotation"))));
    r.regime_ = {RegimeKind::Finite, checked_dim(static_cast<std::int64_t>(r.coords_.size()), "rotation"), 2};
    return r;
  }
  auto kv = spec::parse_kv(body, "rotation");
  if (head == "sqrtprimes") {
    spec::require_keys(kv, {"d", "D", "eta"}, "rotation");
    bool inf = kv.count("D") > 0;
    if (inf == (kv.count("d") > 0))
      throw ParseError("rotation", "sqrtprimes needs exactly one of d= or D=");
    if (!inf && kv.count("eta")) throw ParseError("rotation", "eta only applies with D=");
    int n = checked_dim(spec::to_int(kv.at(inf ? "D" : "d"), "rotation"), "rotation");
    int eta = kv.count("eta") ? static_cast<int>(spec::to_int(kv.at("eta"), "rotation.eta")) : 2;
    r.regime_ = {inf ? RegimeKind::InfiniteTruncated : RegimeKind::Finite, n, eta};
    for (int p : first_primes(n)) {
      ExtReal c = frac(mp::sqrt(ExtReal(p)));
      r.coords_.push_back(inf ? ExtReal(c + 1) : c);
    }
    return r;
  }
  if (head == "uniform") {
    spec::require_keys(kv, {"D", "seed", "eta"}, "rotation");
    int n = checked_dim(spec::to_int(spec::get(kv, "D", "rotation"), "rotation.D"), "rotation");
    auto seed = spec::to_int(spec::get(kv, "seed", "rotation"), "rotation.seed");
    int eta = kv.count("eta") ? static_cast<int>(spec::to_int(kv.at("eta"), "rotation.eta")) : 2;
    r.regime_ = {RegimeKind::InfiniteTruncated, n, eta};
    std::mt19937_64 gen(static_cast<std::uint64_t>(seed));
    for (int j = 0; j < n; ++j) {
      ExtReal c = 1;
      for (int i = 1; i <= 4; ++i) c += ldexp(from_uint64(gen()), -64 * i);
      r.coords_.push_back(c);
    }
    return r;
  }
  throw ParseError("rotation", "unknown rotation spec '" + text + "'");
}

RotationVector make_rotation(const std::string& spec) { return RotationVector::parse(spec); }

RotationVector RotationVector::at_precision(int digits) const {
  if (digits == digits_) return *this;
  PrecisionScope scope(digits);
  RotationVector r = parse(spec_);
  r.claim_ = claim_;
  return r;
}

RotationVector RotationVector::with_claim(NonresonanceClaim c) const {
  RotationVector r = *this;
  r.claim_ = std::move(c);
  return r;
}

ExtReal RotationVector::dot(const MultiIndex& k) const {
  if (k.dim() && regime_.finite() && *k.dim() != regime_.dim)
    throw SupportMismatch("index of dimension " + std::to_string(*k.dim()) +
                          " used with rotation of dimension " + std::to_string(regime_.dim));
  if (k.support_end() > regime_.dim)
    throw SupportMismatch("index " + k.str() + " reaches beyond dimension " +
                          std::to_string(regime_.dim));
  const auto& e = k.entries();
  ExtReal r = 0;
  if (e.empty()) return r;
  std::vector<ExtReal> terms(e.size());
  std::vector<mpfr_ptr> ptrs(e.size());
  for (std::size_t i = 0; i < e.size(); ++i) {
    const auto& c = coords_[e[i].index].backend().data();
    mpfr_set_prec(terms[i].backend().data(), mpfr_get_prec(c) + 64);
    mpfr_mul_si(terms[i].backend().data(), c, static_cast<long>(e[i].value), MPFR_RNDN);
    ptrs[i] = terms[i].backend().data();
  }
  mpfr_sum(r.backend().data(), ptrs.data(), ptrs.size(), MPFR_RNDN);
  return r;
}

ExtReal small_divisor(const RotationVector& rho, const MultiIndex& k, DivisorMode mode) {
  ExtReal d = rho.dot(k);
  if (mode == DivisorMode::Continuous) return mp::abs(d);
  return dist_to_int(d);
}

ScanResult nonresonance_scan(const RotationVector& rho, const ApproximationFunction& delta,
                             std::int64_t K, DivisorMode mode) {
  if (K < 1) throw DomainError("nonresonance_scan: K must be >= 1");
  const Regime& reg = rho.regime();
  auto en = reg.finite() ? enumerate_ball_finite(reg.dim, K)
                         : enumerate_ball_eta(reg.eta, K, reg.dim);
  ScanResult best;
  best.radius = K;
  bool have = false;
  while (auto k = en.next()) {
    if (!k->is_positive()) continue;
    ++best.scanned;
    ExtReal v = delta.of_index(*k, reg.norm_eta()) * small_divisor(rho, *k, mode);
    if (!have || v < best.alpha) {
      best.alpha = v;
      best.argmin = *k;
      have = true;
    }
  }
  if (!have) throw DomainError("nonresonance_scan: empty ball");
  return best;
}

double calibrate_product_bound(const ApproximationFunction& d, double rho_star,
                               std::int64_t nu_max) {
  if (d.kind() != ApproxKind::DiophProduct)
    throw DomainError("calibrate_product_bound needs a dioprod function");
  double m = 0;
  for (std::int64_t nu = 1; nu <= nu_max; ++nu)
    m = std::max(m, to_double(d.log_value(ExtReal(nu))) - rho_star * nu);
  const double s = std::pow(rho_star, -1.0 / d.eta());
  auto g = [&](double tau) { return tau * s * std::log(tau / rho_star); };
  double lo = rho_star, hi = 2 * rho_star;
  while (g(hi) < m) hi *= 2;
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    (g(mid) < m ? lo : hi) = mid;
  }
  return hi;
}

DivisorMode parse_divisor_mode(const std::string& s) {
  if (s == "discrete") return DivisorMode::Discrete;
  if (s == "continuous") return DivisorMode::Continuous;
  throw ParseError("mode", "expected discrete or continuous, got '" + s + "'");
}

}  // namespace wba
