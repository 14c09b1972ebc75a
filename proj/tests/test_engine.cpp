#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "wba/engine.hpp"
#include "wba/errors.hpp"
#include "wba/quadrature.hpp"

#include <random>
#include <set>

using namespace wba;
namespace mp = boost::multiprecision;

namespace {

const Regime kT1{RegimeKind::Finite, 1, 2};
const Regime kT2{RegimeKind::Finite, 2, 2};

AveragingRun discrete(const Observable& f, const RotationVector& rho, const WeightFunction& w,
                      std::int64_t N, int P, std::vector<ExtReal> theta0 = {}) {
  if (theta0.empty()) theta0.assign(rho.dim(), ExtReal(0));
  return AveragingRun{f, rho, w, theta0, DiscreteMode{N}, P, {}};
}

AveragingRun continuous(const Observable& f, const RotationVector& rho, const WeightFunction& w,
                        const ExtReal& T, const ExtReal& tol, int P) {
  return AveragingRun{f, rho, w, std::vector<ExtReal>(rho.dim(), ExtReal(0)),
                      ContinuousMode{T, tol}, P, {}};
}

ExtComplex cdiv(const ExtComplex& a, const ExtComplex& b) {
  return a * conj(b) * ExtReal(1 / norm2(b));
}

// distinct positive modes with |k_j| <= 6 and random coefficients
Observable random_trig(std::mt19937_64& g, const Regime& reg) {
  std::uniform_int_distribution<int> nk(1, 5), kv(-6, 6);
  std::uniform_real_distribution<double> cv(-1, 1);
  std::vector<std::pair<MultiIndex, ExtComplex>> terms;
  std::set<std::vector<std::int64_t>> seen;
  int n = nk(g);
  while (static_cast<int>(terms.size()) < n) {
    std::vector<std::int64_t> k(reg.dim);
    for (auto& v : k) v = kv(g);
    auto mk = MultiIndex::dense(k);
    if (mk.is_zero() || !mk.is_positive() || !seen.insert(k).second) continue;
    terms.push_back({mk, ExtComplex(ExtReal(cv(g)), ExtReal(cv(g)))});
  }
  terms.push_back({MultiIndex::dense(std::vector<std::int64_t>(reg.dim, 0)),
                   ExtComplex(ExtReal(cv(g)))});
  return Observable::trig(terms, reg);
}

}  // namespace

TEST_CASE("constant observables average exactly") {
  PrecisionScope p(40);
  auto c = Observable::parse("trig:0:0.75,0", kT1);
  auto rho = make_rotation("golden");
  for (auto w : {"flat", "exp", "bump:p=2,q=2", "poly:s=4"})
    for (std::int64_t N : {2, 17, 300}) {
      auto r = run(discrete(c, rho, WeightFunction::parse(w), N, 40));
      CHECK(r.value.re == ExtReal("0.75"));
      CHECK(r.value.im == 0);
      CHECK(r.abs_error == 0);
    }
  auto rc = run(continuous(c, rho, WeightFunction::exp_bump(), ExtReal(64), ExtReal("1e-30"), 40));
  CHECK(rc.abs_error == 0);
}

TEST_CASE("unweighted cosine on the golden orbit") {
  PrecisionScope p(40);
  auto f = Observable::parse("trig:1:0.5,0", kT1);
  auto rho = make_rotation("golden");
  auto r = birkhoff_unweighted(discrete(f, rho, WeightFunction::flat(), 1000, 40));
  // |error| <= 1/(N sin(pi rho)); the geometric sum lands at about 3e-5 here
  CHECK(r.abs_error >= ExtReal("1e-5"));
  CHECK(r.abs_error <= ExtReal("1e-2"));
  // closed-form geometric sum
  ExtComplex z = unit_phase(rho.coords()[0]);
  ExtComplex zN = unit_phase(1000 * rho.coords()[0]);
  ExtComplex g = cdiv(ExtComplex(ExtReal(1)) - zN, ExtComplex(ExtReal(1)) - z);
  ExtReal expect = mp::abs(g.re / 1000);
  CHECK(mp::abs(r.abs_error - expect) < ten_pow_neg(35));
  // N = 1 returns f(theta0)
  auto one = birkhoff_unweighted(
      discrete(f, rho, WeightFunction::flat(), 1, 40, {ExtReal("0.125")}));
  CHECK(mp::abs(one.value.re - mp::cos(two_pi() / 8)) < ten_pow_neg(38));
}

TEST_CASE("weighted cosine and the flat path") {
  PrecisionScope p(50);
  auto f = Observable::parse("trig:1:0.5,0", kT1);
  auto rho = make_rotation("golden");
  auto rw = birkhoff_weighted_discrete(discrete(f, rho, WeightFunction::exp_bump(), 1024, 50));
  CHECK(rw.abs_error < ExtReal("1e-10"));
  auto orc = fourier_error_oracle(discrete(f, rho, WeightFunction::exp_bump(), 1024, 50));
  CHECK(mp::abs(rw.abs_error - abs(orc.error)) < ten_pow_neg(40));
  CHECK(rw.diag.orbit_residual < ten_pow_neg(45));

  auto flat_run = discrete(f, rho, WeightFunction::flat(), 777, 50);
  auto a = birkhoff_unweighted(flat_run);
  auto b = birkhoff_weighted_discrete(flat_run);
  CHECK(a.value.re == b.value.re);
  CHECK(a.value.im == b.value.im);
  CHECK_THROWS_AS(birkhoff_unweighted(discrete(f, rho, WeightFunction::exp_bump(), 8, 50)),
                  DomainError);
  CHECK_THROWS_AS(run(discrete(f, rho, WeightFunction::exp_bump(), 1, 50)), DomainError);
  CHECK_THROWS_AS(run(discrete(f, rho, WeightFunction::exp_bump(), 8, 20)), DomainError);
  CHECK_THROWS_AS(run(discrete(f, rho, WeightFunction::exp_bump(), 8, 50, {ExtReal(0), ExtReal(0)})),
                  DimensionError);
}

TEST_CASE("kernel S_N") {
  PrecisionScope p(40);
  std::mt19937_64 g(4);
  for (auto spec : {"exp", "bump:p=2,q=2", "poly:s=4", "flat"}) {
    auto w = WeightFunction::parse(spec);
    for (std::int64_t N : {2, 10, 128}) {
      auto s0 = kernel_S_N(w, N, ExtReal(0));
      CHECK(s0.re == 1);
      CHECK(s0.im == 0);
      CHECK(kernel_S_N(w, N, ExtReal(3)).re == 1);
      for (int t = 0; t < 20; ++t) {
        ExtReal x = ldexp(from_uint64(g()), -64);
        CHECK(abs(kernel_S_N(w, N, x)) <= 1 + ten_pow_neg(38));
      }
    }
  }
  // x = 1/2, N even: real, tiny, and equal to the direct alternating sum
  auto w = WeightFunction::exp_bump();
  auto s = kernel_S_N(w, 64, ExtReal("0.5"));
  CHECK(mp::abs(s.im) < ten_pow_neg(38));
  CHECK(mp::abs(s.re) < ExtReal("1e-6"));
  ExtReal ref;
  {
    PrecisionScope hi(80);
    auto w2 = WeightFunction::exp_bump();
    ExtReal sum = 0;
    for (int n = 0; n < 64; ++n) sum += (n % 2 ? -1 : 1) * w2(ExtReal(n) / 64);
    ref = sum / w2.normalization_A_N(64);
  }
  CHECK(mp::abs(s.re - ref) < ten_pow_neg(38) * (1 + mp::abs(ref)));
  CHECK_THROWS_AS(kernel_S_N(w, 1, ExtReal(0)), DomainError);
}

TEST_CASE("time domain and Fourier oracle agree on random trigonometric polynomials") {
  const int P = 60;
  PrecisionScope p(P);
  std::mt19937_64 g(11);
  const char* weights[] = {"exp", "bump:p=2,q=2", "poly:s=4", "flat"};
  for (int trial = 0; trial < 8; ++trial) {
    bool two = trial % 2;
    auto rho = make_rotation(two ? "sqrtprimes:d=2" : "golden");
    auto f = random_trig(g, two ? kT2 : kT1);
    auto w = WeightFunction::parse(weights[trial % 4]);
    std::vector<ExtReal> th;
    for (int j = 0; j < rho.dim(); ++j) th.push_back(ldexp(from_uint64(g()), -64));
    for (std::int64_t N : {128, 1024}) {
      CAPTURE(f.spec());
      CAPTURE(N);
      auto r = discrete(f, rho, w, N, P, th);
      auto t = run(r);
      auto o = fourier_error_oracle(r);
      CHECK(abs((t.value - f.mean()) - o.error) < ten_pow_neg(P - 10));
      CHECK(mp::abs(t.abs_error - abs(o.error)) < ten_pow_neg(P - 10));
    }
  }
}

TEST_CASE("resonant mode never averages out") {
  PrecisionScope p(40);
  // 2 rho is an integer: the kernel is 1 and the pair +-2 contributes 2 Re(f_2 e^{4 pi i theta0})
  auto rho = make_rotation("list:0.5");
  auto f = Observable::parse("trig:2:0.25,0.1", kT1);
  for (auto w : {"exp", "flat"}) {
    for (auto th : {"0", "0.1"}) {
      auto r = discrete(f, rho, WeightFunction::parse(w), 64, 40, {ExtReal(th)});
      auto e = ExtComplex(ExtReal("0.25"), ExtReal("0.1")) * unit_phase(2 * ExtReal(th));
      ExtReal expect = mp::abs(2 * e.re);
      CHECK(mp::abs(run(r).abs_error - expect) < ten_pow_neg(35));
      CHECK(mp::abs(abs(fourier_error_oracle(r).error) - expect) < ten_pow_neg(35));
    }
  }
}

TEST_CASE("shift covariance for a single mode") {
  PrecisionScope p(50);
  auto rho = make_rotation("sqrtprimes:d=2");
  auto k = MultiIndex::dense({2, -1});
  ExtComplex c(ExtReal("0.5"), ExtReal("0.25"));
  auto f = Observable::trig({{k, c}}, kT2);
  ExtReal x = rho.dot(k);
  for (auto w : {"exp", "flat", "poly:s=3"}) {
    auto W = WeightFunction::parse(w);
    // the orbit only enters through the phase e^{2 pi i k.theta0}
    ExtComplex s = kernel_S_N(W, 300, x);
    for (auto [a, b] : {std::pair{"0", "0"}, std::pair{"0.3", "0.71"}, std::pair{"0.9", "0.05"}}) {
      std::vector<ExtReal> th = {ExtReal(a), ExtReal(b)};
      auto t = run(discrete(f, rho, W, 300, 50, th));
      ExtComplex mode = c * unit_phase(2 * th[0] - th[1]) * s;
      CHECK(mp::abs(t.value.re - 2 * mode.re) < ten_pow_neg(40));
      CHECK(mp::abs(t.value.im) < ten_pow_neg(40));
    }
  }
}

TEST_CASE("precision scaling") {
  std::mt19937_64 g(3);
  for (int P : {40, 60}) {
    auto f = Observable::parse("analytic:mu=1", kT1);
    auto rho = make_rotation("golden");
    RunResult a, b;
    {
      PrecisionScope s(P);
      a = run(discrete(f, rho, WeightFunction::exp_bump(), 512, P, {ExtReal("0.2")}));
    }
    {
      PrecisionScope s(P + 20);
      b = run(discrete(f, rho, WeightFunction::exp_bump(), 512, P + 20, {ExtReal("0.2")}));
    }
    PrecisionScope s(P + 20);
    CHECK(abs(a.value - b.value) <= ten_pow_neg(P - 10));
  }
}

TEST_CASE("weighted beats unweighted by six orders") {
  PrecisionScope p(50);
  auto f = Observable::parse("analytic:mu=1", kT1);
  auto rho = make_rotation("golden");
  auto w = run(discrete(f, rho, WeightFunction::exp_bump(), 4096, 50));
  auto u = run(discrete(f, rho, WeightFunction::flat(), 4096, 50));
  CHECK(w.abs_error * ExtReal("1e6") < u.abs_error);
}

TEST_CASE("continuous mode") {
  PrecisionScope p(50);
  auto rho = make_rotation("golden");
  auto W = WeightFunction::exp_bump();
  // T omega = 0 for this mode pair: I_T = 1 and the error is 2 Re f_k at theta0 = 0
  auto res = make_rotation("list:0.5,0.25");
  auto single = Observable::parse("trig:1/-2:0.3,0.4", kT2);
  auto rs = run(continuous(single, res, W, ExtReal(100), ExtReal("1e-40"), 50));
  CHECK(mp::abs(rs.abs_error - ExtReal("0.6")) < ten_pow_neg(38));

  // per-mode integral against a fixed composite rule at doubled resolution
  ExtReal T(512);
  ExtReal omega = T * rho.coords()[0];
  auto I = oscillatory_weight_integrals(W, {omega}, ExtReal("1e-40"))[0];
  auto I2 = oscillatory_weight_integrals(W, {omega}, ExtReal("1e-40"), 2)[0];
  CHECK(abs(I - I2) < ExtReal("1e-25"));
  ExtComplex fixed;
  {
    const int panels = 2048, G = 40;
    const auto& rule = gauss_legendre(G);
    for (int j = 0; j < panels; ++j) {
      ExtReal a = ExtReal(j) / panels, h = ExtReal(1) / (2 * panels);
      for (int i = 0; i < G; ++i) {
        ExtReal y = a + h + h * rule.nodes[i];
        fixed += unit_phase(omega * y) * ExtReal(rule.weights[i] * h * W(y));
      }
    }
  }
  CHECK(abs(I - fixed) < ExtReal("1e-25"));
  // conjugate symmetry
  auto Im = oscillatory_weight_integrals(W, {ExtReal(-omega)}, ExtReal("1e-40"))[0];
  CHECK(abs(Im - conj(I)) < ExtReal("1e-38"));

  // per-mode and time-domain paths agree on a trigonometric polynomial
  auto f = Observable::parse("trig:1:0.5,0.1;3:0.2,-0.3;0:1,0", kT1);
  auto r = continuous(f, rho, W, ExtReal(64), ExtReal("1e-35"), 50);
  auto a = birkhoff_weighted_continuous(r);
  auto b = birkhoff_continuous_time_domain(r);
  CHECK(abs(a.value - b.value) < ExtReal("1e-30"));
  CHECK(a.abs_error < ExtReal("1e-3"));
  auto f2 = Observable::parse("trig:1/1:0.5,0.1;0/2:0.2,0", kT2);
  auto rho2 = make_rotation("sqrtprimes:d=2");
  auto r2 = continuous(f2, rho2, W, ExtReal(40), ExtReal("1e-35"), 50);
  CHECK(abs(birkhoff_weighted_continuous(r2).value - birkhoff_continuous_time_domain(r2).value) <
        ExtReal("1e-30"));
  CHECK_THROWS_AS(run(continuous(f, rho, W, ExtReal("0.5"), ExtReal("1e-30"), 50)), DomainError);
}
