#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"
#include "wba/errors.hpp"
#include "wba/quadrature.hpp"
#include "wba/weights.hpp"

using namespace wba;
namespace mp = boost::multiprecision;

TEST_CASE("wbar normalizer and midpoint value") {
  PrecisionScope p(60);
  auto w = WeightFunction::exp_bump();
  CHECK(mp::abs(w.normalizer() / ExtReal(oracle::kCStar) - 1) < ten_pow_neg(55));
  CHECK(mp::abs(w(ExtReal("0.5")) / ExtReal(oracle::kWbarHalf) - 1) < ten_pow_neg(55));
  CHECK(w(ExtReal(0)) == 0);
  CHECK(w(ExtReal(1)) == 0);
  CHECK_THROWS_AS(w(ExtReal("1.5")), DomainError);
  CHECK_THROWS_AS(w(ExtReal("-0.1")), DomainError);
}

TEST_CASE("weights integrate to one and are positive inside") {
  PrecisionScope p(40);
  for (auto spec : {"exp", "bump:p=2,q=2", "bump:p=1,q=3", "poly:s=3", "poly:s=6", "flat"}) {
    auto w = WeightFunction::parse(spec);
    ExtReal tol = ten_pow_neg(35);
    ExtReal total = integrate([&](const ExtReal& x) { return w(x); }, ExtReal(0), ExtReal(1),
                              tol, 0, 8);
    CAPTURE(spec);
    CHECK(mp::abs(total - 1) < ten_pow_neg(30));
    for (int i = 1; i < 50; ++i) CHECK(w(ExtReal(i) / 50) > 0);
    if (w.kind() != WeightKind::TrivialFlat) {
      CHECK(w(ExtReal(0)) == 0);
      CHECK(w(ExtReal(1)) == 0);
    }
  }
}

TEST_CASE("symmetry") {
  PrecisionScope p(40);
  auto b = WeightFunction::bump("2", "2");
  CHECK(b(ExtReal("0.3")) == b(1 - ExtReal("0.3")));
  auto e = WeightFunction::exp_bump();
  auto q = WeightFunction::poly(4);
  for (int i = 1; i < 20; ++i) {
    ExtReal x = ExtReal(i) / 20;
    CHECK(mp::abs(e(x) - e(1 - x)) <= ten_pow_neg(38) * e(x));
    CHECK(mp::abs(q(x) - q(1 - x)) <= ten_pow_neg(38) * q(x));
  }
  auto a = WeightFunction::bump("1", "3");
  CHECK(!a.symmetric());
  CHECK(a(ExtReal("0.3")) != a(ExtReal("0.7")));
}

TEST_CASE("smoothness orders and spec round trip") {
  PrecisionScope p(30);
  CHECK(!WeightFunction::exp_bump().smoothness_order().has_value());
  CHECK(WeightFunction::poly(5).smoothness_order() == 4);
  CHECK(WeightFunction::flat().smoothness_order() == 0);
  CHECK(WeightFunction::parse("bump:q=2,p=3").spec() == "bump:p=3,q=2");
  CHECK_THROWS_AS(WeightFunction::parse("poly:s=2"), ParseError);
  CHECK_THROWS_AS(WeightFunction::parse("poly:t=4"), ParseError);
  CHECK_THROWS_AS(WeightFunction::parse("bump:p=x,q=2"), ParseError);
  CHECK_THROWS_AS(WeightFunction::parse("gauss"), ParseError);
}

TEST_CASE("A_N basics") {
  PrecisionScope p(50);
  CHECK(WeightFunction::flat().normalization_A_N(10) == 10);
  auto w = WeightFunction::exp_bump();
  CHECK(mp::abs(w.normalization_A_N(2) - ExtReal(oracle::kWbarHalf)) < ten_pow_neg(45));
  CHECK_THROWS_AS(w.normalization_A_N(1), DegenerateWindow);
  // the n = N term is w(1) = 0, so extending the sum changes nothing
  auto s = w.samples(64);
  ExtReal a = w.normalization_A_N(64);
  CHECK(a + w(ExtReal(1)) == a);
  CHECK(s.size() == 64);
}

TEST_CASE("A_N/N - 1 for wbar matches the Poisson oracle") {
  PrecisionScope p(80);
  auto w = WeightFunction::exp_bump();
  // mpmath, 120 digits, direct summation with the mpmath normalizer
  const std::pair<int, const char*> table[] = {{16, "-7.004409361e-6"},
                                               {64, "-6.486468044e-13"},
                                               {256, "7.922570072e-26"},
                                               {1024, "1.68212282e-51"}};
  for (auto [N, ref] : table) {
    ExtReal d = w.normalization_A_N(N) / N - 1;
    CAPTURE(N);
    CHECK(mp::abs(d / ExtReal(ref) - 1) < ExtReal("1e-8"));
  }
  CHECK(mp::abs(w.normalization_A_N(256) / 256 - 1) <= ExtReal("1e-8"));
}

TEST_CASE("normalizer is consistent with finite differences of the primitive") {
  PrecisionScope p(40);
  auto w = WeightFunction::bump("2", "1");
  auto F = [&](const ExtReal& x) {
    return integrate([&](const ExtReal& t) { return w(t); }, ExtReal(0), x, ten_pow_neg(36), 0, 8);
  };
  ExtReal h("1e-8");
  for (auto xs : {"0.2", "0.5", "0.8"}) {
    ExtReal x(xs);
    ExtReal fd = (F(x + h) - F(x - h)) / (2 * h);
    CHECK(mp::abs(fd - w(x)) < ten_pow_neg(12));
  }
  CHECK(mp::abs(F(ExtReal(1)) - 1) < ten_pow_neg(30));
}

TEST_CASE("derivative coefficient tables") {
  auto t1 = deriv_coeff_table(1);
  REQUIRE(t1.coeffs.size() == 3);
  CHECK(t1.coeffs[2] == 1);
  CHECK(t1.coeffs[1] == 0);
  CHECK(t1.b == 1);
  auto t2 = deriv_coeff_table(2);
  CHECK(t2.coeffs[4] == 1);
  CHECK(t2.coeffs[3] == -2);
  CHECK(t2.coeffs[2] == 0);
  CHECK(t2.coeffs[1] == 0);
  CHECK(t2.b == 2);

  auto tables = deriv_coeff_tables(20);
  auto ref = oracle::u_polys(20);
  BigInt fact = 1, eight = 1;
  for (int n = 1; n <= 20; ++n) {
    fact *= n;
    eight *= 8;
    const auto& t = tables[n];
    CAPTURE(n);
    CHECK(t.coeffs[2 * n] == 1);
    CHECK(t.coeffs[1] == 0);
    CHECK(t.b <= eight * fact * fact);
    if (n < 20) CHECK(tables[n + 1].b <= 8 * BigInt(n) * BigInt(n) * t.b);
    // independent recurrence on p_n(u)
    for (std::size_t j = 0; j < t.coeffs.size(); ++j) {
      BigInt r = j < ref[n].size() ? ref[n][j] : BigInt(0);
      CHECK(t.coeffs[j] == r);
    }
  }
}

TEST_CASE("L1 norms of wbar derivatives against the FTC oracle") {
  const int digits = 40;
  std::vector<ExtReal> lib;
  for (int n : {2, 3, 5}) {
    ExtReal v;
    {
      PrecisionScope p(digits);
      v = l1_derivative_norm(n, digits);
    }
    PrecisionScope p(2 * digits + 20);
    ExtReal ref = oracle::l1_norm_ftc(n);
    CAPTURE(n);
    CHECK(mp::abs(v / ref - 1) < ExtReal("1e-20"));
    lib.push_back(v);
  }
  CHECK(lib[1] > lib[0]);
  CHECK(lib[2] > lib[1]);
}
