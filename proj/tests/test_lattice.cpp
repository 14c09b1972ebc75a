#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "wba/errors.hpp"
#include "wba/lattice.hpp"

#include <cmath>
#include <functional>
#include <set>

using namespace wba;

namespace {

std::vector<MultiIndex> collect(BallEnumerator e) {
  std::vector<MultiIndex> out;
  while (auto k = e.next()) out.push_back(*k);
  return out;
}

// nested loops over the box [-B, B]^n
std::set<std::vector<std::int64_t>> brute(const std::vector<std::int64_t>& w, std::int64_t bound) {
  std::set<std::vector<std::int64_t>> out;
  std::vector<std::int64_t> v(w.size());
  std::function<void(std::size_t)> rec = [&](std::size_t i) {
    if (i == w.size()) {
      std::int64_t s = 0, nz = 0;
      for (std::size_t j = 0; j < w.size(); ++j) {
        s += w[j] * std::llabs(v[j]);
        nz += v[j] != 0;
      }
      if (nz && s <= bound) out.insert(v);
      return;
    }
    for (std::int64_t t = -bound; t <= bound; ++t) {
      v[i] = t;
      rec(i + 1);
    }
  };
  rec(0);
  return out;
}

}  // namespace

TEST_CASE("eta norm examples") {
  auto a = MultiIndex::sparse({{0, 1}});
  CHECK(eta_norm(a, 2) == 1);
  auto b = MultiIndex::sparse({{0, 1}, {3, -2}});
  CHECK(eta_norm(b, 2) == 19);
  CHECK(eta_norm(MultiIndex(), 2) == 0);
  CHECK(MultiIndex().is_zero());
  CHECK(b.l1() == 3);
  CHECK(b.eta_norm(3) == 1 + 27 * 2);
  CHECK(b.eta_norm(2) == 19);
  CHECK(bracket_pow(0, 5) == 1);
  CHECK(bracket_pow(-3, 2) == 9);
}

TEST_CASE("MultiIndex construction invariants") {
  auto k = MultiIndex::dense({0, 3, 0, -1});
  CHECK(k.entries().size() == 2);
  CHECK(k.dim() == 4);
  CHECK(k[1] == 3);
  CHECK(k[0] == 0);
  CHECK(k.str() == "(0,3,0,-1)");
  CHECK(k.is_positive());
  CHECK(!(-k).is_positive());
  CHECK(-(-k) == k);
  CHECK_THROWS_AS(MultiIndex::sparse({{5, 1}}, 3), DimensionError);
  CHECK_THROWS_AS(MultiIndex::sparse({{1, 1}, {1, 2}}), DomainError);
  CHECK(MultiIndex::sparse({{2, 0}, {0, 1}}).str() == "{0:1}");
  CHECK_THROWS_AS(k.to_dense(2), SupportMismatch);
}

TEST_CASE("finite ball examples") {
  auto a = collect(enumerate_ball_finite(1, 2));
  REQUIRE(a.size() == 4);
  CHECK(a[0].str() == "(-1)");
  CHECK(a[1].str() == "(1)");
  CHECK(a[2].str() == "(-2)");
  CHECK(a[3].str() == "(2)");
  CHECK(collect(enumerate_ball_finite(2, 1)).size() == 4);
  CHECK(collect(enumerate_ball_finite(2, 2)).size() == 12);
}

TEST_CASE("enumeration equals brute force, graded and without duplicates") {
  struct Case {
    std::vector<std::int64_t> w;
    std::int64_t bound;
  };
  std::vector<Case> cases = {{{1}, 7},       {{1, 1}, 5},    {{1, 1, 1}, 4},
                             {{1, 1, 4}, 9}, {{1, 1, 4, 9}, 12}, {{1, 1, 8}, 10}};
  for (const auto& c : cases) {
    auto ref = brute(c.w, c.bound);
    BallEnumerator e(c.w, c.bound, std::nullopt);
    std::set<std::vector<std::int64_t>> got;
    std::int64_t last = 0;
    std::vector<std::int64_t> prev;
    std::size_t n = 0;
    while (auto k = e.next()) {
      ++n;
      auto v = k->to_dense(static_cast<int>(c.w.size()));
      std::int64_t norm = 0;
      for (std::size_t j = 0; j < v.size(); ++j) norm += c.w[j] * std::llabs(v[j]);
      CHECK(norm == e.current_norm());
      CHECK(norm <= c.bound);
      CHECK(norm >= last);
      if (norm == last) CHECK(prev < v);
      last = norm;
      prev = v;
      got.insert(v);
    }
    CHECK(n == got.size());
    CHECK(got == ref);
  }
}

TEST_CASE("eta ball examples") {
  auto a = collect(enumerate_ball_eta(2, 3));
  CHECK(a.size() == 24);
  for (const auto& k : a) CHECK(k.support_end() <= 2);
  auto b = collect(enumerate_ball_eta(2, 4));
  bool has = false;
  for (const auto& k : b) has = has || (k == MultiIndex::sparse({{2, 1}}));
  CHECK(has);
  for (const auto& k : b) CHECK(k.eta_norm(2) <= 4);
  CHECK(eta_weights(2, 30) == std::vector<std::int64_t>{1, 1, 4, 9, 16, 25});
  CHECK(eta_weights(2, 30, 3) == std::vector<std::int64_t>{1, 1, 4});
  // support cap
  auto c = collect(enumerate_ball_eta(2, 20, 3));
  for (const auto& k : c) CHECK(k.support_end() <= 3);
}

TEST_CASE("shell counts match enumeration and the growth bound") {
  const int nu_max = 30;
  auto w = eta_weights(2, nu_max);
  auto counts = shell_counts(w, nu_max);
  std::vector<long long> enumerated(nu_max + 1, 0);
  auto e = enumerate_ball_eta(2, nu_max);
  while (auto k = e.next()) ++enumerated[k->eta_norm(2)];
  CHECK(counts[0] == 1);
  for (int nu = 1; nu <= nu_max; ++nu) CHECK(counts[nu] == enumerated[nu]);
  // C_eta calibrated on nu <= 15, validated on 16..30
  double c_eta = 0;
  auto ratio = [&](int nu) {
    return static_cast<double>(enumerated[nu]) / std::pow(nu, std::sqrt(static_cast<double>(nu)));
  };
  for (int nu = 1; nu <= 15; ++nu) c_eta = std::max(c_eta, ratio(nu));
  for (int nu = 16; nu <= nu_max; ++nu) {
    CAPTURE(nu);
    CHECK(ratio(nu) <= c_eta);
  }
  // finite lattice: #{||k||_1 = r} in Z^2 is 4r
  auto c2 = shell_counts({1, 1}, 10);
  for (int r = 1; r <= 10; ++r) CHECK(c2[r] == 4 * r);
}
