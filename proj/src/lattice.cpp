#include "wba/lattice.hpp"

#include "wba/errors.hpp"

#include <algorithm>
#include <cstdlib>
#include <limits>
#include <sstream>

namespace wba {

MultiIndex MultiIndex::dense(const std::vector<std::int64_t>& v) {
  std::vector<Entry> e;
  for (std::size_t j = 0; j < v.size(); ++j)
    if (v[j] != 0) e.push_back({static_cast<int>(j), v[j]});
  return sparse(std::move(e), static_cast<int>(v.size()));
}

MultiIndex MultiIndex::sparse(std::vector<Entry> entries, std::optional<int> dim) {
  MultiIndex k;
  std::sort(entries.begin(), entries.end(),
            [](const Entry& a, const Entry& b) { return a.index < b.index; });
  for (const auto& e : entries) {
    if (e.index < 0) throw DomainError("MultiIndex: negative index");
    if (!k.entries_.empty() && k.entries_.back().index == e.index)
      throw DomainError("MultiIndex: duplicate index " + std::to_string(e.index));
    if (dim && e.index >= *dim)
      throw DimensionError("MultiIndex: index " + std::to_string(e.index) + " outside dimension " +
                           std::to_string(*dim));
    if (e.value == 0) continue;
    k.entries_.push_back(e);
    k.l1_ += std::llabs(e.value);
  }
  k.dim_ = dim;
  return k;
}

std::int64_t MultiIndex::operator[](int j) const {
  for (const auto& e : entries_)
    if (e.index == j) return e.value;
  return 0;
}

std::int64_t MultiIndex::eta_norm(int eta) const {
  if (eta_ != eta) {
    std::int64_t s = 0;
    for (const auto& e : entries_) s += bracket_pow(e.index, eta) * std::llabs(e.value);
    eta_norm_ = s;
    eta_ = eta;
  }
  return eta_norm_;
}

MultiIndex MultiIndex::operator-() const {
  MultiIndex k = *this;
  for (auto& e : k.entries_) e.value = -e.value;
  return k;
}

std::vector<std::int64_t> MultiIndex::to_dense(int d) const {
  std::vector<std::int64_t> v(d, 0);
  for (const auto& e : entries_) {
    if (e.index >= d) throw SupportMismatch("index " + std::to_string(e.index) + " beyond " +
                                            std::to_string(d));
    v[e.index] = e.value;
  }
  return v;
}

std::string MultiIndex::str() const {
  std::ostringstream os;
  if (dim_) {
    os << '(';
    for (int j = 0; j < *dim_; ++j) os << (j ? "," : "") << (*this)[j];
    os << ')';
  } else {
    os << '{';
    for (std::size_t i = 0; i < entries_.size(); ++i)
      os << (i ? "," : "") << entries_[i].index << ':' << entries_[i].value;
    os << '}';
  }
  return os.str();
}

std::int64_t bracket_pow(int j, int eta) {
  std::int64_t b = std::max(1, std::abs(j)), r = 1;
  for (int i = 0; i < eta; ++i) {
    if (r > std::numeric_limits<std::int64_t>::max() / b) throw DomainError("bracket_pow overflow");
    r *= b;
  }
  return r;
}

std::int64_t eta_norm(const MultiIndex& k, int eta) { return k.eta_norm(eta); }

BallEnumerator::BallEnumerator(std::vector<std::int64_t> weights, std::int64_t bound,
                               std::optional<int> dim)
    : w_(std::move(weights)), bound_(std::max<std::int64_t>(bound, 0)), dim_(dim) {
  const std::size_t n = w_.size();
  feasible_.assign((n + 1) * (bound_ + 1), 0);
  feasible_[n * (bound_ + 1)] = 1;
  for (std::size_t i = n; i-- > 0;) {
    for (std::int64_t s = 0; s <= bound_; ++s) {
      char ok = 0;
      for (std::int64_t r = s; r >= 0 && !ok; r -= w_[i]) ok = feasible(i + 1, r);
      feasible_[i * (bound_ + 1) + s] = ok;
    }
  }
  v_.assign(n, 0);
  rem_.assign(n + 1, 0);
  if (n == 0) done_ = true;
}

// Smallest feasible configuration of positions i.. using exactly `rem`.
bool BallEnumerator::set_first(std::size_t i, std::int64_t rem) {
  for (std::size_t p = i; p < w_.size(); ++p) {
    rem_[p] = rem;
    std::int64_t t = rem / w_[p];
    // most negative value whose remainder stays feasible
    while (t > 0 && !feasible(p + 1, rem - t * w_[p])) --t;
    if (!feasible(p + 1, rem - t * w_[p])) return false;
    v_[p] = -t;
    rem -= t * w_[p];
  }
  return rem == 0;
}

// Lexicographic successor keeping the prefix before i and the shell fixed.
bool BallEnumerator::advance(std::size_t i) {
  const std::size_t n = w_.size();
  if (i + 1 < n && advance(i + 1)) return true;
  std::int64_t rem = rem_[i];
  std::int64_t cap = rem / w_[i];
  for (std::int64_t v = v_[i] + 1; v <= cap; ++v) {
    std::int64_t left = rem - std::llabs(v) * w_[i];
    if (!feasible(i + 1, left)) continue;
    v_[i] = v;
    if (i + 1 == n) return left == 0;
    return set_first(i + 1, left);
  }
  return false;
}

MultiIndex BallEnumerator::emit() const {
  std::vector<MultiIndex::Entry> e;
  for (std::size_t j = 0; j < v_.size(); ++j)
    if (v_[j] != 0) e.push_back({static_cast<int>(j), v_[j]});
  return MultiIndex::sparse(std::move(e), dim_);
}

std::optional<MultiIndex> BallEnumerator::next() {
  if (done_) return std::nullopt;
  if (started_ && advance(0)) return emit();
  started_ = true;
  while (++shell_ <= bound_) {
    if (feasible(0, shell_) && set_first(0, shell_)) return emit();
  }
  done_ = true;
  return std::nullopt;
}

BallEnumerator enumerate_ball_finite(int d, std::int64_t K) {
  if (d < 1) throw DimensionError("enumerate_ball_finite: d must be >= 1");
  return BallEnumerator(std::vector<std::int64_t>(d, 1), K, d);
}

std::vector<std::int64_t> eta_weights(int eta, std::int64_t nu_max, std::optional<int> max_support) {
  std::vector<std::int64_t> w;
  for (int j = 0;; ++j) {
    if (max_support && j >= *max_support) break;
    std::int64_t b = bracket_pow(j, eta);
    if (b > nu_max) break;
    w.push_back(b);
  }
  return w;
}

BallEnumerator enumerate_ball_eta(int eta, std::int64_t nu_max, std::optional<int> max_support) {
  if (eta < 1) throw DomainError("enumerate_ball_eta: eta must be >= 1");
  return BallEnumerator(eta_weights(eta, nu_max, max_support), nu_max, std::nullopt);
}

std::vector<boost::multiprecision::cpp_int> shell_counts(const std::vector<std::int64_t>& weights,
                                                         std::int64_t bound) {
  using boost::multiprecision::cpp_int;
  std::vector<cpp_int> cur(bound + 1, 0);
  cur[0] = 1;
  for (auto it = weights.rbegin(); it != weights.rend(); ++it) {
    std::vector<cpp_int> nxt(bound + 1, 0);
    for (std::int64_t s = 0; s <= bound; ++s) {
      cpp_int c = cur[s];
      for (std::int64_t r = s - *it; r >= 0; r -= *it) c += 2 * cur[r];
      nxt[s] = c;
    }
    cur = std::move(nxt);
  }
  return cur;
}

}  // namespace wba
