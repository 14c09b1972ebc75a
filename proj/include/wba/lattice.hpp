#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace wba {

// Sparse integer vector with finite support. dim = nullopt marks an element
// of the infinite lattice. Entries are sorted by index, never zero.
class MultiIndex {
 public:
  struct Entry {
    int index;
    std::int64_t value;
    bool operator==(const Entry&) const = default;
  };

  MultiIndex() = default;
  static MultiIndex dense(const std::vector<std::int64_t>& v);
  static MultiIndex sparse(std::vector<Entry> entries, std::optional<int> dim = std::nullopt);

  const std::vector<Entry>& entries() const { return entries_; }
  std::optional<int> dim() const { return dim_; }
  bool is_zero() const { return entries_.empty(); }
  std::int64_t l1() const { return l1_; }
  std::int64_t operator[](int j) const;
  // one past the largest support index (0 for k = 0)
  int support_end() const { return entries_.empty() ? 0 : entries_.back().index + 1; }

  // eta-norm, cached for the most recently requested eta
  std::int64_t eta_norm(int eta) const;

  // first nonzero entry positive
  bool is_positive() const { return !entries_.empty() && entries_.front().value > 0; }

  MultiIndex operator-() const;
  bool operator==(const MultiIndex& o) const { return entries_ == o.entries_ && dim_ == o.dim_; }
  std::vector<std::int64_t> to_dense(int d) const;
  std::string str() const;

 private:
  std::vector<Entry> entries_;
  std::optional<int> dim_;
  std::int64_t l1_ = 0;
  mutable int eta_ = -1;
  mutable std::int64_t eta_norm_ = 0;
};

// <j>^eta with <j> = max(1, |j|); throws DomainError on overflow
std::int64_t bracket_pow(int j, int eta);
std::int64_t eta_norm(const MultiIndex& k, int eta);

// Lazily enumerates all nonzero v with sum_i w_i |v_i| <= bound over
// positions 0..n-1, graded by the weighted norm, then lexicographic in
// (v_0, v_1, ...). Memory is one feasibility table of size n * (bound + 1).
class BallEnumerator {
 public:
  BallEnumerator(std::vector<std::int64_t> weights, std::int64_t bound, std::optional<int> dim);
  std::optional<MultiIndex> next();
  // norm of the index last returned by next()
  std::int64_t current_norm() const { return shell_; }

 private:
  bool feasible(std::size_t i, std::int64_t s) const {
    return feasible_[i * (bound_ + 1) + s] != 0;
  }
  bool set_first(std::size_t i, std::int64_t rem);
  bool advance(std::size_t i);
  MultiIndex emit() const;

  std::vector<std::int64_t> w_;
  std::int64_t bound_;
  std::optional<int> dim_;
  std::vector<char> feasible_;
  std::vector<std::int64_t> v_;
  std::vector<std::int64_t> rem_;  // residual available at position i
  std::int64_t shell_ = 0;
  bool started_ = false;
  bool done_ = false;
};

BallEnumerator enumerate_ball_finite(int d, std::int64_t K);

// Positions j with <j>^eta <= nu_max, optionally capped to j < max_support.
BallEnumerator enumerate_ball_eta(int eta, std::int64_t nu_max,
                                  std::optional<int> max_support = std::nullopt);
std::vector<std::int64_t> eta_weights(int eta, std::int64_t nu_max,
                                      std::optional<int> max_support = std::nullopt);

// Exact number of vectors on each shell: result[nu] = #{v : sum w_i|v_i| = nu}
// for nu = 0..bound (result[0] = 1 counts v = 0).
std::vector<boost::multiprecision::cpp_int> shell_counts(const std::vector<std::int64_t>& weights,
                                                         std::int64_t bound);

}  // namespace wba
