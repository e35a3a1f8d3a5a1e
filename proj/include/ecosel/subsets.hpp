#pragma once

#include <bit>
#include <cstdint>
#include <string>
#include <vector>

#include "ecosel/errors.hpp"

namespace ecosel {

/// Exhaustive enumeration is practical only for moderate p; beyond this the
/// 2^p tables stop fitting in memory and a stochastic search would be needed.
inline constexpr int kMaxPredictors = 24;

/// A subset of a p-predictor universe, packed as a bitmask (bit j set means
/// predictor j is in the set). Doubles as both a model index and a purchased
/// set.
struct PredictorSet {
  std::uint32_t bits = 0;
  int p = 0;

  PredictorSet() = default;
  PredictorSet(std::uint32_t bits_, int p_) : bits(bits_), p(p_) {}

  static PredictorSet empty_set(int p) { return {0u, p}; }
  static PredictorSet full_set(int p) { return {static_cast<std::uint32_t>((1ull << p) - 1), p}; }

  int size() const { return std::popcount(bits); }
  bool empty() const { return bits == 0; }
  bool contains(int j) const { return (bits >> j) & 1u; }
  bool subset_of(const PredictorSet& other) const { return (bits & ~other.bits) == 0; }

  PredictorSet with(int j) const { return {bits | (1u << j), p}; }
  PredictorSet without(int j) const { return {bits & ~(1u << j), p}; }

  std::vector<int> members() const {
    std::vector<int> out;
    out.reserve(size());
    for (int j = 0; j < p; ++j)
      if (contains(j)) out.push_back(j);
    return out;
  }

  friend bool operator==(const PredictorSet& a, const PredictorSet& b) {
    return a.bits == b.bits && a.p == b.p;
  }
};

/// Human-readable form like "{x1,x4}" given the predictor names.
inline std::string set_to_string(const PredictorSet& s, const std::vector<std::string>& names) {
  std::string out = "{";
  bool first = true;
  for (int j : s.members()) {
    if (!first) out += ",";
    out += (j < static_cast<int>(names.size())) ? names[j] : ("#" + std::to_string(j));
    first = false;
  }
  out += "}";
  return out;
}

inline void check_universe_size(int p) {
  if (p < 1 || p > kMaxPredictors)
    throw_capacity("predictor universe size " + std::to_string(p) + " outside supported range [1, " +
                   std::to_string(kMaxPredictors) + "]");
}

/// All 2^p subsets in increasing bitmask order.
inline std::vector<PredictorSet> enumerate_subsets(int p) {
  check_universe_size(p);
  const std::uint32_t total = 1u << p;
  std::vector<PredictorSet> out;
  out.reserve(total);
  for (std::uint32_t bits = 0; bits < total; ++bits) out.emplace_back(bits, p);
  return out;
}

/// Visit every subset of `mask` in increasing bitmask order (including 0 and
/// mask itself).
template <class Fn>
void for_each_subset_of(std::uint32_t mask, Fn&& fn) {
  std::uint32_t sub = 0;
  while (true) {
    fn(sub);
    if (sub == mask) break;
    sub = (sub - mask) & mask;  // next subset of mask after sub
  }
}

/// Subset-sum (zeta) transform over the subset lattice: given a table indexed
/// by bitmask, returns out[S] = reduction of values[g] over all g that are
/// subsets of S. `combine` must be associative and commutative; p * 2^p
/// applications total.
template <class T, class Combine>
std::vector<T> fast_lattice_aggregate(std::vector<T> values, int p, Combine combine) {
  check_universe_size(p);
  const std::size_t total = std::size_t{1} << p;
  if (values.size() != total)
    throw_config("lattice table has " + std::to_string(values.size()) + " entries, expected 2^" +
                 std::to_string(p));
  for (int j = 0; j < p; ++j) {
    const std::uint32_t bit = 1u << j;
    for (std::uint32_t s = 0; s < total; ++s) {
      if (s & bit) values[s] = combine(values[s], values[s ^ bit]);
    }
  }
  return values;
}

/// Additive subset sums, the common case.
inline std::vector<double> subset_sums(std::vector<double> values, int p) {
  return fast_lattice_aggregate(std::move(values), p, [](double a, double b) { return a + b; });
}

}  // namespace ecosel
