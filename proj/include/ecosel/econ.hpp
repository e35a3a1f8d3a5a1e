#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "ecosel/bma.hpp"
#include "ecosel/errors.hpp"
#include "ecosel/subsets.hpp"

namespace ecosel {

/// Monetary cost of purchasing a predictor set. Three shapes:
///   uniform  - every predictor costs the same unit price, cost = c * |S|;
///   itemized - per-predictor prices (free predictors priced 0);
///   grouped  - disjoint groups charged a flat price once if any member is
///              purchased, plus itemized prices for the rest.
/// The cost depends only on which predictors are bought, never on values.
struct CostModel {
  enum class Kind { Uniform, Itemized, Grouped };

  Kind kind = Kind::Uniform;
  double unit_price = 0.0;                              // uniform
  Eigen::VectorXd prices;                               // itemized / grouped, length p
  std::vector<std::pair<PredictorSet, double>> groups;  // grouped

  static CostModel uniform(double c) {
    CostModel cm;
    cm.kind = Kind::Uniform;
    cm.unit_price = c;
    return cm;
  }

  static CostModel itemized(Eigen::VectorXd per_predictor) {
    CostModel cm;
    cm.kind = Kind::Itemized;
    cm.prices = std::move(per_predictor);
    return cm;
  }

  static CostModel grouped(Eigen::VectorXd per_predictor,
                           std::vector<std::pair<PredictorSet, double>> groups_) {
    CostModel cm;
    cm.kind = Kind::Grouped;
    cm.prices = std::move(per_predictor);
    cm.groups = std::move(groups_);
    return cm;
  }

  void validate(int p) const {
    if (kind == Kind::Uniform) {
      if (unit_price < 0.0) throw_config("uniform price must be nonnegative");
      return;
    }
    if (prices.size() != p) throw_config("cost model has " + std::to_string(prices.size()) +
                                         " prices, dataset has p=" + std::to_string(p));
    if ((prices.array() < 0.0).any()) throw_config("predictor prices must be nonnegative");
    if (kind == Kind::Grouped) {
      std::uint32_t seen = 0;
      for (const auto& [members, price] : groups) {
        if (price < 0.0) throw_config("group price must be nonnegative");
        if (members.bits & seen) throw_config("cost groups must be disjoint");
        seen |= members.bits;
      }
      // Group members may not also carry itemized prices.
      for (int j = 0; j < p; ++j)
        if (((seen >> j) & 1u) && prices(j) != 0.0)
          throw_config("grouped predictor also has an itemized price");
    }
  }

  /// Same structure with every price multiplied by `factor`; this is the
  /// scalar knob a cost sweep turns.
  CostModel scaled(double factor) const {
    CostModel cm = *this;
    cm.unit_price *= factor;
    if (cm.prices.size() > 0) cm.prices *= factor;
    for (auto& [members, price] : cm.groups) price *= factor;
    return cm;
  }
};

inline double evaluate_cost(const CostModel& cm, const PredictorSet& s) {
  switch (cm.kind) {
    case CostModel::Kind::Uniform:
      return cm.unit_price * s.size();
    case CostModel::Kind::Itemized: {
      double total = 0.0;
      for (int j : s.members()) total += cm.prices(j);
      return total;
    }
    case CostModel::Kind::Grouped: {
      double total = 0.0;
      for (int j : s.members()) total += cm.prices(j);
      for (const auto& [members, price] : cm.groups)
        if (members.bits & s.bits) total += price;
      return total;
    }
  }
  return 0.0;
}

/// Within-set inclusion probabilities derived from a full-data log marginal
/// likelihood table; attached to selection results for display.
struct InclusionSource {
  const std::vector<double>* logml = nullptr;
  double prior_p = 0.5;

  Eigen::VectorXd inclusion_for(const PredictorSet& s) const {
    return ensemble_for(s, *logml, prior_p).inclusion;
  }
};

struct SelectionEntry {
  PredictorSet set;
  double loss = 0.0;
  double cost = 0.0;
  double total = 0.0;
};

/// Purchased sets ranked by total objective, with the optimum singled out.
struct SelectionOutcome {
  std::vector<SelectionEntry> ranked;  // ascending total under the tie rule
  SelectionEntry optimum;
  Eigen::VectorXd optimum_inclusion;   // empty when no inclusion source given
};

/// Minimize estimated loss plus cost over all purchased sets. Ties go to the
/// cheaper set, then the smaller one, then the smaller bitmask, so results
/// are deterministic.
inline SelectionOutcome optimal_set(const CvLossTable& table, const CostModel& cm,
                                    const InclusionSource* inclusion = nullptr) {
  if (table.mean_loss.empty()) throw_config("loss table is empty");
  cm.validate(table.p);

  SelectionOutcome out;
  out.ranked.reserve(table.set_count());
  for (std::uint32_t bits = 0; bits < table.set_count(); ++bits) {
    SelectionEntry e;
    e.set = PredictorSet(bits, table.p);
    e.loss = table.mean_loss[bits];
    e.cost = evaluate_cost(cm, e.set);
    e.total = e.loss + e.cost;
    out.ranked.push_back(e);
  }
  std::sort(out.ranked.begin(), out.ranked.end(), [](const SelectionEntry& a, const SelectionEntry& b) {
    if (a.total != b.total) return a.total < b.total;
    if (a.cost != b.cost) return a.cost < b.cost;
    if (a.set.size() != b.set.size()) return a.set.size() < b.set.size();
    return a.set.bits < b.set.bits;
  });
  out.optimum = out.ranked.front();
  if (inclusion) out.optimum_inclusion = inclusion->inclusion_for(out.optimum.set);
  return out;
}

/// The optimum as a function of a scalar price knob: the base cost model is
/// scaled by each grid value in turn.
inline std::vector<std::pair<double, SelectionOutcome>> cost_sweep(
    const CvLossTable& table, const CostModel& family, const std::vector<double>& grid,
    const InclusionSource* inclusion = nullptr) {
  if (grid.empty()) throw_config("cost sweep grid is empty");
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (!(grid[i] > grid[i - 1])) throw_config("cost sweep grid must be strictly ascending");

  std::vector<std::pair<double, SelectionOutcome>> out;
  out.reserve(grid.size());
  for (double price : grid) out.emplace_back(price, optimal_set(table, family.scaled(price), inclusion));
  return out;
}

/// When to start purchasing one predictor, given per-wave least losses with
/// (l_star) and without (l) it, a discount factor and a price. Purchasing at
/// wave t (1-based) costs
///   sum_{s<t} l_s/(1+delta)^(s-1) + sum_{s>=t} l*_s/(1+delta)^(s-1)
///   + c/(1+delta)^(t-1),
/// and t = T+1 encodes "no purchase": all waves at l_s and no price term.
struct TimedPurchaseProblem {
  int T = 0;
  std::vector<double> l;       // least loss per wave without the predictor
  std::vector<double> l_star;  // least loss per wave with it
  double delta = 0.0;
  double c = 0.0;

  void validate() const {
    if (T < 1 || static_cast<int>(l.size()) != T || static_cast<int>(l_star.size()) != T)
      throw_config("timed purchase problem needs per-wave losses of length T");
    if (delta < 0.0) throw_config("discount factor must be nonnegative");
    if (c < 0.0) throw_config("purchase price must be nonnegative");
    for (int s = 0; s < T; ++s)
      if (l_star[s] > l[s] + 1e-9)
        throw_config("wave " + std::to_string(s + 1) +
                     ": loss with the predictor exceeds loss without it");
  }
};

inline double timed_objective(const TimedPurchaseProblem& prob, int t) {
  prob.validate();
  if (t < 1 || t > prob.T + 1)
    throw_config("purchase wave " + std::to_string(t) + " outside 1.." + std::to_string(prob.T + 1));
  double total = 0.0;
  double disc = 1.0;
  const double rate = 1.0 + prob.delta;
  for (int s = 1; s <= prob.T; ++s) {
    total += (s < t ? prob.l[s - 1] : prob.l_star[s - 1]) / disc;
    disc *= rate;
  }
  if (t <= prob.T) total += prob.c / std::pow(rate, t - 1);
  return total;
}

/// Full objective curve over t = 1..T+1 plus every minimizing wave; the
/// canonical decision is the earliest minimizer.
struct TimingSolution {
  std::vector<double> objective;  // index t-1 holds the objective of wave t; last entry is no-purchase
  std::vector<int> minimizers;    // waves attaining the minimum (T+1 = no purchase)
  int best_t = 1;
  double best_value = 0.0;

  bool no_purchase(int T) const { return best_t == T + 1; }
};

inline TimingSolution optimal_purchase_wave(const TimedPurchaseProblem& prob) {
  prob.validate();
  TimingSolution sol;
  sol.objective.reserve(prob.T + 1);
  for (int t = 1; t <= prob.T + 1; ++t) sol.objective.push_back(timed_objective(prob, t));
  sol.best_value = *std::min_element(sol.objective.begin(), sol.objective.end());
  for (int t = 1; t <= prob.T + 1; ++t)
    if (sol.objective[t - 1] == sol.best_value) sol.minimizers.push_back(t);
  sol.best_t = sol.minimizers.front();
  return sol;
}

}  // namespace ecosel
