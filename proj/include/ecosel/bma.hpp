#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "ecosel/dataset.hpp"
#include "ecosel/gprior.hpp"
#include "ecosel/parallel.hpp"
#include "ecosel/subsets.hpp"

namespace ecosel {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();
/// Models whose normalized posterior weight falls below this floor are
/// skipped in prediction sums; they stay in the normalizer.
inline constexpr double kWeightFloor = 1e-15;

inline double log_sum_exp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

/// Posterior model weights restricted to the subsets of one purchased set,
/// plus the per-predictor inclusion probabilities they imply.
struct Ensemble {
  PredictorSet purchased;
  std::vector<std::pair<std::uint32_t, double>> weights;  // (subset bits, weight), ascending bits
  Eigen::VectorXd inclusion;                              // length p, zero outside the purchased set

  double weight_of(std::uint32_t bits) const {
    const auto it = std::lower_bound(weights.begin(), weights.end(), bits,
                                     [](const auto& w, std::uint32_t b) { return w.first < b; });
    return (it != weights.end() && it->first == bits) ? it->second : 0.0;
  }
};

/// Normalize exp(log ml + log prior) over all subsets of `purchased`.
/// Entries equal to -inf mark subsets excluded for collinearity.
inline Ensemble ensemble_for(const PredictorSet& purchased, const std::vector<double>& logml,
                             double prior_p) {
  if (logml.size() <= static_cast<std::size_t>(purchased.bits))
    throw_config("log marginal likelihood table does not cover the purchased set");
  if (!(prior_p > 0.0 && prior_p < 1.0)) throw_config("model prior inclusion probability must be in (0, 1)");

  const double log_odds = std::log(prior_p) - std::log1p(-prior_p);
  std::vector<std::pair<std::uint32_t, double>> scored;
  double max_score = kNegInf;
  for_each_subset_of(purchased.bits, [&](std::uint32_t sub) {
    const double lml = logml[sub];
    const double score = lml == kNegInf ? kNegInf : lml + std::popcount(sub) * log_odds;
    scored.emplace_back(sub, score);
    max_score = std::max(max_score, score);
  });
  if (max_score == kNegInf)
    throw_numeric("empty ensemble: every subset of the purchased set is excluded");

  double total = 0.0;
  for (auto& [bits, score] : scored) {
    score = score == kNegInf ? 0.0 : std::exp(score - max_score);
    total += score;
  }

  Ensemble ens;
  ens.purchased = purchased;
  ens.inclusion = Eigen::VectorXd::Zero(purchased.p);
  ens.weights.reserve(scored.size());
  for (const auto& [bits, unnorm] : scored) {
    const double w = unnorm / total;
    ens.weights.emplace_back(bits, w);
    for (int j = 0; j < purchased.p; ++j)
      if ((bits >> j) & 1u) ens.inclusion(j) += w;
  }
  return ens;
}

/// Model-averaged posterior predictive mean: the weighted average of each
/// member model's prediction. `newx` carries the full universe's columns.
inline Eigen::VectorXd bma_predict(const Ensemble& ens, const std::map<std::uint32_t, ModelFit>& fits,
                                   const Eigen::MatrixXd& newx) {
  if (static_cast<int>(newx.cols()) != ens.purchased.p)
    throw_config("prediction matrix must carry all " + std::to_string(ens.purchased.p) + " universe columns");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(newx.rows());
  double used = 0.0;
  for (const auto& [bits, w] : ens.weights) {
    if (w < kWeightFloor) continue;
    const auto it = fits.find(bits);
    if (it == fits.end())
      throw_config("missing model fit for subset bits=" + std::to_string(bits) + " with weight " +
                   std::to_string(w));
    const auto members = PredictorSet(bits, ens.purchased.p).members();
    Eigen::MatrixXd cols(newx.rows(), members.size());
    for (std::size_t a = 0; a < members.size(); ++a) cols.col(a) = newx.col(members[a]);
    out += w * predict_mean(it->second, cols);
    used += w;
  }
  if (used > 0.0) out /= used;
  return out;
}

/// Fit every subset of the universe on one dataset; returns log marginal
/// likelihoods indexed by bitmask, with collinear subsets set to -inf and
/// flagged.
inline std::vector<double> all_subset_log_ml(const Dataset& d, const GPriorConfig& cfg, int threads = 0,
                                             std::vector<std::uint8_t>* collinear_out = nullptr) {
  cfg.validate();
  check_universe_size(d.p());
  const int p = d.p();
  if (d.n() <= p + 3)
    throw_data("insufficient data: n=" + std::to_string(d.n()) + " must exceed p+3=" + std::to_string(p + 3));
  const auto st = detail::train_stats(d);
  if (!(st.dy2 > 0.0)) throw_data("response has zero variance");
  const double g = cfg.g_for(d.n());
  const std::size_t total = std::size_t{1} << p;
  std::vector<double> logml(total);
  std::vector<std::uint8_t> collinear(total, 0);
  parallel_for(total, threads, [&](std::size_t bits) {
    detail::LeanFit lean;
    if (detail::lean_fit(st, PredictorSet(static_cast<std::uint32_t>(bits), p), g, lean)) {
      logml[bits] = lean.log_ml;
    } else {
      logml[bits] = kNegInf;
      collinear[bits] = 1;
    }
  });
  if (collinear_out) *collinear_out = std::move(collinear);
  return logml;
}

/// Cross-validated BMA loss for every purchased set.
struct CvLossTable {
  int p = 0;
  int fold_count = 0;
  std::vector<std::vector<double>> fold_losses;  // [bits][fold]
  std::vector<double> mean_loss;                 // [bits]
  std::vector<std::uint8_t> collinear_subsets;   // [bits], dropped from every ensemble

  std::size_t set_count() const { return mean_loss.size(); }
};

struct CvOptions {
  GPriorConfig gprior;
  int threads = 0;
  /// Re-standardize predictors inside each fold with training-split
  /// statistics instead of relying on the one global pass.
  bool per_fold_standardize = false;
};

namespace detail {

struct FoldFit {
  std::vector<double> logml;        // [bits]
  std::vector<std::uint8_t> collinear;
  Eigen::MatrixXd val_pred;         // (#validation cases) x 2^p
  Eigen::VectorXd val_y;
};

inline FoldFit fit_one_fold(const Dataset& d, const FoldPlan& folds, int fold, const CvOptions& opt) {
  const int p = d.p();
  const std::size_t total = std::size_t{1} << p;
  const auto train_idx = folds.training_indices(fold);
  const auto val_idx = folds.validation_indices(fold);

  Dataset train = d.rows(train_idx);
  Dataset val = d.rows(val_idx);
  if (train.n() <= p + 3)
    throw_data("fold " + std::to_string(fold) + " training split has n=" + std::to_string(train.n()) +
               ", too small for the largest subset (need n > p+3)");
  if (opt.per_fold_standardize) {
    const auto scales = column_scales(train);
    train = apply_scales(train, scales);
    val = apply_scales(val, scales);
  }

  const auto st = train_stats(train);
  if (!(st.dy2 > 0.0)) throw_data("response has zero variance on fold " + std::to_string(fold));
  const double g = opt.gprior.g_for(train.n());

  FoldFit out;
  out.logml.resize(total);
  out.collinear.assign(total, 0);
  out.val_pred.resize(val.n(), total);
  out.val_y = val.response;

  parallel_for(total, opt.threads, [&](std::size_t bits) {
    const PredictorSet subset(static_cast<std::uint32_t>(bits), p);
    LeanFit lean;
    if (!lean_fit(st, subset, g, lean)) {
      out.logml[bits] = kNegInf;
      out.collinear[bits] = 1;
      out.val_pred.col(bits).setZero();
      return;
    }
    out.logml[bits] = lean.log_ml;
    if (subset.empty()) {
      out.val_pred.col(bits).setConstant(st.ybar);
    } else {
      const auto members = subset.members();
      Eigen::VectorXd pred = Eigen::VectorXd::Constant(val.n(), st.ybar);
      for (std::size_t a = 0; a < members.size(); ++a)
        pred += (val.predictors.col(members[a]).array() - st.xbar(members[a])).matrix() * lean.slopes(a);
      out.val_pred.col(bits) = pred;
    }
  });
  return out;
}

}  // namespace detail

/// Estimate the squared predictive loss of every purchased set by k-fold
/// cross-validation of the within-set model average. Per fold, all 2^p
/// subsets are fitted once and the per-set aggregation runs through
/// fast_lattice_aggregate, so the work stays near p * 2^p per validation
/// case instead of one explicit pass over every (set, subset) pair.
///
/// Subsets that are collinear on any training split are dropped from every
/// ensemble of every fold, keeping ensemble support identical across folds.
inline CvLossTable cv_loss_all_sets(const Dataset& d, const FoldPlan& folds, const CvOptions& opt) {
  opt.gprior.validate();
  check_universe_size(d.p());
  if (static_cast<int>(folds.assignment.size()) != d.n())
    throw_config("fold plan covers " + std::to_string(folds.assignment.size()) + " cases, dataset has " +
                 std::to_string(d.n()));
  const int p = d.p();
  const int nf = folds.fold_count;
  const std::size_t total = std::size_t{1} << p;

  std::vector<detail::FoldFit> fits;
  fits.reserve(nf);
  for (int f = 0; f < nf; ++f) fits.push_back(detail::fit_one_fold(d, folds, f, opt));

  // Union of collinearity flags across folds.
  std::vector<std::uint8_t> dropped(total, 0);
  for (const auto& ff : fits)
    for (std::size_t bits = 0; bits < total; ++bits)
      if (ff.collinear[bits]) dropped[bits] = 1;

  CvLossTable table;
  table.p = p;
  table.fold_count = nf;
  table.collinear_subsets = dropped;
  table.fold_losses.assign(total, std::vector<double>(nf, 0.0));
  table.mean_loss.assign(total, 0.0);

  const double log_odds = std::log(opt.gprior.model_prior_p) - std::log1p(-opt.gprior.model_prior_p);

  std::vector<double> scores(total), u(total), z(total), logz(total), v(total), numer(total);
  for (int f = 0; f < nf; ++f) {
    const auto& ff = fits[f];
    double max_score = kNegInf;
    for (std::size_t bits = 0; bits < total; ++bits) {
      scores[bits] = dropped[bits] ? kNegInf
                                   : ff.logml[bits] + std::popcount(static_cast<std::uint32_t>(bits)) * log_odds;
      max_score = std::max(max_score, scores[bits]);
    }
    // The null model never drops, so max_score is finite.
    for (std::size_t bits = 0; bits < total; ++bits)
      u[bits] = scores[bits] == kNegInf ? 0.0 : std::exp(scores[bits] - max_score);
    z = subset_sums(u, p);
    logz = fast_lattice_aggregate(scores, p, [](double a, double b) { return log_sum_exp(a, b); });

    const int m = static_cast<int>(ff.val_y.size());
    Eigen::MatrixXd set_pred(m, total);
    for (int i = 0; i < m; ++i) {
      for (std::size_t bits = 0; bits < total; ++bits) v[bits] = u[bits] * ff.val_pred(i, bits);
      numer = subset_sums(v, p);
      for (std::size_t bits = 0; bits < total; ++bits) set_pred(i, bits) = numer[bits] / z[bits];
    }
    // Sets whose entire ensemble underflowed against the global max are
    // recomputed with their own normalizer.
    for (std::size_t set_bits = 0; set_bits < total; ++set_bits) {
      if (z[set_bits] >= 1e-250) continue;
      Eigen::VectorXd pred = Eigen::VectorXd::Zero(m);
      double wsum = 0.0;
      for_each_subset_of(static_cast<std::uint32_t>(set_bits), [&](std::uint32_t sub) {
        if (scores[sub] == kNegInf) return;
        const double w = std::exp(scores[sub] - logz[set_bits]);
        pred += w * ff.val_pred.col(sub);
        wsum += w;
      });
      set_pred.col(set_bits) = pred / wsum;
    }
    for (std::size_t set_bits = 0; set_bits < total; ++set_bits) {
      const double loss = (ff.val_y - set_pred.col(set_bits)).squaredNorm() / m;
      table.fold_losses[set_bits][f] = loss;
    }
  }

  for (std::size_t bits = 0; bits < total; ++bits) {
    double sum = 0.0;
    for (int f = 0; f < nf; ++f) sum += table.fold_losses[bits][f];
    table.mean_loss[bits] = sum / nf;
  }
  return table;
}

/// Purchased sets ordered by estimated loss, ascending; ties broken by fewer
/// predictors, then smaller bitmask.
inline std::vector<std::pair<PredictorSet, double>> rank_sets(const CvLossTable& table) {
  if (table.mean_loss.empty()) throw_config("cannot rank an empty loss table");
  std::vector<std::pair<PredictorSet, double>> out;
  out.reserve(table.set_count());
  for (std::uint32_t bits = 0; bits < table.set_count(); ++bits)
    out.emplace_back(PredictorSet(bits, table.p), table.mean_loss[bits]);
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second < b.second;
    if (a.first.size() != b.first.size()) return a.first.size() < b.first.size();
    return a.first.bits < b.first.bits;
  });
  return out;
}

}  // namespace ecosel
