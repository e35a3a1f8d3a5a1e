#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <string>

#include "ecosel/dataset.hpp"
#include "ecosel/errors.hpp"
#include "ecosel/subsets.hpp"

namespace ecosel {

/// Prior configuration for the normal linear model with Zellner's g-prior on
/// the slopes, a flat prior on the intercept and sigma^-2 on the variance.
struct GPriorConfig {
  /// Fixed g, or empty for the "g equals the number of training cases" rule.
  std::optional<double> fixed_g;
  /// Per-predictor prior inclusion probability; 0.5 gives the uniform prior
  /// over models.
  double model_prior_p = 0.5;

  double g_for(int n_train) const {
    const double g = fixed_g.value_or(static_cast<double>(n_train));
    if (!(g > 0.0)) throw_config("g must be positive");
    return g;
  }

  void validate() const {
    if (!(model_prior_p > 0.0 && model_prior_p < 1.0))
      throw_config("model prior inclusion probability must be in (0, 1)");
    if (fixed_g && !(*fixed_g > 0.0)) throw_config("g must be positive");
  }
};

/// Log marginal likelihood of one subset model,
///   m(y|X) = Gamma((n-1)/2) / (pi^((n-1)/2) sqrt(n))
///            * (1+g)^((n-k-1)/2) * dy^-(n-1) * (1 + g(1-R^2))^-((n-1)/2),
/// evaluated entirely in log space. The g-dependent terms are grouped so
/// they cancel exactly for the null model (k = 0, R^2 = 0).
inline double log_ml_value(int n, int k, double g, double dy2, double r2) {
  const double base = std::lgamma(0.5 * (n - 1)) - 0.5 * (n - 1) * std::log(M_PI) -
                      0.5 * std::log(static_cast<double>(n)) - 0.5 * (n - 1) * std::log(dy2);
  const double tail = 0.5 * (n - k - 1) * std::log1p(g) - 0.5 * (n - 1) * std::log1p(g * (1.0 - r2));
  return base + tail;
}

/// Closed form for the intercept-only model: all g terms drop out.
inline double null_log_ml(int n, double dy2) {
  return std::lgamma(0.5 * (n - 1)) - 0.5 * (n - 1) * std::log(M_PI) -
         0.5 * std::log(static_cast<double>(n)) - 0.5 * (n - 1) * std::log(dy2);
}

/// Closed-form posterior quantities for one predictor subset. The posterior
/// of (intercept, slopes) is a generalized t with location b, scale matrix
/// (S/(n-3)) * B and n-1 degrees of freedom; only the pieces the decision
/// problem needs are materialized.
///
/// Cross-products are centered with the training column means, so the closed
/// form stays exact on training splits whose columns are not exactly mean
/// zero (global standardization centers the full data, not every split).
struct ModelFit {
  PredictorSet subset;
  int k = 0;
  int n_train = 0;
  double g = 0.0;
  double ybar = 0.0;
  double dy2 = 0.0;  // centered response sum of squares
  double r2 = 0.0;
  double S = 0.0;
  double log_ml = 0.0;
  Eigen::VectorXd b;         // length k+1, intercept first; b(0) == ybar
  Eigen::VectorXd xbar;      // training means of the subset columns
  double B_intercept = 0.0;  // 1/n
  Eigen::MatrixXd B_slopes;  // (g/(1+g)) * (Xc'Xc)^-1
};

namespace detail {

/// Sufficient statistics shared by every subset fit on one training set.
struct TrainStats {
  int n = 0;
  double ybar = 0.0;
  double dy2 = 0.0;
  Eigen::VectorXd xbar;   // p
  Eigen::MatrixXd gram;   // p x p centered cross-products Xc'Xc
  Eigen::VectorXd cross;  // p, Xc'y
};

inline TrainStats train_stats(const Dataset& d) {
  TrainStats st;
  st.n = d.n();
  st.ybar = d.response.mean();
  st.dy2 = (d.response.array() - st.ybar).square().sum();
  st.xbar = d.predictors.colwise().mean();
  const Eigen::MatrixXd xc = d.predictors.rowwise() - st.xbar.transpose();
  st.gram = xc.transpose() * xc;
  st.cross = xc.transpose() * (d.response.array() - st.ybar).matrix();
  return st;
}

/// Lean per-subset fit: everything except the B matrix. Returns false when
/// the subset's Gram matrix is numerically singular.
struct LeanFit {
  double r2 = 0.0;
  double S = 0.0;
  double log_ml = 0.0;
  Eigen::VectorXd slopes;  // posterior slope part, shrunk by g/(1+g)
};

inline bool lean_fit(const TrainStats& st, const PredictorSet& subset, double g, LeanFit& out,
                     Eigen::LLT<Eigen::MatrixXd>* keep_llt = nullptr) {
  const int k = subset.size();
  if (k == 0) {
    out.r2 = 0.0;
    out.S = st.dy2;
    out.log_ml = log_ml_value(st.n, 0, g, st.dy2, 0.0);
    out.slopes.resize(0);
    return true;
  }
  const auto members = subset.members();
  Eigen::MatrixXd C(k, k);
  Eigen::VectorXd c(k);
  for (int a = 0; a < k; ++a) {
    c(a) = st.cross(members[a]);
    for (int b = 0; b < k; ++b) C(a, b) = st.gram(members[a], members[b]);
  }
  Eigen::LLT<Eigen::MatrixXd> llt(C);
  if (llt.info() != Eigen::Success || llt.rcond() < 1e-12) return false;
  const Eigen::VectorXd ols = llt.solve(c);
  const double explained = c.dot(ols);
  double r2 = explained / st.dy2;
  r2 = std::min(1.0, std::max(0.0, r2));
  const double shrink = g / (1.0 + g);
  out.r2 = r2;
  out.S = st.dy2 - shrink * explained;
  if (!(out.S > 0.0)) out.S = st.dy2 * (1.0 - shrink * r2);  // guard against cancellation at r2 ~ 1
  out.log_ml = log_ml_value(st.n, k, g, st.dy2, r2);
  out.slopes = shrink * ols;
  if (keep_llt) *keep_llt = std::move(llt);
  return true;
}

}  // namespace detail

/// Fit one subset model on a training set. Errors: singular design
/// (collinearity) and too few cases (the generalized t needs n > k + 3).
inline ModelFit fit_model(const Dataset& train, const PredictorSet& subset, const GPriorConfig& cfg) {
  cfg.validate();
  const int n = train.n();
  const int k = subset.size();
  if (subset.p != train.p())
    throw_config("subset universe size " + std::to_string(subset.p) + " does not match dataset p=" +
                 std::to_string(train.p()));
  if (n <= k + 3)
    throw_data("insufficient data: n=" + std::to_string(n) + " must exceed k+3=" + std::to_string(k + 3));

  const auto st = detail::train_stats(train);
  if (!(st.dy2 > 0.0)) throw_data("response has zero variance on the training set");

  const double g = cfg.g_for(n);
  ModelFit fit;
  fit.subset = subset;
  fit.k = k;
  fit.n_train = n;
  fit.g = g;
  fit.ybar = st.ybar;
  fit.dy2 = st.dy2;
  fit.B_intercept = 1.0 / n;

  detail::LeanFit lean;
  Eigen::LLT<Eigen::MatrixXd> llt;
  if (!detail::lean_fit(st, subset, g, lean, &llt))
    throw_numeric("collinear predictor subset " + set_to_string(subset, train.names));

  fit.r2 = lean.r2;
  fit.S = lean.S;
  fit.log_ml = lean.log_ml;
  fit.b.resize(k + 1);
  fit.b(0) = st.ybar;
  fit.b.tail(k) = lean.slopes;
  fit.xbar.resize(k);
  const auto members = subset.members();
  for (int a = 0; a < k; ++a) fit.xbar(a) = st.xbar(members[a]);
  if (k > 0) {
    const double shrink = g / (1.0 + g);
    fit.B_slopes = shrink * llt.solve(Eigen::MatrixXd::Identity(k, k));
  } else {
    fit.B_slopes.resize(0, 0);
  }
  return fit;
}

inline double log_marginal_likelihood(const ModelFit& fit) {
  return log_ml_value(fit.n_train, fit.k, fit.g, fit.dy2, fit.r2);
}

/// Posterior predictive mean at new predictor rows (columns must match the
/// subset, values on the training standardization scale).
inline Eigen::VectorXd predict_mean(const ModelFit& fit, const Eigen::MatrixXd& newx) {
  if (static_cast<int>(newx.cols()) != fit.k)
    throw_config("prediction matrix has " + std::to_string(newx.cols()) + " columns, model has k=" +
                 std::to_string(fit.k));
  if (fit.k == 0) return Eigen::VectorXd::Constant(newx.rows(), fit.ybar);
  const Eigen::MatrixXd centered = newx.rowwise() - fit.xbar.transpose();
  return (centered * fit.b.tail(fit.k)).array() + fit.ybar;
}

/// Diagonal of the posterior variance (S/(n-3)) * B.
inline Eigen::VectorXd posterior_variance_diag(const ModelFit& fit) {
  Eigen::VectorXd out(fit.k + 1);
  const double scale = fit.S / (fit.n_train - 3);
  out(0) = scale * fit.B_intercept;
  if (fit.k > 0) out.tail(fit.k) = scale * fit.B_slopes.diagonal();
  return out;
}

/// Mean squared prediction error over a validation set.
inline double squared_predictive_loss(const Eigen::VectorXd& y_valid, const Eigen::VectorXd& yhat) {
  if (y_valid.size() != yhat.size())
    throw_config("loss inputs have different lengths: " + std::to_string(y_valid.size()) + " vs " +
                 std::to_string(yhat.size()));
  if (y_valid.size() == 0) throw_config("loss inputs are empty");
  return (y_valid - yhat).squaredNorm() / static_cast<double>(y_valid.size());
}

}  // namespace ecosel
