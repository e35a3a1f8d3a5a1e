#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "ecosel/bma.hpp"
#include "ecosel/dataset.hpp"
#include "ecosel/errors.hpp"
#include "ecosel/gprior.hpp"
#include "ecosel/rng.hpp"
#include "ecosel/subsets.hpp"

namespace ecosel {

/// Known joint Gaussian law over all potential predictors, used to impute
/// unpurchased predictors from purchased ones. Supplied by the user; no
/// hyperparameter learning happens here.
struct GaussianCovariateModel {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;

  int p() const { return static_cast<int>(mean.size()); }

  void validate() const {
    if (cov.rows() != cov.cols() || cov.rows() != mean.size())
      throw_config("covariate model dimensions do not match");
    if (((cov - cov.transpose()).array().abs() > 1e-12).any())
      throw_config("covariate covariance must be symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    if (es.eigenvalues().minCoeff() <= 0.0)
      throw_config("covariate covariance must be positive definite");
  }
};

/// Conditional law of the unpurchased predictors given observed values of
/// the purchased ones.
struct ConditionalLaw {
  std::vector<int> missing;  // indices of the unpurchased predictors, ascending
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

/// Load a covariate model from a CSV pair: a mean file (one row or one
/// column of p numbers, no header) and a p x p covariance file.
inline GaussianCovariateModel load_covariate_model(const std::string& mean_path,
                                                   const std::string& cov_path) {
  auto read_grid = [](const std::string& path) {
    std::ifstream in(path);
    if (!in) throw_data("cannot open covariate file '" + path + "'");
    std::vector<std::vector<double>> rows;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty() || line == "\r") continue;
      std::vector<double> row;
      for (const auto& cell : detail::split_csv_line(line))
        row.push_back(detail::parse_numeric_cell(cell, lineno, path));
      if (!rows.empty() && rows.front().size() != row.size())
        throw_data("ragged rows in covariate file '" + path + "'");
      rows.push_back(std::move(row));
    }
    if (rows.empty()) throw_data("covariate file '" + path + "' is empty");
    Eigen::MatrixXd m(rows.size(), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (std::size_t j = 0; j < rows.front().size(); ++j) m(i, j) = rows[i][j];
    return m;
  };

  const Eigen::MatrixXd mean_grid = read_grid(mean_path);
  GaussianCovariateModel cm;
  if (mean_grid.rows() == 1)
    cm.mean = mean_grid.row(0).transpose();
  else if (mean_grid.cols() == 1)
    cm.mean = mean_grid.col(0);
  else
    throw_data("mean file '" + mean_path + "' must be a single row or column");
  cm.cov = read_grid(cov_path);
  cm.validate();
  return cm;
}

inline ConditionalLaw conditional_law(const GaussianCovariateModel& cm, const PredictorSet& purchased,
                                      const Eigen::VectorXd& x_values) {
  const int p = cm.p();
  if (purchased.p != p) throw_config("purchased set universe does not match covariate model");
  if (x_values.size() != purchased.size())
    throw_config("observed values must match the purchased set size");

  ConditionalLaw law;
  std::vector<int> obs = purchased.members();
  for (int j = 0; j < p; ++j)
    if (!purchased.contains(j)) law.missing.push_back(j);
  if (law.missing.empty()) throw_config("conditional law needs at least one unpurchased predictor");

  const int nm = static_cast<int>(law.missing.size());
  const int no = static_cast<int>(obs.size());
  Eigen::VectorXd mu_m(nm), mu_o(no);
  Eigen::MatrixXd s_mm(nm, nm), s_mo(nm, no), s_oo(no, no);
  for (int a = 0; a < nm; ++a) {
    mu_m(a) = cm.mean(law.missing[a]);
    for (int b = 0; b < nm; ++b) s_mm(a, b) = cm.cov(law.missing[a], law.missing[b]);
    for (int b = 0; b < no; ++b) s_mo(a, b) = cm.cov(law.missing[a], obs[b]);
  }
  for (int a = 0; a < no; ++a) {
    mu_o(a) = cm.mean(obs[a]);
    for (int b = 0; b < no; ++b) s_oo(a, b) = cm.cov(obs[a], obs[b]);
  }

  if (no == 0) {
    law.mean = mu_m;
    law.cov = s_mm;
    return law;
  }
  Eigen::LLT<Eigen::MatrixXd> llt(s_oo);
  if (llt.info() != Eigen::Success || llt.rcond() < 1e-12)
    throw_numeric("covariance of the purchased predictors is singular; cannot condition");
  law.mean = mu_m + s_mo * llt.solve(x_values - mu_o);
  law.cov = s_mm - s_mo * llt.solve(s_mo.transpose());
  return law;
}

namespace detail {

/// Evaluate one model's posterior mean at a completed covariate row laid out
/// over the full universe.
inline double predict_at_row(const ModelFit& fit, const Eigen::VectorXd& full_row) {
  double y = fit.ybar;
  const auto members = fit.subset.members();
  for (int a = 0; a < fit.k; ++a) y += fit.b(a + 1) * (full_row(members[a]) - fit.xbar(a));
  return y;
}

}  // namespace detail

/// Exact extended-approach prediction: because every model mean is linear,
/// integrating the unpurchased predictors out of the prediction equals
/// plugging in their conditional mean.
inline double extended_predict_plugin(const PredictorSet& purchased, const Eigen::VectorXd& x_values,
                                      const std::map<std::uint32_t, ModelFit>& fits,
                                      const std::vector<double>& weights,
                                      const GaussianCovariateModel& cm) {
  cm.validate();
  const int p = cm.p();
  if (weights.size() != (std::size_t{1} << p))
    throw_config("extended prediction needs weights over all 2^p models");

  Eigen::VectorXd row(p);
  const auto obs = purchased.members();
  for (std::size_t a = 0; a < obs.size(); ++a) row(obs[a]) = x_values(a);
  if (static_cast<int>(obs.size()) < p) {
    const auto law = conditional_law(cm, purchased, x_values);
    for (std::size_t a = 0; a < law.missing.size(); ++a) row(law.missing[a]) = law.mean(a);
  }

  double out = 0.0, used = 0.0;
  for (std::uint32_t bits = 0; bits < weights.size(); ++bits) {
    const double w = weights[bits];
    if (w < kWeightFloor) continue;
    const auto it = fits.find(bits);
    if (it == fits.end()) throw_config("missing model fit for subset bits=" + std::to_string(bits));
    out += w * detail::predict_at_row(it->second, row);
    used += w;
  }
  return out / used;
}

struct McEstimate {
  double value = 0.0;
  double std_error = 0.0;
};

/// Monte Carlo cross-check of the plug-in path: draw the unpurchased
/// predictors from their conditional law, evaluate every model at each
/// completed row, and average. Deterministic for a fixed seed.
inline McEstimate extended_predict_mc(const PredictorSet& purchased, const Eigen::VectorXd& x_values,
                                      const std::map<std::uint32_t, ModelFit>& fits,
                                      const std::vector<double>& weights,
                                      const GaussianCovariateModel& cm, int draws, std::uint64_t seed) {
  cm.validate();
  if (draws < 1) throw_config("Monte Carlo needs draws >= 1");
  const int p = cm.p();
  if (weights.size() != (std::size_t{1} << p))
    throw_config("extended prediction needs weights over all 2^p models");

  Eigen::VectorXd row(p);
  const auto obs = purchased.members();
  for (std::size_t a = 0; a < obs.size(); ++a) row(obs[a]) = x_values(a);

  if (static_cast<int>(obs.size()) == p) {
    McEstimate est;
    est.value = extended_predict_plugin(purchased, x_values, fits, weights, cm);
    return est;
  }

  const auto law = conditional_law(cm, purchased, x_values);
  const int nm = static_cast<int>(law.missing.size());
  Eigen::LLT<Eigen::MatrixXd> llt(law.cov);
  if (llt.info() != Eigen::Success) throw_numeric("conditional covariance is not positive definite");
  const Eigen::MatrixXd chol = llt.matrixL();

  // Collect the models that matter once; their weights stay fixed across
  // draws.
  std::vector<std::pair<const ModelFit*, double>> active;
  double used = 0.0;
  for (std::uint32_t bits = 0; bits < weights.size(); ++bits) {
    const double w = weights[bits];
    if (w < kWeightFloor) continue;
    const auto it = fits.find(bits);
    if (it == fits.end()) throw_config("missing model fit for subset bits=" + std::to_string(bits));
    active.emplace_back(&it->second, w);
    used += w;
  }

  Rng rng(seed);
  Eigen::VectorXd zdraw(nm);
  double sum = 0.0, sumsq = 0.0;
  for (int d = 0; d < draws; ++d) {
    for (int a = 0; a < nm; ++a) zdraw(a) = rng.next_normal();
    const Eigen::VectorXd wvals = law.mean + chol * zdraw;
    for (int a = 0; a < nm; ++a) row(law.missing[a]) = wvals(a);
    double f = 0.0;
    for (const auto& [fit, w] : active) f += w * detail::predict_at_row(*fit, row);
    f /= used;
    sum += f;
    sumsq += f * f;
  }
  McEstimate est;
  est.value = sum / draws;
  const double var = std::max(0.0, sumsq / draws - est.value * est.value);
  est.std_error = draws > 1 ? std::sqrt(var / (draws - 1)) : 0.0;
  return est;
}

/// Extended-approach prediction via Monte Carlo imputation (the value only;
/// see extended_predict_mc for the standard error, extended_predict_plugin
/// for the exact path).
inline double extended_predict(const PredictorSet& purchased, const Eigen::VectorXd& x_values,
                               const std::map<std::uint32_t, ModelFit>& fits,
                               const std::vector<double>& weights, const GaussianCovariateModel& cm,
                               int draws, std::uint64_t seed) {
  return extended_predict_mc(purchased, x_values, fits, weights, cm, draws, seed).value;
}

/// One numerical check of the Bayes-factor ordering: on an orthogonal design
/// with g = n, augmenting two equal-size base models with the same extra
/// predictors must favor the higher-R^2 base, and the log Bayes factor
/// change must match its closed form
///   -((n-1)/2) [log(1 - D/(1+1/n-R2_b)) - log(1 - D/(1+1/n-R2_s))].
struct Prop1Report {
  PredictorSet base_b, base_s, augment;
  int n = 0, m = 0, q = 0;
  double r2_b = 0.0, r2_s = 0.0;
  double delta = 0.0;          // increase in R^2 from the augmentation
  double log_bf_bs = 0.0;      // log BF of b against s
  double log_bf_bsq = 0.0;     // log BF of b+q against s+q
  double computed_diff = 0.0;  // log_bf_bsq - log_bf_bs from marginal likelihoods
  double closed_form_diff = 0.0;
  bool verdict = false;        // computed_diff > 0, given R2_b > R2_s and delta > 0
};

inline double prop1_closed_form(int n, double r2_b, double r2_s, double delta) {
  const double inv_n = 1.0 / n;
  return -0.5 * (n - 1) *
         (std::log1p(-delta / (1.0 + inv_n - r2_b)) - std::log1p(-delta / (1.0 + inv_n - r2_s)));
}

/// Build a seeded orthogonal design with two disjoint m-predictor bases and
/// q augmentation predictors, fit the four models with g = n, and compare the
/// computed Bayes-factor difference with the closed form. With
/// `zero_delta` the response is residualized against the augmentation
/// columns first, making the R^2 increase exactly zero.
inline Prop1Report verify_proposition1(int n, int m, int q, std::uint64_t seed, bool zero_delta = false) {
  if (m < 1 || q < 1) throw_config("proposition check needs m >= 1 and q >= 1");
  const int p = 2 * m + q;
  if (n <= p + 3) throw_data("proposition check needs n > 2m+q+3");

  Eigen::VectorXd beta(p);
  for (int j = 0; j < m; ++j) beta(j) = 1.0 - 0.05 * j;          // strong base b
  for (int j = 0; j < m; ++j) beta(m + j) = 0.45 - 0.05 * j;     // weaker base s
  for (int j = 0; j < q; ++j) beta(2 * m + j) = zero_delta ? 0.0 : 0.6;
  Dataset d = synth_orthogonal(n, p, beta, 1.0, seed);

  PredictorSet b = PredictorSet::empty_set(p), s = PredictorSet::empty_set(p), aug = PredictorSet::empty_set(p);
  for (int j = 0; j < m; ++j) b = b.with(j);
  for (int j = 0; j < m; ++j) s = s.with(m + j);
  for (int j = 0; j < q; ++j) aug = aug.with(2 * m + j);

  if (zero_delta) {
    for (int j : aug.members()) {
      const auto col = d.predictors.col(j);
      d.response -= col * (col.dot(d.response) / col.squaredNorm());
    }
  }

  // The design must be orthogonal for the closed form to apply.
  const Eigen::MatrixXd gram = d.predictors.transpose() * d.predictors;
  const double off = (gram - (n - 1.0) * Eigen::MatrixXd::Identity(p, p)).cwiseAbs().maxCoeff();
  if (off > 1e-6 * (n - 1.0)) throw_data("synthetic design failed the orthogonality check");

  GPriorConfig cfg;
  cfg.fixed_g = static_cast<double>(n);

  const ModelFit fit_b = fit_model(d, b, cfg);
  const ModelFit fit_s = fit_model(d, s, cfg);
  const ModelFit fit_bq = fit_model(d, PredictorSet(b.bits | aug.bits, p), cfg);
  const ModelFit fit_sq = fit_model(d, PredictorSet(s.bits | aug.bits, p), cfg);

  Prop1Report rep;
  rep.base_b = b;
  rep.base_s = s;
  rep.augment = aug;
  rep.n = n;
  rep.m = m;
  rep.q = q;
  rep.r2_b = fit_b.r2;
  rep.r2_s = fit_s.r2;
  rep.delta = fit_bq.r2 - fit_b.r2;
  rep.log_bf_bs = fit_b.log_ml - fit_s.log_ml;
  rep.log_bf_bsq = fit_bq.log_ml - fit_sq.log_ml;
  rep.computed_diff = rep.log_bf_bsq - rep.log_bf_bs;
  rep.closed_form_diff = prop1_closed_form(n, rep.r2_b, rep.r2_s, rep.delta);
  rep.verdict = rep.computed_diff > 0.0;
  return rep;
}

}  // namespace ecosel
