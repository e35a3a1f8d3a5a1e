#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "ecosel/bma.hpp"
#include "ecosel/config.hpp"
#include "ecosel/dataset.hpp"
#include "ecosel/econ.hpp"
#include "ecosel/extended.hpp"
#include "ecosel/report.hpp"
#include "ecosel/verify.hpp"

namespace ecosel {

namespace detail {

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::error_code ec;
  std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw_data("cannot write output file '" + path.string() + "'");
  out << content;
  if (!out) throw_data("failed while writing '" + path.string() + "'");
}

inline std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

}  // namespace detail

/// Shared front half of analyze/sweep: load, standardize, fold, estimate the
/// per-set CV losses, and fit the full-data marginal likelihoods that drive
/// displayed inclusion probabilities.
struct AnalysisContext {
  Dataset data;  // standardized
  FoldPlan folds;
  CvLossTable table;
  std::vector<double> full_logml;
  GPriorConfig gprior;

  InclusionSource inclusion_source() const { return InclusionSource{&full_logml, gprior.model_prior_p}; }
};

inline AnalysisContext build_analysis(const RunConfig& cfg) {
  if (cfg.csv_path.empty()) throw_config("data.csv is required");
  if (cfg.response.empty()) throw_config("data.response is required");
  const auto predictor_names = cfg.resolve_predictors();
  const Dataset raw = load_csv(cfg.csv_path, cfg.response, predictor_names, cfg.wave_column);
  check_universe_size(raw.p());

  AnalysisContext ctx;
  ctx.gprior = cfg.gprior;
  ctx.data = standardize(raw);
  ctx.folds = make_folds(ctx.data.n(), cfg.folds, cfg.seed);

  CvOptions opt;
  opt.gprior = cfg.gprior;
  opt.threads = cfg.threads;
  opt.per_fold_standardize = cfg.per_fold_standardize;
  ctx.table = cv_loss_all_sets(ctx.data, ctx.folds, opt);
  ctx.full_logml = all_subset_log_ml(ctx.data, cfg.gprior, cfg.threads);
  return ctx;
}

inline void warn_collinear(const CvLossTable& table, const std::vector<std::string>& names) {
  int dropped = 0;
  for (std::uint32_t bits = 0; bits < table.set_count(); ++bits)
    if (table.collinear_subsets[bits]) ++dropped;
  if (dropped == 0) return;
  std::cerr << "warning: " << dropped << " subsets were collinear on some training split"
            << " and were dropped from every ensemble\n";
  if (dropped <= 8) {
    for (std::uint32_t bits = 0; bits < table.set_count(); ++bits)
      if (table.collinear_subsets[bits])
        std::cerr << "warning:   " << set_to_string(PredictorSet(bits, table.p), names) << "\n";
  }
}

inline SelectionMapSpec selection_map_spec(const AnalysisContext& ctx, int top_k) {
  const auto ranked = rank_sets(ctx.table);
  const auto src = ctx.inclusion_source();
  SelectionMapSpec spec;
  spec.names = ctx.data.names;
  spec.top_k = top_k;
  spec.entries.reserve(ranked.size());
  const std::uint32_t full_bits = PredictorSet::full_set(ctx.table.p).bits;
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    SelectionMapEntry e;
    e.set = ranked[i].first;
    e.loss = ranked[i].second;
    e.inclusion = src.inclusion_for(e.set);
    spec.entries.push_back(std::move(e));
    if (ranked[i].first.bits == 0) spec.markers.emplace_back("N", static_cast<int>(i));
    if (ranked[i].first.bits == full_bits) spec.markers.emplace_back("F", static_cast<int>(i));
  }
  return spec;
}

/// analyze: rank all purchased sets, pick the optimum under the configured
/// cost model, render the selection maps and write the JSON results.
inline int cmd_analyze(const RunConfig& cfg) {
  const AnalysisContext ctx = build_analysis(cfg);
  warn_collinear(ctx.table, ctx.data.names);

  const CostModel cm = cfg.cost.resolve(ctx.data.names);
  const InclusionSource src = ctx.inclusion_source();
  const SelectionOutcome outcome = optimal_set(ctx.table, cm, &src);

  const SelectionMapSpec full_spec = selection_map_spec(ctx, 0);
  SelectionMapSpec top_spec = full_spec;
  top_spec.top_k = 128;

  const std::filesystem::path out(cfg.out_dir);
  detail::write_file(out / "selection_map.svg", render_selection_map(full_spec));
  detail::write_file(out / "selection_map_top128.svg", render_selection_map(top_spec));
  detail::write_file(out / "results.json", export_results(outcome, ctx.data.names, &src));

  std::cout << "optimum " << set_to_string(outcome.optimum.set, ctx.data.names)
            << " loss=" << detail::fmt_double(outcome.optimum.loss)
            << " cost=" << detail::fmt_double(outcome.optimum.cost)
            << " total=" << detail::fmt_double(outcome.optimum.total) << "\n";
  return 0;
}

/// sweep: trace the optimum along an ascending price grid.
inline int cmd_sweep(const RunConfig& cfg) {
  if (cfg.sweep_grid.empty()) throw_config("sweep.grid is required for the sweep command");
  const AnalysisContext ctx = build_analysis(cfg);
  warn_collinear(ctx.table, ctx.data.names);

  const CostModel family = cfg.cost.resolve(ctx.data.names);
  const InclusionSource src = ctx.inclusion_source();
  const auto sweep = cost_sweep(ctx.table, family, cfg.sweep_grid, &src);

  const std::filesystem::path out(cfg.out_dir);
  detail::write_file(out / "cost_sweep.svg", render_cost_sweep(sweep, ctx.data.names));
  detail::write_file(out / "sweep.json", export_sweep(sweep, ctx.data.names));

  for (const auto& [price, outcome] : sweep)
    std::cout << "price " << detail::fmt_double(price) << " -> "
              << set_to_string(outcome.optimum.set, ctx.data.names)
              << " total=" << detail::fmt_double(outcome.optimum.total) << "\n";
  return 0;
}

/// timed: per-wave least losses with and without the target predictor, then
/// the discounted when-to-purchase decision for every (delta, price) pair.
inline int cmd_timed(const RunConfig& cfg) {
  if (cfg.csv_path.empty()) throw_config("data.csv is required");
  if (cfg.response.empty()) throw_config("data.response is required");
  if (cfg.wave_column.empty()) throw_config("data.wave is required for the timed command");
  if (cfg.timed_target.empty()) throw_config("timed.target is required for the timed command");
  if (cfg.timed_deltas.empty() || cfg.timed_prices.empty())
    throw_config("timed.deltas and timed.prices must be nonempty");

  const auto predictor_names = cfg.resolve_predictors();
  Dataset raw = load_csv(cfg.csv_path, cfg.response, predictor_names, cfg.wave_column);
  check_universe_size(raw.p());
  const int target = raw.column_index(cfg.timed_target);
  if (target < 0) throw_config("timed.target '" + cfg.timed_target + "' is not a predictor column");
  const int T = raw.wave_count();
  if (T < 1) throw_data("timed command needs at least one wave");

  if (!cfg.timed_standardize_per_wave) raw = standardize(raw);

  const std::uint32_t target_bit = 1u << target;
  std::vector<double> l(T), l_star(T);
  for (int wave = 1; wave <= T; ++wave) {
    std::vector<int> idx;
    for (int i = 0; i < raw.n(); ++i)
      if (raw.waves[i] == wave) idx.push_back(i);
    Dataset sub = raw.rows(idx);
    if (cfg.timed_standardize_per_wave) sub = standardize(sub);

    const FoldPlan folds = make_folds(sub.n(), cfg.folds, cfg.seed + static_cast<std::uint64_t>(wave));
    CvOptions opt;
    opt.gprior = cfg.gprior;
    opt.threads = cfg.threads;
    opt.per_fold_standardize = cfg.per_fold_standardize;
    const CvLossTable table = cv_loss_all_sets(sub, folds, opt);

    // Least loss over every purchased set, and over the sets that exclude
    // the target; the latter equal a run on the reduced universe because
    // subset fits and ensembles never look outside their own set.
    double best_with = table.mean_loss[0], best_without = table.mean_loss[0];
    for (std::uint32_t bits = 0; bits < table.set_count(); ++bits) {
      best_with = std::min(best_with, table.mean_loss[bits]);
      if (!(bits & target_bit)) best_without = std::min(best_without, table.mean_loss[bits]);
    }
    l_star[wave - 1] = best_with;
    l[wave - 1] = best_without;
    std::cout << "wave " << wave << " n=" << sub.n() << " l=" << detail::fmt_double(l[wave - 1])
              << " l*=" << detail::fmt_double(l_star[wave - 1]) << "\n";
  }

  std::vector<TimingCurve> curves;
  for (double delta : cfg.timed_deltas) {
    for (double price : cfg.timed_prices) {
      TimedPurchaseProblem prob;
      prob.T = T;
      prob.l = l;
      prob.l_star = l_star;
      prob.delta = delta;
      prob.c = price;
      TimingCurve curve;
      curve.delta = delta;
      curve.price = price;
      curve.solution = optimal_purchase_wave(prob);
      curves.push_back(std::move(curve));
    }
  }

  const std::filesystem::path out(cfg.out_dir);
  detail::write_file(out / "timing_curves.svg", render_timing_curves(curves));
  detail::write_file(out / "timed.json", export_timed(curves));

  for (const auto& c : curves) {
    std::cout << "delta=" << detail::fmt_double(c.delta) << " price=" << detail::fmt_double(c.price)
              << " -> ";
    if (c.solution.no_purchase(T))
      std::cout << "no purchase";
    else
      std::cout << "purchase at wave " << c.solution.best_t;
    std::cout << "\n";
  }
  return 0;
}

/// check: the numerical verification suite. Closed-form log Bayes factors
/// against the quadrature route, the Bayes-factor ordering on orthogonal
/// designs with its closed form, and the exact zero-gain case. Exit 0 only
/// if everything passes.
inline int cmd_check(const RunConfig& cfg) {
  if (cfg.check_n_min <= cfg.check_k_max + 3)
    throw_config("check.n_min must exceed check.k_max + 3");
  if (cfg.check_n_max < cfg.check_n_min) throw_config("check.n_max must be >= check.n_min");
  if (cfg.check_prop1_n <= 2 * cfg.check_prop1_m + 2 + 3)
    throw_config("check.prop1_n is too small for the requested design");

  bool all_pass = true;
  auto report = [&](bool ok, const std::string& name, const std::string& info) {
    std::cout << (ok ? "PASS " : "FAIL ") << name << ": " << info << "\n";
    if (!ok) all_pass = false;
  };

  // Closed form vs quadrature on seeded toy datasets.
  {
    double worst = 0.0;
    int worst_case = -1;
    for (int i = 0; i < cfg.check_datasets; ++i) {
      const int n = cfg.check_n_min + i % (cfg.check_n_max - cfg.check_n_min + 1);
      const int k = 1 + i % cfg.check_k_max;
      Rng rng(cfg.check_seed + 1000 + static_cast<std::uint64_t>(i));
      Dataset raw;
      raw.predictors.resize(n, k);
      raw.response.resize(n);
      for (int r = 0; r < n; ++r)
        for (int c = 0; c < k; ++c) raw.predictors(r, c) = rng.next_normal();
      for (int r = 0; r < n; ++r) {
        double y = 0.3;
        for (int c = 0; c < k; ++c) y += 0.8 * raw.predictors(r, c) / (c + 1);
        raw.response(r) = y + rng.next_normal();
      }
      for (int c = 0; c < k; ++c) raw.names.push_back("x" + std::to_string(c + 1));
      const Dataset d = standardize(raw);

      GPriorConfig gcfg;
      gcfg.fixed_g = static_cast<double>(n);
      const PredictorSet full = PredictorSet::full_set(k);
      const ModelFit fit_full = fit_model(d, full, gcfg);
      const ModelFit fit_null = fit_model(d, PredictorSet::empty_set(k), gcfg);
      const double bf_closed = fit_full.log_ml - fit_null.log_ml;
      const double bf_quad = quadrature_log_bf(d.response, d.predictors,
                                               Eigen::MatrixXd(d.n(), 0), static_cast<double>(n));
      const double err = std::abs(bf_closed - bf_quad);
      if (err > worst) {
        worst = err;
        worst_case = i;
      }
    }
    report(worst <= 1e-6, "marginal-likelihood-quadrature",
           std::to_string(cfg.check_datasets) + " datasets, max |dlogBF| = " + detail::fmt_double(worst) +
               (worst > 1e-6 ? " at case " + std::to_string(worst_case) : ""));
  }

  // Bayes-factor ordering on orthogonal designs.
  {
    double worst_gap = 0.0;
    int failures = 0;
    double min_diff = std::numeric_limits<double>::infinity();
    for (int i = 0; i < cfg.check_prop1_designs; ++i) {
      const int q = 1 + i % 2;
      const Prop1Report rep =
          verify_proposition1(cfg.check_prop1_n, cfg.check_prop1_m, q, cfg.check_seed + 9000 + i);
      const bool valid = rep.delta > 1e-3 && rep.r2_b > rep.r2_s;
      const double gap = std::abs(rep.computed_diff - rep.closed_form_diff);
      worst_gap = std::max(worst_gap, gap);
      min_diff = std::min(min_diff, rep.computed_diff);
      if (!valid || !rep.verdict || gap > 1e-8) ++failures;
    }
    report(failures == 0, "proposition-1-ordering",
           std::to_string(cfg.check_prop1_designs) + " designs, min logBF gain = " +
               detail::fmt_double(min_diff) + ", max closed-form gap = " + detail::fmt_double(worst_gap));
  }

  // Zero-gain augmentation: residualized response, difference must vanish.
  {
    const Prop1Report rep =
        verify_proposition1(cfg.check_prop1_n, cfg.check_prop1_m, 1, cfg.check_seed + 77, true);
    report(std::abs(rep.computed_diff) <= 1e-8 && rep.delta <= 1e-12, "zero-gain-augmentation",
           "delta = " + detail::fmt_double(rep.delta) + ", logBF difference = " +
               detail::fmt_double(rep.computed_diff));
  }

  // Optional: Monte Carlo vs plug-in extended prediction when a covariate
  // model is configured.
  if (!cfg.ext_mean_csv.empty() && !cfg.ext_cov_csv.empty()) {
    const GaussianCovariateModel cm = load_covariate_model(cfg.ext_mean_csv, cfg.ext_cov_csv);
    const int p = cm.p();
    check_universe_size(p);
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
    for (int j = 0; j < p; ++j) beta(j) = 0.7 / (j + 1);
    const Dataset d = standardize(synth_orthogonal(std::max(40, 4 * p + 8), p, beta, 1.0, cfg.check_seed));
    GPriorConfig gcfg;
    std::map<std::uint32_t, ModelFit> fits;
    for (const auto& s : enumerate_subsets(p)) fits.emplace(s.bits, fit_model(d, s, gcfg));
    std::vector<double> logml(std::size_t{1} << p);
    for (const auto& [bits, fit] : fits) logml[bits] = fit.log_ml;
    const Ensemble full_ens = ensemble_for(PredictorSet::full_set(p), logml, gcfg.model_prior_p);
    std::vector<double> weights(std::size_t{1} << p, 0.0);
    for (const auto& [bits, w] : full_ens.weights) weights[bits] = w;

    PredictorSet purchased = PredictorSet::empty_set(p).with(0);
    Eigen::VectorXd xv(1);
    xv << 0.5;
    const double plug = extended_predict_plugin(purchased, xv, fits, weights, cm);
    const McEstimate mc = extended_predict_mc(purchased, xv, fits, weights, cm, cfg.ext_draws, cfg.ext_seed);
    const double tol = 3.0 * std::max(mc.std_error, 1e-12);
    report(std::abs(mc.value - plug) <= tol, "extended-mc-vs-plugin",
           "|mc - plugin| = " + detail::fmt_double(std::abs(mc.value - plug)) + ", 3se = " +
               detail::fmt_double(tol));
  }

  return all_pass ? 0 : 1;
}

}  // namespace ecosel
