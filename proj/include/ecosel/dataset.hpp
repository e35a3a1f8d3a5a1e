#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "ecosel/errors.hpp"
#include "ecosel/rng.hpp"

namespace ecosel {

/// A regression dataset: response vector, n x p predictor matrix, predictor
/// names, and an optional per-case wave label (panel time index, 1..T).
/// Immutable after construction; all transforms return a new Dataset.
struct Dataset {
  Eigen::VectorXd response;
  Eigen::MatrixXd predictors;
  std::vector<std::string> names;
  std::vector<int> waves;  // empty when the data are not panel

  int n() const { return static_cast<int>(response.size()); }
  int p() const { return static_cast<int>(predictors.cols()); }
  bool has_waves() const { return !waves.empty(); }

  int wave_count() const {
    int t = 0;
    for (int w : waves) t = std::max(t, w);
    return t;
  }

  /// New dataset restricted to the given case indices (row order preserved).
  Dataset rows(const std::vector<int>& idx) const {
    Dataset out;
    out.names = names;
    out.response.resize(idx.size());
    out.predictors.resize(idx.size(), p());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      out.response(i) = response(idx[i]);
      out.predictors.row(i) = predictors.row(idx[i]);
    }
    if (has_waves()) {
      out.waves.reserve(idx.size());
      for (int i : idx) out.waves.push_back(waves[i]);
    }
    return out;
  }

  /// New dataset without the named predictor column.
  Dataset drop_predictor(int j) const {
    Dataset out;
    out.response = response;
    out.waves = waves;
    out.predictors.resize(n(), p() - 1);
    for (int c = 0, dst = 0; c < p(); ++c) {
      if (c == j) continue;
      out.predictors.col(dst++) = predictors.col(c);
    }
    for (int c = 0; c < p(); ++c)
      if (c != j) out.names.push_back(names[c]);
    return out;
  }

  int column_index(const std::string& name) const {
    for (int j = 0; j < p(); ++j)
      if (names[j] == name) return j;
    return -1;
  }
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(field);
      field.clear();
    } else if (ch != '\r') {
      field += ch;
    }
  }
  out.push_back(field);
  for (auto& f : out) {
    const auto b = f.find_first_not_of(" \t");
    const auto e = f.find_last_not_of(" \t");
    f = (b == std::string::npos) ? std::string() : f.substr(b, e - b + 1);
  }
  return out;
}

inline double parse_numeric_cell(const std::string& cell, int row, const std::string& column) {
  double value = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || cell.empty())
    throw_data("non-numeric cell '" + cell + "' at row " + std::to_string(row) + ", column '" + column + "'");
  if (!std::isfinite(value))
    throw_data("non-finite value at row " + std::to_string(row) + ", column '" + column + "'");
  return value;
}

}  // namespace detail

/// Read a UTF-8 CSV with a header row. Row order is preserved; values are not
/// standardized here. Missing cells and non-numeric cells are rejected.
inline Dataset load_csv(const std::string& path, const std::string& response_column,
                        const std::vector<std::string>& predictor_columns,
                        const std::string& wave_column = "") {
  std::ifstream in(path);
  if (!in) throw_data("cannot open CSV file '" + path + "'");

  std::string line;
  if (!std::getline(in, line) || line.empty()) throw_data("CSV file '" + path + "' is empty");
  const std::vector<std::string> header = detail::split_csv_line(line);

  auto find_column = [&](const std::string& name) {
    for (std::size_t j = 0; j < header.size(); ++j)
      if (header[j] == name) return static_cast<int>(j);
    throw_config("column '" + name + "' not found in '" + path + "'");
  };

  const int resp_idx = find_column(response_column);
  std::vector<int> pred_idx;
  pred_idx.reserve(predictor_columns.size());
  for (const auto& name : predictor_columns) pred_idx.push_back(find_column(name));
  const int wave_idx = wave_column.empty() ? -1 : find_column(wave_column);

  std::vector<double> resp;
  std::vector<std::vector<double>> preds(pred_idx.size());
  std::vector<int> waves;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != header.size())
      throw_data("row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                 " fields, header has " + std::to_string(header.size()));
    resp.push_back(detail::parse_numeric_cell(cells[resp_idx], row, response_column));
    for (std::size_t c = 0; c < pred_idx.size(); ++c)
      preds[c].push_back(detail::parse_numeric_cell(cells[pred_idx[c]], row, predictor_columns[c]));
    if (wave_idx >= 0) {
      const double w = detail::parse_numeric_cell(cells[wave_idx], row, wave_column);
      if (w != std::floor(w) || w < 1)
        throw_data("wave label must be an integer >= 1, got '" + cells[wave_idx] + "' at row " +
                   std::to_string(row));
      waves.push_back(static_cast<int>(w));
    }
  }
  if (resp.empty()) throw_data("CSV file '" + path + "' has a header but no data rows");

  Dataset d;
  d.response = Eigen::Map<Eigen::VectorXd>(resp.data(), resp.size());
  d.predictors.resize(resp.size(), preds.size());
  for (std::size_t c = 0; c < preds.size(); ++c)
    d.predictors.col(c) = Eigen::Map<Eigen::VectorXd>(preds[c].data(), preds[c].size());
  d.names = predictor_columns;
  d.waves = std::move(waves);

  if (d.has_waves()) {
    // Labels must cover 1..T with no gaps.
    const int t = d.wave_count();
    std::vector<char> seen(t + 1, 0);
    for (int w : d.waves) seen[w] = 1;
    for (int w = 1; w <= t; ++w)
      if (!seen[w]) throw_data("wave labels are not consecutive: wave " + std::to_string(w) + " is empty");
  }
  return d;
}

/// Centering and scaling parameters for one predictor column.
struct ColumnScale {
  double mean = 0.0;
  double sd = 1.0;
};

inline std::vector<ColumnScale> column_scales(const Dataset& d) {
  std::vector<ColumnScale> out(d.p());
  const int n = d.n();
  if (n < 2) throw_data("need at least 2 cases to standardize");
  for (int j = 0; j < d.p(); ++j) {
    const double mean = d.predictors.col(j).mean();
    const double ss = (d.predictors.col(j).array() - mean).square().sum();
    const double sd = std::sqrt(ss / (n - 1));
    if (!(sd > 0.0))
      throw_data("predictor '" + d.names[j] + "' has zero variance and cannot be standardized");
    out[j] = {mean, sd};
  }
  return out;
}

inline Dataset apply_scales(const Dataset& d, const std::vector<ColumnScale>& scales) {
  Dataset out = d;
  for (int j = 0; j < d.p(); ++j)
    out.predictors.col(j) = (d.predictors.col(j).array() - scales[j].mean) / scales[j].sd;
  return out;
}

/// Center and scale every predictor column to sample mean 0 and sample
/// standard deviation 1 (divisor n-1). The response is left untouched.
inline Dataset standardize(const Dataset& d) { return apply_scales(d, column_scales(d)); }

/// Deterministic k-fold split: a seeded shuffle of case indices dealt
/// round-robin into folds, so fold sizes differ by at most one.
struct FoldPlan {
  int fold_count = 0;
  std::vector<int> assignment;  // fold index per case, values in [0, fold_count)
  std::uint64_t seed = 0;

  std::vector<int> validation_indices(int fold) const {
    std::vector<int> out;
    for (std::size_t i = 0; i < assignment.size(); ++i)
      if (assignment[i] == fold) out.push_back(static_cast<int>(i));
    return out;
  }

  std::vector<int> training_indices(int fold) const {
    std::vector<int> out;
    for (std::size_t i = 0; i < assignment.size(); ++i)
      if (assignment[i] != fold) out.push_back(static_cast<int>(i));
    return out;
  }
};

inline FoldPlan make_folds(int n, int k, std::uint64_t seed) {
  if (k < 2) throw_config("fold count must be at least 2, got " + std::to_string(k));
  if (n < 2 * k)
    throw_data("cannot split " + std::to_string(n) + " cases into " + std::to_string(k) +
               " folds (need n >= 2k)");
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  for (int i = n - 1; i > 0; --i) {  // Fisher-Yates
    const int j = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(i) + 1));
    std::swap(order[i], order[j]);
  }
  FoldPlan plan;
  plan.fold_count = k;
  plan.seed = seed;
  plan.assignment.assign(n, 0);
  for (int pos = 0; pos < n; ++pos) plan.assignment[order[pos]] = pos % k;
  return plan;
}

/// Synthetic design with exactly orthogonal standardized predictors:
/// a seeded Gaussian matrix orthogonalized against the intercept and against
/// earlier columns (modified Gram-Schmidt, run twice), then standardized.
/// Response is X * beta + sigma * noise on the standardized scale, so after
/// construction X'X = (n-1) * I.
inline Dataset synth_orthogonal(int n, int p, const Eigen::VectorXd& beta, double sigma,
                                std::uint64_t seed) {
  if (p < 1) throw_config("synth_orthogonal needs p >= 1");
  if (n <= p) throw_data("orthogonal design needs n > p, got n=" + std::to_string(n) + ", p=" + std::to_string(p));
  if (beta.size() != p) throw_config("beta has length " + std::to_string(beta.size()) + ", expected p=" + std::to_string(p));

  Rng rng(seed);
  Eigen::MatrixXd X(n, p);
  for (int j = 0; j < p; ++j)
    for (int i = 0; i < n; ++i) X(i, j) = rng.next_normal();

  for (int pass = 0; pass < 2; ++pass) {
    for (int j = 0; j < p; ++j) {
      X.col(j).array() -= X.col(j).mean();
      for (int k = 0; k < j; ++k) {
        const double proj = X.col(j).dot(X.col(k)) / X.col(k).squaredNorm();
        X.col(j) -= proj * X.col(k);
      }
      const double norm = X.col(j).norm();
      if (!(norm > 1e-12 * std::sqrt(static_cast<double>(n))))
        throw_data("orthogonalization collapsed column " + std::to_string(j));
    }
  }
  for (int j = 0; j < p; ++j) {
    const double sd = std::sqrt(X.col(j).squaredNorm() / (n - 1));
    X.col(j) /= sd;
  }

  Dataset d;
  d.predictors = X;
  d.names.reserve(p);
  for (int j = 0; j < p; ++j) d.names.push_back("x" + std::to_string(j + 1));
  d.response = X * beta;
  if (sigma > 0.0) {
    for (int i = 0; i < n; ++i) d.response(i) += sigma * rng.next_normal();
  }
  return d;
}

}  // namespace ecosel
