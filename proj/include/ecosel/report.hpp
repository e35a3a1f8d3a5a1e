#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "ecosel/econ.hpp"
#include "ecosel/errors.hpp"
#include "ecosel/subsets.hpp"

namespace ecosel {

namespace svg {

inline std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

inline std::string coord(double v) { return fmt("%.2f", v); }
inline std::string num17(double v) { return fmt("%.17g", v); }

inline std::string escape(const std::string& text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

/// Inclusion probability to a quantized gray: an 8-step ramp so equal
/// probabilities map to equal bytes on every platform. 1 is black, 0 white.
inline std::string shade(double inclusion) {
  double p = std::min(1.0, std::max(0.0, inclusion));
  const long idx = std::lround(p * 7.0);
  const long byte = std::lround(255.0 * (1.0 - static_cast<double>(idx) / 7.0));
  char buf[8];
  std::snprintf(buf, sizeof(buf), "#%02lx%02lx%02lx", byte, byte, byte);
  return buf;
}

/// Fill for predictors that are in the least-loss set but weakly supported.
inline constexpr const char* kWeakGray = "#808080";

struct Doc {
  std::string body;
  double width = 0.0, height = 0.0;

  void rect(double x, double y, double w, double h, const std::string& fill,
            const std::string& stroke = "none") {
    body += "<rect x=\"" + coord(x) + "\" y=\"" + coord(y) + "\" width=\"" + coord(w) +
            "\" height=\"" + coord(h) + "\" fill=\"" + fill + "\" stroke=\"" + stroke + "\"/>\n";
  }

  void line(double x1, double y1, double x2, double y2, const std::string& stroke,
            double width_ = 1.0) {
    body += "<line x1=\"" + coord(x1) + "\" y1=\"" + coord(y1) + "\" x2=\"" + coord(x2) +
            "\" y2=\"" + coord(y2) + "\" stroke=\"" + stroke + "\" stroke-width=\"" + coord(width_) +
            "\"/>\n";
  }

  void polyline(const std::vector<std::pair<double, double>>& pts, const std::string& stroke) {
    body += "<polyline fill=\"none\" stroke=\"" + stroke + "\" stroke-width=\"1.00\" points=\"";
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (i) body += " ";
      body += coord(pts[i].first) + "," + coord(pts[i].second);
    }
    body += "\"/>\n";
  }

  void circle(double cx, double cy, double r, const std::string& fill) {
    body += "<circle cx=\"" + coord(cx) + "\" cy=\"" + coord(cy) + "\" r=\"" + coord(r) +
            "\" fill=\"" + fill + "\"/>\n";
  }

  void text(double x, double y, const std::string& s, const std::string& anchor = "start",
            double size = 10.0) {
    body += "<text x=\"" + coord(x) + "\" y=\"" + coord(y) + "\" font-family=\"sans-serif\" font-size=\"" +
            coord(size) + "\" text-anchor=\"" + anchor + "\">" + escape(s) + "</text>\n";
  }

  std::string finish() const {
    std::string out = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + coord(width) + "\" height=\"" +
           coord(height) + "\" viewBox=\"0 0 " + coord(width) + " " + coord(height) + "\">\n";
    out += "<rect x=\"0\" y=\"0\" width=\"" + coord(width) + "\" height=\"" + coord(height) +
           "\" fill=\"#ffffff\" stroke=\"none\"/>\n";
    out += body;
    out += "</svg>\n";
    return out;
  }
};

}  // namespace svg

/// One column of a selection map: a purchased set, its estimated loss, and
/// the within-set inclusion probabilities (length p, zero outside the set).
struct SelectionMapEntry {
  PredictorSet set;
  double loss = 0.0;
  Eigen::VectorXd inclusion;
};

struct SelectionMapSpec {
  std::vector<SelectionMapEntry> entries;               // ascending by loss
  std::vector<std::string> names;                       // predictor labels, length p
  std::vector<std::pair<std::string, int>> markers;     // label -> 0-based rank position
  int top_k = 0;                                        // 0 = render everything
  double gray_threshold = 0.7;
};

/// Loss plot over a map of set memberships, columns ranked by loss. Cell
/// darkness encodes the inclusion probability; weakly supported members of
/// the least-loss set render in flat gray.
inline std::string render_selection_map(const SelectionMapSpec& spec) {
  if (spec.entries.empty()) throw_config("selection map needs at least one entry");
  if (!(spec.gray_threshold >= 0.0 && spec.gray_threshold <= 1.0))
    throw_config("gray threshold must be in [0, 1]");
  const int p = spec.entries.front().set.p;
  const int m = (spec.top_k > 0) ? std::min<int>(spec.top_k, spec.entries.size())
                                 : static_cast<int>(spec.entries.size());

  const double left = 70.0, right = 12.0, top = 16.0;
  const double loss_h = 140.0, gap = 10.0, cell_h = 14.0, bottom = 26.0;
  const double cell_w = std::max(2.0, std::min(14.0, 960.0 / m));
  const double grid_top = top + loss_h + gap;

  svg::Doc doc;
  doc.width = left + m * cell_w + right;
  doc.height = grid_top + p * cell_h + bottom;

  double lo = spec.entries[0].loss, hi = spec.entries[0].loss;
  for (int i = 0; i < m; ++i) {
    lo = std::min(lo, spec.entries[i].loss);
    hi = std::max(hi, spec.entries[i].loss);
  }
  const double span = (hi > lo) ? (hi - lo) : 1.0;
  auto loss_y = [&](double v) { return top + loss_h * (1.0 - (v - lo) / span); };

  // Loss curve.
  std::vector<std::pair<double, double>> pts;
  pts.reserve(m);
  for (int i = 0; i < m; ++i)
    pts.emplace_back(left + (i + 0.5) * cell_w, loss_y(spec.entries[i].loss));
  doc.rect(left, top, m * cell_w, loss_h, "none", "#000000");
  doc.polyline(pts, "#000000");
  doc.text(left - 4, top + 8, svg::fmt("%.4g", hi), "end");
  doc.text(left - 4, top + loss_h, svg::fmt("%.4g", lo), "end");

  // Markers: labeled vertical reference lines at given ranks.
  for (const auto& [label, rank] : spec.markers) {
    if (rank < 0 || rank >= m) continue;
    const double x = left + (rank + 0.5) * cell_w;
    doc.line(x, top, x, grid_top + p * cell_h, "#000000");
    doc.text(x, top - 4, label, "middle");
  }

  // Membership grid.
  doc.rect(left, grid_top, m * cell_w, p * cell_h, "none", "#000000");
  for (int i = 0; i < m; ++i) {
    const auto& e = spec.entries[i];
    for (int j = 0; j < p; ++j) {
      if (!e.set.contains(j)) continue;
      std::string fill = svg::shade(e.inclusion.size() == p ? e.inclusion(j) : 1.0);
      if (i == 0 && e.inclusion.size() == p && e.inclusion(j) < spec.gray_threshold)
        fill = svg::kWeakGray;
      doc.rect(left + i * cell_w, grid_top + j * cell_h, cell_w, cell_h, fill);
    }
  }
  for (int j = 0; j < p; ++j) {
    const std::string label = (j < static_cast<int>(spec.names.size())) ? spec.names[j]
                                                                        : ("x" + std::to_string(j + 1));
    doc.text(left - 4, grid_top + (j + 0.5) * cell_h + 3.5, label, "end");
  }

  // Rank axis: a handful of tick labels.
  const int step = std::max(1, m / 8);
  for (int i = 0; i < m; i += step)
    doc.text(left + (i + 0.5) * cell_w, grid_top + p * cell_h + 14, std::to_string(i + 1), "middle");
  return doc.finish();
}

/// One column per grid price: the optimal purchased set at that price, cell
/// darkness again from the within-set inclusion probabilities.
inline std::string render_cost_sweep(const std::vector<std::pair<double, SelectionOutcome>>& sweep,
                                     const std::vector<std::string>& names) {
  if (sweep.empty()) throw_config("cost sweep rendering needs at least one price");
  const int p = sweep.front().second.optimum.set.p;
  const int m = static_cast<int>(sweep.size());

  const double left = 70.0, right = 12.0, top = 16.0, cell_h = 14.0, bottom = 34.0;
  const double cell_w = std::max(10.0, std::min(30.0, 960.0 / m));

  svg::Doc doc;
  doc.width = left + m * cell_w + right;
  doc.height = top + p * cell_h + bottom;

  doc.rect(left, top, m * cell_w, p * cell_h, "none", "#000000");
  for (int i = 0; i < m; ++i) {
    const auto& outcome = sweep[i].second;
    const auto& incl = outcome.optimum_inclusion;
    for (int j = 0; j < p; ++j) {
      if (!outcome.optimum.set.contains(j)) continue;
      const std::string fill = svg::shade(incl.size() == p ? incl(j) : 1.0);
      doc.rect(left + i * cell_w, top + j * cell_h, cell_w, cell_h, fill);
    }
  }
  for (int j = 0; j < p; ++j) {
    const std::string label = (j < static_cast<int>(names.size())) ? names[j] : ("x" + std::to_string(j + 1));
    doc.text(left - 4, top + (j + 0.5) * cell_h + 3.5, label, "end");
  }
  const int step = std::max(1, m / 12);
  for (int i = 0; i < m; i += step)
    doc.text(left + (i + 0.5) * cell_w, top + p * cell_h + 14, svg::fmt("%.4g", sweep[i].first), "middle");
  doc.text(left + 0.5 * m * cell_w, top + p * cell_h + 28, "price", "middle");
  return doc.finish();
}

/// Objective curves for the when-to-purchase decision: one panel per
/// discount factor, one curve per price, minimizing waves dotted, the
/// no-purchase option drawn at the terminal position N.
struct TimingCurve {
  double delta = 0.0;
  double price = 0.0;
  TimingSolution solution;
};

inline std::string render_timing_curves(const std::vector<TimingCurve>& curves) {
  if (curves.empty()) throw_config("timing plot needs at least one curve");
  const int T = static_cast<int>(curves.front().solution.objective.size()) - 1;

  std::map<double, std::vector<const TimingCurve*>> panels;
  for (const auto& c : curves) {
    if (static_cast<int>(c.solution.objective.size()) != T + 1)
      throw_config("timing curves must share the same wave count");
    panels[c.delta].push_back(&c);
  }

  const double left = 56.0, right = 60.0, top_pad = 24.0, panel_h = 170.0, panel_gap = 26.0, bottom = 30.0;
  const double plot_w = std::max(260.0, 26.0 * (T + 1));

  svg::Doc doc;
  doc.width = left + plot_w + right;
  doc.height = panels.size() * (top_pad + panel_h) + (panels.size() - 1) * panel_gap + bottom;

  auto x_of = [&](int t) { return left + plot_w * (t - 0.5) / (T + 1); };

  double panel_top = 0.0;
  for (const auto& [delta, group] : panels) {
    panel_top += top_pad;
    double lo = group.front()->solution.objective.front(), hi = lo;
    for (const auto* c : group)
      for (double v : c->solution.objective) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    const double span = (hi > lo) ? (hi - lo) : 1.0;
    auto y_of = [&](double v) { return panel_top + panel_h * (1.0 - (v - lo) / span); };

    doc.rect(left, panel_top, plot_w, panel_h, "none", "#000000");
    doc.text(left, panel_top - 6, "delta = " + svg::fmt("%.4g", delta));
    doc.text(left - 4, panel_top + 8, svg::fmt("%.4g", hi), "end");
    doc.text(left - 4, panel_top + panel_h, svg::fmt("%.4g", lo), "end");

    for (const auto* c : group) {
      std::vector<std::pair<double, double>> pts;
      for (int t = 1; t <= T + 1; ++t) pts.emplace_back(x_of(t), y_of(c->solution.objective[t - 1]));
      doc.polyline(pts, "#888888");
      doc.text(x_of(T + 1) + 6, y_of(c->solution.objective.back()) + 3.5,
               "c=" + svg::fmt("%.4g", c->price), "start", 9.0);
      for (int t : c->solution.minimizers) doc.circle(x_of(t), y_of(c->solution.objective[t - 1]), 3.0, "#000000");
    }
    for (int t = 1; t <= T + 1; ++t) {
      const std::string label = (t == T + 1) ? "N" : std::to_string(t);
      doc.text(x_of(t), panel_top + panel_h + 14, label, "middle", 9.0);
    }
    panel_top += panel_h + panel_gap;
  }
  return doc.finish();
}

// ---------------------------------------------------------------------------
// JSON serialization. Written by hand so float formatting (17 significant
// digits, bit round-trippable) and key order are under our control and runs
// are byte-identical.

namespace jsonfmt {

inline std::string number(double v) { return svg::num17(v); }

inline std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      default: out += c;
    }
  }
  out += "\"";
  return out;
}

inline std::string set_entry(const SelectionEntry& e, const Eigen::VectorXd& inclusion,
                             const std::vector<std::string>& names) {
  std::string out = "{\"bits\":" + std::to_string(e.set.bits) + ",\"members\":[";
  bool first = true;
  for (int j : e.set.members()) {
    if (!first) out += ",";
    out += quote(names[j]);
    first = false;
  }
  out += "],\"loss\":" + number(e.loss) + ",\"cost\":" + number(e.cost) +
         ",\"total\":" + number(e.total) + ",\"inclusion\":{";
  if (inclusion.size() == e.set.p) {
    first = true;
    for (int j : e.set.members()) {
      if (!first) out += ",";
      out += quote(names[j]) + ":" + number(inclusion(j));
      first = false;
    }
  }
  out += "}}";
  return out;
}

}  // namespace jsonfmt

/// Results of one selection run: every purchased set in rank order plus the
/// optimum. Inclusion probabilities come from the source when given.
inline std::string export_results(const SelectionOutcome& outcome, const std::vector<std::string>& names,
                                  const InclusionSource* inclusion = nullptr) {
  std::string out = "{\"schema_version\":1,\"sets\":[";
  for (std::size_t i = 0; i < outcome.ranked.size(); ++i) {
    if (i) out += ",";
    const auto& e = outcome.ranked[i];
    const Eigen::VectorXd incl =
        inclusion ? inclusion->inclusion_for(e.set) : Eigen::VectorXd();
    out += jsonfmt::set_entry(e, incl, names);
  }
  out += "]";
  if (!outcome.ranked.empty()) {
    out += ",\"optimum\":" + jsonfmt::set_entry(outcome.optimum, outcome.optimum_inclusion, names);
  }
  out += "}\n";
  return out;
}

inline std::string export_sweep(const std::vector<std::pair<double, SelectionOutcome>>& sweep,
                                const std::vector<std::string>& names) {
  std::string out = "{\"schema_version\":1,\"sweep\":[";
  for (std::size_t i = 0; i < sweep.size(); ++i) {
    if (i) out += ",";
    out += "{\"price\":" + jsonfmt::number(sweep[i].first) + ",\"optimum\":" +
           jsonfmt::set_entry(sweep[i].second.optimum, sweep[i].second.optimum_inclusion, names) + "}";
  }
  out += "]}\n";
  return out;
}

inline std::string export_timed(const std::vector<TimingCurve>& curves) {
  std::string out = "{\"schema_version\":1,\"problems\":[";
  for (std::size_t i = 0; i < curves.size(); ++i) {
    if (i) out += ",";
    const auto& c = curves[i];
    const int T = static_cast<int>(c.solution.objective.size()) - 1;
    out += "{\"delta\":" + jsonfmt::number(c.delta) + ",\"price\":" + jsonfmt::number(c.price) +
           ",\"objective\":[";
    for (int t = 0; t <= T; ++t) {
      if (t) out += ",";
      out += jsonfmt::number(c.solution.objective[t]);
    }
    out += "],\"minimizers\":[";
    for (std::size_t k = 0; k < c.solution.minimizers.size(); ++k) {
      if (k) out += ",";
      out += std::to_string(c.solution.minimizers[k]);
    }
    out += "],\"optimal_wave\":";
    out += c.solution.no_purchase(T) ? std::string("\"no_purchase\"")
                                     : std::to_string(c.solution.best_t);
    out += "}";
  }
  out += "]}\n";
  return out;
}

}  // namespace ecosel
