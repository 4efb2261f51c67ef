#pragma once

// Result tables. Every CSV written by the tool is built here, and every SVG is
// rendered from these tables only.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "bifurcation.hpp"
#include "csv.hpp"
#include "fw_action.hpp"
#include "phases.hpp"
#include "simulate.hpp"
#include "thresholds.hpp"

namespace mktfrag {

/// round, t, f_1..f_M, share_1..share_M; undefined ratios are empty cells.
inline Table series_table(const std::vector<Aggregates>& series, std::size_t markets) {
  Table t;
  t.header = {"round", "t"};
  for (std::size_t m = 1; m <= markets; ++m) t.header.push_back("f_" + std::to_string(m));
  for (std::size_t m = 1; m <= markets; ++m) t.header.push_back("share_" + std::to_string(m));
  for (const auto& a : series) {
    std::vector<std::string> row{std::to_string(a.round), format_number(a.t)};
    for (const auto& f : a.f) row.push_back(f ? format_number(*f) : std::string());
    for (double s : a.share) row.push_back(format_number(s));
    t.rows.push_back(std::move(row));
  }
  return t;
}

/// One row per occupied bin: class, bin edges, centre, count, preference zone.
inline Table histogram_table(const AttractionHistogram& h) {
  Table t;
  t.header = {"class", "dA2_lo", "dA2_hi", "dA3_lo", "dA3_hi", "dA2", "dA3", "count", "zone"};
  const double w = h.width();
  for (int i = 0; i < h.bins; ++i)
    for (int j = 0; j < h.bins; ++j) {
      const double c = h.at(i, j);
      if (c == 0.0) continue;
      t.add(h.class_id + 1, -h.range + i * w, -h.range + (i + 1) * w, -h.range + j * w, -h.range + (j + 1) * w,
            h.center(i), h.center(j), c, h.zone(i, j) + 1);
    }
  return t;
}

inline Table peaks_table(const std::vector<PeakSet>& sets) {
  Table t;
  t.header = {"class", "peak", "dA2", "dA3", "weight", "zone"};
  for (const auto& ps : sets)
    for (std::size_t k = 0; k < ps.peaks.size(); ++k) {
      const auto& p = ps.peaks[k];
      t.add(ps.class_id + 1, k + 1, p.location[0], p.location[1], p.weight, p.zone + 1);
    }
  return t;
}

/// Drift samples on a (n+1) x (n+1) grid over [-box, box]^2.
template <DriftFieldLike F>
Table flow_table(const F& field, std::size_t class_id, double box, int n) {
  Table t;
  t.header = {"class", "dA2", "dA3", "mu2", "mu3"};
  for (int i = 0; i <= n; ++i)
    for (int j = 0; j <= n; ++j) {
      const Vec2 x(-box + 2.0 * box * i / n, -box + 2.0 * box * j / n);
      const Vec2 mu = field.drift(x);
      t.add(class_id + 1, x[0], x[1], mu[0], mu[1]);
    }
  return t;
}

inline Table fixed_points_table(const std::vector<FixedPoint>& pts) {
  Table t;
  t.header = {"class", "dA2", "dA3", "stability", "ev1_re", "ev1_im", "ev2_re", "ev2_im", "residual", "zone"};
  for (const auto& p : pts)
    t.add(p.class_id + 1, p.location[0], p.location[1], to_string(p.stability), p.eigenvalues[0].real(),
          p.eigenvalues[0].imag(), p.eigenvalues[1].real(), p.eigenvalues[1].imag(), p.residual,
          preferred_market(p.location) + 1);
  return t;
}

inline Table thresholds_table(const ThresholdReport& rep) {
  Table t;
  t.header = {"name", "kind", "found", "inv_beta_lo", "inv_beta_hi", "inv_beta", "beta"};
  for (const auto& th : rep.thresholds)
    t.add(th.name, to_string(th.kind), th.bracket.found, th.bracket.inv_beta_lo, th.bracket.inv_beta_hi,
          th.bracket.inv_beta(), th.bracket.beta());
  return t;
}

inline Table transitions_table(std::size_t class_id, const TransitionAnalysis& ta, const ActionOptions& opt) {
  Table t;
  t.header = {"class", "from", "to", "saddle", "action", "converged", "retried", "gradient_norm", "K", "T"};
  for (const auto& tr : ta.transitions)
    t.add(class_id + 1, tr.from + 1, tr.to + 1, tr.saddle + 1, tr.result.action, tr.result.converged,
          tr.result.retried, tr.result.gradient_norm, opt.steps, opt.total_time);
  return t;
}

/// Uphill (segment "up") and downhill ("down") polylines of every transition.
inline Table paths_table(std::size_t class_id, const TransitionAnalysis& ta) {
  Table t;
  t.header = {"class", "transition", "segment", "k", "dA2", "dA3"};
  for (std::size_t n = 0; n < ta.transitions.size(); ++n) {
    const auto& r = ta.transitions[n].result;
    for (std::size_t k = 0; k < r.path.states.size(); ++k)
      t.add(class_id + 1, n + 1, "up", k, r.path.states[k][0], r.path.states[k][1]);
    // Thin the relaxation branch; it may hold many RK4 steps.
    const std::size_t stride = std::max<std::size_t>(1, r.downhill.size() / 200);
    for (std::size_t k = 0; k < r.downhill.size(); k += stride)
      t.add(class_id + 1, n + 1, "down", k, r.downhill[k][0], r.downhill[k][1]);
    if (!r.downhill.empty() && (r.downhill.size() - 1) % stride != 0)
      t.add(class_id + 1, n + 1, "down", r.downhill.size() - 1, r.downhill.back()[0], r.downhill.back()[1]);
  }
  return t;
}

/// Attractors of each class with quasi-potential and size.
inline Table peaks_classification_table(const SteadyStateClassification& s) {
  Table t;
  t.header = {"class", "attractor", "dA2", "dA3", "zone", "quasi_potential", "large", "code"};
  for (std::size_t c = 0; c < s.classes.size(); ++c) {
    const auto& ca = s.classes[c];
    for (std::size_t a = 0; a < ca.transitions.attractors.size(); ++a) {
      const auto& p = ca.transitions.attractors[a];
      const double v = a < ca.peaks.quasi_potential.size() ? ca.peaks.quasi_potential[a] : std::nan("");
      const bool large = a < ca.peaks.large.size() && ca.peaks.large[a];
      t.add(c + 1, a + 1, p.location[0], p.location[1], preferred_market(p.location) + 1, v, large,
            s.codes[c].str());
    }
  }
  return t;
}

inline Table phase_table(const PhaseDiagram& pd) {
  Table t;
  t.header = {"bias", "inv_beta"};
  for (std::size_t c = 0; c < pd.spec.classes.size(); ++c) t.header.push_back("code_class" + std::to_string(c + 1));
  for (const auto& n : pd.nodes) {
    std::vector<std::string> row{format_number(n.bias), format_number(n.inv_beta)};
    for (const auto& c : n.codes) row.push_back(c.str());
    t.rows.push_back(std::move(row));
  }
  return t;
}

inline Table boundaries_table(const PhaseDiagram& pd) {
  Table t;
  t.header = {"bias", "inv_beta_lo", "inv_beta_hi", "code_above", "code_below"};
  for (const auto& b : pd.boundaries) t.add(b.bias, b.inv_beta_lo, b.inv_beta_hi, b.code_above, b.code_below);
  return t;
}

inline Table patterns_table(const FeasiblePatterns& fp, int markets, int classes) {
  Table t;
  for (int c = 1; c <= classes; ++c) t.header.push_back("eta_" + std::to_string(c));
  for (const char* h : {"sum", "M", "C", "feasibility", "disjoint_impossible"}) t.header.push_back(h);
  for (const auto& p : fp.patterns) {
    std::vector<std::string> row;
    for (int e : p.eta) row.push_back(std::to_string(e));
    row.push_back(std::to_string(p.total()));
    row.push_back(std::to_string(markets));
    row.push_back(std::to_string(classes));
    row.push_back(to_string(counting_feasibility(p)));
    row.push_back(disjoint_preferences_impossible(p) ? "1" : "0");
    t.rows.push_back(std::move(row));
  }
  return t;
}

}  // namespace mktfrag
