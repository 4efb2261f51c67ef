#pragma once

// Steady-state peak structure of every class as a triangle code, phase-diagram
// sweeps over (bias, 1/beta), and the loyalty-group counting argument.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "bifurcation.hpp"
#include "error.hpp"
#include "fw_action.hpp"
#include "parallel.hpp"
#include "theory.hpp"

namespace mktfrag {

struct CodeEntry {
  int market = 0;  ///< 1..3, or 0 for an indifferent (star) peak
  bool large = true;

  friend bool operator==(const CodeEntry&, const CodeEntry&) = default;
};

/// Peak structure of one class: which corners of the triangle hold large or
/// small peaks. Printed as e.g. "1L+2S" or "*L".
struct ClassCode {
  std::vector<CodeEntry> entries;  ///< sorted by market
  enum class Status { ok, undetermined, out_of_range } status = Status::ok;

  bool has(int market, bool large) const {
    return std::any_of(entries.begin(), entries.end(),
                       [&](const CodeEntry& e) { return e.market == market && e.large == large; });
  }
  bool has_market(int market) const {
    return std::any_of(entries.begin(), entries.end(), [&](const CodeEntry& e) { return e.market == market; });
  }
  std::size_t large_count() const {
    return static_cast<std::size_t>(std::count_if(entries.begin(), entries.end(), [](const CodeEntry& e) { return e.large; }));
  }
  std::vector<int> large_markets() const {
    std::vector<int> m;
    for (const auto& e : entries)
      if (e.large) m.push_back(e.market);
    return m;
  }

  FragmentationLabel label() const {
    if (status != Status::ok) return FragmentationLabel::undetermined;
    if (large_count() >= 2) return FragmentationLabel::strongly_fragmented;
    return entries.size() > 1 ? FragmentationLabel::weakly_fragmented : FragmentationLabel::unfragmented;
  }

  std::string str() const {
    if (status == Status::undetermined) return "undetermined";
    if (status == Status::out_of_range) return "out-of-range";
    std::string s;
    for (const auto& e : entries) {
      if (!s.empty()) s += '+';
      s += e.market == 0 ? std::string("*") : std::to_string(e.market);
      s += e.large ? 'L' : 'S';
    }
    return s;
  }

  friend bool operator==(const ClassCode&, const ClassCode&) = default;
};

using TriangleCode = std::vector<ClassCode>;  ///< one per class

struct ClassifyOptions {
  double r = 0.0;  ///< 0 = the r -> 0 limit (smallest peak threshold)
  FixedPointSearch search{};
  ActionOptions action{};
  double star_tol = 1e-6;  ///< choice-probability spread below which a peak is indifferent
  double split_width = 1e-4;
  int max_passes = 4;
};

/// One delta-peaked subpopulation of a class.
struct SubPopulation {
  std::size_t class_index = 0;
  double fraction = 1.0;  ///< share of the class
  Vec2 delta = Vec2::Zero();
};

struct ClassAnalysis {
  TransitionAnalysis transitions;
  PeakClassification peaks;
  std::optional<std::size_t> host;  ///< attractor holding the (largest) subpopulation
  bool split = false;
};

struct SteadyStateClassification {
  TriangleCode codes;
  std::vector<ClassAnalysis> classes;
  std::vector<SubPopulation> subpopulations;
  Aggregate3 aggregates{};
  bool converged = true;
};

namespace detail {

inline ModelSpec expand(const ModelSpec& model, const std::vector<SubPopulation>& subs) {
  ModelSpec m;
  m.markets = model.markets;
  m.orders = model.orders;
  for (const auto& s : subs) {
    m.classes.push_back(model.classes[s.class_index]);
    const double w = model.class_weights.empty() ? 1.0 : model.class_weights[s.class_index];
    m.class_weights.push_back(w * s.fraction);
  }
  return m;
}

/// Relaxes the subpopulations jointly to a fixed point of their dynamics.
inline std::vector<SubPopulation> solve_subpopulations(const ModelSpec& model, std::vector<SubPopulation> subs) {
  std::vector<Vec2> start;
  for (const auto& s : subs) start.push_back(s.delta);
  const auto sol = homogeneous_fixed_point(expand(model, subs), start);
  for (std::size_t k = 0; k < subs.size(); ++k) subs[k].delta = sol.deltas[k];
  return subs;
}

inline Aggregate3 subpopulation_aggregates(const ModelSpec& model, const std::vector<SubPopulation>& subs) {
  std::vector<Vec2> d;
  for (const auto& s : subs) d.push_back(s.delta);
  return homogeneous_aggregates(expand(model, subs), d);
}

inline std::optional<std::size_t> nearest_attractor(const std::vector<FixedPoint>& attractors, const Vec2& x,
                                                    double tol) {
  std::optional<std::size_t> best;
  double bd = tol;
  for (std::size_t a = 0; a < attractors.size(); ++a) {
    const double d = (attractors[a].location - x).norm();
    if (d < bd) {
      bd = d;
      best = a;
    }
  }
  return best;
}

inline ClassAnalysis analyse_class(const ModelSpec& model, std::size_t c, const Aggregate3& f,
                                   const std::vector<SubPopulation>& subs, const ClassifyOptions& opt) {
  ClassAnalysis ca;
  const auto field = class_field(model, c, f);
  auto search = opt.search;
  if (!(search.box > 0.0)) search.box = default_search_box(field);
  std::vector<Vec2> seeds;
  for (const auto& s : subs)
    if (s.class_index == c) seeds.push_back(s.delta);
  const auto scan = find_fixed_points<MarketField>(field, search, seeds, c);
  ca.transitions = analyse_transitions(field, scan.points, opt.action);
  ca.peaks = classify_peaks(ca.transitions.action, opt.r);
  double best = -1.0;
  for (const auto& s : subs)
    if (s.class_index == c && s.fraction > best) {
      best = s.fraction;
      ca.host = nearest_attractor(ca.transitions.attractors, s.delta, 1e-5);
    }
  return ca;
}

struct SplitProbe {
  bool ok = false;  ///< both subpopulations survive as distinct attractors
  double balance = 0.0;  ///< V(host) - V(other)
  std::vector<SubPopulation> subs;
};

inline SplitProbe probe_split(const ModelSpec& model, const std::vector<SubPopulation>& base, std::size_t c,
                              const Vec2& host, const Vec2& other, double w, const ClassifyOptions& opt) {
  SplitProbe p;
  std::vector<SubPopulation> subs;
  for (const auto& s : base)
    if (s.class_index != c) subs.push_back(s);
  subs.push_back({c, 1.0 - w, host});
  subs.push_back({c, w, other});
  try {
    subs = solve_subpopulations(model, subs);
  } catch (const Error&) {
    return p;
  }
  const Vec2 dh = subs[subs.size() - 2].delta, db = subs.back().delta;
  if ((dh - db).norm() < 1e-3 || preferred_market(dh) == preferred_market(db)) return p;
  const auto ca = analyse_class(model, c, subpopulation_aggregates(model, subs), subs, opt);
  const auto ih = nearest_attractor(ca.transitions.attractors, dh, 1e-5);
  const auto ib = nearest_attractor(ca.transitions.attractors, db, 1e-5);
  if (!ih || !ib || ca.peaks.quasi_potential.size() != ca.transitions.attractors.size()) return p;
  p.balance = ca.peaks.quasi_potential[*ih] - ca.peaks.quasi_potential[*ib];
  if (!std::isfinite(p.balance)) return p;
  p.ok = true;
  p.subs = std::move(subs);
  return p;
}

}  // namespace detail

/// Peak structure of every class in the low-noise limit.
///
/// Start from the homogeneous population reached from zero attractions. A
/// class whose host attractor is exponentially small against another attractor
/// B cannot stay homogeneous there. A growing fraction w of it is then moved to
/// B: if the two peaks balance at some w, the class is strongly fragmented and
/// the aggregates are those of the balanced split; if B stays dominant up to
/// w = 1 the class moves to B; otherwise the code is undetermined.
inline SteadyStateClassification classify_steady_state(const ModelSpec& model, const ClassifyOptions& opt = {}) {
  model.validate();
  const std::size_t C = model.classes.size();
  SteadyStateClassification out;
  const auto h0 = homogeneous_fixed_point(model);
  for (std::size_t c = 0; c < C; ++c) out.subpopulations.push_back({c, 1.0, h0.deltas[c]});
  std::vector<bool> split(C, false), undetermined(C, false);
  const double eps = large_peak_threshold(opt.r);

  for (int pass = 0; pass < opt.max_passes; ++pass) {
    bool changed = false;
    const Aggregate3 f = detail::subpopulation_aggregates(model, out.subpopulations);
    for (std::size_t c = 0; c < C && !changed; ++c) {
      if (split[c] || undetermined[c]) continue;
      const auto ca = detail::analyse_class(model, c, f, out.subpopulations, opt);
      if (!ca.host || ca.peaks.quasi_potential.size() != ca.transitions.attractors.size()) continue;
      const double vh = ca.peaks.quasi_potential[*ca.host];
      if (!(vh >= eps * (1.0 - 1e-9))) continue;  // host is a large peak: consistent
      std::size_t b = 0, n_large = 0;
      for (std::size_t a = 0; a < ca.peaks.quasi_potential.size(); ++a) {
        if (ca.peaks.quasi_potential[a] < ca.peaks.quasi_potential[b]) b = a;
        n_large += ca.peaks.large[a] ? 1 : 0;
      }
      // Several equivalent large peaks (all-fair markets): moving the class
      // onto them symmetrically leaves the aggregates where they are.
      if (n_large >= 2) continue;
      const Vec2 host = ca.transitions.attractors[*ca.host].location;
      const Vec2 other = ca.transitions.attractors[b].location;

      // Walk w upwards until the balance changes sign or B can no longer be held.
      double w_lo = 0.0;
      std::optional<double> w_hi;
      bool collapsed = false;
      for (double w : {0.01, 0.02, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 0.99}) {
        const auto p = detail::probe_split(model, out.subpopulations, c, host, other, w, opt);
        if (!p.ok) {
          collapsed = true;
          w_hi = w;
          break;
        }
        if (p.balance <= 0.0) {
          w_hi = w;
          break;
        }
        w_lo = w;
      }
      if (!w_hi) {
        // B dominates whatever the split: the whole class moves there.
        for (auto& s : out.subpopulations)
          if (s.class_index == c) s.delta = other;
        try {
          out.subpopulations = detail::solve_subpopulations(model, out.subpopulations);
        } catch (const Error&) {
          undetermined[c] = true;
        }
        changed = true;
        continue;
      }
      double lo = w_lo, hi = *w_hi;
      std::optional<detail::SplitProbe> best;
      auto keep = [&](detail::SplitProbe&& p) {
        if (p.ok && (!best || std::abs(p.balance) < std::abs(best->balance))) best = std::move(p);
      };
      if (!collapsed) keep(detail::probe_split(model, out.subpopulations, c, host, other, hi, opt));
      while (hi - lo > opt.split_width) {
        const double mid = 0.5 * (lo + hi);
        auto p = detail::probe_split(model, out.subpopulations, c, host, other, mid, opt);
        if (p.ok && p.balance > 0.0)
          lo = mid;
        else
          hi = mid;
        keep(std::move(p));
      }
      if (best && std::abs(best->balance) < eps) {
        out.subpopulations = best->subs;
        split[c] = true;
      } else {
        undetermined[c] = true;
      }
      changed = true;
    }
    if (!changed) break;
  }

  out.aggregates = detail::subpopulation_aggregates(model, out.subpopulations);
  for (std::size_t c = 0; c < C; ++c) {
    auto ca = detail::analyse_class(model, c, out.aggregates, out.subpopulations, opt);
    ca.split = split[c];
    out.converged = out.converged && ca.transitions.all_converged;
    ClassCode code;
    const auto& att = ca.transitions.attractors;
    if (undetermined[c] || ca.peaks.label == FragmentationLabel::undetermined || !ca.transitions.all_converged) {
      code.status = ClassCode::Status::undetermined;
    } else {
      std::vector<std::size_t> hosts;
      for (const auto& s : out.subpopulations)
        if (s.class_index == c)
          if (auto a = detail::nearest_attractor(att, s.delta, 1e-5)) hosts.push_back(*a);
      for (std::size_t a = 0; a < att.size(); ++a) {
        const Vec3 p = class_field(model, c, out.aggregates).probabilities(att[a].location);
        const bool star = p.maxCoeff() - p.minCoeff() < opt.star_tol;
        bool large = ca.peaks.large[a];
        // The peaks of a balanced split are order one by construction.
        if (split[c] && std::find(hosts.begin(), hosts.end(), a) != hosts.end()) large = true;
        code.entries.push_back({star ? 0 : static_cast<int>(preferred_market(att[a].location)) + 1, large});
      }
      std::sort(code.entries.begin(), code.entries.end(), [](const CodeEntry& x, const CodeEntry& y) {
        return x.market != y.market ? x.market < y.market : x.large > y.large;
      });
    }
    out.codes.push_back(std::move(code));
    out.classes.push_back(std::move(ca));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Phase-diagram sweeps.

enum class Scenario {
  symmetric_fair,  ///< theta_2 = 0.5, theta_1 = 1 - theta_3 = bias
  two_symmetric,   ///< theta_1 = 0.3, theta_3 = 0.7, theta_2 = bias
  fixed_pair,      ///< theta_1 = 0.3, theta_2 = 0.5, theta_3 = bias
};

inline const char* to_string(Scenario s) {
  switch (s) {
    case Scenario::symmetric_fair: return "symmetric-fair";
    case Scenario::two_symmetric: return "two-symmetric";
    case Scenario::fixed_pair: return "fixed-pair";
  }
  return "?";
}

inline std::vector<MarketSpec> scenario_markets(Scenario s, double bias) {
  switch (s) {
    case Scenario::symmetric_fair: return {{bias}, {0.5}, {1.0 - bias}};
    case Scenario::two_symmetric: return {{0.3}, {bias}, {0.7}};
    case Scenario::fixed_pair: return {{0.3}, {0.5}, {bias}};
  }
  return {};
}

struct PhaseSweepSpec {
  Scenario scenario = Scenario::symmetric_fair;
  double bias_lo = 0.05, bias_hi = 0.5;
  int bias_nodes = 40;
  double inv_beta_lo = 0.16, inv_beta_hi = 0.30;
  int inv_beta_nodes = 40;
  std::vector<TraderClassSpec> classes;  ///< beta is overwritten per node
  std::vector<double> class_weights;
  OrderDistribution orders;
  ClassifyOptions classify{};
  bool refine = true;
};

struct PhaseNode {
  double bias = 0.0;
  double inv_beta = 0.0;
  TriangleCode codes;
  Aggregate3 aggregates{};
};

struct PhaseBoundary {
  double bias = 0.0;
  double inv_beta_lo = 0.0, inv_beta_hi = 0.0;
  std::string code_above, code_below;  ///< at the larger / smaller 1/beta end
};

struct PhaseDiagram {
  PhaseSweepSpec spec;
  std::vector<PhaseNode> nodes;  ///< bias-major, 1/beta descending within a column
  std::vector<PhaseBoundary> boundaries;
};

inline std::string joined_code(const TriangleCode& t) {
  std::string s;
  for (std::size_t c = 0; c < t.size(); ++c) s += (c ? "|" : "") + t[c].str();
  return s;
}

inline ModelSpec scenario_model(const PhaseSweepSpec& spec, double bias, double inv_beta) {
  ModelSpec m;
  m.markets = scenario_markets(spec.scenario, bias);
  m.classes = spec.classes;
  for (auto& c : m.classes) c.beta = 1.0 / inv_beta;
  m.class_weights = spec.class_weights;
  m.orders = spec.orders;
  return m;
}

inline TriangleCode classify_node(const PhaseSweepSpec& spec, double bias, double inv_beta, Aggregate3* f = nullptr) {
  try {
    auto res = classify_steady_state(scenario_model(spec, bias, inv_beta), spec.classify);
    if (f) *f = res.aggregates;
    return res.codes;
  } catch (const ConvergenceError&) {
    TriangleCode t(spec.classes.size());
    for (auto& c : t) c.status = ClassCode::Status::undetermined;
    return t;
  }
}

/// Classifies every node. In the two-symmetric scenario, nodes past the first
/// strongly fragmented node of their column (larger beta) are marked out of
/// range: their aggregates would need several strong peaks per class.
/// Label changes between neighbouring nodes of a column are bisected in 1/beta
/// to a quarter of the node spacing.
inline PhaseDiagram sweep_phase_diagram(const PhaseSweepSpec& spec) {
  if (spec.bias_nodes < 1 || spec.inv_beta_nodes < 2) throw DomainError("sweep: need >= 1 bias and >= 2 beta nodes");
  if (!(spec.inv_beta_lo > 0.0 && spec.inv_beta_hi > spec.inv_beta_lo)) throw DomainError("sweep: bad 1/beta range");
  if (spec.classes.empty()) throw DomainError("sweep: no classes");
  PhaseDiagram pd;
  pd.spec = spec;
  const double dinv = (spec.inv_beta_hi - spec.inv_beta_lo) / (spec.inv_beta_nodes - 1);
  const auto columns = static_cast<std::size_t>(spec.bias_nodes);
  std::vector<std::vector<PhaseNode>> nodes(columns);
  std::vector<std::vector<PhaseBoundary>> bounds(columns);
  parallel_for(columns, [&](std::size_t i) {
    const double bias = spec.bias_nodes == 1 ? spec.bias_lo
                                             : spec.bias_lo + (spec.bias_hi - spec.bias_lo) * static_cast<double>(i) /
                                                                  (spec.bias_nodes - 1);
    bool strong_seen = false;
    auto& col = nodes[i];
    for (int j = 0; j < spec.inv_beta_nodes; ++j) {
      PhaseNode node;
      node.bias = bias;
      node.inv_beta = spec.inv_beta_hi - j * dinv;
      if (strong_seen) {
        node.codes.assign(spec.classes.size(), ClassCode{});
        for (auto& c : node.codes) c.status = ClassCode::Status::out_of_range;
      } else {
        node.codes = classify_node(spec, bias, node.inv_beta, &node.aggregates);
        if (spec.scenario == Scenario::two_symmetric)
          for (const auto& c : node.codes) strong_seen = strong_seen || c.label() == FragmentationLabel::strongly_fragmented;
      }
      col.push_back(std::move(node));
    }
    if (!spec.refine) return;
    for (std::size_t k = 0; k + 1 < col.size(); ++k) {
      const std::string ca = joined_code(col[k].codes), cb = joined_code(col[k + 1].codes);
      if (ca == cb || col[k + 1].codes.front().status == ClassCode::Status::out_of_range) continue;
      PhaseBoundary pb{bias, col[k + 1].inv_beta, col[k].inv_beta, ca, cb};
      while (pb.inv_beta_hi - pb.inv_beta_lo > 0.25 * dinv) {
        const double mid = 0.5 * (pb.inv_beta_lo + pb.inv_beta_hi);
        if (joined_code(classify_node(spec, bias, mid)) == ca)
          pb.inv_beta_hi = mid;
        else
          pb.inv_beta_lo = mid;
      }
      bounds[i].push_back(pb);
    }
  });
  for (std::size_t i = 0; i < columns; ++i) {
    for (auto& n : nodes[i]) pd.nodes.push_back(std::move(n));
    for (auto& b : bounds[i]) pd.boundaries.push_back(std::move(b));
  }
  return pd;
}

// ---------------------------------------------------------------------------
// Counting argument.

/// Number of loyalty groups eta^(c) of each class across M markets.
struct FragmentationPattern {
  std::vector<int> eta;
  int markets = 3;

  int classes() const { return static_cast<int>(eta.size()); }
  int total() const { return std::accumulate(eta.begin(), eta.end(), 0); }

  void validate() const {
    if (markets < 1 || eta.empty()) throw DomainError("pattern needs M >= 1 and C >= 1");
    for (int e : eta)
      if (e < 1 || e > markets) throw DomainError("eta out of [1, M]");
  }

  friend bool operator==(const FragmentationPattern&, const FragmentationPattern&) = default;
};

enum class Feasibility { uniquely_determined, underdetermined, overdetermined };

inline const char* to_string(Feasibility f) {
  switch (f) {
    case Feasibility::uniquely_determined: return "uniquely-determined";
    case Feasibility::underdetermined: return "underdetermined";
    case Feasibility::overdetermined: return "overdetermined";
  }
  return "?";
}

/// Each class with eta groups fixes eta - 1 weights by balance conditions and
/// the M aggregates are the unknowns: eta_1 + ... + eta_C = M + C equations for
/// as many variables in a generic (symmetry-free) market set.
inline Feasibility counting_feasibility(const FragmentationPattern& p) {
  p.validate();
  const int need = p.markets + p.classes();
  if (p.total() == need) return Feasibility::uniquely_determined;
  return p.total() < need ? Feasibility::underdetermined : Feasibility::overdetermined;
}

/// Every class splitting over all M markets is uniquely determined iff
/// C M = M + C, i.e. M = C (M - 1).
inline bool full_fragmentation_determined(int markets, int classes) { return markets == classes * (markets - 1); }

/// Disjoint preferred-market sets need eta_1 + ... + eta_C <= M, which no
/// uniquely determined pattern satisfies (the sum is M + C).
inline bool disjoint_preferences_impossible(const FragmentationPattern& p) { return p.total() > p.markets; }

struct FeasiblePatterns {
  std::vector<FragmentationPattern> patterns;
  bool disjoint_impossible = true;  ///< raised for every listed pattern
};

inline FeasiblePatterns enumerate_feasible_patterns(int markets, int classes) {
  if (markets < 2 || classes < 1) throw DomainError("enumerate_feasible_patterns: need M >= 2 and C >= 1");
  FeasiblePatterns out;
  std::vector<int> eta(static_cast<std::size_t>(classes), 1);
  for (;;) {
    FragmentationPattern p{eta, markets};
    if (counting_feasibility(p) == Feasibility::uniquely_determined) {
      out.disjoint_impossible = out.disjoint_impossible && disjoint_preferences_impossible(p);
      out.patterns.push_back(std::move(p));
    }
    std::size_t k = 0;
    while (k < eta.size() && eta[k] == markets) eta[k++] = 1;
    if (k == eta.size()) break;
    ++eta[k];
  }
  std::sort(out.patterns.begin(), out.patterns.end(),
            [](const FragmentationPattern& a, const FragmentationPattern& b) { return a.eta > b.eta; });
  return out;
}

}  // namespace mktfrag
