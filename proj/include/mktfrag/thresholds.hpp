#pragma once

// Critical intensities of choice: bisection in 1/beta on boolean monitors of
// the fixed-point structure.

#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "bifurcation.hpp"
#include "error.hpp"
#include "fw_action.hpp"
#include "theory.hpp"

namespace mktfrag {

enum class ThresholdKind { fp_count_change, stability_change };

inline const char* to_string(ThresholdKind k) {
  return k == ThresholdKind::fp_count_change ? "fp-count-change" : "stability-change";
}

struct ThresholdMonitor {
  std::string name;
  ThresholdKind kind = ThresholdKind::fp_count_change;
  std::function<bool(double beta)> holds;
};

struct Threshold {
  std::string name;
  ThresholdKind kind = ThresholdKind::fp_count_change;
  Bracket bracket;  ///< found == false: no change in the scanned range
};

struct ThresholdReport {
  std::vector<Threshold> thresholds;

  const Threshold& at(const std::string& name) const {
    for (const auto& t : thresholds)
      if (t.name == name) return t;
    throw DomainError("no threshold named " + name);
  }
};

/// Walks 1/beta down from inv_hi to inv_lo in `steps` intervals and bisects the
/// first interval over which each monitor changes value, to width `width`.
inline ThresholdReport scan_thresholds(const std::vector<ThresholdMonitor>& monitors, double inv_lo, double inv_hi,
                                       int steps = 40, double width = 1e-4) {
  if (!(inv_lo > 0.0 && inv_hi > inv_lo) || steps < 1) throw DomainError("scan_thresholds: bad 1/beta range");
  ThresholdReport rep;
  for (const auto& m : monitors) {
    Threshold t{m.name, m.kind, {inv_lo, inv_hi, false}};
    double prev_inv = inv_hi;
    bool prev = m.holds(1.0 / inv_hi);
    for (int k = 1; k <= steps; ++k) {
      const double inv = inv_hi - (inv_hi - inv_lo) * k / steps;
      const bool cur = m.holds(1.0 / inv);
      if (cur != prev) {
        t.bracket = bisect_inverse_beta(inv, prev_inv, m.holds, width);
        break;
      }
      prev = cur;
      prev_inv = inv;
    }
    rep.thresholds.push_back(std::move(t));
  }
  return rep;
}

/// Field of a trader facing three fair markets with one buyer per seller.
inline MarketField fair_market_field(double beta, const OrderDistribution& dist = {}, double p_buy = 0.8) {
  const std::vector<MarketSpec> m(3, MarketSpec{0.5});
  const std::array<double, 3> f{1.0, 1.0, 1.0};
  return MarketField::from_model(m, f, TraderClassSpec{p_buy, beta, 0.01, 0}, dist);
}

namespace detail {
inline bool has_attractor_in_zone(const std::vector<FixedPoint>& pts, std::size_t zone, bool exclude_origin) {
  for (const auto& p : pts)
    if (p.stability == Stability::stable && preferred_market(p.location) == zone &&
        !(exclude_origin && p.location.lpNorm<Eigen::Infinity>() < 1e-6))
      return true;
  return false;
}

inline bool has_centre_attractor(const std::vector<FixedPoint>& pts) {
  for (const auto& p : pts)
    if (p.stability == Stability::stable && p.location.lpNorm<Eigen::Infinity>() < 1e-6) return true;
  return false;
}
}  // namespace detail

/// Three fair markets: outer pair creation per zone (beta_c), the outer
/// attractors overtaking the centre in quasi-potential (beta_c'), and the
/// loss of stability of the centre (beta_c'').
inline ThresholdReport fair_market_thresholds(const OrderDistribution& dist = {}, double inv_lo = 0.20,
                                              double inv_hi = 0.30, double width = 1e-4, int steps = 40,
                                              double p_buy = 0.8) {
  std::vector<ThresholdMonitor> mon;
  for (std::size_t z = 0; z < 3; ++z)
    mon.push_back({"beta_c/market" + std::to_string(z + 1), ThresholdKind::fp_count_change, [=](double beta) {
                     return detail::has_attractor_in_zone(find_fixed_points(fair_market_field(beta, dist, p_buy)).points, z, true);
                   }});
  mon.push_back({"beta_c'", ThresholdKind::stability_change, [=](double beta) {
                   const auto field = fair_market_field(beta, dist, p_buy);
                   const auto ta = analyse_transitions(field, find_fixed_points(field).points);
                   if (ta.attractors.size() < 2) return false;
                   const auto v = quasi_potentials(ta.action);
                   for (std::size_t a = 0; a < ta.attractors.size(); ++a)
                     if (ta.attractors[a].location.lpNorm<Eigen::Infinity>() < 1e-6) return v[a] > 0.0;
                   return true;
                 }});
  mon.push_back({"beta_c''", ThresholdKind::stability_change, [=](double beta) {
                   return !detail::has_centre_attractor(find_fixed_points(fair_market_field(beta, dist, p_buy)).points);
                 }});
  return scan_thresholds(mon, inv_lo, inv_hi, steps, width);
}

/// Appearance of an attractor of class `c` in the preference zone of `market`
/// (0-based) at the homogeneous-population aggregates.
inline ThresholdMonitor peak_appearance_monitor(std::function<ModelSpec(double beta)> model_at, std::size_t c,
                                                std::size_t market) {
  return {"class" + std::to_string(c + 1) + "/market" + std::to_string(market + 1), ThresholdKind::fp_count_change,
          [model_at = std::move(model_at), c, market](double beta) {
            const ModelSpec model = model_at(beta);
            const auto sol = homogeneous_fixed_point(model);
            const auto field = class_field(model, c, sol.aggregates);
            return detail::has_attractor_in_zone(find_fixed_points(field).points, market, false);
          }};
}

}  // namespace mktfrag
