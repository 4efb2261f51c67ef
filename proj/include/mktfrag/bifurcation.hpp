#pragma once

// Zeros of a 2-D drift field and their linear stability, plus the bisection
// primitive used by the threshold scans.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "error.hpp"
#include "theory.hpp"

namespace mktfrag {

enum class Stability { stable, saddle, unstable };

inline const char* to_string(Stability s) {
  switch (s) {
    case Stability::stable: return "stable";
    case Stability::saddle: return "saddle";
    case Stability::unstable: return "unstable";
  }
  return "?";
}

struct FixedPoint {
  Vec2 location = Vec2::Zero();
  std::size_t class_id = 0;
  Stability stability = Stability::stable;
  std::array<std::complex<double>, 2> eigenvalues{};
  double residual = 0.0;
};

struct FixedPointSearch {
  double box = 0.0;          ///< half-width L of [-L, L]^2; 0 = derive from the field
  int grid = 50;             ///< starts per axis
  double merge_tol = 1e-6;
  double root_tol = 1e-10;
  double fd_step = 1e-6;     ///< central-difference step of the classifying Jacobian
  int max_newton = 80;
};

struct FixedPointScan {
  std::vector<FixedPoint> points;
  std::size_t diverged_starts = 0;
};

inline std::array<std::complex<double>, 2> eigenvalues2(const Mat2& J) {
  const double tr = J.trace();
  const double det = J.determinant();
  const double disc = 0.25 * tr * tr - det;
  if (disc >= 0.0) {
    const double s = std::sqrt(disc);
    // Larger-magnitude root first, the other from det/root to avoid cancellation.
    const double big = 0.5 * tr + (tr >= 0.0 ? s : -s);
    const double small = big != 0.0 ? det / big : 0.0;
    std::array<std::complex<double>, 2> ev{std::complex<double>(big, 0.0), std::complex<double>(small, 0.0)};
    if (ev[0].real() > ev[1].real()) std::swap(ev[0], ev[1]);
    return ev;
  }
  const double im = std::sqrt(-disc);
  return {std::complex<double>(0.5 * tr, -im), std::complex<double>(0.5 * tr, im)};
}

inline Stability classify_eigenvalues(const std::array<std::complex<double>, 2>& ev) {
  const double a = ev[0].real(), b = ev[1].real();
  if (a < 0.0 && b < 0.0) return Stability::stable;
  if (a > 0.0 && b > 0.0) return Stability::unstable;
  return Stability::saddle;
}

/// Bound on the location of every zero of a market field: each component of
/// the drift is an expected jump minus the difference itself, and the jump is
/// bounded by the largest mean payoff.
inline double default_search_box(const MarketField& field) {
  double p = 0.0;
  for (const auto& m : field.moments()) p = std::max(p, std::abs(m.mean));
  return std::max(2.0 * p, 1e-3);
}

namespace detail {
template <DriftFieldLike F>
bool damped_newton(const F& field, Vec2& x, double tol, int max_iter) {
  Vec2 g = field.drift(x);
  for (int it = 0; it < max_iter; ++it) {
    if (!g.allFinite()) return false;
    if (g.lpNorm<Eigen::Infinity>() < tol) return true;
    const Mat2 J = drift_jacobian(field, x);
    const double det = J.determinant();
    if (!std::isfinite(det) || std::abs(det) < 1e-300) return false;
    const Vec2 step = J.partialPivLu().solve(-g);
    double lambda = 1.0;
    bool moved = false;
    for (int ls = 0; ls < 40; ++ls, lambda *= 0.5) {
      const Vec2 trial = x + lambda * step;
      const Vec2 gt = field.drift(trial);
      if (gt.allFinite() && gt.norm() < (1.0 - 1e-4 * lambda) * g.norm()) {
        x = trial;
        g = gt;
        moved = true;
        break;
      }
    }
    if (!moved) {
      // Newton direction failed to reduce |mu|; accept a full step only if we
      // are already essentially converged.
      return g.lpNorm<Eigen::Infinity>() < tol;
    }
  }
  return g.lpNorm<Eigen::Infinity>() < tol;
}
}  // namespace detail

template <DriftFieldLike F>
FixedPoint make_fixed_point(const F& field, const Vec2& x, double fd_step, std::size_t class_id = 0) {
  FixedPoint fp;
  fp.location = x;
  fp.class_id = class_id;
  fp.residual = field.drift(x).template lpNorm<Eigen::Infinity>();
  fp.eigenvalues = eigenvalues2(finite_difference_jacobian(field, x, fd_step));
  fp.stability = classify_eigenvalues(fp.eigenvalues);
  return fp;
}

/// Multi-start damped Newton from the centre of every grid cell, extra seeds
/// included. Roots closer than merge_tol are merged; results are sorted by
/// location so that the output is independent of start order.
template <DriftFieldLike F>
FixedPointScan find_fixed_points(const F& field, const FixedPointSearch& opt, std::span<const Vec2> seeds = {},
                                 std::size_t class_id = 0) {
  if (!(opt.box > 0.0)) throw DomainError("find_fixed_points: search box must be positive");
  FixedPointScan scan;
  std::vector<Vec2> roots;
  auto try_start = [&](Vec2 x) {
    if (!detail::damped_newton(field, x, opt.root_tol * 1e-3, opt.max_newton) &&
        !(field.drift(x).template lpNorm<Eigen::Infinity>() < opt.root_tol)) {
      ++scan.diverged_starts;
      return;
    }
    if (x.lpNorm<Eigen::Infinity>() > 1.5 * opt.box) return;
    for (const auto& r : roots)
      if ((r - x).norm() < opt.merge_tol) return;
    roots.push_back(x);
  };
  for (const auto& s : seeds) try_start(s);
  const double h = 2.0 * opt.box / opt.grid;
  for (int i = 0; i < opt.grid; ++i)
    for (int j = 0; j < opt.grid; ++j) try_start(Vec2(-opt.box + (i + 0.5) * h, -opt.box + (j + 0.5) * h));
  std::sort(roots.begin(), roots.end(), [](const Vec2& a, const Vec2& b) {
    return a[0] != b[0] ? a[0] < b[0] : a[1] < b[1];
  });
  for (const auto& r : roots) scan.points.push_back(make_fixed_point(field, r, opt.fd_step, class_id));
  return scan;
}

inline FixedPointScan find_fixed_points(const MarketField& field, FixedPointSearch opt = {}, std::span<const Vec2> seeds = {},
                                        std::size_t class_id = 0) {
  if (!(opt.box > 0.0)) opt.box = default_search_box(field);
  return find_fixed_points<MarketField>(field, opt, seeds, class_id);
}

inline std::size_t count_with(const std::vector<FixedPoint>& pts, Stability s) {
  return static_cast<std::size_t>(std::count_if(pts.begin(), pts.end(), [s](const FixedPoint& p) { return p.stability == s; }));
}

/// Fixed points that are not repellers: attractors plus saddles.
inline std::size_t non_repelling_count(const std::vector<FixedPoint>& pts) {
  return pts.size() - count_with(pts, Stability::unstable);
}

/// Index of the market an agent at `delta` chooses most often (0-based).
inline std::size_t preferred_market(const Vec2& delta) {
  const std::array<double, 3> a{0.0, -delta[0], -delta[1]};
  return static_cast<std::size_t>(std::max_element(a.begin(), a.end()) - a.begin());
}

struct Bracket {
  double inv_beta_lo = 0.0;  ///< side with the larger beta
  double inv_beta_hi = 0.0;
  bool found = false;

  double inv_beta() const { return 0.5 * (inv_beta_lo + inv_beta_hi); }
  double beta() const { return 1.0 / inv_beta(); }
  double width() const { return inv_beta_hi - inv_beta_lo; }
};

/// Bisection in 1/beta on a boolean monitor that differs between the two ends
/// of [inv_lo, inv_hi]. Stops at bracket width `width`.
inline Bracket bisect_inverse_beta(double inv_lo, double inv_hi, const std::function<bool(double beta)>& monitor,
                                   double width = 1e-4) {
  Bracket b{inv_lo, inv_hi, false};
  const bool at_lo = monitor(1.0 / inv_lo);
  const bool at_hi = monitor(1.0 / inv_hi);
  if (at_lo == at_hi) return b;
  while (b.inv_beta_hi - b.inv_beta_lo > width) {
    const double mid = 0.5 * (b.inv_beta_lo + b.inv_beta_hi);
    if (monitor(1.0 / mid) == at_lo)
      b.inv_beta_lo = mid;
    else
      b.inv_beta_hi = mid;
  }
  b.found = true;
  return b;
}

}  // namespace mktfrag
