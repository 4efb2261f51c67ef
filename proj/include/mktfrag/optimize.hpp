#pragma once

// BFGS with a strong-Wolfe line search (Nocedal & Wright, Alg. 3.5/3.6).

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <limits>

namespace mktfrag {

struct BfgsOptions {
  double gradient_tol = 1e-10;  ///< stop when ||g||_inf falls below this
  double value_tol = 0.0;       ///< stop when the relative decrease falls below this (0 = off)
  int max_iterations = 2000;
  double c1 = 1e-4;
  double c2 = 0.9;
};

struct BfgsResult {
  Eigen::VectorXd x;
  double value = 0.0;
  double gradient_norm = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Objective writes the gradient into its second argument and returns f(x).
using Objective = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>;

namespace detail {

struct LinePoint {
  double a, f, d;  // step, value, directional derivative
};

inline double cubic_min(const LinePoint& lo, const LinePoint& hi) {
  const double d1 = lo.d + hi.d - 3.0 * (lo.f - hi.f) / (lo.a - hi.a);
  const double disc = d1 * d1 - lo.d * hi.d;
  if (disc >= 0.0) {
    const double d2 = std::copysign(std::sqrt(disc), hi.a - lo.a);
    const double t = hi.a - (hi.a - lo.a) * (hi.d + d2 - d1) / (hi.d - lo.d + 2.0 * d2);
    const double a = std::min(lo.a, hi.a), b = std::max(lo.a, hi.a);
    if (std::isfinite(t) && t > a + 0.1 * (b - a) && t < b - 0.1 * (b - a)) return t;
  }
  return 0.5 * (lo.a + hi.a);
}

}  // namespace detail

inline BfgsResult minimize_bfgs(const Objective& fn, Eigen::VectorXd x0, const BfgsOptions& opt = {}) {
  const Eigen::Index n = x0.size();
  BfgsResult res;
  res.x = std::move(x0);
  Eigen::VectorXd g(n);
  double f = fn(res.x, g);
  Eigen::MatrixXd H = Eigen::MatrixXd::Identity(n, n);
  bool scaled = false;
  Eigen::VectorXd gnew(n), xnew(n);

  for (res.iterations = 0; res.iterations < opt.max_iterations; ++res.iterations) {
    res.gradient_norm = g.lpNorm<Eigen::Infinity>();
    if (!std::isfinite(f) || !g.allFinite()) break;
    if (res.gradient_norm < opt.gradient_tol) {
      res.converged = true;
      break;
    }
    Eigen::VectorXd p = -H * g;
    double d0 = g.dot(p);
    if (!(d0 < 0.0)) {
      H.setIdentity();
      p = -g;
      d0 = g.dot(p);
    }

    auto eval = [&](double a) {
      xnew = res.x + a * p;
      const double fa = fn(xnew, gnew);
      return detail::LinePoint{a, fa, std::isfinite(fa) ? gnew.dot(p) : std::numeric_limits<double>::quiet_NaN()};
    };

    const detail::LinePoint zero{0.0, f, d0};
    detail::LinePoint prev = zero, accepted{0.0, f, d0};
    bool ok = false;
    double a = 1.0;
    auto zoom = [&](detail::LinePoint lo, detail::LinePoint hi) {
      for (int k = 0; k < 60; ++k) {
        const double aj = detail::cubic_min(lo, hi);
        const auto pj = eval(aj);
        if (!std::isfinite(pj.f) || pj.f > f + opt.c1 * aj * d0 || pj.f >= lo.f) {
          hi = pj;
        } else {
          if (std::abs(pj.d) <= -opt.c2 * d0) {
            accepted = pj;
            return true;
          }
          if (pj.d * (hi.a - lo.a) >= 0.0) hi = lo;
          lo = pj;
        }
        if (std::abs(hi.a - lo.a) < 1e-16 * std::max(1.0, std::abs(lo.a))) break;
      }
      if (lo.a > 0.0 && lo.f < f) {
        accepted = eval(lo.a);
        return true;
      }
      return false;
    };
    for (int k = 0; k < 40; ++k) {
      const auto cur = eval(a);
      if (!std::isfinite(cur.f) || cur.f > f + opt.c1 * a * d0 || (k > 0 && cur.f >= prev.f)) {
        ok = zoom(prev, cur);
        break;
      }
      if (std::abs(cur.d) <= -opt.c2 * d0) {
        accepted = cur;
        ok = true;
        break;
      }
      if (cur.d >= 0.0) {
        ok = zoom(cur, prev);
        break;
      }
      prev = cur;
      a *= 2.0;
    }
    if (!ok) break;

    const Eigen::VectorXd s = accepted.a * p;
    // Recompute the gradient at the accepted point (zoom may have evaluated others since).
    xnew = res.x + s;
    const double fnew = fn(xnew, gnew);
    const Eigen::VectorXd y = gnew - g;
    const double sy = s.dot(y);
    const double decrease = f - fnew;
    res.x = xnew;
    g = gnew;
    const double fold = f;
    f = fnew;
    if (sy > 1e-300) {
      if (!scaled) {
        H *= sy / y.squaredNorm();
        scaled = true;
      }
      const double rho = 1.0 / sy;
      const Eigen::VectorXd Hy = H * y;
      H += (rho * rho * y.dot(Hy) + rho) * s * s.transpose() - rho * (Hy * s.transpose() + s * Hy.transpose());
    }
    if (opt.value_tol > 0.0 && decrease <= opt.value_tol * std::max(1.0, std::abs(fold))) {
      res.gradient_norm = g.lpNorm<Eigen::Infinity>();
      res.converged = res.gradient_norm < opt.gradient_tol;
      break;
    }
  }
  res.value = f;
  res.gradient_norm = g.lpNorm<Eigen::Infinity>();
  if (res.gradient_norm < opt.gradient_tol) res.converged = true;
  return res;
}

}  // namespace mktfrag
