#pragma once

// Low-noise transition analysis: discretised Onsager-Machlup action,
// minimal-action paths from an attractor to a saddle, the saddle-attractor
// connectivity of a flow, and peak weights from the balance of forward and
// backward transition rates.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "bifurcation.hpp"
#include "error.hpp"
#include "optimize.hpp"
#include "theory.hpp"

namespace mktfrag {

/// Uniformly time-discretised path; states.front() and states.back() are the
/// pinned endpoints.
struct Path {
  std::vector<Vec2> states;
  double total_time = 10.0;

  std::size_t steps() const noexcept { return states.empty() ? 0 : states.size() - 1; }
  double dt() const { return total_time / static_cast<double>(steps()); }

  static Path straight_line(const Vec2& from, const Vec2& to, std::size_t steps, double total_time) {
    Path p;
    p.total_time = total_time;
    p.states.reserve(steps + 1);
    for (std::size_t k = 0; k <= steps; ++k) {
      const double s = static_cast<double>(k) / static_cast<double>(steps);
      p.states.push_back((1.0 - s) * from + s * to);
    }
    return p;
  }
};

struct ActionOptions {
  std::size_t steps = 10;     ///< K
  double total_time = 10.0;   ///< T
  double gradient_tol = 1e-8;
  int max_iterations = 5000;
  double max_condition = 1e12;
};

struct ActionResult {
  double action = 0.0;
  Path path;                  ///< uphill segment, attractor -> saddle
  std::vector<Vec2> downhill; ///< relaxation segment, saddle -> destination (zero action)
  bool converged = false;
  int iterations = 0;
  double gradient_norm = 0.0;
  bool retried = false;
};

namespace detail {

inline Mat2 checked_inverse(const Mat2& s, double max_condition) {
  const double a = s(0, 0), d = s(1, 1), b = 0.5 * (s(0, 1) + s(1, 0));
  const double mean = 0.5 * (a + d);
  const double rad = std::sqrt(0.25 * (a - d) * (a - d) + b * b);
  const double lmax = mean + rad;
  const double lmin = (a * d - b * b) / lmax;
  if (!(lmax > 0.0) || !(lmin > 0.0) || lmax / lmin > max_condition || !std::isfinite(lmax))
    throw SingularCovarianceError("covariance matrix is singular or ill-conditioned along the path");
  Mat2 inv;
  inv << d, -b, -b, a;
  return inv / (a * d - b * b);
}

/// Action of the path whose interior states are packed in `interior`
/// (2(K-1) coordinates); optionally accumulates the gradient.
template <DriftFieldLike F>
double action_with_gradient(const F& field, const Vec2& from, const Vec2& to, const Eigen::VectorXd& interior,
                            std::size_t steps, double total_time, Eigen::VectorXd* grad, double max_condition) {
  const double dt = total_time / static_cast<double>(steps);
  auto state = [&](std::size_t k) -> Vec2 {
    if (k == 0) return from;
    if (k == steps) return to;
    return interior.segment<2>(2 * static_cast<Eigen::Index>(k - 1));
  };
  if (grad) grad->setZero(interior.size());
  double total = 0.0;
  for (std::size_t k = 0; k < steps; ++k) {
    const Vec2 x0 = state(k), x1 = state(k + 1);
    const Vec2 mid = 0.5 * (x0 + x1);
    const Vec2 v = (x1 - x0) / dt;
    const Vec2 e = v - field.drift(mid);
    const Mat2 w = checked_inverse(field.covariance(mid), max_condition);
    const Vec2 g = w * e;
    total += 0.5 * e.dot(g) * dt;
    if (grad) {
      const Mat2 J = drift_jacobian(field, mid);
      const auto dS = covariance_gradient(field, mid);
      Vec2 dmid = -J.transpose() * g;
      for (int i = 0; i < 2; ++i) dmid[i] -= 0.5 * g.dot(dS[i] * g);
      // d(segment)/d x_k and d/d x_{k+1}, each multiplied by dt.
      const Vec2 d0 = (-g / dt + 0.5 * dmid) * dt;
      const Vec2 d1 = (g / dt + 0.5 * dmid) * dt;
      if (k >= 1) grad->segment<2>(2 * static_cast<Eigen::Index>(k - 1)) += d0;
      if (k + 1 < steps) grad->segment<2>(2 * static_cast<Eigen::Index>(k)) += d1;
    }
  }
  return total;
}

}  // namespace detail

/// S = sum_k 1/2 (v_k - mu(xbar_k))^T Sigma^{-1}(xbar_k) (v_k - mu(xbar_k)) dt
/// with midpoint states xbar_k and forward-difference velocities v_k.
template <DriftFieldLike F>
double path_action(const Path& path, const F& field, double max_condition = 1e12) {
  if (path.steps() < 1) throw DomainError("path_action: path needs at least two states");
  const std::size_t K = path.steps();
  Eigen::VectorXd interior(2 * static_cast<Eigen::Index>(K > 0 ? K - 1 : 0));
  for (std::size_t k = 1; k < K; ++k) interior.segment<2>(2 * static_cast<Eigen::Index>(k - 1)) = path.states[k];
  return detail::action_with_gradient(field, path.states.front(), path.states.back(), interior, K, path.total_time,
                                      nullptr, max_condition);
}

/// Gradient of the discretised action with respect to the interior states.
template <DriftFieldLike F>
Eigen::VectorXd path_action_gradient(const Path& path, const F& field, double max_condition = 1e12) {
  const std::size_t K = path.steps();
  Eigen::VectorXd interior(2 * static_cast<Eigen::Index>(K - 1)), g;
  for (std::size_t k = 1; k < K; ++k) interior.segment<2>(2 * static_cast<Eigen::Index>(k - 1)) = path.states[k];
  detail::action_with_gradient(field, path.states.front(), path.states.back(), interior, K, path.total_time, &g,
                               max_condition);
  return g;
}

/// Integrates xdot = mu(x) with classical RK4.
template <DriftFieldLike F>
std::vector<Vec2> relax(const F& field, Vec2 x, double dt, std::size_t steps) {
  std::vector<Vec2> out;
  out.reserve(steps + 1);
  out.push_back(x);
  for (std::size_t n = 0; n < steps; ++n) {
    const Vec2 k1 = field.drift(x);
    const Vec2 k2 = field.drift(x + 0.5 * dt * k1);
    const Vec2 k3 = field.drift(x + 0.5 * dt * k2);
    const Vec2 k4 = field.drift(x + dt * k3);
    x += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    out.push_back(x);
  }
  return out;
}

/// Minimises the discretised action over the interior states with both
/// endpoints pinned, starting from the straight line. On failure one retry is
/// made from a deterministically perturbed start; the flag is never hidden.
template <DriftFieldLike F>
ActionResult minimize_path_action(const Vec2& from, const Vec2& to, const F& field, const ActionOptions& opt = {}) {
  if (opt.steps < 2) throw DomainError("minimize_action: need K >= 2");
  if (!(opt.total_time > 0.0)) throw DomainError("minimize_action: total time must be > 0");
  const std::size_t K = opt.steps;
  Objective obj = [&](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    try {
      return detail::action_with_gradient(field, from, to, x, K, opt.total_time, &g, opt.max_condition);
    } catch (const SingularCovarianceError&) {
      g.setZero(x.size());
      return std::numeric_limits<double>::infinity();
    }
  };
  auto pack = [&](const Path& p) {
    Eigen::VectorXd x(2 * static_cast<Eigen::Index>(K - 1));
    for (std::size_t k = 1; k < K; ++k) x.segment<2>(2 * static_cast<Eigen::Index>(k - 1)) = p.states[k];
    return x;
  };
  auto unpack = [&](const Eigen::VectorXd& x) {
    Path p = Path::straight_line(from, to, K, opt.total_time);
    for (std::size_t k = 1; k < K; ++k) p.states[k] = x.segment<2>(2 * static_cast<Eigen::Index>(k - 1));
    return p;
  };

  BfgsOptions bo;
  bo.gradient_tol = opt.gradient_tol;
  bo.max_iterations = opt.max_iterations;

  const Path line = Path::straight_line(from, to, K, opt.total_time);
  // Path action must be finite at the start.
  (void)path_action(line, field, opt.max_condition);
  auto run = minimize_bfgs(obj, pack(line), bo);
  ActionResult res;
  res.retried = false;
  if (!run.converged) {
    Path bent = line;
    const Vec2 dir = to - from;
    const Vec2 normal(-dir[1], dir[0]);
    for (std::size_t k = 1; k < K; ++k)
      bent.states[k] += 0.1 * std::sin(std::numbers::pi * static_cast<double>(k) / static_cast<double>(K)) * normal;
    auto second = minimize_bfgs(obj, pack(bent), bo);
    res.retried = true;
    if (second.converged || second.value < run.value) run = std::move(second);
  }
  res.action = run.value;
  res.path = unpack(run.x);
  res.converged = run.converged;
  res.iterations = run.iterations;
  res.gradient_norm = run.gradient_norm;
  return res;
}

/// Minimal action from an attractor to a saddle of the same field.
template <DriftFieldLike F>
ActionResult minimize_action(const FixedPoint& from, const FixedPoint& saddle, const F& field,
                             const ActionOptions& opt = {}, double root_tol = 1e-8) {
  if (field.drift(from.location).template lpNorm<Eigen::Infinity>() > root_tol ||
      field.drift(saddle.location).template lpNorm<Eigen::Infinity>() > root_tol)
    throw DomainError("minimize_action: endpoints must be zeros of the drift");
  if (saddle.stability != Stability::saddle) throw DomainError("minimize_action: destination must be a saddle");
  return minimize_path_action(from.location, saddle.location, field, opt);
}

/// The two attractors reached by relaxing from a saddle along its unstable
/// direction, as indices into `attractors` (empty if a branch does not settle).
struct SaddleConnection {
  std::size_t saddle = 0;
  std::optional<std::size_t> ends[2];
  std::vector<Vec2> branch[2];
};

template <DriftFieldLike F>
SaddleConnection connect_saddle(const F& field, const std::vector<FixedPoint>& attractors, std::size_t saddle_index,
                                const FixedPoint& saddle, double eps = 1e-4) {
  SaddleConnection sc;
  sc.saddle = saddle_index;
  const Mat2 J = drift_jacobian(field, saddle.location);
  Eigen::EigenSolver<Mat2> es(J);
  int iu = es.eigenvalues()[0].real() > es.eigenvalues()[1].real() ? 0 : 1;
  Vec2 v = es.eigenvectors().col(iu).real().normalized();
  // An attractor captures the branch once the branch is inside a ball a
  // quarter of the way to the attractor's nearest other fixed point.
  std::vector<double> capture(attractors.size(), std::numeric_limits<double>::infinity());
  for (std::size_t a = 0; a < attractors.size(); ++a) {
    capture[a] = 0.25 * (attractors[a].location - saddle.location).norm();
    for (std::size_t b = 0; b < attractors.size(); ++b)
      if (b != a) capture[a] = std::min(capture[a], 0.25 * (attractors[a].location - attractors[b].location).norm());
  }
  // Near a bifurcation the slowest rate can be tiny, so the time budget scales with it.
  double slow = std::abs(es.eigenvalues()[iu].real());
  for (const auto& a : attractors)
    for (const auto& ev : a.eigenvalues) slow = std::min(slow, std::abs(ev.real()));
  const double dt = 0.05;
  const int chunks = static_cast<int>(std::ceil(std::max(2000.0, 60.0 / std::max(slow, 1e-6)) / (50 * dt)));
  for (int side = 0; side < 2; ++side) {
    Vec2 x = saddle.location + (side == 0 ? eps : -eps) * v;
    std::vector<Vec2> branch{saddle.location};
    for (int chunk = 0; chunk < chunks && !sc.ends[side]; ++chunk) {
      auto seg = relax(field, x, dt, 50);
      x = seg.back();
      branch.insert(branch.end(), seg.begin() + 1, seg.end());
      for (std::size_t a = 0; a < attractors.size(); ++a)
        if ((attractors[a].location - x).norm() < capture[a]) {
          sc.ends[side] = a;
          break;
        }
      if (!x.allFinite()) break;
    }
    if (sc.ends[side]) branch.push_back(attractors[*sc.ends[side]].location);
    sc.branch[side] = std::move(branch);
  }
  return sc;
}

struct Transition {
  std::size_t from = 0;   ///< attractor index
  std::size_t to = 0;     ///< attractor index
  std::size_t saddle = 0; ///< saddle index
  ActionResult result;
};

/// Attractors, saddles, and the minimal uphill action for every
/// attractor -> saddle -> attractor transition of one flow.
struct TransitionAnalysis {
  std::vector<FixedPoint> attractors;
  std::vector<FixedPoint> saddles;
  std::vector<SaddleConnection> connections;
  std::vector<Transition> transitions;
  Eigen::MatrixXd action;  ///< action(i, j) = least S*_{i->j}, +inf if no saddle joins them
  bool all_converged = true;
};

template <DriftFieldLike F>
TransitionAnalysis analyse_transitions(const F& field, const std::vector<FixedPoint>& points,
                                       const ActionOptions& opt = {}) {
  TransitionAnalysis ta;
  for (const auto& p : points) {
    if (p.stability == Stability::stable) ta.attractors.push_back(p);
    if (p.stability == Stability::saddle) ta.saddles.push_back(p);
  }
  const auto n = static_cast<Eigen::Index>(ta.attractors.size());
  ta.action = Eigen::MatrixXd::Constant(n, n, std::numeric_limits<double>::infinity());
  for (Eigen::Index i = 0; i < n; ++i) ta.action(i, i) = 0.0;
  for (std::size_t s = 0; s < ta.saddles.size(); ++s) {
    auto sc = connect_saddle(field, ta.attractors, s, ta.saddles[s]);
    if (sc.ends[0] && sc.ends[1] && *sc.ends[0] != *sc.ends[1]) {
      for (int side = 0; side < 2; ++side) {
        const std::size_t a = *sc.ends[side], b = *sc.ends[1 - side];
        Transition tr{a, b, s, minimize_action(ta.attractors[a], ta.saddles[s], field, opt)};
        tr.result.downhill = sc.branch[1 - side];
        ta.all_converged = ta.all_converged && tr.result.converged;
        auto ia = static_cast<Eigen::Index>(a), ib = static_cast<Eigen::Index>(b);
        ta.action(ia, ib) = std::min(ta.action(ia, ib), tr.result.action);
        ta.transitions.push_back(std::move(tr));
      }
    }
    ta.connections.push_back(std::move(sc));
  }
  return ta;
}

enum class FragmentationLabel { unfragmented, weakly_fragmented, strongly_fragmented, undetermined };

inline const char* to_string(FragmentationLabel l) {
  switch (l) {
    case FragmentationLabel::unfragmented: return "unfragmented";
    case FragmentationLabel::weakly_fragmented: return "weakly fragmented";
    case FragmentationLabel::strongly_fragmented: return "strongly fragmented";
    case FragmentationLabel::undetermined: return "undetermined";
  }
  return "?";
}

struct PeakClassification {
  std::vector<double> quasi_potential;  ///< V_i - min V; weight_i ~ exp(-V_i / r)
  std::vector<bool> large;
  double epsilon = 0.0;
  FragmentationLabel label = FragmentationLabel::undetermined;
};

/// Threshold separating order-one peaks from exponentially small ones.
inline double large_peak_threshold(double r) { return std::max(10.0 * r, 1e-3); }

/// Minimum total action over spanning in-trees rooted at each attractor
/// (Freidlin's W-graphs). With two attractors this is V_1 - V_2 = S_21 - S_12,
/// i.e. omega_1/omega_2 ~ exp((S_12 - S_21)/r).
inline std::vector<double> quasi_potentials(const Eigen::MatrixXd& action) {
  const auto n = static_cast<std::size_t>(action.rows());
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> best(n, inf);
  if (n == 0) return best;
  if (n > 8) throw DomainError("quasi_potentials: too many attractors for exhaustive W-graph search");
  std::vector<std::size_t> next(n, 0);
  for (std::size_t root = 0; root < n; ++root) {
    // Enumerate next[j] for every j != root; keep assignments without cycles.
    std::vector<std::size_t> others;
    for (std::size_t j = 0; j < n; ++j)
      if (j != root) others.push_back(j);
    std::function<void(std::size_t, double)> rec = [&](std::size_t idx, double cost) {
      if (cost >= best[root]) return;
      if (idx == others.size()) {
        for (std::size_t j : others) {  // every node must reach the root
          std::size_t cur = j;
          for (std::size_t hop = 0; hop <= n && cur != root; ++hop) cur = next[cur];
          if (cur != root) return;
        }
        best[root] = cost;
        return;
      }
      const std::size_t j = others[idx];
      for (std::size_t k = 0; k < n; ++k) {
        if (k == j) continue;
        const double c = action(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k));
        if (!std::isfinite(c)) continue;
        next[j] = k;
        rec(idx + 1, cost + c);
      }
    };
    rec(0, 0.0);
  }
  const double vmin = *std::min_element(best.begin(), best.end());
  if (std::isfinite(vmin))
    for (double& v : best) v -= vmin;
  return best;
}

/// Peaks whose quasi-potential deficit reaches epsilon are exponentially small;
/// the rest are order one.
inline PeakClassification classify_peaks(const Eigen::MatrixXd& action, double r) {
  PeakClassification pc;
  pc.epsilon = large_peak_threshold(r);
  pc.quasi_potential = quasi_potentials(action);
  const std::size_t n = pc.quasi_potential.size();
  if (n == 0) return pc;
  bool finite = true;
  for (double v : pc.quasi_potential) finite = finite && std::isfinite(v);
  if (!finite) return pc;  // disconnected transition graph: undetermined
  std::size_t large = 0;
  for (double v : pc.quasi_potential) {
    const bool big = v < pc.epsilon * (1.0 - 1e-9);
    pc.large.push_back(big);
    large += big ? 1 : 0;
  }
  if (large >= 2)
    pc.label = FragmentationLabel::strongly_fragmented;
  else if (n > 1)
    pc.label = FragmentationLabel::weakly_fragmented;
  else
    pc.label = FragmentationLabel::unfragmented;
  return pc;
}

}  // namespace mktfrag
