#pragma once

// Large-population description of the learning dynamics for three markets:
// payoff moments of a trader at a market with a given buyer/seller ratio, the
// drift and noise covariance of the attraction differences
// (dA_2, dA_3) = (A_1 - A_2, A_1 - A_3), market aggregates induced by the
// classes' choice probabilities, and the homogeneous-population dynamics.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include "auction.hpp"
#include "error.hpp"
#include "learning.hpp"

namespace mktfrag {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;
using Vec3 = Eigen::Vector3d;

inline constexpr std::size_t kMarkets = 3;

inline double normal_pdf(double z) { return std::exp(-0.5 * z * z) * (0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2); }
inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

/// Mean and second moment of the per-round score of a trader who chose a
/// market, including rounds in which the trader did not trade (score 0).
struct PayoffMoments {
  double mean = 0.0;
  double second = 0.0;
};

/// Large-N clearing price mu_a + theta (mu_b - mu_a).
inline double limit_price(const MarketSpec& market, const OrderDistribution& dist) {
  return dist.mu_ask + market.theta * (dist.mu_bid - dist.mu_ask);
}

struct ValidityProbabilities {
  double bid = 0.0;  ///< P(b >= pi)
  double ask = 0.0;  ///< P(a <= pi)
};

inline ValidityProbabilities validity_probabilities(const MarketSpec& market, const OrderDistribution& dist) {
  const double pi = limit_price(market, dist);
  return {normal_cdf((dist.mu_bid - pi) / dist.sigma_bid), normal_cdf((pi - dist.mu_ask) / dist.sigma_ask)};
}

/// Moments for a single role. With f buyers per seller, valid bids and asks
/// arrive in ratio f q_b : q_s; the short side always trades and the long side
/// trades with probability short/long.
inline PayoffMoments role_payoff_moments(Role role, const MarketSpec& market, double f, const OrderDistribution& dist) {
  if (!(f > 0.0) || !std::isfinite(f)) throw DomainError("payoff_moments: f must be finite and > 0");
  const double pi = limit_price(market, dist);
  const auto q = validity_probabilities(market, dist);
  // Partial moments E[(X - pi)^k 1{X beyond pi}] of a Gaussian order price.
  const double gap = role == Role::buyer ? dist.mu_bid - pi : pi - dist.mu_ask;
  const double sigma = role == Role::buyer ? dist.sigma_bid : dist.sigma_ask;
  const double z = gap / sigma;
  const double phi = normal_pdf(z);
  const double Phi = normal_cdf(z);
  const double m1 = sigma * phi + gap * Phi;
  const double m2 = (gap * gap + sigma * sigma) * Phi + gap * sigma * phi;
  const double valid_ratio = f * q.bid / q.ask;  // valid bids per valid ask
  const double trade = role == Role::buyer ? std::min(1.0, 1.0 / valid_ratio) : std::min(1.0, valid_ratio);
  return {m1 * trade, m2 * trade};
}

inline PayoffMoments payoff_moments(const TraderClassSpec& cls, const MarketSpec& market, double f,
                                    const OrderDistribution& dist) {
  const auto b = role_payoff_moments(Role::buyer, market, f, dist);
  const auto s = role_payoff_moments(Role::seller, market, f, dist);
  return {cls.p_buy * b.mean + (1.0 - cls.p_buy) * s.mean, cls.p_buy * b.second + (1.0 - cls.p_buy) * s.second};
}

/// Minimal interface of a 2-D stochastic flow: drift and noise covariance.
template <typename F>
concept DriftFieldLike = requires(const F& field, const Vec2& x) {
  { field.drift(x) } -> std::convertible_to<Vec2>;
  { field.covariance(x) } -> std::convertible_to<Mat2>;
};

/// Fields that also supply analytic derivatives.
template <typename F>
concept DifferentiableField = DriftFieldLike<F> && requires(const F& field, const Vec2& x) {
  { field.drift_jacobian(x) } -> std::convertible_to<Mat2>;
  { field.covariance_gradient(x) } -> std::convertible_to<std::array<Mat2, 2>>;
};

/// Drift Jacobian d mu_i / d x_j; central differences when the field has no
/// analytic version.
template <DriftFieldLike F>
Mat2 drift_jacobian(const F& field, const Vec2& x, double h = 1e-6) {
  if constexpr (DifferentiableField<F>) {
    return field.drift_jacobian(x);
  } else {
    Mat2 J;
    for (int j = 0; j < 2; ++j) {
      Vec2 e = Vec2::Zero();
      e[j] = h;
      J.col(j) = (field.drift(x + e) - field.drift(x - e)) / (2.0 * h);
    }
    return J;
  }
}

template <DriftFieldLike F>
Mat2 finite_difference_jacobian(const F& field, const Vec2& x, double h) {
  Mat2 J;
  for (int j = 0; j < 2; ++j) {
    Vec2 e = Vec2::Zero();
    e[j] = h;
    J.col(j) = (field.drift(x + e) - field.drift(x - e)) / (2.0 * h);
  }
  return J;
}

template <DriftFieldLike F>
std::array<Mat2, 2> covariance_gradient(const F& field, const Vec2& x, double h = 1e-6) {
  if constexpr (DifferentiableField<F>) {
    return field.covariance_gradient(x);
  } else {
    std::array<Mat2, 2> g;
    for (int j = 0; j < 2; ++j) {
      Vec2 e = Vec2::Zero();
      e[j] = h;
      g[j] = (field.covariance(x + e) - field.covariance(x - e)) / (2.0 * h);
    }
    return g;
  }
}

/// Drift and covariance of one class's attraction differences at fixed market
/// aggregates. Immutable after construction.
class MarketField {
 public:
  MarketField(const std::array<PayoffMoments, kMarkets>& moments, double beta) : moments_(moments), beta_(beta) {
    if (!(beta >= 0.0)) throw DomainError("MarketField: beta must be >= 0");
  }

  static MarketField from_model(std::span<const MarketSpec> markets, std::span<const double> f,
                                const TraderClassSpec& cls, const OrderDistribution& dist) {
    if (markets.size() != kMarkets || f.size() != kMarkets)
      throw DomainError("MarketField: the analytical layer is defined for exactly three markets");
    std::array<PayoffMoments, kMarkets> mom;
    for (std::size_t m = 0; m < kMarkets; ++m) mom[m] = payoff_moments(cls, markets[m], f[m], dist);
    return MarketField(mom, cls.beta);
  }

  const std::array<PayoffMoments, kMarkets>& moments() const noexcept { return moments_; }
  double beta() const noexcept { return beta_; }

  /// P(M = m) for attractions (0, -dA_2, -dA_3) relative to market 1.
  Vec3 probabilities(const Vec2& d) const {
    const std::array<double, 3> a{0.0, -d[0], -d[1]};
    std::array<double, 3> p{};
    choice_probabilities_into(a, beta_, p);
    return {p[0], p[1], p[2]};
  }

  Vec2 drift(const Vec2& d) const {
    const Vec3 p = probabilities(d);
    const Vec2 e = expected_jump(p);
    return e - d;
  }

  Mat2 drift_jacobian(const Vec2& d) const {
    const Vec3 p = probabilities(d);
    const auto dp = probability_gradient(p);
    Mat2 J;
    for (int k = 0; k < 2; ++k)
      for (int i = 0; i < 2; ++i)
        J(k, i) = moments_[0].mean * dp[i][0] - moments_[k + 1].mean * dp[i][k + 1] - (k == i ? 1.0 : 0.0);
    return J;
  }

  /// Second moment of the per-round jump of (dA_2, dA_3), in units of r^2.
  Mat2 covariance(const Vec2& d) const {
    const Vec3 p = probabilities(d);
    const Vec2 e = expected_jump(p);
    const double base = moments_[0].second * p[0];
    Mat2 s;
    for (int j = 0; j < 2; ++j)
      for (int k = j; k < 2; ++k)
        s(j, k) = base + (j == k ? moments_[k + 1].second * p[k + 1] : 0.0) - d[j] * e[k] - d[k] * e[j] + d[j] * d[k];
    s(1, 0) = s(0, 1);
    return s;
  }

  std::array<Mat2, 2> covariance_gradient(const Vec2& d) const {
    const Vec3 p = probabilities(d);
    const Vec2 e = expected_jump(p);
    const auto dp = probability_gradient(p);
    std::array<Mat2, 2> g;
    for (int i = 0; i < 2; ++i) {
      Vec2 de;
      for (int k = 0; k < 2; ++k) de[k] = moments_[0].mean * dp[i][0] - moments_[k + 1].mean * dp[i][k + 1];
      for (int j = 0; j < 2; ++j)
        for (int k = 0; k < 2; ++k) {
          double v = moments_[0].second * dp[i][0];
          if (j == k) v += moments_[k + 1].second * dp[i][k + 1];
          v -= (i == j ? e[k] : 0.0) + d[j] * de[k];
          v -= (i == k ? e[j] : 0.0) + d[k] * de[j];
          v += (i == j ? d[k] : 0.0) + (i == k ? d[j] : 0.0);
          g[i](j, k) = v;
        }
    }
    return g;
  }

 private:
  // E[S 1{M=1} - S 1{M=k}] for k = 2, 3.
  Vec2 expected_jump(const Vec3& p) const {
    const double gain1 = moments_[0].mean * p[0];
    return {gain1 - moments_[1].mean * p[1], gain1 - moments_[2].mean * p[2]};
  }

  // dp[i][m] = d P(M=m) / d dA_{i+2}; the attraction of market i+1 is -dA_{i+2}.
  std::array<Vec3, 2> probability_gradient(const Vec3& p) const {
    std::array<Vec3, 2> dp;
    for (int i = 0; i < 2; ++i)
      for (int m = 0; m < 3; ++m) dp[i][m] = -beta_ * p[m] * ((m == i + 1 ? 1.0 : 0.0) - p[i + 1]);
    return dp;
  }

  std::array<PayoffMoments, kMarkets> moments_;
  double beta_;
};

inline Vec2 drift(const Vec2& delta, std::span<const double> f, std::span<const MarketSpec> markets,
                  const TraderClassSpec& cls, const OrderDistribution& dist) {
  return MarketField::from_model(markets, f, cls, dist).drift(delta);
}

inline Mat2 covariance(const Vec2& delta, std::span<const double> f, std::span<const MarketSpec> markets,
                       const TraderClassSpec& cls, const OrderDistribution& dist) {
  return MarketField::from_model(markets, f, cls, dist).covariance(delta);
}

/// Buyer-to-seller ratio per market from each class's choice probabilities.
/// `weights` are the class population sizes (equal when empty). Entries are
/// empty where a market would have no sellers.
inline std::vector<std::optional<double>> aggregates_from_choice(const std::vector<std::vector<double>>& probabilities,
                                                                 std::span<const TraderClassSpec> classes,
                                                                 std::span<const double> weights = {}) {
  if (probabilities.size() != classes.size() || probabilities.empty())
    throw DomainError("aggregates_from_choice: one probability vector per class required");
  if (!weights.empty() && weights.size() != classes.size())
    throw DomainError("aggregates_from_choice: one weight per class required");
  const std::size_t m_count = probabilities.front().size();
  std::vector<std::optional<double>> f(m_count);
  for (std::size_t m = 0; m < m_count; ++m) {
    double buyers = 0.0, sellers = 0.0;
    for (std::size_t c = 0; c < classes.size(); ++c) {
      if (probabilities[c].size() != m_count) throw DomainError("aggregates_from_choice: ragged probabilities");
      const double w = weights.empty() ? 1.0 : weights[c];
      buyers += w * probabilities[c][m] * classes[c].p_buy;
      sellers += w * probabilities[c][m] * (1.0 - classes[c].p_buy);
    }
    if (sellers > 0.0) f[m] = buyers / sellers;
  }
  return f;
}

/// The whole population of the analytical model: three markets, C classes
/// with relative sizes, one order distribution.
struct ModelSpec {
  std::vector<MarketSpec> markets;
  std::vector<TraderClassSpec> classes;
  std::vector<double> class_weights;  // empty = equal sizes
  OrderDistribution orders;

  void validate() const {
    if (markets.size() != kMarkets) throw DomainError("analysis requires exactly three markets");
    if (classes.empty()) throw DomainError("analysis requires at least one class");
    if (!class_weights.empty() && class_weights.size() != classes.size())
      throw DomainError("class_weights must have one entry per class");
    for (const auto& m : markets) m.validate();
    for (const auto& c : classes) c.validate();
    orders.validate();
  }
};

using Aggregate3 = std::array<double, kMarkets>;

/// Aggregates when every agent of class c sits at deltas[c].
inline Aggregate3 homogeneous_aggregates(const ModelSpec& model, std::span<const Vec2> deltas) {
  std::vector<std::vector<double>> probs;
  probs.reserve(model.classes.size());
  for (std::size_t c = 0; c < model.classes.size(); ++c) {
    const std::array<double, 3> a{0.0, -deltas[c][0], -deltas[c][1]};
    probs.push_back(choice_probabilities(a, model.classes[c].beta));
  }
  const auto f = aggregates_from_choice(probs, model.classes, model.class_weights);
  Aggregate3 out{};
  for (std::size_t m = 0; m < kMarkets; ++m) {
    if (!f[m]) throw DomainError("homogeneous population leaves a market without sellers");
    out[m] = *f[m];
  }
  return out;
}

inline MarketField class_field(const ModelSpec& model, std::size_t c, const Aggregate3& f) {
  return MarketField::from_model(model.markets, f, model.classes[c], model.orders);
}

struct HomogeneousStep {
  std::vector<Vec2> deltas;
  Aggregate3 aggregates{};  ///< aggregates at the start of the step
};

/// One explicit Euler step of the delta-peaked population dynamics in
/// rescaled time t = n r.
inline HomogeneousStep homogeneous_population_step(const ModelSpec& model, std::span<const Vec2> deltas, double dt) {
  if (!(dt > 0.0)) throw DomainError("homogeneous_population_step: step size must be > 0");
  if (deltas.size() != model.classes.size()) throw DomainError("homogeneous_population_step: one delta per class");
  HomogeneousStep out;
  out.aggregates = homogeneous_aggregates(model, deltas);
  out.deltas.reserve(deltas.size());
  for (std::size_t c = 0; c < deltas.size(); ++c)
    out.deltas.push_back(deltas[c] + dt * class_field(model, c, out.aggregates).drift(deltas[c]));
  return out;
}

struct TrajectorySample {
  double t = 0.0;
  std::vector<Vec2> deltas;
  Aggregate3 aggregates{};
};

/// Integrates the homogeneous dynamics from `start` up to time t_end with a
/// fixed Euler step, recording every `record_every`-th state.
inline std::vector<TrajectorySample> homogeneous_trajectory(const ModelSpec& model, std::vector<Vec2> start,
                                                            double t_end, double dt, std::size_t record_every = 1) {
  if (!(dt > 0.0)) throw DomainError("homogeneous_trajectory: step size must be > 0");
  std::vector<TrajectorySample> out;
  const auto steps = static_cast<std::size_t>(std::llround(t_end / dt));
  std::vector<Vec2> x = std::move(start);
  for (std::size_t n = 0;; ++n) {
    auto step = homogeneous_population_step(model, x, dt);
    if (n % record_every == 0 || n == steps) out.push_back({static_cast<double>(n) * dt, x, step.aggregates});
    if (n == steps) break;
    x = std::move(step.deltas);
  }
  return out;
}

struct HomogeneousSolution {
  std::vector<Vec2> deltas;
  Aggregate3 aggregates{};
  double residual = 0.0;
};

namespace detail {
inline Eigen::VectorXd homogeneous_residual(const ModelSpec& model, const Eigen::VectorXd& x) {
  const std::size_t C = model.classes.size();
  std::vector<Vec2> d(C);
  for (std::size_t c = 0; c < C; ++c) d[c] = x.segment<2>(2 * static_cast<Eigen::Index>(c));
  const auto f = homogeneous_aggregates(model, d);
  Eigen::VectorXd g(2 * C);
  for (std::size_t c = 0; c < C; ++c) g.segment<2>(2 * static_cast<Eigen::Index>(c)) = class_field(model, c, f).drift(d[c]);
  return g;
}
}  // namespace detail

/// Joint Newton polish of a homogeneous-population fixed point: every class's
/// delta is a zero of its own drift at the aggregates the classes induce.
inline HomogeneousSolution polish_homogeneous(const ModelSpec& model, std::vector<Vec2> start, double tol = 1e-13,
                                              int max_iter = 60) {
  const auto n = static_cast<Eigen::Index>(2 * start.size());
  Eigen::VectorXd x(n);
  for (std::size_t c = 0; c < start.size(); ++c) x.segment<2>(2 * static_cast<Eigen::Index>(c)) = start[c];
  Eigen::VectorXd g = detail::homogeneous_residual(model, x);
  for (int it = 0; it < max_iter && g.lpNorm<Eigen::Infinity>() > tol; ++it) {
    Eigen::MatrixXd J(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
      const double h = 1e-7 * std::max(1.0, std::abs(x[j]));
      Eigen::VectorXd xp = x, xm = x;
      xp[j] += h;
      xm[j] -= h;
      J.col(j) = (detail::homogeneous_residual(model, xp) - detail::homogeneous_residual(model, xm)) / (2.0 * h);
    }
    Eigen::VectorXd step = J.fullPivLu().solve(-g);
    double lambda = 1.0;
    for (int ls = 0; ls < 30; ++ls, lambda *= 0.5) {
      Eigen::VectorXd trial = x + lambda * step;
      Eigen::VectorXd gt = detail::homogeneous_residual(model, trial);
      if (gt.norm() < g.norm() || ls == 29) {
        x = trial;
        g = gt;
        break;
      }
    }
  }
  HomogeneousSolution sol;
  for (std::size_t c = 0; c < start.size(); ++c) sol.deltas.push_back(x.segment<2>(2 * static_cast<Eigen::Index>(c)));
  sol.aggregates = homogeneous_aggregates(model, sol.deltas);
  sol.residual = g.lpNorm<Eigen::Infinity>();
  return sol;
}

/// Self-consistent homogeneous population reached from `start` (all-zero
/// attractions by default): relax the joint dynamics, then polish with Newton.
inline HomogeneousSolution homogeneous_fixed_point(const ModelSpec& model, std::vector<Vec2> start = {},
                                                   double tol = 1e-12) {
  model.validate();
  if (start.empty()) start.assign(model.classes.size(), Vec2::Zero());
  if (start.size() != model.classes.size()) throw DomainError("homogeneous_fixed_point: one start per class");
  std::vector<Vec2> x = std::move(start);
  const double dt = 0.05;
  for (int n = 0; n < 40000; ++n) {
    auto step = homogeneous_population_step(model, x, dt);
    double move = 0.0;
    for (std::size_t c = 0; c < x.size(); ++c) move = std::max(move, (step.deltas[c] - x[c]).lpNorm<Eigen::Infinity>());
    x = std::move(step.deltas);
    if (move / dt < 1e-9) break;
  }
  auto sol = polish_homogeneous(model, x);
  if (!(sol.residual < tol)) throw ConvergenceError("homogeneous_fixed_point: residual above tolerance");
  return sol;
}

}  // namespace mktfrag
