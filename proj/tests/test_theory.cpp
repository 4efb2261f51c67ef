#include <gtest/gtest.h>

#include <cmath>

#include "mktfrag/auction.hpp"
#include "mktfrag/theory.hpp"

using namespace mktfrag;

namespace {

const std::vector<MarketSpec> kFair(3, MarketSpec{0.5});
const std::vector<MarketSpec> kBiased{{0.3}, {0.5}, {0.7}};

MarketField field(const std::vector<MarketSpec>& m, std::array<double, 3> f, double p_buy, double beta) {
  return MarketField::from_model(m, f, TraderClassSpec{p_buy, beta, 0.01}, OrderDistribution{});
}

// Map of attraction differences under the market swap 1 <-> 3.
Mat2 swap13() {
  Mat2 t;
  t << 1, -1, 0, -1;
  return t;
}

}  // namespace

TEST(PayoffMoments, FairMarketRoleSymmetry) {
  const auto b = role_payoff_moments(Role::buyer, {0.5}, 1.0, {});
  const auto s = role_payoff_moments(Role::seller, {0.5}, 1.0, {});
  EXPECT_NEAR(b.mean, s.mean, 1e-15);
  EXPECT_NEAR(b.second, s.second, 1e-15);
}

TEST(PayoffMoments, LowBiasFavoursBuyers) {
  const auto b = role_payoff_moments(Role::buyer, {0.3}, 1.0, {});
  const auto s = role_payoff_moments(Role::seller, {0.3}, 1.0, {});
  EXPECT_GT(b.mean, s.mean);
}

TEST(PayoffMoments, SecondMomentDominatesSquare) {
  for (double theta : {0.0, 0.2, 0.5, 0.9})
    for (double f : {0.1, 1.0, 7.0})
      for (Role r : {Role::buyer, Role::seller}) {
        const auto m = role_payoff_moments(r, {theta}, f, {});
        EXPECT_GE(m.mean, 0.0);
        EXPECT_GE(m.second, m.mean * m.mean);
      }
}

TEST(PayoffMoments, MonteCarloSpotCheck) {
  // Full auction mechanics at one market, N = 4000, theta = 0.4, f = 2.
  const MarketSpec mk{0.4};
  const OrderDistribution dist;
  const std::size_t n = 4000, nb = 2667;
  const double f = static_cast<double>(nb) / static_cast<double>(n - nb);
  double sb = 0, sb2 = 0, ss = 0, ss2 = 0;
  std::size_t cb = 0, cs = 0;
  std::normal_distribution<double> bid(dist.mu_bid, dist.sigma_bid), ask(dist.mu_ask, dist.sigma_ask);
  for (int round = 0; round < 300; ++round) {
    Rng rng = make_stream(5, round);
    OrderBook b;
    for (std::size_t i = 0; i < n; ++i) (i < nb ? b.bids : b.asks).push_back({i, i < nb ? bid(rng) : ask(rng)});
    const auto out = run_auction(b, mk, rng);
    for (const auto& s : out.scores) {
      if (s.agent < nb) {
        sb += s.score, sb2 += s.score * s.score, ++cb;
      } else {
        ss += s.score, ss2 += s.score * s.score, ++cs;
      }
    }
  }
  const auto eb = role_payoff_moments(Role::buyer, mk, f, dist);
  const auto es = role_payoff_moments(Role::seller, mk, f, dist);
  const double mb = sb / cb, ms = ss / cs;
  EXPECT_NEAR(mb, eb.mean, 4 * std::sqrt((sb2 / cb - mb * mb) / cb) + 2e-3);
  EXPECT_NEAR(ms, es.mean, 4 * std::sqrt((ss2 / cs - ms * ms) / cs) + 2e-3);
  EXPECT_NEAR(sb2 / cb, eb.second, 0.01 * eb.second + 2e-3);
  EXPECT_NEAR(ss2 / cs, es.second, 0.01 * es.second + 2e-3);
}

TEST(Drift, FairMarketsVanishAtOrigin) {
  const Vec2 mu = field(kFair, {1, 1, 1}, 0.8, 4.0).drift(Vec2::Zero());
  EXPECT_LT(mu.lpNorm<Eigen::Infinity>(), 1e-15);
}

TEST(Drift, LinearDecayDominatesFarAway) {
  const auto fl = field(kBiased, {1.3, 1, 0.7}, 0.8, 4.0);
  double pmax = 0;
  for (const auto& m : fl.moments()) pmax = std::max(pmax, std::abs(m.mean));
  for (const Vec2 d : {Vec2(300, 0), Vec2(-200, 150), Vec2(120, -400)}) {
    const Vec2 x = d * pmax;
    const Vec2 mu = fl.drift(x);
    for (int i = 0; i < 2; ++i)
      if (std::abs(x[i]) > 100 * pmax) EXPECT_LT(std::abs(mu[i] + x[i]) / std::abs(x[i]), 0.01);
  }
}

TEST(Drift, RelabelingIdenticalMarkets) {
  // Markets 2 and 3 identical: swapping them swaps the two coordinates.
  const std::vector<MarketSpec> m{{0.3}, {0.6}, {0.6}};
  const auto fl = field(m, {1.2, 0.9, 0.9}, 0.7, 3.0);
  const Vec2 x(0.13, -0.08);
  const Vec2 a = fl.drift(x), b = fl.drift(Vec2(x[1], x[0]));
  EXPECT_NEAR(a[0], b[1], 1e-14);
  EXPECT_NEAR(a[1], b[0], 1e-14);
}

TEST(Covariance, FairOriginSymmetry) {
  const auto fl = field(kFair, {1, 1, 1}, 0.8, 4.0);
  const Mat2 s = fl.covariance(Vec2::Zero());
  EXPECT_NEAR(s(0, 0), s(1, 1), 1e-15);
  EXPECT_NEAR(s(0, 1), s(1, 0), 1e-15);
}

TEST(Covariance, OffDiagonalAtOriginIsMarketOneTerm) {
  const auto fl = field(kBiased, {1.4, 1.0, 0.6}, 0.8, 4.0);
  const Mat2 s = fl.covariance(Vec2::Zero());
  const Vec3 p = fl.probabilities(Vec2::Zero());
  EXPECT_NEAR(s(0, 1), p[0] * fl.moments()[0].second, 1e-15);
}

TEST(Covariance, IncrementMomentOracle) {
  // Tagged agent at fixed differences; its score comes from real auctions at
  // N = 1500 per market with the given buyer/seller ratios.
  const std::array<double, 3> f{1.5, 1.0, 0.6};
  const double r = 0.01, beta = 3.0, p_buy = 0.7;
  const auto fl = field(kBiased, f, p_buy, beta);
  const OrderDistribution dist;
  std::normal_distribution<double> bid(dist.mu_bid, dist.sigma_bid), ask(dist.mu_ask, dist.sigma_ask);
  for (const Vec2 x0 : {Vec2(0, 0), Vec2(0.2, -0.1), Vec2(-0.3, 0.25)}) {
    Mat2 m2 = Mat2::Zero();
    Mat2 m4 = Mat2::Zero();
    std::size_t n = 0;
    for (int round = 0; round < 1500; ++round) {
      std::array<std::vector<double>, 3> buyer_scores, seller_scores;
      for (std::size_t m = 0; m < 3; ++m) {
        Rng rng = make_stream(77, round, m);
        const std::size_t total = 1500;
        const auto nb = static_cast<std::size_t>(std::llround(total * f[m] / (1 + f[m])));
        OrderBook b;
        for (std::size_t i = 0; i < total; ++i) (i < nb ? b.bids : b.asks).push_back({i, i < nb ? bid(rng) : ask(rng)});
        for (const auto& s : run_auction(b, kBiased[m], rng).scores)
          (s.agent < nb ? buyer_scores[m] : seller_scores[m]).push_back(s.score);
      }
      Rng pick = make_stream(78, round);
      for (int k = 0; k < 40; ++k) {
        AttractionState a({0.0, -x0[0], -x0[1]});
        const auto p = choice_probabilities(a, beta);
        const std::size_t m = sample_index(p, uniform01(pick));
        const bool buyer = uniform01(pick) < p_buy;
        const auto& pool = buyer ? buyer_scores[m] : seller_scores[m];
        const double score = pool[static_cast<std::size_t>(uniform01(pick) * pool.size())];
        a = update_attractions(a, m, score, r);
        const Vec2 x1(a[0] - a[1], a[0] - a[2]);
        const Vec2 inc = (x1 - x0) / r;
        const Mat2 o = inc * inc.transpose();
        m2 += o;
        m4 += o.cwiseProduct(o);
        ++n;
      }
    }
    m2 /= static_cast<double>(n);
    m4 /= static_cast<double>(n);
    const Mat2 s = fl.covariance(x0);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) {
        const double se = std::sqrt((m4(i, j) - m2(i, j) * m2(i, j)) / static_cast<double>(n));
        EXPECT_NEAR(m2(i, j), s(i, j), 4 * se + 2e-3) << "entry " << i << j << " at " << x0.transpose();
      }
  }
}

TEST(Aggregates, Examples) {
  const std::vector<TraderClassSpec> cls{{0.8, 1, 0.01}, {0.2, 1, 0.01}};
  const std::vector<double> u(3, 1.0 / 3.0);
  for (const auto& f : aggregates_from_choice({u, u}, cls)) EXPECT_NEAR(*f, 1.0, 1e-15);

  const auto one = aggregates_from_choice({{1.0, 0.0, 0.0}}, std::vector<TraderClassSpec>{{0.8, 1, 0.01}});
  EXPECT_NEAR(*one[0], 4.0, 1e-14);
  EXPECT_FALSE(one[1]);

  const std::vector<double> p1{0.5, 0.3, 0.2}, p2{0.2, 0.3, 0.5};
  const auto f = aggregates_from_choice({p1, p2}, cls);
  EXPECT_NEAR(*f[0] * *f[2], 1.0, 1e-14);
  EXPECT_NEAR(*f[1], 1.0, 1e-14);
}

TEST(Field, ExchangeSymmetryOfClasses) {
  const double a = 1.37;
  const std::array<double, 3> f{a, 1.0, 1.0 / a};
  const auto c1 = field(kBiased, f, 0.8, 4.0);
  const auto c2 = field(kBiased, f, 0.2, 4.0);
  const Mat2 t = swap13();
  for (const Vec2 d : {Vec2(0.1, 0.2), Vec2(-0.3, 0.05), Vec2(0.0, -0.4)}) {
    const Vec2 lhs = c2.drift(t * d), rhs = t * c1.drift(d);
    EXPECT_NEAR((lhs - rhs).norm(), 0.0, 1e-13);
    const Mat2 sl = c2.covariance(t * d), sr = t * c1.covariance(d) * t.transpose();
    EXPECT_NEAR((sl - sr).norm(), 0.0, 1e-13);
  }
}

TEST(Field, AnalyticJacobianMatchesFiniteDifferences) {
  const auto fl = field(kBiased, {1.3, 1.0, 0.7}, 0.8, 4.0);
  for (const Vec2 d : {Vec2(0.1, 0.2), Vec2(-0.3, 0.05)}) {
    const Mat2 a = fl.drift_jacobian(d);
    const Mat2 n = finite_difference_jacobian(fl, d, 1e-6);
    EXPECT_LT((a - n).lpNorm<Eigen::Infinity>(), 1e-7);
  }
}

TEST(Homogeneous, FixedPointIsStationary) {
  ModelSpec model{kFair, {{0.8, 4.0, 0.01}, {0.2, 4.0, 0.01}}, {}, {}};
  const std::vector<Vec2> zero(2, Vec2::Zero());
  const auto traj = homogeneous_trajectory(model, zero, 5.0, 0.01);
  for (const auto& s : traj) {
    for (const auto& d : s.deltas) EXPECT_LT(d.norm(), 1e-14);
    for (double f : s.aggregates) EXPECT_NEAR(f, 1.0, 1e-14);
  }
}

TEST(Homogeneous, EulerStepHalving) {
  ModelSpec model{{{0.2}, {0.5}, {0.8}}, {{0.8, 1 / 0.3, 0.01}, {0.2, 1 / 0.3, 0.01}}, {}, {}};
  const std::vector<Vec2> zero(2, Vec2::Zero());
  const auto a = homogeneous_trajectory(model, zero, 40.0, 0.01);
  const auto b = homogeneous_trajectory(model, zero, 40.0, 0.005);
  EXPECT_LT(std::abs(a.back().aggregates[0] - b.back().aggregates[0]), 1e-4);
}

TEST(Homogeneous, FixedPointSolverResidual) {
  ModelSpec model{{{0.2}, {0.5}, {0.8}}, {{0.8, 1 / 0.3, 0.01}, {0.2, 1 / 0.3, 0.01}}, {}, {}};
  const auto sol = homogeneous_fixed_point(model);
  EXPECT_LT(sol.residual, 1e-12);
  EXPECT_NEAR(sol.aggregates[0] * sol.aggregates[2], 1.0, 1e-10);
  EXPECT_NEAR(sol.aggregates[1], 1.0, 1e-10);
}
