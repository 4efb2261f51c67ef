#include <gtest/gtest.h>

#include <cmath>

#include "mktfrag/fw_action.hpp"
#include "mktfrag/thresholds.hpp"

using namespace mktfrag;

namespace {

// Ornstein-Uhlenbeck test field: mu = -k x, Sigma = s I.
struct OuField {
  double k = 1.0, s = 0.5;
  Vec2 drift(const Vec2& x) const { return -k * x; }
  Mat2 covariance(const Vec2&) const { return s * Mat2::Identity(); }
};

struct DegenerateField {
  Vec2 drift(const Vec2& x) const { return -x; }
  Mat2 covariance(const Vec2&) const { return Mat2{{1.0, 0.0}, {0.0, 0.0}}; }
};

double ou_action(const OuField& f, double a, double t) {
  return f.k * a * a / (2.0 * f.s) * (1.0 / std::tanh(f.k * t) + 1.0);
}

}  // namespace

TEST(PathAction, ConstantPathAtFixedPointIsZero) {
  const auto field = fair_market_field(1 / 0.245);
  Path p = Path::straight_line(Vec2::Zero(), Vec2::Zero(), 10, 10.0);
  EXPECT_EQ(path_action(p, field), 0.0);
}

TEST(PathAction, RelaxationCostsNothing) {
  const auto field = fair_market_field(1 / 0.245);
  const auto pts = find_fixed_points(field).points;
  const auto ta = analyse_transitions(field, pts);
  ASSERT_FALSE(ta.connections.empty());
  // Integrate from just off a saddle, then resample on a uniform grid.
  const FixedPoint& s = ta.saddles[0];
  const Vec2 start = s.location + 0.05 * (ta.attractors[0].location - s.location);
  const double dt = 1e-3;
  const auto traj = relax(field, start, dt, 20000);
  Path p;
  p.total_time = 20.0;
  for (std::size_t k = 0; k < traj.size(); k += 10) p.states.push_back(traj[k]);
  p.total_time = dt * 10 * static_cast<double>(p.states.size() - 1);
  EXPECT_LT(path_action(p, field), 1e-6);
}

TEST(PathAction, SingularCovarianceDetected) {
  Path p = Path::straight_line(Vec2::Zero(), Vec2(1, 1), 4, 1.0);
  EXPECT_THROW(path_action(p, DegenerateField{}), SingularCovarianceError);
}

TEST(PathAction, AnalyticGradientMatchesFiniteDifferences) {
  const auto field = MarketField::from_model(std::vector<MarketSpec>{{0.3}, {0.35}, {0.7}},
                                             std::array<double, 3>{1.02, 1.03, 0.77}, {0.8, 1 / 0.21, 0.01}, {});
  Path p = Path::straight_line(Vec2(0.3, 0.2), Vec2(-0.2, 0.05), 6, 10.0);
  p.states[2] += Vec2(0.03, -0.02);
  const Eigen::VectorXd g = path_action_gradient(p, field);
  const double h = 1e-6;
  for (std::size_t k = 1; k + 1 < p.states.size(); ++k)
    for (int i = 0; i < 2; ++i) {
      Path a = p, b = p;
      a.states[k][i] += h;
      b.states[k][i] -= h;
      const double fd = (path_action(a, field) - path_action(b, field)) / (2 * h);
      EXPECT_NEAR(g[static_cast<Eigen::Index>(2 * (k - 1) + i)], fd, 1e-6 * std::max(1.0, std::abs(fd)));
    }
}

TEST(MinimizeAction, OrnsteinUhlenbeckClosedForm) {
  const OuField f;
  const double a = 0.8;
  for (double t : {2.0, 10.0}) {
    ActionOptions opt;
    opt.steps = 40;
    opt.total_time = t;
    const auto res = minimize_path_action(Vec2::Zero(), Vec2(a, 0), f, opt);
    ASSERT_TRUE(res.converged);
    EXPECT_NEAR(res.action, ou_action(f, a, t), 0.02 * ou_action(f, a, t)) << "T = " << t;
  }
  ActionOptions opt;
  opt.steps = 40;
  opt.total_time = 10.0;
  const auto res = minimize_path_action(Vec2::Zero(), Vec2(a, 0), f, opt);
  EXPECT_NEAR(res.action, f.k * a * a / f.s, 0.02 * f.k * a * a / f.s);
}

TEST(MinimizeAction, OrnsteinUhlenbeckProfile) {
  const OuField f;
  const double a = 0.8, t = 10.0;
  ActionOptions opt;
  opt.steps = 40;
  opt.total_time = t;
  const auto res = minimize_path_action(Vec2::Zero(), Vec2(a, 0), f, opt);
  for (std::size_t k = 0; k < res.path.states.size(); ++k) {
    const double tk = t * static_cast<double>(k) / 40.0;
    const double want = a * std::sinh(f.k * tk) / std::sinh(f.k * t);
    EXPECT_NEAR(res.path.states[k][0], want, 0.02 * a) << "k = " << k;
    EXPECT_NEAR(res.path.states[k][1], 0.0, 1e-6);
  }
}

TEST(MinimizeAction, KDoublingChangesLittle) {
  const auto field = fair_market_field(1 / 0.245);
  const auto pts = find_fixed_points(field).points;
  const auto ta = analyse_transitions(field, pts);
  ASSERT_FALSE(ta.transitions.empty());
  for (const auto& tr : ta.transitions) {
    ActionOptions k10, k20;
    k20.steps = 20;
    const double s10 = minimize_action(ta.attractors[tr.from], ta.saddles[tr.saddle], field, k10).action;
    const double s20 = minimize_action(ta.attractors[tr.from], ta.saddles[tr.saddle], field, k20).action;
    EXPECT_LT(std::abs(s20 - s10), 0.02 * s10);
    EXPECT_LE(s20, s10 + 1e-8);
  }
}

TEST(MinimizeAction, RejectsNonRoots) {
  const auto field = fair_market_field(1 / 0.245);
  FixedPoint a, s;
  a.location = Vec2(0.3, 0.3);
  s.location = Vec2::Zero();
  s.stability = Stability::saddle;
  EXPECT_THROW(minimize_action(a, s, field), DomainError);
}

TEST(Transitions, FairMarketCentreToOuterActionsEqual) {
  const auto field = fair_market_field(1 / 0.245);
  const auto ta = analyse_transitions(field, find_fixed_points(field).points);
  ASSERT_EQ(ta.attractors.size(), 4u);
  ASSERT_TRUE(ta.all_converged);
  std::vector<double> out;
  for (const auto& tr : ta.transitions)
    if (ta.attractors[tr.from].location.norm() < 1e-9) out.push_back(tr.result.action);
  ASSERT_EQ(out.size(), 3u);
  EXPECT_LT(std::abs(out[0] - out[1]), 1e-6);
  EXPECT_LT(std::abs(out[0] - out[2]), 1e-6);
  for (double s : out) EXPECT_GT(s, 0.0);
}

TEST(ClassifyPeaks, SymmetricThreePeaks) {
  Eigen::MatrixXd s(3, 3);
  s << 0, 0.05, 0.05, 0.05, 0, 0.05, 0.05, 0.05, 0;
  const auto pc = classify_peaks(s, 0.01);
  EXPECT_EQ(pc.label, FragmentationLabel::strongly_fragmented);
  for (bool b : pc.large) EXPECT_TRUE(b);
}

TEST(ClassifyPeaks, SmallDeficitIsWeak) {
  Eigen::MatrixXd s(2, 2);
  s << 0, 0.05, 0.04, 0;  // V_1 - V_2 = S_21 - S_12 = -0.01
  const auto pc = classify_peaks(s, 0.001);
  EXPECT_NEAR(pc.quasi_potential[1] - pc.quasi_potential[0], 0.01, 1e-15);
  EXPECT_TRUE(pc.large[0]);
  EXPECT_FALSE(pc.large[1]);
  EXPECT_EQ(pc.label, FragmentationLabel::weakly_fragmented);
  // Weight ratio omega_1 / omega_2 = exp(0.01 / 0.001).
  EXPECT_NEAR(std::exp((s(0, 1) - s(1, 0)) / 0.001), std::exp(10.0), 1e-6 * std::exp(10.0));
}

TEST(ClassifyPeaks, SingleAttractor) {
  EXPECT_EQ(classify_peaks(Eigen::MatrixXd::Zero(1, 1), 0.01).label, FragmentationLabel::unfragmented);
}

TEST(ClassifyPeaks, DisconnectedIsUndetermined) {
  Eigen::MatrixXd s(2, 2);
  const double inf = std::numeric_limits<double>::infinity();
  s << 0, inf, inf, 0;
  EXPECT_EQ(classify_peaks(s, 0.01).label, FragmentationLabel::undetermined);
}

TEST(QuasiPotentials, ThreeStateChain) {
  // 0 <-> 1 <-> 2, no direct 0 <-> 2 link.
  const double inf = std::numeric_limits<double>::infinity();
  Eigen::MatrixXd s(3, 3);
  s << 0, 0.1, inf, 0.02, 0, 0.3, inf, 0.05, 0;
  const auto v = quasi_potentials(s);
  // Trees: root 0: 1->0 (0.02) + 2->1 (0.05) = 0.07; root 1: 0->1 + 2->1 = 0.15;
  // root 2: 0->1 + 1->2 = 0.4.
  EXPECT_NEAR(v[0], 0.0, 1e-15);
  EXPECT_NEAR(v[1], 0.08, 1e-15);
  EXPECT_NEAR(v[2], 0.33, 1e-15);
}
