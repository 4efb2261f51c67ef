#include <gtest/gtest.h>

#include <chrono>

#include "mktfrag/phases.hpp"

using namespace mktfrag;

namespace {

ModelSpec two_class_model(std::vector<MarketSpec> markets, double inv_beta) {
  ModelSpec m;
  m.markets = std::move(markets);
  m.classes = {{0.8, 1.0 / inv_beta, 0.01, 0}, {0.2, 1.0 / inv_beta, 0.01, 1}};
  return m;
}

ClassCode swap13(ClassCode c) {
  for (auto& e : c.entries)
    if (e.market == 1 || e.market == 3) e.market = 4 - e.market;
  std::sort(c.entries.begin(), c.entries.end(), [](const CodeEntry& x, const CodeEntry& y) {
    return x.market != y.market ? x.market < y.market : x.large > y.large;
  });
  return c;
}

}  // namespace

TEST(ClassCode, Printing) {
  ClassCode c;
  c.entries = {{0, true}};
  EXPECT_EQ(c.str(), "*L");
  c.entries = {{1, true}, {2, false}};
  EXPECT_EQ(c.str(), "1L+2S");
  EXPECT_EQ(c.label(), FragmentationLabel::weakly_fragmented);
  c.entries = {{1, true}, {3, true}};
  EXPECT_EQ(c.label(), FragmentationLabel::strongly_fragmented);
  c.status = ClassCode::Status::undetermined;
  EXPECT_EQ(c.str(), "undetermined");
}

TEST(Classify, SplitAndSmallPeakExample) {
  const auto res = classify_steady_state(two_class_model({{0.3}, {0.35}, {0.7}}, 0.21));
  ASSERT_EQ(res.codes.size(), 2u);
  EXPECT_TRUE(res.converged);
  EXPECT_EQ(res.codes[0].str(), "1L+2L");
  EXPECT_EQ(res.codes[1].str(), "1S+2L");
  EXPECT_TRUE(res.classes[0].split);
  double share = 0;
  for (const auto& s : res.subpopulations)
    if (s.class_index == 0) share += s.fraction;
  EXPECT_NEAR(share, 1.0, 1e-12);
}

TEST(Classify, FairMarketsAboveSecondThreshold) {
  const auto res = classify_steady_state(two_class_model({{0.5}, {0.5}, {0.5}}, 0.24));
  for (const auto& code : res.codes) {
    EXPECT_EQ(code.large_count(), 3u) << code.str();
    for (int k = 1; k <= 3; ++k) EXPECT_TRUE(code.has(k, true));
    EXPECT_TRUE(code.has(0, false));
    EXPECT_EQ(code.label(), FragmentationLabel::strongly_fragmented);
  }
}

TEST(Classify, RandomChoiceIsIndifferent) {
  auto m = two_class_model({{0.3}, {0.5}, {0.7}}, 1.0);
  for (auto& c : m.classes) c.beta = 0.0;
  const auto res = classify_steady_state(m);
  for (const auto& c : res.codes) EXPECT_EQ(c.str(), "*L");
}

TEST(Classify, LowBetaUnfragmented) {
  const auto res = classify_steady_state(two_class_model({{0.3}, {0.5}, {0.7}}, 0.40));
  for (const auto& c : res.codes) {
    EXPECT_EQ(c.entries.size(), 1u);
    EXPECT_EQ(c.label(), FragmentationLabel::unfragmented);
  }
}

TEST(Classify, MirrorSymmetricScenarioSwapsClasses) {
  for (double bias : {0.2, 0.4})
    for (double inv : {0.26, 0.21}) {
      const auto res = classify_steady_state(two_class_model({{bias}, {0.5}, {1.0 - bias}}, inv));
      EXPECT_EQ(swap13(res.codes[0]), res.codes[1]) << bias << " " << inv << ": " << res.codes[0].str() << " vs "
                                                    << res.codes[1].str();
    }
}

TEST(Counting, ThreeMarketsTwoClasses) {
  const auto fp = enumerate_feasible_patterns(3, 2);
  ASSERT_EQ(fp.patterns.size(), 2u);
  EXPECT_EQ(fp.patterns[0].eta, (std::vector<int>{3, 2}));
  EXPECT_EQ(fp.patterns[1].eta, (std::vector<int>{2, 3}));
  EXPECT_TRUE(fp.disjoint_impossible);
  EXPECT_FALSE(full_fragmentation_determined(3, 2));
  EXPECT_EQ(counting_feasibility({{3, 3}, 3}), Feasibility::overdetermined);
  EXPECT_EQ(counting_feasibility({{1, 1}, 3}), Feasibility::underdetermined);
}

TEST(Counting, ExhaustiveSmallSystems) {
  const auto t0 = std::chrono::steady_clock::now();
  for (int M = 2; M <= 6; ++M)
    for (int C = 1; C <= 6; ++C) {
      const auto fp = enumerate_feasible_patterns(M, C);
      // Brute force over all eta in [1, M]^C.
      std::size_t want = 0;
      std::vector<int> eta(static_cast<std::size_t>(C), 1);
      for (;;) {
        int s = 0;
        for (int e : eta) s += e;
        want += s == M + C;
        std::size_t k = 0;
        while (k < eta.size() && eta[k] == M) eta[k++] = 1;
        if (k == eta.size()) break;
        ++eta[k];
      }
      EXPECT_EQ(fp.patterns.size(), want) << M << "," << C;
      for (const auto& p : fp.patterns) {
        EXPECT_EQ(p.total(), M + C);
        EXPECT_TRUE(disjoint_preferences_impossible(p));
      }
      const bool full = std::any_of(fp.patterns.begin(), fp.patterns.end(), [&](const FragmentationPattern& p) {
        return std::all_of(p.eta.begin(), p.eta.end(), [&](int e) { return e == M; });
      });
      EXPECT_EQ(full, full_fragmentation_determined(M, C)) << M << "," << C;
    }
  EXPECT_LT(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(), 1.0);
  EXPECT_TRUE(full_fragmentation_determined(2, 2));
}

TEST(Counting, RejectsBadInput) {
  EXPECT_THROW(enumerate_feasible_patterns(1, 2), DomainError);
  EXPECT_THROW(counting_feasibility({{0, 2}, 3}), DomainError);
}

TEST(Sweep, SmallGridAndBoundaries) {
  PhaseSweepSpec spec;
  spec.bias_lo = 0.3;
  spec.bias_hi = 0.45;
  spec.bias_nodes = 2;
  spec.inv_beta_lo = 0.2;
  spec.inv_beta_hi = 0.3;
  spec.inv_beta_nodes = 3;
  spec.classes = {{0.8, 1.0, 0.01, 0}, {0.2, 1.0, 0.01, 1}};
  const auto pd = sweep_phase_diagram(spec);
  ASSERT_EQ(pd.nodes.size(), 6u);
  EXPECT_DOUBLE_EQ(pd.nodes[0].inv_beta, 0.3);
  EXPECT_DOUBLE_EQ(pd.nodes[2].inv_beta, 0.2);
  for (const auto& n : pd.nodes) EXPECT_EQ(n.codes.size(), 2u);
  for (const auto& b : pd.boundaries) {
    EXPECT_LE(b.inv_beta_hi - b.inv_beta_lo, 0.25 * 0.05 + 1e-12);
    EXPECT_NE(b.code_above, b.code_below);
  }
  // Unfragmented at the weak-coupling end.
  for (std::size_t k = 0; k < pd.nodes.size(); k += 3)
    for (const auto& c : pd.nodes[k].codes) EXPECT_EQ(c.label(), FragmentationLabel::unfragmented);
}

TEST(Sweep, RejectsBadSpec) {
  PhaseSweepSpec spec;
  EXPECT_THROW(sweep_phase_diagram(spec), DomainError);
  spec.classes = {{0.8, 1.0, 0.01, 0}};
  spec.inv_beta_nodes = 1;
  EXPECT_THROW(sweep_phase_diagram(spec), DomainError);
}
