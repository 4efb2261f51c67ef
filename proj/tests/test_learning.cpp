#include <gtest/gtest.h>

#include <cmath>

#include "mktfrag/learning.hpp"
#include "mktfrag/rng.hpp"

using namespace mktfrag;

namespace {
void expect_values(const AttractionState& s, std::vector<double> want) {
  ASSERT_EQ(s.size(), want.size());
  for (std::size_t m = 0; m < want.size(); ++m) EXPECT_NEAR(s[m], want[m], 1e-15) << "market " << m;
}
}  // namespace

TEST(UpdateAttractions, Examples) {
  expect_values(update_attractions(AttractionState({1, 0, 0}), 0, 2.0, 0.1), {1.1, 0, 0});
  expect_values(update_attractions(AttractionState({1, 5, 0}), 0, 3.0, 1.0), {3, 0, 0});
  expect_values(update_attractions(AttractionState({0, 1, 0}), 0, 0.0, 0.5), {0, 0.5, 0});
}

TEST(UpdateAttractions, RejectsBadInput) {
  EXPECT_THROW(update_attractions(AttractionState(3), 3, 1.0, 0.1), DomainError);
  EXPECT_THROW(update_attractions(AttractionState(3), 0, 1.0, 0.0), DomainError);
  EXPECT_THROW(update_attractions(AttractionState(3), 0, 1.0, 1.5), DomainError);
}

TEST(UpdateAttractions, GeometricConvergence) {
  AttractionState s({0.3, 0.0});
  const double S = 2.0, r = 0.05;
  double err = std::abs(s[0] - S);
  for (int n = 0; n < 50; ++n) {
    s = update_attractions(s, 0, S, r);
    const double e = std::abs(s[0] - S);
    EXPECT_NEAR(e, (1 - r) * err, 1e-12);
    err = e;
  }
}

TEST(ChoiceProbabilities, Examples) {
  for (double beta : {0.0, 1.0, 50.0}) {
    const auto p = choice_probabilities(AttractionState({0, 0, 0}), beta);
    for (double x : p) EXPECT_NEAR(x, 1.0 / 3.0, 1e-15);
  }
  const auto u = choice_probabilities(AttractionState({5, -2, 1}), 0.0);
  for (double x : u) EXPECT_NEAR(x, 1.0 / 3.0, 1e-15);
  const auto g = choice_probabilities(AttractionState({1, 0, 0}), 1e6);
  EXPECT_NEAR(g[0], 1.0, 1e-15);
  EXPECT_NEAR(g[1], 0.0, 1e-15);
}

TEST(ChoiceProbabilities, OverflowSafe) {
  const auto p = choice_probabilities(AttractionState({1000, 999, -1000}), 10.0);
  double s = 0;
  for (double x : p) {
    EXPECT_TRUE(std::isfinite(x));
    s += x;
  }
  EXPECT_NEAR(s, 1.0, 1e-12);
  EXPECT_GT(p[0], p[1]);
}

TEST(ChoiceProbabilities, RejectsNegativeBeta) {
  EXPECT_THROW(choice_probabilities(AttractionState({0, 0}), -1.0), DomainError);
}

TEST(SampleRole, Degenerate) {
  Rng rng(5);
  for (int k = 0; k < 100; ++k) {
    EXPECT_EQ(sample_role({1.0, 1.0, 0.1}, rng), Role::buyer);
    EXPECT_EQ(sample_role({0.0, 1.0, 0.1}, rng), Role::seller);
  }
}

TEST(SampleRole, BinomialFraction) {
  Rng rng = make_stream(42, 0);
  const int n = 100000;
  int buyers = 0;
  for (int k = 0; k < n; ++k) buyers += sample_role({0.8, 1.0, 0.1}, rng) == Role::buyer;
  EXPECT_NEAR(static_cast<double>(buyers) / n, 0.8, 3.0 * std::sqrt(0.8 * 0.2 / n));
}

TEST(SampleIndex, InverseCdf) {
  const std::vector<double> p{0.2, 0.5, 0.3};
  EXPECT_EQ(sample_index(p, 0.0), 0u);
  EXPECT_EQ(sample_index(p, 0.19), 0u);
  EXPECT_EQ(sample_index(p, 0.2), 1u);
  EXPECT_EQ(sample_index(p, 0.69), 1u);
  EXPECT_EQ(sample_index(p, 0.7), 2u);
  EXPECT_EQ(sample_index(p, 0.999999), 2u);
}

TEST(Rng, StreamsAreKeyedByCounters) {
  EXPECT_EQ(derive_seed(1, 2, 3), derive_seed(1, 2, 3));
  EXPECT_NE(derive_seed(1, 2, 3), derive_seed(1, 3, 2));
  EXPECT_NE(derive_seed(1, 2, 3), derive_seed(2, 2, 3));
  Rng a = make_stream(9, 4), b = make_stream(9, 4);
  EXPECT_EQ(a(), b());
  for (int k = 0; k < 1000; ++k) {
    const double u = uniform01(a);
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
  }
}

TEST(TraderClassSpec, Validate) {
  EXPECT_NO_THROW((TraderClassSpec{0.8, 4.0, 0.01}.validate()));
  EXPECT_THROW((TraderClassSpec{1.1, 4.0, 0.01}.validate()), DomainError);
  EXPECT_THROW((TraderClassSpec{0.8, -1.0, 0.01}.validate()), DomainError);
  EXPECT_THROW((TraderClassSpec{0.8, 1.0, 0.0}.validate()), DomainError);
}
