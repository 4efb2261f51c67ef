#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "error.hpp"
#include "rng.hpp"

namespace mktfrag {

enum class Role { buyer, seller };

/// Learning and role parameters shared by all traders of one class.
struct TraderClassSpec {
  double p_buy = 0.5;  ///< probability of acting as a buyer in a round
  double beta = 1.0;   ///< intensity of choice
  double r = 0.01;     ///< inverse memory length
  std::size_t id = 0;

  void validate() const {
    if (!(p_buy >= 0.0 && p_buy <= 1.0)) throw DomainError("p_buy out of [0,1]");
    if (!(beta >= 0.0) || !std::isfinite(beta)) throw DomainError("beta must be finite and >= 0");
    if (!(r > 0.0 && r <= 1.0)) throw DomainError("r out of (0,1]");
  }

  friend bool operator==(const TraderClassSpec&, const TraderClassSpec&) = default;
};

/// Per-agent attraction vector, one entry per market.
struct AttractionState {
  std::vector<double> values;

  explicit AttractionState(std::size_t markets = 0) : values(markets, 0.0) {}
  explicit AttractionState(std::vector<double> v) : values(std::move(v)) {}

  std::size_t size() const noexcept { return values.size(); }
  double operator[](std::size_t m) const { return values[m]; }

  /// A_1 - A_m for m = 2..M (zero-based: entries 1..M-1).
  std::vector<double> differences() const {
    std::vector<double> d;
    for (std::size_t m = 1; m < values.size(); ++m) d.push_back(values[0] - values[m]);
    return d;
  }

  friend bool operator==(const AttractionState&, const AttractionState&) = default;
};

/// In-place reinforcement update: the chosen market relaxes towards the score,
/// all others decay by (1 - r).
inline void update_attractions_inplace(std::span<double> a, std::size_t chosen, double score, double r) {
  if (chosen >= a.size()) throw DomainError("update_attractions: market index out of range");
  const double keep = 1.0 - r;
  for (double& x : a) x *= keep;
  a[chosen] += r * score;
}

inline AttractionState update_attractions(AttractionState state, std::size_t chosen, double score, double r) {
  if (!(r > 0.0 && r <= 1.0)) throw DomainError("update_attractions: r out of (0,1]");
  update_attractions_inplace(state.values, chosen, score, r);
  return state;
}

/// Multinomial logit with the maximum attraction subtracted before exponentiating.
inline void choice_probabilities_into(std::span<const double> a, double beta, std::span<double> out) {
  const double amax = *std::max_element(a.begin(), a.end());
  double z = 0.0;
  for (std::size_t m = 0; m < a.size(); ++m) {
    out[m] = std::exp(beta * (a[m] - amax));
    z += out[m];
  }
  for (std::size_t m = 0; m < a.size(); ++m) out[m] /= z;
}

inline std::vector<double> choice_probabilities(std::span<const double> a, double beta) {
  if (a.empty()) throw DomainError("choice_probabilities: no markets");
  if (!(beta >= 0.0)) throw DomainError("choice_probabilities: beta must be >= 0");
  std::vector<double> p(a.size());
  choice_probabilities_into(a, beta, p);
  return p;
}

inline std::vector<double> choice_probabilities(const AttractionState& s, double beta) {
  return choice_probabilities(std::span<const double>(s.values), beta);
}

/// Inverse-CDF draw from a discrete distribution given one uniform variate.
inline std::size_t sample_index(std::span<const double> p, double u) {
  double c = 0.0;
  for (std::size_t m = 0; m + 1 < p.size(); ++m) {
    c += p[m];
    if (u < c) return m;
  }
  return p.size() - 1;
}

inline Role sample_role(const TraderClassSpec& spec, Rng& rng) {
  return uniform01(rng) < spec.p_buy ? Role::buyer : Role::seller;
}

}  // namespace mktfrag
