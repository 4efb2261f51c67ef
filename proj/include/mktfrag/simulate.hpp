#pragma once

// Multi-agent engine. Each round every agent picks a market by the logit rule,
// a role by its class's buying preference and a fresh order price; markets
// clear independently and every agent reinforces the market it chose with its
// realised score.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "auction.hpp"
#include "bifurcation.hpp"
#include "error.hpp"
#include "learning.hpp"
#include "rng.hpp"
#include "theory.hpp"

namespace mktfrag {

struct ClassPopulation {
  TraderClassSpec spec;
  std::size_t count = 0;
};

struct SimulationConfig {
  std::vector<MarketSpec> markets;
  std::vector<ClassPopulation> classes;
  OrderDistribution orders;
  std::size_t max_rounds = 20000;
  std::uint64_t seed = 1;
  std::size_t window = 0;        ///< steady-state window in rounds; 0 = ceil(10 / r)
  double tolerance = 0.01;       ///< L1 threshold between consecutive window histograms
  int bins = 200;                ///< histogram bins per axis
  int coarse = 8;                ///< fine bins per coarse bin in the steady-state distance
  std::size_t record_every = 1;  ///< time-series sampling period in rounds

  std::size_t agents() const {
    std::size_t n = 0;
    for (const auto& c : classes) n += c.count;
    return n;
  }

  double min_r() const {
    double r = 1.0;
    for (const auto& c : classes) r = std::min(r, c.spec.r);
    return r;
  }

  std::size_t steady_window() const {
    return window > 0 ? window : static_cast<std::size_t>(std::ceil(10.0 / min_r() - 1e-9));
  }

  void validate() const {
    if (markets.empty() || markets.size() > 255) throw DomainError("simulation needs 1 to 255 markets");
    if (classes.empty()) throw DomainError("simulation needs at least one class");
    for (const auto& m : markets) m.validate();
    for (const auto& c : classes) {
      c.spec.validate();
      if (c.count == 0) throw DomainError("class counts must be positive");
    }
    if (agents() < 2) throw DomainError("simulation needs at least two agents");
    orders.validate();
    if (!(tolerance > 0.0)) throw DomainError("steady-state tolerance must be > 0");
    if (bins < 2 || coarse < 1) throw DomainError("histogram bins must be >= 2 and coarse factor >= 1");
    if (record_every == 0) throw DomainError("record_every must be >= 1");
  }
};

/// Attractions of every agent, stored row-major (agent, market).
class Population {
 public:
  Population() = default;
  explicit Population(const SimulationConfig& cfg) : markets_(cfg.markets.size()) {
    for (std::size_t c = 0; c < cfg.classes.size(); ++c)
      for (std::size_t i = 0; i < cfg.classes[c].count; ++i) class_of_.push_back(static_cast<std::uint32_t>(c));
    attractions_.assign(class_of_.size() * markets_, 0.0);
  }

  std::size_t size() const noexcept { return class_of_.size(); }
  std::size_t markets() const noexcept { return markets_; }
  std::size_t class_of(std::size_t agent) const { return class_of_[agent]; }

  std::span<double> attractions(std::size_t agent) { return {attractions_.data() + agent * markets_, markets_}; }
  std::span<const double> attractions(std::size_t agent) const {
    return {attractions_.data() + agent * markets_, markets_};
  }

  /// (A_1 - A_2, A_1 - A_3); missing markets give 0 entries.
  Vec2 differences(std::size_t agent) const {
    const auto a = attractions(agent);
    return {markets_ > 1 ? a[0] - a[1] : 0.0, markets_ > 2 ? a[0] - a[2] : 0.0};
  }

  friend bool operator==(const Population&, const Population&) = default;

 private:
  std::size_t markets_ = 0;
  std::vector<std::uint32_t> class_of_;
  std::vector<double> attractions_;
};

struct Aggregates {
  std::size_t round = 0;
  double t = 0.0;                          ///< n r
  std::vector<std::optional<double>> f;    ///< buyers / sellers, empty without sellers
  std::vector<double> share;               ///< fraction of agents choosing each market
};

struct RoundResult {
  std::vector<RoundOutcome> outcomes;  ///< one per market
  Aggregates aggregates;
};

inline constexpr std::size_t kAgentChunk = 4096;

/// One trading period. Random numbers come from streams keyed by (seed, round,
/// agent chunk) and (seed, round, market), so a run is reproducible from its
/// seed alone.
inline RoundResult run_round(Population& pop, const SimulationConfig& cfg, std::size_t round) {
  const std::size_t M = cfg.markets.size();
  const std::size_t N = pop.size();
  std::vector<OrderBook> books(M);
  for (auto& b : books) {
    b.bids.reserve(N / M + 16);
    b.asks.reserve(N / M + 16);
  }
  std::vector<std::uint8_t> chosen(N);
  std::vector<double> p(M);
  for (std::size_t start = 0, chunk = 0; start < N; start += kAgentChunk, ++chunk) {
    Rng rng = make_stream(cfg.seed, round, 0, chunk);
    std::normal_distribution<double> gauss;
    const std::size_t end = std::min(N, start + kAgentChunk);
    for (std::size_t i = start; i < end; ++i) {
      const auto& spec = cfg.classes[pop.class_of(i)].spec;
      choice_probabilities_into(pop.attractions(i), spec.beta, p);
      const std::size_t m = sample_index(p, uniform01(rng));
      chosen[i] = static_cast<std::uint8_t>(m);
      if (sample_role(spec, rng) == Role::buyer)
        books[m].bids.push_back({i, cfg.orders.mu_bid + cfg.orders.sigma_bid * gauss(rng)});
      else
        books[m].asks.push_back({i, cfg.orders.mu_ask + cfg.orders.sigma_ask * gauss(rng)});
    }
  }

  RoundResult res;
  res.outcomes.reserve(M);
  res.aggregates.round = round;
  res.aggregates.t = static_cast<double>(round) * cfg.min_r();
  res.aggregates.f.resize(M);
  res.aggregates.share.resize(M);
  for (std::size_t m = 0; m < M; ++m) {
    Rng rng = make_stream(cfg.seed, round, 1, m);
    res.outcomes.push_back(run_auction(books[m], cfg.markets[m], rng));
    const auto nb = static_cast<double>(books[m].bids.size());
    const auto ns = static_cast<double>(books[m].asks.size());
    if (ns > 0.0) res.aggregates.f[m] = nb / ns;
    res.aggregates.share[m] = (nb + ns) / static_cast<double>(N);
  }
  for (const auto& out : res.outcomes)
    for (const auto& s : out.scores)
      update_attractions_inplace(pop.attractions(s.agent), chosen[s.agent], s.score,
                                 cfg.classes[pop.class_of(s.agent)].spec.r);
  return res;
}

/// 2-D histogram of (A_1 - A_2, A_1 - A_3) over [-range, range]^2.
struct AttractionHistogram {
  std::size_t class_id = 0;
  int bins = 200;
  double range = 1.0;
  std::vector<double> counts;  ///< bins x bins, index i * bins + j, i along dA_2
  double out_of_range = 0.0;   ///< mass that fell outside the grid

  AttractionHistogram() = default;
  AttractionHistogram(std::size_t cls, int n, double r)
      : class_id(cls), bins(n), range(r), counts(static_cast<std::size_t>(n) * static_cast<std::size_t>(n), 0.0) {}

  double width() const { return 2.0 * range / bins; }
  double center(int i) const { return -range + (i + 0.5) * width(); }
  Vec2 center(int i, int j) const { return {center(i), center(j)}; }
  double& at(int i, int j) { return counts[static_cast<std::size_t>(i) * static_cast<std::size_t>(bins) + static_cast<std::size_t>(j)]; }
  double at(int i, int j) const { return counts[static_cast<std::size_t>(i) * static_cast<std::size_t>(bins) + static_cast<std::size_t>(j)]; }

  double total() const {
    double s = out_of_range;
    for (double c : counts) s += c;
    return s;
  }

  /// Preferred market (0-based) of the bin: argmax of (0, -dA_2, -dA_3).
  std::size_t zone(int i, int j) const { return preferred_market(center(i, j)); }

  void add(const Vec2& d, double w = 1.0) {
    const double h = width();
    const double x = (d[0] + range) / h, y = (d[1] + range) / h;
    if (!(x >= 0.0 && x < bins && y >= 0.0 && y < bins)) {
      out_of_range += w;
      return;
    }
    at(static_cast<int>(x), static_cast<int>(y)) += w;
  }

  AttractionHistogram& operator+=(const AttractionHistogram& o) {
    for (std::size_t k = 0; k < counts.size(); ++k) counts[k] += o.counts[k];
    out_of_range += o.out_of_range;
    return *this;
  }

  AttractionHistogram normalized() const {
    AttractionHistogram h = *this;
    const double t = total();
    if (t > 0.0) {
      for (double& c : h.counts) c /= t;
      h.out_of_range /= t;
    }
    return h;
  }

  /// Sums blocks of `factor` x `factor` bins (the last block may be partial).
  AttractionHistogram coarsened(int factor) const {
    const int n = (bins + factor - 1) / factor;
    AttractionHistogram h(class_id, n, range * static_cast<double>(n * factor) / bins);
    for (int i = 0; i < bins; ++i)
      for (int j = 0; j < bins; ++j) h.at(i / factor, j / factor) += at(i, j);
    h.out_of_range = out_of_range;
    return h;
  }
};

/// Half-width of the default histogram grid: the 99.9th percentile of the
/// largest possible score, bid minus ask.
inline double default_histogram_range(const OrderDistribution& d) {
  return d.mu_bid - d.mu_ask + 3.090232306167813 * std::max(d.sigma_bid, d.sigma_ask);
}

inline AttractionHistogram attraction_histogram(const Population& pop, std::size_t class_id, int bins, double range) {
  if (bins < 1 || !(range > 0.0)) throw DomainError("attraction_histogram: invalid grid");
  AttractionHistogram h(class_id, bins, range);
  for (std::size_t i = 0; i < pop.size(); ++i)
    if (pop.class_of(i) == class_id) h.add(pop.differences(i));
  return h;
}

/// L1 distance between two histograms after normalising each to unit mass.
inline double histogram_distance(const AttractionHistogram& a, const AttractionHistogram& b) {
  const auto na = a.normalized(), nb = b.normalized();
  double d = std::abs(na.out_of_range - nb.out_of_range);
  for (std::size_t k = 0; k < na.counts.size(); ++k) d += std::abs(na.counts[k] - nb.counts[k]);
  return d;
}

struct Peak {
  Vec2 location = Vec2::Zero();  ///< mass centroid
  double weight = 0.0;
  std::size_t zone = 0;          ///< preferred market of the centroid
  std::size_t bins = 0;
};

struct PeakSet {
  std::size_t class_id = 0;
  std::vector<Peak> peaks;  ///< sorted by decreasing weight
};

/// Connected components (8-neighbour) of bins above `threshold` times the
/// largest bin. Weights are component masses normalised over all components.
inline PeakSet detect_peaks(const AttractionHistogram& h, double threshold = 0.01) {
  PeakSet ps;
  ps.class_id = h.class_id;
  const double top = h.counts.empty() ? 0.0 : *std::max_element(h.counts.begin(), h.counts.end());
  if (!(top > 0.0)) throw DomainError("detect_peaks: empty histogram");
  const int n = h.bins;
  std::vector<int> label(h.counts.size(), -1);
  std::vector<std::pair<int, int>> stack;
  double mass_all = 0.0;
  for (int i0 = 0; i0 < n; ++i0)
    for (int j0 = 0; j0 < n; ++j0) {
      const std::size_t k0 = static_cast<std::size_t>(i0) * static_cast<std::size_t>(n) + static_cast<std::size_t>(j0);
      if (label[k0] >= 0 || h.counts[k0] <= threshold * top) continue;
      const int id = static_cast<int>(ps.peaks.size());
      Peak pk;
      double mass = 0.0;
      Vec2 moment = Vec2::Zero();
      label[k0] = id;
      stack.push_back({i0, j0});
      while (!stack.empty()) {
        const auto [i, j] = stack.back();
        stack.pop_back();
        const double c = h.at(i, j);
        mass += c;
        moment += c * h.center(i, j);
        ++pk.bins;
        for (int di = -1; di <= 1; ++di)
          for (int dj = -1; dj <= 1; ++dj) {
            const int a = i + di, b = j + dj;
            if (a < 0 || b < 0 || a >= n || b >= n) continue;
            const std::size_t k = static_cast<std::size_t>(a) * static_cast<std::size_t>(n) + static_cast<std::size_t>(b);
            if (label[k] >= 0 || h.counts[k] <= threshold * top) continue;
            label[k] = id;
            stack.push_back({a, b});
          }
      }
      pk.location = moment / mass;
      pk.weight = mass;
      pk.zone = preferred_market(pk.location);
      mass_all += mass;
      ps.peaks.push_back(pk);
    }
  for (auto& pk : ps.peaks) pk.weight /= mass_all;
  std::sort(ps.peaks.begin(), ps.peaks.end(), [](const Peak& a, const Peak& b) { return a.weight > b.weight; });
  return ps;
}

struct SteadyStateResult {
  std::vector<AttractionHistogram> histograms;  ///< final window, one per class, counts summed over the window
  std::vector<PeakSet> peaks;
  std::vector<Aggregates> series;
  std::size_t rounds = 0;
  double last_distance = 0.0;
  bool converged = false;
};

/// Runs rounds until the coarse-grained class histograms of two consecutive
/// windows differ by less than the tolerance (L1), or max_rounds is reached.
inline SteadyStateResult run_to_steady_state(const SimulationConfig& cfg) {
  cfg.validate();
  Population pop(cfg);
  const std::size_t C = cfg.classes.size();
  const std::size_t W = cfg.steady_window();
  const double range = default_histogram_range(cfg.orders);
  SteadyStateResult res;
  std::vector<AttractionHistogram> prev, cur;
  auto fresh = [&] {
    std::vector<AttractionHistogram> v;
    for (std::size_t c = 0; c < C; ++c) v.emplace_back(c, cfg.bins, range);
    return v;
  };
  cur = fresh();
  std::size_t in_window = 0;
  for (std::size_t n = 0; n < cfg.max_rounds; ++n) {
    auto rr = run_round(pop, cfg, n);
    res.rounds = n + 1;
    rr.aggregates.round = n + 1;
    rr.aggregates.t = static_cast<double>(n + 1) * cfg.min_r();
    if (n % cfg.record_every == 0) res.series.push_back(std::move(rr.aggregates));
    for (std::size_t i = 0; i < pop.size(); ++i) cur[pop.class_of(i)].add(pop.differences(i));
    if (++in_window < W) continue;
    if (!prev.empty()) {
      double dist = 0.0;
      for (std::size_t c = 0; c < C; ++c)
        dist = std::max(dist, histogram_distance(prev[c].coarsened(cfg.coarse), cur[c].coarsened(cfg.coarse)));
      res.last_distance = dist;
      if (dist < cfg.tolerance) {
        res.converged = true;
        break;
      }
    }
    prev = std::move(cur);
    cur = fresh();
    in_window = 0;
  }
  res.histograms = res.converged || prev.empty() ? cur : prev;
  for (const auto& h : res.histograms) res.peaks.push_back(detect_peaks(h));
  return res;
}

}  // namespace mktfrag
