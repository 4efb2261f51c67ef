#pragma once

// Single-round clearing-house double auction: uniform price between the
// average ask and average bid, invalidation of orders on the wrong side of the
// price, and uniform random pairing of the remaining buyers and sellers.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "error.hpp"
#include "rng.hpp"

namespace mktfrag {

/// Gaussian bid and ask distributions shared by every trader.
struct OrderDistribution {
  double mu_ask = 0.0;
  double mu_bid = 1.0;
  double sigma_ask = 1.0;
  double sigma_bid = 1.0;

  void validate() const {
    if (!std::isfinite(mu_ask) || !std::isfinite(mu_bid)) throw DomainError("order distribution means must be finite");
    if (!(mu_bid > mu_ask)) throw DomainError("order distribution requires mu_bid > mu_ask");
    if (!(sigma_ask > 0.0) || !(sigma_bid > 0.0) || !std::isfinite(sigma_ask) || !std::isfinite(sigma_bid))
      throw DomainError("order distribution sigmas must be finite and > 0");
  }

  friend bool operator==(const OrderDistribution&, const OrderDistribution&) = default;
};

/// A market is characterised by its bias theta; theta = 0.5 is a fair market.
struct MarketSpec {
  double theta = 0.5;

  bool fair() const noexcept { return theta == 0.5; }

  void validate() const {
    if (!(theta >= 0.0 && theta <= 1.0)) throw DomainError("theta out of [0,1]");
  }

  friend bool operator==(const MarketSpec&, const MarketSpec&) = default;
};

struct Order {
  std::size_t agent = 0;
  double price = 0.0;
};

/// Orders submitted to one market in one clearing period.
struct OrderBook {
  std::vector<Order> bids;
  std::vector<Order> asks;
};

struct Trade {
  std::size_t buyer = 0;
  std::size_t seller = 0;
};

struct AgentScore {
  std::size_t agent = 0;
  double score = 0.0;
};

struct RoundOutcome {
  std::optional<double> price;   // empty when a side of the book was empty
  std::vector<Trade> trades;
  std::vector<AgentScore> scores;  // one entry per participant
};

namespace detail {
inline double mean_price(std::span<const Order> orders) {
  double s = 0.0;
  for (const auto& o : orders) s += o.price;
  return s / static_cast<double>(orders.size());
}
}  // namespace detail

/// pi = <a> + theta (<b> - <a>), with <.> the arithmetic mean of the book side.
inline double clearing_price(const OrderBook& book, const MarketSpec& market) {
  if (book.bids.empty() || book.asks.empty())
    throw EmptySideError("clearing_price: market has no bids or no asks");
  const double mean_ask = detail::mean_price(book.asks);
  const double mean_bid = detail::mean_price(book.bids);
  return mean_ask + market.theta * (mean_bid - mean_ask);
}

struct ValidOrders {
  std::vector<Order> bids;
  std::vector<Order> asks;
};

/// Bids at or above the price and asks at or below it are executable.
inline ValidOrders validate_orders(const OrderBook& book, double price) {
  ValidOrders v;
  v.bids.reserve(book.bids.size());
  v.asks.reserve(book.asks.size());
  for (const auto& b : book.bids)
    if (b.price >= price) v.bids.push_back(b);
  for (const auto& a : book.asks)
    if (a.price <= price) v.asks.push_back(a);
  return v;
}

/// Pairs min(#bids, #asks) buyers with sellers uniformly at random. Matched
/// buyers score b - price, matched sellers price - a, unmatched orders score 0.
inline RoundOutcome match_and_score(std::span<const Order> bids, std::span<const Order> asks, double price, Rng& rng) {
  RoundOutcome out;
  out.price = price;
  std::vector<std::size_t> bi(bids.size()), ai(asks.size());
  std::iota(bi.begin(), bi.end(), std::size_t{0});
  std::iota(ai.begin(), ai.end(), std::size_t{0});
  std::shuffle(bi.begin(), bi.end(), rng);
  std::shuffle(ai.begin(), ai.end(), rng);

  const std::size_t k = std::min(bids.size(), asks.size());
  out.trades.reserve(k);
  out.scores.reserve(bids.size() + asks.size());
  for (std::size_t i = 0; i < k; ++i) {
    const Order& b = bids[bi[i]];
    const Order& a = asks[ai[i]];
    out.trades.push_back({b.agent, a.agent});
    out.scores.push_back({b.agent, b.price - price});
    out.scores.push_back({a.agent, price - a.price});
  }
  for (std::size_t i = k; i < bi.size(); ++i) out.scores.push_back({bids[bi[i]].agent, 0.0});
  for (std::size_t i = k; i < ai.size(); ++i) out.scores.push_back({asks[ai[i]].agent, 0.0});
  return out;
}

/// Full clearing of one market: price, validation, matching. Participants
/// whose order was invalid (or whose market had an empty side) score 0.
inline RoundOutcome run_auction(const OrderBook& book, const MarketSpec& market, Rng& rng) {
  if (book.bids.empty() || book.asks.empty()) {
    RoundOutcome out;
    out.scores.reserve(book.bids.size() + book.asks.size());
    for (const auto& o : book.bids) out.scores.push_back({o.agent, 0.0});
    for (const auto& o : book.asks) out.scores.push_back({o.agent, 0.0});
    return out;
  }
  const double price = clearing_price(book, market);
  ValidOrders valid = validate_orders(book, price);
  RoundOutcome out = match_and_score(valid.bids, valid.asks, price, rng);
  for (const auto& o : book.bids)
    if (o.price < price) out.scores.push_back({o.agent, 0.0});
  for (const auto& o : book.asks)
    if (o.price > price) out.scores.push_back({o.agent, 0.0});
  return out;
}

}  // namespace mktfrag
