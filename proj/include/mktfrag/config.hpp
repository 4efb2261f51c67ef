#pragma once

// Run configuration: a JSON document (grammar in docs/formats.md). Every
// section is optional; missing keys take the defaults below, unknown keys are
// rejected, and serialize() writes every field so a manifest reproduces a run.

#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "auction.hpp"
#include "error.hpp"
#include "learning.hpp"
#include "phases.hpp"
#include "simulate.hpp"

namespace mktfrag {

using Json = nlohmann::json;

inline constexpr const char* kArtifactVersion = "0.3.0";

struct ClassConfig {
  double p_buy = 0.5;
  double beta = 1.0;
  double r = 0.01;
  std::size_t count = 1000;

  friend bool operator==(const ClassConfig&, const ClassConfig&) = default;
};

struct SimulateSection {
  std::size_t max_rounds = 20000;
  std::size_t window = 0;
  double tolerance = 0.01;
  int bins = 200;
  int coarse = 8;
  std::size_t record_every = 10;
  double peak_threshold = 0.01;

  friend bool operator==(const SimulateSection&, const SimulateSection&) = default;
};

struct FlowSection {
  int grid = 24;                  ///< arrows per axis minus one
  double box = 0.0;               ///< 0 = search box of the field
  std::vector<double> aggregates; ///< empty = self-consistent homogeneous solution

  friend bool operator==(const FlowSection&, const FlowSection&) = default;
};

struct ThresholdsSection {
  std::string mode = "fair";  ///< fair | peaks
  double inv_beta_lo = 0.20;
  double inv_beta_hi = 0.30;
  int steps = 40;
  double width = 1e-4;

  friend bool operator==(const ThresholdsSection&, const ThresholdsSection&) = default;
};

struct ActionSection {
  std::size_t steps = 10;
  double total_time = 10.0;
  double gradient_tol = 1e-8;
  int max_iterations = 5000;
  double r = 0.0;  ///< learning rate of the peak threshold; 0 = r -> 0 limit

  friend bool operator==(const ActionSection&, const ActionSection&) = default;
};

struct PhaseSection {
  std::string sweep = "symmetric-fair";
  double bias_lo = 0.05, bias_hi = 0.5;
  int bias_nodes = 40;
  double inv_beta_lo = 0.16, inv_beta_hi = 0.30;
  int inv_beta_nodes = 40;
  bool refine = true;

  friend bool operator==(const PhaseSection&, const PhaseSection&) = default;
};

struct CountSection {
  int markets = 3;
  int classes = 2;

  friend bool operator==(const CountSection&, const CountSection&) = default;
};

struct RunConfig {
  std::string scenario = "default";
  std::vector<double> markets{0.5, 0.5, 0.5};
  std::vector<ClassConfig> classes{ClassConfig{0.8}, ClassConfig{0.2}};
  OrderDistribution orders;
  std::uint64_t seed = 1;
  std::string output = "out";
  SimulateSection simulate;
  FlowSection flow;
  ThresholdsSection thresholds;
  ActionSection action;
  PhaseSection phase;
  CountSection count;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;

  std::vector<MarketSpec> market_specs() const {
    std::vector<MarketSpec> m;
    for (double t : markets) m.push_back({t});
    return m;
  }

  std::vector<TraderClassSpec> class_specs() const {
    std::vector<TraderClassSpec> v;
    for (std::size_t c = 0; c < classes.size(); ++c) v.push_back({classes[c].p_buy, classes[c].beta, classes[c].r, c});
    return v;
  }

  std::vector<double> class_weights() const {
    std::vector<double> w;
    for (const auto& c : classes) w.push_back(static_cast<double>(c.count));
    return w;
  }

  ModelSpec model() const { return {market_specs(), class_specs(), class_weights(), orders}; }

  SimulationConfig simulation() const {
    SimulationConfig s;
    s.markets = market_specs();
    for (const auto& c : class_specs()) s.classes.push_back({c, classes[c.id].count});
    s.orders = orders;
    s.max_rounds = simulate.max_rounds;
    s.seed = seed;
    s.window = simulate.window;
    s.tolerance = simulate.tolerance;
    s.bins = simulate.bins;
    s.coarse = simulate.coarse;
    s.record_every = simulate.record_every;
    return s;
  }

  ActionOptions action_options() const {
    return {action.steps, action.total_time, action.gradient_tol, action.max_iterations};
  }

  Scenario sweep_scenario() const {
    for (auto s : {Scenario::symmetric_fair, Scenario::two_symmetric, Scenario::fixed_pair})
      if (phase.sweep == to_string(s)) return s;
    throw ConfigError("phase.sweep must be symmetric-fair, two-symmetric or fixed-pair");
  }

  PhaseSweepSpec sweep_spec() const {
    PhaseSweepSpec s;
    s.scenario = sweep_scenario();
    s.bias_lo = phase.bias_lo, s.bias_hi = phase.bias_hi, s.bias_nodes = phase.bias_nodes;
    s.inv_beta_lo = phase.inv_beta_lo, s.inv_beta_hi = phase.inv_beta_hi, s.inv_beta_nodes = phase.inv_beta_nodes;
    s.classes = class_specs();
    s.class_weights = class_weights();
    s.orders = orders;
    s.classify.r = action.r;
    s.classify.action = action_options();
    s.refine = phase.refine;
    return s;
  }

  /// Checks every invariant; throws ConfigError naming the first violation.
  void validate() const {
    try {
      if (markets.empty()) throw DomainError("markets must not be empty");
      for (const auto& m : market_specs()) m.validate();
      if (classes.empty()) throw DomainError("classes must not be empty");
      for (const auto& c : class_specs()) c.validate();
      for (const auto& c : classes)
        if (c.count == 0) throw DomainError("class count must be positive");
      orders.validate();
      if (!(simulate.tolerance > 0.0)) throw DomainError("simulate.tolerance must be > 0");
      if (simulate.bins < 2 || simulate.coarse < 1) throw DomainError("simulate.bins must be >= 2 and coarse >= 1");
      if (simulate.record_every == 0) throw DomainError("simulate.record_every must be >= 1");
      if (!(simulate.peak_threshold > 0.0 && simulate.peak_threshold < 1.0))
        throw DomainError("simulate.peak_threshold out of (0,1)");
      if (flow.grid < 1 || flow.box < 0.0) throw DomainError("flow.grid must be >= 1 and flow.box >= 0");
      if (!flow.aggregates.empty() && flow.aggregates.size() != markets.size())
        throw DomainError("flow.aggregates needs one entry per market");
      for (double f : flow.aggregates)
        if (!(f > 0.0)) throw DomainError("flow.aggregates must be > 0");
      if (thresholds.mode != "fair" && thresholds.mode != "peaks") throw DomainError("thresholds.mode must be fair or peaks");
      if (!(thresholds.inv_beta_lo > 0.0 && thresholds.inv_beta_hi > thresholds.inv_beta_lo))
        throw DomainError("thresholds: need 0 < inv_beta_lo < inv_beta_hi");
      if (thresholds.steps < 1 || !(thresholds.width > 0.0)) throw DomainError("thresholds: steps >= 1 and width > 0");
      if (action.steps < 2 || !(action.total_time > 0.0)) throw DomainError("action: K >= 2 and T > 0");
      if (!(action.gradient_tol > 0.0) || action.max_iterations < 1) throw DomainError("action: bad optimizer settings");
      if (!(action.r >= 0.0 && action.r <= 1.0)) throw DomainError("action.r out of [0,1]");
      sweep_scenario();
      if (phase.bias_nodes < 1 || phase.inv_beta_nodes < 2) throw DomainError("phase: need >= 1 bias and >= 2 beta nodes");
      if (!(phase.bias_lo >= 0.0 && phase.bias_hi <= 1.0 && phase.bias_hi >= phase.bias_lo))
        throw DomainError("phase: bias range out of [0,1]");
      if (!(phase.inv_beta_lo > 0.0 && phase.inv_beta_hi > phase.inv_beta_lo))
        throw DomainError("phase: need 0 < inv_beta_lo < inv_beta_hi");
      if (count.markets < 1 || count.classes < 1) throw DomainError("count: M and C must be >= 1");
    } catch (const DomainError& e) {
      throw ConfigError(e.what());
    }
  }
};

namespace detail {

inline std::pair<std::size_t, std::size_t> line_column(const std::string& text, std::size_t offset) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < std::min(offset, text.size()); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col > 1 ? col - 1 : 1};
}

/// Reads the keys of one JSON object, rejecting any not read by the caller.
class ObjectReader {
 public:
  ObjectReader(const Json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + " must be an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const Json::exception&) {
      throw ConfigError(path(key) + " has the wrong type");
    }
  }

  bool has(const char* key) const { return j_.contains(key); }
  const Json& at(const char* key) {
    seen_.insert(key);
    return j_.at(key);
  }
  std::string path(const char* key) const { return where_.empty() ? key : where_ + "." + key; }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) throw ConfigError("unknown key " + (where_.empty() ? k : where_ + "." + k));
  }

 private:
  const Json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

}  // namespace detail

/// Builds a validated config from a parsed document. A manifest (an object
/// with "artifact" and "config") is accepted and its config snapshot used.
inline RunConfig config_from_json(const Json& doc) {
  const Json& j = doc.is_object() && doc.contains("artifact") && doc.contains("config") ? doc.at("config") : doc;
  RunConfig c;
  detail::ObjectReader top(j, "");
  top.get("scenario", c.scenario);
  top.get("markets", c.markets);
  if (top.has("classes")) {
    const Json& arr = top.at("classes");
    if (!arr.is_array()) throw ConfigError("classes must be an array");
    c.classes.clear();
    for (std::size_t k = 0; k < arr.size(); ++k) {
      detail::ObjectReader o(arr[k], "classes[" + std::to_string(k) + "]");
      ClassConfig cc;
      o.get("p_buy", cc.p_buy);
      if (o.has("beta") && o.has("inv_beta")) throw ConfigError(o.path("beta") + " and inv_beta are exclusive");
      o.get("beta", cc.beta);
      if (o.has("inv_beta")) {
        double inv = 0.0;
        o.get("inv_beta", inv);
        if (!(inv > 0.0)) throw ConfigError(o.path("inv_beta") + " must be > 0");
        cc.beta = 1.0 / inv;
      }
      o.get("r", cc.r);
      o.get("count", cc.count);
      o.finish();
      c.classes.push_back(cc);
    }
  }
  if (top.has("orders")) {
    detail::ObjectReader o(top.at("orders"), "orders");
    o.get("mu_ask", c.orders.mu_ask);
    o.get("mu_bid", c.orders.mu_bid);
    o.get("sigma_ask", c.orders.sigma_ask);
    o.get("sigma_bid", c.orders.sigma_bid);
    o.finish();
  }
  top.get("seed", c.seed);
  top.get("output", c.output);
  if (top.has("simulate")) {
    detail::ObjectReader o(top.at("simulate"), "simulate");
    auto& s = c.simulate;
    o.get("max_rounds", s.max_rounds);
    o.get("window", s.window);
    o.get("tolerance", s.tolerance);
    o.get("bins", s.bins);
    o.get("coarse", s.coarse);
    o.get("record_every", s.record_every);
    o.get("peak_threshold", s.peak_threshold);
    o.finish();
  }
  if (top.has("flow")) {
    detail::ObjectReader o(top.at("flow"), "flow");
    o.get("grid", c.flow.grid);
    o.get("box", c.flow.box);
    o.get("aggregates", c.flow.aggregates);
    o.finish();
  }
  if (top.has("thresholds")) {
    detail::ObjectReader o(top.at("thresholds"), "thresholds");
    auto& t = c.thresholds;
    o.get("mode", t.mode);
    o.get("inv_beta_lo", t.inv_beta_lo);
    o.get("inv_beta_hi", t.inv_beta_hi);
    o.get("steps", t.steps);
    o.get("width", t.width);
    o.finish();
  }
  if (top.has("action")) {
    detail::ObjectReader o(top.at("action"), "action");
    auto& a = c.action;
    o.get("K", a.steps);
    o.get("T", a.total_time);
    o.get("gradient_tol", a.gradient_tol);
    o.get("max_iterations", a.max_iterations);
    o.get("r", a.r);
    o.finish();
  }
  if (top.has("phase")) {
    detail::ObjectReader o(top.at("phase"), "phase");
    auto& p = c.phase;
    o.get("sweep", p.sweep);
    o.get("bias_lo", p.bias_lo);
    o.get("bias_hi", p.bias_hi);
    o.get("bias_nodes", p.bias_nodes);
    o.get("inv_beta_lo", p.inv_beta_lo);
    o.get("inv_beta_hi", p.inv_beta_hi);
    o.get("inv_beta_nodes", p.inv_beta_nodes);
    o.get("refine", p.refine);
    o.finish();
  }
  if (top.has("count")) {
    detail::ObjectReader o(top.at("count"), "count");
    o.get("M", c.count.markets);
    o.get("C", c.count.classes);
    o.finish();
  }
  top.finish();
  c.validate();
  return c;
}

inline RunConfig parse_config(const std::string& text) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const Json::parse_error& e) {
    const auto [line, col] = detail::line_column(text, e.byte);
    std::string msg = e.what();
    if (const auto p = msg.find("column "); p != std::string::npos)
      if (const auto q = msg.find(": ", p); q != std::string::npos) msg = msg.substr(q + 2);
    throw ConfigError("line " + std::to_string(line) + ", column " + std::to_string(col) + ": " + msg);
  }
  return config_from_json(doc);
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

/// Every field, defaults included.
inline Json serialize(const RunConfig& c) {
  Json j;
  j["scenario"] = c.scenario;
  j["markets"] = c.markets;
  j["classes"] = Json::array();
  for (const auto& k : c.classes) j["classes"].push_back({{"p_buy", k.p_buy}, {"beta", k.beta}, {"r", k.r}, {"count", k.count}});
  j["orders"] = {{"mu_ask", c.orders.mu_ask},
                 {"mu_bid", c.orders.mu_bid},
                 {"sigma_ask", c.orders.sigma_ask},
                 {"sigma_bid", c.orders.sigma_bid}};
  j["seed"] = c.seed;
  j["output"] = c.output;
  const auto& s = c.simulate;
  j["simulate"] = {{"max_rounds", s.max_rounds}, {"window", s.window},       {"tolerance", s.tolerance},
                   {"bins", s.bins},             {"coarse", s.coarse},       {"record_every", s.record_every},
                   {"peak_threshold", s.peak_threshold}};
  j["flow"] = {{"grid", c.flow.grid}, {"box", c.flow.box}, {"aggregates", c.flow.aggregates}};
  const auto& t = c.thresholds;
  j["thresholds"] = {{"mode", t.mode},   {"inv_beta_lo", t.inv_beta_lo}, {"inv_beta_hi", t.inv_beta_hi},
                     {"steps", t.steps}, {"width", t.width}};
  const auto& a = c.action;
  j["action"] = {{"K", a.steps},
                 {"T", a.total_time},
                 {"gradient_tol", a.gradient_tol},
                 {"max_iterations", a.max_iterations},
                 {"r", a.r}};
  const auto& p = c.phase;
  j["phase"] = {{"sweep", p.sweep},
                {"bias_lo", p.bias_lo},
                {"bias_hi", p.bias_hi},
                {"bias_nodes", p.bias_nodes},
                {"inv_beta_lo", p.inv_beta_lo},
                {"inv_beta_hi", p.inv_beta_hi},
                {"inv_beta_nodes", p.inv_beta_nodes},
                {"refine", p.refine}};
  j["count"] = {{"M", c.count.markets}, {"C", c.count.classes}};
  return j;
}

}  // namespace mktfrag
