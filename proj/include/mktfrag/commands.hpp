#pragma once

// Command layer: one verb per pipeline stage. Each verb turns a RunConfig into
// a ResultBundle (manifest, CSV tables, SVG figures); write_bundle persists it.

#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "config.hpp"
#include "svg.hpp"
#include "tables.hpp"
#include "thresholds.hpp"

namespace mktfrag {

enum ExitCode : int { kExitOk = 0, kExitConfig = 2, kExitConvergence = 3, kExitIo = 4 };

struct ResultBundle {
  Json manifest;
  std::vector<std::pair<std::string, std::string>> files;  ///< name, content
  int exit_code = kExitOk;

  void add_table(const std::string& stem, const Table& t) { files.emplace_back(stem + ".csv", to_csv(t)); }
  void add_svg(const std::string& stem, std::string body) { files.emplace_back(stem + ".svg", std::move(body)); }

  const std::string& file(const std::string& name) const {
    for (const auto& [n, body] : files)
      if (n == name) return body;
    throw IoError("bundle has no file " + name);
  }
};

inline const std::vector<std::string>& verbs() {
  static const std::vector<std::string> v{"simulate", "flow", "thresholds", "action", "phase", "count"};
  return v;
}

namespace detail {

inline void require_three_markets(const RunConfig& cfg, const std::string& verb) {
  if (cfg.markets.size() != kMarkets) throw ConfigError(verb + " requires exactly three markets");
}

inline Table aggregates_table(const RunConfig& cfg, const Aggregate3& f) {
  Table t;
  t.header = {"market", "theta", "f"};
  for (std::size_t m = 0; m < f.size(); ++m) t.add(m + 1, cfg.markets[m], f[m]);
  return t;
}

inline Table select_class(const Table& t, std::size_t c) {
  Table out;
  out.header = t.header;
  const std::string id = std::to_string(c + 1);
  for (std::size_t r = 0; r < t.rows.size(); ++r)
    if (t.cell(r, "class") == id) out.rows.push_back(t.rows[r]);
  return out;
}

inline void simulate(const RunConfig& cfg, ResultBundle& b) {
  const auto res = run_to_steady_state(cfg.simulation());
  std::vector<PeakSet> peaks;
  for (const auto& h : res.histograms) peaks.push_back(detect_peaks(h, cfg.simulate.peak_threshold));
  const Table series = series_table(res.series, cfg.markets.size());
  b.add_table("series", series);
  b.add_svg("series", render_series_svg(series, "aggregates"));
  for (std::size_t c = 0; c < res.histograms.size(); ++c) {
    const Table h = histogram_table(res.histograms[c]);
    const std::string stem = "histogram_class" + std::to_string(c + 1);
    b.add_table(stem, h);
    b.add_svg(stem, render_histogram_svg(h, "class " + std::to_string(c + 1)));
  }
  b.add_table("peaks", peaks_table(peaks));
  b.manifest["summary"] = {{"rounds", res.rounds}, {"converged", res.converged}, {"last_distance", res.last_distance}};
  if (!res.converged) {
    b.exit_code = kExitConvergence;
    b.manifest["error"] = "steady state not reached within max_rounds";
  }
}

inline Aggregate3 flow_aggregates(const RunConfig& cfg) {
  if (!cfg.flow.aggregates.empty()) return {cfg.flow.aggregates[0], cfg.flow.aggregates[1], cfg.flow.aggregates[2]};
  return homogeneous_fixed_point(cfg.model()).aggregates;
}

inline void flow(const RunConfig& cfg, ResultBundle& b) {
  require_three_markets(cfg, "flow");
  const ModelSpec model = cfg.model();
  const Aggregate3 f = flow_aggregates(cfg);
  b.add_table("aggregates", aggregates_table(cfg, f));
  std::vector<FixedPoint> all;
  std::vector<Table> flows;
  for (std::size_t c = 0; c < model.classes.size(); ++c) {
    const auto field = class_field(model, c, f);
    FixedPointSearch opt;
    opt.box = cfg.flow.box;
    auto pts = find_fixed_points(field, opt, {}, c).points;
    all.insert(all.end(), pts.begin(), pts.end());
    const double box = cfg.flow.box > 0.0 ? cfg.flow.box : default_search_box(field);
    flows.push_back(flow_table(field, c, box, cfg.flow.grid));
  }
  const Table fp = fixed_points_table(all);
  b.add_table("fixed_points", fp);
  Json counts = Json::array();
  for (std::size_t c = 0; c < flows.size(); ++c) {
    const std::string stem = "flow_class" + std::to_string(c + 1);
    b.add_table(stem, flows[c]);
    b.add_svg(stem, render_flow_svg(flows[c], select_class(fp, c), "class " + std::to_string(c + 1)));
    std::vector<FixedPoint> mine;
    for (const auto& p : all)
      if (p.class_id == c) mine.push_back(p);
    counts.push_back({{"fixed_points", mine.size()},
                      {"stable", count_with(mine, Stability::stable)},
                      {"saddle", count_with(mine, Stability::saddle)},
                      {"unstable", count_with(mine, Stability::unstable)}});
  }
  b.manifest["summary"] = {{"classes", counts}};
}

inline void thresholds(const RunConfig& cfg, ResultBundle& b) {
  const auto& t = cfg.thresholds;
  ThresholdReport rep;
  if (t.mode == "fair") {
    rep = fair_market_thresholds(cfg.orders, t.inv_beta_lo, t.inv_beta_hi, t.width, t.steps, cfg.classes.front().p_buy);
  } else {
    require_three_markets(cfg, "thresholds");
    const ModelSpec base = cfg.model();
    auto model_at = [base](double beta) {
      ModelSpec m = base;
      for (auto& c : m.classes) c.beta = beta;
      return m;
    };
    std::vector<ThresholdMonitor> mon;
    for (std::size_t c = 0; c < base.classes.size(); ++c)
      for (std::size_t m = 0; m < kMarkets; ++m) mon.push_back(peak_appearance_monitor(model_at, c, m));
    rep = scan_thresholds(mon, t.inv_beta_lo, t.inv_beta_hi, t.steps, t.width);
  }
  b.add_table("thresholds", thresholds_table(rep));
}

inline void action(const RunConfig& cfg, ResultBundle& b) {
  require_three_markets(cfg, "action");
  const ModelSpec model = cfg.model();
  ClassifyOptions opt;
  opt.r = cfg.action.r;
  opt.action = cfg.action_options();
  const auto s = classify_steady_state(model, opt);
  b.add_table("aggregates", aggregates_table(cfg, s.aggregates));
  b.add_table("peaks_classification", peaks_classification_table(s));
  Table tr, paths;
  for (std::size_t c = 0; c < s.classes.size(); ++c) {
    Table a = transitions_table(c, s.classes[c].transitions, opt.action);
    Table p = paths_table(c, s.classes[c].transitions);
    if (tr.header.empty()) tr.header = a.header, paths.header = p.header;
    tr.rows.insert(tr.rows.end(), a.rows.begin(), a.rows.end());
    paths.rows.insert(paths.rows.end(), p.rows.begin(), p.rows.end());
  }
  b.add_table("transitions", tr);
  b.add_table("paths", paths);
  Json codes = Json::array();
  for (const auto& c : s.codes) codes.push_back(c.str());
  b.manifest["summary"] = {{"codes", codes}, {"converged", s.converged}};
  if (!s.converged) {
    b.exit_code = kExitConvergence;
    b.manifest["error"] = "action minimization did not converge for every transition";
  }
}

inline void phase(const RunConfig& cfg, ResultBundle& b) {
  const auto pd = sweep_phase_diagram(cfg.sweep_spec());
  const Table t = phase_table(pd);
  b.add_table("phase", t);
  b.add_table("boundaries", boundaries_table(pd));
  b.add_svg("phase", render_phase_svg(t, "bias", to_string(pd.spec.scenario)));
}

inline void count(const RunConfig& cfg, ResultBundle& b) {
  const auto fp = enumerate_feasible_patterns(cfg.count.markets, cfg.count.classes);
  b.add_table("patterns", patterns_table(fp, cfg.count.markets, cfg.count.classes));
  b.manifest["summary"] = {{"patterns", fp.patterns.size()},
                           {"full_fragmentation_determined",
                            full_fragmentation_determined(cfg.count.markets, cfg.count.classes)},
                           {"disjoint_impossible", fp.disjoint_impossible}};
}

}  // namespace detail

/// Runs one verb. Numerical non-convergence yields a partial bundle with exit
/// code 3; configuration and I/O errors propagate as exceptions.
inline ResultBundle run_command(const std::string& verb, const RunConfig& cfg) {
  cfg.validate();
  ResultBundle b;
  b.manifest["artifact"] = "mktfrag";
  b.manifest["version"] = kArtifactVersion;
  b.manifest["verb"] = verb;
  b.manifest["seed"] = cfg.seed;
  b.manifest["config"] = serialize(cfg);
  try {
    if (verb == "simulate")
      detail::simulate(cfg, b);
    else if (verb == "flow")
      detail::flow(cfg, b);
    else if (verb == "thresholds")
      detail::thresholds(cfg, b);
    else if (verb == "action")
      detail::action(cfg, b);
    else if (verb == "phase")
      detail::phase(cfg, b);
    else if (verb == "count")
      detail::count(cfg, b);
    else
      throw ConfigError("unknown verb " + verb);
  } catch (const ConvergenceError& e) {
    b.exit_code = kExitConvergence;
    b.manifest["error"] = e.what();
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  } catch (const EmptySideError& e) {
    throw ConfigError(e.what());
  } catch (const SingularCovarianceError& e) {
    b.exit_code = kExitConvergence;
    b.manifest["error"] = e.what();
  }
  b.manifest["status"] = b.exit_code == kExitOk ? "complete" : "partial";
  Json names = Json::array();
  for (const auto& f : b.files) names.push_back(f.first);
  b.manifest["files"] = names;
  return b;
}

/// Writes manifest.json and every file of the bundle into `dir`.
inline void write_bundle(const ResultBundle& b, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  auto put = [&](const std::string& name, const std::string& body) {
    std::ofstream out(dir / name, std::ios::binary);
    out << body;
    if (!out) throw IoError("cannot write " + (dir / name).string());
  };
  for (const auto& [name, body] : b.files) put(name, body);
  put("manifest.json", b.manifest.dump(2) + "\n");
}

}  // namespace mktfrag
