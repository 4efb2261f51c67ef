// mktfrag: market fragmentation pipeline.
//
//   mktfrag simulate fig5.json -o out/fig5
//   mktfrag count M=3 C=2

#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mktfrag/commands.hpp"

namespace {

void apply_assignment(mktfrag::RunConfig& cfg, const std::string& arg) {
  const auto eq = arg.find('=');
  const std::string key = arg.substr(0, eq), value = arg.substr(eq + 1);
  int v = 0;
  try {
    std::size_t used = 0;
    v = std::stoi(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
  } catch (const std::exception&) {
    throw mktfrag::ConfigError("expected an integer in " + arg);
  }
  if (key == "M")
    cfg.count.markets = v;
  else if (key == "C")
    cfg.count.classes = v;
  else
    throw mktfrag::ConfigError("unknown assignment " + arg + " (expected M=<int> or C=<int>)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Market fragmentation: simulation, flow analysis, transition actions and phase diagrams"};
  app.require_subcommand(1);

  std::vector<std::string> args;
  std::string output;
  std::uint64_t seed = 0;
  unsigned threads = 0;
  bool print_config = false;

  for (const auto& verb : mktfrag::verbs()) {
    auto* sub = app.add_subcommand(verb, "run the " + verb + " stage");
    sub->add_option("args", args, verb == "count" ? "config file and/or M=<int> C=<int>" : "config file (JSON)");
    sub->add_option("-o,--output", output, "output directory (overrides the config)");
    sub->add_option("--seed", seed, "random seed (overrides the config)");
    sub->add_option("--threads", threads, "worker threads (same as MKTFRAG_THREADS)");
    sub->add_flag("--print-config", print_config, "print the resolved config and exit");
  }

  CLI11_PARSE(app, argc, argv);
  const std::string verb = app.get_subcommands().front()->get_name();
  auto* sub = app.get_subcommands().front();

  try {
    mktfrag::RunConfig cfg;
    std::vector<std::string> assignments;
    std::string path;
    for (const auto& a : args) {
      if (a.find('=') != std::string::npos)
        assignments.push_back(a);
      else if (path.empty())
        path = a;
      else
        throw mktfrag::ConfigError("more than one config file given");
    }
    if (!assignments.empty() && verb != "count") throw mktfrag::ConfigError("M=/C= assignments only apply to count");
    if (!path.empty()) cfg = mktfrag::load_config(path);
    for (const auto& a : assignments) apply_assignment(cfg, a);
    if (sub->count("--seed")) cfg.seed = seed;
    if (!output.empty()) cfg.output = output;
    if (threads > 0) setenv("MKTFRAG_THREADS", std::to_string(threads).c_str(), 1);
    cfg.validate();

    if (print_config) {
      std::cout << mktfrag::serialize(cfg).dump(2) << '\n';
      return mktfrag::kExitOk;
    }

    const auto bundle = mktfrag::run_command(verb, cfg);
    mktfrag::write_bundle(bundle, cfg.output);
    std::cout << verb << ": " << bundle.manifest["status"].get<std::string>() << ", " << bundle.files.size()
              << " files in " << cfg.output << '\n';
    if (bundle.manifest.contains("summary")) std::cout << bundle.manifest["summary"].dump() << '\n';
    if (bundle.manifest.contains("error"))
      std::cerr << "warning: " << bundle.manifest["error"].get<std::string>() << '\n';
    return bundle.exit_code;
  } catch (const mktfrag::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return mktfrag::kExitConfig;
  } catch (const mktfrag::IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return mktfrag::kExitIo;
  } catch (const mktfrag::ConvergenceError& e) {
    std::cerr << "no convergence: " << e.what() << '\n';
    return mktfrag::kExitConvergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
