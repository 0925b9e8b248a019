// Command-line frontend: pseudosimple <task> [--config PATH] [--out DIR]
// [--seed N] [--threads N] [--verbose]. Environment variables
// PSEUDOSIMPLE_CONFIG, PSEUDOSIMPLE_OUT, PSEUDOSIMPLE_SEED,
// PSEUDOSIMPLE_THREADS and PSEUDOSIMPLE_VERBOSE stand in for absent flags.
//
// Exit codes: 0 success, 1 domain error, 2 usage or configuration error.

#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "pseudosimple/scenario.hpp"

int main(int argc, char** argv) {
  namespace cli = ps::cli;
  CLI::App app{"Equivariant dynamics near pseudo-simple heteroclinic cycles in R^4"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  bool verbose = false;
  app.add_option("--config", config_path, "Scenario file (JSON)")->envname("PSEUDOSIMPLE_CONFIG");
  app.add_option("--out", out_dir, "Output directory")->envname("PSEUDOSIMPLE_OUT");
  app.add_option("--seed", seed, "Random seed (overrides the config)")->envname("PSEUDOSIMPLE_SEED");
  app.add_option("--threads", threads, "Worker threads for sweeps and censuses")
      ->envname("PSEUDOSIMPLE_THREADS")
      ->check(CLI::PositiveNumber);
  app.add_flag("--verbose", verbose, "Progress messages on stderr")->envname("PSEUDOSIMPLE_VERBOSE");

  std::optional<cli::Task> task;
  auto* run = app.add_subcommand("run", "Run the task named in the config file")->fallthrough();
  for (const auto& [name, t] : cli::task_names()) {
    const cli::Task tt = t;
    app.add_subcommand(name, "Run the '" + name + "' task")->fallthrough()->callback([&task, tt] { task = tt; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (run->parsed() && config_path.empty()) throw ps::ConfigError("run: --config is required");
    cli::json doc = config_path.empty() ? cli::json::object() : cli::load_json(config_path);
    cli::ScenarioConfig cfg = cli::parse_config(doc, task);
    if (seed) cfg.seed = *seed;
    if (threads) cfg.threads = *threads;
    const std::string dir = !out_dir.empty() ? out_dir : !cfg.output.empty() ? cfg.output : "out";
    cli::Output out(dir, verbose);
    out.log("task " + cli::task_name(cfg.task) + ", output " + dir);
    const int rc = cli::run(cfg, out);
    for (const auto& f : out.written()) out.log("wrote " + f);
    return rc;
  } catch (const ps::ConfigError& e) {
    std::cerr << "pseudosimple: configuration error: " << e.what() << '\n';
    return 2;
  } catch (const ps::DomainError& e) {
    std::cerr << "pseudosimple: " << e.what() << '\n';
    return 1;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "pseudosimple: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "pseudosimple: internal error: " << e.what() << '\n';
    return 1;
  }
}
