#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "wtpfl/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Federated wireless traffic prediction under poisoning attacks"};
  app.require_subcommand(1);
  app.set_version_flag("--version", WTPFL_VERSION);

  wtpfl::CommandOptions opts;
  std::string out_dir;
  std::uint64_t seed = 0;
  auto* out_opt = app.add_option("--out", out_dir, "Output directory (overrides output.dir)");
  auto* seed_opt = app.add_option("--seed", seed, "Overrides every seed field");
  app.add_option("--jobs", opts.jobs, "Parallel cells for matrix/sweep")->check(CLI::PositiveNumber);
  app.add_flag("--print-config", opts.print_config, "Print the resolved config and exit");

  std::string config;
  auto* run = app.add_subcommand("run", "Single experiment");
  run->add_option("config", config, "Config file (JSON)")->required();

  std::vector<std::string> aggregators;
  std::vector<std::string> attacks;
  auto* matrix = app.add_subcommand("matrix", "Aggregator x attack table");
  matrix->add_option("config", config, "Config file (JSON)")->required();
  matrix->add_option("--aggregators", aggregators, "e.g. mean,median,glid")->delimiter(',')->required();
  matrix->add_option("--attacks", attacks, "e.g. none,trim,fti")->delimiter(',')->required();

  std::string param;
  std::vector<std::string> values;
  auto* sweep = app.add_subcommand("sweep", "One run per parameter value");
  sweep->add_option("config", config, "Config file (JSON)")->required();
  sweep->add_option("--param", param, "fake_pct | eta0 | fleet_size | percentile_pair | estimator")
      ->required();
  sweep->add_option("--values", values, "Comma separated; pairs as lo:hi")->delimiter(',')->required();

  // Global options may also follow the subcommand.
  for (auto* sub : {run, matrix, sweep}) {
    sub->fallthrough();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return wtpfl::kExitInvalid;
  }

  if (*out_opt) opts.out_dir = out_dir;
  if (*seed_opt) opts.seed = seed;

  if (*run) return wtpfl::command_run(config, opts, std::cout, std::cerr);
  if (*matrix) return wtpfl::command_matrix(config, aggregators, attacks, opts, std::cout, std::cerr);
  return wtpfl::command_sweep(config, param, values, opts, std::cout, std::cerr);
}
