// solve <command> --config <path> [--seed N] [--repeats N] [--workers N] [--out DIR]

#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "bsbu/cli/commands.hpp"

int main(int argc, char** argv) {
  using namespace bsbu::cli;
  CLI::App app{"Least-squares Monte Carlo experiments for the variable annuity contract"};
  app.set_version_flag("--version", BSBU_VERSION);

  std::string command;
  std::string config_path;
  std::optional<long long> seed;
  std::optional<int> repeats;
  std::optional<int> workers;
  std::optional<std::string> out_dir;
  app.add_option("command", command, "price | compare-regression | compare-simulation | convergence-sweep | oracle-check")
      ->required();
  app.add_option("--config", config_path, "key = value configuration file")->required();
  app.add_option("--seed", seed, "override solver.seed")->check(CLI::NonNegativeNumber);
  app.add_option("--repeats", repeats, "override solver.repeats")->check(CLI::PositiveNumber);
  app.add_option("--workers", workers, "worker threads (0 = logical CPUs)")->check(CLI::NonNegativeNumber);
  app.add_option("--out", out_dir, "output directory (overrides output.dir)");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  Command cmd;
  ExperimentConfig cfg;
  try {
    cmd = parse_command(command);
    std::ifstream in(config_path, std::ios::binary);
    if (!in) throw bsbu::ValidationError("cannot read config file '" + config_path + "'");
    std::ostringstream text;
    text << in.rdbuf();
    cfg = parse_config(text.str());
    if (seed) cfg.solver.seed = static_cast<std::uint64_t>(*seed);
    if (repeats) cfg.solver.repeats = *repeats;
    if (workers) cfg.solver.workers = *workers;
    if (out_dir) cfg.output_dir = *out_dir;
    cfg.solver.validate();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return run_command(cmd, cfg, cfg.output_dir, std::cerr);
}
