#include <iostream>

#include <CLI11.hpp>

#include "mfrn/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Mean-field ResNet training: transport solver, adjoint gradients, scenarios"};
  app.require_subcommand(1);

  mfrn::cli::RunOptions opts;
  std::uint64_t seed = 0;
  std::string activation;
  auto* run = app.add_subcommand("run", "Run a scenario config and write CSV artifacts");
  run->add_option("--config", opts.config, "Scenario config (JSON)")->required();
  run->add_option("--out", opts.out, "Output directory")->required();
  auto* seed_opt = run->add_option("--seed", seed, "Override the config seed");
  auto* act_opt = run->add_option("--activation", activation,
                                  "Override the activation (identity, relu, sigmoid, tanh, gcu)");

  std::filesystem::path dir_a, dir_b, out;
  auto* cmp = app.add_subcommand("compare", "Align histories and controls of two runs");
  cmp->add_option("dirA", dir_a, "First run directory")->required();
  cmp->add_option("dirB", dir_b, "Second run directory")->required();
  cmp->add_option("--out", out, "Output CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : mfrn::cli::kInvalidConfig;
  }

  if (run->parsed()) {
    if (seed_opt->count() > 0) opts.seed = seed;
    if (act_opt->count() > 0) opts.activation = activation;
    opts.threads = mfrn::cli::threads_from_env();
    return mfrn::cli::run(opts, std::cout, std::cerr);
  }
  return mfrn::cli::compare(dir_a, dir_b, out, std::cerr);
}
