// nbm: train interface-problem surrogates from JSON configs.
//
//   nbm solve --config configs/sphere_jump.json [--seed S] [--epochs E] [--workers W]
//             [--resolution N] [--out DIR] [--log-every K]
//   nbm sweep --config configs/sphere_jump.json --resolutions 8,16
//   nbm check --config configs/sphere_jump.json

#include <iostream>

#include "CLI11.hpp"
#include "nbm/app.hpp"

int main(int argc, char** argv) {
  CLI::App cli{"Neural bootstrapping solver for elliptic interface problems"};
  cli.require_subcommand(1);

  std::string config;
  nbm::app::Overrides ov;
  std::uint64_t seed = 0;
  int epochs = 0, workers = 0, resolution = 0;
  std::string out;
  std::vector<int> resolutions;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config, "JSON run configuration")->required();
    sub->add_option("--seed", seed, "override train.seed");
    sub->add_option("--epochs", epochs, "override train.epochs");
    sub->add_option("--workers", workers, "override train.workers");
    sub->add_option("--resolution", resolution, "override train.base_resolution");
    sub->add_option("--out", out, "override output_dir");
    sub->add_option("--log-every", ov.log_every, "print the loss every K epochs");
  };
  auto* solve = cli.add_subcommand("solve", "train one configuration");
  add_common(solve);
  auto* sweep = cli.add_subcommand("sweep", "train at several base resolutions and tabulate convergence");
  add_common(sweep);
  sweep->add_option("--resolutions", resolutions, "ascending powers of two, e.g. 8,16")->delimiter(',')->required();
  auto* check = cli.add_subcommand("check", "run the verification oracles");
  add_common(check);

  try {
    cli.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return cli.exit(e) == 0 ? 0 : nbm::app::kConfigError;
  }

  auto given = [](CLI::App* sub, const char* name) { return sub->count(name) > 0; };
  CLI::App* active = solve->parsed() ? solve : sweep->parsed() ? sweep : check;
  if (given(active, "--seed")) ov.seed = seed;
  if (given(active, "--epochs")) ov.epochs = epochs;
  if (given(active, "--workers")) ov.workers = workers;
  if (given(active, "--resolution")) ov.resolution = resolution;
  if (given(active, "--out")) ov.out = out;

  if (active == solve) return nbm::app::cmd_solve(config, ov, std::cout, std::cerr);
  if (active == sweep) return nbm::app::cmd_sweep(config, resolutions, ov, std::cout, std::cerr);
  return nbm::app::cmd_check(config, ov, std::cout, std::cerr);
}
