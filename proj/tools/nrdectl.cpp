#include <iostream>

#include <CLI11.hpp>

#include "nrdectl/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Neural RDE feedback controls for non-Markovian stochastic control"};
  app.require_subcommand(1);
  nrdectl::CliOptions o;
  std::uint64_t seed = 0;

  auto common = [&](CLI::App* cmd, bool config_required) {
    auto* c = cmd->add_option("--config", o.config, "experiment config (YAML)");
    if (config_required) c->required();
    cmd->add_option("--out", o.out, "output directory (overrides output.dir)");
    cmd->add_option("--seed", seed, "master seed (overrides the config)");
    cmd->add_option("--workers", o.workers, "parallel trajectory workers")->check(CLI::PositiveNumber);
    cmd->add_option("--profile", o.profile, "config profile to apply (e.g. smoke, full)");
    cmd->add_flag("--quiet", o.quiet, "suppress progress output");
  };

  auto* train = app.add_subcommand("train", "train a policy and evaluate it");
  common(train, true);
  auto* evaluate = app.add_subcommand("evaluate", "evaluate a checkpoint on the evaluation grid");
  common(evaluate, true);
  evaluate->add_option("--checkpoint", o.checkpoint, "checkpoint file (default <out>/checkpoint.json)");
  auto* sweep = app.add_subcommand("sweep", "train at several resolutions and evaluate on the full grid");
  common(sweep, true);
  sweep->add_option("--models", o.models, "models to sweep (nrde rnn lstm gru)");
  sweep->add_option("--fractions", o.fractions, "training resolutions as fractions of the evaluation grid");
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference checks of all backward rules");
  common(gradcheck, false);
  std::size_t trials = 0;
  gradcheck->add_option("--trials", trials, "number of randomized checks");
  gradcheck->add_flag("--inject-fault", o.inject_fault, "include a deliberately wrong backward rule");
  auto* sigdemo = app.add_subcommand("sigdemo", "signature regression of a nonlinear RDE functional");
  common(sigdemo, false);
  std::size_t n_max = 0, samples = 0;
  sigdemo->add_option("--n-max", n_max, "largest truncation level");
  sigdemo->add_option("--samples", samples, "training paths");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : nrdectl::kExitConfigError;
  }
  CLI::App* cmd = app.get_subcommands().front();
  if (cmd->count("--seed")) o.seed = seed;
  if (gradcheck->count("--trials")) o.trials = trials;
  if (sigdemo->count("--n-max")) o.n_max = n_max;
  if (sigdemo->count("--samples")) o.samples = samples;
  return nrdectl::run_command(cmd->get_name(), o, std::cout, std::cerr);
}
