#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "nrdectl/config.hpp"

namespace nrdectl {

enum ExitCode : int { kExitOk = 0, kExitCheckFailed = 1, kExitConfigError = 2, kExitNumerical = 3 };

struct CliOptions {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::size_t workers = 1;
  std::string profile;
  std::string checkpoint;
  std::vector<std::string> models;
  std::vector<double> fractions;
  std::optional<std::size_t> trials;
  bool inject_fault = false;
  std::optional<std::size_t> n_max;
  std::optional<std::size_t> samples;
  bool quiet = false;
};

/// Oracle comparison attached to train/evaluate results when the problem
/// has a closed-form reduction (lq-fbm with H = 1/2, portfolio with mu2 = 0).
void attach_oracle(ExperimentResult& result, const ControlProblem& problem, const Policy& policy,
                   const ParameterSet& params, const TrainConfig& train);

int cmd_train(const CliOptions& options, std::ostream& log);
int cmd_evaluate(const CliOptions& options, std::ostream& log);
int cmd_sweep(const CliOptions& options, std::ostream& log);
int cmd_gradcheck(const CliOptions& options, std::ostream& log);
int cmd_sigdemo(const CliOptions& options, std::ostream& log);

/// Dispatches a command and maps failures to exit codes: 2 for configuration
/// errors, 3 for numerical aborts, 1 otherwise.
int run_command(const std::string& command, const CliOptions& options, std::ostream& log, std::ostream& err);

}  // namespace nrdectl
