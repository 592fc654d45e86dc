#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "nrdectl/policies.hpp"
#include "nrdectl/problems.hpp"
#include "nrdectl/training.hpp"

namespace nrdectl {

struct DelayProblemConfig {
  std::size_t d = 10, d_a = 10, d_w = 10;
  std::uint64_t matrix_seed = 0;
  double entry_bound = 0.2;
  double q_scale = 1.0, r_scale = 1.0, g_scale = 1.0;
  double lambda = 0.1, delta = 0.1, horizon = 1.0, phi = 0.0;
  /// Explicit matrices (A1, A2, A3, B, sigma, Q, R, G) replacing generated ones.
  std::map<std::string, RowMatrix> overrides;

  LqDelayProblem build() const;
};

struct NrdeSizes {
  std::size_t hidden = 200;
  std::vector<std::size_t> widths{64, 64};
  Activation lift_output = Activation::identity;
};

struct GradcheckSettings {
  std::size_t trials = 100;
};

struct SigdemoSettings {
  std::size_t n_max = 4;
  std::size_t samples = 2000;
  std::size_t test_samples = 1000;
  std::size_t segments = 20;
  double path_scale = 0.5;
  double ridge = 1e-8;
  double epsilon_fraction = 0.1;
};

/// Resolved experiment configuration (profile applied, defaults filled in).
struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::string profile;
  std::string problem_kind;  // lq-delay | lq-fbm | portfolio
  DelayProblemConfig delay;
  LqFbmProblem fbm = LqFbmProblem::benchmark();
  PortfolioProblem portfolio;
  std::string policy_kind;  // nrde | rnn | lstm | gru
  NrdeSizes nrde;
  std::size_t rnn_hidden = 400, lstm_hidden = 200, gru_hidden = 230;
  TrainConfig train;
  std::vector<std::string> sweep_models{"nrde", "rnn", "lstm", "gru"};
  std::vector<double> sweep_fractions{1.0, 0.5, 0.25, 0.125};
  std::string output_dir = "runs/default";
  GradcheckSettings gradcheck;
  SigdemoSettings sigdemo;

  std::unique_ptr<ControlProblem> make_problem() const;
  std::unique_ptr<Policy> make_policy(const std::string& kind) const;
  std::unique_ptr<Policy> make_policy() const { return make_policy(policy_kind); }
  /// Canonical YAML that parses back to an identical configuration.
  std::string to_yaml() const;
};

/// Which sections a command needs.
enum class ConfigUse { experiment, standalone };

/// Parses YAML text; applies the named profile (empty = none). Throws
/// ConfigError with line numbers for unknown keys and bad values.
ExperimentConfig parse_config(const std::string& text, const std::string& profile = "",
                              ConfigUse use = ConfigUse::experiment);
ExperimentConfig load_config(const std::filesystem::path& path, const std::string& profile = "",
                             ConfigUse use = ConfigUse::experiment);

}  // namespace nrdectl
