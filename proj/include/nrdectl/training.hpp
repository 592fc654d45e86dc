#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "nrdectl/diffcore/adam.hpp"
#include "nrdectl/problems.hpp"

namespace nrdectl {

struct TrainConfig {
  std::size_t batches = 300;
  std::size_t batch_size = 256;
  AdamOptions adam;
  std::size_t train_steps = 80;
  std::size_t eval_steps = 80;
  std::size_t eval_trajectories = 4096;
  std::uint64_t seed = 0;
  /// Trajectories per tape; gradients are summed over chunks in fixed order.
  std::size_t chunk_size = 64;
  std::size_t workers = 1;
  Quadrature quadrature = Quadrature::left;
  /// Sample training noise on the evaluation grid and coarsen it, so every
  /// training resolution sees the same underlying randomness.
  bool paired_noise = true;

  void validate() const;
  nlohmann::json to_json() const;
};

struct CostEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t n = 0;
};

/// Mean and standard error (sample std with N - 1, over sqrt(N)).
CostEstimate summarize(const std::vector<double>& values);
/// Goal functional of every trajectory in the batch, summarized (problem sign).
CostEstimate estimate_cost(const TrajectoryBatch& batch, const ControlProblem& problem,
                           Quadrature quadrature = Quadrature::left);

/// Noise for training iteration `iteration` on `config.train_steps`.
NoiseBatch training_noise(const ControlProblem& problem, const TrainConfig& config, std::size_t iteration);
/// Evaluation noise for `n` trajectories on `steps`.
NoiseBatch evaluation_noise(const ControlProblem& problem, std::size_t steps, std::size_t n, std::uint64_t seed);

std::uint64_t eval_seed(std::uint64_t master);
std::uint64_t init_seed(std::uint64_t master);

struct TrainOutcome {
  ParameterSet params;
  std::vector<double> cost_trace;  // per-iteration batch mean, problem sign
  std::size_t optimizer_steps = 0;
};

/// Progress callback: iteration, batch cost.
using ProgressFn = std::function<void(std::size_t, double)>;

/// Adam on the Monte-Carlo objective. Deterministic given the config, for
/// any number of workers.
TrainOutcome train(const ControlProblem& problem, const Policy& policy, const TrainConfig& config,
                   std::optional<ParameterSet> initial = std::nullopt, const ProgressFn& progress = {});

/// Loss and summed gradient of the mean objective over one noise batch.
struct GradientEstimate {
  double loss = 0.0;
  ParameterSet grads;
};
GradientEstimate batch_gradient(const ControlProblem& problem, const Policy& policy, const ParameterSet& params,
                                const NoiseBatch& noise, std::size_t chunk_size, std::size_t workers,
                                Quadrature quadrature);

/// Forward-only rollout (no tape).
TrajectoryBatch rollout(const ControlProblem& problem, const Policy& policy, const ParameterSet& params,
                        const NoiseBatch& noise);

CostEstimate evaluate(const Policy& policy, const ParameterSet& params, const ControlProblem& problem,
                      std::size_t steps, std::size_t n_trajectories, std::uint64_t seed, std::size_t workers = 1,
                      Quadrature quadrature = Quadrature::left, std::size_t chunk_size = 256);

/// Mean over trajectories of |X^a - X^b|_{L2[0,T]} / |X^b|_{L2[0,T]}
/// (left-rectangle norms); `b` is the reference.
double pathwise_l2(const TrajectoryBatch& a, const TrajectoryBatch& b);

struct ExperimentResult {
  std::string problem;
  std::string policy;
  std::size_t param_count = 0;
  std::size_t train_steps = 0;
  std::size_t eval_steps = 0;
  std::vector<double> cost_trace;
  CostEstimate eval;
  std::optional<double> oracle_value;
  std::optional<double> relative_error;
  std::optional<double> pathwise_l2;
  /// Monte-Carlo value of the oracle control on the same evaluation noise.
  std::optional<CostEstimate> reference_eval;
  double wall_clock_seconds = 0.0;
  nlohmann::json config;

  nlohmann::json to_json() const;
  void write_cost_trace(std::ostream& out) const;
};

using PolicyFactory = std::function<std::unique_ptr<Policy>(const std::string& model)>;

struct SweepTable {
  std::vector<std::string> models;
  std::vector<double> fractions;
  std::vector<std::size_t> train_steps;
  std::vector<std::vector<CostEstimate>> costs;  // [model][fraction]

  const CostEstimate& at(const std::string& model, double fraction) const;
  /// Columns model, 100%, 50%, ...
  void write_csv(std::ostream& out) const;
  nlohmann::json to_json() const;
};

/// Training step count for a fraction of the evaluation grid; throws unless
/// it is a positive integer dividing `eval_steps`.
std::size_t fraction_steps(std::size_t eval_steps, double fraction);
std::string fraction_label(double fraction);

/// Trains one policy per (model, fraction) and evaluates each on the full
/// evaluation grid with shared evaluation noise.
SweepTable resolution_sweep(const ControlProblem& problem, const PolicyFactory& factory,
                            const std::vector<std::string>& models, const TrainConfig& config,
                            const std::vector<double>& fractions, const ProgressFn& progress = {});

}  // namespace nrdectl
