#include "nrdectl/training.hpp"

#include <chrono>
#include <cmath>
#include <exception>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "nrdectl/errors.hpp"
#include "nrdectl/random.hpp"

namespace nrdectl {

namespace {

/// Runs job(i) for i in [0, count) on up to `workers` threads; rethrows the
/// first failure by index so errors are reported deterministically.
template <class Job>
void parallel_for(std::size_t count, std::size_t workers, Job&& job) {
  std::vector<std::exception_ptr> errors(count);
  auto run = [&](std::size_t i) {
    try {
      job(i);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  if (workers <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) {
      run(i);
      if (errors[i]) break;
    }
  } else {
    std::vector<std::thread> pool;
    const std::size_t n = std::min(workers, count);
    for (std::size_t w = 0; w < n; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t i = w; i < count; i += n) run(i);
      });
    }
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::size_t chunk_count(std::size_t n, std::size_t chunk) { return (n + chunk - 1) / chunk; }

nlohmann::json estimate_json(const CostEstimate& c) {
  return {{"mean", c.mean}, {"std_error", c.std_error}, {"n", c.n}};
}

}  // namespace

void TrainConfig::validate() const {
  if (batch_size == 0) throw std::invalid_argument("batch_size must be positive");
  if (train_steps == 0 || eval_steps == 0) throw std::invalid_argument("grid step counts must be positive");
  if (eval_trajectories < 2) throw std::invalid_argument("eval_trajectories must be at least 2");
  if (chunk_size == 0) throw std::invalid_argument("chunk_size must be positive");
  if (workers == 0) throw std::invalid_argument("workers must be positive");
  if (!(adam.learning_rate >= 0.0)) throw std::invalid_argument("learning rate must be >= 0");
  if (paired_noise && eval_steps % train_steps != 0) {
    throw std::invalid_argument("train_steps (" + std::to_string(train_steps) + ") must divide eval_steps (" +
                                std::to_string(eval_steps) + ") for paired noise");
  }
}

nlohmann::json TrainConfig::to_json() const {
  return {{"batches", batches},
          {"batch_size", batch_size},
          {"lr", adam.learning_rate},
          {"beta1", adam.beta1},
          {"beta2", adam.beta2},
          {"epsilon", adam.epsilon},
          {"train_steps", train_steps},
          {"eval_steps", eval_steps},
          {"eval_trajectories", eval_trajectories},
          {"seed", seed},
          {"chunk_size", chunk_size},
          {"quadrature", quadrature_name(quadrature)},
          {"paired_noise", paired_noise}};
}

CostEstimate summarize(const std::vector<double>& values) {
  if (values.empty()) throw std::invalid_argument("cannot estimate a cost from an empty batch");
  CostEstimate out;
  out.n = values.size();
  double sum = 0.0;
  for (double v : values) sum += v;
  out.mean = sum / static_cast<double>(out.n);
  if (out.n > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.std_error = std::sqrt(ss / static_cast<double>(out.n - 1) / static_cast<double>(out.n));
  }
  return out;
}

CostEstimate estimate_cost(const TrajectoryBatch& batch, const ControlProblem& problem, Quadrature quadrature) {
  if (batch.paths == 0) throw std::invalid_argument("cannot estimate a cost from an empty batch");
  const Var costs = path_functional(problem, batch, quadrature);
  return summarize(costs.value().values());
}

std::uint64_t eval_seed(std::uint64_t master) { return derive_seed(master, "eval"); }
std::uint64_t init_seed(std::uint64_t master) { return derive_seed(master, "init"); }

NoiseBatch training_noise(const ControlProblem& problem, const TrainConfig& config, std::size_t iteration) {
  if (config.paired_noise) {
    const NoiseSpec spec = problem.noise_spec(config.eval_steps, derive_seed(config.seed, "train", iteration));
    return sample_noise_batch(spec, 0, config.batch_size).coarsen(config.eval_steps / config.train_steps);
  }
  const NoiseSpec spec = problem.noise_spec(
      config.train_steps, derive_seed(config.seed ^ config.train_steps, "train-unpaired", iteration));
  return sample_noise_batch(spec, 0, config.batch_size);
}

NoiseBatch evaluation_noise(const ControlProblem& problem, std::size_t steps, std::size_t n, std::uint64_t seed) {
  return sample_noise_batch(problem.noise_spec(steps, seed), 0, n);
}

GradientEstimate batch_gradient(const ControlProblem& problem, const Policy& policy, const ParameterSet& params,
                                const NoiseBatch& noise, std::size_t chunk_size, std::size_t workers,
                                Quadrature quadrature) {
  const std::size_t n = noise.paths;
  if (n == 0) throw std::invalid_argument("empty noise batch");
  const std::size_t chunks = chunk_count(n, chunk_size);
  std::vector<double> sums(chunks, 0.0);
  std::vector<ParameterSet> grads(chunks);
  const double inv_n = 1.0 / static_cast<double>(n);
  parallel_for(chunks, workers, [&](std::size_t c) {
    const std::size_t begin = c * chunk_size;
    const std::size_t end = std::min(n, begin + chunk_size);
    Tape tape;
    BoundParams bound(params, &tape);
    const NoiseBatch part = chunks == 1 ? noise : noise.rows(begin, end);
    TrajectoryBatch batch = simulate_batch(problem, policy, bound, part);
    Var loss = scale(sum(objective(problem, batch, quadrature)), inv_n);
    sums[c] = loss.value().item();
    tape.backward(loss);
    grads[c] = bound.gradients(tape);
  });
  GradientEstimate out;
  out.grads = std::move(grads[0]);
  out.loss = sums[0];
  for (std::size_t c = 1; c < chunks; ++c) {
    out.grads.accumulate(grads[c]);
    out.loss += sums[c];
  }
  return out;
}

TrainOutcome train(const ControlProblem& problem, const Policy& policy, const TrainConfig& config,
                   std::optional<ParameterSet> initial, const ProgressFn& progress) {
  config.validate();
  if (policy.state_dim() != problem.state_dim() || policy.control_dim() != problem.control_dim()) {
    throw ShapeError("policy dimensions do not match the problem");
  }
  TrainOutcome out;
  out.params = initial ? std::move(*initial) : policy.init_params(init_seed(config.seed));
  AdamState adam(config.adam);
  const double sign = problem.sense() == Sense::maximize ? -1.0 : 1.0;
  std::optional<double> last_finite;
  for (std::size_t it = 0; it < config.batches; ++it) {
    const NoiseBatch noise = training_noise(problem, config, it);
    GradientEstimate g;
    try {
      g = batch_gradient(problem, policy, out.params, noise, config.chunk_size, config.workers, config.quadrature);
    } catch (const NumericalError& e) {
      throw NumericalError("training aborted at iteration " + std::to_string(it) + ": " + e.what() +
                           (last_finite ? "; last finite loss " + std::to_string(*last_finite) : std::string()));
    }
    if (!std::isfinite(g.loss)) {
      throw NumericalError("non-finite loss at iteration " + std::to_string(it) +
                           (last_finite ? "; last finite loss " + std::to_string(*last_finite) : std::string()));
    }
    last_finite = g.loss;
    out.cost_trace.push_back(sign * g.loss);
    if (progress) progress(it, sign * g.loss);
    try {
      adam.update(out.params, g.grads);
    } catch (const NumericalError& e) {
      throw NumericalError("training aborted at iteration " + std::to_string(it) + ": " + e.what());
    }
  }
  out.optimizer_steps = adam.step_count();
  return out;
}

TrajectoryBatch rollout(const ControlProblem& problem, const Policy& policy, const ParameterSet& params,
                        const NoiseBatch& noise) {
  BoundParams bound(params, nullptr);
  return simulate_batch(problem, policy, bound, noise);
}

CostEstimate evaluate(const Policy& policy, const ParameterSet& params, const ControlProblem& problem,
                      std::size_t steps, std::size_t n_trajectories, std::uint64_t seed, std::size_t workers,
                      Quadrature quadrature, std::size_t chunk_size) {
  if (n_trajectories == 0) throw std::invalid_argument("evaluation needs at least one trajectory");
  if (chunk_size == 0) throw std::invalid_argument("chunk_size must be positive");
  const NoiseSpec spec = problem.noise_spec(steps, seed);
  const std::size_t chunks = chunk_count(n_trajectories, chunk_size);
  std::vector<double> values(n_trajectories);
  parallel_for(chunks, workers, [&](std::size_t c) {
    const std::size_t begin = c * chunk_size;
    const std::size_t end = std::min(n_trajectories, begin + chunk_size);
    const NoiseBatch noise = sample_noise_batch(spec, begin, end - begin);
    const TrajectoryBatch batch = rollout(problem, policy, params, noise);
    const Var costs = path_functional(problem, batch, quadrature);
    for (std::size_t i = begin; i < end; ++i) values[i] = costs.value()[i - begin];
  });
  return summarize(values);
}

double pathwise_l2(const TrajectoryBatch& a, const TrajectoryBatch& b) {
  if (a.times != b.times) throw ShapeError("pathwise_l2: batches are on different grids");
  if (a.paths != b.paths || a.states.size() != b.states.size()) {
    throw ShapeError("pathwise_l2: batches have different trajectory counts");
  }
  const std::size_t steps = a.steps();
  if (steps == 0 || a.paths == 0) throw ShapeError("pathwise_l2: empty batch");
  double total = 0.0;
  for (std::size_t p = 0; p < a.paths; ++p) {
    double diff = 0.0, ref = 0.0;
    for (std::size_t k = 0; k < steps; ++k) {
      const double dt = a.times[k + 1] - a.times[k];
      const auto xa = a.states[k].value().matrix().row(static_cast<Eigen::Index>(p));
      const auto xb = b.states[k].value().matrix().row(static_cast<Eigen::Index>(p));
      diff += (xa - xb).squaredNorm() * dt;
      ref += xb.squaredNorm() * dt;
    }
    if (!(ref > 0.0)) throw NumericalError("pathwise_l2: reference trajectory " + std::to_string(p) + " has zero norm");
    total += std::sqrt(diff / ref);
  }
  return total / static_cast<double>(a.paths);
}

nlohmann::json ExperimentResult::to_json() const {
  nlohmann::json j = {{"problem", problem},
                      {"policy", policy},
                      {"param_count", param_count},
                      {"train_steps", train_steps},
                      {"eval_steps", eval_steps},
                      {"cost_trace", cost_trace},
                      {"eval", estimate_json(eval)},
                      {"wall_clock_seconds", wall_clock_seconds},
                      {"config", config}};
  j["oracle_value"] = oracle_value ? nlohmann::json(*oracle_value) : nlohmann::json();
  j["relative_error"] = relative_error ? nlohmann::json(*relative_error) : nlohmann::json();
  j["pathwise_l2"] = pathwise_l2 ? nlohmann::json(*pathwise_l2) : nlohmann::json();
  j["reference_eval"] = reference_eval ? estimate_json(*reference_eval) : nlohmann::json();
  return j;
}

void ExperimentResult::write_cost_trace(std::ostream& out) const {
  out << "iteration,cost\n" << std::setprecision(17);
  for (std::size_t i = 0; i < cost_trace.size(); ++i) out << i << ',' << cost_trace[i] << '\n';
}

std::size_t fraction_steps(std::size_t eval_steps, double fraction) {
  const double exact = static_cast<double>(eval_steps) * fraction;
  const double rounded = std::round(exact);
  if (!(fraction > 0.0 && fraction <= 1.0) || rounded < 1.0 || std::abs(exact - rounded) > 1e-9 ||
      eval_steps % static_cast<std::size_t>(rounded) != 0) {
    throw std::invalid_argument("training fraction " + fraction_label(fraction) + " of " + std::to_string(eval_steps) +
                                " steps does not give a step count dividing the evaluation grid");
  }
  return static_cast<std::size_t>(rounded);
}

std::string fraction_label(double fraction) {
  std::ostringstream s;
  s << std::setprecision(6) << fraction * 100.0 << '%';
  return s.str();
}

const CostEstimate& SweepTable::at(const std::string& model, double fraction) const {
  for (std::size_t m = 0; m < models.size(); ++m) {
    if (models[m] != model) continue;
    for (std::size_t f = 0; f < fractions.size(); ++f) {
      if (fractions[f] == fraction) return costs[m][f];
    }
  }
  throw std::out_of_range("no sweep entry for " + model + " at " + fraction_label(fraction));
}

void SweepTable::write_csv(std::ostream& out) const {
  out << "model";
  for (double f : fractions) out << ',' << fraction_label(f);
  out << '\n' << std::setprecision(17);
  for (std::size_t m = 0; m < models.size(); ++m) {
    out << models[m];
    for (const auto& c : costs[m]) out << ',' << c.mean;
    out << '\n';
  }
}

nlohmann::json SweepTable::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t m = 0; m < models.size(); ++m) {
    nlohmann::json entries = nlohmann::json::array();
    for (std::size_t f = 0; f < fractions.size(); ++f) {
      nlohmann::json e = estimate_json(costs[m][f]);
      e["fraction"] = fractions[f];
      e["train_steps"] = train_steps[f];
      entries.push_back(std::move(e));
    }
    rows.push_back({{"model", models[m]}, {"results", std::move(entries)}});
  }
  return {{"fractions", fractions}, {"train_steps", train_steps}, {"models", std::move(rows)}};
}

SweepTable resolution_sweep(const ControlProblem& problem, const PolicyFactory& factory,
                            const std::vector<std::string>& models, const TrainConfig& config,
                            const std::vector<double>& fractions, const ProgressFn& progress) {
  if (models.empty() || fractions.empty()) throw std::invalid_argument("sweep needs at least one model and fraction");
  SweepTable table;
  table.models = models;
  table.fractions = fractions;
  for (double f : fractions) table.train_steps.push_back(fraction_steps(config.eval_steps, f));
  for (const auto& model : models) {
    const auto policy = factory(model);
    std::vector<CostEstimate> row;
    for (std::size_t f = 0; f < fractions.size(); ++f) {
      TrainConfig c = config;
      c.train_steps = table.train_steps[f];
      TrainOutcome trained = train(problem, *policy, c, std::nullopt, progress);
      row.push_back(evaluate(*policy, trained.params, problem, config.eval_steps, config.eval_trajectories,
                             eval_seed(config.seed), config.workers, config.quadrature));
    }
    table.costs.push_back(std::move(row));
  }
  return table;
}

}  // namespace nrdectl
