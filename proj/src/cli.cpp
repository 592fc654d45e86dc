#include "nrdectl/cli.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>

#include "nrdectl/diffcore/checkpoint.hpp"
#include "nrdectl/errors.hpp"
#include "nrdectl/gradcheck.hpp"
#include "nrdectl/oracles.hpp"
#include "nrdectl/signature.hpp"

namespace nrdectl {

namespace fs = std::filesystem;

namespace {

constexpr std::size_t kRiccatiSteps = 2000;
constexpr std::size_t kPathwiseTrajectories = 1024;

ExperimentConfig resolve(const CliOptions& o, ConfigUse use) {
  ExperimentConfig cfg;
  if (!o.config.empty()) {
    cfg = load_config(o.config, o.profile, use);
  } else if (use == ConfigUse::experiment) {
    throw ConfigError("missing required option --config");
  }
  if (o.seed) {
    cfg.seed = *o.seed;
    cfg.train.seed = *o.seed;
  }
  if (!o.out.empty()) cfg.output_dir = o.out;
  if (!o.models.empty()) cfg.sweep_models = o.models;
  if (!o.fractions.empty()) {
    for (double f : o.fractions) {
      try {
        fraction_steps(cfg.train.eval_steps, f);
      } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("--fractions: ") + e.what());
      }
    }
    cfg.sweep_fractions = o.fractions;
  }
  if (o.trials) cfg.gradcheck.trials = *o.trials;
  if (o.n_max) cfg.sigdemo.n_max = *o.n_max;
  if (o.samples) cfg.sigdemo.samples = *o.samples;
  if (cfg.sigdemo.n_max > kMaxSignatureLevel) {
    throw ConfigError("signature level " + std::to_string(cfg.sigdemo.n_max) + " exceeds the limit " +
                      std::to_string(kMaxSignatureLevel));
  }
  cfg.train.workers = o.workers == 0 ? 1 : o.workers;
  return cfg;
}

fs::path prepare_output(const ExperimentConfig& cfg) {
  fs::path dir(cfg.output_dir);
  fs::create_directories(dir);
  std::ofstream(dir / "config.yaml") << cfg.to_yaml();
  return dir;
}

void write_json(const fs::path& path, const nlohmann::json& doc) { std::ofstream(path) << doc.dump(2) << '\n'; }

nlohmann::json config_json(const ControlProblem& problem, const Policy& policy, const TrainConfig& train) {
  return {{"problem", problem.to_json()}, {"policy", policy.architecture()}, {"train", train.to_json()}};
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

void report(std::ostream& log, const ExperimentResult& r) {
  log << std::setprecision(6) << r.problem << " / " << r.policy << " (" << r.param_count
      << " parameters): evaluation cost " << r.eval.mean << " +- " << r.eval.std_error << " on " << r.eval_steps
      << " steps";
  if (r.oracle_value) log << ", oracle " << *r.oracle_value << ", relative error " << *r.relative_error;
  if (r.pathwise_l2) log << ", pathwise L2 " << *r.pathwise_l2;
  if (r.reference_eval) log << ", oracle control on the same paths " << r.reference_eval->mean;
  log << '\n';
}

}  // namespace

void attach_oracle(ExperimentResult& result, const ControlProblem& problem, const Policy& policy,
                   const ParameterSet& params, const TrainConfig& train) {
  std::unique_ptr<Policy> reference;
  if (const auto* fbm = dynamic_cast<const LqFbmProblem*>(&problem); fbm && fbm->hurst_h == 0.5) {
    const RiccatiSolution s = riccati_for(*fbm, kRiccatiSteps);
    result.oracle_value = s.value;
    const RiccatiSolution grid = riccati_for(*fbm, train.eval_steps);
    reference = std::make_unique<LinearFeedbackPolicy>(grid.times, grid.gains);
  } else if (const auto* port = dynamic_cast<const PortfolioProblem*>(&problem); port && port->mu2 == 0.0) {
    const MertonSolution m = merton_log_oracle(*port);
    result.oracle_value = m.value;
    reference = std::make_unique<ConstantPolicy>(1, portfolio_raw_control(m.investment, m.consumption));
  }
  if (!result.oracle_value) return;
  result.relative_error = std::abs(result.eval.mean - *result.oracle_value) / std::abs(*result.oracle_value);
  const std::size_t n = std::min(kPathwiseTrajectories, train.eval_trajectories);
  const NoiseBatch noise = evaluation_noise(problem, train.eval_steps, n, eval_seed(train.seed));
  const TrajectoryBatch learned = rollout(problem, policy, params, noise);
  const TrajectoryBatch optimal = rollout(problem, *reference, ParameterSet{}, noise);
  result.pathwise_l2 = pathwise_l2(learned, optimal);
  result.reference_eval = evaluate(*reference, ParameterSet{}, problem, train.eval_steps, train.eval_trajectories,
                                   eval_seed(train.seed), train.workers, train.quadrature);
}

int cmd_train(const CliOptions& options, std::ostream& log) {
  const ExperimentConfig cfg = resolve(options, ConfigUse::experiment);
  const auto start = std::chrono::steady_clock::now();
  const auto problem = cfg.make_problem();
  const auto policy = cfg.make_policy();
  const fs::path dir = prepare_output(cfg);
  ProgressFn progress;
  if (!options.quiet) {
    progress = [&log, total = cfg.train.batches](std::size_t it, double cost) {
      if (it % 10 == 0 || it + 1 == total) log << "iteration " << it << ": cost " << cost << '\n';
    };
  }
  TrainOutcome trained = train(*problem, *policy, cfg.train, std::nullopt, progress);
  save_checkpoint(dir / "checkpoint.json", trained.params, policy->architecture());

  ExperimentResult result;
  result.problem = problem->name();
  result.policy = policy->kind();
  result.param_count = policy->param_count();
  result.train_steps = cfg.train.train_steps;
  result.eval_steps = cfg.train.eval_steps;
  result.cost_trace = trained.cost_trace;
  result.eval = evaluate(*policy, trained.params, *problem, cfg.train.eval_steps, cfg.train.eval_trajectories,
                         eval_seed(cfg.seed), cfg.train.workers, cfg.train.quadrature);
  attach_oracle(result, *problem, *policy, trained.params, cfg.train);
  result.config = config_json(*problem, *policy, cfg.train);
  result.wall_clock_seconds = seconds_since(start);
  write_json(dir / "result.json", result.to_json());
  std::ofstream trace(dir / "cost_trace.csv");
  result.write_cost_trace(trace);
  report(log, result);
  return kExitOk;
}

int cmd_evaluate(const CliOptions& options, std::ostream& log) {
  const ExperimentConfig cfg = resolve(options, ConfigUse::experiment);
  const auto start = std::chrono::steady_clock::now();
  const auto problem = cfg.make_problem();
  const fs::path ckpt = options.checkpoint.empty() ? fs::path(cfg.output_dir) / "checkpoint.json"
                                                   : fs::path(options.checkpoint);
  std::ifstream in(ckpt);
  if (!in) throw ConfigError("cannot read checkpoint " + ckpt.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("checkpoint " + ckpt.string() + " is not valid JSON: " + e.what());
  }
  const auto policy = policy_from_architecture(doc.at("architecture"));
  if (policy->state_dim() != problem->state_dim() || policy->control_dim() != problem->control_dim()) {
    throw ConfigError("checkpoint policy dimensions do not match the configured problem");
  }
  const ParameterSet params = checkpoint_from_json(doc, policy->architecture());
  const fs::path dir = prepare_output(cfg);
  ExperimentResult result;
  result.problem = problem->name();
  result.policy = policy->kind();
  result.param_count = policy->param_count();
  result.eval_steps = cfg.train.eval_steps;
  result.eval = evaluate(*policy, params, *problem, cfg.train.eval_steps, cfg.train.eval_trajectories,
                         eval_seed(cfg.seed), cfg.train.workers, cfg.train.quadrature);
  attach_oracle(result, *problem, *policy, params, cfg.train);
  result.config = config_json(*problem, *policy, cfg.train);
  result.wall_clock_seconds = seconds_since(start);
  write_json(dir / "evaluation.json", result.to_json());
  report(log, result);
  return kExitOk;
}

int cmd_sweep(const CliOptions& options, std::ostream& log) {
  const ExperimentConfig cfg = resolve(options, ConfigUse::experiment);
  const auto start = std::chrono::steady_clock::now();
  const auto problem = cfg.make_problem();
  const fs::path dir = prepare_output(cfg);
  PolicyFactory factory = [&cfg](const std::string& model) { return cfg.make_policy(model); };
  std::size_t run = 0;
  ProgressFn progress;
  if (!options.quiet) {
    progress = [&](std::size_t it, double cost) {
      if (it == 0) log << "run " << run++ << '\n';
      if (it % 25 == 0) log << "  iteration " << it << ": cost " << cost << '\n';
    };
  }
  const SweepTable table =
      resolution_sweep(*problem, factory, cfg.sweep_models, cfg.train, cfg.sweep_fractions, progress);
  std::ofstream csv(dir / "sweep.csv");
  table.write_csv(csv);
  nlohmann::json doc = table.to_json();
  doc["problem"] = problem->to_json();
  doc["train"] = cfg.train.to_json();
  nlohmann::json params = nlohmann::json::object();
  for (const auto& model : cfg.sweep_models) params[model] = cfg.make_policy(model)->param_count();
  doc["param_counts"] = params;
  doc["wall_clock_seconds"] = seconds_since(start);
  write_json(dir / "sweep.json", doc);
  table.write_csv(log);
  return kExitOk;
}

int cmd_gradcheck(const CliOptions& options, std::ostream& log) {
  const ExperimentConfig cfg = resolve(options, ConfigUse::standalone);
  GradcheckOptions g;
  g.seed = cfg.seed;
  g.trials = cfg.gradcheck.trials;
  g.inject_fault = options.inject_fault;
  if (!options.out.empty() || !options.config.empty()) {
    prepare_output(cfg);
  }
  if (g.trials == 0) {
    log << "warning: no checks run (trials = 0)\n";
    return kExitOk;
  }
  const GradcheckReport rep = run_gradcheck(g);
  nlohmann::json cases = nlohmann::json::array();
  for (const auto& c : rep.cases) {
    cases.push_back({{"name", c.name}, {"error", c.error}, {"tolerance", c.tolerance}, {"passed", c.passed()}});
  }
  if (!options.out.empty() || !options.config.empty()) {
    write_json(fs::path(cfg.output_dir) / "gradcheck.json",
               {{"seed", g.seed}, {"trials", g.trials}, {"passed", rep.passed()}, {"cases", cases}});
  }
  const auto& worst = rep.worst();
  log << std::setprecision(3) << rep.cases.size() << " checks, worst " << worst.name << " error " << worst.error
      << " (tolerance " << worst.tolerance << ")\n";
  if (!rep.passed()) {
    log << "FAILED: " << worst.name << " exceeds tolerance\n";
    return kExitCheckFailed;
  }
  return kExitOk;
}

int cmd_sigdemo(const CliOptions& options, std::ostream& log) {
  const ExperimentConfig cfg = resolve(options, ConfigUse::standalone);
  UniversalityExperiment exp;
  exp.target = UniversalityTarget::nonlinear_rde;
  exp.train_samples = cfg.sigdemo.samples;
  exp.test_samples = cfg.sigdemo.test_samples;
  exp.segments = cfg.sigdemo.segments;
  exp.path_scale = cfg.sigdemo.path_scale;
  exp.ridge = cfg.sigdemo.ridge;
  exp.epsilon_fraction = cfg.sigdemo.epsilon_fraction;
  exp.seed = cfg.seed;
  const auto rows = universality_sweep(exp, cfg.sigdemo.n_max);
  if (!options.out.empty() || !options.config.empty()) {
    const fs::path dir = prepare_output(cfg);
    std::ofstream csv(dir / "sigdemo.csv");
    write_universality_csv(csv, rows);
    nlohmann::json table = nlohmann::json::array();
    for (const auto& r : rows) {
      table.push_back({{"N", r.level},
                       {"train_rmse", r.train_rmse},
                       {"test_rmse", r.test_rmse},
                       {"epsilon", r.epsilon},
                       {"failure_rate", r.failure_rate}});
    }
    write_json(dir / "sigdemo.json", {{"seed", cfg.seed}, {"rows", table}});
  }
  write_universality_csv(log, rows);
  return kExitOk;
}

int run_command(const std::string& command, const CliOptions& options, std::ostream& log, std::ostream& err) {
  try {
    if (command == "train") return cmd_train(options, log);
    if (command == "evaluate") return cmd_evaluate(options, log);
    if (command == "sweep") return cmd_sweep(options, log);
    if (command == "gradcheck") return cmd_gradcheck(options, log);
    if (command == "sigdemo") return cmd_sigdemo(options, log);
    err << "error: unknown command '" << command << "'\n";
    return kExitConfigError;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfigError;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitCheckFailed;
  }
}

}  // namespace nrdectl
