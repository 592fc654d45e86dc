#include "nrdectl/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "nrdectl/errors.hpp"

namespace nrdectl {

namespace {

int line_of(const YAML::Node& n) { return n.Mark().is_null() ? 0 : n.Mark().line + 1; }

template <class T>
T as(const YAML::Node& n, const std::string& path, const char* type) {
  try {
    return n.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError(path + ": expected " + type, line_of(n));
  }
}

void check_map(const YAML::Node& n, const std::string& path) {
  if (!n.IsMap()) throw ConfigError((path.empty() ? "document" : path) + ": expected a mapping", line_of(n));
}

void check_keys(const YAML::Node& n, const std::string& path, const std::set<std::string>& allowed) {
  check_map(n, path);
  for (const auto& kv : n) {
    const auto key = kv.first.as<std::string>();
    if (!allowed.count(key)) {
      throw ConfigError("unknown key '" + (path.empty() ? key : path + "." + key) + "'", line_of(kv.first));
    }
  }
}

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

YAML::Node require(const YAML::Node& parent, const std::string& path, const std::string& key) {
  YAML::Node n = parent[key];
  if (!n) throw ConfigError("missing required field '" + join(path, key) + "'", line_of(parent));
  return n;
}

template <class T>
void read(const YAML::Node& parent, const std::string& path, const std::string& key, T& out, const char* type) {
  if (YAML::Node n = parent[key]) out = as<T>(n, join(path, key), type);
}

void read_size(const YAML::Node& parent, const std::string& path, const std::string& key, std::size_t& out,
               bool allow_zero = false) {
  if (YAML::Node n = parent[key]) {
    const long long v = as<long long>(n, join(path, key), "an integer");
    if (v < 0 || (!allow_zero && v == 0)) {
      throw ConfigError(join(path, key) + ": expected a " + (allow_zero ? "nonnegative" : "positive") + " integer",
                        line_of(n));
    }
    out = static_cast<std::size_t>(v);
  }
}

void read_real(const YAML::Node& parent, const std::string& path, const std::string& key, double& out) {
  read<double>(parent, path, key, out, "a number");
}

RowMatrix read_matrix(const YAML::Node& n, const std::string& path) {
  if (!n.IsSequence() || n.size() == 0) throw ConfigError(path + ": expected a list of rows", line_of(n));
  const std::size_t rows = n.size();
  std::size_t cols = 0;
  RowMatrix m;
  for (std::size_t i = 0; i < rows; ++i) {
    const YAML::Node row = n[i];
    if (!row.IsSequence() || row.size() == 0) throw ConfigError(path + ": each row must be a list", line_of(row));
    if (i == 0) {
      cols = row.size();
      m.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    } else if (row.size() != cols) {
      throw ConfigError(path + ": rows have different lengths", line_of(row));
    }
    for (std::size_t j = 0; j < cols; ++j) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = as<double>(row[j], path, "a number");
    }
  }
  return m;
}

YAML::Node merge(const YAML::Node& base, const YAML::Node& overlay) {
  if (!base || !base.IsMap() || !overlay.IsMap()) return YAML::Clone(overlay);
  YAML::Node out = YAML::Clone(base);
  for (const auto& kv : overlay) {
    const auto key = kv.first.as<std::string>();
    out[key] = merge(out[key], kv.second);
  }
  return out;
}

const std::set<std::string> kDelayKeys{"kind",    "d",       "d_a",     "d_w",   "matrix_seed", "entry_bound",
                                       "q_scale", "r_scale", "g_scale", "lambda", "delta",      "horizon",
                                       "phi",     "A1",      "A2",      "A3",    "B",           "sigma",
                                       "Q",       "R",       "G"};
const std::set<std::string> kFbmKeys{"kind", "hurst", "horizon", "x0", "A", "C", "sigma", "Q", "R", "G"};
const std::set<std::string> kPortfolioKeys{"kind", "mu1", "mu2", "r", "sigma", "lambda", "beta", "horizon", "phi"};
const std::set<std::string> kModels{"nrde", "rnn", "lstm", "gru"};

void parse_problem(const YAML::Node& n, ExperimentConfig& cfg) {
  const std::string path = "problem";
  check_map(n, path);
  cfg.problem_kind = as<std::string>(require(n, path, "kind"), "problem.kind", "a string");
  if (cfg.problem_kind == "lq-delay") {
    check_keys(n, path, kDelayKeys);
    auto& d = cfg.delay;
    read_size(n, path, "d", d.d);
    read_size(n, path, "d_a", d.d_a);
    read_size(n, path, "d_w", d.d_w);
    read<std::uint64_t>(n, path, "matrix_seed", d.matrix_seed, "a nonnegative integer");
    read_real(n, path, "entry_bound", d.entry_bound);
    read_real(n, path, "q_scale", d.q_scale);
    read_real(n, path, "r_scale", d.r_scale);
    read_real(n, path, "g_scale", d.g_scale);
    read_real(n, path, "lambda", d.lambda);
    read_real(n, path, "delta", d.delta);
    read_real(n, path, "horizon", d.horizon);
    read_real(n, path, "phi", d.phi);
    for (const char* key : {"A1", "A2", "A3", "B", "sigma", "Q", "R", "G"}) {
      if (YAML::Node m = n[key]) d.overrides[key] = read_matrix(m, join(path, key));
    }
    try {
      d.build().validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("problem: ") + e.what(), line_of(n));
    }
  } else if (cfg.problem_kind == "lq-fbm") {
    check_keys(n, path, kFbmKeys);
    auto& p = cfg.fbm;
    read_real(n, path, "hurst", p.hurst_h);
    read_real(n, path, "horizon", p.horizon_t);
    read<std::vector<double>>(n, path, "x0", p.x0, "a list of numbers");
    if (YAML::Node m = n["A"]) p.a = read_matrix(m, "problem.A");
    if (YAML::Node m = n["C"]) p.c = read_matrix(m, "problem.C");
    if (YAML::Node m = n["sigma"]) p.sigma = read_matrix(m, "problem.sigma");
    if (YAML::Node m = n["Q"]) p.q = read_matrix(m, "problem.Q");
    if (YAML::Node m = n["R"]) p.r = read_matrix(m, "problem.R");
    if (YAML::Node m = n["G"]) p.g = read_matrix(m, "problem.G");
    try {
      p.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("problem: ") + e.what(), line_of(n));
    }
  } else if (cfg.problem_kind == "portfolio") {
    check_keys(n, path, kPortfolioKeys);
    auto& p = cfg.portfolio;
    read_real(n, path, "mu1", p.mu1);
    read_real(n, path, "mu2", p.mu2);
    read_real(n, path, "r", p.r);
    read_real(n, path, "sigma", p.sigma);
    read_real(n, path, "lambda", p.lambda);
    read_real(n, path, "beta", p.beta);
    read_real(n, path, "horizon", p.horizon_t);
    read_real(n, path, "phi", p.phi);
    try {
      p.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("problem: ") + e.what(), line_of(n));
    }
  } else {
    throw ConfigError("problem.kind: unknown problem '" + cfg.problem_kind +
                          "' (expected lq-delay, lq-fbm or portfolio)",
                      line_of(n["kind"]));
  }
}

void parse_policy(const YAML::Node& n, ExperimentConfig& cfg, bool required) {
  const std::string path = "policy";
  check_keys(n, path, {"kind", "nrde", "rnn", "lstm", "gru"});
  if (required || n["kind"]) {
    const YAML::Node k = require(n, path, "kind");
    cfg.policy_kind = as<std::string>(k, "policy.kind", "a string");
    if (!kModels.count(cfg.policy_kind)) {
      throw ConfigError("policy.kind: unknown policy '" + cfg.policy_kind + "' (expected nrde, rnn, lstm or gru)",
                        line_of(k));
    }
  }
  if (YAML::Node s = n["nrde"]) {
    check_keys(s, "policy.nrde", {"hidden", "widths", "lift_output"});
    read_size(s, "policy.nrde", "hidden", cfg.nrde.hidden);
    if (YAML::Node w = s["widths"]) {
      const auto widths = as<std::vector<long long>>(w, "policy.nrde.widths", "a list of integers");
      cfg.nrde.widths.clear();
      for (long long v : widths) {
        if (v <= 0) throw ConfigError("policy.nrde.widths: widths must be positive", line_of(w));
        cfg.nrde.widths.push_back(static_cast<std::size_t>(v));
      }
    }
    if (YAML::Node a = s["lift_output"]) {
      try {
        cfg.nrde.lift_output = parse_activation(as<std::string>(a, "policy.nrde.lift_output", "a string"));
      } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("policy.nrde.lift_output: ") + e.what(), line_of(a));
      }
    }
  }
  for (auto [key, target] : {std::pair<const char*, std::size_t*>{"rnn", &cfg.rnn_hidden},
                             {"lstm", &cfg.lstm_hidden},
                             {"gru", &cfg.gru_hidden}}) {
    if (YAML::Node s = n[key]) {
      const std::string p = join(path, key);
      check_keys(s, p, {"hidden"});
      read_size(s, p, "hidden", *target);
    }
  }
}

void parse_train(const YAML::Node& n, TrainConfig& t) {
  const std::string path = "train";
  check_keys(n, path,
             {"batches", "batch_size", "lr", "beta1", "beta2", "epsilon", "train_steps", "eval_steps",
              "eval_trajectories", "chunk_size", "quadrature", "paired_noise"});
  read_size(n, path, "batches", t.batches, true);
  read_size(n, path, "batch_size", t.batch_size);
  read_real(n, path, "lr", t.adam.learning_rate);
  read_real(n, path, "beta1", t.adam.beta1);
  read_real(n, path, "beta2", t.adam.beta2);
  read_real(n, path, "epsilon", t.adam.epsilon);
  read_size(n, path, "train_steps", t.train_steps);
  read_size(n, path, "eval_steps", t.eval_steps);
  read_size(n, path, "eval_trajectories", t.eval_trajectories);
  read_size(n, path, "chunk_size", t.chunk_size);
  if (YAML::Node q = n["quadrature"]) {
    try {
      t.quadrature = parse_quadrature(as<std::string>(q, "train.quadrature", "a string"));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("train.quadrature: ") + e.what(), line_of(q));
    }
  }
  read<bool>(n, path, "paired_noise", t.paired_noise, "true or false");
}

void parse_sweep(const YAML::Node& n, ExperimentConfig& cfg) {
  check_keys(n, "sweep", {"models", "fractions"});
  if (YAML::Node m = n["models"]) {
    cfg.sweep_models = as<std::vector<std::string>>(m, "sweep.models", "a list of model names");
    for (const auto& model : cfg.sweep_models) {
      if (!kModels.count(model)) throw ConfigError("sweep.models: unknown model '" + model + "'", line_of(m));
    }
    if (cfg.sweep_models.empty()) throw ConfigError("sweep.models: needs at least one model", line_of(m));
  }
  if (YAML::Node f = n["fractions"]) {
    cfg.sweep_fractions = as<std::vector<double>>(f, "sweep.fractions", "a list of numbers");
    if (cfg.sweep_fractions.empty()) throw ConfigError("sweep.fractions: needs at least one fraction", line_of(f));
    for (double fr : cfg.sweep_fractions) {
      try {
        fraction_steps(cfg.train.eval_steps, fr);
      } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("sweep.fractions: ") + e.what(), line_of(f));
      }
    }
  }
}

void check_delay_grids(const ExperimentConfig& cfg, const YAML::Node& root) {
  if (cfg.problem_kind != "lq-delay") return;
  std::vector<std::size_t> grids{cfg.train.train_steps, cfg.train.eval_steps};
  for (double f : cfg.sweep_fractions) grids.push_back(fraction_steps(cfg.train.eval_steps, f));
  for (std::size_t steps : grids) {
    try {
      delay_lag(cfg.delay.delta, cfg.delay.horizon / static_cast<double>(steps));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("problem.delta: ") + e.what() + " (" + std::to_string(steps) + "-step grid)",
                        line_of(root["problem"]));
    }
  }
}

void emit_matrix(YAML::Emitter& out, const RowMatrix& m) {
  out << YAML::Flow << YAML::BeginSeq;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    out << YAML::Flow << YAML::BeginSeq;
    for (Eigen::Index j = 0; j < m.cols(); ++j) out << m(i, j);
    out << YAML::EndSeq;
  }
  out << YAML::EndSeq;
}

}  // namespace

LqDelayProblem DelayProblemConfig::build() const {
  LqDelayProblem p =
      LqDelayProblem::with_random_matrices(d, d_a, d_w, matrix_seed, q_scale, r_scale, g_scale, entry_bound);
  p.lambda = lambda;
  p.delta = delta;
  p.horizon_t = horizon;
  p.phi = phi;
  for (const auto& [key, m] : overrides) {
    if (key == "A1") p.a1 = m;
    else if (key == "A2") p.a2 = m;
    else if (key == "A3") p.a3 = m;
    else if (key == "B") p.b = m;
    else if (key == "sigma") p.sigma = m;
    else if (key == "Q") p.q = m;
    else if (key == "R") p.r = m;
    else if (key == "G") p.g = m;
  }
  return p;
}

std::unique_ptr<ControlProblem> ExperimentConfig::make_problem() const {
  if (problem_kind == "lq-delay") return std::make_unique<LqDelayProblem>(delay.build());
  if (problem_kind == "lq-fbm") return std::make_unique<LqFbmProblem>(fbm);
  if (problem_kind == "portfolio") return std::make_unique<PortfolioProblem>(portfolio);
  throw ConfigError("missing required field 'problem.kind'");
}

std::unique_ptr<Policy> ExperimentConfig::make_policy(const std::string& kind) const {
  const auto problem = make_problem();
  const std::size_t d = problem->state_dim(), da = problem->control_dim();
  if (kind == "nrde") return std::make_unique<NrdePolicy>(NrdeSpec{d, da, nrde.hidden, nrde.widths, nrde.lift_output});
  if (kind == "rnn") return std::make_unique<RecurrentPolicy>(RecurrentSpec{CellKind::rnn, d, da, rnn_hidden});
  if (kind == "lstm") return std::make_unique<RecurrentPolicy>(RecurrentSpec{CellKind::lstm, d, da, lstm_hidden});
  if (kind == "gru") return std::make_unique<RecurrentPolicy>(RecurrentSpec{CellKind::gru, d, da, gru_hidden});
  throw ConfigError("unknown policy '" + kind + "'");
}

std::string ExperimentConfig::to_yaml() const {
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  out << YAML::BeginMap;
  out << YAML::Key << "seed" << YAML::Value << seed;
  if (!problem_kind.empty()) {
    out << YAML::Key << "problem" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "kind" << YAML::Value << problem_kind;
    if (problem_kind == "lq-delay") {
      out << YAML::Key << "d" << YAML::Value << delay.d << YAML::Key << "d_a" << YAML::Value << delay.d_a
          << YAML::Key << "d_w" << YAML::Value << delay.d_w;
      out << YAML::Key << "matrix_seed" << YAML::Value << delay.matrix_seed;
      out << YAML::Key << "entry_bound" << YAML::Value << delay.entry_bound;
      out << YAML::Key << "q_scale" << YAML::Value << delay.q_scale << YAML::Key << "r_scale" << YAML::Value
          << delay.r_scale << YAML::Key << "g_scale" << YAML::Value << delay.g_scale;
      out << YAML::Key << "lambda" << YAML::Value << delay.lambda << YAML::Key << "delta" << YAML::Value
          << delay.delta << YAML::Key << "horizon" << YAML::Value << delay.horizon << YAML::Key << "phi"
          << YAML::Value << delay.phi;
      for (const auto& [key, m] : delay.overrides) {
        out << YAML::Key << key << YAML::Value;
        emit_matrix(out, m);
      }
    } else if (problem_kind == "lq-fbm") {
      out << YAML::Key << "hurst" << YAML::Value << fbm.hurst_h << YAML::Key << "horizon" << YAML::Value
          << fbm.horizon_t;
      out << YAML::Key << "x0" << YAML::Value << YAML::Flow << fbm.x0;
      for (auto [key, m] : {std::pair<const char*, const RowMatrix*>{"A", &fbm.a},
                            {"C", &fbm.c},
                            {"sigma", &fbm.sigma},
                            {"Q", &fbm.q},
                            {"R", &fbm.r},
                            {"G", &fbm.g}}) {
        out << YAML::Key << key << YAML::Value;
        emit_matrix(out, *m);
      }
    } else {
      const auto& p = portfolio;
      out << YAML::Key << "mu1" << YAML::Value << p.mu1 << YAML::Key << "mu2" << YAML::Value << p.mu2 << YAML::Key
          << "r" << YAML::Value << p.r << YAML::Key << "sigma" << YAML::Value << p.sigma << YAML::Key << "lambda"
          << YAML::Value << p.lambda << YAML::Key << "beta" << YAML::Value << p.beta << YAML::Key << "horizon"
          << YAML::Value << p.horizon_t << YAML::Key << "phi" << YAML::Value << p.phi;
    }
    out << YAML::EndMap;
  }
  out << YAML::Key << "policy" << YAML::Value << YAML::BeginMap;
  if (!policy_kind.empty()) out << YAML::Key << "kind" << YAML::Value << policy_kind;
  out << YAML::Key << "nrde" << YAML::Value << YAML::BeginMap << YAML::Key << "hidden" << YAML::Value << nrde.hidden
      << YAML::Key << "widths" << YAML::Value << YAML::Flow << nrde.widths << YAML::Key << "lift_output"
      << YAML::Value << activation_name(nrde.lift_output) << YAML::EndMap;
  out << YAML::Key << "rnn" << YAML::Value << YAML::BeginMap << YAML::Key << "hidden" << YAML::Value << rnn_hidden
      << YAML::EndMap;
  out << YAML::Key << "lstm" << YAML::Value << YAML::BeginMap << YAML::Key << "hidden" << YAML::Value << lstm_hidden
      << YAML::EndMap;
  out << YAML::Key << "gru" << YAML::Value << YAML::BeginMap << YAML::Key << "hidden" << YAML::Value << gru_hidden
      << YAML::EndMap;
  out << YAML::EndMap;
  out << YAML::Key << "train" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "batches" << YAML::Value << train.batches << YAML::Key << "batch_size" << YAML::Value
      << train.batch_size << YAML::Key << "lr" << YAML::Value << train.adam.learning_rate << YAML::Key << "beta1"
      << YAML::Value << train.adam.beta1 << YAML::Key << "beta2" << YAML::Value << train.adam.beta2 << YAML::Key
      << "epsilon" << YAML::Value << train.adam.epsilon << YAML::Key << "train_steps" << YAML::Value
      << train.train_steps << YAML::Key << "eval_steps" << YAML::Value << train.eval_steps << YAML::Key
      << "eval_trajectories" << YAML::Value << train.eval_trajectories << YAML::Key << "chunk_size" << YAML::Value
      << train.chunk_size << YAML::Key << "quadrature" << YAML::Value << quadrature_name(train.quadrature)
      << YAML::Key << "paired_noise" << YAML::Value << train.paired_noise;
  out << YAML::EndMap;
  out << YAML::Key << "sweep" << YAML::Value << YAML::BeginMap << YAML::Key << "models" << YAML::Value << YAML::Flow
      << sweep_models << YAML::Key << "fractions" << YAML::Value << YAML::Flow << sweep_fractions << YAML::EndMap;
  out << YAML::Key << "output" << YAML::Value << YAML::BeginMap << YAML::Key << "dir" << YAML::Value << output_dir
      << YAML::EndMap;
  out << YAML::Key << "gradcheck" << YAML::Value << YAML::BeginMap << YAML::Key << "trials" << YAML::Value
      << gradcheck.trials << YAML::EndMap;
  out << YAML::Key << "sigdemo" << YAML::Value << YAML::BeginMap << YAML::Key << "n_max" << YAML::Value
      << sigdemo.n_max << YAML::Key << "samples" << YAML::Value << sigdemo.samples << YAML::Key << "test_samples"
      << YAML::Value << sigdemo.test_samples << YAML::Key << "segments" << YAML::Value << sigdemo.segments
      << YAML::Key << "path_scale" << YAML::Value << sigdemo.path_scale << YAML::Key << "ridge" << YAML::Value
      << sigdemo.ridge << YAML::Key << "epsilon_fraction" << YAML::Value << sigdemo.epsilon_fraction << YAML::EndMap;
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

ExperimentConfig parse_config(const std::string& text, const std::string& profile, ConfigUse use) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError("malformed YAML: " + e.msg, e.mark.line + 1);
  }
  if (!root || root.IsNull()) throw ConfigError("empty configuration");
  check_keys(root, "",
             {"seed", "problem", "policy", "train", "sweep", "output", "profiles", "gradcheck", "sigdemo"});
  ExperimentConfig cfg;
  if (!profile.empty()) {
    const YAML::Node profiles = root["profiles"];
    if (!profiles || !profiles[profile]) throw ConfigError("unknown profile '" + profile + "'", line_of(root));
    const YAML::Node overlay = profiles[profile];
    if (!overlay.IsNull()) {
      check_keys(overlay, "profiles." + profile,
                 {"seed", "problem", "policy", "train", "sweep", "output", "gradcheck", "sigdemo"});
      root = merge(root, overlay);
    }
    cfg.profile = profile;
  } else if (YAML::Node profiles = root["profiles"]) {
    check_map(profiles, "profiles");
  }

  cfg.seed = as<std::uint64_t>(require(root, "", "seed"), "seed", "a nonnegative integer");
  const bool experiment = use == ConfigUse::experiment;
  if (experiment || root["problem"]) parse_problem(require(root, "", "problem"), cfg);
  if (experiment || root["policy"]) parse_policy(require(root, "", "policy"), cfg, experiment);
  if (YAML::Node t = root["train"]) parse_train(t, cfg.train);
  cfg.train.seed = cfg.seed;
  try {
    cfg.train.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("train: ") + e.what(), line_of(root["train"] ? root["train"] : root));
  }
  if (YAML::Node s = root["sweep"]) parse_sweep(s, cfg);
  if (YAML::Node o = root["output"]) {
    check_keys(o, "output", {"dir"});
    read<std::string>(o, "output", "dir", cfg.output_dir, "a string");
  }
  if (YAML::Node g = root["gradcheck"]) {
    check_keys(g, "gradcheck", {"trials"});
    read_size(g, "gradcheck", "trials", cfg.gradcheck.trials, true);
  }
  if (YAML::Node s = root["sigdemo"]) {
    const std::string path = "sigdemo";
    check_keys(s, path, {"n_max", "samples", "test_samples", "segments", "path_scale", "ridge", "epsilon_fraction"});
    auto& d = cfg.sigdemo;
    read_size(s, path, "n_max", d.n_max);
    read_size(s, path, "samples", d.samples);
    read_size(s, path, "test_samples", d.test_samples);
    read_size(s, path, "segments", d.segments);
    read_real(s, path, "path_scale", d.path_scale);
    read_real(s, path, "ridge", d.ridge);
    read_real(s, path, "epsilon_fraction", d.epsilon_fraction);
  }
  if (!cfg.problem_kind.empty()) check_delay_grids(cfg, root);
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path, const std::string& profile, ConfigUse use) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str(), profile, use);
}

}  // namespace nrdectl
