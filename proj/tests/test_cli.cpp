#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "nrdectl/cli.hpp"
#include "nrdectl/config.hpp"
#include "nrdectl/errors.hpp"
#include "run_utils.hpp"

using namespace nrdectl;
namespace fs = std::filesystem;

namespace {

const char* kTiny = R"(seed: 5
problem:
  kind: lq-fbm
  hurst: 0.3
policy:
  kind: nrde
  nrde: {hidden: 6, widths: [8]}
  rnn: {hidden: 7}
  lstm: {hidden: 3}
  gru: {hidden: 4}
train:
  batches: 3
  batch_size: 16
  lr: 0.01
  train_steps: 8
  eval_steps: 8
  eval_trajectories: 64
  chunk_size: 8
sweep:
  models: [nrde, gru]
  fractions: [1.0, 0.5]
output:
  dir: unused
profiles:
  quick:
    train: {batches: 2}
)";

fs::path scratch(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / ("nrdectl_cli_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

fs::path write_config(const fs::path& dir, const std::string& text) {
  fs::path p = dir / "input.yaml";
  std::ofstream(p) << text;
  return p;
}

int run(const std::string& cmd, CliOptions o, std::string* log_text = nullptr, std::string* err_text = nullptr) {
  o.quiet = true;
  std::ostringstream log, err;
  const int code = run_command(cmd, o, log, err);
  if (log_text) *log_text = log.str();
  if (err_text) *err_text = err.str();
  return code;
}

}  // namespace

TEST_CASE("config parsing and profiles") {
  ExperimentConfig c = parse_config(kTiny);
  CHECK(c.seed == 5);
  CHECK(c.train.batches == 3);
  CHECK(c.fbm.hurst_h == 0.3);
  CHECK(c.make_policy()->kind() == "nrde");
  ExperimentConfig q = parse_config(kTiny, "quick");
  CHECK(q.train.batches == 2);
  CHECK(q.train.batch_size == 16);
  CHECK_THROWS_AS(parse_config(kTiny, "nope"), ConfigError);
}

TEST_CASE("unknown keys are rejected with a line number") {
  std::string text = kTiny;
  text.replace(text.find("  lr: 0.01"), 10, "  lrate: 0.01");
  try {
    parse_config(text);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("lrate") != std::string::npos);
    CHECK(e.line() == 14);
  }
}

TEST_CASE("missing required field is named") {
  try {
    parse_config("seed: 1\npolicy: {kind: nrde}\n");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("problem") != std::string::npos);
  }
  try {
    parse_config("problem: {kind: lq-fbm}\npolicy: {kind: nrde}\n");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("seed") != std::string::npos);
  }
}

TEST_CASE("delay window must fit the grids") {
  const std::string text = "seed: 1\nproblem: {kind: lq-delay, d: 2, d_a: 2, d_w: 2, delta: 0.1}\n"
                           "policy: {kind: nrde}\ntrain: {train_steps: 20, eval_steps: 20}\nsweep: {fractions: [1.0, 0.25]}\n";
  CHECK_THROWS_WITH_AS(parse_config(text), doctest::Contains("problem.delta"), ConfigError);
  CHECK_NOTHROW(parse_config("seed: 1\nproblem: {kind: lq-delay, d: 2, d_a: 2, d_w: 2, delta: 0.1}\n"
                             "policy: {kind: nrde}\ntrain: {train_steps: 20, eval_steps: 20}\nsweep: {fractions: [1.0, 0.5]}\n"));
}

TEST_CASE("config snapshot round trips") {
  ExperimentConfig c = parse_config(kTiny, "quick");
  ExperimentConfig back = parse_config(c.to_yaml());
  CHECK(back.to_yaml() == c.to_yaml());
  CHECK(back.train.to_json() == c.train.to_json());
  CHECK(back.make_problem()->to_json() == c.make_problem()->to_json());
}

TEST_CASE("bundled presets parse in every profile") {
  for (const auto& entry : fs::directory_iterator(fs::path(NRDECTL_SOURCE_DIR) / "configs")) {
    if (entry.path().extension() != ".yaml") continue;
    INFO(entry.path().string());
    CHECK_NOTHROW(load_config(entry.path()));
    CHECK(load_config(entry.path(), "full").train.batches >= 300);
    CHECK(load_config(entry.path(), "smoke").train.batches <= 50);
  }
}

TEST_CASE("train writes artifacts and reruns bit-exactly from its snapshot") {
  fs::path dir = scratch("train");
  CliOptions o;
  o.config = write_config(dir, kTiny).string();
  o.out = (dir / "a").string();
  REQUIRE(run("train", o) == kExitOk);
  for (const char* f : {"checkpoint.json", "result.json", "cost_trace.csv", "config.yaml"}) {
    CHECK(fs::exists(dir / "a" / f));
  }
  CliOptions again;
  again.config = (dir / "a" / "config.yaml").string();
  again.out = (dir / "b").string();
  REQUIRE(run("train", again) == kExitOk);
  CHECK(runutil::same_results(dir / "a" / "result.json", dir / "b" / "result.json"));
  CHECK(runutil::read_text(dir / "a" / "checkpoint.json") == runutil::read_text(dir / "b" / "checkpoint.json"));

  CliOptions ev;
  ev.config = (dir / "a" / "config.yaml").string();
  ev.out = (dir / "a").string();
  REQUIRE(run("evaluate", ev) == kExitOk);
  nlohmann::json r = runutil::read_json(dir / "a" / "result.json");
  nlohmann::json e = runutil::read_json(dir / "a" / "evaluation.json");
  CHECK(r["eval"] == e["eval"]);
}

TEST_CASE("sweep output and single-cell reduction") {
  fs::path dir = scratch("sweep");
  CliOptions o;
  o.config = write_config(dir, kTiny).string();
  o.out = (dir / "s").string();
  REQUIRE(run("sweep", o) == kExitOk);
  const std::string csv = runutil::read_text(dir / "s" / "sweep.csv");
  CHECK(csv.rfind("model,100%,50%\nnrde,", 0) == 0);
  CHECK(csv.find("\ngru,") != std::string::npos);

  CliOptions one = o;
  one.out = (dir / "one").string();
  one.models = {"nrde"};
  one.fractions = {1.0};
  REQUIRE(run("sweep", one) == kExitOk);
  CliOptions tr = o;
  tr.out = (dir / "t").string();
  REQUIRE(run("train", tr) == kExitOk);
  nlohmann::json sweep = runutil::read_json(dir / "one" / "sweep.json");
  nlohmann::json result = runutil::read_json(dir / "t" / "result.json");
  CHECK(sweep["models"][0]["results"][0]["mean"] == result["eval"]["mean"]);

  CliOptions bad = o;
  bad.fractions = {0.3};
  CHECK(run("sweep", bad) == kExitConfigError);
}

TEST_CASE("gradcheck exit codes") {
  CliOptions o;
  std::string log;
  CHECK(run("gradcheck", o, &log) == kExitOk);
  o.inject_fault = true;
  CHECK(run("gradcheck", o, &log) == kExitCheckFailed);
  CHECK(log.find("FAILED") != std::string::npos);
  CliOptions none;
  none.trials = 0;
  CHECK(run("gradcheck", none, &log) == kExitOk);
  CHECK(log.find("no checks run") != std::string::npos);
}

TEST_CASE("sigdemo tables") {
  CliOptions o;
  o.n_max = 1;
  o.samples = 200;
  std::string one;
  REQUIRE(run("sigdemo", o, &one) == kExitOk);
  CHECK(std::count(one.begin(), one.end(), '\n') == 2);
  std::string again;
  run("sigdemo", o, &again);
  CHECK(one == again);
  o.n_max = 6;
  CHECK(run("sigdemo", o) == kExitConfigError);
}

TEST_CASE("config and numerical errors map to exit codes") {
  fs::path dir = scratch("errors");
  CliOptions o;
  o.config = write_config(dir, "seed: 1\npolicy: {kind: nrde}\n").string();
  std::string err;
  CHECK(run("train", o, nullptr, &err) == kExitConfigError);
  CHECK(err.find("problem") != std::string::npos);
  CHECK(run("train", CliOptions{}) == kExitConfigError);

  std::string blowup = "seed: 1\nproblem: {kind: portfolio, sigma: 4.0}\npolicy: {kind: nrde, nrde: {hidden: 4, "
                       "widths: [4]}}\ntrain: {batches: 40, batch_size: 16, lr: 20.0, train_steps: 2, eval_steps: 2, "
                       "eval_trajectories: 16}\n";
  o.config = write_config(dir, blowup).string();
  o.out = (dir / "blow").string();
  CHECK(run("train", o, nullptr, &err) == kExitNumerical);
  CHECK(err.find("iteration") != std::string::npos);
}
