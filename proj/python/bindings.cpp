#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "nrdectl/cli.hpp"
#include "nrdectl/config.hpp"
#include "nrdectl/gradcheck.hpp"
#include "nrdectl/noise.hpp"
#include "nrdectl/oracles.hpp"
#include "nrdectl/signature.hpp"

namespace py = pybind11;
using namespace nrdectl;

namespace {

// Increments as nested lists [step][path][channel].
std::vector<std::vector<std::vector<double>>> sample_increments(const std::string& kind, double hurst, std::size_t dim,
                                                                double horizon, std::size_t steps, std::uint64_t seed,
                                                                std::size_t first_path, std::size_t n_paths) {
  NoiseSpec s;
  if (kind == "brownian") {
    s.kind = NoiseKind::brownian;
  } else if (kind == "fractional") {
    s.kind = NoiseKind::fractional;
  } else {
    throw std::invalid_argument("noise kind must be 'brownian' or 'fractional'");
  }
  s.hurst = hurst;
  s.dim = dim;
  s.horizon = horizon;
  s.steps = steps;
  s.seed = seed;
  const NoiseBatch b = sample_noise_batch(s, first_path, n_paths);
  std::vector<std::vector<std::vector<double>>> out(steps, std::vector<std::vector<double>>(n_paths));
  for (std::size_t k = 0; k < steps; ++k)
    for (std::size_t p = 0; p < n_paths; ++p)
      for (std::size_t c = 0; c < dim; ++c) out[k][p].push_back(b.increments[k].at(p, c));
  return out;
}

py::dict run(const std::string& command, const py::kwargs& kw) {
  CliOptions o;
  o.quiet = true;
  for (const auto& [key, value] : kw) {
    const std::string k = py::str(key);
    if (k == "config") o.config = value.cast<std::string>();
    else if (k == "out") o.out = value.cast<std::string>();
    else if (k == "profile") o.profile = value.cast<std::string>();
    else if (k == "checkpoint") o.checkpoint = value.cast<std::string>();
    else if (k == "seed") o.seed = value.cast<std::uint64_t>();
    else if (k == "workers") o.workers = value.cast<std::size_t>();
    else if (k == "models") o.models = value.cast<std::vector<std::string>>();
    else if (k == "fractions") o.fractions = value.cast<std::vector<double>>();
    else if (k == "trials") o.trials = value.cast<std::size_t>();
    else if (k == "inject_fault") o.inject_fault = value.cast<bool>();
    else if (k == "n_max") o.n_max = value.cast<std::size_t>();
    else if (k == "samples") o.samples = value.cast<std::size_t>();
    else if (k == "quiet") o.quiet = value.cast<bool>();
    else throw py::type_error("unknown option '" + k + "'");
  }
  std::ostringstream log, err;
  int code;
  {
    py::gil_scoped_release release;
    code = run_command(command, o, log, err);
  }
  py::dict d;
  d["exit_code"] = code;
  d["log"] = log.str();
  d["error"] = err.str();
  return d;
}

}  // namespace

PYBIND11_MODULE(_nrdectl, m) {
  m.doc() = "Neural RDE feedback controls: noise, signatures, oracles and experiment commands";

  m.def("fbm_covariance", &fbm_covariance, py::arg("s"), py::arg("t"), py::arg("hurst"));
  m.def("fgn_autocovariance", &fgn_autocovariance, py::arg("lag"), py::arg("hurst"), py::arg("dt"));
  m.def("sample_increments", &sample_increments, py::arg("kind"), py::arg("hurst"), py::arg("dim"),
        py::arg("horizon"), py::arg("steps"), py::arg("seed"), py::arg("first_path") = 0, py::arg("n_paths") = 1);

  m.def(
      "signature",
      [](const std::vector<std::vector<double>>& points, std::size_t level) {
        return sig_of_path(points, level).flatten();
      },
      py::arg("points"), py::arg("level"));
  m.def(
      "signature_coeff",
      [](const std::vector<std::vector<double>>& points, std::size_t level, const Word& word) {
        return sig_of_path(points, level).coeff(word);
      },
      py::arg("points"), py::arg("level"), py::arg("word"));
  m.def(
      "shuffle",
      [](const Word& u, const Word& v) {
        const WordSum sum = shuffle(u, v);
        return std::vector<std::pair<Word, long>>(sum.begin(), sum.end());
      },
      py::arg("u"), py::arg("v"));

  m.def(
      "riccati_value",
      [](double hurst, std::size_t steps) { return riccati_for(LqFbmProblem::benchmark(hurst), steps).value; },
      py::arg("hurst") = 0.5, py::arg("steps") = 2000);
  m.def(
      "merton",
      [](double mu1, double r, double sigma, double beta, double horizon, double phi) {
        PortfolioProblem p;
        p.mu1 = mu1;
        p.mu2 = 0.0;
        p.r = r;
        p.sigma = sigma;
        p.beta = beta;
        p.horizon_t = horizon;
        p.phi = phi;
        const MertonSolution s = merton_log_oracle(p);
        py::dict d;
        d["investment"] = s.investment;
        d["consumption"] = s.consumption;
        d["value"] = s.value;
        return d;
      },
      py::arg("mu1") = 0.08, py::arg("r") = 0.03, py::arg("sigma") = 0.3, py::arg("beta") = 0.1,
      py::arg("horizon") = 1.0, py::arg("phi") = 1.0);

  m.def(
      "gradcheck",
      [](std::size_t trials, std::uint64_t seed) {
        GradcheckOptions g;
        g.trials = trials;
        g.seed = seed;
        const GradcheckReport rep = run_gradcheck(g);
        py::list cases;
        for (const auto& c : rep.cases) {
          py::dict d;
          d["name"] = c.name;
          d["error"] = c.error;
          d["tolerance"] = c.tolerance;
          d["passed"] = c.passed();
          cases.append(d);
        }
        return cases;
      },
      py::arg("trials") = 100, py::arg("seed") = 0);

  m.def(
      "load_config",
      [](const std::string& path, const std::string& profile) { return load_config(path, profile).to_yaml(); },
      py::arg("path"), py::arg("profile") = "", "Resolved configuration as canonical YAML.");

  m.def("run", &run, py::arg("command"),
        "Runs train, evaluate, sweep, gradcheck or sigdemo; returns exit_code, log and error text.");
}
