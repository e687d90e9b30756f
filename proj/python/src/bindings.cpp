#include "kesten/config.hpp"
#include "kesten/geometry.hpp"
#include "kesten/model.hpp"
#include "kesten/operator.hpp"
#include "kesten/pipeline.hpp"
#include "kesten/report.hpp"
#include "kesten/tail.hpp"

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>

namespace py = pybind11;
using namespace kesten;

namespace {

py::object to_py(const Json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

using Runner_fn = int (Runner::*)();

int run_command(const std::string& command, const std::string& config, std::uint64_t seed, const std::string& out,
                int workers) {
  static const std::map<std::string, Runner_fn> commands = {
      {"audit", &Runner::audit}, {"lyapunov", &Runner::lyapunov}, {"kappa", &Runner::kappa},
      {"tail", &Runner::tail},   {"regen", &Runner::regen},       {"pipeline", &Runner::pipeline}};
  const auto it = commands.find(command);
  if (it == commands.end()) throw py::value_error("unknown command: " + command);
  const RunConfig cfg = load_config(config);
  py::gil_scoped_release release;
  Runner runner(cfg, seed, workers, out);
  return (runner.*(it->second))();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Random difference equations R = M R + Q: tail index, shifted chain and tail readouts";
  m.attr("__version__") = kVersion;

  py::class_<ModelSpec>(m, "Model")
      .def_static("two_point", &scalar_two_point, py::arg("m1"), py::arg("m2"), py::arg("w1"), py::arg("q") = 1.0,
                  py::arg("kappa0") = 2.0)
      .def_static("lognormal", &scalar_lognormal, py::arg("log_mean"), py::arg("log_sd"), py::arg("q") = 1.0,
                  py::arg("kappa0") = 2.0)
      .def_static("similarity", &similarity_lognormal, py::arg("dim"), py::arg("log_mean"), py::arg("log_sd"),
                  py::arg("haar") = true, py::arg("kappa0") = 2.0)
      .def_static("gaussian_perturbed", &gaussian_perturbed, py::arg("gamma0"), py::arg("sigma"),
                  py::arg("kappa0") = 2.0)
      .def_static("from_config", [](const std::string& path) { return load_config(path).model; }, py::arg("path"))
      .def_readonly("name", &ModelSpec::name)
      .def_readonly("dimension", &ModelSpec::dimension)
      .def_readonly("kappa0", &ModelSpec::kappa0)
      .def_property_readonly("family", [](const ModelSpec& s) { return to_string(s.family); })
      .def("__repr__", [](const ModelSpec& s) {
        return "<kesten.Model " + to_string(s.family) + " d=" + std::to_string(s.dimension) + ">";
      });

  m.def(
      "audit",
      [](const ModelSpec& s, std::size_t samples, std::uint64_t seed) {
        RngStream rng(seed);
        return to_py(to_json(audit_assumptions(s, samples, rng)));
      },
      py::arg("model"), py::arg("samples") = 100000, py::arg("seed") = 1);

  m.def(
      "lyapunov",
      [](const ModelSpec& s, std::uint64_t steps, std::uint64_t chains, std::uint64_t seed) {
        RngStream rng(seed);
        return to_py(to_json(lyapunov(s, steps, chains, rng)));
      },
      py::arg("model"), py::arg("steps") = 20000, py::arg("chains") = 8, py::arg("seed") = 1);

  m.def(
      "solve_kappa",
      [](const ModelSpec& s, int resolution, std::size_t n_mc, std::uint64_t seed) {
        auto grid = std::make_shared<const SphereGrid>(resolution > 0 ? SphereGrid::make(s.dimension, resolution)
                                                                      : SphereGrid::make_default(s.dimension));
        OperatorConfig cfg;
        cfg.n_mc = n_mc;
        RngStream rng(seed);
        const KappaSolution sol = solve_kappa(s, grid, cfg, rng);
        py::dict out = to_py(to_json(sol, cfg));
        py::array_t<double> points({static_cast<py::ssize_t>(grid->size()), static_cast<py::ssize_t>(s.dimension)});
        py::array_t<double> r(static_cast<py::ssize_t>(grid->size()));
        auto pv = points.mutable_unchecked<2>();
        auto rv = r.mutable_unchecked<1>();
        for (std::size_t i = 0; i < grid->size(); ++i) {
          for (int k = 0; k < s.dimension; ++k) pv(i, k) = grid->point(i).coords()(k);
          rv(i) = sol.r[i];
        }
        out["points"] = points;
        out["r"] = r;
        out["rho_curve"] = sol.rho_curve;
        return out;
      },
      py::arg("model"), py::arg("resolution") = 0, py::arg("n_mc") = 2000, py::arg("seed") = 1);

  m.def(
      "sample_R",
      [](const ModelSpec& s, std::size_t n, std::uint64_t seed, double tol, std::optional<double> stop_p) {
        RSampleConfig cfg;
        cfg.tol = tol;
        if (stop_p) cfg.stopping = StoppingRule::geometric(*stop_p);
        RngStream rng(seed);
        RSampleSet set;
        {
          py::gil_scoped_release release;
          set = sample_R(s, n, cfg, rng);
        }
        py::array_t<double> out({static_cast<py::ssize_t>(set.samples.size()), static_cast<py::ssize_t>(s.dimension)});
        auto v = out.mutable_unchecked<2>();
        for (std::size_t i = 0; i < set.samples.size(); ++i)
          for (int k = 0; k < s.dimension; ++k) v(i, k) = set.samples[i](k);
        return out;
      },
      py::arg("model"), py::arg("n"), py::arg("seed") = 1, py::arg("tol") = 1e-12, py::arg("stop_p") = py::none());

  m.def(
      "hill",
      [](std::vector<double> values, const std::vector<double>& fractions) {
        py::list out;
        for (const auto& h : hill_estimate(std::move(values), fractions)) {
          py::dict d;
          d["fraction"] = h.fraction;
          d["k"] = h.k;
          d["estimate"] = h.estimate;
          d["std_error"] = h.std_error;
          out.append(d);
        }
        return out;
      },
      py::arg("values"), py::arg("fractions") = std::vector<double>{0.001, 0.002, 0.005, 0.01, 0.02, 0.05, 0.1});

  m.def("run", &run_command, py::arg("command"), py::arg("config"), py::arg("seed"), py::arg("out"),
        py::arg("workers") = 1);
}
