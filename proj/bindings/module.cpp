#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <iostream>

#include "deepsplit/harness.hpp"
#include "deepsplit/oracles.hpp"
#include "deepsplit/training.hpp"

namespace py = pybind11;
using namespace deepsplit;

namespace {

SolverResult solve_preset(const BenchmarkPreset& preset, std::uint64_t seed, bool pair_only) {
  TrainingSchedule schedule = preset.schedule;
  schedule.simulate_consumed_pair_only = pair_only;
  const rng::Stream run_stream = rng::Stream{seed}.child(rng::Purpose::run, 0);
  return solve(preset.problem, preset.grid(), preset.architecture(), schedule, run_stream);
}

py::array_t<double> paths_to_array(const PathBatch& batch) {
  const auto K = static_cast<py::ssize_t>(batch.states.size());
  const auto J = static_cast<py::ssize_t>(batch.batch_size);
  const auto d = static_cast<py::ssize_t>(batch.dim);
  py::array_t<double> out({K, J, d});
  auto view = out.mutable_unchecked<3>();
  for (py::ssize_t k = 0; k < K; ++k)
    for (py::ssize_t j = 0; j < J; ++j)
      for (py::ssize_t c = 0; c < d; ++c)
        view(k, j, c) = batch.states[static_cast<std::size_t>(k)](j, c);
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "deep splitting solver for semilinear parabolic PDEs";

  py::class_<TimeGrid>(m, "TimeGrid")
      .def_readonly("horizon", &TimeGrid::horizon)
      .def_readonly("count", &TimeGrid::count)
      .def_readonly("forward_times", &TimeGrid::forward_times)
      .def_readonly("reversed_times", &TimeGrid::reversed_times)
      .def("dt", &TimeGrid::dt, py::arg("n"));

  m.def("make_grid", py::overload_cast<double, int>(&make_grid), py::arg("horizon"),
        py::arg("count"));
  m.def("make_grid", py::overload_cast<double, const std::vector<double>&>(&make_grid),
        py::arg("horizon"), py::arg("times"));

  py::class_<TrainingSchedule>(m, "TrainingSchedule")
      .def_static("piecewise", &TrainingSchedule::piecewise, py::arg("steps"),
                  py::arg("breakpoints"), py::arg("batch_size") = 256)
      .def_readwrite("steps", &TrainingSchedule::steps)
      .def_readwrite("batch_sizes", &TrainingSchedule::batch_sizes)
      .def_readwrite("learning_rates", &TrainingSchedule::learning_rates)
      .def_readwrite("bn_momentum", &TrainingSchedule::bn_momentum)
      .def_readwrite("simulate_consumed_pair_only",
                     &TrainingSchedule::simulate_consumed_pair_only);

  py::class_<BenchmarkPreset>(m, "Preset")
      .def_readonly("id", &BenchmarkPreset::id)
      .def_readonly("horizon", &BenchmarkPreset::horizon)
      .def_readonly("num_steps", &BenchmarkPreset::num_steps)
      .def_readonly("hidden_width", &BenchmarkPreset::hidden_width)
      .def_readonly("start_point", &BenchmarkPreset::start_point)
      .def_readonly("reference_value", &BenchmarkPreset::reference_value)
      .def_readwrite("schedule", &BenchmarkPreset::schedule)
      .def_property_readonly("dim",
                             [](const BenchmarkPreset& p) { return p.problem.dim; })
      .def("grid", &BenchmarkPreset::grid);

  m.def("preset", &preset_by_id, py::arg("id"), py::arg("dim"),
        py::arg("horizon") = std::nullopt, py::arg("num_steps") = std::nullopt,
        "benchmark presets: hjb, bs, bs-linear, allen-cahn, heat, sine-gordon, const");

  m.def("paper_reference", &paper_reference, py::arg("id"), py::arg("dim"), py::arg("horizon"));

  py::class_<SolverResult>(m, "SolverResult")
      .def_property_readonly("num_steps",
                             [](const SolverResult& r) { return r.grid.count; })
      .def_property_readonly("loss_traces",
                             [](const SolverResult& r) { return r.loss_traces; })
      .def("evaluate",
           [](const SolverResult& r, int n, const Eigen::MatrixXd& x) {
             return evaluate(r, n, x);
           },
           py::arg("n"), py::arg("x"));

  m.def("solve", &solve_preset, py::arg("preset"), py::arg("seed") = 1,
        py::arg("pair_only") = false,
        "run the deep splitting recursion; returns one trained network per time step");

  m.def("simulate_paths",
        [](const BenchmarkPreset& preset, int batch_size, std::uint64_t seed, int last_index) {
          const TimeGrid grid = preset.grid();
          const auto stream = rng::Stream{seed}.child(rng::Purpose::paths, 0, 0);
          return paths_to_array(simulate_paths(preset.problem, grid, batch_size, stream,
                                               last_index));
        },
        py::arg("preset"), py::arg("batch_size"), py::arg("seed") = 1,
        py::arg("last_index") = -1,
        "Euler-Maruyama batch on the reversed grid, shape (K+1, J, d)");

  m.def("hjb_reference",
        [](int dim, double horizon, const std::vector<double>& x, long samples,
           std::uint64_t seed) {
          const auto est =
              hjb_reference(dim, horizon, x, samples, rng::Stream{seed}.child(rng::Purpose::oracle));
          return std::make_pair(est.value, est.std_error);
        },
        py::arg("dim"), py::arg("horizon"), py::arg("x"), py::arg("samples") = 1000000,
        py::arg("seed") = 1);

  m.def("linearized_bs_reference",
        [](int dim, double horizon, const std::vector<double>& x, long samples,
           std::uint64_t seed, double gamma_bar) {
          const auto est = linearized_bs_reference(
              dim, horizon, x, samples, rng::Stream{seed}.child(rng::Purpose::oracle), gamma_bar);
          return std::make_pair(est.value, est.std_error);
        },
        py::arg("dim"), py::arg("horizon"), py::arg("x"), py::arg("samples") = 1000000,
        py::arg("seed") = 1, py::arg("gamma_bar") = 0.2);

  m.def("radial_fd_reference",
        [](const BenchmarkPreset& preset, int cells, int steps, double r_max) {
          if (!preset.radial)
            throw std::invalid_argument("preset has no radial reduction");
          RadialFdSettings s;
          s.space_cells = cells;
          s.time_steps = steps;
          s.r_max = r_max;
          return radial_fd_reference(*preset.radial, preset.problem.dim, preset.horizon, s);
        },
        py::arg("preset"), py::arg("cells") = 2000, py::arg("steps") = 4000,
        py::arg("r_max") = 0.0);

  py::class_<ResultRow>(m, "ResultRow")
      .def_readonly("dim", &ResultRow::dim)
      .def_readonly("horizon", &ResultRow::horizon)
      .def_readonly("num_steps", &ResultRow::num_steps)
      .def_readonly("expectation", &ResultRow::expectation)
      .def_readonly("std_dev", &ResultRow::std_dev)
      .def_readonly("reference", &ResultRow::reference)
      .def_readonly("rel_l1_error", &ResultRow::rel_l1_error)
      .def_readonly("std_rel_error", &ResultRow::std_rel_error)
      .def_readonly("avg_runtime_s", &ResultRow::avg_runtime_s)
      .def_readonly("runs_completed", &ResultRow::runs_completed);

  m.def("run_experiment",
        [](const std::string& preset_id, int dim, int runs, std::uint64_t seed,
           std::optional<int> num_steps, std::optional<int> train_steps,
           const std::string& reference, bool pair_only, const std::string& out_dir) {
          ExperimentConfig config;
          config.preset_id = preset_id;
          config.dim = dim;
          config.runs = runs;
          config.seed = seed;
          config.num_steps = num_steps;
          config.train_steps = train_steps;
          config.reference_mode = reference;
          config.pair_only = pair_only;
          config.out_dir = out_dir;
          return run_experiment(config);
        },
        py::arg("preset"), py::arg("dim"), py::arg("runs") = 10, py::arg("seed") = 1,
        py::arg("num_steps") = std::nullopt, py::arg("train_steps") = std::nullopt,
        py::arg("reference") = "paper", py::arg("pair_only") = false, py::arg("out_dir") = "");

  m.def("self_check", [] { return self_check(std::cout); },
        "quick property tier; prints one line per check, returns the failure count");

#ifdef VERSION_INFO
  m.attr("__version__") = VERSION_INFO;
#else
  m.attr("__version__") = "dev";
#endif
}
