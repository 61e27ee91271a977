#pragma once
// The benchmark problems with their exact coefficients, initial conditions,
// start points, training schedules, and network widths, plus the published
// reference values used for error reporting.

#include <optional>
#include <string>

#include "deepsplit/network.hpp"
#include "deepsplit/problem.hpp"
#include "deepsplit/time_grid.hpp"
#include "deepsplit/training.hpp"

namespace deepsplit {

/// Radially symmetric reduction u(t,x) = w(t, |x|), available when the
/// problem has zero drift, diffusion sqrt(2) Id, radial initial data, and a
/// nonlinearity depending on u only.
struct RadialForm {
  std::function<double(double)> initial;       // phi as a function of r = |x|
  std::function<double(double)> nonlinearity;  // f as a function of u
};

struct BenchmarkPreset {
  std::string id;
  PdeProblem problem;
  double horizon = 0.0;  // T
  int num_steps = 0;     // N
  int hidden_width = 0;
  TrainingSchedule schedule;
  std::vector<double> start_point;          // xi; also the evaluation point
  std::optional<double> reference_value;    // published (or exact) u(T, xi)
  std::optional<RadialForm> radial;

  NetworkArchitecture architecture() const {
    return NetworkArchitecture::standard(problem.dim, hidden_width);
  }
  TimeGrid grid() const { return make_grid(horizon, num_steps); }
};

/// HJB equation du/dt = Lap u - |grad u|^2, phi(x) = |x|^(1/2).
BenchmarkPreset preset_hjb(int dim, double horizon = 1.0 / 3.0, int num_steps = 0);

/// Nonlinear Black-Scholes with default risk, phi(x) = min_i x_i.
BenchmarkPreset preset_black_scholes(int dim);

/// Black-Scholes variant with gamma^h = gamma^l = gamma_bar, which makes the
/// driver linear and admits an exact Monte Carlo reference.
BenchmarkPreset preset_black_scholes_linearized(int dim, double gamma_bar = 0.2);

/// Allen-Cahn du/dt = Lap u + u - u^3, phi(x) = arctan(max_i x_i).
BenchmarkPreset preset_allen_cahn(int dim);

/// Semilinear heat du/dt = Lap u + (1-u^2)/(1+u^2), phi = 5/(10+2|x|^2).
BenchmarkPreset preset_semilinear_heat(int dim, int num_steps = 20);

/// Sine-Gordon du/dt = Lap u + sin(u), phi = 5/(10+2|x|^2).
BenchmarkPreset preset_sine_gordon(int dim);

/// Sanity problem f = 0, phi = c whose exact solution is the constant c.
BenchmarkPreset preset_constant(int dim, double value = 1.0);

/// Lookup by string id: hjb, bs, bs-linear, allen-cahn, heat, sine-gordon,
/// const. Throws std::invalid_argument for unknown ids.
BenchmarkPreset preset_by_id(const std::string& id, int dim,
                             std::optional<double> horizon = std::nullopt,
                             std::optional<int> num_steps = std::nullopt);

/// Published reference value for a benchmark row, when the paper lists one.
std::optional<double> paper_reference(const std::string& id, int dim, double horizon);

}  // namespace deepsplit
