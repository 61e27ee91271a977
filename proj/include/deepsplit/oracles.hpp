#pragma once
// Independent reference solvers used to validate deep splitting output:
//  - Cole-Hopf Monte Carlo for the HJB benchmark,
//  - a radial finite-difference reduction for radially symmetric problems,
//  - a tensor-grid finite-difference solver for d <= 2,
//  - an exact-simulation Monte Carlo for the linearized Black-Scholes
//    driver (gamma^h = gamma^l makes the pricing formula linear).

#include <span>

#include "deepsplit/presets.hpp"
#include "deepsplit/problem.hpp"
#include "deepsplit/rng.hpp"

namespace deepsplit {

struct McEstimate {
  double value = 0.0;
  double std_error = 0.0;
};

/// u(T,x) = -ln E[exp(-phi(x + sqrt(2T) Z))] with phi(y) = |y|^(1/2),
/// Z standard normal; log-sum-exp guarded, delta-method standard error.
McEstimate hjb_reference(int dim, double horizon, std::span<const double> x, long samples,
                         const rng::Stream& stream);

/// Same logarithmic-transformation Monte Carlo with an arbitrary terminal
/// function.
McEstimate cole_hopf_reference(const std::function<double(std::span<const double>)>& phi,
                               int dim, double horizon, std::span<const double> x, long samples,
                               const rng::Stream& stream);

struct RadialFdSettings {
  double r_max = 0.0;       // 0: choose max(10, 4 sqrt(2 T d)) automatically
  int space_cells = 4000;   // n_r
  int time_steps = 8000;    // n_t
  bool check_boundary = false;  // doubling r_max must move the result < 1e-5
};

/// Solves w_t = w_rr + (d-1) w_r / r + f(w) on [0, r_max] with w_r(t,0) = 0
/// and w(t, r_max) frozen at phi(r_max); diffusion implicit (tridiagonal),
/// reaction explicit. Returns w(T, 0).
double radial_fd_reference(const RadialForm& form, int dim, double horizon,
                           const RadialFdSettings& settings = {});

struct GridFdSettings {
  std::vector<double> box_lo;  // per dimension
  std::vector<double> box_hi;
  int cells_per_dim = 400;
  int time_steps = 2000;
};

/// Tensor-grid semi-implicit solution of the full PDE for d in {1, 2}:
/// diffusion and advection implicit per direction, the nonlinearity
/// explicit (step size checked against its local Lipschitz bound).
/// Requires a diagonal diffusion matrix. Returns the solution at
/// `eval_point`, linearly interpolated.
double grid_fd_reference(const PdeProblem& problem, double horizon,
                         const GridFdSettings& settings, std::span<const double> eval_point);

/// With gamma^h = gamma^l = gamma_bar the Black-Scholes driver is linear,
/// f = -((1-delta) gamma_bar + R) y, so
///   u(T,x) = exp(-((1-delta) gamma_bar + R) T) E[min_i X^i_T]
/// with X geometric Brownian motion simulated exactly.
McEstimate linearized_bs_reference(int dim, double horizon, std::span<const double> x,
                                   long samples, const rng::Stream& stream,
                                   double gamma_bar = 0.2);

}  // namespace deepsplit
