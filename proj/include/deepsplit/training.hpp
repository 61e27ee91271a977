#pragma once
// The deep splitting recursion: per-timestep quadratic regression of the
// one-step Feynman-Kac target, optimizer updates, and the outer loop that
// produces one trained network per grid time.

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "deepsplit/network.hpp"
#include "deepsplit/optimizer.hpp"
#include "deepsplit/path.hpp"
#include "deepsplit/problem.hpp"
#include "deepsplit/rng.hpp"
#include "deepsplit/time_grid.hpp"

namespace deepsplit {

/// Losses above this abort the time step with a diagnostic.
inline constexpr double kDivergenceThreshold = 1e12;

struct TrainingSchedule {
  int steps = 0;                         // M
  std::vector<int> batch_sizes;          // J_m, length M
  std::vector<double> learning_rates;    // gamma_m, length M

  enum class Optimizer { sgd, adam };
  Optimizer optimizer = Optimizer::adam;
  AdamParams adam;

  enum class InitPolicy { fresh_xavier, warm_start_from_previous };
  InitPolicy init_policy = InitPolicy::fresh_xavier;

  // Skip simulating path segments past the two consumed grid points. Output
  // is bit-identical either way (per-(path, step) noise streams); off by
  // default to mirror the full-path formulation.
  bool simulate_consumed_pair_only = false;

  double bn_momentum = 0.9;

  void validate() const;

  /// Piecewise-constant learning rates: gamma_m = rate of the first
  /// breakpoint with m <= upper (uppers inclusive, as in 1_{(a,b]}(m)).
  static TrainingSchedule piecewise(int steps,
                                    const std::vector<std::pair<int, double>>& breakpoints,
                                    int batch_size = 256);
};

/// The regression target V_{n-1}: either the analytic initial pair
/// (phi, grad phi) for n = 1, or a frozen trained snapshot, evaluated
/// strictly in infer mode.
class TargetSource {
 public:
  static TargetSource analytic_initial();
  static TargetSource network(Snapshot snapshot);

  bool is_analytic() const { return !snapshot_.has_value(); }
  const Snapshot& snapshot() const { return *snapshot_; }

  /// values[j] = V_{n-1}(x_j), grads.row(j) = grad_x V_{n-1}(x_j).
  void evaluate(const PdeProblem& problem, const Eigen::MatrixXd& x, Eigen::VectorXd& values,
                Eigen::MatrixXd& grads) const;

 private:
  std::optional<Snapshot> snapshot_;
};

struct LossGrad {
  double loss = 0.0;
  ParameterVector grad;
  BatchNormState bn_out;
};

/// Quadratic loss for one gradient step:
///   (1/J) sum_j [ V_n(theta, Y_{k}) - V_{n-1}(Y_{k+1})
///                 - dt f(Y_{k+1}, V_{n-1}(Y_{k+1}), grad V_{n-1}(Y_{k+1})) ]^2
/// with k = input_index, and its exact theta-gradient through the
/// train-mode forward of V_n (targets are constants).
LossGrad loss_and_grad(const ParameterVector& theta, const BatchNormState& bn,
                       const TargetSource& prev, const PdeProblem& problem,
                       const PathBatch& paths, int input_index, double dt,
                       bool update_running = true);

struct StepResult {
  Snapshot snapshot;
  std::vector<double> loss_trace;
};

/// Runs M optimizer iterations for time step n, resimulating a fresh path
/// batch each iteration, and returns the trained snapshot.
StepResult train_timestep(int n, const PdeProblem& problem, const TimeGrid& grid,
                          const NetworkArchitecture& arch, const TrainingSchedule& schedule,
                          const TargetSource& prev, const rng::Stream& run_stream);

struct SolverResult {
  PdeProblem problem;
  TimeGrid grid;
  NetworkArchitecture arch;
  std::uint64_t run_key = 0;                      // rng stream the run used
  std::vector<Snapshot> snapshots;                // snapshots[n-1] belongs to t_n
  std::vector<std::vector<double>> loss_traces;   // per time step

  const Snapshot& snapshot(int n) const { return snapshots[static_cast<std::size_t>(n) - 1]; }
};

/// The full recursion n = 1..N, threading frozen snapshots.
SolverResult solve(const PdeProblem& problem, const TimeGrid& grid,
                   const NetworkArchitecture& arch, const TrainingSchedule& schedule,
                   const rng::Stream& run_stream);

/// Infer-mode evaluation of snapshot n at a batch of points; n = 0 returns
/// phi(x) exactly. Pure.
Eigen::VectorXd evaluate(const SolverResult& result, int n, const Eigen::MatrixXd& x);

}  // namespace deepsplit
