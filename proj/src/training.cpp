#include "deepsplit/training.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "deepsplit/reduce.hpp"

namespace deepsplit {

void TrainingSchedule::validate() const {
  if (steps < 0) throw std::invalid_argument("schedule: negative step count");
  if (batch_sizes.size() != static_cast<std::size_t>(steps) ||
      learning_rates.size() != static_cast<std::size_t>(steps))
    throw std::invalid_argument("schedule: per-step arrays must have length M");
  for (int j : batch_sizes)
    if (j < 1) throw std::invalid_argument("schedule: batch sizes must be positive");
  for (double g : learning_rates)
    if (!(g > 0.0)) throw std::invalid_argument("schedule: learning rates must be positive");
  if (!(adam.beta1 > 0.0 && adam.beta1 < 1.0 && adam.beta2 > 0.0 && adam.beta2 < 1.0))
    throw std::invalid_argument("schedule: adam betas must lie in (0,1)");
  if (!(adam.epsilon > 0.0)) throw std::invalid_argument("schedule: adam epsilon must be positive");
}

TrainingSchedule TrainingSchedule::piecewise(
    int steps, const std::vector<std::pair<int, double>>& breakpoints, int batch_size) {
  TrainingSchedule s;
  s.steps = steps;
  s.batch_sizes.assign(static_cast<std::size_t>(steps), batch_size);
  s.learning_rates.resize(static_cast<std::size_t>(steps));
  for (int m = 0; m < steps; ++m) {
    double rate = breakpoints.empty() ? 1e-3 : breakpoints.back().second;
    for (const auto& [upper, value] : breakpoints) {
      if (m <= upper) {
        rate = value;
        break;
      }
    }
    s.learning_rates[static_cast<std::size_t>(m)] = rate;
  }
  s.validate();
  return s;
}

TargetSource TargetSource::analytic_initial() { return TargetSource{}; }

TargetSource TargetSource::network(Snapshot snapshot) {
  TargetSource t;
  t.snapshot_ = std::move(snapshot);
  return t;
}

void TargetSource::evaluate(const PdeProblem& problem, const Eigen::MatrixXd& x,
                            Eigen::VectorXd& values, Eigen::MatrixXd& grads) const {
  const Eigen::Index J = x.rows();
  const Eigen::Index d = x.cols();
  values.resize(J);
  grads.resize(J, d);
  if (snapshot_) {
    values = infer_values_and_grad_x(snapshot_->params, snapshot_->bn, x, grads);
    return;
  }
  std::vector<double> point(static_cast<std::size_t>(d));
  std::vector<double> g(static_cast<std::size_t>(d));
  for (Eigen::Index j = 0; j < J; ++j) {
    for (Eigen::Index c = 0; c < d; ++c) point[static_cast<std::size_t>(c)] = x(j, c);
    values[j] = problem.initial(point);
    problem.initial_grad(point, g);
    for (Eigen::Index c = 0; c < d; ++c) grads(j, c) = g[static_cast<std::size_t>(c)];
  }
}

LossGrad loss_and_grad(const ParameterVector& theta, const BatchNormState& bn,
                       const TargetSource& prev, const PdeProblem& problem,
                       const PathBatch& paths, int input_index, double dt,
                       bool update_running) {
  if (input_index < 0 || input_index + 1 > paths.last_index())
    throw std::invalid_argument("loss_and_grad: path batch does not cover the required pair");
  const Eigen::MatrixXd x_fit = paths.at(input_index);
  const Eigen::MatrixXd x_tgt = paths.at(input_index + 1);
  const Eigen::Index J = x_fit.rows();

  // frozen target: V_{n-1} value and x-gradient, then the driver term
  Eigen::VectorXd prev_values;
  Eigen::MatrixXd prev_grads;
  prev.evaluate(problem, x_tgt, prev_values, prev_grads);

  Eigen::VectorXd target(J);
  std::vector<double> point(static_cast<std::size_t>(x_tgt.cols()));
  std::vector<double> zrow(static_cast<std::size_t>(x_tgt.cols()));
  for (Eigen::Index j = 0; j < J; ++j) {
    for (Eigen::Index c = 0; c < x_tgt.cols(); ++c) {
      point[static_cast<std::size_t>(c)] = x_tgt(j, c);
      zrow[static_cast<std::size_t>(c)] = prev_grads(j, c);
    }
    target[j] = prev_values[j] + dt * problem.nonlinearity(point, prev_values[j], zrow);
  }

  ForwardResult fwd = forward(theta, bn, x_fit, ForwardMode::train, update_running);
  const Eigen::VectorXd residual = fwd.values - target;
  for (Eigen::Index j = 0; j < J; ++j) {
    if (!std::isfinite(residual[j]))
      throw std::runtime_error("loss_and_grad: non-finite loss term at path " + std::to_string(j));
  }

  Eigen::VectorXd squared = residual.array().square();
  LossGrad out;
  out.loss = pairwise_mean({squared.data(), static_cast<std::size_t>(squared.size())});
  const Eigen::VectorXd upstream = (2.0 / static_cast<double>(J)) * residual;
  out.grad = grad_params(theta, fwd.cache, upstream);
  out.bn_out = std::move(fwd.bn_out);
  return out;
}

StepResult train_timestep(int n, const PdeProblem& problem, const TimeGrid& grid,
                          const NetworkArchitecture& arch, const TrainingSchedule& schedule,
                          const TargetSource& prev, const rng::Stream& run_stream) {
  schedule.validate();
  const int N = grid.count;
  if (n < 1 || n > N) throw std::invalid_argument("train_timestep: step index out of range");

  ParameterVector theta;
  if (schedule.init_policy == TrainingSchedule::InitPolicy::warm_start_from_previous &&
      !prev.is_analytic()) {
    theta = prev.snapshot().params;
  } else {
    theta = init_params(arch, run_stream.child(rng::Purpose::init, static_cast<std::uint64_t>(n)));
  }
  BatchNormState bn = BatchNormState::fresh(arch, schedule.bn_momentum);
  AdamState adam = AdamState::fresh(theta.values().size());

  const int input_index = N - n;
  const double dt = grid.dt(n);
  const int last_index = schedule.simulate_consumed_pair_only ? input_index + 1 : N;

  StepResult result;
  result.loss_trace.reserve(static_cast<std::size_t>(schedule.steps));

  for (int m = 0; m < schedule.steps; ++m) {
    const auto stream = run_stream.child(rng::Purpose::paths, static_cast<std::uint64_t>(n),
                                         static_cast<std::uint64_t>(m));
    const PathBatch paths = simulate_paths(problem, grid,
                                           schedule.batch_sizes[static_cast<std::size_t>(m)],
                                           stream, last_index);
    LossGrad lg = loss_and_grad(theta, bn, prev, problem, paths, input_index, dt);
    if (!(lg.loss < kDivergenceThreshold)) {
      throw std::runtime_error("train_timestep: loss diverged at time step " + std::to_string(n) +
                               ", iteration " + std::to_string(m) + " (loss " +
                               std::to_string(lg.loss) + ")");
    }
    result.loss_trace.push_back(lg.loss);
    bn = std::move(lg.bn_out);

    const double rate = schedule.learning_rates[static_cast<std::size_t>(m)];
    if (schedule.optimizer == TrainingSchedule::Optimizer::adam) {
      auto [next_state, next_theta] = adam_step(adam, theta, lg.grad, rate, schedule.adam);
      adam = std::move(next_state);
      theta = std::move(next_theta);
    } else {
      theta = sgd_step(theta, lg.grad, rate);
    }
  }

  result.snapshot = Snapshot{std::move(theta), std::move(bn)};
  return result;
}

SolverResult solve(const PdeProblem& problem, const TimeGrid& grid,
                   const NetworkArchitecture& arch, const TrainingSchedule& schedule,
                   const rng::Stream& run_stream) {
  if (problem.dim != arch.input_dim)
    throw std::invalid_argument("solve: problem and network dimension disagree");
  SolverResult result;
  result.problem = problem;
  result.grid = grid;
  result.arch = arch;
  result.run_key = run_stream.key;

  TargetSource prev = TargetSource::analytic_initial();
  for (int n = 1; n <= grid.count; ++n) {
    StepResult step;
    try {
      step = train_timestep(n, problem, grid, arch, schedule, prev, run_stream);
    } catch (const std::runtime_error& err) {
      throw std::runtime_error("solve: failure in time step " + std::to_string(n) + ": " +
                               err.what());
    }
    result.snapshots.push_back(step.snapshot);
    result.loss_traces.push_back(std::move(step.loss_trace));
    prev = TargetSource::network(std::move(step.snapshot));
  }
  return result;
}

Eigen::VectorXd evaluate(const SolverResult& result, int n, const Eigen::MatrixXd& x) {
  if (x.cols() != result.problem.dim)
    throw std::invalid_argument("evaluate: dimension mismatch");
  if (n < 0 || n > result.grid.count)
    throw std::invalid_argument("evaluate: step index out of range");
  if (n == 0) {
    Eigen::VectorXd out(x.rows());
    std::vector<double> point(static_cast<std::size_t>(x.cols()));
    for (Eigen::Index j = 0; j < x.rows(); ++j) {
      for (Eigen::Index c = 0; c < x.cols(); ++c) point[static_cast<std::size_t>(c)] = x(j, c);
      out[j] = result.problem.initial(point);
    }
    return out;
  }
  const Snapshot& snap = result.snapshot(n);
  return infer_values(snap.params, snap.bn, x);
}

}  // namespace deepsplit
