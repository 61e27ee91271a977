#pragma once
// Temporal discretization 0 = t_0 < t_1 < ... < t_N = T and the reversed
// grid tau_n = T - t_{N-n} on which the auxiliary process runs.

#include <vector>

namespace deepsplit {

struct TimeGrid {
  double horizon = 0.0;               // T
  int count = 0;                      // N
  std::vector<double> forward_times;  // t_0..t_N
  std::vector<double> reversed_times; // tau_0..tau_N, stored as T - t_{N-n}

  double dt(int n) const { return forward_times[n] - forward_times[n - 1]; }
  double dtau(int k) const { return reversed_times[k + 1] - reversed_times[k]; }
};

/// Uniform grid t_n = n T / N.
TimeGrid make_grid(double horizon, int count);

/// Explicit grid; `times` must hold N+1 strictly increasing values with
/// times[0] == 0 and times[N] == horizon. Throws std::invalid_argument
/// otherwise.
TimeGrid make_grid(double horizon, const std::vector<double>& times);

}  // namespace deepsplit
