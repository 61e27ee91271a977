#pragma once
// Euler-Maruyama simulation of the auxiliary process Y on the reversed grid:
//   Y_0 = xi,   Y_{k+1} = Y_k + mu(Y_k) (tau_{k+1} - tau_k)
//                        + sigma(Y_k) (B_{tau_{k+1}} - B_{tau_k}).

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "deepsplit/problem.hpp"
#include "deepsplit/rng.hpp"
#include "deepsplit/time_grid.hpp"

namespace deepsplit {

using PathStateMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct PathBatch {
  int dim = 0;
  int batch_size = 0;                     // J
  std::vector<PathStateMatrix> states;    // states[k] is J x d, k = 0..last_index
  rng::Stream stream;                      // provenance

  int last_index() const { return static_cast<int>(states.size()) - 1; }
  const PathStateMatrix& at(int k) const { return states[static_cast<std::size_t>(k)]; }
};

/// Simulates J paths over grid indices 0..last_index (default: the full
/// grid). Values at any index depend only on (stream, path, step), so a
/// truncated simulation agrees bit-exactly with the prefix of a full one.
/// Throws std::runtime_error naming (path, step) if a coefficient turns a
/// state non-finite.
PathBatch simulate_paths(const PdeProblem& problem, const TimeGrid& grid, int batch_size,
                         const rng::Stream& stream, int last_index = -1);

}  // namespace deepsplit
