#include "deepsplit/time_grid.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace deepsplit {

namespace {
TimeGrid finish(double horizon, int count, std::vector<double> forward) {
  TimeGrid grid;
  grid.horizon = horizon;
  grid.count = count;
  grid.reversed_times.resize(forward.size());
  for (int n = 0; n <= count; ++n) {
    grid.reversed_times[static_cast<std::size_t>(n)] =
        horizon - forward[static_cast<std::size_t>(count - n)];
  }
  grid.forward_times = std::move(forward);
  return grid;
}
}  // namespace

TimeGrid make_grid(double horizon, int count) {
  if (!(horizon > 0.0) || !std::isfinite(horizon))
    throw std::invalid_argument("time grid: horizon must be positive and finite");
  if (count < 1) throw std::invalid_argument("time grid: need at least one step");
  std::vector<double> forward(static_cast<std::size_t>(count) + 1);
  for (int n = 0; n <= count; ++n) {
    forward[static_cast<std::size_t>(n)] =
        horizon * (static_cast<double>(n) / static_cast<double>(count));
  }
  forward.front() = 0.0;
  forward.back() = horizon;
  return finish(horizon, count, forward);
}

TimeGrid make_grid(double horizon, const std::vector<double>& times) {
  if (!(horizon > 0.0) || !std::isfinite(horizon))
    throw std::invalid_argument("time grid: horizon must be positive and finite");
  if (times.size() < 2)
    throw std::invalid_argument("time grid: explicit grid needs at least two points");
  if (times.front() != 0.0)
    throw std::invalid_argument("time grid: explicit grid must start at 0");
  if (times.back() != horizon)
    throw std::invalid_argument("time grid: explicit grid must end at the horizon");
  for (std::size_t i = 1; i < times.size(); ++i) {
    if (!(times[i] > times[i - 1]))
      throw std::invalid_argument("time grid: explicit grid must be strictly increasing (index " +
                                  std::to_string(i) + ")");
  }
  return finish(horizon, static_cast<int>(times.size()) - 1, times);
}

}  // namespace deepsplit
