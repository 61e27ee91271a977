#include "deepsplit/path.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace deepsplit {

namespace {

bool all_finite(std::span<const double> v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace

void StartDistribution::sample(const rng::Stream& stream, std::uint32_t elem,
                               std::span<double> out) const {
  if (kind == Kind::point) {
    if (point.size() != out.size())
      throw std::invalid_argument("start distribution: dimension mismatch");
    std::copy(point.begin(), point.end(), out.begin());
    return;
  }
  rng::fill_uniforms(stream, elem, 0xFFFFFFFFu, out);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = box_lo[i] + out[i] * (box_hi[i] - box_lo[i]);
  }
}

PathBatch simulate_paths(const PdeProblem& problem, const TimeGrid& grid, int batch_size,
                         const rng::Stream& stream, int last_index) {
  const int d = problem.dim;
  const int N = grid.count;
  if (batch_size < 1) throw std::invalid_argument("simulate_paths: batch size must be >= 1");
  if (last_index < 0) last_index = N;
  if (last_index > N) throw std::invalid_argument("simulate_paths: last index beyond grid");

  PathBatch batch;
  batch.dim = d;
  batch.batch_size = batch_size;
  batch.stream = stream;
  batch.states.assign(static_cast<std::size_t>(last_index) + 1, PathStateMatrix(batch_size, d));

  const auto sd = static_cast<std::size_t>(d);
  std::vector<double> mu(sd);
  std::vector<double> noise(sd);
  std::vector<double> sig(sd);

  for (int j = 0; j < batch_size; ++j) {
    std::span<double> row{batch.states[0].data() + static_cast<std::size_t>(j) * sd, sd};
    problem.start.sample(stream, static_cast<std::uint32_t>(j), row);
  }

  for (int k = 0; k < last_index; ++k) {
    const double dtau = grid.dtau(k);
    const double sqrt_dtau = std::sqrt(dtau);
    const auto& src = batch.states[static_cast<std::size_t>(k)];
    auto& dst = batch.states[static_cast<std::size_t>(k) + 1];
    for (int j = 0; j < batch_size; ++j) {
      std::span<const double> x{src.data() + static_cast<std::size_t>(j) * sd, sd};
      std::span<double> out{dst.data() + static_cast<std::size_t>(j) * sd, sd};
      problem.drift(x, mu);
      rng::fill_normals(stream, static_cast<std::uint32_t>(j), static_cast<std::uint32_t>(k),
                        noise);
      for (std::size_t c = 0; c < sd; ++c) noise[c] *= sqrt_dtau;
      problem.diffusion(x, noise, sig);
      for (std::size_t c = 0; c < sd; ++c) out[c] = x[c] + mu[c] * dtau + sig[c];
      if (!all_finite(out)) {
        throw std::runtime_error("simulate_paths: non-finite state at path " + std::to_string(j) +
                                 ", step " + std::to_string(k + 1));
      }
    }
  }
  return batch;
}

}  // namespace deepsplit
