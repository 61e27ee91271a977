#include "deepsplit/oracles.hpp"

#include <cmath>
#include "deepsplit/reduce.hpp"
#include <stdexcept>
#include <string>
#include <vector>

namespace deepsplit {

namespace {

constexpr long kChunk = 1 << 16;

// log-sum-exp accumulator: tracks max, sum of e^(a-max), sum of e^(2(a-max))
struct LseChunk {
  double max = -std::numeric_limits<double>::infinity();
  double s1 = 0.0;
  double s2 = 0.0;
  long n = 0;
};

LseChunk merge(const LseChunk& a, const LseChunk& b) {
  if (b.n == 0) return a;
  if (a.n == 0) return b;
  LseChunk out;
  out.max = std::max(a.max, b.max);
  const double ea = std::exp(a.max - out.max);
  const double eb = std::exp(b.max - out.max);
  out.s1 = a.s1 * ea + b.s1 * eb;
  out.s2 = a.s2 * ea * ea + b.s2 * eb * eb;
  out.n = a.n + b.n;
  return out;
}

LseChunk merge_tree(std::span<const LseChunk> chunks) {
  if (chunks.size() == 1) return chunks[0];
  const std::size_t half = chunks.size() / 2;
  return merge(merge_tree(chunks.subspan(0, half)), merge_tree(chunks.subspan(half)));
}

}  // namespace

McEstimate hjb_reference(int dim, double horizon, std::span<const double> x, long samples,
                         const rng::Stream& stream) {
  return cole_hopf_reference(
      [](std::span<const double> y) {
        double sq = 0.0;
        for (double v : y) sq += v * v;
        return std::pow(sq, 0.25);
      },
      dim, horizon, x, samples, stream);
}

McEstimate cole_hopf_reference(const std::function<double(std::span<const double>)>& phi,
                               int dim, double horizon, std::span<const double> x, long samples,
                               const rng::Stream& stream) {
  if (samples < 1000) throw std::invalid_argument("hjb_reference: need at least 1e3 samples");
  if (static_cast<int>(x.size()) != dim)
    throw std::invalid_argument("hjb_reference: dimension mismatch");
  const double scale = std::sqrt(2.0 * horizon);

  std::vector<LseChunk> chunks;
  std::vector<double> z(static_cast<std::size_t>(dim));
  std::vector<double> y(static_cast<std::size_t>(dim));
  std::vector<double> exponents;
  exponents.reserve(kChunk);

  for (long i = 0; i < samples; ++i) {
    rng::fill_normals(stream, static_cast<std::uint32_t>(i), 0, z);
    for (int c = 0; c < dim; ++c) {
      y[static_cast<std::size_t>(c)] =
          x[static_cast<std::size_t>(c)] + scale * z[static_cast<std::size_t>(c)];
    }
    exponents.push_back(-phi(y));
    if (static_cast<long>(exponents.size()) == kChunk || i + 1 == samples) {
      LseChunk chunk;
      for (double a : exponents) chunk.max = std::max(chunk.max, a);
      for (double a : exponents) {
        const double e = std::exp(a - chunk.max);
        chunk.s1 += e;
        chunk.s2 += e * e;
      }
      chunk.n = static_cast<long>(exponents.size());
      chunks.push_back(chunk);
      exponents.clear();
    }
  }

  const LseChunk all = merge_tree(chunks);
  const double k = static_cast<double>(all.n);
  const double mean_u = all.s1 / k;            // mean of e^(a - max)
  if (!(mean_u > 0.0)) throw std::runtime_error("hjb_reference: degenerate inner mean");
  const double var_u = std::max(0.0, all.s2 / k - mean_u * mean_u);

  McEstimate est;
  est.value = -(all.max + std::log(mean_u));
  est.std_error = std::sqrt(var_u / k) / mean_u;  // delta method on -ln(mean)
  return est;
}

namespace {

struct Tridiag {
  std::vector<double> lower, diag, upper;  // size n (lower[0], upper[n-1] unused)
};

// Thomas algorithm; rhs is overwritten with the solution.
void solve_tridiag(const Tridiag& m, std::vector<double>& rhs, std::vector<double>& scratch) {
  const std::size_t n = m.diag.size();
  scratch.resize(n);
  double den = m.diag[0];
  scratch[0] = m.upper[0] / den;
  rhs[0] /= den;
  for (std::size_t i = 1; i < n; ++i) {
    den = m.diag[i] - m.lower[i] * scratch[i - 1];
    scratch[i] = i + 1 < n ? m.upper[i] / den : 0.0;
    rhs[i] = (rhs[i] - m.lower[i] * rhs[i - 1]) / den;
  }
  for (std::size_t i = n - 1; i-- > 0;) rhs[i] -= scratch[i] * rhs[i + 1];
}

void check_stable(std::span<const double> w, const char* what) {
  for (double v : w) {
    if (!std::isfinite(v) || std::abs(v) > 1e10)
      throw std::runtime_error(std::string(what) + ": solution blew up");
  }
}

double radial_fd_solve(const RadialForm& form, int dim, double horizon, double r_max,
                       int space_cells, int time_steps) {
  const std::size_t n = static_cast<std::size_t>(space_cells) + 1;
  const double dr = r_max / space_cells;
  const double dt = horizon / time_steps;

  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) w[i] = form.initial(static_cast<double>(i) * dr);
  const double boundary = w[n - 1];

  // I - dt L, with the ghost-point symmetry row at r = 0 and a frozen
  // Dirichlet row at r_max
  Tridiag m;
  m.lower.assign(n, 0.0);
  m.diag.assign(n, 0.0);
  m.upper.assign(n, 0.0);
  {
    const double c0 = 2.0 * dim / (dr * dr);
    m.diag[0] = 1.0 + dt * c0;
    m.upper[0] = -dt * c0;
  }
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double r = static_cast<double>(i) * dr;
    const double diff = 1.0 / (dr * dr);
    const double adv = (dim - 1) / (r * 2.0 * dr);
    m.lower[i] = -dt * (diff - adv);
    m.diag[i] = 1.0 + 2.0 * dt * diff;
    m.upper[i] = -dt * (diff + adv);
  }
  m.diag[n - 1] = 1.0;

  std::vector<double> rhs(n), scratch;
  for (int step = 0; step < time_steps; ++step) {
    for (std::size_t i = 0; i + 1 < n; ++i) rhs[i] = w[i] + dt * form.nonlinearity(w[i]);
    rhs[n - 1] = boundary;
    solve_tridiag(m, rhs, scratch);
    w.swap(rhs);
    if ((step & 255) == 0) check_stable(w, "radial_fd_reference");
  }
  check_stable(w, "radial_fd_reference");
  return w[0];
}

}  // namespace

double radial_fd_reference(const RadialForm& form, int dim, double horizon,
                           const RadialFdSettings& settings) {
  if (dim < 1) throw std::invalid_argument("radial_fd_reference: dimension must be positive");
  if (!(horizon > 0.0)) throw std::invalid_argument("radial_fd_reference: horizon must be positive");
  if (settings.space_cells < 8 || settings.time_steps < 8)
    throw std::invalid_argument("radial_fd_reference: grid too coarse");

  const double r_max = settings.r_max > 0.0
                           ? settings.r_max
                           : std::max(10.0, 4.0 * std::sqrt(2.0 * horizon * dim));
  const double value =
      radial_fd_solve(form, dim, horizon, r_max, settings.space_cells, settings.time_steps);
  if (settings.check_boundary) {
    const double wide =
        radial_fd_solve(form, dim, horizon, 2.0 * r_max, 2 * settings.space_cells,
                        settings.time_steps);
    if (std::abs(wide - value) >= 1e-5)
      throw std::runtime_error("radial_fd_reference: domain too small (boundary-sensitive)");
  }
  return value;
}

namespace {

// local Lipschitz estimate of f in y; the explicit reaction step needs
// dt * L_f bounded
void check_reaction_cfl(const PdeProblem& problem, std::span<const double> x, double y,
                        std::span<const double> z, double dt) {
  const double h = 1e-4 * (1.0 + std::abs(y));
  const double fy =
      (problem.nonlinearity(x, y + h, z) - problem.nonlinearity(x, y - h, z)) / (2.0 * h);
  if (dt * std::abs(fy) > 2.0)
    throw std::invalid_argument("grid_fd_reference: explicit reaction step violates stability "
                                "(reduce dt or the box)");
}

double diagonal_sigma_entry(const PdeProblem& problem, std::span<const double> x, int axis) {
  std::vector<double> unit(static_cast<std::size_t>(problem.dim), 0.0);
  std::vector<double> out(static_cast<std::size_t>(problem.dim), 0.0);
  unit[static_cast<std::size_t>(axis)] = 1.0;
  problem.diffusion(x, unit, out);
  for (int c = 0; c < problem.dim; ++c) {
    if (c != axis && std::abs(out[static_cast<std::size_t>(c)]) > 1e-12)
      throw std::invalid_argument("grid_fd_reference: requires a diagonal diffusion matrix");
  }
  return out[static_cast<std::size_t>(axis)];
}

double grid_fd_1d(const PdeProblem& problem, double horizon, const GridFdSettings& settings,
                  double eval_point) {
  const int cells = settings.cells_per_dim;
  const std::size_t n = static_cast<std::size_t>(cells) + 1;
  const double lo = settings.box_lo[0];
  const double hi = settings.box_hi[0];
  const double dx = (hi - lo) / cells;
  const double dt = horizon / settings.time_steps;

  std::vector<double> xs(n);
  for (std::size_t i = 0; i < n; ++i) xs[i] = lo + static_cast<double>(i) * dx;

  std::vector<double> w(n);
  std::vector<double> point(1), mu(1);
  for (std::size_t i = 0; i < n; ++i) {
    point[0] = xs[i];
    w[i] = problem.initial(point);
  }
  const double left = w[0], right = w[n - 1];

  Tridiag m;
  m.lower.assign(n, 0.0);
  m.diag.assign(n, 0.0);
  m.upper.assign(n, 0.0);
  m.diag[0] = 1.0;
  m.diag[n - 1] = 1.0;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    point[0] = xs[i];
    const double s = diagonal_sigma_entry(problem, point, 0);
    const double diff = 0.5 * s * s / (dx * dx);
    problem.drift(point, mu);
    const double adv = mu[0] / (2.0 * dx);
    m.lower[i] = -dt * (diff - adv);
    m.diag[i] = 1.0 + 2.0 * dt * diff;
    m.upper[i] = -dt * (diff + adv);
  }

  std::vector<double> rhs(n), scratch, z(1);
  for (int step = 0; step < settings.time_steps; ++step) {
    rhs[0] = left;
    rhs[n - 1] = right;
    for (std::size_t i = 1; i + 1 < n; ++i) {
      point[0] = xs[i];
      z[0] = (w[i + 1] - w[i - 1]) / (2.0 * dx);
      if (step == 0) check_reaction_cfl(problem, point, w[i], z, dt);
      rhs[i] = w[i] + dt * problem.nonlinearity(point, w[i], z);
    }
    solve_tridiag(m, rhs, scratch);
    w.swap(rhs);
    if ((step & 255) == 0) check_stable(w, "grid_fd_reference");
  }
  check_stable(w, "grid_fd_reference");

  // linear interpolation at the evaluation point
  const double pos = (eval_point - lo) / dx;
  const auto i0 = static_cast<std::size_t>(std::clamp(std::floor(pos), 0.0, double(cells - 1)));
  const double frac = pos - static_cast<double>(i0);
  return w[i0] * (1.0 - frac) + w[i0 + 1] * frac;
}

double grid_fd_2d(const PdeProblem& problem, double horizon, const GridFdSettings& settings,
                  std::span<const double> eval_point) {
  const int cells = settings.cells_per_dim;
  const std::size_t n = static_cast<std::size_t>(cells) + 1;
  const double dt = horizon / settings.time_steps;
  const double lo0 = settings.box_lo[0], hi0 = settings.box_hi[0];
  const double lo1 = settings.box_lo[1], hi1 = settings.box_hi[1];
  const double dx0 = (hi0 - lo0) / cells;
  const double dx1 = (hi1 - lo1) / cells;

  auto at = [n](std::vector<double>& v, std::size_t i, std::size_t j) -> double& {
    return v[i * n + j];
  };

  std::vector<double> w(n * n);
  std::vector<double> point(2), mu(2), z(2);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      point[0] = lo0 + static_cast<double>(i) * dx0;
      point[1] = lo1 + static_cast<double>(j) * dx1;
      at(w, i, j) = problem.initial(point);
    }
  }
  std::vector<double> frozen = w;  // boundary values stay at phi

  std::vector<double> rhs(n), scratch;
  std::vector<double> stage(n * n);

  for (int step = 0; step < settings.time_steps; ++step) {
    // explicit reaction + advection on the current state
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (i == 0 || j == 0 || i == n - 1 || j == n - 1) {
          at(stage, i, j) = at(frozen, i, j);
          continue;
        }
        point[0] = lo0 + static_cast<double>(i) * dx0;
        point[1] = lo1 + static_cast<double>(j) * dx1;
        z[0] = (at(w, i + 1, j) - at(w, i - 1, j)) / (2.0 * dx0);
        z[1] = (at(w, i, j + 1) - at(w, i, j - 1)) / (2.0 * dx1);
        problem.drift(point, mu);
        if (step == 0 && i == n / 2 && j == n / 2)
          check_reaction_cfl(problem, point, at(w, i, j), z, dt);
        at(stage, i, j) = at(w, i, j) +
                          dt * (problem.nonlinearity(point, at(w, i, j), z) + mu[0] * z[0] +
                                mu[1] * z[1]);
      }
    }

    // implicit diffusion, direction 0 then direction 1 (locally one-dimensional)
    Tridiag m;
    m.lower.assign(n, 0.0);
    m.diag.assign(n, 0.0);
    m.upper.assign(n, 0.0);
    for (std::size_t j = 1; j + 1 < n; ++j) {
      m.diag[0] = 1.0;
      m.diag[n - 1] = 1.0;
      for (std::size_t i = 1; i + 1 < n; ++i) {
        point[0] = lo0 + static_cast<double>(i) * dx0;
        point[1] = lo1 + static_cast<double>(j) * dx1;
        const double s = diagonal_sigma_entry(problem, point, 0);
        const double diff = 0.5 * s * s / (dx0 * dx0);
        m.lower[i] = -dt * diff;
        m.diag[i] = 1.0 + 2.0 * dt * diff;
        m.upper[i] = -dt * diff;
      }
      for (std::size_t i = 0; i < n; ++i) rhs[i] = at(stage, i, j);
      rhs[0] = at(frozen, 0, j);
      rhs[n - 1] = at(frozen, n - 1, j);
      solve_tridiag(m, rhs, scratch);
      for (std::size_t i = 0; i < n; ++i) at(stage, i, j) = rhs[i];
    }
    for (std::size_t i = 1; i + 1 < n; ++i) {
      m.diag[0] = 1.0;
      m.diag[n - 1] = 1.0;
      for (std::size_t j = 1; j + 1 < n; ++j) {
        point[0] = lo0 + static_cast<double>(i) * dx0;
        point[1] = lo1 + static_cast<double>(j) * dx1;
        const double s = diagonal_sigma_entry(problem, point, 1);
        const double diff = 0.5 * s * s / (dx1 * dx1);
        m.lower[j] = -dt * diff;
        m.diag[j] = 1.0 + 2.0 * dt * diff;
        m.upper[j] = -dt * diff;
      }
      for (std::size_t j = 0; j < n; ++j) rhs[j] = at(stage, i, j);
      rhs[0] = at(frozen, i, 0);
      rhs[n - 1] = at(frozen, i, n - 1);
      solve_tridiag(m, rhs, scratch);
      for (std::size_t j = 0; j < n; ++j) at(stage, i, j) = rhs[j];
    }
    w.swap(stage);
    if ((step & 63) == 0) check_stable(w, "grid_fd_reference");
  }
  check_stable(w, "grid_fd_reference");

  // bilinear interpolation
  const double p0 = (eval_point[0] - lo0) / dx0;
  const double p1 = (eval_point[1] - lo1) / dx1;
  const auto i0 = static_cast<std::size_t>(std::clamp(std::floor(p0), 0.0, double(cells - 1)));
  const auto j0 = static_cast<std::size_t>(std::clamp(std::floor(p1), 0.0, double(cells - 1)));
  const double f0 = p0 - static_cast<double>(i0);
  const double f1 = p1 - static_cast<double>(j0);
  return at(w, i0, j0) * (1 - f0) * (1 - f1) + at(w, i0 + 1, j0) * f0 * (1 - f1) +
         at(w, i0, j0 + 1) * (1 - f0) * f1 + at(w, i0 + 1, j0 + 1) * f0 * f1;
}

}  // namespace

double grid_fd_reference(const PdeProblem& problem, double horizon,
                         const GridFdSettings& settings, std::span<const double> eval_point) {
  if (problem.dim != 1 && problem.dim != 2)
    throw std::invalid_argument("grid_fd_reference: only d in {1,2} supported");
  if (settings.box_lo.size() != static_cast<std::size_t>(problem.dim) ||
      settings.box_hi.size() != static_cast<std::size_t>(problem.dim))
    throw std::invalid_argument("grid_fd_reference: box bounds must match the dimension");
  if (eval_point.size() != static_cast<std::size_t>(problem.dim))
    throw std::invalid_argument("grid_fd_reference: evaluation point dimension mismatch");
  if (settings.cells_per_dim < 8 || settings.time_steps < 8)
    throw std::invalid_argument("grid_fd_reference: grid too coarse");
  for (int c = 0; c < problem.dim; ++c) {
    if (!(settings.box_lo[static_cast<std::size_t>(c)] <
          settings.box_hi[static_cast<std::size_t>(c)]))
      throw std::invalid_argument("grid_fd_reference: empty box");
  }
  if (problem.dim == 1) return grid_fd_1d(problem, horizon, settings, eval_point[0]);
  return grid_fd_2d(problem, horizon, settings, eval_point);
}

McEstimate linearized_bs_reference(int dim, double horizon, std::span<const double> x,
                                   long samples, const rng::Stream& stream, double gamma_bar) {
  if (samples < 1000)
    throw std::invalid_argument("linearized_bs_reference: need at least 1e3 samples");
  if (static_cast<int>(x.size()) != dim)
    throw std::invalid_argument("linearized_bs_reference: dimension mismatch");

  const double delta = 2.0 / 3.0;
  const double rate = 0.02;
  const double mu_bar = 0.02;
  const double sigma_bar = 0.2;
  const double discount = std::exp(-((1.0 - delta) * gamma_bar + rate) * horizon);
  const double drift = (mu_bar - 0.5 * sigma_bar * sigma_bar) * horizon;
  const double vol = sigma_bar * std::sqrt(horizon);

  std::vector<double> z(static_cast<std::size_t>(dim));
  std::vector<double> sums1, sums2;
  double s1 = 0.0, s2 = 0.0;
  long in_chunk = 0;
  for (long i = 0; i < samples; ++i) {
    rng::fill_normals(stream, static_cast<std::uint32_t>(i), 0, z);
    double m = std::numeric_limits<double>::infinity();
    for (int c = 0; c < dim; ++c) {
      const double xt =
          x[static_cast<std::size_t>(c)] * std::exp(drift + vol * z[static_cast<std::size_t>(c)]);
      m = std::min(m, xt);
    }
    s1 += m;
    s2 += m * m;
    if (++in_chunk == kChunk || i + 1 == samples) {
      sums1.push_back(s1);
      sums2.push_back(s2);
      s1 = s2 = 0.0;
      in_chunk = 0;
    }
  }
  const double total1 = pairwise_sum(sums1);
  const double total2 = pairwise_sum(sums2);
  const double k = static_cast<double>(samples);
  const double mean = total1 / k;
  const double var = std::max(0.0, total2 / k - mean * mean);

  McEstimate est;
  est.value = discount * mean;
  est.std_error = discount * std::sqrt(var / k);
  return est;
}

}  // namespace deepsplit
