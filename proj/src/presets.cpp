#include "deepsplit/presets.hpp"

#include <cmath>
#include <stdexcept>

namespace deepsplit {

namespace {

constexpr double kGradClamp = 1e6;  // cap on |grad phi| near kinks/singularities

double sq_norm(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return s;
}

void zero_drift(std::span<const double>, std::span<double> out) {
  std::fill(out.begin(), out.end(), 0.0);
}

void sqrt2_identity_diffusion(std::span<const double>, std::span<const double> w,
                              std::span<double> out) {
  const double c = std::sqrt(2.0);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = c * w[i];
}

TrainingSchedule standard_schedule(int steps,
                                   const std::vector<std::pair<int, double>>& breakpoints) {
  auto s = TrainingSchedule::piecewise(steps, breakpoints, 256);
  s.optimizer = TrainingSchedule::Optimizer::adam;
  s.adam = AdamParams{0.9, 0.999, 1e-8};
  return s;
}

// Black-Scholes parameter set (derivative prices under default risk)
struct BsParams {
  double delta = 2.0 / 3.0;
  double rate = 0.02;       // R
  double gamma_h = 0.2;
  double gamma_l = 0.02;
  double v_h = 50.0;
  double v_l = 70.0;
  double mu_bar = 0.02;
  double sigma_bar = 0.2;
};

BenchmarkPreset make_black_scholes(int dim, const BsParams& p, std::string id) {
  if (dim < 1) throw std::invalid_argument("preset: dimension must be positive");
  BenchmarkPreset preset;
  preset.id = std::move(id);
  preset.horizon = 1.0 / 3.0;
  preset.num_steps = 96;
  preset.hidden_width = dim + 10 + (dim <= 100 ? 40 : 0);
  const int steps = 2000 + (dim <= 100 ? 1000 : 0);
  preset.schedule =
      dim <= 100 ? standard_schedule(steps, {{2500, 1e-1}, {2750, 1e-2}, {3000, 1e-3}})
                 : standard_schedule(steps, {{1500, 1e-1}, {1750, 1e-2}, {2000, 1e-3}});
  preset.start_point.assign(static_cast<std::size_t>(dim), 50.0);

  PdeProblem& prob = preset.problem;
  prob.dim = dim;
  prob.label = preset.id;
  prob.drift = [mu = p.mu_bar](std::span<const double> x, std::span<double> out) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = mu * x[i];
  };
  prob.diffusion = [sig = p.sigma_bar](std::span<const double> x, std::span<const double> w,
                                       std::span<double> out) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = sig * x[i] * w[i];
  };
  prob.nonlinearity = [p](std::span<const double>, double y, std::span<const double>) {
    const double slope = (p.gamma_h - p.gamma_l) / (p.v_h - p.v_l);
    const double q = std::min(p.gamma_h, std::max(p.gamma_l, slope * (y - p.v_h) + p.gamma_h));
    return -(1.0 - p.delta) * q * y - p.rate * y;
  };
  prob.initial = [](std::span<const double> x) {
    double m = x[0];
    for (double v : x) m = std::min(m, v);
    return m;
  };
  prob.initial_grad = [](std::span<const double> x, std::span<double> out) {
    std::size_t arg = 0;
    for (std::size_t i = 1; i < x.size(); ++i)
      if (x[i] < x[arg]) arg = i;  // lowest index wins ties
    std::fill(out.begin(), out.end(), 0.0);
    out[arg] = 1.0;
  };
  prob.start = StartDistribution::at(preset.start_point);
  return preset;
}

}  // namespace

BenchmarkPreset preset_hjb(int dim, double horizon, int num_steps) {
  if (dim < 1) throw std::invalid_argument("preset: dimension must be positive");
  BenchmarkPreset preset;
  preset.id = "hjb";
  preset.horizon = horizon;
  preset.num_steps = num_steps > 0 ? num_steps : std::max(1, static_cast<int>(std::lround(24.0 * horizon)));
  preset.hidden_width = dim + 10;
  if (dim == 10000) {
    preset.schedule = standard_schedule(600, {{400, 1e-1}, {500, 1e-2}, {600, 1e-3}});
  } else {
    preset.schedule = standard_schedule(500, {{300, 1e-1}, {400, 1e-2}, {500, 1e-3}});
  }
  preset.start_point.assign(static_cast<std::size_t>(dim), 0.0);
  preset.reference_value = paper_reference("hjb", dim, horizon);

  PdeProblem& prob = preset.problem;
  prob.dim = dim;
  prob.label = "hjb";
  prob.drift = zero_drift;
  prob.diffusion = sqrt2_identity_diffusion;
  prob.nonlinearity = [](std::span<const double>, double, std::span<const double> z) {
    return -sq_norm(z);
  };
  prob.initial = [](std::span<const double> x) { return std::pow(sq_norm(x), 0.25); };
  // grad phi = x / (2 |x|^(3/2}); zero at the origin, norm clamped at 1e6
  prob.initial_grad = [](std::span<const double> x, std::span<double> out) {
    const double r = std::sqrt(sq_norm(x));
    if (r == 0.0) {
      std::fill(out.begin(), out.end(), 0.0);
      return;
    }
    double scale = 1.0 / (2.0 * std::pow(r, 1.5));
    const double norm = 1.0 / (2.0 * std::sqrt(r));
    if (norm > kGradClamp) scale *= kGradClamp / norm;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = scale * x[i];
  };
  prob.start = StartDistribution::at(preset.start_point);
  return preset;
}

BenchmarkPreset preset_black_scholes(int dim) {
  BenchmarkPreset preset = make_black_scholes(dim, BsParams{}, "bs");
  preset.reference_value = paper_reference("bs", dim, preset.horizon);
  return preset;
}

BenchmarkPreset preset_black_scholes_linearized(int dim, double gamma_bar) {
  BsParams p;
  p.gamma_h = gamma_bar;
  p.gamma_l = gamma_bar;
  return make_black_scholes(dim, p, "bs-linear");
}

BenchmarkPreset preset_allen_cahn(int dim) {
  if (dim < 1) throw std::invalid_argument("preset: dimension must be positive");
  BenchmarkPreset preset;
  preset.id = "allen-cahn";
  preset.horizon = 0.3;
  preset.num_steps = 10;
  preset.hidden_width = dim + 10;
  preset.schedule = standard_schedule(500, {{300, 1e-1}, {400, 1e-2}, {500, 1e-3}});
  preset.start_point.assign(static_cast<std::size_t>(dim), 0.0);
  preset.reference_value = paper_reference("allen-cahn", dim, preset.horizon);

  PdeProblem& prob = preset.problem;
  prob.dim = dim;
  prob.label = "allen-cahn";
  prob.drift = zero_drift;
  prob.diffusion = sqrt2_identity_diffusion;
  prob.nonlinearity = [](std::span<const double>, double y, std::span<const double>) {
    return y - y * y * y;
  };
  prob.initial = [](std::span<const double> x) {
    double m = x[0];
    for (double v : x) m = std::max(m, v);
    return std::atan(m);
  };
  prob.initial_grad = [](std::span<const double> x, std::span<double> out) {
    std::size_t arg = 0;
    for (std::size_t i = 1; i < x.size(); ++i)
      if (x[i] > x[arg]) arg = i;  // lowest index wins ties
    std::fill(out.begin(), out.end(), 0.0);
    out[arg] = 1.0 / (1.0 + x[arg] * x[arg]);
  };
  prob.start = StartDistribution::at(preset.start_point);
  return preset;
}

namespace {

BenchmarkPreset make_radial_decay_preset(int dim, std::string id,
                                         std::function<double(double)> f_of_u,
                                         int num_steps, int train_steps, int width_offset,
                                         const std::vector<std::pair<int, double>>& breakpoints) {
  if (dim < 1) throw std::invalid_argument("preset: dimension must be positive");
  BenchmarkPreset preset;
  preset.id = id;
  preset.horizon = 0.3;
  preset.num_steps = num_steps;
  preset.hidden_width = dim + width_offset;
  preset.schedule = standard_schedule(train_steps, breakpoints);
  preset.start_point.assign(static_cast<std::size_t>(dim), 0.0);

  PdeProblem& prob = preset.problem;
  prob.dim = dim;
  prob.label = id;
  prob.drift = zero_drift;
  prob.diffusion = sqrt2_identity_diffusion;
  prob.nonlinearity = [f = f_of_u](std::span<const double>, double y, std::span<const double>) {
    return f(y);
  };
  prob.initial = [](std::span<const double> x) { return 5.0 / (10.0 + 2.0 * sq_norm(x)); };
  prob.initial_grad = [](std::span<const double> x, std::span<double> out) {
    const double den = 10.0 + 2.0 * sq_norm(x);
    const double scale = -20.0 / (den * den);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = scale * x[i];
  };
  prob.start = StartDistribution::at(preset.start_point);

  preset.radial = RadialForm{
      [](double r) { return 5.0 / (10.0 + 2.0 * r * r); },
      f_of_u,
  };
  return preset;
}

}  // namespace

BenchmarkPreset preset_semilinear_heat(int dim, int num_steps) {
  auto preset = make_radial_decay_preset(
      dim, "heat", [](double y) { return (1.0 - y * y) / (1.0 + y * y); }, num_steps, 500, 10,
      {{300, 1e-1}, {400, 1e-2}, {500, 1e-3}});
  preset.reference_value = paper_reference("heat", dim, preset.horizon);
  return preset;
}

BenchmarkPreset preset_sine_gordon(int dim) {
  auto preset = make_radial_decay_preset(dim, "sine-gordon", [](double y) { return std::sin(y); },
                                         20, 1000, 50,
                                         {{250, 1e-1}, {500, 1e-2}, {750, 1e-3}, {1000, 1e-4}});
  preset.reference_value = paper_reference("sine-gordon", dim, preset.horizon);
  return preset;
}

BenchmarkPreset preset_constant(int dim, double value) {
  if (dim < 1) throw std::invalid_argument("preset: dimension must be positive");
  BenchmarkPreset preset;
  preset.id = "const";
  preset.horizon = 0.3;
  preset.num_steps = 4;
  preset.hidden_width = dim + 10;
  preset.schedule = standard_schedule(200, {{120, 1e-1}, {160, 1e-2}, {200, 1e-3}});
  preset.start_point.assign(static_cast<std::size_t>(dim), 0.0);
  preset.reference_value = value;  // exact solution

  PdeProblem& prob = preset.problem;
  prob.dim = dim;
  prob.label = "const";
  prob.drift = zero_drift;
  prob.diffusion = sqrt2_identity_diffusion;
  prob.nonlinearity = [](std::span<const double>, double, std::span<const double>) { return 0.0; };
  prob.initial = [value](std::span<const double>) { return value; };
  prob.initial_grad = [](std::span<const double>, std::span<double> out) {
    std::fill(out.begin(), out.end(), 0.0);
  };
  prob.start = StartDistribution::at(preset.start_point);

  preset.radial = RadialForm{[value](double) { return value; }, [](double) { return 0.0; }};
  return preset;
}

BenchmarkPreset preset_by_id(const std::string& id, int dim, std::optional<double> horizon,
                             std::optional<int> num_steps) {
  BenchmarkPreset preset;
  if (id == "hjb") {
    preset = preset_hjb(dim, horizon.value_or(1.0 / 3.0), num_steps.value_or(0));
  } else if (id == "bs") {
    preset = preset_black_scholes(dim);
  } else if (id == "bs-linear") {
    preset = preset_black_scholes_linearized(dim);
  } else if (id == "allen-cahn") {
    preset = preset_allen_cahn(dim);
  } else if (id == "heat") {
    preset = preset_semilinear_heat(dim, num_steps.value_or(20));
  } else if (id == "sine-gordon") {
    preset = preset_sine_gordon(dim);
  } else if (id == "const") {
    preset = preset_constant(dim);
  } else {
    throw std::invalid_argument("unknown preset id: " + id);
  }
  if (horizon && id != "hjb") {
    preset.horizon = *horizon;
    preset.reference_value = paper_reference(id, dim, *horizon);
  }
  if (num_steps && id != "hjb" && id != "heat") preset.num_steps = *num_steps;
  return preset;
}

namespace {

struct PaperRow {
  int dim;
  double horizon;
  double value;
};

const PaperRow kHjbRows[] = {
    {10, 1.0 / 3.0, 1.56006},    {10, 2.0 / 3.0, 1.85150},    {10, 1.0, 2.04629},
    {50, 1.0 / 3.0, 2.38654},    {50, 2.0 / 3.0, 2.83647},    {50, 1.0, 3.13788},
    {100, 1.0 / 3.0, 2.84696},   {100, 2.0 / 3.0, 3.38450},   {100, 1.0, 3.74471},
    {200, 1.0 / 3.0, 3.39129},   {200, 2.0 / 3.0, 4.03217},   {200, 1.0, 4.46172},
    {300, 1.0 / 3.0, 3.75530},   {300, 2.0 / 3.0, 4.46514},   {300, 1.0, 4.94105},
    {500, 1.0 / 3.0, 4.26900},   {500, 2.0 / 3.0, 5.07618},   {500, 1.0, 5.61735},
    {1000, 1.0 / 3.0, 5.07876},  {1000, 2.0 / 3.0, 6.03933},  {1000, 1.0, 6.68335},
    {5000, 1.0 / 3.0, 7.59733},  {5000, 2.0 / 3.0, 9.03466},  {5000, 1.0, 9.99835},
    {10000, 1.0 / 3.0, 9.03535}, {10000, 2.0 / 3.0, 10.74478}, {10000, 1.0, 11.89099},
};

const PaperRow kBsRows[] = {
    {10, 1.0 / 3.0, 40.7611353}, {50, 1.0 / 3.0, 37.5217732},  {100, 1.0 / 3.0, 36.4084035},
    {200, 1.0 / 3.0, 35.4127342}, {300, 1.0 / 3.0, 34.8747946}, {500, 1.0 / 3.0, 34.2357988},
    {1000, 1.0 / 3.0, 33.4358163}, {5000, 1.0 / 3.0, 31.7906594}, {10000, 1.0 / 3.0, 31.1569116},
};

const PaperRow kAllenCahnRows[] = {
    {10, 0.3, 0.89060},  {50, 0.3, 1.01830},   {100, 0.3, 1.04510},
    {200, 0.3, 1.06220}, {300, 0.3, 1.07217},  {500, 0.3, 1.08124},
    {1000, 0.3, 1.09100}, {5000, 0.3, 1.10691}, {10000, 0.3, 1.11402},
};

const PaperRow kHeatRows[] = {
    {10, 0.3, 0.47006},  {50, 0.3, 0.34425},   {100, 0.3, 0.31674},
    {200, 0.3, 0.30091}, {300, 0.3, 0.29534},  {500, 0.3, 0.29095},
    {1000, 0.3, 0.28753}, {5000, 0.3, 0.28469}, {10000, 0.3, 0.28433},
};

const PaperRow kSineGordonRows[] = {
    {10, 0.3, 0.3229470},  {50, 0.3, 0.0993633},   {100, 0.3, 0.0528368},
    {200, 0.3, 0.0272410}, {300, 0.3, 0.0183617},  {500, 0.3, 0.0111071},
    {1000, 0.3, 0.0055896}, {5000, 0.3, 0.0011231}, {10000, 0.3, 0.0005621},
};

std::optional<double> lookup(std::span<const PaperRow> rows, int dim, double horizon) {
  for (const auto& row : rows) {
    if (row.dim == dim && std::abs(row.horizon - horizon) < 1e-12) return row.value;
  }
  return std::nullopt;
}

}  // namespace

std::optional<double> paper_reference(const std::string& id, int dim, double horizon) {
  if (id == "hjb") return lookup(kHjbRows, dim, horizon);
  if (id == "bs") return lookup(kBsRows, dim, horizon);
  if (id == "allen-cahn") return lookup(kAllenCahnRows, dim, horizon);
  if (id == "heat") return lookup(kHeatRows, dim, horizon);
  if (id == "sine-gordon") return lookup(kSineGordonRows, dim, horizon);
  return std::nullopt;
}

}  // namespace deepsplit
