#include "deepsplit/harness.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "deepsplit/oracles.hpp"
#include "deepsplit/reduce.hpp"
#include "deepsplit/snapshot_io.hpp"

namespace deepsplit {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt_short(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (runs < 1) throw std::invalid_argument("config: runs must be >= 1");
  if (dim < 1) throw std::invalid_argument("config: dimension must be >= 1");
  if (threads < 0) throw std::invalid_argument("config: threads must be >= 0");
  if (oracle_samples < 1000) throw std::invalid_argument("config: oracle_samples too small");
  if (activation && *activation != "relu" && *activation != "logistic")
    throw std::invalid_argument("config: unknown activation " + *activation);
}

BenchmarkPreset resolve_preset(const ExperimentConfig& config) {
  config.validate();
  BenchmarkPreset preset = preset_by_id(config.preset_id, config.dim, config.horizon,
                                        config.num_steps);
  if (config.hidden_width) preset.hidden_width = *config.hidden_width;
  if (config.train_steps || config.breakpoints) {
    const int steps = config.train_steps.value_or(preset.schedule.steps);
    std::vector<std::pair<int, double>> bps;
    if (config.breakpoints) {
      bps = *config.breakpoints;
    } else {
      // keep the preset's relative break positions under a new M
      bps = {{(steps * 3) / 5, 1e-1}, {(steps * 4) / 5, 1e-2}, {steps, 1e-3}};
    }
    const int batch = config.batch_size.value_or(
        preset.schedule.batch_sizes.empty() ? 256 : preset.schedule.batch_sizes.front());
    preset.schedule = TrainingSchedule::piecewise(steps, bps, batch);
  } else if (config.batch_size) {
    for (auto& j : preset.schedule.batch_sizes) j = *config.batch_size;
  }
  if (config.activation) {
    // stored on the architecture at solve time
  }
  preset.schedule.init_policy = config.warm_start
                                    ? TrainingSchedule::InitPolicy::warm_start_from_previous
                                    : TrainingSchedule::InitPolicy::fresh_xavier;
  preset.schedule.simulate_consumed_pair_only = config.pair_only;
  return preset;
}

double resolve_reference(const ExperimentConfig& config, const BenchmarkPreset& preset) {
  const std::string& mode = config.reference_mode;
  if (mode == "paper") {
    if (!preset.reference_value)
      throw std::invalid_argument("config: no published reference for this preset row; "
                                  "use reference=oracle:... or value:<x>");
    return *preset.reference_value;
  }
  if (mode.rfind("value:", 0) == 0) return std::stod(mode.substr(6));
  if (mode == "oracle:radial-fd") {
    if (!preset.radial)
      throw std::invalid_argument("config: preset has no radial reduction");
    return radial_fd_reference(*preset.radial, preset.problem.dim, preset.horizon);
  }
  if (mode == "oracle:grid-fd") {
    if (preset.problem.dim > 2)
      throw std::invalid_argument("config: grid-fd oracle needs d <= 2");
    GridFdSettings s;
    const double half = std::max(10.0, 4.0 * std::sqrt(2.0 * preset.horizon));
    s.box_lo.assign(static_cast<std::size_t>(preset.problem.dim), -half);
    s.box_hi.assign(static_cast<std::size_t>(preset.problem.dim), half);
    s.cells_per_dim = preset.problem.dim == 1 ? 2000 : 300;
    s.time_steps = 2000;
    return grid_fd_reference(preset.problem, preset.horizon, s, preset.start_point);
  }
  if (mode == "oracle:hjb-mc") {
    return hjb_reference(preset.problem.dim, preset.horizon, preset.start_point,
                         config.oracle_samples, rng::Stream{config.seed}.child(rng::Purpose::oracle))
        .value;
  }
  if (mode == "oracle:bs-linear-mc") {
    return linearized_bs_reference(preset.problem.dim, preset.horizon, preset.start_point,
                                   config.oracle_samples,
                                   rng::Stream{config.seed}.child(rng::Purpose::oracle))
        .value;
  }
  throw std::invalid_argument("config: unknown reference mode " + mode);
}

namespace {

struct RunOutput {
  double value = 0.0;
  double runtime_s = 0.0;
  SolverResult result;
  bool ok = false;
  std::string error;
};

void persist_run(const std::string& out_dir, int run_index, const RunOutput& run) {
  namespace fs = std::filesystem;
  const fs::path dir = fs::path(out_dir) / ("run_" + std::to_string(run_index));
  fs::create_directories(dir);
  const auto& result = run.result;
  for (int n = 1; n <= result.grid.count; ++n) {
    char name[32];
    std::snprintf(name, sizeof(name), "snapshot_n%02d.dsnap", n);
    save_snapshot((dir / name).string(), result.snapshot(n));
  }
  for (int n = 1; n <= result.grid.count; ++n) {
    char name[32];
    std::snprintf(name, sizeof(name), "loss_n%02d.csv", n);
    std::ofstream trace(dir / name);
    trace << "step,loss\n";
    const auto& losses = result.loss_traces[static_cast<std::size_t>(n) - 1];
    for (std::size_t m = 0; m < losses.size(); ++m)
      trace << m << "," << fmt(losses[m]) << "\n";
  }
}

}  // namespace

ResultRow run_experiment(const ExperimentConfig& config) {
  const BenchmarkPreset preset = resolve_preset(config);
  const double reference = resolve_reference(config, preset);
  const TimeGrid grid = preset.grid();
  NetworkArchitecture arch = preset.architecture();
  if (config.activation)
    arch.activation = *config.activation == "relu" ? Activation::relu : Activation::logistic;

  Eigen::MatrixXd x0(1, preset.problem.dim);
  for (int c = 0; c < preset.problem.dim; ++c)
    x0(0, c) = preset.start_point[static_cast<std::size_t>(c)];

  std::vector<RunOutput> runs(static_cast<std::size_t>(config.runs));
  auto do_run = [&](int r) {
    auto& out = runs[static_cast<std::size_t>(r)];
    const auto start = std::chrono::steady_clock::now();
    try {
      const rng::Stream run_stream =
          rng::Stream{config.seed}.child(rng::Purpose::run, static_cast<std::uint64_t>(r));
      out.result = solve(preset.problem, grid, arch, preset.schedule, run_stream);
      out.value = evaluate(out.result, grid.count, x0)(0);
      out.ok = true;
    } catch (const std::exception& err) {
      out.ok = false;
      out.error = err.what();
    }
    out.runtime_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };

  int workers = config.threads > 0 ? config.threads
                                   : static_cast<int>(std::thread::hardware_concurrency());
  workers = std::max(1, std::min(workers, config.runs));
  if (workers == 1) {
    for (int r = 0; r < config.runs; ++r) do_run(r);
  } else {
    std::vector<std::thread> pool;
    std::atomic<int> next{0};
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (int r = next.fetch_add(1); r < config.runs; r = next.fetch_add(1)) do_run(r);
      });
    }
    for (auto& t : pool) t.join();
  }

  std::vector<double> values, rel_errors, runtimes;
  for (const auto& run : runs) {
    if (!run.ok) continue;
    values.push_back(run.value);
    rel_errors.push_back(std::abs(run.value - reference) / std::abs(reference));
    runtimes.push_back(run.runtime_s);
  }
  if (values.empty()) {
    std::string detail = runs.front().error;
    throw std::runtime_error("run_experiment: every run failed; first error: " + detail);
  }

  ResultRow row;
  row.dim = preset.problem.dim;
  row.horizon = preset.horizon;
  row.num_steps = preset.num_steps;
  row.expectation = pairwise_mean(values);
  row.std_dev = uncorrected_std(values);
  row.reference = reference;
  row.rel_l1_error = pairwise_mean(rel_errors);
  row.std_rel_error = uncorrected_std(rel_errors);
  row.avg_runtime_s = pairwise_mean(runtimes);
  row.runs_completed = static_cast<int>(values.size());

  if (!config.out_dir.empty()) {
    std::filesystem::create_directories(config.out_dir);
    std::ofstream rowfile(std::filesystem::path(config.out_dir) / "row.csv");
    rowfile << emit_report({&row, 1}, ReportFormat::csv);
    if (config.write_snapshots) {
      for (int r = 0; r < config.runs; ++r) {
        if (runs[static_cast<std::size_t>(r)].ok)
          persist_run(config.out_dir, r, runs[static_cast<std::size_t>(r)]);
      }
    }
  }
  return row;
}

namespace {
constexpr const char* kCsvHeader =
    "d,T,N,expectation,std_dev,reference,rel_l1_error,std_rel_error,avg_runtime_s,runs";
}

std::string emit_report(std::span<const ResultRow> rows, ReportFormat format) {
  if (rows.empty()) throw std::invalid_argument("emit_report: no rows");
  std::ostringstream out;
  if (format == ReportFormat::csv) {
    out << kCsvHeader << "\n";
    for (const auto& r : rows) {
      out << r.dim << "," << fmt(r.horizon) << "," << r.num_steps << "," << fmt(r.expectation)
          << "," << fmt(r.std_dev) << "," << fmt(r.reference) << "," << fmt(r.rel_l1_error) << ","
          << fmt(r.std_rel_error) << "," << fmt(r.avg_runtime_s) << "," << r.runs_completed
          << "\n";
    }
    return out.str();
  }
  out << "| d | T | N | Expectation | Std. dev. | Ref. value | rel. L1 error | Std. dev. rel. "
         "error | avg. runtime (s) |\n";
  out << "|---|---|---|---|---|---|---|---|---|\n";
  for (const auto& r : rows) {
    out << "| " << r.dim << " | " << fmt_short(r.horizon) << " | " << r.num_steps << " | "
        << fmt_short(r.expectation) << " | " << fmt_short(r.std_dev) << " | "
        << fmt_short(r.reference) << " | " << fmt_short(r.rel_l1_error) << " | "
        << fmt_short(r.std_rel_error) << " | " << fmt_short(r.avg_runtime_s) << " |\n";
  }
  return out.str();
}

std::vector<ResultRow> parse_report_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader)
    throw std::invalid_argument("report: unexpected CSV header");
  std::vector<ResultRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string tok;
    std::vector<std::string> cols;
    while (std::getline(ls, tok, ',')) cols.push_back(tok);
    if (cols.size() != 10) throw std::invalid_argument("report: malformed CSV row");
    ResultRow r;
    r.dim = std::stoi(cols[0]);
    r.horizon = std::stod(cols[1]);
    r.num_steps = std::stoi(cols[2]);
    r.expectation = std::stod(cols[3]);
    r.std_dev = std::stod(cols[4]);
    r.reference = std::stod(cols[5]);
    r.rel_l1_error = std::stod(cols[6]);
    r.std_rel_error = std::stod(cols[7]);
    r.avg_runtime_s = std::stod(cols[8]);
    r.runs_completed = std::stoi(cols[9]);
    rows.push_back(r);
  }
  return rows;
}

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw std::invalid_argument("config: bad boolean value " + v);
}

std::vector<std::pair<int, double>> parse_breakpoints(const std::string& v) {
  std::vector<std::pair<int, double>> out;
  std::istringstream ss(v);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    tok = trim(tok);
    if (tok.empty()) continue;
    const auto colon = tok.find(':');
    if (colon == std::string::npos)
      throw std::invalid_argument("config: breakpoints must be upper:rate pairs");
    out.emplace_back(std::stoi(tok.substr(0, colon)), std::stod(tok.substr(colon + 1)));
  }
  if (out.empty()) throw std::invalid_argument("config: empty breakpoint list");
  return out;
}

}  // namespace

ExperimentConfig parse_config(std::istream& in) {
  ExperimentConfig config;
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[' && line.back() == ']') {
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config: expected key = value at line " +
                                  std::to_string(lineno));
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const std::string scoped = section.empty() ? key : section + "." + key;

    if (scoped == "experiment.preset") {
      config.preset_id = value;
    } else if (scoped == "experiment.d") {
      config.dim = std::stoi(value);
    } else if (scoped == "experiment.runs") {
      config.runs = std::stoi(value);
    } else if (scoped == "experiment.seed") {
      config.seed = std::stoull(value);
    } else if (scoped == "experiment.out") {
      config.out_dir = value;
    } else if (scoped == "experiment.reference") {
      config.reference_mode = value;
    } else if (scoped == "grid.T") {
      config.horizon = std::stod(value);
    } else if (scoped == "grid.N") {
      config.num_steps = std::stoi(value);
    } else if (scoped == "network.width") {
      config.hidden_width = std::stoi(value);
    } else if (scoped == "network.activation") {
      config.activation = value;
    } else if (scoped == "schedule.M") {
      config.train_steps = std::stoi(value);
    } else if (scoped == "schedule.breakpoints") {
      config.breakpoints = parse_breakpoints(value);
    } else if (scoped == "schedule.batch") {
      config.batch_size = std::stoi(value);
    } else if (scoped == "schedule.warm_start") {
      config.warm_start = parse_bool(value);
    } else if (scoped == "schedule.pair_only") {
      config.pair_only = parse_bool(value);
    } else if (scoped == "run.threads") {
      config.threads = std::stoi(value);
    } else if (scoped == "run.oracle_samples") {
      config.oracle_samples = std::stol(value);
    } else if (scoped == "run.write_snapshots") {
      config.write_snapshots = parse_bool(value);
    } else {
      throw std::invalid_argument("config: unknown key " + scoped);
    }
  }
  return config;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config: cannot open " + path);
  return parse_config(in);
}

int self_check(std::ostream& out) {
  int failures = 0;
  auto report = [&](const char* name, bool ok) {
    out << "check " << name << ": " << (ok ? "ok" : "FAIL") << "\n";
    if (!ok) ++failures;
  };

  // counter-based generator known answers
  {
    const auto v = rng::philox4x32({0, 0, 0, 0}, 0);
    report("philox-known-answer", v[0] == 0x6627e8d5u && v[1] == 0xe169c58du &&
                                      v[2] == 0xbc57ac4cu && v[3] == 0x9b00dbd8u);
  }

  // reversed-grid identity, bit-exact
  {
    const TimeGrid grid = make_grid(1.0 / 3.0, 8);
    bool ok = true;
    for (int n = 0; n <= grid.count; ++n) {
      ok = ok && grid.reversed_times[static_cast<std::size_t>(n)] ==
                     grid.horizon - grid.forward_times[static_cast<std::size_t>(grid.count - n)];
    }
    report("reversed-grid-identity", ok);
  }

  // gradient vs finite differences, kink-free points
  {
    auto arch = NetworkArchitecture::standard(6, 8);
    ParameterVector p = init_params(arch, rng::Stream{5});
    BatchNormState bn = BatchNormState::fresh(arch);
    rng::SequenceGen gen(rng::Stream{6});
    Eigen::MatrixXd x(8, 6);
    for (Eigen::Index r = 0; r < x.rows(); ++r)
      for (Eigen::Index c = 0; c < x.cols(); ++c) x(r, c) = gen.next_normal();
    Eigen::VectorXd upstream(8);
    for (int j = 0; j < 8; ++j) upstream(j) = gen.next_normal();
    ForwardResult fr = forward(p, bn, x, ForwardMode::train, false);
    ParameterVector g = grad_params(p, fr.cache, upstream);
    bool ok = true;
    for (int trial = 0; trial < 25 && ok; ++trial) {
      const Eigen::Index i = static_cast<Eigen::Index>(
          gen.next_uniform() * static_cast<double>(p.values().size()));
      const double h = 1e-6 * std::max(1.0, std::abs(p.values()(i)));
      ParameterVector pp = p, pm = p;
      pp.mutable_values()(i) += h;
      pm.mutable_values()(i) -= h;
      const double fp =
          upstream.dot(forward(pp, bn, x, ForwardMode::train, false).values);
      const double fm =
          upstream.dot(forward(pm, bn, x, ForwardMode::train, false).values);
      const double fd = (fp - fm) / (2.0 * h);
      const double an = g.values()(i);
      ok = std::abs(fd) > 1e-6 ? std::abs(an - fd) <= 1e-5 * std::abs(fd)
                               : std::abs(an - fd) <= 1e-7;
    }
    report("gradient-finite-difference", ok);
  }

  // adam first-step identity
  {
    auto arch = NetworkArchitecture::without_bn(2, 2);
    ParameterVector theta(std::make_shared<const ParameterLayout>(arch));
    ParameterVector grad = theta;
    grad.mutable_values().setConstant(-3.0);
    auto [state, next] = adam_step(AdamState::fresh(theta.values().size()), theta, grad, 0.1,
                                   AdamParams{0.9, 0.999, 1e-8});
    const double expect = 0.1 * 3.0 / (3.0 + 1e-8);
    report("adam-first-step", std::abs(next.values()(0) - expect) < 1e-12);
  }

  // batch-norm train-mode invariants
  {
    auto arch = NetworkArchitecture::standard(4, 6);
    ParameterVector p = init_params(arch, rng::Stream{7});
    BatchNormState bn = BatchNormState::fresh(arch);
    rng::SequenceGen gen(rng::Stream{8});
    Eigen::MatrixXd x(32, 4);
    for (Eigen::Index r = 0; r < x.rows(); ++r)
      for (Eigen::Index c = 0; c < x.cols(); ++c) x(r, c) = 3.0 * gen.next_normal();
    ForwardResult fr = forward(p, bn, x, ForwardMode::train, false);
    bool ok = true;
    const auto& xhat = fr.cache.bn_xhat[0];
    for (Eigen::Index c = 0; c < xhat.cols(); ++c) {
      const double mean = xhat.col(c).mean();
      const double var = xhat.col(c).array().square().mean() - mean * mean;
      ok = ok && std::abs(mean) <= 1e-12 && std::abs(var - 1.0) <= 1e-10;
    }
    report("batch-norm-invariants", ok);
  }

  // determinism of solve under a fixed seed
  {
    auto preset = preset_constant(2);
    preset.schedule = TrainingSchedule::piecewise(10, {{10, 1e-1}});
    SolverResult a = solve(preset.problem, preset.grid(), preset.architecture(), preset.schedule,
                           rng::Stream{1234});
    SolverResult b = solve(preset.problem, preset.grid(), preset.architecture(), preset.schedule,
                           rng::Stream{1234});
    bool ok = true;
    for (std::size_t n = 0; n < a.snapshots.size(); ++n) {
      ok = ok && snapshot_bytes(a.snapshots[n]) == snapshot_bytes(b.snapshots[n]);
    }
    report("solve-determinism", ok);
  }

  // snapshot persistence round trip
  {
    auto arch = NetworkArchitecture::standard(3, 5);
    Snapshot snap{init_params(arch, rng::Stream{9}), BatchNormState::fresh(arch)};
    snap.bn.mean.setRandom();
    snap.bn.var = snap.bn.var.array() + 0.5;
    snap.bn.step_count = 17;
    std::stringstream buffer(std::ios::in | std::ios::out | std::ios::binary);
    write_snapshot(buffer, snap);
    Snapshot loaded = read_snapshot(buffer);
    report("snapshot-round-trip", snapshot_bytes(snap) == snapshot_bytes(loaded) &&
                                      loaded.params.values() == snap.params.values());
  }

  // radial vs grid oracle agreement at d=1
  {
    auto preset = preset_semilinear_heat(1);
    RadialFdSettings rs;
    rs.space_cells = 800;
    rs.time_steps = 800;
    const double vr = radial_fd_reference(*preset.radial, 1, preset.horizon, rs);
    GridFdSettings gs;
    gs.box_lo = {-10.0};
    gs.box_hi = {10.0};
    gs.cells_per_dim = 800;
    gs.time_steps = 800;
    const double vg =
        grid_fd_reference(preset.problem, preset.horizon, gs, std::vector<double>{0.0});
    report("radial-grid-oracle-agreement", std::abs(vr - vg) <= 1e-3);
  }

  return failures;
}

}  // namespace deepsplit
