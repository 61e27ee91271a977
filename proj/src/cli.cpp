#include "deepsplit/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "deepsplit/harness.hpp"
#include "deepsplit/oracles.hpp"

namespace deepsplit {

namespace {

std::string default_out_dir(const ExperimentConfig& config, const std::string& label) {
  const char* env = std::getenv("DEEPSPLIT_OUT");
  if (!env || !*env) return "";
  std::ostringstream dir;
  dir << env << "/" << label << "_d" << config.dim;
  if (config.num_steps) dir << "_N" << *config.num_steps;
  dir << "_seed" << config.seed;
  return dir.str();
}

void add_experiment_options(CLI::App* cmd, ExperimentConfig& config, std::string& config_path,
                            std::string& breakpoints, double& horizon, int& num_steps,
                            int& width, int& train_steps, int& batch) {
  cmd->add_option("--config", config_path, "config file (flags override it)");
  cmd->add_option("--preset", config.preset_id,
                  "problem id: hjb, bs, bs-linear, allen-cahn, heat, sine-gordon, const");
  cmd->add_option("--d", config.dim, "space dimension");
  cmd->add_option("--T", horizon, "time horizon");
  cmd->add_option("--N", num_steps, "number of time steps");
  cmd->add_option("--M", train_steps, "optimizer iterations per time step");
  cmd->add_option("--width", width, "hidden layer width");
  cmd->add_option("--batch", batch, "mini-batch size");
  cmd->add_option("--breakpoints", breakpoints,
                  "learning-rate schedule as upper:rate pairs, e.g. 300:0.1,400:0.01,500:0.001");
  cmd->add_option("--runs", config.runs, "independent runs to aggregate");
  cmd->add_option("--seed", config.seed, "root seed");
  cmd->add_option("--out", config.out_dir, "output directory (default: $DEEPSPLIT_OUT/<auto>)");
  cmd->add_option("--reference", config.reference_mode,
                  "paper | value:<x> | oracle:radial-fd | oracle:grid-fd | oracle:hjb-mc | "
                  "oracle:bs-linear-mc");
  cmd->add_option("--oracle-samples", config.oracle_samples, "Monte Carlo oracle sample count");
  cmd->add_option("--threads", config.threads, "worker cap for concurrent runs (0 = hardware)");
  cmd->add_option("--activation", config.activation, "relu | logistic");
  cmd->add_flag("--warm-start", config.warm_start, "initialize each step from the previous one");
  cmd->add_flag("--pair-only", config.pair_only,
                "simulate only the consumed path pair (bit-identical results, less work)");
}

void apply_experiment_options(ExperimentConfig& config, const std::string& config_path,
                              const std::string& breakpoints, double horizon, int num_steps,
                              int width, int train_steps, int batch, const CLI::App* cmd) {
  if (!config_path.empty()) {
    ExperimentConfig from_file = load_config(config_path);
    // flags override the file: copy file values for anything not given
    ExperimentConfig merged = from_file;
    if (cmd->count("--preset")) merged.preset_id = config.preset_id;
    if (cmd->count("--d")) merged.dim = config.dim;
    if (cmd->count("--runs")) merged.runs = config.runs;
    if (cmd->count("--seed")) merged.seed = config.seed;
    if (cmd->count("--out")) merged.out_dir = config.out_dir;
    if (cmd->count("--reference")) merged.reference_mode = config.reference_mode;
    if (cmd->count("--oracle-samples")) merged.oracle_samples = config.oracle_samples;
    if (cmd->count("--threads")) merged.threads = config.threads;
    if (cmd->count("--activation")) merged.activation = config.activation;
    if (cmd->count("--warm-start")) merged.warm_start = config.warm_start;
    if (cmd->count("--pair-only")) merged.pair_only = config.pair_only;
    config = merged;
  }
  if (cmd->count("--T")) config.horizon = horizon;
  if (cmd->count("--N")) config.num_steps = num_steps;
  if (cmd->count("--width")) config.hidden_width = width;
  if (cmd->count("--M")) config.train_steps = train_steps;
  if (cmd->count("--batch")) config.batch_size = batch;
  if (!breakpoints.empty()) {
    std::vector<std::pair<int, double>> bps;
    std::istringstream ss(breakpoints);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      const auto colon = tok.find(':');
      if (colon == std::string::npos)
        throw std::invalid_argument("breakpoints must be upper:rate pairs");
      bps.emplace_back(std::stoi(tok.substr(0, colon)), std::stod(tok.substr(colon + 1)));
    }
    config.breakpoints = bps;
  }
}

int run_solve(ExperimentConfig config) {
  if (config.out_dir.empty()) config.out_dir = default_out_dir(config, config.preset_id);
  const ResultRow row = run_experiment(config);
  std::cout << emit_report({&row, 1}, ReportFormat::csv);
  if (!config.out_dir.empty())
    std::cerr << "results written to " << config.out_dir << "\n";
  return row.runs_completed == config.runs ? 0 : 2;
}

int run_reference(const std::string& oracle, const std::string& preset_id, int dim,
                  double horizon_flag, long samples, std::uint64_t seed, double r_max, int cells,
                  int steps, bool check_boundary, double box_halfwidth) {
  auto preset = preset_by_id(preset_id, dim,
                             horizon_flag > 0 ? std::optional<double>(horizon_flag) : std::nullopt,
                             std::nullopt);
  double value = 0.0;
  double std_error = 0.0;
  std::ostringstream settings;
  if (oracle == "radial-fd") {
    if (!preset.radial)
      throw std::invalid_argument("preset " + preset_id + " has no radial reduction");
    RadialFdSettings s;
    if (r_max > 0) s.r_max = r_max;
    if (cells > 0) s.space_cells = cells;
    if (steps > 0) s.time_steps = steps;
    s.check_boundary = check_boundary;
    value = radial_fd_reference(*preset.radial, dim, preset.horizon, s);
    settings << "cells=" << s.space_cells << " time_steps=" << s.time_steps;
  } else if (oracle == "grid-fd") {
    GridFdSettings s;
    const double half = box_halfwidth > 0 ? box_halfwidth : 10.0;
    s.box_lo.assign(static_cast<std::size_t>(dim), -half);
    s.box_hi.assign(static_cast<std::size_t>(dim), half);
    if (cells > 0) s.cells_per_dim = cells;
    if (steps > 0) s.time_steps = steps;
    value = grid_fd_reference(preset.problem, preset.horizon, s, preset.start_point);
    settings << "cells=" << s.cells_per_dim << " time_steps=" << s.time_steps
             << " box=" << half;
  } else if (oracle == "hjb-mc") {
    auto est = hjb_reference(dim, preset.horizon, preset.start_point, samples,
                             rng::Stream{seed}.child(rng::Purpose::oracle));
    value = est.value;
    std_error = est.std_error;
    settings << "samples=" << samples << " seed=" << seed;
  } else if (oracle == "bs-linear-mc") {
    auto est = linearized_bs_reference(dim, preset.horizon, preset.start_point, samples,
                                       rng::Stream{seed}.child(rng::Purpose::oracle));
    value = est.value;
    std_error = est.std_error;
    settings << "samples=" << samples << " seed=" << seed;
  } else {
    throw std::invalid_argument("unknown oracle " + oracle);
  }
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g,%.17g", value, std_error);
  std::cout << "oracle,preset,d,T,value,std_error,settings\n";
  std::cout << oracle << "," << preset_id << "," << dim << "," << preset.horizon << "," << buf
            << "," << settings.str() << "\n";
  return 0;
}

int run_report(const std::vector<std::string>& inputs, const std::string& format,
               const std::string& out_path) {
  std::vector<ResultRow> rows;
  for (const auto& path : inputs) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("report: cannot open " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    auto parsed = parse_report_csv(buffer.str());
    rows.insert(rows.end(), parsed.begin(), parsed.end());
  }
  if (rows.empty()) throw std::invalid_argument("report: no rows found");
  std::stable_sort(rows.begin(), rows.end(), [](const ResultRow& a, const ResultRow& b) {
    if (a.dim != b.dim) return a.dim < b.dim;
    if (a.horizon != b.horizon) return a.horizon < b.horizon;
    return a.num_steps < b.num_steps;
  });
  const std::string doc =
      emit_report(rows, format == "markdown" ? ReportFormat::markdown : ReportFormat::csv);
  if (out_path.empty()) {
    std::cout << doc;
  } else {
    std::ofstream out(out_path);
    out << doc;
    if (!out) throw std::runtime_error("report: cannot write " + out_path);
  }
  return 0;
}

int run_nstudy(int dim, const std::string& n_list, int runs, std::uint64_t seed,
               const std::string& out_dir, int threads, bool pair_only,
               const std::string& format) {
  std::vector<int> ns;
  std::istringstream ss(n_list);
  std::string tok;
  while (std::getline(ss, tok, ',')) ns.push_back(std::stoi(tok));
  if (ns.empty()) throw std::invalid_argument("nstudy: empty N list");
  std::sort(ns.begin(), ns.end());

  std::vector<ResultRow> rows;
  for (int n : ns) {
    ExperimentConfig config;
    config.preset_id = "heat";
    config.dim = dim;
    config.num_steps = n;
    config.runs = runs;
    config.seed = seed;
    config.threads = threads;
    config.pair_only = pair_only;
    config.write_snapshots = false;
    if (!out_dir.empty()) config.out_dir = out_dir + "/N" + std::to_string(n);
    std::cerr << "nstudy: N=" << n << "...\n";
    rows.push_back(run_experiment(config));
  }
  const std::string doc =
      emit_report(rows, format == "markdown" ? ReportFormat::markdown : ReportFormat::csv);
  std::cout << doc;
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    std::ofstream out(std::filesystem::path(out_dir) / "nstudy.csv");
    out << emit_report(rows, ReportFormat::csv);
  }
  return 0;
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
  CLI::App app{"deep splitting solver for semilinear parabolic PDEs"};
  app.require_subcommand(1);

  // solve
  ExperimentConfig config;
  config.runs = 10;
  std::string config_path, breakpoints;
  double horizon = 0.0;
  int num_steps = 0, width = 0, train_steps = 0, batch = 0;
  CLI::App* solve_cmd = app.add_subcommand("solve", "train the splitting recursion and report");
  add_experiment_options(solve_cmd, config, config_path, breakpoints, horizon, num_steps, width,
                         train_steps, batch);
  bool no_snapshots = false;
  solve_cmd->add_flag("--no-snapshots", no_snapshots, "skip writing parameter snapshots");

  // reference
  std::string oracle = "radial-fd", ref_preset = "heat";
  int ref_dim = 100;
  double ref_T = 0.0;
  long samples = 10000000;
  std::uint64_t ref_seed = 1;
  double r_max = 0.0, box_halfwidth = 0.0;
  int cells = 0, steps = 0;
  bool check_boundary = false;
  CLI::App* ref_cmd = app.add_subcommand("reference", "run an independent reference oracle");
  ref_cmd->add_option("--oracle", oracle, "radial-fd | grid-fd | hjb-mc | bs-linear-mc")
      ->required();
  ref_cmd->add_option("--preset", ref_preset, "problem id");
  ref_cmd->add_option("--d", ref_dim, "space dimension");
  ref_cmd->add_option("--T", ref_T, "time horizon override");
  ref_cmd->add_option("--K", samples, "Monte Carlo samples");
  ref_cmd->add_option("--seed", ref_seed, "oracle seed");
  ref_cmd->add_option("--r-max", r_max, "radial domain size");
  ref_cmd->add_option("--cells", cells, "spatial cells");
  ref_cmd->add_option("--steps", steps, "time steps");
  ref_cmd->add_option("--box", box_halfwidth, "grid-fd box half width");
  ref_cmd->add_flag("--check-boundary", check_boundary,
                    "verify the answer is insensitive to doubling the domain");

  // report
  std::vector<std::string> report_inputs;
  std::string report_format = "csv", report_out;
  CLI::App* report_cmd = app.add_subcommand("report", "aggregate result rows into a table");
  report_cmd->add_option("inputs", report_inputs, "row.csv files")->required();
  report_cmd->add_option("--format", report_format, "csv | markdown");
  report_cmd->add_option("--out", report_out, "output file (default stdout)");

  // nstudy
  int nstudy_dim = 100, nstudy_runs = 5, nstudy_threads = 0;
  std::string nstudy_list = "1,2,4,8,16", nstudy_out, nstudy_format = "csv";
  std::uint64_t nstudy_seed = 1;
  bool nstudy_pair_only = false;
  CLI::App* nstudy_cmd =
      app.add_subcommand("nstudy", "time-step refinement study on the heat benchmark");
  nstudy_cmd->add_option("--d", nstudy_dim, "space dimension");
  nstudy_cmd->add_option("--N-list", nstudy_list, "comma-separated N values");
  nstudy_cmd->add_option("--runs", nstudy_runs, "runs per N");
  nstudy_cmd->add_option("--seed", nstudy_seed, "root seed");
  nstudy_cmd->add_option("--out", nstudy_out, "output directory");
  nstudy_cmd->add_option("--threads", nstudy_threads, "worker cap");
  nstudy_cmd->add_option("--format", nstudy_format, "csv | markdown");
  nstudy_cmd->add_flag("--pair-only", nstudy_pair_only, "simulate only the consumed path pair");

  // check
  CLI::App* check_cmd = app.add_subcommand("check", "run the quick property-check tier");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {  // --help
      std::cout << app.help();
      return 0;
    }
    std::cerr << e.what() << "\n" << app.help();
    return 1;
  }

  try {
    if (*solve_cmd) {
      apply_experiment_options(config, config_path, breakpoints, horizon, num_steps, width,
                               train_steps, batch, solve_cmd);
      if (no_snapshots) config.write_snapshots = false;
      return run_solve(config);
    }
    if (*ref_cmd) {
      return run_reference(oracle, ref_preset, ref_dim, ref_T, samples, ref_seed, r_max, cells,
                           steps, check_boundary, box_halfwidth);
    }
    if (*report_cmd) {
      return run_report(report_inputs, report_format, report_out);
    }
    if (*nstudy_cmd) {
      return run_nstudy(nstudy_dim, nstudy_list, nstudy_runs, nstudy_seed, nstudy_out,
                        nstudy_threads, nstudy_pair_only, nstudy_format);
    }
    if (*check_cmd) {
      return self_check(std::cout) == 0 ? 0 : 2;
    }
  } catch (const std::invalid_argument& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 2;
  }
  return 0;
}

}  // namespace deepsplit
