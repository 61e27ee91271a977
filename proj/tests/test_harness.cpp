#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "deepsplit/cli.hpp"
#include "deepsplit/harness.hpp"
#include "deepsplit/reduce.hpp"
#include "deepsplit/snapshot_io.hpp"

using namespace deepsplit;
namespace fs = std::filesystem;

namespace {

ExperimentConfig tiny_config() {
  ExperimentConfig config;
  config.preset_id = "const";
  config.dim = 2;
  config.runs = 2;
  config.seed = 11;
  config.train_steps = 120;
  config.breakpoints = {{{80, 1e-1}, {120, 1e-2}}};
  config.pair_only = true;
  config.threads = 1;
  return config;
}

fs::path fresh_dir(const char* name) {
  fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("config file parsing covers every section") {
  std::istringstream in(R"(# comment
[experiment]
preset = sine-gordon
d = 10
runs = 3
seed = 99
reference = oracle:radial-fd
out = /tmp/somewhere

[grid]
T = 0.3
N = 20

[network]
width = 60
activation = relu

[schedule]
M = 1000
breakpoints = 250:0.1, 500:0.01, 750:0.001, 1000:0.0001
batch = 256
warm_start = false
pair_only = true

[run]
threads = 2
oracle_samples = 50000
)");
  ExperimentConfig config = parse_config(in);
  CHECK(config.preset_id == "sine-gordon");
  CHECK(config.dim == 10);
  CHECK(config.runs == 3);
  CHECK(config.seed == 99);
  CHECK(config.reference_mode == "oracle:radial-fd");
  CHECK(config.out_dir == "/tmp/somewhere");
  CHECK(config.horizon == 0.3);
  CHECK(config.num_steps == 20);
  CHECK(config.hidden_width == 60);
  CHECK(config.train_steps == 1000);
  REQUIRE(config.breakpoints.has_value());
  CHECK(config.breakpoints->size() == 4);
  CHECK((*config.breakpoints)[3].second == 1e-4);
  CHECK(config.pair_only == true);
  CHECK(config.threads == 2);
  CHECK(config.oracle_samples == 50000);

  std::istringstream bad("[experiment]\nnonsense = 1\n");
  CHECK_THROWS_AS(parse_config(bad), std::invalid_argument);
}

TEST_CASE("resolve_preset applies overrides") {
  ExperimentConfig config = tiny_config();
  config.preset_id = "heat";
  config.dim = 7;
  config.hidden_width = 33;
  config.num_steps = 5;
  BenchmarkPreset preset = resolve_preset(config);
  CHECK(preset.problem.dim == 7);
  CHECK(preset.hidden_width == 33);
  CHECK(preset.num_steps == 5);
  CHECK(preset.schedule.steps == 120);
  CHECK(preset.schedule.learning_rates.front() == 1e-1);
  CHECK(preset.schedule.learning_rates.back() == 1e-2);
  CHECK(preset.schedule.simulate_consumed_pair_only);
}

TEST_CASE("run_experiment aggregates deterministically") {
  ExperimentConfig config = tiny_config();
  const ResultRow a = run_experiment(config);
  const ResultRow b = run_experiment(config);

  CHECK(a.runs_completed == 2);
  CHECK(a.reference == 1.0);
  CHECK(a.rel_l1_error < 0.02);
  CHECK(a.expectation == b.expectation);
  CHECK(a.std_dev == b.std_dev);
  CHECK(a.rel_l1_error == b.rel_l1_error);
  CHECK(a.std_rel_error == b.std_rel_error);
}

TEST_CASE("runs use disjoint derived streams, independent of execution order") {
  ExperimentConfig config = tiny_config();
  config.runs = 3;
  const ResultRow row = run_experiment(config);

  // reproduce each run independently and in reverse order
  BenchmarkPreset preset = resolve_preset(config);
  Eigen::MatrixXd x0 = Eigen::MatrixXd::Zero(1, 2);
  std::vector<double> values(3);
  for (int r = 2; r >= 0; --r) {
    const rng::Stream run_stream =
        rng::Stream{config.seed}.child(rng::Purpose::run, static_cast<std::uint64_t>(r));
    SolverResult result = solve(preset.problem, preset.grid(), preset.architecture(),
                                preset.schedule, run_stream);
    values[static_cast<std::size_t>(r)] = evaluate(result, preset.num_steps, x0)(0);
  }
  CHECK(row.expectation == pairwise_mean(values));
}

TEST_CASE("experiment outputs round-trip through the filesystem") {
  const fs::path dir = fresh_dir("deepsplit_harness_out");
  ExperimentConfig config = tiny_config();
  config.out_dir = dir.string();
  const ResultRow row = run_experiment(config);

  // row.csv parses back to the identical row
  std::ifstream rowfile(dir / "row.csv");
  std::stringstream buffer;
  buffer << rowfile.rdbuf();
  const auto rows = parse_report_csv(buffer.str());
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].expectation == row.expectation);
  CHECK(rows[0].std_dev == row.std_dev);
  CHECK(rows[0].reference == row.reference);

  // snapshot loads evaluate bit-identically to the in-memory result
  BenchmarkPreset preset = resolve_preset(config);
  const rng::Stream run_stream = rng::Stream{config.seed}.child(rng::Purpose::run, 0);
  SolverResult result = solve(preset.problem, preset.grid(), preset.architecture(),
                              preset.schedule, run_stream);
  char name[32];
  std::snprintf(name, sizeof(name), "snapshot_n%02d.dsnap", preset.num_steps);
  Snapshot loaded = load_snapshot((dir / "run_0" / name).string());
  Eigen::MatrixXd x(3, 2);
  x << 0.0, 0.0, 0.5, -0.5, 1.0, 2.0;
  const Snapshot& mem = result.snapshot(preset.num_steps);
  CHECK(infer_values(loaded.params, loaded.bn, x) == infer_values(mem.params, mem.bn, x));
  CHECK(snapshot_bytes(loaded) == snapshot_bytes(mem));

  // loss traces carry one row per optimizer step
  std::ifstream trace(dir / "run_0" / "loss_n01.csv");
  std::string line;
  int lines = 0;
  while (std::getline(trace, line)) ++lines;
  CHECK(lines == 1 + 120);
}

TEST_CASE("report emission is idempotent byte-for-byte") {
  std::vector<ResultRow> rows(2);
  rows[0] = {10, 1.0 / 3.0, 8, 1.56645, 0.00246699, 1.56006, 0.0041, 0.00158134, 18.0, 10};
  rows[1] = {100, 0.3, 20, 0.31783, 8.298e-05, 0.31674, 0.00343, 0.00026198, 47.4, 10};

  const std::string csv = emit_report(rows, ReportFormat::csv);
  const auto parsed = parse_report_csv(csv);
  const std::string again = emit_report(parsed, ReportFormat::csv);
  CHECK(csv == again);

  const std::string md = emit_report(rows, ReportFormat::markdown);
  CHECK(md.find("| d | T | N |") == 0);
  int lines = static_cast<int>(std::count(md.begin(), md.end(), '\n'));
  CHECK(lines == 2 + 2);  // header + separator + one line per row

  CHECK_THROWS_AS(emit_report({}, ReportFormat::csv), std::invalid_argument);
}

TEST_CASE("config validation rejects bad values") {
  ExperimentConfig config = tiny_config();
  config.runs = 0;
  CHECK_THROWS_AS(config.validate(), std::invalid_argument);
  config = tiny_config();
  config.activation = "tanh";
  CHECK_THROWS_AS(config.validate(), std::invalid_argument);
  config = tiny_config();
  config.reference_mode = "oracle:unheard-of";
  CHECK_THROWS_AS(run_experiment(config), std::invalid_argument);
}

namespace {
int cli(std::initializer_list<const char*> args) {
  std::vector<const char*> argv{"deepsplit"};
  argv.insert(argv.end(), args.begin(), args.end());
  return cli_main(static_cast<int>(argv.size()), argv.data());
}
}  // namespace

TEST_CASE("cli exit codes") {
  CHECK(cli({"solve", "--preset", "unknown"}) == 1);
  CHECK(cli({"report", "/nonexistent/rows.csv"}) == 1);
  CHECK(cli({"reference", "--oracle", "no-such-oracle"}) == 1);
  CHECK(cli({"bogus-subcommand"}) == 1);

  const fs::path dir = fresh_dir("deepsplit_cli_out");
  const fs::path cfg = dir / "experiment.cfg";
  {
    std::ofstream out(cfg);
    out << "[experiment]\npreset = const\nd = 2\nruns = 1\nseed = 3\n";
    out << "[schedule]\nM = 120\nbreakpoints = 80:0.1,120:0.01\npair_only = true\n";
  }
  const std::string out_dir = (dir / "results").string();
  CHECK(cli({"solve", "--config", cfg.string().c_str(), "--out", out_dir.c_str()}) == 0);
  CHECK(fs::exists(fs::path(out_dir) / "row.csv"));

  const std::string row = (fs::path(out_dir) / "row.csv").string();
  CHECK(cli({"report", row.c_str(), "--format", "markdown"}) == 0);
}
