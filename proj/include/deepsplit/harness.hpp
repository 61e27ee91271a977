#pragma once
// Experiment orchestration: multi-run solves with derived seeds, statistics
// aggregation in the published table layout, result persistence, config
// ingestion, and the quick property-check tier.

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "deepsplit/presets.hpp"

namespace deepsplit {

struct ExperimentConfig {
  std::string preset_id = "heat";
  int dim = 100;
  std::optional<double> horizon;
  std::optional<int> num_steps;
  std::optional<int> hidden_width;
  std::optional<int> train_steps;  // M
  std::optional<std::vector<std::pair<int, double>>> breakpoints;
  std::optional<int> batch_size;
  std::optional<std::string> activation;  // relu | logistic
  bool warm_start = false;
  bool pair_only = false;  // simulate only the consumed path pair (same output)

  int runs = 10;
  std::uint64_t seed = 1;
  std::string out_dir;  // empty: nothing persisted
  bool write_snapshots = true;

  // paper | value:<x> | oracle:radial-fd | oracle:grid-fd | oracle:hjb-mc |
  // oracle:bs-linear-mc
  std::string reference_mode = "paper";
  long oracle_samples = 10000000;

  int threads = 0;  // 0: hardware concurrency

  void validate() const;
};

struct ResultRow {
  int dim = 0;
  double horizon = 0.0;
  int num_steps = 0;
  double expectation = 0.0;
  double std_dev = 0.0;       // uncorrected, over runs
  double reference = 0.0;
  double rel_l1_error = 0.0;  // mean over runs of |v_r - ref| / |ref|
  double std_rel_error = 0.0; // uncorrected
  double avg_runtime_s = 0.0;
  int runs_completed = 0;
};

/// Applies the config's overrides to its preset.
BenchmarkPreset resolve_preset(const ExperimentConfig& config);

/// Resolves the reference value per the config's reference mode (may run an
/// oracle).
double resolve_reference(const ExperimentConfig& config, const BenchmarkPreset& preset);

/// R independent solves with derived seeds, evaluated at the preset start
/// point; writes the row, per-run snapshots and loss traces when an output
/// directory is set.
ResultRow run_experiment(const ExperimentConfig& config);

enum class ReportFormat { csv, markdown };

/// Rows rendered in the published column order; CSV values round-trip
/// bit-exactly.
std::string emit_report(std::span<const ResultRow> rows, ReportFormat format);
std::vector<ResultRow> parse_report_csv(const std::string& text);

/// Flat key-value config file with [sections]; see the repository README
/// for the schema.
ExperimentConfig parse_config(std::istream& in);
ExperimentConfig load_config(const std::string& path);

/// Quick property tier: prints one line per check, returns the number of
/// failures.
int self_check(std::ostream& out);

}  // namespace deepsplit
