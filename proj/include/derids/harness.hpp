#pragma once

#include "derids/datagen.hpp"
#include "derids/detector.hpp"
#include "derids/trainer.hpp"
#include "derids/types.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace derids {

/// Experiment configuration shared by every cell of a grid.
struct RunConfig {
  std::size_t n1 = 1000;
  std::size_t n2 = 200;
  double anomaly_fraction = 0.2;
  double mean_abs_command = kDefaultMeanAbsCommand;
  double clean_noise_rel = 0.02;
  /// Templates; fraction and magnitude are overwritten per cell.
  AttackSpec poisoning{AttackKind::poisoning, 0.0, 0.0, 0.01, SignMode::one_sided, 0};
  AttackSpec evasion{AttackKind::evasion, 0.0, 0.0, 0.01, SignMode::symmetric, 0};
  int num_runs = 10;
  TrainerConfig trainer;
  std::uint64_t master_seed = 0;

  void validate() const;
};

struct Cell {
  double poison_fraction = 0.0;
  double poison_magnitude = 0.0;
  double evasion_magnitude = 0.0;

  bool operator==(const Cell&) const = default;
};

struct ScenarioGrid {
  std::vector<double> poison_fractions{0.1, 0.3};
  std::vector<double> poison_magnitudes{0.4, 0.7, 1.0};
  std::vector<double> evasion_magnitudes{0.4, 0.7, 1.0};

  /// Cells in canonical order: fraction, then poisoning magnitude, then evasion magnitude.
  std::vector<Cell> cells() const;
  void validate() const;
};

enum class Method { proposed, baseline };
std::string_view to_string(Method method) noexcept;

struct MethodOutcome {
  bool ok = false;
  std::string error;
  Vector alpha;
  double tau = 0.0;
  std::optional<double> lambda;
  Evaluation held_out;   // on the disjoint test set D2'
  Evaluation in_sample;  // on the training D2
};

struct RunResult {
  Cell cell;
  int run_index = 0;
  std::uint64_t run_seed = 0;
  MethodOutcome proposed;
  MethodOutcome baseline;

  const MethodOutcome& outcome(Method m) const { return m == Method::proposed ? proposed : baseline; }
};

/// Datasets and both fitted detectors for one (cell, run).
struct ScenarioData {
  GroundTruth truth;
  Dataset d1;
  std::vector<std::size_t> poisoned;
  Dataset d2;
  Dataset d2_test;
};

/// Per-run seed: split_seed(master, run_index). Streams inside a run are
/// fixed, so every cell sees the same clean data for a given run index.
std::uint64_t run_seed(std::uint64_t master_seed, int run_index);

ScenarioData generate_scenario(const Cell& cell, int run_index, const RunConfig& cfg);

/// Trains both methods on one fresh scenario and evaluates them on D2'.
/// Training failures are recorded in the outcome, never thrown.
RunResult run_scenario(const Cell& cell, int run_index, const RunConfig& cfg);

/// Runs every (cell, run) job, on `jobs` worker threads; results come back in
/// canonical (cell, run) order regardless of scheduling.
std::vector<RunResult> run_grid(const ScenarioGrid& grid, const RunConfig& cfg, int jobs = 1);

struct MetricSummary {
  double mean = 0.0;
  double std = 0.0;      // sample std, n-1 denominator; 0 for a single run
  std::size_t count = 0;
  bool single_run = false;
};

struct CellSummary {
  Cell cell;
  Method method = Method::proposed;
  MetricSummary accuracy, precision, recall;                        // held-out
  MetricSummary in_sample_accuracy, in_sample_precision, in_sample_recall;
  std::vector<double> raw_accuracy, raw_precision, raw_recall;     // held-out, by run index
  std::size_t failures = 0;
};

struct FailureRecord {
  Cell cell;
  int run_index = 0;
  Method method = Method::proposed;
  std::string error;
};

struct EvalReport {
  RunConfig config;
  ScenarioGrid grid;
  ImplicitGradientScaling scaling = kDefaultScaling;
  std::vector<CellSummary> cells;  // grid order, proposed then baseline
  std::vector<RunResult> runs;
  std::vector<FailureRecord> failures;

  const CellSummary& find(const Cell& cell, Method method) const;
};

MetricSummary summarize(const std::vector<double>& values);

/// Deterministic fold of run results (any order) into per-cell statistics.
EvalReport aggregate(std::vector<RunResult> runs, const ScenarioGrid& grid, const RunConfig& cfg);

std::string report_to_json(const EvalReport& report);

/// Text table for one poisoning fraction: rows are poisoning magnitudes per
/// method, column groups are evasion magnitudes, cells `mean(std)` in percent.
std::string format_table(const EvalReport& report, double poison_fraction);

/// Per-point trace on D2' for both methods:
/// `idx,truth,residual_proposed,tau_proposed,verdict_proposed,residual_baseline,tau_baseline,verdict_baseline`.
std::string trace_detection(const Cell& cell, int run_index, const RunConfig& cfg);

}  // namespace derids
