#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "dynas/config.hpp"
#include "dynas/evalkit.hpp"

namespace dynas::pipeline {

/// Runs body(0..n-1) on `workers` threads. The first exception thrown by any
/// task is rethrown after all workers stop.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& body);

using Log = std::function<void(const std::string&)>;

// Each command writes under cfg.output_dir. They throw std::invalid_argument
// for bad input and std::runtime_error for I/O or compute failures.

/// trajectories/<run>.csv per (dim, fid, iid, run, algo) and static_summary.csv.
void cmd_static_run(const ExperimentConfig& cfg, const Log& log = {});

/// self_switch.csv: algo, switch_point, one column per fid holding
/// log10(gm precision with switch) - log10(gm precision without).
void cmd_self_switch(const ExperimentConfig& cfg, const Log& log = {});

/// sweep/outcomes.csv, sweep/features.csv, sweep/manifest.json. Units
/// already recorded in sweep/jobs.ledger are not recomputed.
void cmd_sweep(const ExperimentConfig& cfg, const Log& log = {});

/// Reads the sweep outputs and writes the model evaluation reports under
/// eval/.
void cmd_train_eval(const ExperimentConfig& cfg, const Log& log = {});

/// report.txt summarizing eval/ (deterministic text).
void cmd_report(const ExperimentConfig& cfg, const Log& log = {});

/// Forest-vs-baseline comparison for one (a1, a2) family, pooling the given
/// windows.
struct FamilySignal {
  std::size_t folds = 0;
  std::size_t folds_beating_baseline = 0;
  double pooled_correlation = 0.0;
  double mean_mse = 0.0;
  double mean_baseline_mse = 0.0;
  std::size_t pooled_rows = 0;
};

FamilySignal family_signal(const std::vector<evalkit::FoldResult>& forest_folds,
                           const std::vector<evalkit::FoldResult>& baseline_folds, optim::OptimizerKind a1,
                           optim::OptimizerKind a2, const std::vector<std::size_t>& windows);

/// Reads eval/fold_report.csv, eval/fold_report_baseline.csv and
/// eval/predictions.csv back into FoldResults (without per-switch-point
/// series).
struct EvalTables {
  std::vector<evalkit::FoldResult> forest;
  std::vector<evalkit::FoldResult> baseline;
};
EvalTables read_eval_tables(const std::filesystem::path& eval_dir);

}  // namespace dynas::pipeline
