#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dynas/common.hpp"
#include "dynas/features.hpp"
#include "dynas/optimizers.hpp"
#include "dynas/trajectory.hpp"

namespace dynas::switchlab {

using optim::OptimizerKind;

struct SwitchOutcome {
  int fid = 0;
  int iid = 0;
  int run = 0;
  OptimizerKind a1 = OptimizerKind::kCmaes;
  OptimizerKind a2 = OptimizerKind::kCmaes;
  std::size_t switch_point = 0;
  double a_s = kNaN;
  double a_r = kNaN;
  double r = kNaN;
};

/// How a branch's performance is read off its records.
enum class PerformanceMode {
  kWindowBest,  // best precision within the horizon only
  kBestSoFar,   // best precision over the prefix and the horizon
};

std::vector<std::size_t> linear_grid(std::size_t start, std::size_t stop, std::size_t step);

struct SweepConfig {
  std::vector<OptimizerKind> portfolio = {optim::kAllKinds.begin(), optim::kAllKinds.end()};
  std::size_t budget = 10000;
  std::vector<std::size_t> switch_grid = linear_grid(50, 9500, 50);
  std::size_t horizon = 500;
  int runs = 5;
  std::vector<int> instances = {1, 2, 3, 4, 5};
  std::vector<int> dims = {10};
  std::vector<int> fids = {1,  2,  3,  4,  5,  6,  7,  8,  9,  10, 11, 12,
                           13, 14, 15, 16, 17, 18, 19, 20, 21, 22, 23, 24};
  std::uint64_t seed = 0;
  std::vector<std::size_t> windows = features::kDefaultWindows;
  PerformanceMode mode = PerformanceMode::kWindowBest;
  bool compute_features = true;
  optim::Hyper hyper;

  /// Throws std::invalid_argument on any violated invariant.
  void validate() const;
};

/// Signed, scale-invariant comparison of switched (a_s) and continued (a_r)
/// precision. Positive means the switch helped.
double relative_benefit(double a_s, double a_r);

/// Best clamped precision in a segment of exactly `horizon` records.
double horizon_performance(std::span<const EvalRecord> segment, std::size_t horizon, double f_opt);

/// One (fid, iid, dim, run, a1) job of a sweep.
struct SweepUnit {
  int fid = 0;
  int iid = 0;
  int dim = 0;
  int run = 0;
  OptimizerKind a1 = OptimizerKind::kCmaes;

  std::string id() const;
};

struct FeatureRow {
  int fid = 0;
  int iid = 0;
  int run = 0;
  OptimizerKind a1 = OptimizerKind::kCmaes;
  std::size_t switch_point = 0;
  std::size_t window = 0;
  std::vector<double> values;
};

struct UnitResult {
  std::vector<SwitchOutcome> outcomes;
  std::vector<FeatureRow> features;
  std::vector<std::string> warnings;
};

/// Units in canonical order: dim, fid, iid, run, a1.
std::vector<SweepUnit> enumerate_units(const SweepConfig& cfg);

std::uint64_t static_seed(std::uint64_t base, const SweepUnit& u);
std::uint64_t branch_seed(std::uint64_t base, const SweepUnit& u, OptimizerKind a2, std::size_t t);

UnitResult run_unit(const SweepConfig& cfg, const SweepUnit& unit);

/// Serial sweep over all units; the pipeline runs units on a worker pool.
UnitResult sweep(const SweepConfig& cfg);

/// Rows a1, columns a2, both in kAllKinds order. Failed outcomes (NaN r)
/// are ignored; an empty cell is NaN.
Matrix fraction_beneficial(std::span<const SwitchOutcome> outcomes);

struct Heatmap {
  std::vector<int> fids;
  std::vector<std::size_t> switch_points;
  Matrix values;  // fids x switch_points, NaN where no data
};

Heatmap mean_benefit_heatmap(std::span<const SwitchOutcome> outcomes, OptimizerKind a1, OptimizerKind a2);

/// Final precision of an uninterrupted run versus the same run restarted
/// from its own archive at `switch_at` with the same algorithm.
struct SelfSwitchResult {
  double uninterrupted = kNaN;
  double switched = kNaN;
};

SelfSwitchResult self_switch(const problems::ProblemInstance& problem, OptimizerKind kind, std::size_t budget,
                             std::size_t switch_at, std::uint64_t seed, const optim::Hyper& hyper = {},
                             bool disable_switch = false);

// Canonical row orders used by the writers.
void sort_outcomes(std::vector<SwitchOutcome>& rows);
void sort_features(std::vector<FeatureRow>& rows);

void write_outcomes(const std::filesystem::path& path, const std::vector<SwitchOutcome>& rows);
std::vector<SwitchOutcome> read_outcomes(const std::filesystem::path& path);
void write_features(const std::filesystem::path& path, const std::vector<FeatureRow>& rows);
/// Rejects tables whose feature columns differ from feature_names().
std::vector<FeatureRow> read_features(const std::filesystem::path& path);
void write_fraction_matrix(const std::filesystem::path& path, const Matrix& m);
void write_heatmap(const std::filesystem::path& path, const Heatmap& h);

}  // namespace dynas::switchlab
