#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "dynas/common.hpp"
#include "dynas/forest.hpp"
#include "dynas/optimizers.hpp"
#include "dynas/switchlab.hpp"

namespace dynas::evalkit {

using optim::OptimizerKind;

/// Window value used for the model trained on all window sizes side by side.
inline constexpr std::size_t kAllWindows = 0;

std::string window_label(std::size_t window);  // "50", ..., "all"

/// Labeled rows of one (a1, a2, window) model family.
struct Dataset {
  OptimizerKind a1 = OptimizerKind::kCmaes;
  OptimizerKind a2 = OptimizerKind::kCmaes;
  std::size_t window = 0;
  std::vector<std::string> feature_names;
  Matrix X;
  Vector y;
  std::vector<int> fid;
  std::vector<int> iid;
  std::vector<int> run;
  std::vector<std::size_t> switch_point;

  std::size_t rows() const { return fid.size(); }
  Dataset subset(const std::vector<int>& rows) const;
};

/// Joins outcomes (a1, a2) with the features at the same
/// (fid, iid, run, a1, switch_point). Outcomes with NaN r are skipped, as
/// are switch points too early for the window. A missing feature row for a
/// feasible outcome is a SchemaError naming the offending keys.
Dataset build_dataset(const std::vector<switchlab::SwitchOutcome>& outcomes,
                      const std::vector<switchlab::FeatureRow>& features, OptimizerKind a1, OptimizerKind a2,
                      std::size_t window, const std::vector<std::size_t>& all_windows = features::kDefaultWindows);

struct Split {
  std::vector<int> train;
  std::vector<int> test;
};

Split lofo_split(const Dataset& data, int held_out_fid);

/// Sorted distinct fids.
std::vector<int> fids_of(const Dataset& data);

class Learner {
 public:
  virtual ~Learner() = default;
  virtual void fit(const Dataset& train) = 0;
  virtual Vector predict(const Dataset& rows) const = 0;
};

/// Called once per fold with the held-out fid.
using LearnerFactory = std::function<std::unique_ptr<Learner>(int held_out_fid)>;

class ForestLearner : public Learner {
 public:
  ForestLearner(forest::ForestHyper hyper, std::uint64_t seed) : hyper_(hyper), seed_(seed) {}
  void fit(const Dataset& train) override;
  Vector predict(const Dataset& rows) const override;
  const forest::ForestModel& model() const { return model_; }

 private:
  forest::ForestHyper hyper_;
  std::uint64_t seed_;
  forest::ForestModel model_;
};

/// Predicts the training mean.
class MeanBaseline : public Learner {
 public:
  void fit(const Dataset& train) override;
  Vector predict(const Dataset& rows) const override;

 private:
  double mean_ = kNaN;
};

struct FoldResult {
  int held_out_fid = 0;
  OptimizerKind a1 = OptimizerKind::kCmaes;
  OptimizerKind a2 = OptimizerKind::kCmaes;
  std::size_t window = 0;
  std::size_t n_test = 0;
  double mse = kNaN;
  std::vector<std::size_t> switch_points;     // ascending
  std::vector<double> mse_by_switch_point;    // aligned with switch_points
  std::vector<int> test_rows;                 // indices into the dataset
  std::vector<int> test_iid;
  std::vector<int> test_run;
  std::vector<std::size_t> test_switch_point;
  Vector r_true;
  Vector r_pred;
};

/// Sees each fitted learner before it is discarded.
using FoldHook = std::function<void(const FoldResult&, const Learner&, const Dataset& test)>;

/// One fold per fid present. Folds whose test or training part is empty are
/// skipped with a warning.
std::vector<FoldResult> evaluate_lofo(const Dataset& data, const LearnerFactory& make_learner,
                                      std::vector<std::string>* warnings = nullptr, const FoldHook& hook = {});

std::uint64_t fold_seed(std::uint64_t base, const Dataset& data, int held_out_fid);

LearnerFactory forest_factory(const Dataset& data, forest::ForestHyper hyper, std::uint64_t seed);
LearnerFactory baseline_factory();

struct ImportanceReport {
  std::string method = "permutation";
  std::vector<std::string> features;
  Vector importance;
  Vector stderr_;
  int repeats = 0;
  std::uint64_t seed = 0;
  double baseline_mse = kNaN;
};

/// Mean increase of test MSE when one kept feature column is shuffled.
ImportanceReport permutation_importance(const forest::ForestModel& model, const Matrix& X_test, const Vector& y_test,
                                        int repeats, std::uint64_t seed);

/// Per-fold MSE summary.
struct MseSummary {
  double mean = kNaN;
  double median = kNaN;
  std::size_t folds = 0;
};
MseSummary summarize(const std::vector<FoldResult>& folds);

// Report writers; rows are written in the order given.
void write_fold_report(const std::filesystem::path& path, const std::vector<FoldResult>& folds);
void write_switch_point_report(const std::filesystem::path& path, const std::vector<FoldResult>& folds);
void write_predictions(const std::filesystem::path& path, const std::vector<FoldResult>& folds);

struct ImportanceEntry {
  OptimizerKind a1;
  OptimizerKind a2;
  std::size_t window;
  int held_out_fid;  // 0 when aggregated over folds
  ImportanceReport report;
};
/// Averages per-fold reports of one model family feature by feature; the
/// stderr is taken across folds.
ImportanceEntry aggregate_importance(const std::vector<ImportanceEntry>& per_fold);
/// `per_fold` adds a held_out_fid column.
void write_importance(const std::filesystem::path& path, const std::vector<ImportanceEntry>& entries, bool per_fold);

}  // namespace dynas::evalkit
