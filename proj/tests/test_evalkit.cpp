#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>

#include "doctest.h"
#include "dynas/csv.hpp"
#include "dynas/evalkit.hpp"

using namespace dynas;
using namespace dynas::evalkit;
using optim::OptimizerKind;
using switchlab::FeatureRow;
using switchlab::SwitchOutcome;

namespace {

constexpr auto kA1 = OptimizerKind::kCmaes;
constexpr auto kA2 = OptimizerKind::kDe;

struct Synthetic {
  std::vector<SwitchOutcome> outcomes;
  std::vector<FeatureRow> features;
};

// Feature 0 drives r (when `signal`), everything else is noise.
Synthetic synthetic(int n_fids, bool signal, std::uint64_t seed, const std::vector<std::size_t>& windows = {50}) {
  Rng rng(seed);
  Synthetic s;
  for (int fid = 1; fid <= n_fids; ++fid)
    for (int iid = 1; iid <= 2; ++iid)
      for (int run = 1; run <= 3; ++run)
        for (std::size_t t : {100u, 200u, 300u, 400u}) {
          double driver = 0.0;
          for (std::size_t w : windows) {
            FeatureRow f{fid, iid, run, kA1, t, w, std::vector<double>(features::kNumFeatures)};
            for (double& v : f.values) v = uniform(rng, -1, 1);
            f.values[5] = 1.0;  // constant column
            if (w == windows.front()) driver = f.values[0];
            s.features.push_back(f);
          }
          for (auto a2 : optim::kAllKinds) {
            SwitchOutcome o;
            o.fid = fid;
            o.iid = iid;
            o.run = run;
            o.a1 = kA1;
            o.a2 = a2;
            o.switch_point = t;
            o.a_s = o.a_r = 1.0;
            o.r = signal ? std::tanh(2.0 * driver) : uniform(rng, -1, 1);
            s.outcomes.push_back(o);
          }
        }
  return s;
}

class TruthLearner : public Learner {
 public:
  void fit(const Dataset&) override {}
  Vector predict(const Dataset& rows) const override { return rows.y; }
};

class SpyLearner : public Learner {
 public:
  explicit SpyLearner(std::set<int>* seen) : seen_(seen) {}
  void fit(const Dataset& train) override { seen_->insert(train.fid.begin(), train.fid.end()); }
  Vector predict(const Dataset& rows) const override { return Vector::Zero(static_cast<Eigen::Index>(rows.rows())); }

 private:
  std::set<int>* seen_;
};

forest::ForestHyper small_forest() {
  forest::ForestHyper h;
  h.n_trees = 30;
  return h;
}

}  // namespace

TEST_CASE("window labels") {
  CHECK(window_label(kAllWindows) == "all");
  CHECK(window_label(150) == "150");
}

TEST_CASE("dataset join") {
  auto s = synthetic(3, true, 1);
  s.outcomes[0].r = kNaN;  // fid 1, t=100, a2=cma
  const auto d = build_dataset(s.outcomes, s.features, kA1, kA2, 50);
  CHECK(d.rows() == 3 * 2 * 3 * 4);
  CHECK(d.X.cols() == static_cast<Eigen::Index>(features::kNumFeatures));
  CHECK(d.feature_names == features::feature_names());
  for (std::size_t i = 0; i < d.rows(); ++i) CHECK(d.y[i] == doctest::Approx(std::tanh(2.0 * d.X(i, 0))));

  const auto c = build_dataset(s.outcomes, s.features, kA1, OptimizerKind::kCmaes, 50);
  CHECK(c.rows() == d.rows() - 1);

  // too-early switch points are skipped, not errors
  const auto wide = synthetic(3, true, 1, {50, 250});
  const auto late = build_dataset(wide.outcomes, wide.features, kA1, kA2, 250, {50, 250});
  CHECK(late.rows() == 3 * 2 * 3 * 2);

  auto broken = s;
  broken.features.erase(broken.features.begin() + 3);
  CHECK_THROWS_AS(build_dataset(broken.outcomes, broken.features, kA1, kA2, 50), SchemaError);
}

TEST_CASE("concatenated window dataset") {
  const auto s = synthetic(2, true, 2, {50, 150});
  const auto d = build_dataset(s.outcomes, s.features, kA1, kA2, kAllWindows, {50, 150});
  CHECK(d.X.cols() == 2 * static_cast<Eigen::Index>(features::kNumFeatures));
  CHECK(d.feature_names.front() == "w50:ela_distr.skewness");
  CHECK(d.feature_names[features::kNumFeatures] == "w150:ela_distr.skewness");
  CHECK(d.rows() == 2 * 2 * 3 * 3);
  CHECK(*std::min_element(d.switch_point.begin(), d.switch_point.end()) == 200);
}

TEST_CASE("leave-one-function-out splits") {
  const auto s = synthetic(4, true, 3);
  const auto d = build_dataset(s.outcomes, s.features, kA1, kA2, 50);
  CHECK(fids_of(d) == std::vector<int>{1, 2, 3, 4});
  for (int fid : fids_of(d)) {
    const auto sp = lofo_split(d, fid);
    CHECK(sp.train.size() + sp.test.size() == d.rows());
    for (int i : sp.test) CHECK(d.fid[i] == fid);
    for (int i : sp.train) CHECK(d.fid[i] != fid);
  }
  CHECK_THROWS_AS(lofo_split(d, 9), std::invalid_argument);
}

TEST_CASE("the held-out function never reaches training") {
  const auto s = synthetic(5, true, 4);
  const auto d = build_dataset(s.outcomes, s.features, kA1, kA2, 50);
  std::vector<std::set<int>> seen(6);
  const auto folds =
      evaluate_lofo(d, [&](int fid) { return std::make_unique<SpyLearner>(&seen[static_cast<std::size_t>(fid)]); });
  CHECK(folds.size() == 5);
  for (int fid = 1; fid <= 5; ++fid) {
    CHECK(seen[fid].count(fid) == 0);
    CHECK(seen[fid].size() == 4);
  }
}

TEST_CASE("poisoning held-out labels does not change its predictions") {
  const auto s = synthetic(4, true, 5);
  const auto d = build_dataset(s.outcomes, s.features, kA1, kA2, 50);
  const auto clean = evaluate_lofo(d, forest_factory(d, small_forest(), 9));
  for (int fid = 1; fid <= 4; ++fid) {
    Dataset poisoned = d;
    for (std::size_t i = 0; i < d.rows(); ++i)
      if (d.fid[i] == fid) poisoned.y[i] = 1e6;
    const auto folds = evaluate_lofo(poisoned, forest_factory(poisoned, small_forest(), 9));
    CHECK(folds[fid - 1].r_pred == clean[fid - 1].r_pred);
  }
}

TEST_CASE("perfect predictions give zero MSE") {
  const auto s = synthetic(3, false, 6);
  const auto d = build_dataset(s.outcomes, s.features, kA1, kA2, 50);
  const auto folds = evaluate_lofo(d, [](int) { return std::make_unique<TruthLearner>(); });
  REQUIRE(folds.size() == 3);
  for (const auto& f : folds) {
    CHECK(f.mse == 0.0);
    CHECK(f.switch_points == std::vector<std::size_t>{100, 200, 300, 400});
    for (double m : f.mse_by_switch_point) CHECK(m == 0.0);
  }
  const auto sum = summarize(folds);
  CHECK(sum.folds == 3);
  CHECK(sum.mean == 0.0);
}

TEST_CASE("baseline fold MSE matches direct computation") {
  const auto s = synthetic(4, false, 7);
  const auto d = build_dataset(s.outcomes, s.features, kA1, kA2, 50);
  const auto folds = evaluate_lofo(d, baseline_factory());
  REQUIRE(folds.size() == 4);
  for (const auto& f : folds) {
    double sum = 0;
    int n = 0;
    for (std::size_t i = 0; i < d.rows(); ++i)
      if (d.fid[i] != f.held_out_fid) {
        sum += d.y[i];
        ++n;
      }
    const double mu = sum / n;
    double se = 0;
    int m = 0;
    for (std::size_t i = 0; i < d.rows(); ++i)
      if (d.fid[i] == f.held_out_fid) {
        se += (d.y[i] - mu) * (d.y[i] - mu);
        ++m;
      }
    CHECK(f.n_test == static_cast<std::size_t>(m));
    CHECK(f.mse == doctest::Approx(se / m).epsilon(1e-12));
    double weighted = 0;
    for (std::size_t k = 0; k < f.switch_points.size(); ++k) weighted += f.mse_by_switch_point[k] * 6;
    CHECK(weighted / m == doctest::Approx(f.mse));
  }
}

TEST_CASE("forest learns the signal and not shuffled labels") {
  const auto s = synthetic(6, true, 8);
  const auto d = build_dataset(s.outcomes, s.features, kA1, kA2, 50);
  const auto rf = summarize(evaluate_lofo(d, forest_factory(d, small_forest(), 1)));
  const auto base = summarize(evaluate_lofo(d, baseline_factory()));
  CHECK(rf.mean < 0.5 * base.mean);

  Dataset shuffled = d;
  std::vector<int> perm(d.rows());
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(3);
  std::shuffle(perm.begin(), perm.end(), rng);
  for (std::size_t i = 0; i < d.rows(); ++i) shuffled.y[i] = d.y[perm[i]];
  const auto rf_s = summarize(evaluate_lofo(shuffled, forest_factory(shuffled, small_forest(), 1)));
  const auto base_s = summarize(evaluate_lofo(shuffled, baseline_factory()));
  CHECK(rf_s.mean > 0.9 * base_s.mean);
}

TEST_CASE("fold seeds and forest evaluation are reproducible") {
  const auto s = synthetic(3, true, 9);
  const auto d = build_dataset(s.outcomes, s.features, kA1, kA2, 50);
  CHECK(fold_seed(1, d, 1) != fold_seed(1, d, 2));
  const auto a = evaluate_lofo(d, forest_factory(d, small_forest(), 4));
  const auto b = evaluate_lofo(d, forest_factory(d, small_forest(), 4));
  for (std::size_t k = 0; k < a.size(); ++k) CHECK(a[k].r_pred == b[k].r_pred);
}

TEST_CASE("permutation importance ranks the driving feature first") {
  const auto s = synthetic(4, true, 10);
  const auto d = build_dataset(s.outcomes, s.features, kA1, kA2, 50);
  const auto split = lofo_split(d, 1);
  const auto train = d.subset(split.train), test = d.subset(split.test);
  ForestLearner learner(small_forest(), 3);
  learner.fit(train);
  const auto rep = permutation_importance(learner.model(), test.X, test.y, 5, 11);
  CHECK(rep.method == "permutation");
  CHECK(rep.features.size() == features::kNumFeatures - 1);  // the constant column is dropped
  CHECK(std::find(rep.features.begin(), rep.features.end(), features::feature_names()[5]) == rep.features.end());
  Eigen::Index top = 0;
  rep.importance.maxCoeff(&top);
  CHECK(rep.features[static_cast<std::size_t>(top)] == features::feature_names()[0]);
  CHECK(rep.baseline_mse == doctest::Approx(forest::mse(learner.predict(test), test.y)));
  const auto again = permutation_importance(learner.model(), test.X, test.y, 5, 11);
  CHECK(again.importance == rep.importance);
  CHECK_THROWS_AS(permutation_importance(learner.model(), test.X, test.y, 0, 1), std::invalid_argument);
}

TEST_CASE("importance aggregation across folds") {
  ImportanceEntry a{kA1, kA2, 50, 1, {}};
  a.report.features = {"u", "v"};
  a.report.importance = Vector::Zero(2);
  a.report.importance << 1.0, 0.0;
  a.report.baseline_mse = 0.2;
  ImportanceEntry b = a;
  b.held_out_fid = 2;
  b.report.importance << 3.0, 0.0;
  b.report.baseline_mse = 0.4;
  const auto agg = aggregate_importance({a, b});
  CHECK(agg.held_out_fid == 0);
  CHECK(agg.report.importance[0] == 2.0);
  CHECK(agg.report.stderr_[0] == doctest::Approx(1.0));
  CHECK(agg.report.stderr_[1] == 0.0);
  CHECK(agg.report.baseline_mse == doctest::Approx(0.3));

  const auto path = std::filesystem::temp_directory_path() / "dynas_tests" / "imp.csv";
  write_importance(path, {a, b}, true);
  const auto t = csv::read_table(path, "importance_folds");
  CHECK(t.header == std::vector<std::string>{"a1", "a2", "window", "method", "held_out_fid", "feature", "importance",
                                             "stderr"});
  CHECK(t.rows.size() == 4);
}

TEST_CASE("report writers") {
  const auto s = synthetic(3, true, 12);
  const auto d = build_dataset(s.outcomes, s.features, kA1, kA2, 50);
  const auto folds = evaluate_lofo(d, baseline_factory());
  const auto dir = std::filesystem::temp_directory_path() / "dynas_tests";
  write_fold_report(dir / "folds.csv", folds);
  write_predictions(dir / "pred.csv", folds);
  write_switch_point_report(dir / "sp.csv", folds);
  const auto f = csv::read_table(dir / "folds.csv", "fold_report");
  CHECK(f.header == std::vector<std::string>{"a1", "a2", "window", "held_out_fid", "n_test", "mse"});
  CHECK(f.rows.size() == 3);
  CHECK(f.rows[0][1] == "de");
  CHECK(csv::read_table(dir / "pred.csv", "predictions").rows.size() == d.rows());
  CHECK(csv::read_table(dir / "sp.csv", "switch_point_mse").rows.size() == 12);
}
