#include "dynas/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <tuple>

#include "dynas/csv.hpp"

namespace dynas::evalkit {

namespace {

using Key = std::tuple<int, int, int, int, std::size_t>;  // fid, iid, run, a1, switch_point

Key key_of(int fid, int iid, int run, OptimizerKind a1, std::size_t t) {
  return {fid, iid, run, static_cast<int>(a1), t};
}

std::string describe(const Key& k) {
  return "fid=" + std::to_string(std::get<0>(k)) + " iid=" + std::to_string(std::get<1>(k)) +
         " run=" + std::to_string(std::get<2>(k)) + " a1=" +
         std::string(optim::to_string(static_cast<OptimizerKind>(std::get<3>(k)))) +
         " switch_point=" + std::to_string(std::get<4>(k));
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

std::string kind_str(OptimizerKind k) { return std::string(optim::to_string(k)); }

}  // namespace

std::string window_label(std::size_t window) { return window == kAllWindows ? "all" : std::to_string(window); }

Dataset Dataset::subset(const std::vector<int>& idx) const {
  Dataset d;
  d.a1 = a1;
  d.a2 = a2;
  d.window = window;
  d.feature_names = feature_names;
  d.X.resize(static_cast<Eigen::Index>(idx.size()), X.cols());
  d.y.resize(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const auto r = idx[k];
    d.X.row(static_cast<Eigen::Index>(k)) = X.row(r);
    d.y[static_cast<Eigen::Index>(k)] = y[r];
    d.fid.push_back(fid[r]);
    d.iid.push_back(iid[r]);
    d.run.push_back(run[r]);
    d.switch_point.push_back(switch_point[r]);
  }
  return d;
}

Dataset build_dataset(const std::vector<switchlab::SwitchOutcome>& outcomes,
                      const std::vector<switchlab::FeatureRow>& feats, OptimizerKind a1, OptimizerKind a2,
                      std::size_t window, const std::vector<std::size_t>& all_windows) {
  const std::vector<std::size_t> used = window == kAllWindows ? all_windows : std::vector<std::size_t>{window};
  if (used.empty()) throw std::invalid_argument("build_dataset: no window sizes");
  const std::size_t need = *std::max_element(used.begin(), used.end());

  std::map<std::pair<Key, std::size_t>, const switchlab::FeatureRow*> index;
  for (const auto& f : feats) {
    if (f.a1 != a1) continue;
    index[{key_of(f.fid, f.iid, f.run, f.a1, f.switch_point), f.window}] = &f;
  }

  Dataset d;
  d.a1 = a1;
  d.a2 = a2;
  d.window = window;
  const auto& names = features::feature_names();
  for (std::size_t w : used)
    for (const auto& n : names) d.feature_names.push_back(window == kAllWindows ? "w" + std::to_string(w) + ":" + n : n);

  std::vector<std::vector<double>> rows;
  std::vector<double> ys;
  std::vector<std::string> missing;
  for (const auto& o : outcomes) {
    if (o.a1 != a1 || o.a2 != a2 || std::isnan(o.r) || o.switch_point < need) continue;
    const auto k = key_of(o.fid, o.iid, o.run, o.a1, o.switch_point);
    std::vector<double> row;
    bool ok = true;
    for (std::size_t w : used) {
      auto it = index.find({k, w});
      if (it == index.end()) {
        ok = false;
        if (missing.size() < 5) missing.push_back(describe(k) + " window=" + std::to_string(w));
        break;
      }
      row.insert(row.end(), it->second->values.begin(), it->second->values.end());
    }
    if (!ok) continue;
    rows.push_back(std::move(row));
    ys.push_back(o.r);
    d.fid.push_back(o.fid);
    d.iid.push_back(o.iid);
    d.run.push_back(o.run);
    d.switch_point.push_back(o.switch_point);
  }
  if (!missing.empty()) {
    std::string msg = "feature join failed for " + kind_str(a1) + "->" + kind_str(a2) + "; missing rows:";
    for (const auto& m : missing) msg += "\n  " + m;
    throw SchemaError(msg);
  }
  d.y = Eigen::Map<Vector>(ys.data(), static_cast<Eigen::Index>(ys.size()));
  d.X.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(d.feature_names.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      d.X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return d;
}

std::vector<int> fids_of(const Dataset& data) {
  std::vector<int> f = data.fid;
  std::sort(f.begin(), f.end());
  f.erase(std::unique(f.begin(), f.end()), f.end());
  return f;
}

Split lofo_split(const Dataset& data, int held_out_fid) {
  const auto fids = fids_of(data);
  if (fids.size() < 2) throw std::invalid_argument("lofo_split needs at least two functions");
  if (!std::binary_search(fids.begin(), fids.end(), held_out_fid))
    throw std::invalid_argument("lofo_split: fid " + std::to_string(held_out_fid) + " not in dataset");
  Split s;
  for (std::size_t i = 0; i < data.rows(); ++i)
    (data.fid[i] == held_out_fid ? s.test : s.train).push_back(static_cast<int>(i));
  return s;
}

void ForestLearner::fit(const Dataset& train) {
  model_ = forest::fit_model(train.X, train.y, hyper_, seed_, train.feature_names);
}

Vector ForestLearner::predict(const Dataset& rows) const { return model_.predict(rows.X); }

void MeanBaseline::fit(const Dataset& train) {
  if (train.rows() == 0) throw std::invalid_argument("baseline needs training rows");
  mean_ = train.y.mean();
}

Vector MeanBaseline::predict(const Dataset& rows) const {
  return Vector::Constant(static_cast<Eigen::Index>(rows.rows()), mean_);
}

std::uint64_t fold_seed(std::uint64_t base, const Dataset& data, int held_out_fid) {
  return hash_seed({base, static_cast<std::uint64_t>(data.a1), static_cast<std::uint64_t>(data.a2),
                    static_cast<std::uint64_t>(data.window), static_cast<std::uint64_t>(held_out_fid)});
}

LearnerFactory forest_factory(const Dataset& data, forest::ForestHyper hyper, std::uint64_t seed) {
  Dataset keys;
  keys.a1 = data.a1;
  keys.a2 = data.a2;
  keys.window = data.window;
  return [keys, hyper, seed](int fid) { return std::make_unique<ForestLearner>(hyper, fold_seed(seed, keys, fid)); };
}

LearnerFactory baseline_factory() {
  return [](int) { return std::make_unique<MeanBaseline>(); };
}

std::vector<FoldResult> evaluate_lofo(const Dataset& data, const LearnerFactory& make_learner,
                                      std::vector<std::string>* warnings, const FoldHook& hook) {
  std::vector<FoldResult> out;
  const auto fids = fids_of(data);
  if (fids.size() < 2) {
    if (warnings) warnings->push_back("evaluate_lofo: fewer than two functions, no folds");
    return out;
  }
  for (int fid : fids) {
    const auto split = lofo_split(data, fid);
    if (split.test.empty() || split.train.size() < 2) {
      if (warnings) warnings->push_back("fold fid=" + std::to_string(fid) + " skipped: empty split");
      continue;
    }
    const auto train = data.subset(split.train);
    const auto test = data.subset(split.test);
    auto learner = make_learner(fid);
    learner->fit(train);

    FoldResult fr;
    fr.held_out_fid = fid;
    fr.a1 = data.a1;
    fr.a2 = data.a2;
    fr.window = data.window;
    fr.n_test = test.rows();
    fr.test_rows = split.test;
    fr.test_iid = test.iid;
    fr.test_run = test.run;
    fr.test_switch_point = test.switch_point;
    fr.r_true = test.y;
    fr.r_pred = learner->predict(test);
    fr.mse = forest::mse(fr.r_pred, fr.r_true);

    std::map<std::size_t, std::pair<double, int>> by_t;
    for (std::size_t i = 0; i < test.rows(); ++i) {
      const double e = fr.r_pred[static_cast<Eigen::Index>(i)] - fr.r_true[static_cast<Eigen::Index>(i)];
      auto& c = by_t[test.switch_point[i]];
      c.first += e * e;
      c.second += 1;
    }
    for (const auto& [t, c] : by_t) {
      fr.switch_points.push_back(t);
      fr.mse_by_switch_point.push_back(c.first / c.second);
    }
    if (hook) hook(fr, *learner, test);
    out.push_back(std::move(fr));
  }
  return out;
}

ImportanceReport permutation_importance(const forest::ForestModel& model, const Matrix& X_test, const Vector& y_test,
                                        int repeats, std::uint64_t seed) {
  if (repeats < 1) throw std::invalid_argument("permutation_importance: repeats must be >= 1");
  if (X_test.rows() != y_test.size()) throw std::invalid_argument("permutation_importance: row mismatch");
  const auto& pre = model.preprocessor;
  ImportanceReport rep;
  rep.repeats = repeats;
  rep.seed = seed;
  rep.baseline_mse = forest::mse(model.predict(X_test), y_test);
  const auto k = static_cast<Eigen::Index>(pre.kept.size());
  rep.importance = Vector::Zero(k);
  rep.stderr_ = Vector::Constant(k, kNaN);
  for (Eigen::Index c = 0; c < k; ++c) {
    rep.features.push_back(pre.kept_names.empty() ? "x" + std::to_string(pre.kept[c]) : pre.kept_names[c]);
    Rng rng(hash_seed({seed, static_cast<std::uint64_t>(pre.kept[c])}));
    Matrix Xp = X_test;
    std::vector<double> deltas;
    for (int r = 0; r < repeats; ++r) {
      std::vector<Eigen::Index> perm(static_cast<std::size_t>(X_test.rows()));
      std::iota(perm.begin(), perm.end(), 0);
      std::shuffle(perm.begin(), perm.end(), rng);
      for (Eigen::Index i = 0; i < X_test.rows(); ++i) Xp(i, pre.kept[c]) = X_test(perm[i], pre.kept[c]);
      deltas.push_back(forest::mse(model.predict(Xp), y_test) - rep.baseline_mse);
    }
    const double m = std::accumulate(deltas.begin(), deltas.end(), 0.0) / repeats;
    rep.importance[c] = m;
    if (repeats > 1) {
      double ss = 0.0;
      for (double d : deltas) ss += (d - m) * (d - m);
      rep.stderr_[c] = std::sqrt(ss / (repeats - 1)) / std::sqrt(double(repeats));
    }
  }
  return rep;
}

MseSummary summarize(const std::vector<FoldResult>& folds) {
  MseSummary s;
  std::vector<double> v;
  for (const auto& f : folds) v.push_back(f.mse);
  s.folds = v.size();
  if (v.empty()) return s;
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
  s.median = median(v);
  return s;
}

void write_fold_report(const std::filesystem::path& path, const std::vector<FoldResult>& folds) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& f : folds)
    rows.push_back({kind_str(f.a1), kind_str(f.a2), window_label(f.window), std::to_string(f.held_out_fid),
                    std::to_string(f.n_test), csv::format_double(f.mse)});
  csv::write_table(path, "fold_report", {"a1", "a2", "window", "held_out_fid", "n_test", "mse"}, rows);
}

void write_switch_point_report(const std::filesystem::path& path, const std::vector<FoldResult>& folds) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& f : folds)
    for (std::size_t k = 0; k < f.switch_points.size(); ++k)
      rows.push_back({kind_str(f.a1), kind_str(f.a2), window_label(f.window), std::to_string(f.held_out_fid),
                      std::to_string(f.switch_points[k]), csv::format_double(f.mse_by_switch_point[k])});
  csv::write_table(path, "switch_point_mse", {"a1", "a2", "window", "held_out_fid", "switch_point", "mse"}, rows);
}

void write_predictions(const std::filesystem::path& path, const std::vector<FoldResult>& folds) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& f : folds)
    for (std::size_t i = 0; i < f.n_test; ++i)
      rows.push_back({kind_str(f.a1), kind_str(f.a2), window_label(f.window), std::to_string(f.held_out_fid),
                      std::to_string(f.test_iid[i]), std::to_string(f.test_run[i]),
                      std::to_string(f.test_switch_point[i]),
                      csv::format_double(f.r_true[static_cast<Eigen::Index>(i)]),
                      csv::format_double(f.r_pred[static_cast<Eigen::Index>(i)])});
  csv::write_table(path, "predictions",
                   {"a1", "a2", "window", "held_out_fid", "iid", "run", "switch_point", "r_true", "r_pred"}, rows);
}

ImportanceEntry aggregate_importance(const std::vector<ImportanceEntry>& per_fold) {
  if (per_fold.empty()) throw std::invalid_argument("aggregate_importance: no folds");
  std::map<std::string, std::vector<double>> by_name;
  std::vector<std::string> order;
  for (const auto& e : per_fold)
    for (std::size_t i = 0; i < e.report.features.size(); ++i) {
      auto& v = by_name[e.report.features[i]];
      if (v.empty()) order.push_back(e.report.features[i]);
      v.push_back(e.report.importance[static_cast<Eigen::Index>(i)]);
    }
  ImportanceEntry agg = per_fold.front();
  agg.held_out_fid = 0;
  auto& r = agg.report;
  r.features = order;
  r.importance.resize(static_cast<Eigen::Index>(order.size()));
  r.stderr_.resize(static_cast<Eigen::Index>(order.size()));
  double base = 0.0;
  for (const auto& e : per_fold) base += e.report.baseline_mse;
  r.baseline_mse = base / double(per_fold.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto& v = by_name[order[i]];
    const double m = std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    r.importance[static_cast<Eigen::Index>(i)] = m;
    r.stderr_[static_cast<Eigen::Index>(i)] =
        v.size() > 1 ? std::sqrt(ss / double(v.size() - 1)) / std::sqrt(double(v.size())) : kNaN;
  }
  return agg;
}

void write_importance(const std::filesystem::path& path, const std::vector<ImportanceEntry>& entries, bool per_fold) {
  std::vector<std::string> header = {"a1", "a2", "window", "method"};
  if (per_fold) header.push_back("held_out_fid");
  for (const char* c : {"feature", "importance", "stderr"}) header.emplace_back(c);
  std::vector<std::vector<std::string>> rows;
  for (const auto& e : entries)
    for (std::size_t i = 0; i < e.report.features.size(); ++i) {
      std::vector<std::string> row = {kind_str(e.a1), kind_str(e.a2), window_label(e.window), e.report.method};
      if (per_fold) row.push_back(std::to_string(e.held_out_fid));
      row.push_back(e.report.features[i]);
      row.push_back(csv::format_double(e.report.importance[static_cast<Eigen::Index>(i)]));
      const auto k = static_cast<Eigen::Index>(i);
      row.push_back(csv::format_double(k < e.report.stderr_.size() ? e.report.stderr_[k] : kNaN));
      rows.push_back(std::move(row));
    }
  csv::write_table(path, per_fold ? "importance_folds" : "importance", header, rows);
}

}  // namespace dynas::evalkit
