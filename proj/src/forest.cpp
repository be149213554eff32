#include "dynas/forest.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <thread>

namespace dynas::forest {

namespace {

constexpr int kModelVersion = 1;

// Split search state for one tree. Every feature keeps its own copy of the
// node's rows sorted by that feature, together with the matching x and y
// values so the split scan reads contiguous memory; a node is the segment
// [lo, hi) in all of them.
class TreeBuilder {
 public:
  TreeBuilder(const Matrix& X, const Vector& y, const std::vector<std::vector<int>>& presorted,
              const std::vector<int>& counts, const ForestHyper& hyper, Rng& rng)
      : X_(X), y_(y), hyper_(hyper), rng_(rng) {
    const auto p = static_cast<int>(X.cols());
    cols_.resize(p);
    for (int j = 0; j < p; ++j) {
      auto& c = cols_[j];
      for (int i : presorted[j])
        for (int k = 0; k < counts[i]; ++k) c.push_back({X(i, j), y[i], i});
    }
    go_left_.assign(static_cast<std::size_t>(X.rows()), 0);
    const std::size_t total = cols_.empty() ? 0 : cols_[0].size();
    scratch_.resize(total);
    inv_.resize(total + 1, 0.0);
    for (std::size_t k = 1; k <= total; ++k) inv_[k] = 1.0 / double(k);
    features_.resize(p);
    std::iota(features_.begin(), features_.end(), 0);
  }

  RegressionTree build() {
    if (!cols_.empty() && !cols_[0].empty()) grow(0, static_cast<int>(cols_[0].size()));
    return std::move(tree_);
  }

 private:
  struct Entry {
    double x;
    double y;
    int idx;
  };
  using Column = std::vector<Entry>;

  int new_node() {
    tree_.feature.push_back(-1);
    tree_.threshold.push_back(0.0);
    tree_.left.push_back(-1);
    tree_.right.push_back(-1);
    tree_.value.push_back(0.0);
    return static_cast<int>(tree_.feature.size()) - 1;
  }

  int grow(int lo, int hi) {
    const int node = new_node();
    const Entry* es = cols_[0].data();
    const int m = hi - lo;
    double sum = 0.0, ymin = es[lo].y, ymax = ymin;
    for (int k = lo; k < hi; ++k) {
      sum += es[k].y;
      ymin = std::min(ymin, es[k].y);
      ymax = std::max(ymax, es[k].y);
    }
    const double mean = sum / m;
    tree_.value[node] = mean;
    if (ymin == ymax || m < 2 * hyper_.min_leaf) return node;

    // Centered sums keep the running SSE accurate.
    double s_total = 0.0, sq_total = 0.0;
    for (int k = lo; k < hi; ++k) {
      const double v = es[k].y - mean;
      s_total += v;
      sq_total += v * v;
    }
    const double tol = 1e-9 * std::max(1.0, sq_total);

    const int p = static_cast<int>(cols_.size());
    std::vector<int> candidates = features_;
    if (hyper_.max_features > 0 && hyper_.max_features < p) {
      for (int i = 0; i < hyper_.max_features; ++i) {
        std::uniform_int_distribution<int> pick(i, p - 1);
        std::swap(candidates[i], candidates[pick(rng_)]);
      }
      candidates.resize(hyper_.max_features);
      std::sort(candidates.begin(), candidates.end());
    }

    const int min_leaf = hyper_.min_leaf;
    int best_f = -1;
    // Minimizing the children's SSE is maximizing sl^2/nl + sr^2/nr.
    double best_thr = 0.0, best_gain = -std::numeric_limits<double>::infinity();
    const double* inv = inv_.data();
    for (int j : candidates) {
      const Entry* e = cols_[j].data();
      if (e[lo].x == e[hi - 1].x) continue;
      double sl = 0.0;
      for (int k = lo; k < hi - 1; ++k) {
        sl += e[k].y - mean;
        const int nl = k - lo + 1, nr = m - nl;
        const double a = e[k].x, b = e[k + 1].x;
        if (a == b || nl < min_leaf || nr < min_leaf) continue;
        const double sr = s_total - sl;
        const double gain = sl * sl * inv[nl] + sr * sr * inv[nr];
        if (gain > best_gain + tol) {
          best_gain = gain;
          best_f = j;
          double mid = a + (b - a) / 2.0;
          if (!(mid < b) || mid < a) mid = a;
          best_thr = mid;
        }
      }
    }
    if (best_f < 0) return node;

    int n_left = 0;
    {
      const auto& c = cols_[best_f];
      for (int k = lo; k < hi; ++k) {
        const bool left = c[k].x <= best_thr;
        go_left_[c[k].idx] = left;
        n_left += left;
      }
    }
    for (auto& c : cols_) {
      Entry* e = c.data();
      Entry* out = scratch_.data();
      int w = lo, r = 0;
      for (int k = lo; k < hi; ++k) {
        const Entry v = e[k];
        const int left = go_left_[v.idx];
        e[w] = v;
        out[r] = v;
        w += left;
        r += 1 - left;
      }
      std::copy(out, out + r, e + w);
    }
    tree_.feature[node] = best_f;
    tree_.threshold[node] = best_thr;
    const int mid = lo + n_left;
    const int l = grow(lo, mid);
    tree_.left[node] = l;
    const int r = grow(mid, hi);
    tree_.right[node] = r;
    return node;
  }

  const Matrix& X_;
  const Vector& y_;
  const ForestHyper& hyper_;
  Rng& rng_;
  std::vector<Column> cols_;
  std::vector<double> inv_;
  std::vector<char> go_left_;
  std::vector<Entry> scratch_;
  std::vector<int> features_;
  RegressionTree tree_;
};

nlohmann::json vec_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vector json_vec(const nlohmann::json& j) {
  auto v = j.get<std::vector<double>>();
  return Eigen::Map<Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

Preprocessor fit_preprocessor(const Matrix& X, const std::vector<std::string>& names) {
  if (X.rows() < 2) throw std::invalid_argument("fit_preprocessor needs at least 2 rows");
  if (!names.empty() && static_cast<Eigen::Index>(names.size()) != X.cols())
    throw std::invalid_argument("fit_preprocessor: name count does not match columns");
  Preprocessor pre;
  pre.n_inputs = static_cast<std::size_t>(X.cols());
  std::vector<double> med, mu, sd;
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    std::vector<double> vals;
    for (Eigen::Index i = 0; i < X.rows(); ++i)
      if (std::isfinite(X(i, j))) vals.push_back(X(i, j));
    const double nan_frac = 1.0 - double(vals.size()) / double(X.rows());
    if (vals.empty() || nan_frac > kMaxNanFraction) continue;
    const auto [lo, hi] = std::minmax_element(vals.begin(), vals.end());
    if (*lo == *hi) continue;

    std::sort(vals.begin(), vals.end());
    const std::size_t h = vals.size() / 2;
    const double median = vals.size() % 2 ? vals[h] : 0.5 * (vals[h - 1] + vals[h]);
    double mean = 0.0;
    for (Eigen::Index i = 0; i < X.rows(); ++i) mean += std::isfinite(X(i, j)) ? X(i, j) : median;
    mean /= double(X.rows());
    double var = 0.0;
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      const double v = (std::isfinite(X(i, j)) ? X(i, j) : median) - mean;
      var += v * v;
    }
    const double std = std::sqrt(var / double(X.rows()));
    if (!(std > 0.0)) continue;
    pre.kept.push_back(static_cast<int>(j));
    if (!names.empty()) pre.kept_names.push_back(names[j]);
    med.push_back(median);
    mu.push_back(mean);
    sd.push_back(std);
  }
  if (pre.kept.empty()) throw DegenerateData("preprocessing dropped every feature column");
  pre.medians = Eigen::Map<Vector>(med.data(), static_cast<Eigen::Index>(med.size()));
  pre.means = Eigen::Map<Vector>(mu.data(), static_cast<Eigen::Index>(mu.size()));
  pre.stds = Eigen::Map<Vector>(sd.data(), static_cast<Eigen::Index>(sd.size()));
  return pre;
}

Matrix Preprocessor::transform(const Matrix& X) const {
  if (static_cast<std::size_t>(X.cols()) != n_inputs)
    throw std::invalid_argument("preprocessor expects " + std::to_string(n_inputs) + " columns, got " +
                                std::to_string(X.cols()));
  Matrix out(X.rows(), static_cast<Eigen::Index>(kept.size()));
  for (std::size_t c = 0; c < kept.size(); ++c) {
    const auto k = static_cast<Eigen::Index>(c);
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      double v = X(i, kept[c]);
      if (std::isnan(v)) v = medians[k];
      v = (v - means[k]) / stds[k];
      if (!std::isfinite(v)) throw std::invalid_argument("non-finite value after preprocessing");
      out(i, k) = v;
    }
  }
  return out;
}

double RegressionTree::predict(const double* row, Eigen::Index stride) const {
  int node = 0;
  while (feature[node] >= 0) node = row[feature[node] * stride] <= threshold[node] ? left[node] : right[node];
  return value[node];
}

std::size_t RegressionTree::leaf_count() const {
  return static_cast<std::size_t>(std::count(feature.begin(), feature.end(), -1));
}

RandomForest fit_forest(const Matrix& X, const Vector& y, const ForestHyper& hyper, std::uint64_t seed) {
  const auto n = static_cast<int>(X.rows());
  const auto p = static_cast<int>(X.cols());
  if (n < 2) throw std::invalid_argument("fit_forest needs at least 2 rows");
  if (y.size() != n) throw std::invalid_argument("fit_forest: X and y disagree on row count");
  if (p < 1) throw std::invalid_argument("fit_forest needs at least one feature");
  if (hyper.n_trees < 1 || hyper.min_leaf < 1 || hyper.max_features < 0)
    throw std::invalid_argument("invalid forest hyperparameters");
  if (!X.allFinite() || !y.allFinite()) throw std::invalid_argument("fit_forest: non-finite input");

  std::vector<std::vector<int>> presorted(p);
  for (int j = 0; j < p; ++j) {
    auto& o = presorted[j];
    o.resize(n);
    std::iota(o.begin(), o.end(), 0);
    std::stable_sort(o.begin(), o.end(), [&](int a, int b) { return X(a, j) < X(b, j); });
  }

  RandomForest rf;
  rf.hyper = hyper;
  rf.seed = seed;
  rf.n_features = p;
  rf.trees.resize(hyper.n_trees);

  auto fit_one = [&](int t) {
    Rng rng(hash_seed({seed, static_cast<std::uint64_t>(t)}));
    std::vector<int> counts(n, 1);
    if (hyper.bootstrap) {
      std::fill(counts.begin(), counts.end(), 0);
      std::uniform_int_distribution<int> draw(0, n - 1);
      for (int k = 0; k < n; ++k) ++counts[draw(rng)];
    }
    rf.trees[t] = TreeBuilder(X, y, presorted, counts, hyper, rng).build();
  };

  const int workers = std::clamp(hyper.workers, 1, hyper.n_trees);
  if (workers == 1) {
    for (int t = 0; t < hyper.n_trees; ++t) fit_one(t);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (int t = next++; t < hyper.n_trees; t = next++) fit_one(t);
      });
    for (auto& th : pool) th.join();
  }
  return rf;
}

Vector RandomForest::predict(const Matrix& X) const {
  if (X.cols() != n_features)
    throw std::invalid_argument("forest expects " + std::to_string(n_features) + " columns");
  if (!X.allFinite()) throw std::invalid_argument("forest input contains NaN or Inf");
  Vector out = Vector::Zero(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const double* row = X.data() + i;
    double s = 0.0;
    for (const auto& t : trees) s += t.predict(row, X.rows());
    out[i] = s / double(trees.size());
  }
  return out;
}

Vector ForestModel::predict(const Matrix& raw) const { return forest.predict(preprocessor.transform(raw)); }

ForestModel fit_model(const Matrix& raw, const Vector& y, const ForestHyper& hyper, std::uint64_t seed,
                      const std::vector<std::string>& names) {
  ForestModel m;
  m.preprocessor = fit_preprocessor(raw, names);
  m.forest = fit_forest(m.preprocessor.transform(raw), y, hyper, seed);
  return m;
}

double mse(std::span<const double> predictions, std::span<const double> truths) {
  if (predictions.size() != truths.size()) throw std::invalid_argument("mse: length mismatch");
  if (predictions.empty()) throw std::invalid_argument("mse: empty input");
  double s = 0.0;
  for (std::size_t i = 0; i < truths.size(); ++i) s += (predictions[i] - truths[i]) * (predictions[i] - truths[i]);
  return s / double(truths.size());
}

double mse(const Vector& predictions, const Vector& truths) {
  return mse(std::span<const double>(predictions.data(), static_cast<std::size_t>(predictions.size())),
             std::span<const double>(truths.data(), static_cast<std::size_t>(truths.size())));
}

nlohmann::json to_json(const ForestModel& model) {
  const auto& pre = model.preprocessor;
  const auto& rf = model.forest;
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& t : rf.trees)
    trees.push_back({{"feature", t.feature},
                     {"threshold", t.threshold},
                     {"left", t.left},
                     {"right", t.right},
                     {"value", t.value}});
  return {
      {"format", "dynas.forest"},
      {"version", kModelVersion},
      {"preprocessor",
       {{"n_inputs", pre.n_inputs},
        {"kept", pre.kept},
        {"kept_names", pre.kept_names},
        {"medians", vec_json(pre.medians)},
        {"means", vec_json(pre.means)},
        {"stds", vec_json(pre.stds)}}},
      {"hyper",
       {{"n_trees", rf.hyper.n_trees},
        {"max_features", rf.hyper.max_features},
        {"min_leaf", rf.hyper.min_leaf},
        {"bootstrap", rf.hyper.bootstrap}}},
      {"seed", rf.seed},
      {"n_features", rf.n_features},
      {"trees", trees},
  };
}

ForestModel model_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format") != "dynas.forest") throw DecodeError("not a forest model");
    if (j.at("version").get<int>() != kModelVersion)
      throw DecodeError("unsupported forest model version " + j.at("version").dump());
    ForestModel m;
    const auto& p = j.at("preprocessor");
    m.preprocessor.n_inputs = p.at("n_inputs").get<std::size_t>();
    m.preprocessor.kept = p.at("kept").get<std::vector<int>>();
    m.preprocessor.kept_names = p.at("kept_names").get<std::vector<std::string>>();
    m.preprocessor.medians = json_vec(p.at("medians"));
    m.preprocessor.means = json_vec(p.at("means"));
    m.preprocessor.stds = json_vec(p.at("stds"));
    const auto& h = j.at("hyper");
    m.forest.hyper.n_trees = h.at("n_trees").get<int>();
    m.forest.hyper.max_features = h.at("max_features").get<int>();
    m.forest.hyper.min_leaf = h.at("min_leaf").get<int>();
    m.forest.hyper.bootstrap = h.at("bootstrap").get<bool>();
    m.forest.seed = j.at("seed").get<std::uint64_t>();
    m.forest.n_features = j.at("n_features").get<int>();
    for (const auto& t : j.at("trees")) {
      RegressionTree tree;
      tree.feature = t.at("feature").get<std::vector<int>>();
      tree.threshold = t.at("threshold").get<std::vector<double>>();
      tree.left = t.at("left").get<std::vector<int>>();
      tree.right = t.at("right").get<std::vector<int>>();
      tree.value = t.at("value").get<std::vector<double>>();
      const auto nn = tree.feature.size();
      if (nn == 0 || tree.threshold.size() != nn || tree.left.size() != nn || tree.right.size() != nn ||
          tree.value.size() != nn)
        throw DecodeError("tree arrays disagree in length");
      for (std::size_t k = 0; k < nn; ++k)
        if (tree.feature[k] >= 0 &&
            (tree.feature[k] >= m.forest.n_features || tree.left[k] <= int(k) || tree.right[k] <= int(k) ||
             tree.left[k] >= int(nn) || tree.right[k] >= int(nn)))
          throw DecodeError("tree node " + std::to_string(k) + " is malformed");
      m.forest.trees.push_back(std::move(tree));
    }
    return m;
  } catch (const DecodeError&) {
    throw;
  } catch (const std::exception& e) {
    throw DecodeError(std::string("corrupt forest model: ") + e.what());
  }
}

}  // namespace dynas::forest
