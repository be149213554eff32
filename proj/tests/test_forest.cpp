#include <cmath>
#include <memory>

#include "doctest.h"
#include "dynas/forest.hpp"

using namespace dynas;
using namespace dynas::forest;

namespace {

// Exhaustive CART: try every midpoint of every feature and keep the lowest
// SSE, ties broken by the first candidate found.
struct OracleNode {
  int feature = -1;
  double threshold = 0.0;
  double value = 0.0;
  std::unique_ptr<OracleNode> left, right;
};

double sse(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double m = 0.0;
  for (double x : v) m += x;
  m /= double(v.size());
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s;
}

std::unique_ptr<OracleNode> oracle_grow(const Matrix& X, const Vector& y, const std::vector<int>& rows) {
  auto node = std::make_unique<OracleNode>();
  std::vector<double> ys;
  for (int i : rows) ys.push_back(y[i]);
  double mean = 0.0;
  for (double v : ys) mean += v;
  node->value = mean / double(ys.size());
  if (sse(ys) == 0.0 || rows.size() < 2) return node;

  double best = std::numeric_limits<double>::infinity();
  for (int j = 0; j < X.cols(); ++j) {
    std::vector<double> vals;
    for (int i : rows) vals.push_back(X(i, j));
    std::sort(vals.begin(), vals.end());
    vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
    for (std::size_t k = 0; k + 1 < vals.size(); ++k) {
      const double thr = 0.5 * (vals[k] + vals[k + 1]);
      std::vector<double> l, r;
      for (int i : rows) (X(i, j) <= thr ? l : r).push_back(y[i]);
      const double s = sse(l) + sse(r);
      if (s < best - 1e-9 * std::max(1.0, sse(ys))) {
        best = s;
        node->feature = j;
        node->threshold = thr;
      }
    }
  }
  if (node->feature < 0) return node;
  std::vector<int> l, r;
  for (int i : rows) (X(i, node->feature) <= node->threshold ? l : r).push_back(i);
  node->left = oracle_grow(X, y, l);
  node->right = oracle_grow(X, y, r);
  return node;
}

double oracle_predict(const OracleNode& n, const Vector& x) {
  if (n.feature < 0) return n.value;
  return oracle_predict(x[n.feature] <= n.threshold ? *n.left : *n.right, x);
}

Matrix random_matrix(int n, int p, std::uint64_t seed) {
  Rng rng(seed);
  Matrix X(n, p);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < p; ++j) X(i, j) = uniform(rng, -1, 1);
  return X;
}

Vector target(const Matrix& X) {
  Vector y(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) y[i] = std::sin(3 * X(i, 0)) + X(i, 1) * X(i, 1) + 0.1 * X(i, 2);
  return y;
}

}  // namespace

TEST_CASE("single unbagged tree equals exhaustive CART") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const Matrix X = random_matrix(60, 4, seed);
    const Vector y = target(X);
    ForestHyper h;
    h.n_trees = 1;
    h.bootstrap = false;
    const auto rf = fit_forest(X, y, h, 7);
    std::vector<int> all(60);
    std::iota(all.begin(), all.end(), 0);
    const auto oracle = oracle_grow(X, y, all);
    const Matrix T = random_matrix(200, 4, seed + 100);
    const Vector pred = rf.predict(T);
    for (Eigen::Index i = 0; i < T.rows(); ++i) CHECK(pred[i] == doctest::Approx(oracle_predict(*oracle, T.row(i).transpose())));
  }
}

TEST_CASE("min_leaf is respected") {
  const Matrix X = random_matrix(80, 3, 4);
  const Vector y = target(X);
  ForestHyper h;
  h.n_trees = 1;
  h.bootstrap = false;
  h.min_leaf = 5;
  const auto rf = fit_forest(X, y, h, 1);
  const auto& t = rf.trees[0];
  std::vector<int> count(t.node_count(), 0);
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    int node = 0;
    while (t.feature[node] >= 0) node = X(i, t.feature[node]) <= t.threshold[node] ? t.left[node] : t.right[node];
    ++count[node];
  }
  for (std::size_t k = 0; k < t.node_count(); ++k)
    if (t.feature[k] < 0) CHECK(count[k] >= 5);
}

TEST_CASE("distinct inputs are fitted exactly without bagging") {
  const Matrix X = random_matrix(100, 3, 9);
  const Vector y = target(X);
  ForestHyper h;
  h.n_trees = 5;
  h.bootstrap = false;
  const auto rf = fit_forest(X, y, h, 3);
  CHECK(mse(rf.predict(X), y) < 1e-24);
}

TEST_CASE("forest beats the mean on a learnable target") {
  const Matrix X = random_matrix(400, 5, 10);
  const Vector y = target(X);
  const Matrix T = random_matrix(200, 5, 11);
  const Vector yt = target(T);
  ForestHyper h;
  h.n_trees = 50;
  const auto rf = fit_forest(X, y, h, 1);
  const double base = mse(Vector::Constant(yt.size(), y.mean()), yt);
  CHECK(mse(rf.predict(T), yt) < 0.3 * base);
}

TEST_CASE("forest is deterministic and independent of worker count") {
  const Matrix X = random_matrix(120, 4, 5);
  const Vector y = target(X);
  ForestHyper h;
  h.n_trees = 20;
  h.max_features = 2;
  const auto a = fit_forest(X, y, h, 42);
  h.workers = 4;
  const auto b = fit_forest(X, y, h, 42);
  const auto c = fit_forest(X, y, h, 43);
  const Matrix T = random_matrix(50, 4, 6);
  CHECK(a.predict(T) == b.predict(T));
  CHECK(a.predict(T) != c.predict(T));
}

TEST_CASE("forest argument checks") {
  const Matrix X = random_matrix(10, 2, 1);
  Vector y = Vector::Zero(10);
  CHECK_THROWS_AS(fit_forest(X, Vector::Zero(9), {}, 1), std::invalid_argument);
  Matrix bad = X;
  bad(0, 0) = kNaN;
  CHECK_THROWS_AS(fit_forest(bad, y, {}, 1), std::invalid_argument);
  ForestHyper h;
  h.n_trees = 0;
  CHECK_THROWS_AS(fit_forest(X, y, h, 1), std::invalid_argument);
  const auto rf = fit_forest(X, y, {}, 1);
  CHECK_THROWS_AS(rf.predict(Matrix::Zero(2, 3)), std::invalid_argument);
  CHECK(rf.predict(X) == Vector::Zero(10));
}

TEST_CASE("preprocessor drops, imputes and scales") {
  Matrix X(10, 4);
  for (int i = 0; i < 10; ++i) X.row(i) << i, 3.0, (i == 0 ? 1.0 : kNaN), (i % 2 ? kNaN : double(i));
  const auto pre = fit_preprocessor(X, {"a", "b", "c", "d"});
  CHECK(pre.kept == std::vector<int>{0, 3});
  CHECK(pre.kept_names == std::vector<std::string>{"a", "d"});
  // column d: observed 0,2,4,6,8 -> median 4, imputed column mean 4
  CHECK(pre.medians[1] == 4.0);
  CHECK(pre.means[1] == 4.0);
  CHECK(pre.means[0] == 4.5);
  CHECK(pre.stds[0] == doctest::Approx(std::sqrt(8.25)));
  const Matrix Z = pre.transform(X);
  CHECK(Z.cols() == 2);
  CHECK(Z.col(0).mean() == doctest::Approx(0.0).epsilon(1e-12));
  CHECK((Z.col(0).array().square().mean()) == doctest::Approx(1.0));
  CHECK(Z(1, 1) == 0.0);
  CHECK_THROWS_AS(pre.transform(Matrix::Zero(2, 3)), std::invalid_argument);

  Matrix flat = Matrix::Ones(5, 2);
  CHECK_THROWS_AS(fit_preprocessor(flat), DegenerateData);
}

TEST_CASE("preprocessor keeps a column with exactly 90 percent NaN") {
  Matrix X(10, 1);
  X.setConstant(kNaN);
  X(0, 0) = 1.0;
  CHECK_THROWS_AS(fit_preprocessor(X), DegenerateData);  // single value, constant
  Matrix Y(20, 1);
  Y.setConstant(kNaN);
  Y(0, 0) = 1.0;
  Y(1, 0) = 2.0;
  CHECK(fit_preprocessor(Y).kept.size() == 1);
  Matrix Z(21, 1);
  Z.setConstant(kNaN);
  Z(0, 0) = 1.0;
  Z(1, 0) = 2.0;
  CHECK_THROWS_AS(fit_preprocessor(Z), DegenerateData);
}

TEST_CASE("mse examples") {
  CHECK(mse(std::vector<double>{1, 2}, std::vector<double>{1, 4}) == 2.0);
  CHECK(mse(std::vector<double>{0.5}, std::vector<double>{0.5}) == 0.0);
  CHECK_THROWS_AS(mse(std::vector<double>{1}, std::vector<double>{1, 2}), std::invalid_argument);
  CHECK_THROWS_AS(mse(std::vector<double>{}, std::vector<double>{}), std::invalid_argument);
}

TEST_CASE("model JSON round-trip") {
  Matrix X = random_matrix(80, 3, 12);
  X(3, 1) = kNaN;
  const Vector y = target(random_matrix(80, 3, 12));
  ForestHyper h;
  h.n_trees = 10;
  const auto m = fit_model(X, y, h, 77, {"p", "q", "r"});
  const auto j = to_json(m);
  const auto back = model_from_json(nlohmann::json::parse(j.dump()));
  Matrix T = random_matrix(30, 3, 13);
  T(0, 2) = kNaN;
  CHECK(back.predict(T) == m.predict(T));
  CHECK(back.preprocessor.kept_names == m.preprocessor.kept_names);

  auto broken = j;
  broken["version"] = 2;
  CHECK_THROWS_AS(model_from_json(broken), DecodeError);
  broken = j;
  broken["trees"][0]["left"] = nlohmann::json::array();
  CHECK_THROWS_AS(model_from_json(broken), DecodeError);
  CHECK_THROWS_AS(model_from_json(nlohmann::json::object()), DecodeError);
}
