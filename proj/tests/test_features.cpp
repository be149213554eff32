#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "doctest.h"
#include "dynas/features.hpp"

using namespace dynas;
using namespace dynas::features;

namespace {

Sample random_sample(int n, int d, std::uint64_t seed) {
  Rng rng(seed);
  Sample s{Matrix(n, d), Vector(n)};
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) s.X(i, j) = uniform(rng, -5, 5);
    s.y[i] = s.X.row(i).squaredNorm() + 3.0 * std::sin(s.X(i, 0));
  }
  return s;
}

std::size_t idx(std::string_view name) {
  const auto& names = feature_names();
  return static_cast<std::size_t>(std::find(names.begin(), names.end(), name) - names.begin());
}

bool same(double a, double b, double tol) {
  if (std::isnan(a) || std::isnan(b)) return std::isnan(a) && std::isnan(b);
  return std::abs(a - b) <= tol * std::max(1.0, std::abs(a));
}

// Straightforward dispersion oracle: mean pairwise distance of the best
// ceil(q n) points over the mean pairwise distance of all points.
double disp_ratio_mean_oracle(const Sample& s, double q) {
  const int n = static_cast<int>(s.X.rows());
  std::vector<int> ord(n);
  std::iota(ord.begin(), ord.end(), 0);
  std::stable_sort(ord.begin(), ord.end(), [&](int a, int b) { return s.y[a] < s.y[b]; });
  int k = std::max(2, static_cast<int>(std::ceil(q * n - 1e-9)));
  auto mean_dist = [&](int m) {
    double sum = 0;
    int cnt = 0;
    for (int a = 0; a < m; ++a)
      for (int b = a + 1; b < m; ++b, ++cnt) sum += (s.X.row(ord[a]) - s.X.row(ord[b])).norm();
    return sum / cnt;
  };
  return mean_dist(k) / mean_dist(n);
}

}  // namespace

TEST_CASE("feature names are 48 unique entries") {
  const auto& names = feature_names();
  CHECK(names.size() == kNumFeatures);
  CHECK(kNumFeatures == 48);
  CHECK(std::set<std::string>(names.begin(), names.end()).size() == names.size());
  CHECK(names.front() == "ela_distr.skewness");
  CHECK(names.back() == "fit_div");
}

TEST_CASE("skewness and kurtosis match reference values") {
  const std::vector<double> a = {1, 2, 3, 10};
  CHECK(skewness(a) == doctest::Approx(1.763632614803888).epsilon(1e-12));
  CHECK(kurtosis(a) == doctest::Approx(3.2280000000000015).epsilon(1e-12));
  const std::vector<double> b = {0.5, 1.5, -2, 4, 4, 7, 1};
  CHECK(skewness(b) == doctest::Approx(0.2550076213898185).epsilon(1e-12));
  CHECK(kurtosis(b) == doctest::Approx(-0.030618187459911184).epsilon(1e-10));
  const std::vector<double> flat = {2, 2, 2, 2, 2};
  CHECK(std::isnan(skewness(flat)));
  CHECK(std::isnan(kurtosis(flat)));
  CHECK(std::isnan(kurtosis(std::vector<double>{1, 2, 3})));
}

TEST_CASE("KDE peak count") {
  Rng rng(5);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> uni, bi;
  for (int i = 0; i < 200; ++i) uni.push_back(g(rng));
  for (int i = 0; i < 100; ++i) {
    bi.push_back(g(rng));
    bi.push_back(12.0 + g(rng));
  }
  CHECK(kde_peak_count(uni) == 1);
  CHECK(kde_peak_count(bi) == 2);
  CHECK(kde_peak_count(std::vector<double>{3, 3, 3}) == 1);
}

TEST_CASE("meta-model features on exact linear and quadratic data") {
  Rng rng(2);
  Sample lin{Matrix(60, 2), Vector(60)};
  Sample quad{Matrix(60, 2), Vector(60)};
  for (int i = 0; i < 60; ++i) {
    const double x0 = uniform(rng, -5, 5), x1 = uniform(rng, -5, 5);
    lin.X.row(i) << x0, x1;
    quad.X.row(i) << x0, x1;
    lin.y[i] = 2.0 + 3.0 * x0 - 1.0 * x1;
    quad.y[i] = 1.0 + 4.0 * x0 * x0 + 0.5 * x1 * x1;
  }
  const auto m = ela_meta(lin);
  CHECK(m[0] == doctest::Approx(1.0));
  CHECK(m[1] == doctest::Approx(2.0));
  CHECK(m[2] == doctest::Approx(1.0));
  CHECK(m[3] == doctest::Approx(3.0));
  CHECK(m[4] == doctest::Approx(3.0));
  const auto q = ela_meta(quad);
  CHECK(q[6] == doctest::Approx(1.0));
  CHECK(q[7] == doctest::Approx(8.0));
  CHECK(q[8] == doctest::Approx(1.0));
  CHECK(q[0] < 0.9);

  // more coefficients than rows
  const auto small = ela_meta(random_sample(20, 10, 1));
  CHECK(std::isnan(small[8]));
  CHECK(std::isfinite(small[0]));
}

TEST_CASE("dispersion matches a direct computation") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto s = random_sample(80, 3, seed);
    const auto d = disp(s);
    CHECK(d[0] == doctest::Approx(disp_ratio_mean_oracle(s, 0.02)).epsilon(1e-12));
    CHECK(d[1] == doctest::Approx(disp_ratio_mean_oracle(s, 0.05)).epsilon(1e-12));
    CHECK(d[3] == doctest::Approx(disp_ratio_mean_oracle(s, 0.25)).epsilon(1e-12));
  }
  CHECK(std::isnan(disp(random_sample(7, 2, 1))[0]));
}

TEST_CASE("nearest-better features on a monotone line") {
  Sample s{Matrix(4, 1), Vector(4)};
  s.X << 0, 1, 2, 3;
  s.y << 3, 2, 1, 0;
  const auto nb = nearest_better(s);
  CHECK(nb.nn == std::vector<double>{1, 1, 1, 1});
  CHECK(nb.nb == std::vector<double>{1, 1, 1, 3});
  CHECK(nb.nb_index == std::vector<int>{1, 2, 3, -1});
  CHECK(nb.indegree == std::vector<int>{0, 1, 1, 1});
  const auto f = nbc(s);
  CHECK(f[0] == 0.0);
  CHECK(f[1] == doctest::Approx(1.0 / 1.5));
  CHECK(std::isnan(f[2]));
  CHECK(f[3] == doctest::Approx(0.4));
  CHECK(f[4] == doctest::Approx(-1.5 / std::sqrt(3.75)));

  s.y.setConstant(1.0);
  for (double v : nbc(s)) CHECK(std::isnan(v));
}

TEST_CASE("information content building blocks") {
  const std::vector<double> alt = {1, -1, 1, -1, 1};
  CHECK(ic_entropy(alt, 0.0) == doctest::Approx(std::log(2.0) / std::log(6.0)));
  CHECK(ic_entropy(alt, 2.0) == 0.0);
  CHECK(ic_partial_information(alt, 0.0) == 1.0);
  CHECK(ic_partial_information(alt, 2.0) == 0.0);
  const std::vector<double> mixed = {1, 0, 1, -1, -1, 0, 1};
  // symbols at eps 0.5: + 0 + - - 0 +  -> collapsed nonzero: + - +
  CHECK(ic_partial_information(mixed, 0.5) == doctest::Approx(3.0 / 7.0));

  Matrix X(5, 1);
  X << 0, 10, 1, 9, 2;
  CHECK(nearest_neighbor_tour(X) == std::vector<int>{0, 2, 4, 3, 1});
  Matrix tie(3, 1);
  tie << 0, 1, -1;
  CHECK(nearest_neighbor_tour(tie) == std::vector<int>{0, 1, 2});
}

TEST_CASE("information content on a straight line") {
  Sample s{Matrix(12, 1), Vector(12)};
  for (int i = 0; i < 12; ++i) {
    s.X(i, 0) = i;
    s.y[i] = i;
  }
  const auto v = ic(s);
  CHECK(v[0] == 0.0);
  CHECK(v[1] == doctest::Approx(-5.0));
  CHECK(v[2] == 0.0);
  CHECK(v[3] == doctest::Approx(-5.0 + 5.0 * 998.0 / 999.0).epsilon(1e-12));
  CHECK(v[4] == doctest::Approx(1.0 / 11.0));

  // duplicates are dropped before the tour
  Sample dup = s;
  dup.X.conservativeResize(13, 1);
  dup.y.conservativeResize(13);
  dup.X(12, 0) = 5;
  dup.y[12] = 5;
  const auto w = ic(dup);
  for (int k = 0; k < 5; ++k) CHECK(same(w[k], v[k], 1e-12));

  Sample few{s.X.topRows(9), s.y.head(9)};
  for (double x : ic(few)) CHECK(std::isnan(x));
}

TEST_CASE("pca on independent and on collinear inputs") {
  Rng rng(17);
  std::normal_distribution<double> g(0.0, 1.0);
  Sample iso{Matrix(3000, 3), Vector(3000)};
  for (int i = 0; i < 3000; ++i) {
    for (int j = 0; j < 3; ++j) iso.X(i, j) = g(rng);
    iso.y[i] = g(rng);
  }
  const auto p = pca(iso);
  CHECK(p[0] == 1.0);
  CHECK(p[1] == 1.0);
  CHECK(p[4] == doctest::Approx(1.0 / 3.0).epsilon(0.15));
  CHECK(p[6] == doctest::Approx(0.25).epsilon(0.15));

  Sample line{Matrix(100, 3), Vector(100)};
  for (int i = 0; i < 100; ++i) {
    const double t = g(rng);
    line.X.row(i) << t, 2 * t, -t;
    line.y[i] = t;
  }
  const auto q = pca(line);
  CHECK(q[0] == doctest::Approx(1.0 / 3.0));
  CHECK(q[4] == doctest::Approx(1.0));
  CHECK(q[3] == doctest::Approx(0.25));

  Sample flat = line;
  flat.X.col(1).setConstant(4.0);
  const auto r = pca(flat);
  CHECK(std::isnan(r[1]));
  CHECK(std::isfinite(r[0]));
}

TEST_CASE("diversity hand case") {
  Sample s{Matrix(2, 2), Vector(2)};
  s.X << 0, 0, 2, 4;
  s.y << 1, 3;
  const auto d = diversity(s);
  CHECK(d[0] == doctest::Approx(1.5 * std::sqrt(2.0)));
  CHECK(d[1] == doctest::Approx(std::sqrt(2.0)));
}

TEST_CASE("compute_all equals the concatenated groups") {
  const auto s = random_sample(50, 5, 9);
  const auto all = compute_all(s);
  REQUIRE(all.size() == kNumFeatures);
  std::vector<double> cat;
  for (const auto& g : {ela_distr(s), ela_meta(s), disp(s), nbc(s), ic(s), pca(s), diversity(s)})
    cat.insert(cat.end(), g.begin(), g.end());
  for (std::size_t i = 0; i < cat.size(); ++i) CHECK(same(all[i], cat[i], 0.0));
}

TEST_CASE("features are never infinite") {
  std::vector<Sample> cases = {random_sample(50, 5, 1), random_sample(8, 2, 2), random_sample(250, 10, 3)};
  Sample flat = random_sample(50, 3, 4);
  flat.y.setConstant(7.0);
  cases.push_back(flat);
  Sample same_x{Matrix::Ones(30, 3), Vector::LinSpaced(30, 0, 1)};
  cases.push_back(same_x);
  Sample huge = random_sample(50, 3, 5);
  huge.y *= 1e300;
  cases.push_back(huge);
  for (const auto& s : cases)
    for (double v : compute_all(s)) CHECK_FALSE(std::isinf(v));
}

TEST_CASE("rank- and scale-based features are invariant") {
  for (std::uint64_t seed : {11u, 12u}) {
    const auto s = random_sample(60, 4, seed);
    const auto base = compute_all(s);

    Sample scaled = s;
    scaled.X *= 3.5;
    scaled.X.array() += 2.0;
    const auto sc = compute_all(scaled);

    Sample mono = s;
    mono.y = s.y.array().exp().matrix();
    const auto mo = compute_all(mono);

    Sample affine = s;
    affine.y = 4.0 * s.y.array() + 100.0;
    const auto af = compute_all(affine);

    for (const char* n : {"disp.ratio_mean_02", "disp.ratio_mean_25", "disp.ratio_median_10", "nbc.nn_nb.sd_ratio",
                          "nbc.nn_nb.mean_ratio", "nbc.nn_nb.cor", "nbc.dist_ratio.coeff_var"}) {
      INFO(n);
      CHECK(same(sc[idx(n)], base[idx(n)], 1e-9));
      CHECK(same(mo[idx(n)], base[idx(n)], 1e-9));
    }
    for (const char* n : {"ela_distr.skewness", "ela_distr.kurtosis", "ela_distr.number_of_peaks",
                          "ela_meta.lin_simple.adj_r2", "ela_meta.quad_simple.adj_r2", "pca.expl_var.cor_init",
                          "nbc.nb_fitness.cor"}) {
      INFO(n);
      CHECK(same(af[idx(n)], base[idx(n)], 1e-9));
    }
  }
}

TEST_CASE("extract_all uses every window that fits") {
  trajectory::Archive a({"run7", 1, 1, 3, "cma", 0});
  Rng rng(3);
  for (int i = 0; i < 300; ++i) {
    Vector x(3);
    for (int j = 0; j < 3; ++j) x[j] = uniform(rng, -5, 5);
    a.append(x, x.squaredNorm());
  }
  const auto v = extract_all(a, 200);
  REQUIRE(v.size() == 2);
  CHECK(v[0].provenance.window == 50);
  CHECK(v[1].provenance.window == 150);
  CHECK(v[1].provenance.run_id == "run7");
  CHECK(v[1].provenance.switch_point == 200);
  const auto direct = compute_all(trajectory::window(a, 200, 150));
  for (std::size_t i = 0; i < direct.size(); ++i) CHECK(same(v[1].values[i], direct[i], 0.0));
  CHECK(v[0].value("pop_div") == v[0].values[features::kNumFeatures - 2]);
  CHECK(v[0].value("fit_div") == v[0].values.back());
  CHECK_THROWS_AS(v[0].value("nope"), std::invalid_argument);
  CHECK(extract_all(a, 300).size() == 3);
  CHECK(extract_all(a, 40).empty());
  CHECK_THROWS_AS(extract_all(a, 301), std::out_of_range);
}
