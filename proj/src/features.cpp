#include "dynas/features.hpp"

#include <algorithm>
#include <array>
#include <limits>
#include <optional>
#include <cmath>
#include <numeric>

namespace dynas::features {

namespace {

constexpr double kSqrt2Pi = 2.5066282746310002;
constexpr int kKdeGrid = 128;
constexpr double kKdePeakFraction = 0.1;
constexpr std::array<double, 4> kDispQuantiles = {0.02, 0.05, 0.10, 0.25};
constexpr std::array<const char*, 4> kDispTags = {"02", "05", "10", "25"};

double finite_or_nan(double v) { return std::isfinite(v) ? v : kNaN; }

void sanitize(std::vector<double>& v) {
  for (double& x : v) x = finite_or_nan(x);
}

double mean(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
}

double sample_sd(std::span<const double> v) {
  if (v.size() < 2) return kNaN;
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / double(v.size() - 1));
}

double pearson(std::span<const double> a, std::span<const double> b) {
  const double ma = mean(a), mb = mean(b);
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return kNaN;
  return sab / std::sqrt(saa * sbb);
}

double median_of(std::vector<double> v) {
  if (v.empty()) return kNaN;
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  const double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + mid);
  return 0.5 * (lo + hi);
}

// R's type-7 quantile on sorted data.
double quantile_sorted(const std::vector<double>& sorted, double p) {
  const double h = (double(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - double(lo)) * (sorted[hi] - sorted[lo]);
}

std::span<const double> as_span(const Vector& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

bool is_constant(std::span<const double> y) {
  if (y.empty()) return true;
  const auto [lo, hi] = std::minmax_element(y.begin(), y.end());
  return *lo == *hi;
}

Matrix pairwise_distances(const Matrix& X) {
  const auto n = X.rows();
  Matrix D = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) D(i, j) = D(j, i) = (X.row(i) - X.row(j)).norm();
  return D;
}

// Sample rows ordered by fitness, ties by row index.
std::vector<int> fitness_order(const Vector& y) {
  std::vector<int> order(static_cast<std::size_t>(y.size()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return y[a] < y[b]; });
  return order;
}

struct OlsFit {
  double adj_r2 = kNaN;
  Vector coef;  // empty when the fit is undefined
};

OlsFit ols(const Matrix& design, const Vector& y) {
  OlsFit out;
  const auto n = design.rows();
  const auto p = design.cols();
  if (n <= p) return out;
  Eigen::ColPivHouseholderQR<Matrix> qr(design);
  if (qr.rank() < p) return out;
  out.coef = qr.solve(y);
  const double ymean = y.mean();
  const double sst = (y.array() - ymean).square().sum();
  const double sse = (y - design * out.coef).squaredNorm();
  if (sst > 0.0) {
    const double r2 = 1.0 - sse / sst;
    out.adj_r2 = 1.0 - (1.0 - r2) * double(n - 1) / double(n - p);
  }
  return out;
}

std::vector<double> disp_from(const Sample& s, const Matrix& D) {
  std::vector<double> out(kNumDisp, kNaN);
  const auto n = static_cast<std::size_t>(s.X.rows());
  if (n < 8) return out;

  auto pair_stats = [&](const std::vector<int>& idx) {
    std::vector<double> d;
    d.reserve(idx.size() * (idx.size() - 1) / 2);
    for (std::size_t a = 0; a < idx.size(); ++a)
      for (std::size_t b = a + 1; b < idx.size(); ++b) d.push_back(D(idx[a], idx[b]));
    const double m = mean(d);
    return std::pair{m, median_of(std::move(d))};
  };

  std::vector<int> all(n);
  std::iota(all.begin(), all.end(), 0);
  const auto [full_mean, full_median] = pair_stats(all);
  const auto order = fitness_order(s.y);

  for (std::size_t q = 0; q < kDispQuantiles.size(); ++q) {
    auto k = static_cast<std::size_t>(std::ceil(kDispQuantiles[q] * double(n) - 1e-9));
    k = std::clamp<std::size_t>(k, 2, n);
    std::vector<int> best(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
    const auto [sub_mean, sub_median] = pair_stats(best);
    out[q] = sub_mean / full_mean;
    out[4 + q] = sub_median / full_median;
    out[8 + q] = sub_mean - full_mean;
    out[12 + q] = sub_median - full_median;
  }
  sanitize(out);
  return out;
}

NearestBetter nearest_better_from(const Vector& y, const Matrix& D) {
  const auto n = static_cast<int>(y.size());
  NearestBetter nb;
  nb.nn.assign(n, kNaN);
  nb.nb.assign(n, kNaN);
  nb.nb_index.assign(n, -1);
  nb.indegree.assign(n, 0);
  for (int i = 0; i < n; ++i) {
    double best_nn = std::numeric_limits<double>::infinity();
    double best_nb = std::numeric_limits<double>::infinity();
    double farthest = 0.0;
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      const double d = D(i, j);
      if (d < best_nn) best_nn = d;
      if (d > farthest) farthest = d;
      if (y[j] < y[i] && d < best_nb) {
        best_nb = d;
        nb.nb_index[i] = j;
      }
    }
    nb.nn[i] = best_nn;
    nb.nb[i] = nb.nb_index[i] >= 0 ? best_nb : farthest;
    if (nb.nb_index[i] >= 0) ++nb.indegree[nb.nb_index[i]];
  }
  return nb;
}

std::vector<double> nbc_from(const Sample& s, const Matrix& D) {
  std::vector<double> out(kNumNbc, kNaN);
  const auto n = s.X.rows();
  if (n < 3) return out;
  const auto nb = nearest_better_from(s.y, D);
  if (std::all_of(nb.nb_index.begin(), nb.nb_index.end(), [](int j) { return j < 0; })) return out;

  std::vector<double> ratio(nb.nn.size());
  for (std::size_t i = 0; i < ratio.size(); ++i) ratio[i] = nb.nn[i] / nb.nb[i];
  std::vector<double> indeg(nb.indegree.begin(), nb.indegree.end());

  out[0] = sample_sd(nb.nn) / sample_sd(nb.nb);
  out[1] = mean(nb.nn) / mean(nb.nb);
  out[2] = pearson(nb.nn, nb.nb);
  out[3] = sample_sd(ratio) / mean(ratio);
  out[4] = pearson(indeg, as_span(s.y));
  sanitize(out);
  return out;
}

// Number of leading eigenvalues reaching 90% of the total, as a fraction of
// the matrix size, and the share of the first eigenvalue.
std::pair<double, double> explained_variance(const Matrix& M) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(M, Eigen::EigenvaluesOnly);
  Vector ev = es.eigenvalues().reverse().cwiseMax(0.0);
  const double total = ev.sum();
  if (!(total > 0.0)) return {kNaN, kNaN};
  double cum = 0.0;
  Eigen::Index k = 0;
  while (k < ev.size()) {
    cum += ev[k++];
    if (cum / total >= 0.9) break;
  }
  return {double(k) / double(ev.size()), ev[0] / total};
}

Matrix covariance(const Matrix& A) {
  Matrix c = A.rowwise() - A.colwise().mean();
  return (c.transpose() * c) / double(A.rows() - 1);
}

std::optional<Matrix> correlation(const Matrix& A) {
  Matrix cov = covariance(A);
  Vector sd = cov.diagonal().cwiseSqrt();
  for (Eigen::Index j = 0; j < A.cols(); ++j) {
    const auto col = A.col(j);
    if (col.maxCoeff() == col.minCoeff() || !(sd[j] > 0)) return std::nullopt;
  }
  return (sd.cwiseInverse().asDiagonal() * cov * sd.cwiseInverse().asDiagonal()).eval();
}

}  // namespace

const std::vector<std::string>& feature_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v = {
        "ela_distr.skewness",
        "ela_distr.kurtosis",
        "ela_distr.number_of_peaks",
        "ela_meta.lin_simple.adj_r2",
        "ela_meta.lin_simple.intercept",
        "ela_meta.lin_simple.coef.min",
        "ela_meta.lin_simple.coef.max",
        "ela_meta.lin_simple.coef.max_by_min",
        "ela_meta.lin_w_interact.adj_r2",
        "ela_meta.quad_simple.adj_r2",
        "ela_meta.quad_simple.cond",
        "ela_meta.quad_w_interact.adj_r2",
    };
    for (const char* stat : {"ratio_mean", "ratio_median", "diff_mean", "diff_median"})
      for (const char* q : kDispTags) v.push_back(std::string("disp.") + stat + "_" + q);
    for (const char* n : {"nbc.nn_nb.sd_ratio", "nbc.nn_nb.mean_ratio", "nbc.nn_nb.cor",
                          "nbc.dist_ratio.coeff_var", "nbc.nb_fitness.cor"})
      v.emplace_back(n);
    for (const char* n : {"ic.h_max", "ic.eps_s", "ic.eps_max", "ic.eps_ratio", "ic.m0"}) v.emplace_back(n);
    for (const char* n : {"pca.expl_var.cov_x", "pca.expl_var.cor_x", "pca.expl_var.cov_init",
                          "pca.expl_var.cor_init", "pca.expl_var_PC1.cov_x", "pca.expl_var_PC1.cor_x",
                          "pca.expl_var_PC1.cov_init", "pca.expl_var_PC1.cor_init"})
      v.emplace_back(n);
    v.emplace_back("pop_div");
    v.emplace_back("fit_div");
    return v;
  }();
  return names;
}

double skewness(std::span<const double> y) {
  const auto n = double(y.size());
  if (y.size() < 3 || is_constant(y)) return kNaN;
  const double m = mean(y);
  double m2 = 0, m3 = 0;
  for (double v : y) {
    const double d = v - m;
    m2 += d * d;
    m3 += d * d * d;
  }
  m2 /= n;
  m3 /= n;
  const double g1 = m3 / std::pow(m2, 1.5);
  return finite_or_nan(g1 * std::sqrt(n * (n - 1.0)) / (n - 2.0));
}

double kurtosis(std::span<const double> y) {
  const auto n = double(y.size());
  if (y.size() < 4 || is_constant(y)) return kNaN;
  const double m = mean(y);
  double m2 = 0, m4 = 0;
  for (double v : y) {
    const double d2 = (v - m) * (v - m);
    m2 += d2;
    m4 += d2 * d2;
  }
  m2 /= n;
  m4 /= n;
  const double g2 = m4 / (m2 * m2) - 3.0;
  return finite_or_nan(((n + 1.0) * g2 + 6.0) * (n - 1.0) / ((n - 2.0) * (n - 3.0)));
}

int kde_peak_count(std::span<const double> y) {
  if (y.empty()) return 0;
  std::vector<double> sorted(y.begin(), y.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = double(y.size());

  // Silverman's rule of thumb (R's bw.nrd0).
  const double sd = sample_sd(y);
  const double iqr = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
  double lo = std::min(std::isfinite(sd) ? sd : 0.0, iqr / 1.34);
  if (!(lo > 0)) lo = std::isfinite(sd) && sd > 0 ? sd : 0.0;
  if (!(lo > 0)) lo = std::abs(sorted.front());
  if (!(lo > 0)) lo = 1.0;
  const double h = 0.9 * lo * std::pow(n, -0.2);

  const double g0 = sorted.front() - 3.0 * h;
  const double step = (sorted.back() + 3.0 * h - g0) / double(kKdeGrid - 1);
  std::vector<double> dens(kKdeGrid, 0.0);
  for (int k = 0; k < kKdeGrid; ++k) {
    const double g = g0 + step * k;
    double s = 0.0;
    for (double v : sorted) {
      const double u = (g - v) / h;
      s += std::exp(-0.5 * u * u);
    }
    dens[k] = s / (n * h * kSqrt2Pi);
  }
  const double top = *std::max_element(dens.begin(), dens.end());
  int peaks = 0;
  for (int k = 0; k < kKdeGrid; ++k) {
    const bool left = k == 0 || dens[k] > dens[k - 1];
    const bool right = k == kKdeGrid - 1 || dens[k] >= dens[k + 1];
    if (left && right && dens[k] > kKdePeakFraction * top) ++peaks;
  }
  return peaks;
}

std::vector<double> ela_distr(const Sample& s) {
  const auto y = as_span(s.y);
  std::vector<double> out = {skewness(y), kurtosis(y), double(kde_peak_count(y))};
  sanitize(out);
  return out;
}

std::vector<double> ela_meta(const Sample& s) {
  std::vector<double> out(kNumMeta, kNaN);
  const auto n = s.X.rows();
  const auto d = s.X.cols();
  const Matrix& X = s.X;

  Matrix lin(n, 1 + d);
  lin.col(0).setOnes();
  lin.rightCols(d) = X;

  const auto n_inter = d * (d - 1) / 2;
  Matrix inter(n, n_inter);
  for (Eigen::Index a = 0, c = 0; a < d; ++a)
    for (Eigen::Index b = a + 1; b < d; ++b, ++c) inter.col(c) = X.col(a).cwiseProduct(X.col(b));
  const Matrix sq = X.array().square().matrix();

  auto fit = ols(lin, s.y);
  if (fit.coef.size()) {
    const Vector mag = fit.coef.tail(d).cwiseAbs();
    out[0] = fit.adj_r2;
    out[1] = fit.coef[0];
    out[2] = mag.minCoeff();
    out[3] = mag.maxCoeff();
    out[4] = mag.maxCoeff() / mag.minCoeff();
  }

  Matrix lin_inter(n, 1 + d + n_inter);
  lin_inter << lin, inter;
  out[5] = ols(lin_inter, s.y).adj_r2;

  Matrix quad(n, 1 + 2 * d);
  quad << lin, sq;
  auto qfit = ols(quad, s.y);
  out[6] = qfit.adj_r2;
  if (qfit.coef.size()) {
    const Vector q = qfit.coef.tail(d).cwiseAbs();
    out[7] = q.maxCoeff() / q.minCoeff();
  }

  Matrix quad_inter(n, 1 + 2 * d + n_inter);
  quad_inter << lin, sq, inter;
  out[8] = ols(quad_inter, s.y).adj_r2;

  sanitize(out);
  return out;
}

std::vector<double> disp(const Sample& s) { return disp_from(s, pairwise_distances(s.X)); }

NearestBetter nearest_better(const Sample& s) { return nearest_better_from(s.y, pairwise_distances(s.X)); }

std::vector<double> nbc(const Sample& s) { return nbc_from(s, pairwise_distances(s.X)); }

std::vector<double> pca(const Sample& s) {
  std::vector<double> out(kNumPca, kNaN);
  const auto n = s.X.rows();
  const auto d = s.X.cols();
  if (n <= d + 1) return out;
  Matrix init(n, d + 1);
  init << s.X, s.y;

  const auto cov_x = explained_variance(covariance(s.X));
  const auto cov_init = explained_variance(covariance(init));
  out[0] = cov_x.first;
  out[2] = cov_init.first;
  out[4] = cov_x.second;
  out[6] = cov_init.second;
  if (auto c = correlation(s.X)) {
    const auto r = explained_variance(*c);
    out[1] = r.first;
    out[5] = r.second;
  }
  if (auto c = correlation(init)) {
    const auto r = explained_variance(*c);
    out[3] = r.first;
    out[7] = r.second;
  }
  sanitize(out);
  return out;
}

std::vector<double> diversity(const Sample& s) {
  std::vector<double> out(kNumDiversity, kNaN);
  if (s.X.rows() < 2) return out;
  double total = 0.0;
  for (Eigen::Index j = 0; j < s.X.cols(); ++j) {
    const Vector col = s.X.col(j);
    total += sample_sd(as_span(col));
  }
  out[0] = total / double(s.X.cols());
  out[1] = sample_sd(as_span(s.y));
  sanitize(out);
  return out;
}

std::vector<double> compute_all(const Sample& s) {
  const Matrix D = pairwise_distances(s.X);
  std::vector<double> out;
  out.reserve(kNumFeatures);
  auto append = [&](const std::vector<double>& v) { out.insert(out.end(), v.begin(), v.end()); };
  append(ela_distr(s));
  append(ela_meta(s));
  append(disp_from(s, D));
  append(nbc_from(s, D));
  append(ic(s));
  append(pca(s));
  append(diversity(s));
  return out;
}

double FeatureVector::value(std::string_view name) const {
  const auto& names = feature_names();
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return values.at(i);
  throw std::invalid_argument("unknown feature '" + std::string(name) + "'");
}

std::vector<FeatureVector> extract_all(const trajectory::Archive& archive, std::size_t switch_point,
                                       const std::vector<std::size_t>& window_sizes) {
  if (switch_point > archive.size()) throw std::out_of_range("extract_all: switch point beyond archive");
  std::vector<FeatureVector> out;
  for (std::size_t w : window_sizes) {
    if (w == 0 || w > switch_point) continue;
    FeatureVector fv;
    fv.provenance = {archive.meta().run_id, switch_point, w};
    fv.values = compute_all(trajectory::window(archive, switch_point, w));
    out.push_back(std::move(fv));
  }
  return out;
}

}  // namespace dynas::features
