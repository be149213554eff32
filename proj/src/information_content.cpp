#include <algorithm>
#include <cmath>
#include <limits>

#include "dynas/features.hpp"

namespace dynas::features {

namespace {

constexpr int kEpsGridSize = 1000;
constexpr double kEpsLow = 1e-5;
constexpr double kFlatEntropy = 0.05;
constexpr std::size_t kMinPoints = 10;

int symbol(double slope, double eps) {
  if (slope > eps) return 1;
  if (slope < -eps) return -1;
  return 0;
}

// Keeps the first occurrence of every distinct row.
std::vector<int> unique_rows(const Matrix& X) {
  std::vector<int> keep;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    bool dup = false;
    for (int k : keep)
      if (X.row(k) == X.row(i)) {
        dup = true;
        break;
      }
    if (!dup) keep.push_back(static_cast<int>(i));
  }
  return keep;
}

struct Tour {
  std::vector<double> slopes;
  double max_dy = 0.0;
  double min_step = std::numeric_limits<double>::infinity();
};

Tour build_tour(const Sample& s) {
  const auto keep = unique_rows(s.X);
  Matrix X(static_cast<Eigen::Index>(keep.size()), s.X.cols());
  Vector y(static_cast<Eigen::Index>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k) {
    X.row(static_cast<Eigen::Index>(k)) = s.X.row(keep[k]);
    y[static_cast<Eigen::Index>(k)] = s.y[keep[k]];
  }
  Tour t;
  if (keep.size() < 2) return t;
  const auto order = nearest_neighbor_tour(X);
  for (std::size_t i = 0; i + 1 < order.size(); ++i) {
    const double step = (X.row(order[i + 1]) - X.row(order[i])).norm();
    const double dy = y[order[i + 1]] - y[order[i]];
    t.slopes.push_back(dy / step);
    t.max_dy = std::max(t.max_dy, std::abs(dy));
    t.min_step = std::min(t.min_step, step);
  }
  return t;
}

}  // namespace

std::vector<int> nearest_neighbor_tour(const Matrix& X) {
  const auto n = static_cast<int>(X.rows());
  std::vector<int> order;
  if (n == 0) return order;
  std::vector<bool> used(n, false);
  int cur = 0;
  used[0] = true;
  order.push_back(0);
  for (int step = 1; step < n; ++step) {
    int next = -1;
    double best = std::numeric_limits<double>::infinity();
    for (int j = 0; j < n; ++j) {
      if (used[j]) continue;
      const double d = (X.row(j) - X.row(cur)).squaredNorm();
      if (d < best) {
        best = d;
        next = j;
      }
    }
    used[next] = true;
    order.push_back(next);
    cur = next;
  }
  return order;
}

std::vector<double> ic_slopes(const Sample& s) { return build_tour(s).slopes; }

double ic_entropy(std::span<const double> slopes, double eps) {
  if (slopes.size() < 2) return 0.0;
  int counts[3][3] = {};
  int prev = symbol(slopes[0], eps);
  for (std::size_t i = 1; i < slopes.size(); ++i) {
    const int cur = symbol(slopes[i], eps);
    if (cur != prev) ++counts[prev + 1][cur + 1];
    prev = cur;
  }
  const double total = double(slopes.size() - 1);
  double h = 0.0;
  for (const auto& row : counts)
    for (int c : row)
      if (c > 0) {
        const double p = c / total;
        h -= p * std::log(p) / std::log(6.0);
      }
  return h;
}

double ic_partial_information(std::span<const double> slopes, double eps) {
  if (slopes.empty()) return kNaN;
  int last = 0;
  int len = 0;
  for (double v : slopes) {
    const int sym = symbol(v, eps);
    if (sym != 0 && sym != last) {
      ++len;
      last = sym;
    }
  }
  return double(len) / double(slopes.size());
}

std::vector<double> ic(const Sample& s) {
  std::vector<double> out(kNumIc, kNaN);
  if (unique_rows(s.X).size() < kMinPoints) return out;
  const auto tour = build_tour(s);
  const auto& phi = tour.slopes;

  const double hi = std::max(tour.max_dy / tour.min_step, 1e-4);
  std::vector<double> grid = {0.0};
  const double lo_log = std::log10(kEpsLow), hi_log = std::log10(hi);
  for (int k = 0; k < kEpsGridSize; ++k)
    grid.push_back(std::pow(10.0, lo_log + (hi_log - lo_log) * k / double(kEpsGridSize - 1)));

  double h_max = -1.0, eps_max = kNaN, eps_s = kNaN, eps_ratio = kNaN;
  const double m0 = ic_partial_information(phi, 0.0);
  for (double eps : grid) {
    const double h = ic_entropy(phi, eps);
    if (h > h_max) {
      h_max = h;
      eps_max = eps;
    }
    if (eps > 0.0 && std::isnan(eps_s) && h < kFlatEntropy) eps_s = eps;
    if (eps > 0.0 && ic_partial_information(phi, eps) > 0.5 * m0) eps_ratio = eps;
  }
  out[0] = h_max;
  out[1] = std::isnan(eps_s) ? kNaN : std::log10(eps_s);
  out[2] = eps_max;
  out[3] = std::isnan(eps_ratio) ? kNaN : std::log10(eps_ratio);
  out[4] = m0;
  for (double& v : out)
    if (!std::isfinite(v)) v = kNaN;
  return out;
}

}  // namespace dynas::features
