#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dynas/common.hpp"
#include "dynas/trajectory.hpp"

namespace dynas::features {

using trajectory::Sample;

/// Identifies the feature list below; stored alongside feature tables so a
/// reader can reject data computed with a different set.
inline constexpr std::string_view kFeatureSetVersion = "core48-v1";

inline constexpr std::size_t kNumDistr = 3;
inline constexpr std::size_t kNumMeta = 9;
inline constexpr std::size_t kNumDisp = 16;
inline constexpr std::size_t kNumNbc = 5;
inline constexpr std::size_t kNumIc = 5;
inline constexpr std::size_t kNumPca = 8;
inline constexpr std::size_t kNumDiversity = 2;
inline constexpr std::size_t kNumFeatures =
    kNumDistr + kNumMeta + kNumDisp + kNumNbc + kNumIc + kNumPca + kNumDiversity;

/// Canonical feature order: distr, meta, disp, nbc, ic, pca, diversity.
const std::vector<std::string>& feature_names();

// Each group returns its values in canonical order. Values are finite or
// NaN, never infinite.
std::vector<double> ela_distr(const Sample& s);
std::vector<double> ela_meta(const Sample& s);
std::vector<double> disp(const Sample& s);
std::vector<double> nbc(const Sample& s);
std::vector<double> ic(const Sample& s);
std::vector<double> pca(const Sample& s);
std::vector<double> diversity(const Sample& s);

/// All groups concatenated (kNumFeatures values).
std::vector<double> compute_all(const Sample& s);

// Building blocks, exposed for testing.

/// Adjusted Fisher-Pearson skewness G1; NaN for constant y or n < 3.
double skewness(std::span<const double> y);
/// Bias-corrected excess kurtosis G2; NaN for constant y or n < 4.
double kurtosis(std::span<const double> y);
/// Local maxima of a Gaussian KDE (Silverman bandwidth, 128-point grid)
/// above 10% of the highest density.
int kde_peak_count(std::span<const double> y);

struct NearestBetter {
  std::vector<double> nn;        // distance to nearest other point
  std::vector<double> nb;        // distance to nearest strictly better point
  std::vector<int> nb_index;     // -1 when no better point exists
  std::vector<int> indegree;     // how many points use i as nearest better
};
NearestBetter nearest_better(const Sample& s);

/// Greedy nearest-neighbour tour from row 0 (ties go to the lowest index).
std::vector<int> nearest_neighbor_tour(const Matrix& X);
/// Base-6 entropy of unequal adjacent symbol pairs at threshold eps.
double ic_entropy(std::span<const double> slopes, double eps);
/// Fraction of symbols left after dropping zeros and collapsing repeats.
double ic_partial_information(std::span<const double> slopes, double eps);
/// Slopes (y_{i+1} - y_i) / |x_{i+1} - x_i| along the tour, after dropping
/// duplicate points.
std::vector<double> ic_slopes(const Sample& s);

struct Provenance {
  std::string run_id;
  std::size_t switch_point = 0;
  std::size_t window = 0;
};

struct FeatureVector {
  Provenance provenance;
  std::vector<double> values;  // aligned with feature_names()

  double value(std::string_view name) const;
};

inline const std::vector<std::size_t> kDefaultWindows = {50, 150, 250};

/// One vector per window size that fits before `switch_point`.
std::vector<FeatureVector> extract_all(const trajectory::Archive& archive, std::size_t switch_point,
                                       const std::vector<std::size_t>& window_sizes = kDefaultWindows);

}  // namespace dynas::features
