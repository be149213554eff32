#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "dynas/common.hpp"

namespace dynas::forest {

/// Column filter, median imputation and z-scoring, fitted on training rows.
struct Preprocessor {
  std::size_t n_inputs = 0;
  std::vector<int> kept;               // input column indices
  std::vector<std::string> kept_names;  // empty if no names were given
  Vector medians;
  Vector means;
  Vector stds;

  /// Selects, imputes and scales; throws std::invalid_argument on a width
  /// mismatch or a non-finite value that survives imputation.
  Matrix transform(const Matrix& X) const;
};

inline constexpr double kMaxNanFraction = 0.9;

/// Drops constant columns and columns with more than 90% NaN. Throws
/// DegenerateData if nothing survives.
Preprocessor fit_preprocessor(const Matrix& X, const std::vector<std::string>& names = {});

struct ForestHyper {
  int n_trees = 100;
  int max_features = 0;  // 0 means all columns
  int min_leaf = 1;
  bool bootstrap = true;
  int workers = 1;  // threads used for fitting; does not affect the result
};

/// Flat tree: feature < 0 marks a leaf. Rows go left when x <= threshold.
struct RegressionTree {
  std::vector<int> feature;
  std::vector<double> threshold;
  std::vector<int> left;
  std::vector<int> right;
  std::vector<double> value;

  double predict(const double* row, Eigen::Index stride) const;
  std::size_t node_count() const { return feature.size(); }
  std::size_t leaf_count() const;
};

struct RandomForest {
  ForestHyper hyper;
  std::uint64_t seed = 0;
  int n_features = 0;
  std::vector<RegressionTree> trees;

  /// Mean of tree outputs; rows must be finite and already preprocessed.
  Vector predict(const Matrix& X) const;
};

/// Fits CART trees on bootstrap resamples. X must be finite.
RandomForest fit_forest(const Matrix& X, const Vector& y, const ForestHyper& hyper, std::uint64_t seed);

/// Preprocessor plus forest; predictions take raw feature rows.
struct ForestModel {
  Preprocessor preprocessor;
  RandomForest forest;

  Vector predict(const Matrix& raw) const;
};

ForestModel fit_model(const Matrix& raw, const Vector& y, const ForestHyper& hyper, std::uint64_t seed,
                      const std::vector<std::string>& names = {});

double mse(std::span<const double> predictions, std::span<const double> truths);
double mse(const Vector& predictions, const Vector& truths);

nlohmann::json to_json(const ForestModel& model);
ForestModel model_from_json(const nlohmann::json& j);

}  // namespace dynas::forest
