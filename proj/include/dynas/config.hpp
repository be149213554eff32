#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "dynas/forest.hpp"
#include "dynas/optimizers.hpp"
#include "dynas/switchlab.hpp"

namespace dynas {

struct GridSpec {
  std::size_t start = 50;
  std::size_t stop = 9500;
  std::size_t step = 50;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::vector<int> dims = {10};
  std::vector<int> fids = {1,  2,  3,  4,  5,  6,  7,  8,  9,  10, 11, 12,
                           13, 14, 15, 16, 17, 18, 19, 20, 21, 22, 23, 24};
  std::vector<int> iids = {1, 2, 3, 4, 5};
  int runs = 5;
  std::size_t budget = 10000;
  GridSpec grid;
  std::size_t horizon = 500;
  std::vector<std::size_t> windows = {50, 150, 250};
  std::vector<optim::OptimizerKind> portfolio = {optim::kAllKinds.begin(), optim::kAllKinds.end()};
  forest::ForestHyper forest;
  std::string output_dir = "out";
  int workers = 1;

  switchlab::PerformanceMode performance_mode = switchlab::PerformanceMode::kWindowBest;
  std::vector<std::size_t> self_switch_points = {1000, 3000, 5000, 7000, 9000};
  bool self_switch_disabled = false;
  std::size_t importance_window = 250;
  int importance_repeats = 10;
  std::vector<std::size_t> checkpoints;  // static-run summary; empty = tenths of the budget

  /// Throws std::invalid_argument describing the first violated rule.
  void validate() const;
  switchlab::SweepConfig sweep_config() const;
  std::vector<std::size_t> summary_checkpoints() const;

  /// 16 hex digits over every field that can change results (output
  /// directory and worker count excluded).
  std::string hash() const;
};

nlohmann::json to_json(const ExperimentConfig& cfg);
/// Unknown keys are rejected; missing keys keep their defaults.
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);

}  // namespace dynas
