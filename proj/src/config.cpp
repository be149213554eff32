#include "dynas/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>

namespace dynas {

namespace {

std::string mode_name(switchlab::PerformanceMode m) {
  return m == switchlab::PerformanceMode::kWindowBest ? "window_best" : "best_so_far";
}

switchlab::PerformanceMode parse_mode(const std::string& s) {
  if (s == "window_best") return switchlab::PerformanceMode::kWindowBest;
  if (s == "best_so_far") return switchlab::PerformanceMode::kBestSoFar;
  throw std::invalid_argument("unknown performance_mode '" + s + "'");
}

void reject_unknown(const nlohmann::json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw std::invalid_argument(where + " must be a JSON object");
  for (const auto& [k, v] : j.items())
    if (!allowed.count(k)) throw std::invalid_argument("unknown key '" + k + "' in " + where);
}

template <class T>
void read(const nlohmann::json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("config key '") + key + "': " + e.what());
  }
}

}  // namespace

void ExperimentConfig::validate() const {
  sweep_config().validate();
  if (workers < 1) throw std::invalid_argument("workers must be >= 1");
  if (output_dir.empty()) throw std::invalid_argument("output_dir is empty");
  if (forest.n_trees < 1 || forest.min_leaf < 1 || forest.max_features < 0)
    throw std::invalid_argument("invalid forest hyperparameters");
  if (windows.empty()) throw std::invalid_argument("windows must be non-empty");
  if (std::set<std::size_t>(windows.begin(), windows.end()).size() != windows.size())
    throw std::invalid_argument("windows must be distinct");
  std::set<optim::OptimizerKind> seen(portfolio.begin(), portfolio.end());
  if (seen.size() != portfolio.size()) throw std::invalid_argument("portfolio contains duplicates");
  for (auto t : self_switch_points)
    if (t == 0 || t >= budget) throw std::invalid_argument("self-switch points must lie in (0, budget)");
  if (importance_repeats < 1) throw std::invalid_argument("importance repeats must be >= 1");
  if (importance_window != 0 && std::find(windows.begin(), windows.end(), importance_window) == windows.end())
    throw std::invalid_argument("importance window must be one of the window sizes (or 0 to disable)");
  for (auto c : checkpoints)
    if (c == 0 || c > budget) throw std::invalid_argument("checkpoints must lie in [1, budget]");
}

switchlab::SweepConfig ExperimentConfig::sweep_config() const {
  switchlab::SweepConfig s;
  s.portfolio = portfolio;
  s.budget = budget;
  s.switch_grid = switchlab::linear_grid(grid.start, grid.stop, grid.step);
  s.horizon = horizon;
  s.runs = runs;
  s.instances = iids;
  s.dims = dims;
  s.fids = fids;
  s.seed = seed;
  s.windows = windows;
  s.mode = performance_mode;
  return s;
}

std::vector<std::size_t> ExperimentConfig::summary_checkpoints() const {
  if (!checkpoints.empty()) return checkpoints;
  std::vector<std::size_t> c;
  for (int k = 1; k <= 10; ++k) c.push_back(std::max<std::size_t>(1, budget * k / 10));
  return c;
}

std::string ExperimentConfig::hash() const {
  auto j = to_json(*this);
  j.erase("output_dir");
  j.erase("workers");
  const std::string s = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

nlohmann::json to_json(const ExperimentConfig& c) {
  std::vector<std::string> algos;
  for (auto k : c.portfolio) algos.emplace_back(optim::to_string(k));
  return {
      {"seed", c.seed},
      {"dims", c.dims},
      {"fids", c.fids},
      {"iids", c.iids},
      {"runs", c.runs},
      {"budget", c.budget},
      {"switch_grid", {{"start", c.grid.start}, {"stop", c.grid.stop}, {"step", c.grid.step}}},
      {"horizon", c.horizon},
      {"windows", c.windows},
      {"portfolio", algos},
      {"forest",
       {{"n_trees", c.forest.n_trees},
        {"max_features", c.forest.max_features},
        {"min_leaf", c.forest.min_leaf},
        {"bootstrap", c.forest.bootstrap}}},
      {"output_dir", c.output_dir},
      {"workers", c.workers},
      {"performance_mode", mode_name(c.performance_mode)},
      {"self_switch", {{"points", c.self_switch_points}, {"disabled", c.self_switch_disabled}}},
      {"importance", {{"window", c.importance_window}, {"repeats", c.importance_repeats}}},
      {"checkpoints", c.checkpoints},
  };
}

ExperimentConfig config_from_json(const nlohmann::json& j) {
  reject_unknown(j,
                 {"seed", "dims", "fids", "iids", "runs", "budget", "switch_grid", "horizon", "windows", "portfolio",
                  "forest", "output_dir", "workers", "performance_mode", "self_switch", "importance", "checkpoints"},
                 "config");
  ExperimentConfig c;
  read(j, "seed", c.seed);
  read(j, "dims", c.dims);
  read(j, "fids", c.fids);
  read(j, "iids", c.iids);
  read(j, "runs", c.runs);
  read(j, "budget", c.budget);
  read(j, "horizon", c.horizon);
  read(j, "windows", c.windows);
  read(j, "output_dir", c.output_dir);
  read(j, "workers", c.workers);
  read(j, "checkpoints", c.checkpoints);
  if (j.contains("switch_grid")) {
    const auto& g = j.at("switch_grid");
    reject_unknown(g, {"start", "stop", "step"}, "switch_grid");
    read(g, "start", c.grid.start);
    read(g, "stop", c.grid.stop);
    read(g, "step", c.grid.step);
  }
  if (j.contains("portfolio")) {
    std::vector<std::string> algos;
    read(j, "portfolio", algos);
    c.portfolio.clear();
    for (const auto& a : algos) c.portfolio.push_back(optim::parse_kind(a));
  }
  if (j.contains("forest")) {
    const auto& f = j.at("forest");
    reject_unknown(f, {"n_trees", "max_features", "min_leaf", "bootstrap"}, "forest");
    read(f, "n_trees", c.forest.n_trees);
    read(f, "max_features", c.forest.max_features);
    read(f, "min_leaf", c.forest.min_leaf);
    read(f, "bootstrap", c.forest.bootstrap);
  }
  if (j.contains("performance_mode")) {
    std::string m;
    read(j, "performance_mode", m);
    c.performance_mode = parse_mode(m);
  }
  if (j.contains("self_switch")) {
    const auto& s = j.at("self_switch");
    reject_unknown(s, {"points", "disabled"}, "self_switch");
    read(s, "points", c.self_switch_points);
    read(s, "disabled", c.self_switch_disabled);
  }
  if (j.contains("importance")) {
    const auto& s = j.at("importance");
    reject_unknown(s, {"window", "repeats"}, "importance");
    read(s, "window", c.importance_window);
    read(s, "repeats", c.importance_repeats);
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("config " + path.string() + " is not valid JSON: " + e.what());
  }
  auto c = config_from_json(j);
  c.validate();
  return c;
}

}  // namespace dynas
