#include "dynas/switchlab.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <tuple>

#include "dynas/csv.hpp"

namespace dynas::switchlab {

namespace {

std::uint64_t kind_code(OptimizerKind k) { return static_cast<std::uint64_t>(k); }

std::size_t kind_index(OptimizerKind k) { return static_cast<std::size_t>(k); }

double best_precision(std::span<const EvalRecord> records, double f_opt) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& r : records) best = std::min(best, r.f);
  return std::max(best - f_opt, problems::kPrecisionFloor);
}

trajectory::RunMeta meta_for(const SweepUnit& u, OptimizerKind algo, std::uint64_t seed, const std::string& id) {
  return {id, u.fid, u.iid, u.dim, std::string(optim::to_string(algo)), seed};
}

}  // namespace

std::vector<std::size_t> linear_grid(std::size_t start, std::size_t stop, std::size_t step) {
  if (step == 0) throw std::invalid_argument("grid step must be positive");
  if (start > stop) throw std::invalid_argument("grid start exceeds stop");
  std::vector<std::size_t> g;
  for (std::size_t t = start; t <= stop; t += step) g.push_back(t);
  return g;
}

void SweepConfig::validate() const {
  if (portfolio.empty()) throw std::invalid_argument("portfolio is empty");
  if (switch_grid.empty()) throw std::invalid_argument("switch grid is empty");
  if (horizon == 0) throw std::invalid_argument("horizon must be positive");
  if (runs < 1) throw std::invalid_argument("runs must be >= 1");
  if (instances.empty() || dims.empty() || fids.empty())
    throw std::invalid_argument("instances, dims and fids must be non-empty");
  if (dims.size() != 1) throw std::invalid_argument("a sweep covers exactly one dimension");
  for (std::size_t i = 0; i < switch_grid.size(); ++i) {
    if (switch_grid[i] == 0) throw std::invalid_argument("switch points must be positive");
    if (i > 0 && switch_grid[i] <= switch_grid[i - 1])
      throw std::invalid_argument("switch grid must be strictly ascending");
  }
  if (switch_grid.back() + horizon > budget)
    throw std::invalid_argument("last switch point plus horizon exceeds the budget");
  for (int f : fids)
    if (f < 1 || f > 24) throw std::invalid_argument("fid out of range 1..24");
  for (int i : instances)
    if (i < 1) throw std::invalid_argument("iid must be >= 1");
  for (int d : dims)
    if (d < 2) throw std::invalid_argument("dim must be >= 2");
  for (std::size_t w : windows)
    if (w == 0) throw std::invalid_argument("window sizes must be positive");
}

double relative_benefit(double a_s, double a_r) {
  if (!(a_s > 0.0) || !(a_r > 0.0) || !std::isfinite(a_s) || !std::isfinite(a_r))
    throw std::invalid_argument("relative_benefit needs finite positive inputs");
  if (a_s == a_r) return 0.0;
  const double mag = 1.0 - std::min(a_s, a_r) / std::max(a_s, a_r);
  return a_s < a_r ? mag : -mag;
}

double horizon_performance(std::span<const EvalRecord> segment, std::size_t horizon, double f_opt) {
  if (segment.size() != horizon)
    throw std::invalid_argument("horizon segment has " + std::to_string(segment.size()) + " records, expected " +
                                std::to_string(horizon));
  return best_precision(segment, f_opt);
}

std::string SweepUnit::id() const {
  return "f" + std::to_string(fid) + "_i" + std::to_string(iid) + "_d" + std::to_string(dim) + "_r" +
         std::to_string(run) + "_" + std::string(optim::to_string(a1));
}

std::vector<SweepUnit> enumerate_units(const SweepConfig& cfg) {
  std::vector<SweepUnit> units;
  for (int d : cfg.dims)
    for (int f : cfg.fids)
      for (int i : cfg.instances)
        for (int r = 1; r <= cfg.runs; ++r)
          for (auto a1 : cfg.portfolio) units.push_back({f, i, d, r, a1});
  return units;
}

std::uint64_t static_seed(std::uint64_t base, const SweepUnit& u) {
  return hash_seed({base, std::uint64_t(u.fid), std::uint64_t(u.iid), std::uint64_t(u.run), kind_code(u.a1)});
}

std::uint64_t branch_seed(std::uint64_t base, const SweepUnit& u, OptimizerKind a2, std::size_t t) {
  return hash_seed({base, std::uint64_t(u.fid), std::uint64_t(u.iid), std::uint64_t(u.run), kind_code(u.a1),
                    kind_code(a2), std::uint64_t(t)});
}

UnitResult run_unit(const SweepConfig& cfg, const SweepUnit& u) {
  UnitResult out;
  const auto problem = problems::instantiate(u.fid, u.iid, u.dim);
  const auto& bounds = problem.bounds();
  const double f_opt = problem.f_opt();
  const auto seed = static_seed(cfg.seed, u);

  trajectory::Archive archive(meta_for(u, u.a1, seed, u.id()), cfg.budget);
  trajectory::RunSession session{optim::init(u.a1, u.dim, bounds, seed, cfg.hyper), {}};
  trajectory::run(problem, session, cfg.budget, archive);

  for (std::size_t t : cfg.switch_grid) {
    const auto continued = archive.slice(t + 1, t + cfg.horizon);
    const double a_r = cfg.mode == PerformanceMode::kWindowBest
                           ? horizon_performance(continued, cfg.horizon, f_opt)
                           : best_precision(archive.prefix(t + cfg.horizon), f_opt);

    if (cfg.compute_features) {
      for (auto& fv : features::extract_all(archive, t, cfg.windows))
        out.features.push_back({u.fid, u.iid, u.run, u.a1, t, fv.provenance.window, std::move(fv.values)});
    }

    for (auto a2 : cfg.portfolio) {
      SwitchOutcome o{u.fid, u.iid, u.run, u.a1, a2, t, kNaN, a_r, kNaN};
      try {
        const auto bseed = branch_seed(cfg.seed, u, a2, t);
        auto ws = optim::warm_start(a2, archive.prefix(t), u.dim, bounds, bseed, cfg.hyper);
        for (auto& w : ws.warnings) out.warnings.push_back(u.id() + ": " + w);
        trajectory::Archive branch(meta_for(u, a2, bseed, u.id() + "_to_" + std::string(optim::to_string(a2))),
                                   cfg.horizon);
        trajectory::RunSession bs{std::move(ws.optimizer), {}};
        trajectory::run(problem, bs, cfg.horizon, branch);
        double a_s = horizon_performance(branch.records(), cfg.horizon, f_opt);
        if (cfg.mode == PerformanceMode::kBestSoFar) a_s = std::min(a_s, best_precision(archive.prefix(t), f_opt));
        o.a_s = a_s;
        o.r = relative_benefit(a_s, a_r);
      } catch (const std::exception& e) {
        out.warnings.push_back(u.id() + ": branch to " + std::string(optim::to_string(a2)) + " at t=" +
                               std::to_string(t) + " failed: " + e.what());
        o.a_s = kNaN;
        o.r = kNaN;
      }
      out.outcomes.push_back(o);
    }
  }
  return out;
}

UnitResult sweep(const SweepConfig& cfg) {
  cfg.validate();
  UnitResult all;
  for (const auto& u : enumerate_units(cfg)) {
    auto r = run_unit(cfg, u);
    all.outcomes.insert(all.outcomes.end(), r.outcomes.begin(), r.outcomes.end());
    std::move(r.features.begin(), r.features.end(), std::back_inserter(all.features));
    all.warnings.insert(all.warnings.end(), r.warnings.begin(), r.warnings.end());
  }
  return all;
}

Matrix fraction_beneficial(std::span<const SwitchOutcome> outcomes) {
  if (outcomes.empty()) throw std::invalid_argument("fraction_beneficial: no outcomes");
  const auto k = optim::kAllKinds.size();
  Matrix pos = Matrix::Zero(k, k), tot = Matrix::Zero(k, k);
  for (const auto& o : outcomes) {
    if (std::isnan(o.r)) continue;
    tot(kind_index(o.a1), kind_index(o.a2)) += 1;
    if (o.r > 0) pos(kind_index(o.a1), kind_index(o.a2)) += 1;
  }
  Matrix m(k, k);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j) m(i, j) = tot(i, j) > 0 ? pos(i, j) / tot(i, j) : kNaN;
  return m;
}

Heatmap mean_benefit_heatmap(std::span<const SwitchOutcome> outcomes, OptimizerKind a1, OptimizerKind a2) {
  std::map<std::pair<int, std::size_t>, std::pair<double, int>> cells;
  Heatmap h;
  for (const auto& o : outcomes) {
    if (o.a1 != a1 || o.a2 != a2) continue;
    h.fids.push_back(o.fid);
    h.switch_points.push_back(o.switch_point);
    if (std::isnan(o.r)) continue;
    auto& c = cells[{o.fid, o.switch_point}];
    c.first += o.r;
    c.second += 1;
  }
  if (h.fids.empty()) throw std::invalid_argument("mean_benefit_heatmap: no outcomes for this pair");
  auto uniq = [](auto& v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  };
  uniq(h.fids);
  uniq(h.switch_points);
  h.values = Matrix::Constant(static_cast<Eigen::Index>(h.fids.size()),
                              static_cast<Eigen::Index>(h.switch_points.size()), kNaN);
  for (std::size_t i = 0; i < h.fids.size(); ++i)
    for (std::size_t j = 0; j < h.switch_points.size(); ++j) {
      auto it = cells.find({h.fids[i], h.switch_points[j]});
      if (it != cells.end()) h.values(i, j) = it->second.first / it->second.second;
    }
  return h;
}

SelfSwitchResult self_switch(const problems::ProblemInstance& problem, OptimizerKind kind, std::size_t budget,
                             std::size_t switch_at, std::uint64_t seed, const optim::Hyper& hyper,
                             bool disable_switch) {
  if (switch_at == 0 || switch_at >= budget) throw std::invalid_argument("self_switch: switch point outside (0, budget)");
  const int dim = problem.dim();
  const auto& bounds = problem.bounds();
  trajectory::RunMeta meta{"self", problem.fid(), problem.iid(), dim, std::string(optim::to_string(kind)), seed};

  SelfSwitchResult res;
  trajectory::Archive full(meta, budget);
  trajectory::RunSession s{optim::init(kind, dim, bounds, seed, hyper), {}};
  trajectory::run(problem, s, budget, full);
  res.uninterrupted = problems::precision(problem, full.best_so_far(budget));
  if (disable_switch) {
    res.switched = res.uninterrupted;
    return res;
  }

  // The first segment replays the uninterrupted run exactly, so its records
  // can be reused.
  trajectory::Archive rest(meta, budget - switch_at);
  auto ws = optim::warm_start(kind, full.prefix(switch_at), dim, bounds, hash_seed({seed, switch_at}), hyper);
  trajectory::RunSession s2{std::move(ws.optimizer), {}};
  trajectory::run(problem, s2, budget - switch_at, rest);
  res.switched = problems::precision(problem, std::min(full.best_so_far(switch_at), rest.best_so_far(rest.size())));
  return res;
}

void sort_outcomes(std::vector<SwitchOutcome>& rows) {
  std::stable_sort(rows.begin(), rows.end(), [](const SwitchOutcome& a, const SwitchOutcome& b) {
    return std::tuple(a.fid, a.iid, a.run, kind_index(a.a1), a.switch_point, kind_index(a.a2)) <
           std::tuple(b.fid, b.iid, b.run, kind_index(b.a1), b.switch_point, kind_index(b.a2));
  });
}

void sort_features(std::vector<FeatureRow>& rows) {
  std::stable_sort(rows.begin(), rows.end(), [](const FeatureRow& a, const FeatureRow& b) {
    return std::tuple(a.fid, a.iid, a.run, kind_index(a.a1), a.switch_point, a.window) <
           std::tuple(b.fid, b.iid, b.run, kind_index(b.a1), b.switch_point, b.window);
  });
}

void write_outcomes(const std::filesystem::path& path, const std::vector<SwitchOutcome>& rows) {
  std::vector<std::vector<std::string>> out;
  out.reserve(rows.size());
  for (const auto& o : rows)
    out.push_back({std::to_string(o.fid), std::to_string(o.iid), std::to_string(o.run),
                   std::string(optim::to_string(o.a1)), std::string(optim::to_string(o.a2)),
                   std::to_string(o.switch_point), csv::format_double(o.a_s), csv::format_double(o.a_r),
                   csv::format_double(o.r)});
  csv::write_table(path, "outcomes", {"fid", "iid", "run", "a1", "a2", "switch_point", "a_s", "a_r", "r"}, out);
}

std::vector<SwitchOutcome> read_outcomes(const std::filesystem::path& path) {
  const auto t = csv::read_table(path, "outcomes");
  const int c_fid = t.require_column("fid"), c_iid = t.require_column("iid"), c_run = t.require_column("run"),
            c_a1 = t.require_column("a1"), c_a2 = t.require_column("a2"), c_t = t.require_column("switch_point"),
            c_as = t.require_column("a_s"), c_ar = t.require_column("a_r"), c_r = t.require_column("r");
  std::vector<SwitchOutcome> rows;
  rows.reserve(t.rows.size());
  for (const auto& row : t.rows) {
    SwitchOutcome o;
    o.fid = std::stoi(row[c_fid]);
    o.iid = std::stoi(row[c_iid]);
    o.run = std::stoi(row[c_run]);
    o.a1 = optim::parse_kind(row[c_a1]);
    o.a2 = optim::parse_kind(row[c_a2]);
    o.switch_point = std::stoull(row[c_t]);
    o.a_s = csv::parse_double(row[c_as]);
    o.a_r = csv::parse_double(row[c_ar]);
    o.r = csv::parse_double(row[c_r]);
    rows.push_back(o);
  }
  return rows;
}

void write_features(const std::filesystem::path& path, const std::vector<FeatureRow>& rows) {
  std::vector<std::string> header = {"fid", "iid", "run", "a1", "switch_point", "window"};
  const auto& names = features::feature_names();
  header.insert(header.end(), names.begin(), names.end());
  std::vector<std::vector<std::string>> out;
  out.reserve(rows.size());
  for (const auto& r : rows) {
    if (r.values.size() != names.size()) throw std::invalid_argument("feature row has wrong width");
    std::vector<std::string> line = {std::to_string(r.fid),          std::to_string(r.iid),
                                     std::to_string(r.run),          std::string(optim::to_string(r.a1)),
                                     std::to_string(r.switch_point), std::to_string(r.window)};
    for (double v : r.values) line.push_back(csv::format_double(v));
    out.push_back(std::move(line));
  }
  csv::write_table(path, "features", header, out);
}

std::vector<FeatureRow> read_features(const std::filesystem::path& path) {
  const auto t = csv::read_table(path, "features");
  const auto& names = features::feature_names();
  constexpr std::size_t kKeys = 6;
  if (t.header.size() != kKeys + names.size() ||
      !std::equal(names.begin(), names.end(), t.header.begin() + kKeys))
    throw SchemaError("features table: feature columns do not match feature set " +
                      std::string(features::kFeatureSetVersion));
  const int c_fid = t.require_column("fid"), c_iid = t.require_column("iid"), c_run = t.require_column("run"),
            c_a1 = t.require_column("a1"), c_t = t.require_column("switch_point"),
            c_w = t.require_column("window");
  std::vector<FeatureRow> rows;
  rows.reserve(t.rows.size());
  for (const auto& row : t.rows) {
    FeatureRow r;
    r.fid = std::stoi(row[c_fid]);
    r.iid = std::stoi(row[c_iid]);
    r.run = std::stoi(row[c_run]);
    r.a1 = optim::parse_kind(row[c_a1]);
    r.switch_point = std::stoull(row[c_t]);
    r.window = std::stoull(row[c_w]);
    for (std::size_t j = 0; j < names.size(); ++j) r.values.push_back(csv::parse_double(row[kKeys + j]));
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_fraction_matrix(const std::filesystem::path& path, const Matrix& m) {
  std::vector<std::string> header = {"a1"};
  for (auto k : optim::kAllKinds) header.emplace_back(optim::to_string(k));
  std::vector<std::vector<std::string>> rows;
  for (std::size_t i = 0; i < optim::kAllKinds.size(); ++i) {
    std::vector<std::string> row = {std::string(optim::to_string(optim::kAllKinds[i]))};
    for (std::size_t j = 0; j < optim::kAllKinds.size(); ++j) row.push_back(csv::format_double(m(i, j)));
    rows.push_back(std::move(row));
  }
  csv::write_table(path, "fraction_beneficial", header, rows);
}

void write_heatmap(const std::filesystem::path& path, const Heatmap& h) {
  std::vector<std::string> header = {"fid"};
  for (auto t : h.switch_points) header.push_back("t" + std::to_string(t));
  std::vector<std::vector<std::string>> rows;
  for (std::size_t i = 0; i < h.fids.size(); ++i) {
    std::vector<std::string> row = {std::to_string(h.fids[i])};
    for (std::size_t j = 0; j < h.switch_points.size(); ++j) row.push_back(csv::format_double(h.values(i, j)));
    rows.push_back(std::move(row));
  }
  csv::write_table(path, "heatmap", header, rows);
}

}  // namespace dynas::switchlab
