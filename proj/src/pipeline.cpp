#include "dynas/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include "dynas/csv.hpp"
#include "dynas/features.hpp"
#include "dynas/problems.hpp"
#include "dynas/switchlab.hpp"
#include "dynas/trajectory.hpp"

namespace dynas::pipeline {

namespace fs = std::filesystem;
using optim::OptimizerKind;

namespace {

void say(const Log& log, const std::string& msg) {
  if (log) log(msg);
}

void ensure_writable(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  const auto probe = dir / ".write_probe";
  std::ofstream out(probe);
  if (ec || !out) throw std::runtime_error("output directory " + dir.string() + " is not writable");
  out.close();
  fs::remove(probe, ec);
}

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
    if (!out) throw std::runtime_error("write failed for " + path.string());
  }
  fs::rename(tmp, path);
}

std::string kind_str(OptimizerKind k) { return std::string(optim::to_string(k)); }

std::vector<std::size_t> model_windows(const ExperimentConfig& cfg) {
  auto w = cfg.windows;
  w.push_back(evalkit::kAllWindows);
  return w;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() < 2) return kNaN;
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / double(a.size());
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / double(b.size());
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0 || sbb == 0) return kNaN;
  return sab / std::sqrt(saa * sbb);
}

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  std::ostringstream s;
  s.precision(6);
  s << v;
  return s.str();
}

}  // namespace

void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& body) {
  if (n == 0) return;
  const auto w = static_cast<std::size_t>(std::clamp<long long>(workers, 1, static_cast<long long>(n)));
  if (w == 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < w; ++t)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n && !failed; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!first) first = std::current_exception();
          failed = true;
        }
      }
    });
  for (auto& th : pool) th.join();
  if (first) std::rethrow_exception(first);
}

void cmd_static_run(const ExperimentConfig& cfg, const Log& log) {
  cfg.validate();
  const fs::path out = cfg.output_dir;
  ensure_writable(out);
  const auto sc = cfg.sweep_config();
  std::vector<switchlab::SweepUnit> units;
  for (int d : cfg.dims)
    for (int f : cfg.fids)
      for (int i : cfg.iids)
        for (int r = 1; r <= cfg.runs; ++r)
          for (auto a : cfg.portfolio) units.push_back({f, i, d, r, a});

  const auto checkpoints = cfg.summary_checkpoints();
  std::vector<std::vector<double>> precisions(units.size());
  say(log, "static-run: " + std::to_string(units.size()) + " runs");
  parallel_for(units.size(), cfg.workers, [&](std::size_t k) {
    const auto& u = units[k];
    const auto problem = problems::instantiate(u.fid, u.iid, u.dim);
    const auto seed = switchlab::static_seed(cfg.seed, u);
    trajectory::Archive archive({u.id(), u.fid, u.iid, u.dim, kind_str(u.a1), seed}, cfg.budget);
    trajectory::RunSession s{optim::init(u.a1, u.dim, problem.bounds(), seed, sc.hyper), {}};
    trajectory::run(problem, s, cfg.budget, archive);
    trajectory::write_csv(out / "trajectories" / (u.id() + ".csv"), {&archive});
    for (auto c : checkpoints) precisions[k].push_back(problems::precision(problem, archive.best_so_far(c)));
  });

  // Mean over instances and runs per (dim, fid, algo, checkpoint).
  std::map<std::tuple<int, int, int>, std::vector<std::size_t>> groups;
  for (std::size_t k = 0; k < units.size(); ++k)
    groups[{units[k].dim, units[k].fid, static_cast<int>(units[k].a1)}].push_back(k);
  std::vector<std::vector<std::string>> rows;
  for (const auto& [key, idx] : groups)
    for (std::size_t c = 0; c < checkpoints.size(); ++c) {
      double m = 0.0;
      for (auto k : idx) m += precisions[k][c];
      m /= double(idx.size());
      rows.push_back({std::to_string(std::get<0>(key)), std::to_string(std::get<1>(key)),
                      kind_str(static_cast<OptimizerKind>(std::get<2>(key))), std::to_string(checkpoints[c]),
                      csv::format_double(m)});
    }
  csv::write_table(out / "static_summary.csv", "static_summary",
                   {"dim", "fid", "algo", "checkpoint", "mean_precision"}, rows);
  say(log, "static-run: wrote " + std::to_string(units.size()) + " trajectory files");
}

void cmd_self_switch(const ExperimentConfig& cfg, const Log& log) {
  cfg.validate();
  const fs::path out = cfg.output_dir;
  ensure_writable(out);
  if (cfg.self_switch_points.empty()) throw std::invalid_argument("self-switch needs at least one switch point");
  const auto hyper = cfg.sweep_config().hyper;

  struct Job {
    OptimizerKind algo;
    std::size_t t;
    int fid;
  };
  std::vector<Job> jobs;
  for (auto a : cfg.portfolio)
    for (auto t : cfg.self_switch_points)
      for (int f : cfg.fids) jobs.push_back({a, t, f});
  std::vector<double> diff(jobs.size(), kNaN);
  const int dim = cfg.dims.front();
  say(log, "self-switch: " + std::to_string(jobs.size()) + " cells, dim " + std::to_string(dim));

  parallel_for(jobs.size(), cfg.workers, [&](std::size_t k) {
    const auto& j = jobs[k];
    double log_sw = 0.0, log_un = 0.0;
    int n = 0;
    for (int iid : cfg.iids) {
      const auto problem = problems::instantiate(j.fid, iid, dim);
      for (int r = 1; r <= cfg.runs; ++r) {
        const auto seed = hash_seed({cfg.seed, std::uint64_t(j.fid), std::uint64_t(iid), std::uint64_t(r),
                                     static_cast<std::uint64_t>(j.algo), 0x5e1f});
        const auto res = switchlab::self_switch(problem, j.algo, cfg.budget, j.t, seed, hyper, cfg.self_switch_disabled);
        log_sw += std::log10(res.switched);
        log_un += std::log10(res.uninterrupted);
        ++n;
      }
    }
    diff[k] = (log_sw - log_un) / n;
  });

  std::vector<std::string> header = {"algo", "switch_point"};
  for (int f : cfg.fids) header.push_back("f" + std::to_string(f));
  std::vector<std::vector<std::string>> rows;
  for (std::size_t k = 0; k < jobs.size(); k += cfg.fids.size()) {
    std::vector<std::string> row = {kind_str(jobs[k].algo), std::to_string(jobs[k].t)};
    for (std::size_t f = 0; f < cfg.fids.size(); ++f) row.push_back(csv::format_double(diff[k + f]));
    rows.push_back(std::move(row));
  }
  csv::write_table(out / "self_switch.csv", "self_switch", header, rows);
}

void cmd_sweep(const ExperimentConfig& cfg, const Log& log) {
  cfg.validate();
  const fs::path dir = fs::path(cfg.output_dir) / "sweep";
  ensure_writable(dir / "units");
  const auto sc = cfg.sweep_config();
  const auto hash = cfg.hash();

  const auto hash_file = dir / "config_hash";
  if (fs::exists(hash_file)) {
    std::ifstream in(hash_file);
    std::string prev;
    in >> prev;
    if (prev != hash)
      throw std::invalid_argument("sweep directory " + dir.string() + " holds results for config " + prev +
                                  ", current config is " + hash + "; use a fresh output directory");
  } else {
    write_text(hash_file, hash + "\n");
  }

  const auto ledger_path = dir / "jobs.ledger";
  std::set<std::string> done;
  {
    std::ifstream in(ledger_path);
    std::string word, id;
    while (in >> word >> id)
      if (word == "done") done.insert(id);
  }

  const auto units = switchlab::enumerate_units(sc);
  std::vector<std::size_t> todo;
  for (std::size_t k = 0; k < units.size(); ++k)
    if (!done.count(units[k].id())) todo.push_back(k);
  say(log, "sweep: " + std::to_string(units.size()) + " units, " + std::to_string(todo.size()) + " to run");

  std::mutex ledger_mu;
  std::atomic<std::size_t> finished{0};
  parallel_for(todo.size(), cfg.workers, [&](std::size_t k) {
    const auto& u = units[todo[k]];
    const auto res = switchlab::run_unit(sc, u);
    const auto base = dir / "units" / u.id();
    switchlab::write_outcomes(base.string() + ".outcomes.csv", res.outcomes);
    switchlab::write_features(base.string() + ".features.csv", res.features);
    std::string warn;
    for (const auto& w : res.warnings) warn += w + "\n";
    write_text(base.string() + ".warnings.txt", warn);
    std::lock_guard lock(ledger_mu);
    std::ofstream led(ledger_path, std::ios::app);
    led << "done " << u.id() << "\n";
    led.flush();
    if (!led) throw std::runtime_error("cannot append to job ledger " + ledger_path.string());
    const auto n = ++finished;
    if (n % 25 == 0 || n == todo.size()) say(log, "sweep: " + std::to_string(n) + "/" + std::to_string(todo.size()));
  });

  std::vector<switchlab::SwitchOutcome> outcomes;
  std::vector<switchlab::FeatureRow> feats;
  std::string warnings;
  for (const auto& u : units) {
    const auto base = (dir / "units" / u.id()).string();
    auto o = switchlab::read_outcomes(base + ".outcomes.csv");
    auto f = switchlab::read_features(base + ".features.csv");
    outcomes.insert(outcomes.end(), o.begin(), o.end());
    std::move(f.begin(), f.end(), std::back_inserter(feats));
    std::ifstream w(base + ".warnings.txt");
    warnings += std::string(std::istreambuf_iterator<char>(w), {});
  }
  switchlab::sort_outcomes(outcomes);
  switchlab::sort_features(feats);
  switchlab::write_outcomes(dir / "outcomes.csv", outcomes);
  switchlab::write_features(dir / "features.csv", feats);
  write_text(dir / "warnings.log", warnings);

  std::size_t failed = 0;
  for (const auto& o : outcomes) failed += std::isnan(o.r);
  auto cfg_json = to_json(cfg);
  cfg_json.erase("output_dir");
  cfg_json.erase("workers");
  nlohmann::json manifest = {
      {"config_hash", hash},
      {"feature_set", std::string(features::kFeatureSetVersion)},
      {"units", units.size()},
      {"rows", {{"outcomes", outcomes.size()}, {"features", feats.size()}, {"failed_outcomes", failed}}},
      {"config", cfg_json},
  };
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
  say(log, "sweep: " + std::to_string(outcomes.size()) + " outcomes, " + std::to_string(feats.size()) +
               " feature rows");
}

void cmd_train_eval(const ExperimentConfig& cfg, const Log& log) {
  cfg.validate();
  const fs::path sweep_dir = fs::path(cfg.output_dir) / "sweep";
  const fs::path dir = fs::path(cfg.output_dir) / "eval";
  if (!fs::exists(sweep_dir / "outcomes.csv") || !fs::exists(sweep_dir / "features.csv"))
    throw std::invalid_argument("sweep outputs missing under " + sweep_dir.string() + "; run `sweep` first");
  ensure_writable(dir);
  const auto outcomes = switchlab::read_outcomes(sweep_dir / "outcomes.csv");
  const auto feats = switchlab::read_features(sweep_dir / "features.csv");
  if (outcomes.empty()) throw std::invalid_argument("outcomes table is empty");

  switchlab::write_fraction_matrix(dir / "fraction_beneficial.csv", switchlab::fraction_beneficial(outcomes));
  std::vector<std::vector<std::string>> long_rows;
  const auto frac = switchlab::fraction_beneficial(outcomes);
  for (auto a1 : optim::kAllKinds)
    for (auto a2 : optim::kAllKinds)
      long_rows.push_back({"fraction_beneficial", kind_str(a1), kind_str(a2), "", "", "", "fraction",
                           csv::format_double(frac(static_cast<int>(a1), static_cast<int>(a2)))});
  for (auto a1 : cfg.portfolio)
    for (auto a2 : cfg.portfolio) {
      const auto h = switchlab::mean_benefit_heatmap(outcomes, a1, a2);
      switchlab::write_heatmap(dir / "heatmaps" / ("heatmap_" + kind_str(a1) + "_" + kind_str(a2) + ".csv"), h);
      for (std::size_t i = 0; i < h.fids.size(); ++i)
        for (std::size_t j = 0; j < h.switch_points.size(); ++j)
          long_rows.push_back({"mean_benefit", kind_str(a1), kind_str(a2), "", std::to_string(h.fids[i]),
                               std::to_string(h.switch_points[j]), "mean_r", csv::format_double(h.values(i, j))});
    }

  struct Job {
    OptimizerKind a1, a2;
    std::size_t window;
    std::vector<evalkit::FoldResult> forest, baseline;
    std::vector<evalkit::ImportanceEntry> importance;
    std::vector<std::string> warnings;
  };
  std::vector<Job> jobs;
  for (auto a1 : cfg.portfolio)
    for (auto a2 : cfg.portfolio)
      for (auto w : model_windows(cfg)) jobs.push_back({a1, a2, w, {}, {}, {}, {}});
  say(log, "train-eval: " + std::to_string(jobs.size()) + " model families");

  auto hyper = cfg.forest;
  hyper.workers = 1;
  std::atomic<std::size_t> finished{0};
  parallel_for(jobs.size(), cfg.workers, [&](std::size_t k) {
    auto& job = jobs[k];
    const auto data = evalkit::build_dataset(outcomes, feats, job.a1, job.a2, job.window, cfg.windows);
    if (data.rows() == 0) {
      job.warnings.push_back(kind_str(job.a1) + "->" + kind_str(job.a2) + " window " +
                             evalkit::window_label(job.window) + ": no rows");
      return;
    }
    evalkit::FoldHook hook;
    if (job.window == cfg.importance_window && cfg.importance_window != 0)
      hook = [&](const evalkit::FoldResult& fr, const evalkit::Learner& learner, const evalkit::Dataset& test) {
        if (fr.n_test < 10) return;
        const auto& model = dynamic_cast<const evalkit::ForestLearner&>(learner).model();
        const auto seed = hash_seed({cfg.seed, static_cast<std::uint64_t>(job.a1),
                                     static_cast<std::uint64_t>(job.a2), std::uint64_t(fr.held_out_fid), 0x1a9});
        job.importance.push_back({job.a1, job.a2, job.window, fr.held_out_fid,
                                  evalkit::permutation_importance(model, test.X, test.y, cfg.importance_repeats, seed)});
      };
    job.forest = evalkit::evaluate_lofo(data, evalkit::forest_factory(data, hyper, cfg.seed), &job.warnings, hook);
    job.baseline = evalkit::evaluate_lofo(data, evalkit::baseline_factory());
    const auto n = ++finished;
    say(log, "train-eval: " + std::to_string(n) + "/" + std::to_string(jobs.size()) + " (" + kind_str(job.a1) +
                 "->" + kind_str(job.a2) + ", window " + evalkit::window_label(job.window) + ")");
  });

  std::vector<evalkit::FoldResult> forest_all, baseline_all;
  std::vector<evalkit::ImportanceEntry> imp_folds, imp_agg;
  std::string warnings;
  for (auto& job : jobs) {
    forest_all.insert(forest_all.end(), job.forest.begin(), job.forest.end());
    baseline_all.insert(baseline_all.end(), job.baseline.begin(), job.baseline.end());
    imp_folds.insert(imp_folds.end(), job.importance.begin(), job.importance.end());
    if (!job.importance.empty()) imp_agg.push_back(evalkit::aggregate_importance(job.importance));
    for (const auto& w : job.warnings) warnings += w + "\n";
    for (std::size_t i = 0; i < job.forest.size(); ++i) {
      const auto& f = job.forest[i];
      const auto wl = evalkit::window_label(f.window);
      long_rows.push_back({"fold_mse", kind_str(f.a1), kind_str(f.a2), wl, std::to_string(f.held_out_fid), "",
                           "mse_forest", csv::format_double(f.mse)});
      long_rows.push_back({"fold_mse", kind_str(f.a1), kind_str(f.a2), wl, std::to_string(f.held_out_fid), "",
                           "mse_baseline", csv::format_double(job.baseline[i].mse)});
      for (std::size_t t = 0; t < f.switch_points.size(); ++t)
        long_rows.push_back({"switch_point_mse", kind_str(f.a1), kind_str(f.a2), wl, std::to_string(f.held_out_fid),
                             std::to_string(f.switch_points[t]), "mse_forest",
                             csv::format_double(f.mse_by_switch_point[t])});
    }
  }
  evalkit::write_fold_report(dir / "fold_report.csv", forest_all);
  evalkit::write_fold_report(dir / "fold_report_baseline.csv", baseline_all);
  evalkit::write_switch_point_report(dir / "switch_point_mse.csv", forest_all);
  evalkit::write_predictions(dir / "predictions.csv", forest_all);
  evalkit::write_importance(dir / "importance.csv", imp_agg, false);
  evalkit::write_importance(dir / "importance_folds.csv", imp_folds, true);
  csv::write_table(dir / "plot_long.csv", "plot_long",
                   {"figure", "a1", "a2", "window", "fid", "switch_point", "metric", "value"}, long_rows);
  write_text(dir / "warnings.log", warnings);
  say(log, "train-eval: wrote reports to " + dir.string());
}

FamilySignal family_signal(const std::vector<evalkit::FoldResult>& forest_folds,
                           const std::vector<evalkit::FoldResult>& baseline_folds, OptimizerKind a1, OptimizerKind a2,
                           const std::vector<std::size_t>& windows) {
  std::map<std::pair<std::size_t, int>, double> base;
  for (const auto& b : baseline_folds)
    if (b.a1 == a1 && b.a2 == a2) base[{b.window, b.held_out_fid}] = b.mse;
  FamilySignal s;
  std::vector<double> truth, pred;
  double sum = 0.0, sum_base = 0.0;
  for (const auto& f : forest_folds) {
    if (f.a1 != a1 || f.a2 != a2 || std::find(windows.begin(), windows.end(), f.window) == windows.end()) continue;
    auto it = base.find({f.window, f.held_out_fid});
    if (it == base.end()) throw std::invalid_argument("baseline fold missing for fid " + std::to_string(f.held_out_fid));
    ++s.folds;
    s.folds_beating_baseline += f.mse < it->second;
    sum += f.mse;
    sum_base += it->second;
    for (Eigen::Index i = 0; i < f.r_true.size(); ++i) {
      truth.push_back(f.r_true[i]);
      pred.push_back(f.r_pred[i]);
    }
  }
  s.pooled_rows = truth.size();
  s.pooled_correlation = pearson(truth, pred);
  s.mean_mse = s.folds ? sum / double(s.folds) : kNaN;
  s.mean_baseline_mse = s.folds ? sum_base / double(s.folds) : kNaN;
  return s;
}

EvalTables read_eval_tables(const fs::path& eval_dir) {
  auto read_folds = [](const fs::path& p, const char* name) {
    const auto t = csv::read_table(p, name);
    std::vector<evalkit::FoldResult> out;
    const int c_a1 = t.require_column("a1"), c_a2 = t.require_column("a2"), c_w = t.require_column("window"),
              c_f = t.require_column("held_out_fid"), c_n = t.require_column("n_test"),
              c_m = t.require_column("mse");
    for (const auto& row : t.rows) {
      evalkit::FoldResult f;
      f.a1 = optim::parse_kind(row[c_a1]);
      f.a2 = optim::parse_kind(row[c_a2]);
      f.window = row[c_w] == "all" ? evalkit::kAllWindows : std::stoull(row[c_w]);
      f.held_out_fid = std::stoi(row[c_f]);
      f.n_test = std::stoull(row[c_n]);
      f.mse = csv::parse_double(row[c_m]);
      out.push_back(std::move(f));
    }
    return out;
  };
  EvalTables e;
  e.forest = read_folds(eval_dir / "fold_report.csv", "fold_report");
  e.baseline = read_folds(eval_dir / "fold_report_baseline.csv", "fold_report");

  const auto t = csv::read_table(eval_dir / "predictions.csv", "predictions");
  const int c_a1 = t.require_column("a1"), c_a2 = t.require_column("a2"), c_w = t.require_column("window"),
            c_f = t.require_column("held_out_fid"), c_iid = t.require_column("iid"), c_run = t.require_column("run"),
            c_t = t.require_column("switch_point"), c_rt = t.require_column("r_true"),
            c_rp = t.require_column("r_pred");
  std::map<std::tuple<int, int, std::size_t, int>, std::size_t> index;
  for (std::size_t k = 0; k < e.forest.size(); ++k) {
    const auto& f = e.forest[k];
    index[{static_cast<int>(f.a1), static_cast<int>(f.a2), f.window, f.held_out_fid}] = k;
  }
  std::vector<std::vector<double>> rt(e.forest.size()), rp(e.forest.size());
  for (const auto& row : t.rows) {
    const auto key = std::tuple(static_cast<int>(optim::parse_kind(row[c_a1])),
                                static_cast<int>(optim::parse_kind(row[c_a2])),
                                row[c_w] == "all" ? evalkit::kAllWindows : std::size_t(std::stoull(row[c_w])),
                                std::stoi(row[c_f]));
    auto it = index.find(key);
    if (it == index.end()) throw SchemaError("predictions row without a matching fold");
    auto& f = e.forest[it->second];
    f.test_iid.push_back(std::stoi(row[c_iid]));
    f.test_run.push_back(std::stoi(row[c_run]));
    f.test_switch_point.push_back(std::stoull(row[c_t]));
    rt[it->second].push_back(csv::parse_double(row[c_rt]));
    rp[it->second].push_back(csv::parse_double(row[c_rp]));
  }
  for (std::size_t k = 0; k < e.forest.size(); ++k) {
    e.forest[k].r_true = Eigen::Map<Vector>(rt[k].data(), static_cast<Eigen::Index>(rt[k].size()));
    e.forest[k].r_pred = Eigen::Map<Vector>(rp[k].data(), static_cast<Eigen::Index>(rp[k].size()));
  }
  return e;
}

void cmd_report(const ExperimentConfig& cfg, const Log& log) {
  cfg.validate();
  const fs::path root = cfg.output_dir;
  const fs::path eval_dir = root / "eval";
  if (!fs::exists(eval_dir / "fold_report.csv"))
    throw std::invalid_argument("evaluation outputs missing under " + eval_dir.string() + "; run `train-eval` first");
  const auto outcomes = switchlab::read_outcomes(root / "sweep" / "outcomes.csv");
  const auto frac = switchlab::fraction_beneficial(outcomes);
  const auto tables = read_eval_tables(eval_dir);

  std::ostringstream txt;
  nlohmann::json js;
  txt << "config hash: " << cfg.hash() << "\n";
  txt << "outcomes: " << outcomes.size() << "\n\n";
  txt << "fraction of switches with r > 0 (rows a1, columns a2)\n";
  txt << "      ";
  for (auto a2 : optim::kAllKinds) txt << kind_str(a2) << "\t";
  txt << "\n";
  for (auto a1 : optim::kAllKinds) {
    txt << kind_str(a1) << "   ";
    for (auto a2 : optim::kAllKinds) {
      const double v = frac(static_cast<int>(a1), static_cast<int>(a2));
      txt << fmt(v) << "\t";
      js["fraction_beneficial"][kind_str(a1)][kind_str(a2)] = std::isnan(v) ? nlohmann::json() : nlohmann::json(v);
    }
    txt << "\n";
  }
  txt << "\nmodel families: forest vs constant-mean baseline, leave-one-function-out\n";
  txt << "a1\ta2\twindow\tfolds\tbeat_baseline\tmean_mse\tmean_baseline_mse\tpooled_corr\n";
  for (auto a1 : cfg.portfolio)
    for (auto a2 : cfg.portfolio) {
      std::vector<std::vector<std::size_t>> groups;
      for (auto w : model_windows(cfg)) groups.push_back({w});
      groups.push_back(cfg.windows);
      for (const auto& g : groups) {
        const auto s = family_signal(tables.forest, tables.baseline, a1, a2, g);
        const std::string label = g.size() == 1 ? evalkit::window_label(g[0]) : "pooled";
        txt << kind_str(a1) << "\t" << kind_str(a2) << "\t" << label << "\t" << s.folds << "\t"
            << s.folds_beating_baseline << "\t" << fmt(s.mean_mse) << "\t" << fmt(s.mean_baseline_mse) << "\t"
            << fmt(s.pooled_correlation) << "\n";
        auto& e = js["families"][kind_str(a1) + "->" + kind_str(a2)][label];
        e = {{"folds", s.folds},
             {"folds_beating_baseline", s.folds_beating_baseline},
             {"mean_mse", s.mean_mse},
             {"mean_baseline_mse", s.mean_baseline_mse},
             {"pooled_rows", s.pooled_rows}};
        e["pooled_correlation"] =
            std::isnan(s.pooled_correlation) ? nlohmann::json() : nlohmann::json(s.pooled_correlation);
      }
    }
  js["config_hash"] = cfg.hash();
  write_text(root / "report.txt", txt.str());
  write_text(root / "report.json", js.dump(2) + "\n");
  say(log, "report: wrote " + (root / "report.txt").string());
}

}  // namespace dynas::pipeline
