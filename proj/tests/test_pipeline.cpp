#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "doctest.h"
#include "dynas/config.hpp"
#include "dynas/csv.hpp"
#include "dynas/pipeline.hpp"

using namespace dynas;
namespace fs = std::filesystem;

namespace {

ExperimentConfig tiny(const std::string& name) {
  ExperimentConfig c;
  c.seed = 3;
  c.dims = {2};
  c.fids = {1, 6, 21};
  c.iids = {1};
  c.runs = 1;
  c.budget = 400;
  c.grid = {100, 200, 100};
  c.horizon = 100;
  c.windows = {50};
  c.forest.n_trees = 10;
  c.self_switch_points = {100, 300};
  c.importance_window = 50;
  c.importance_repeats = 2;
  c.output_dir = (fs::temp_directory_path() / "dynas_tests" / name).string();
  fs::remove_all(c.output_dir);
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("config JSON round-trip and validation") {
  ExperimentConfig c = tiny("cfg");
  c.performance_mode = switchlab::PerformanceMode::kBestSoFar;
  c.checkpoints = {100, 400};
  const auto back = config_from_json(to_json(c));
  CHECK(to_json(back) == to_json(c));
  CHECK(back.hash() == c.hash());

  auto j = to_json(c);
  j["bogus"] = 1;
  CHECK_THROWS_AS(config_from_json(j), std::invalid_argument);
  j = to_json(c);
  j["forest"]["depth"] = 3;
  CHECK_THROWS_AS(config_from_json(j), std::invalid_argument);

  ExperimentConfig bad = c;
  bad.grid = {100, 350, 50};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = c;
  bad.runs = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  CHECK_NOTHROW(c.validate());

  const auto desk = load_config(fs::path(DYNAS_SOURCE_DIR) / "configs" / "desk.json");
  CHECK(desk.budget == 2000);
  CHECK_NOTHROW(load_config(fs::path(DYNAS_SOURCE_DIR) / "configs" / "full.json"));
  CHECK_THROWS(load_config("/nonexistent/config.json"));
}

TEST_CASE("config hash ignores output directory and workers only") {
  const auto c = tiny("hash");
  auto d = c;
  d.output_dir = "elsewhere";
  d.workers = 7;
  CHECK(d.hash() == c.hash());
  CHECK(c.hash().size() == 16);
  d.seed = 4;
  CHECK(d.hash() != c.hash());
  d = c;
  d.forest.n_trees = 11;
  CHECK(d.hash() != c.hash());
  d = c;
  d.horizon = 99;
  CHECK(d.hash() != c.hash());
}

TEST_CASE("summary checkpoints default to tenths of the budget") {
  auto c = tiny("cp");
  c.budget = 2000;
  const auto cp = c.summary_checkpoints();
  REQUIRE(cp.size() == 10);
  CHECK(cp.front() == 200);
  CHECK(cp.back() == 2000);
}

TEST_CASE("parallel_for runs every index once and propagates errors") {
  std::vector<int> hits(100, 0);
  pipeline::parallel_for(100, 4, [&](std::size_t i) { hits[i] += 1; });
  for (int h : hits) CHECK(h == 1);
  CHECK_THROWS_AS(pipeline::parallel_for(10, 3,
                                         [](std::size_t i) {
                                           if (i == 5) throw std::runtime_error("boom");
                                         }),
                  std::runtime_error);
}

TEST_CASE("static run writes one trajectory per run and is deterministic") {
  auto c = tiny("static");
  pipeline::cmd_static_run(c);
  const fs::path out = c.output_dir;
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(out / "trajectories")) {
    ++files;
    const auto arcs = trajectory::read_csv(e.path());
    REQUIRE(arcs.size() == 1);
    CHECK(arcs[0].size() == c.budget);
  }
  CHECK(files == 3 * 3);
  const auto summary = csv::read_table(out / "static_summary.csv", "static_summary");
  CHECK(summary.rows.size() == 3 * 3 * 10);
  const auto first = slurp(out / "trajectories" / "f6_i1_d2_r1_pso.csv");
  c.workers = 3;
  pipeline::cmd_static_run(c);
  CHECK(slurp(out / "trajectories" / "f6_i1_d2_r1_pso.csv") == first);
}

TEST_CASE("self-switch table shape") {
  auto c = tiny("self");
  pipeline::cmd_self_switch(c);
  const auto t = csv::read_table(fs::path(c.output_dir) / "self_switch.csv", "self_switch");
  CHECK(t.header == std::vector<std::string>{"algo", "switch_point", "f1", "f6", "f21"});
  CHECK(t.rows.size() == 3 * 2);
  c.self_switch_disabled = true;
  pipeline::cmd_self_switch(c);
  const auto z = csv::read_table(fs::path(c.output_dir) / "self_switch.csv", "self_switch");
  for (const auto& r : z.rows)
    for (std::size_t k = 2; k < r.size(); ++k) CHECK(csv::parse_double(r[k]) == 0.0);
}

TEST_CASE("sweep resumes from its ledger without duplicates") {
  auto c = tiny("resume");
  pipeline::cmd_sweep(c);
  const fs::path dir = fs::path(c.output_dir) / "sweep";
  const auto outcomes = slurp(dir / "outcomes.csv");
  const auto feats = slurp(dir / "features.csv");
  CHECK(switchlab::read_outcomes(dir / "outcomes.csv").size() == 9 * 2 * 3);

  // Forget the last four units, as if the process had been killed.
  std::vector<std::string> lines;
  {
    std::ifstream in(dir / "jobs.ledger");
    for (std::string l; std::getline(in, l);) lines.push_back(l);
  }
  REQUIRE(lines.size() == 9);
  {
    std::ofstream out(dir / "jobs.ledger", std::ios::trunc);
    for (std::size_t k = 0; k + 4 < lines.size(); ++k) out << lines[k] << "\n";
  }
  fs::remove(dir / "outcomes.csv");
  fs::remove(dir / "units" / (lines.back().substr(5) + ".outcomes.csv"));
  c.workers = 2;
  pipeline::cmd_sweep(c);
  CHECK(slurp(dir / "outcomes.csv") == outcomes);
  CHECK(slurp(dir / "features.csv") == feats);

  std::multiset<std::string> ids;
  {
    std::ifstream in(dir / "jobs.ledger");
    for (std::string l; std::getline(in, l);) ids.insert(l);
  }
  CHECK(ids.size() == 9);
  CHECK(std::set<std::string>(ids.begin(), ids.end()).size() == 9);

  const auto manifest = nlohmann::json::parse(slurp(dir / "manifest.json"));
  CHECK(manifest.at("config_hash") == c.hash());
  CHECK(manifest.at("rows").at("outcomes") == 54);

  auto other = c;
  other.seed = 99;
  CHECK_THROWS_AS(pipeline::cmd_sweep(other), std::invalid_argument);
}

TEST_CASE("train-eval and report run end to end and reproduce") {
  auto c = tiny("e2e");
  pipeline::cmd_sweep(c);
  pipeline::cmd_train_eval(c);
  pipeline::cmd_report(c);
  const fs::path out = c.output_dir;
  for (const char* f : {"eval/fraction_beneficial.csv", "eval/fold_report.csv", "eval/fold_report_baseline.csv",
                        "eval/predictions.csv", "eval/importance.csv", "eval/importance_folds.csv",
                        "eval/plot_long.csv", "eval/switch_point_mse.csv", "report.txt", "report.json"})
    CHECK_MESSAGE(fs::exists(out / f), f);
  CHECK(fs::exists(out / "eval" / "heatmaps" / "heatmap_cma_de.csv"));

  const auto folds = csv::read_table(out / "eval" / "fold_report.csv", "fold_report");
  // 9 families x (1 window + all) x 3 held-out functions
  CHECK(folds.rows.size() == 9 * 2 * 3);

  const auto tables = pipeline::read_eval_tables(out / "eval");
  CHECK(tables.forest.size() == folds.rows.size());
  CHECK(tables.baseline.size() == folds.rows.size());
  const auto sig = pipeline::family_signal(tables.forest, tables.baseline, optim::OptimizerKind::kCmaes,
                                           optim::OptimizerKind::kDe, {50});
  CHECK(sig.folds == 3);
  CHECK(sig.pooled_rows == 3 * 2);

  const auto report = slurp(out / "report.txt");
  const auto fold_csv = slurp(out / "eval" / "fold_report.csv");
  c.workers = 3;
  pipeline::cmd_train_eval(c);
  pipeline::cmd_report(c);
  CHECK(slurp(out / "report.txt") == report);
  CHECK(slurp(out / "eval" / "fold_report.csv") == fold_csv);
}

TEST_CASE("train-eval without sweep outputs is a usage error") {
  const auto c = tiny("missing");
  CHECK_THROWS_AS(pipeline::cmd_train_eval(c), std::invalid_argument);
  CHECK_THROWS_AS(pipeline::cmd_report(c), std::invalid_argument);
}
