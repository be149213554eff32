#include "dynas/trajectory.hpp"

#include <algorithm>
#include <charconv>
#include <map>

#include "dynas/csv.hpp"

namespace dynas::trajectory {

Archive::Archive(RunMeta meta, std::size_t capacity) : meta_(std::move(meta)), capacity_(capacity) {}

std::span<const EvalRecord> Archive::prefix(std::size_t k) const {
  if (k > records_.size()) throw std::out_of_range("Archive::prefix beyond end");
  return {records_.data(), k};
}

std::span<const EvalRecord> Archive::slice(std::size_t first, std::size_t last) const {
  if (first < 1 || first > last + 1 || last > records_.size())
    throw std::out_of_range("Archive::slice out of range");
  return {records_.data() + (first - 1), last - first + 1};
}

void Archive::append(Vector x, double f) {
  if (records_.size() >= capacity_) throw std::length_error("archive budget exhausted");
  const double best = running_best_.empty() ? f : std::min(running_best_.back(), f);
  records_.push_back({static_cast<std::int64_t>(records_.size() + 1), std::move(x), f});
  running_best_.push_back(best);
}

double Archive::best_so_far(std::size_t k) const {
  if (k < 1 || k > records_.size()) throw std::out_of_range("best_so_far: k out of range");
  return running_best_[k - 1];
}

Sample to_sample(std::span<const EvalRecord> records) {
  Sample s;
  if (records.empty()) return s;
  const auto d = records.front().x.size();
  s.X.resize(static_cast<Eigen::Index>(records.size()), d);
  s.y.resize(static_cast<Eigen::Index>(records.size()));
  for (std::size_t i = 0; i < records.size(); ++i) {
    s.X.row(static_cast<Eigen::Index>(i)) = records[i].x.transpose();
    s.y[static_cast<Eigen::Index>(i)] = records[i].f;
  }
  return s;
}

Sample window(const Archive& archive, std::size_t end, std::size_t size) {
  if (size == 0) throw std::invalid_argument("window size must be positive");
  if (size > end)
    throw InsufficientHistory("window of " + std::to_string(size) + " needs at least that many "
                              "evaluations, have " + std::to_string(end));
  if (end > archive.size()) throw std::out_of_range("window end beyond archive");
  return to_sample(archive.slice(end - size + 1, end));
}

void run(const problems::ProblemInstance& problem, RunSession& session, std::size_t budget,
         Archive& archive) {
  if (!session.optimizer) throw std::invalid_argument("run: session has no optimizer");
  auto& opt = *session.optimizer;
  std::size_t remaining = budget;
  while (remaining > 0) {
    if (!opt.awaiting_tell()) {
      opt.ask();
      session.partial_fs.clear();
    }
    const auto& batch = opt.pending();
    while (session.partial_fs.size() < batch.size() && remaining > 0) {
      const auto& x = batch[session.partial_fs.size()];
      const double f = problem.evaluate(x);
      archive.append(x, f);
      session.partial_fs.push_back(f);
      --remaining;
    }
    if (session.partial_fs.size() == batch.size()) {
      const std::vector<Vector> xs = batch;
      opt.tell(xs, session.partial_fs);
      session.partial_fs.clear();
    }
  }
}

void write_csv(const std::filesystem::path& path, const std::vector<const Archive*>& archives) {
  int dim = archives.empty() ? 0 : archives.front()->meta().dim;
  std::vector<std::string> header = {"run_id", "fid", "iid", "dim",    "algo",
                                     "seed",   "index", "f",  "best_f"};
  for (int j = 0; j < dim; ++j) header.push_back("x_" + std::to_string(j));
  std::vector<std::vector<std::string>> rows;
  for (const Archive* a : archives) {
    const auto& m = a->meta();
    if (m.dim != dim) throw std::invalid_argument("write_csv: mixed dimensions");
    for (std::size_t k = 0; k < a->size(); ++k) {
      const auto& r = (*a)[k];
      std::vector<std::string> row = {m.run_id,
                                      std::to_string(m.fid),
                                      std::to_string(m.iid),
                                      std::to_string(m.dim),
                                      m.algorithm,
                                      std::to_string(m.seed),
                                      std::to_string(r.index),
                                      csv::format_double(r.f),
                                      csv::format_double(a->best_so_far(k + 1))};
      for (int j = 0; j < dim; ++j) row.push_back(csv::format_double(r.x[j]));
      rows.push_back(std::move(row));
    }
  }
  csv::write_table(path, "trajectory", header, rows);
}

std::vector<Archive> read_csv(const std::filesystem::path& path) {
  auto t = csv::read_table(path, "trajectory");
  const int c_run = t.require_column("run_id"), c_fid = t.require_column("fid"),
            c_iid = t.require_column("iid"), c_dim = t.require_column("dim"),
            c_algo = t.require_column("algo"), c_seed = t.require_column("seed"),
            c_index = t.require_column("index"), c_f = t.require_column("f");
  std::vector<int> c_x;
  for (int j = 0; t.column("x_" + std::to_string(j)) >= 0; ++j) c_x.push_back(t.column("x_" + std::to_string(j)));
  std::vector<Archive> out;
  std::map<std::string, std::size_t> by_run;
  for (const auto& row : t.rows) {
    auto it = by_run.find(row[c_run]);
    if (it == by_run.end()) {
      RunMeta m;
      m.run_id = row[c_run];
      m.fid = std::stoi(row[c_fid]);
      m.iid = std::stoi(row[c_iid]);
      m.dim = std::stoi(row[c_dim]);
      m.algorithm = row[c_algo];
      m.seed = std::stoull(row[c_seed]);
      out.emplace_back(m);
      it = by_run.emplace(m.run_id, out.size() - 1).first;
    }
    Archive& a = out[it->second];
    const int dim = a.meta().dim;
    if (dim != static_cast<int>(c_x.size())) throw SchemaError("trajectory: dim disagrees with x columns");
    Vector x(dim);
    for (int j = 0; j < dim; ++j) x[j] = csv::parse_double(row[c_x[j]]);
    if (std::stoll(row[c_index]) != static_cast<long long>(a.size() + 1))
      throw SchemaError("trajectory: non-consecutive index in run " + a.meta().run_id);
    a.append(std::move(x), csv::parse_double(row[c_f]));
  }
  return out;
}

}  // namespace dynas::trajectory
