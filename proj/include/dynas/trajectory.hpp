#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "dynas/common.hpp"
#include "dynas/eval_record.hpp"
#include "dynas/optimizers.hpp"
#include "dynas/problems.hpp"

namespace dynas::trajectory {

struct RunMeta {
  std::string run_id;
  int fid = 0;
  int iid = 0;
  int dim = 0;
  std::string algorithm;
  std::uint64_t seed = 0;
};

/// Ordered evaluation log of one run.
class Archive {
 public:
  Archive() = default;
  explicit Archive(RunMeta meta, std::size_t capacity = std::numeric_limits<std::size_t>::max());

  const RunMeta& meta() const { return meta_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  std::size_t capacity() const { return capacity_; }
  const std::vector<EvalRecord>& records() const { return records_; }
  const EvalRecord& operator[](std::size_t i) const { return records_[i]; }

  /// Records 1..k.
  std::span<const EvalRecord> prefix(std::size_t k) const;
  /// Records first..last (1-based, inclusive).
  std::span<const EvalRecord> slice(std::size_t first, std::size_t last) const;

  void append(Vector x, double f);

  /// min f over records 1..k
  double best_so_far(std::size_t k) const;

 private:
  RunMeta meta_;
  std::size_t capacity_ = std::numeric_limits<std::size_t>::max();
  std::vector<EvalRecord> records_;
  std::vector<double> running_best_;
};

/// n x d design matrix plus fitness vector.
struct Sample {
  Matrix X;
  Vector y;
};

/// Records end-size+1 .. end, order preserved.
Sample window(const Archive& archive, std::size_t end, std::size_t size);
Sample to_sample(std::span<const EvalRecord> records);

/// Optimizer plus the evaluations of a batch that straddles a segment
/// boundary; the tell for that batch happens once it is complete.
struct RunSession {
  std::unique_ptr<optim::Optimizer> optimizer;
  std::vector<double> partial_fs;
};

/// Appends exactly `budget` evaluations to `archive`.
void run(const problems::ProblemInstance& problem, RunSession& session, std::size_t budget,
         Archive& archive);

/// One row per record; all archives must share the same dimension.
void write_csv(const std::filesystem::path& path, const std::vector<const Archive*>& archives);
std::vector<Archive> read_csv(const std::filesystem::path& path);

}  // namespace dynas::trajectory
