#pragma once

#include <memory>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "dynas/common.hpp"

namespace dynas::problems {

inline constexpr int kNumFunctions = 24;
inline constexpr double kPrecisionFloor = 1e-8;

struct Interval {
  double lo = -5.0;
  double hi = 5.0;
};

namespace detail {
struct InstanceData;
}

/// A transformed noiseless benchmark function with known optimum. Immutable
/// and cheap to copy; copies share the transformation data.
class ProblemInstance {
 public:
  int fid() const;
  int iid() const;
  int dim() const;
  const Vector& x_opt() const;
  double f_opt() const;
  const std::vector<Interval>& bounds() const;
  std::string_view name() const;
  bool multimodal() const;

  /// f(x); defined on all of R^dim.
  double evaluate(const Vector& x) const;

 private:
  friend ProblemInstance instantiate(int fid, int iid, int dim);
  explicit ProblemInstance(std::shared_ptr<const detail::InstanceData> data);
  std::shared_ptr<const detail::InstanceData> data_;
};

ProblemInstance instantiate(int fid, int iid, int dim);

/// max(f - f_opt, 1e-8)
double precision(const ProblemInstance& inst, double f);

std::string_view function_name(int fid);
bool is_multimodal(int fid);

/// [{fid, name, multimodal, dim, iid, f_opt}, ...] over the cartesian grid.
nlohmann::json suite_manifest(const std::vector<int>& fids, const std::vector<int>& iids,
                              const std::vector<int>& dims);

/// Seeded Haar-distributed orthogonal matrix (QR of a Gaussian matrix).
Matrix random_rotation(int dim, std::uint64_t seed);

}  // namespace dynas::problems
