#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "dynas/common.hpp"
#include "dynas/eval_record.hpp"
#include "dynas/problems.hpp"

namespace dynas::optim {

enum class OptimizerKind { kCmaes, kDe, kPso };

inline constexpr std::array<OptimizerKind, 3> kAllKinds = {
    OptimizerKind::kCmaes, OptimizerKind::kDe, OptimizerKind::kPso};

/// "cma", "de", "pso"
std::string_view to_string(OptimizerKind kind);
/// Accepts the short tags and a few aliases ("cmaes", "cma-es"), case-insensitive.
OptimizerKind parse_kind(std::string_view tag);

using Bounds = std::vector<problems::Interval>;

struct Hyper {
  int population = 30;         // DE and PSO
  double de_f = 0.5;           // differential weight
  double de_cr = 0.9;          // binomial crossover rate
  double pso_inertia = 0.7213475204444817;    // 1 / (2 ln 2)
  double pso_cognitive = 1.1931471805599454;  // 0.5 + ln 2
  double pso_social = 1.1931471805599454;
};

/// Ask/tell optimizer. A batch obtained from ask() must be told back in
/// full before the next ask().
class Optimizer {
 public:
  virtual ~Optimizer() = default;
  Optimizer(const Optimizer&) = delete;
  Optimizer& operator=(const Optimizer&) = delete;

  OptimizerKind kind() const { return kind_; }
  int dim() const { return dim_; }
  virtual std::size_t batch_size() const = 0;

  const std::vector<Vector>& ask();
  void tell(const std::vector<Vector>& xs, const std::vector<double>& fs);

  bool awaiting_tell() const { return awaiting_; }
  const std::vector<Vector>& pending() const { return pending_; }

  /// Best evaluation told so far (or inherited through a warm start).
  double best_f() const { return best_f_; }
  const Vector& best_x() const { return best_x_; }

  /// Versioned CBOR encoding of the complete state, including the RNG.
  std::vector<std::uint8_t> snapshot() const;

  /// Records (x, f) as the incumbent if it improves on it.
  void offer_best(const Vector& x, double f);

 protected:
  Optimizer(OptimizerKind kind, int dim, std::uint64_t seed);

  virtual std::vector<Vector> generate() = 0;
  virtual void update(const std::vector<Vector>& xs, const std::vector<double>& fs) = 0;
  virtual nlohmann::json save_payload() const = 0;
  virtual void load_payload(const nlohmann::json& j) = 0;

  Rng rng_;

 private:
  friend std::unique_ptr<Optimizer> restore(std::span<const std::uint8_t> blob);

  OptimizerKind kind_;
  int dim_;
  bool awaiting_ = false;
  std::vector<Vector> pending_;
  double best_f_;
  Vector best_x_;
};

/// Cold start: random initialization inside `bounds`.
std::unique_ptr<Optimizer> init(OptimizerKind kind, int dim, const Bounds& bounds,
                                std::uint64_t seed, const Hyper& hyper = {});

struct WarmStart {
  std::unique_ptr<Optimizer> optimizer;
  std::vector<std::string> warnings;
};

/// Builds a state from a preceding run segment. CMA-ES takes the centroid
/// and spread of the 3 best points; DE and PSO take the last N points as
/// their population. Short archives are padded with uniform points.
WarmStart warm_start(OptimizerKind kind, std::span<const EvalRecord> source, int dim,
                     const Bounds& bounds, std::uint64_t seed, const Hyper& hyper = {});

/// Throws DecodeError on a corrupt, truncated or unknown-version blob.
std::unique_ptr<Optimizer> restore(std::span<const std::uint8_t> blob);

/// 4 + floor(3 ln dim)
int cmaes_lambda(int dim);

// Concrete types are exposed for inspection in tests.

class CmaEs final : public Optimizer {
 public:
  CmaEs(int dim, std::uint64_t seed, Vector mean, double sigma);

  std::size_t batch_size() const override { return static_cast<std::size_t>(lambda_); }
  const Vector& mean() const { return mean_; }
  double sigma() const { return sigma_; }
  const Matrix& covariance() const { return C_; }
  const Vector& eigenvalues() const { return eigvals_; }

 protected:
  std::vector<Vector> generate() override;
  void update(const std::vector<Vector>& xs, const std::vector<double>& fs) override;
  nlohmann::json save_payload() const override;
  void load_payload(const nlohmann::json& j) override;

 private:
  void set_strategy_constants();
  void decompose();

  int lambda_ = 0;
  int mu_ = 0;
  Vector weights_;
  double mueff_ = 0, cs_ = 0, ds_ = 0, cc_ = 0, c1_ = 0, cmu_ = 0, chi_n_ = 0;

  Vector mean_;
  double sigma_ = 1.0;
  Matrix C_;
  Vector ps_, pc_;
  std::int64_t generation_ = 0;

  Matrix B_;
  Vector eigvals_;
};

class DifferentialEvolution final : public Optimizer {
 public:
  DifferentialEvolution(int dim, std::uint64_t seed, Matrix population, const Hyper& hyper);
  DifferentialEvolution(int dim, std::uint64_t seed, Matrix population, Vector fitness,
                        const Hyper& hyper);

  std::size_t batch_size() const override { return static_cast<std::size_t>(pop_.rows()); }
  const Matrix& population() const { return pop_; }
  const Vector& fitness() const { return fit_; }
  bool evaluated() const { return evaluated_; }

 protected:
  std::vector<Vector> generate() override;
  void update(const std::vector<Vector>& xs, const std::vector<double>& fs) override;
  nlohmann::json save_payload() const override;
  void load_payload(const nlohmann::json& j) override;

 private:
  Hyper hyper_;
  Matrix pop_;  // N x dim
  Vector fit_;
  bool evaluated_ = false;
};

class ParticleSwarm final : public Optimizer {
 public:
  ParticleSwarm(int dim, std::uint64_t seed, Matrix positions, const Hyper& hyper);
  ParticleSwarm(int dim, std::uint64_t seed, Matrix positions, Vector fitness,
                const Vector& global_best, double global_best_f, const Hyper& hyper);

  std::size_t batch_size() const override { return static_cast<std::size_t>(pos_.rows()); }
  const Matrix& positions() const { return pos_; }
  const Matrix& velocities() const { return vel_; }
  const Matrix& personal_best() const { return pbest_; }
  const Vector& personal_best_f() const { return pbest_f_; }
  const Vector& global_best() const { return gbest_; }
  double global_best_f() const { return gbest_f_; }

 protected:
  std::vector<Vector> generate() override;
  void update(const std::vector<Vector>& xs, const std::vector<double>& fs) override;
  nlohmann::json save_payload() const override;
  void load_payload(const nlohmann::json& j) override;

 private:
  Hyper hyper_;
  Matrix pos_, vel_, pbest_;
  Vector pbest_f_;
  Vector gbest_;
  double gbest_f_;
  bool evaluated_ = false;
};

namespace detail {
nlohmann::json to_json(const Vector& v);
Vector vector_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Matrix& m);
Matrix matrix_from_json(const nlohmann::json& j);
}  // namespace detail

}  // namespace dynas::optim
