#include "dynas/optimizers.hpp"

namespace dynas::optim {

ParticleSwarm::ParticleSwarm(int dim, std::uint64_t seed, Matrix positions, const Hyper& hyper)
    : Optimizer(OptimizerKind::kPso, dim, seed),
      hyper_(hyper),
      pos_(std::move(positions)),
      vel_(Matrix::Zero(pos_.rows(), pos_.cols())),
      pbest_(pos_),
      pbest_f_(Vector::Constant(pos_.rows(), std::numeric_limits<double>::infinity())),
      gbest_(pos_.row(0).transpose()),
      gbest_f_(std::numeric_limits<double>::infinity()) {
  if (pos_.rows() < 1) throw std::invalid_argument("PSO needs at least one particle");
  if (pos_.cols() != dim) throw std::invalid_argument("PSO positions have wrong width");
  hyper_.population = static_cast<int>(pos_.rows());
}

ParticleSwarm::ParticleSwarm(int dim, std::uint64_t seed, Matrix positions, Vector fitness,
                             const Vector& global_best, double global_best_f, const Hyper& hyper)
    : ParticleSwarm(dim, seed, std::move(positions), hyper) {
  if (fitness.size() != pos_.rows()) throw std::invalid_argument("PSO fitness length mismatch");
  if (global_best.size() != dim) throw std::invalid_argument("PSO global best has wrong length");
  pbest_f_ = std::move(fitness);
  gbest_ = global_best;
  gbest_f_ = global_best_f;
  for (Eigen::Index i = 0; i < pos_.rows(); ++i)
    if (pbest_f_[i] < gbest_f_) {
      gbest_f_ = pbest_f_[i];
      gbest_ = pbest_.row(i).transpose();
    }
  evaluated_ = true;
  offer_best(gbest_, gbest_f_);
}

std::vector<Vector> ParticleSwarm::generate() {
  const auto n = pos_.rows();
  if (evaluated_) {
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < pos_.cols(); ++j) {
        const double r1 = u01(rng_);
        const double r2 = u01(rng_);
        vel_(i, j) = hyper_.pso_inertia * vel_(i, j) +
                     hyper_.pso_cognitive * r1 * (pbest_(i, j) - pos_(i, j)) +
                     hyper_.pso_social * r2 * (gbest_[j] - pos_(i, j));
        pos_(i, j) += vel_(i, j);
      }
  }
  std::vector<Vector> out(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) out[i] = pos_.row(i).transpose();
  return out;
}

void ParticleSwarm::update(const std::vector<Vector>& xs, const std::vector<double>& fs) {
  for (Eigen::Index i = 0; i < pos_.rows(); ++i) {
    if (fs[i] < pbest_f_[i]) {
      pbest_f_[i] = fs[i];
      pbest_.row(i) = xs[i].transpose();
    }
    if (fs[i] < gbest_f_) {
      gbest_f_ = fs[i];
      gbest_ = xs[i];
    }
  }
  evaluated_ = true;
}

nlohmann::json ParticleSwarm::save_payload() const {
  return {{"inertia", hyper_.pso_inertia},
          {"cognitive", hyper_.pso_cognitive},
          {"social", hyper_.pso_social},
          {"positions", detail::to_json(pos_)},
          {"velocities", detail::to_json(vel_)},
          {"pbest", detail::to_json(pbest_)},
          {"pbest_f", detail::to_json(pbest_f_)},
          {"gbest", detail::to_json(gbest_)},
          {"gbest_f", gbest_f_},
          {"evaluated", evaluated_}};
}

void ParticleSwarm::load_payload(const nlohmann::json& j) {
  hyper_.pso_inertia = j.at("inertia").get<double>();
  hyper_.pso_cognitive = j.at("cognitive").get<double>();
  hyper_.pso_social = j.at("social").get<double>();
  pos_ = detail::matrix_from_json(j.at("positions"));
  vel_ = detail::matrix_from_json(j.at("velocities"));
  pbest_ = detail::matrix_from_json(j.at("pbest"));
  pbest_f_ = detail::vector_from_json(j.at("pbest_f"));
  gbest_ = detail::vector_from_json(j.at("gbest"));
  gbest_f_ = j.at("gbest_f").get<double>();
  evaluated_ = j.at("evaluated").get<bool>();
  const auto n = pos_.rows();
  if (pos_.cols() != dim() || vel_.rows() != n || vel_.cols() != dim() || pbest_.rows() != n ||
      pbest_.cols() != dim() || pbest_f_.size() != n || gbest_.size() != dim())
    throw DecodeError("PSO payload has inconsistent dimensions");
  hyper_.population = static_cast<int>(n);
}

}  // namespace dynas::optim
