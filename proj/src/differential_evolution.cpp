#include "dynas/optimizers.hpp"

namespace dynas::optim {

DifferentialEvolution::DifferentialEvolution(int dim, std::uint64_t seed, Matrix population,
                                             const Hyper& hyper)
    : Optimizer(OptimizerKind::kDe, dim, seed),
      hyper_(hyper),
      pop_(std::move(population)),
      fit_(Vector::Constant(pop_.rows(), std::numeric_limits<double>::infinity())) {
  if (pop_.rows() < 4) throw std::invalid_argument("DE needs a population of at least 4");
  if (pop_.cols() != dim) throw std::invalid_argument("DE population has wrong width");
  hyper_.population = static_cast<int>(pop_.rows());
}

DifferentialEvolution::DifferentialEvolution(int dim, std::uint64_t seed, Matrix population,
                                             Vector fitness, const Hyper& hyper)
    : DifferentialEvolution(dim, seed, std::move(population), hyper) {
  if (fitness.size() != pop_.rows()) throw std::invalid_argument("DE fitness length mismatch");
  fit_ = std::move(fitness);
  evaluated_ = true;
  for (Eigen::Index i = 0; i < pop_.rows(); ++i) offer_best(pop_.row(i).transpose(), fit_[i]);
}

// rand/1/bin; the first batch after a cold start is the population itself.
std::vector<Vector> DifferentialEvolution::generate() {
  const auto n = static_cast<int>(pop_.rows());
  std::vector<Vector> out(n);
  if (!evaluated_) {
    for (int i = 0; i < n; ++i) out[i] = pop_.row(i).transpose();
    return out;
  }
  std::uniform_int_distribution<int> pick(0, n - 1);
  std::uniform_int_distribution<int> pick_dim(0, dim() - 1);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  for (int i = 0; i < n; ++i) {
    int r1, r2, r3;
    do r1 = pick(rng_); while (r1 == i);
    do r2 = pick(rng_); while (r2 == i || r2 == r1);
    do r3 = pick(rng_); while (r3 == i || r3 == r1 || r3 == r2);
    const int jrand = pick_dim(rng_);
    Vector trial = pop_.row(i).transpose();
    for (int j = 0; j < dim(); ++j)
      if (u01(rng_) < hyper_.de_cr || j == jrand)
        trial[j] = pop_(r1, j) + hyper_.de_f * (pop_(r2, j) - pop_(r3, j));
    out[i] = std::move(trial);
  }
  return out;
}

void DifferentialEvolution::update(const std::vector<Vector>& xs, const std::vector<double>& fs) {
  const auto n = pop_.rows();
  if (!evaluated_) {
    for (Eigen::Index i = 0; i < n; ++i) fit_[i] = fs[i];
    evaluated_ = true;
    return;
  }
  for (Eigen::Index i = 0; i < n; ++i)
    if (fs[i] <= fit_[i]) {
      pop_.row(i) = xs[i].transpose();
      fit_[i] = fs[i];
    }
}

nlohmann::json DifferentialEvolution::save_payload() const {
  return {{"F", hyper_.de_f},
          {"CR", hyper_.de_cr},
          {"population", detail::to_json(pop_)},
          {"fitness", detail::to_json(fit_)},
          {"evaluated", evaluated_}};
}

void DifferentialEvolution::load_payload(const nlohmann::json& j) {
  hyper_.de_f = j.at("F").get<double>();
  hyper_.de_cr = j.at("CR").get<double>();
  pop_ = detail::matrix_from_json(j.at("population"));
  fit_ = detail::vector_from_json(j.at("fitness"));
  evaluated_ = j.at("evaluated").get<bool>();
  if (pop_.cols() != dim() || fit_.size() != pop_.rows() || pop_.rows() < 4)
    throw DecodeError("DE payload has inconsistent dimensions");
  hyper_.population = static_cast<int>(pop_.rows());
}

}  // namespace dynas::optim
