#include <algorithm>
#include <cmath>
#include <numeric>

#include "dynas/optimizers.hpp"

namespace dynas::optim {

namespace {
constexpr double kMinSigma = 1e-200;
constexpr double kMaxSigma = 1e200;
constexpr double kEigenFloorRel = 1e-14;
}  // namespace

CmaEs::CmaEs(int dim, std::uint64_t seed, Vector mean, double sigma)
    : Optimizer(OptimizerKind::kCmaes, dim, seed), mean_(std::move(mean)), sigma_(sigma) {
  if (mean_.size() != dim) throw std::invalid_argument("CmaEs: mean has wrong length");
  if (!(sigma_ > 0) || !std::isfinite(sigma_)) throw std::invalid_argument("CmaEs: sigma must be positive");
  set_strategy_constants();
  C_ = Matrix::Identity(dim, dim);
  ps_ = Vector::Zero(dim);
  pc_ = Vector::Zero(dim);
  decompose();
}

// Default (mu/mu_w, lambda) parameters from Hansen's tutorial.
void CmaEs::set_strategy_constants() {
  const double n = dim();
  lambda_ = cmaes_lambda(dim());
  mu_ = lambda_ / 2;
  weights_.resize(mu_);
  for (int i = 0; i < mu_; ++i) weights_[i] = std::log((lambda_ + 1) / 2.0) - std::log(i + 1.0);
  weights_ /= weights_.sum();
  mueff_ = 1.0 / weights_.squaredNorm();
  cs_ = (mueff_ + 2.0) / (n + mueff_ + 5.0);
  ds_ = 1.0 + 2.0 * std::max(0.0, std::sqrt((mueff_ - 1.0) / (n + 1.0)) - 1.0) + cs_;
  cc_ = (4.0 + mueff_ / n) / (n + 4.0 + 2.0 * mueff_ / n);
  c1_ = 2.0 / ((n + 1.3) * (n + 1.3) + mueff_);
  cmu_ = std::min(1.0 - c1_, 2.0 * (mueff_ - 2.0 + 1.0 / mueff_) / ((n + 2.0) * (n + 2.0) + mueff_));
  chi_n_ = std::sqrt(n) * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n));
}

void CmaEs::decompose() {
  C_ = 0.5 * (C_ + C_.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(C_);
  Vector ev = es.eigenvalues();
  const double floor = std::max(ev.maxCoeff() * kEigenFloorRel, 1e-300);
  if (ev.minCoeff() < floor || !ev.allFinite()) {
    ev = ev.unaryExpr([floor](double v) { return std::isfinite(v) ? std::max(v, floor) : floor; });
    C_ = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
    C_ = 0.5 * (C_ + C_.transpose());
  }
  B_ = es.eigenvectors();
  eigvals_ = ev;
}

std::vector<Vector> CmaEs::generate() {
  std::normal_distribution<double> n01;
  const Vector dvec = eigvals_.cwiseSqrt();
  std::vector<Vector> xs(lambda_);
  Vector z(dim());
  for (int k = 0; k < lambda_; ++k) {
    for (int i = 0; i < dim(); ++i) z[i] = n01(rng_);
    xs[k] = mean_ + sigma_ * (B_ * dvec.cwiseProduct(z));
  }
  return xs;
}

void CmaEs::update(const std::vector<Vector>& xs, const std::vector<double>& fs) {
  const int n = dim();
  std::vector<int> order(lambda_);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return fs[a] < fs[b]; });

  Matrix ysel(n, mu_);
  for (int i = 0; i < mu_; ++i) ysel.col(i) = (xs[order[i]] - mean_) / sigma_;
  const Vector yw = ysel * weights_;
  mean_ += sigma_ * yw;

  // C^{-1/2} y_w
  const Vector inv_sqrt = eigvals_.cwiseSqrt().cwiseInverse();
  const Vector cinv_yw = B_ * inv_sqrt.cwiseProduct(B_.transpose() * yw);

  ps_ = (1.0 - cs_) * ps_ + std::sqrt(cs_ * (2.0 - cs_) * mueff_) * cinv_yw;
  ++generation_;
  const double ps_norm = ps_.norm();
  const double denom = std::sqrt(1.0 - std::pow(1.0 - cs_, 2.0 * double(generation_)));
  const bool hsig = ps_norm / denom < (1.4 + 2.0 / (n + 1.0)) * chi_n_;

  pc_ = (1.0 - cc_) * pc_ + (hsig ? std::sqrt(cc_ * (2.0 - cc_) * mueff_) : 0.0) * yw;

  const double delta = hsig ? 0.0 : cc_ * (2.0 - cc_);
  Matrix rank_mu = ysel * weights_.asDiagonal() * ysel.transpose();
  C_ = (1.0 + c1_ * delta - c1_ - cmu_) * C_ + c1_ * pc_ * pc_.transpose() + cmu_ * rank_mu;

  sigma_ *= std::exp((cs_ / ds_) * (ps_norm / chi_n_ - 1.0));
  if (!std::isfinite(sigma_)) sigma_ = kMaxSigma;
  sigma_ = std::clamp(sigma_, kMinSigma, kMaxSigma);

  decompose();
}

nlohmann::json CmaEs::save_payload() const {
  return {{"mean", detail::to_json(mean_)},
          {"sigma", sigma_},
          {"C", detail::to_json(C_)},
          {"ps", detail::to_json(ps_)},
          {"pc", detail::to_json(pc_)},
          {"generation", generation_},
          {"B", detail::to_json(B_)},
          {"eigvals", detail::to_json(eigvals_)}};
}

void CmaEs::load_payload(const nlohmann::json& j) {
  mean_ = detail::vector_from_json(j.at("mean"));
  sigma_ = j.at("sigma").get<double>();
  C_ = detail::matrix_from_json(j.at("C"));
  ps_ = detail::vector_from_json(j.at("ps"));
  pc_ = detail::vector_from_json(j.at("pc"));
  generation_ = j.at("generation").get<std::int64_t>();
  // The decomposition is restored verbatim rather than recomputed so the
  // next ask() is bitwise identical.
  B_ = detail::matrix_from_json(j.at("B"));
  eigvals_ = detail::vector_from_json(j.at("eigvals"));
  const auto n = dim();
  if (mean_.size() != n || ps_.size() != n || pc_.size() != n || C_.rows() != n ||
      C_.cols() != n || B_.rows() != n || B_.cols() != n || eigvals_.size() != n)
    throw DecodeError("CmaEs payload has inconsistent dimensions");
}

}  // namespace dynas::optim
