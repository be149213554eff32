#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <sstream>

#include "dynas/optimizers.hpp"

namespace dynas::optim {

namespace {

constexpr int kSnapshotVersion = 1;

double bounds_width(const Bounds& bounds) {
  double w = 0.0;
  for (const auto& b : bounds) w = std::max(w, b.hi - b.lo);
  return w;
}

Vector uniform_point(Rng& rng, const Bounds& bounds) {
  Vector x(static_cast<Eigen::Index>(bounds.size()));
  for (std::size_t i = 0; i < bounds.size(); ++i) x[i] = uniform(rng, bounds[i].lo, bounds[i].hi);
  return x;
}

Matrix uniform_population(Rng& rng, const Bounds& bounds, int n) {
  Matrix pop(n, static_cast<Eigen::Index>(bounds.size()));
  for (int i = 0; i < n; ++i) pop.row(i) = uniform_point(rng, bounds).transpose();
  return pop;
}

void check_bounds(int dim, const Bounds& bounds) {
  if (dim < 2) throw std::invalid_argument("optimizer dim must be >= 2");
  if (static_cast<int>(bounds.size()) != dim)
    throw std::invalid_argument("bounds length does not match dim");
  for (const auto& b : bounds)
    if (!(b.lo < b.hi)) throw std::invalid_argument("empty bounds interval");
}

}  // namespace

std::string_view to_string(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::kCmaes:
      return "cma";
    case OptimizerKind::kDe:
      return "de";
    case OptimizerKind::kPso:
      return "pso";
  }
  throw std::logic_error("bad OptimizerKind");
}

OptimizerKind parse_kind(std::string_view tag) {
  std::string t(tag);
  std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::tolower(c); });
  if (t == "cma" || t == "cmaes" || t == "cma-es" || t == "cma_es") return OptimizerKind::kCmaes;
  if (t == "de") return OptimizerKind::kDe;
  if (t == "pso") return OptimizerKind::kPso;
  throw std::invalid_argument("unknown optimizer '" + std::string(tag) + "'");
}

int cmaes_lambda(int dim) { return 4 + static_cast<int>(std::floor(3.0 * std::log(double(dim)))); }

Optimizer::Optimizer(OptimizerKind kind, int dim, std::uint64_t seed)
    : rng_(seed),
      kind_(kind),
      dim_(dim),
      best_f_(std::numeric_limits<double>::infinity()),
      best_x_(Vector::Constant(dim, kNaN)) {}

const std::vector<Vector>& Optimizer::ask() {
  if (awaiting_) throw ProtocolError("ask() called while a batch is awaiting tell()");
  pending_ = generate();
  awaiting_ = true;
  return pending_;
}

void Optimizer::tell(const std::vector<Vector>& xs, const std::vector<double>& fs) {
  if (!awaiting_) throw ProtocolError("tell() without a pending ask()");
  if (xs.size() != pending_.size() || fs.size() != pending_.size())
    throw ProtocolError("tell(): batch size " + std::to_string(xs.size()) + "/" +
                        std::to_string(fs.size()) + " does not match pending " +
                        std::to_string(pending_.size()));
  for (std::size_t i = 0; i < xs.size(); ++i)
    if (xs[i].size() != dim_ || xs[i] != pending_[i])
      throw ProtocolError("tell(): point " + std::to_string(i) + " differs from the asked batch");
  update(xs, fs);
  for (std::size_t i = 0; i < xs.size(); ++i) offer_best(xs[i], fs[i]);
  awaiting_ = false;
  pending_.clear();
}

void Optimizer::offer_best(const Vector& x, double f) {
  if (f < best_f_) {
    best_f_ = f;
    best_x_ = x;
  }
}

std::vector<std::uint8_t> Optimizer::snapshot() const {
  std::ostringstream rng_state;
  rng_state << rng_;
  nlohmann::json pend = nlohmann::json::array();
  for (const auto& p : pending_) pend.push_back(detail::to_json(p));
  nlohmann::json j = {
      {"format", "dynas.optimizer"},
      {"version", kSnapshotVersion},
      {"kind", std::string(to_string(kind_))},
      {"dim", dim_},
      {"rng", rng_state.str()},
      {"awaiting", awaiting_},
      {"pending", pend},
      {"best_f", best_f_},
      {"best_x", detail::to_json(best_x_)},
      {"payload", save_payload()},
  };
  return nlohmann::json::to_cbor(j);
}

std::unique_ptr<Optimizer> restore(std::span<const std::uint8_t> blob) {
  try {
    auto j = nlohmann::json::from_cbor(blob.begin(), blob.end());
    if (j.at("format") != "dynas.optimizer") throw DecodeError("not an optimizer snapshot");
    if (j.at("version").get<int>() != kSnapshotVersion)
      throw DecodeError("unsupported snapshot version " + j.at("version").dump());
    const auto kind = parse_kind(j.at("kind").get<std::string>());
    const int dim = j.at("dim").get<int>();
    if (dim < 2) throw DecodeError("bad dim in snapshot");

    std::unique_ptr<Optimizer> opt;
    switch (kind) {
      case OptimizerKind::kCmaes:
        opt = std::make_unique<CmaEs>(dim, 0, Vector::Zero(dim), 1.0);
        break;
      case OptimizerKind::kDe:
        opt = std::make_unique<DifferentialEvolution>(dim, 0, Matrix::Zero(4, dim), Hyper{});
        break;
      case OptimizerKind::kPso:
        opt = std::make_unique<ParticleSwarm>(dim, 0, Matrix::Zero(1, dim), Hyper{});
        break;
    }
    std::istringstream rs(j.at("rng").get<std::string>());
    rs >> opt->rng_;
    if (!rs) throw DecodeError("bad rng state");
    opt->awaiting_ = j.at("awaiting").get<bool>();
    opt->pending_.clear();
    for (const auto& p : j.at("pending")) opt->pending_.push_back(detail::vector_from_json(p));
    opt->best_f_ = j.at("best_f").get<double>();
    opt->best_x_ = detail::vector_from_json(j.at("best_x"));
    opt->load_payload(j.at("payload"));
    return opt;
  } catch (const DecodeError&) {
    throw;
  } catch (const std::exception& e) {
    throw DecodeError(std::string("corrupt optimizer snapshot: ") + e.what());
  }
}

std::unique_ptr<Optimizer> init(OptimizerKind kind, int dim, const Bounds& bounds,
                                std::uint64_t seed, const Hyper& hyper) {
  check_bounds(dim, bounds);
  // Initialization draws from a stream separate from the optimizer's own.
  Rng init_rng(hash_seed({seed, 0x1417}));
  switch (kind) {
    case OptimizerKind::kCmaes:
      return std::make_unique<CmaEs>(dim, seed, uniform_point(init_rng, bounds),
                                     0.3 * bounds_width(bounds));
    case OptimizerKind::kDe:
      return std::make_unique<DifferentialEvolution>(
          dim, seed, uniform_population(init_rng, bounds, hyper.population), hyper);
    case OptimizerKind::kPso:
      return std::make_unique<ParticleSwarm>(
          dim, seed, uniform_population(init_rng, bounds, hyper.population), hyper);
  }
  throw std::logic_error("bad OptimizerKind");
}

WarmStart warm_start(OptimizerKind kind, std::span<const EvalRecord> source, int dim,
                     const Bounds& bounds, std::uint64_t seed, const Hyper& hyper) {
  check_bounds(dim, bounds);
  for (const auto& r : source)
    if (r.x.size() != dim) throw std::invalid_argument("warm_start: archive point has wrong length");

  WarmStart out;
  Rng pad_rng(hash_seed({seed, 0x9ad}));
  const std::size_t need = kind == OptimizerKind::kCmaes ? 3 : static_cast<std::size_t>(hyper.population);
  const std::size_t have = std::min(need, source.size());
  if (source.size() < need)
    out.warnings.push_back("warm_start(" + std::string(to_string(kind)) + "): archive has " +
                           std::to_string(source.size()) + " points, padded to " +
                           std::to_string(need) + " with uniform samples");

  const double inf = std::numeric_limits<double>::infinity();

  switch (kind) {
    case OptimizerKind::kCmaes: {
      std::vector<std::size_t> order(source.size());
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) { return source[a].f < source[b].f; });
      Matrix pts(3, dim);
      for (std::size_t k = 0; k < 3; ++k)
        pts.row(k) = (k < have ? source[order[k]].x : uniform_point(pad_rng, bounds)).transpose();
      Vector mean = pts.colwise().mean().transpose();
      double sigma = 0.0;
      for (int j = 0; j < dim; ++j) {
        const double var = (pts.col(j).array() - mean[j]).square().sum() / 2.0;
        sigma = std::max(sigma, std::sqrt(var));
      }
      sigma = std::max(sigma, 1e-5);
      auto cma = std::make_unique<CmaEs>(dim, seed, mean, sigma);
      if (have > 0) cma->offer_best(source[order[0]].x, source[order[0]].f);
      out.optimizer = std::move(cma);
      break;
    }
    case OptimizerKind::kDe:
    case OptimizerKind::kPso: {
      const int n = hyper.population;
      Matrix pop(n, dim);
      Vector fit(n);
      const std::size_t first = source.size() - have;
      for (std::size_t k = 0; k < have; ++k) {
        pop.row(static_cast<Eigen::Index>(k)) = source[first + k].x.transpose();
        fit[static_cast<Eigen::Index>(k)] = source[first + k].f;
      }
      for (std::size_t k = have; k < static_cast<std::size_t>(n); ++k) {
        pop.row(static_cast<Eigen::Index>(k)) = uniform_point(pad_rng, bounds).transpose();
        fit[static_cast<Eigen::Index>(k)] = inf;
      }
      if (kind == OptimizerKind::kDe) {
        out.optimizer = std::make_unique<DifferentialEvolution>(dim, seed, pop, fit, hyper);
      } else {
        Vector gbest = pop.row(0).transpose();
        double gbest_f = inf;
        for (const auto& r : source)
          if (r.f < gbest_f) {
            gbest_f = r.f;
            gbest = r.x;
          }
        out.optimizer = std::make_unique<ParticleSwarm>(dim, seed, pop, fit, gbest, gbest_f, hyper);
      }
      break;
    }
  }
  return out;
}

namespace detail {

nlohmann::json to_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vector vector_from_json(const nlohmann::json& j) {
  auto v = j.get<std::vector<double>>();
  return Eigen::Map<Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

nlohmann::json to_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) rows.push_back(to_json(Vector(m.row(i).transpose())));
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", rows}};
}

Matrix matrix_from_json(const nlohmann::json& j) {
  const auto r = j.at("rows").get<Eigen::Index>();
  const auto c = j.at("cols").get<Eigen::Index>();
  const auto& data = j.at("data");
  if (static_cast<Eigen::Index>(data.size()) != r) throw DecodeError("matrix row count mismatch");
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    Vector row = vector_from_json(data[static_cast<std::size_t>(i)]);
    if (row.size() != c) throw DecodeError("matrix column count mismatch");
    m.row(i) = row.transpose();
  }
  return m;
}

}  // namespace detail

}  // namespace dynas::optim
