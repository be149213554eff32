#include "dynas/problems.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <string>

namespace dynas::problems {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Random object salts; a new function may add salts but never reuse one.
enum Salt : std::uint64_t {
  kSaltXopt = 1,
  kSaltFopt = 2,
  kSaltR = 3,
  kSaltQ = 4,
  kSaltSigns = 5,
  kSaltPeaks = 6,
  kSaltPeakCond = 7,
};

constexpr std::array<std::string_view, kNumFunctions> kNames = {
    "sphere",
    "ellipsoid_separable",
    "rastrigin_separable",
    "buche_rastrigin",
    "linear_slope",
    "attractive_sector",
    "step_ellipsoid",
    "rosenbrock",
    "rosenbrock_rotated",
    "ellipsoid",
    "discus",
    "bent_cigar",
    "sharp_ridge",
    "different_powers",
    "rastrigin",
    "weierstrass",
    "schaffers_f7",
    "schaffers_f7_ill_conditioned",
    "griewank_rosenbrock",
    "schwefel",
    "gallagher_101",
    "gallagher_21",
    "katsuura",
    "lunacek_bi_rastrigin",
};

double tosz(double x) {
  if (x == 0.0) return 0.0;
  const double xh = std::log(std::abs(x));
  const double c1 = x > 0 ? 10.0 : 5.5;
  const double c2 = x > 0 ? 7.9 : 3.1;
  return (x > 0 ? 1.0 : -1.0) * std::exp(xh + 0.049 * (std::sin(c1 * xh) + std::sin(c2 * xh)));
}

Vector tosz(const Vector& x) { return x.unaryExpr([](double v) { return tosz(v); }); }

Vector tasy(const Vector& x, double beta) {
  const auto d = x.size();
  Vector out = x;
  for (Eigen::Index i = 0; i < d; ++i)
    if (x[i] > 0)
      out[i] = std::pow(x[i], 1.0 + beta * double(i) / double(d - 1) * std::sqrt(x[i]));
  return out;
}

// Diagonal of the conditioning matrix Lambda^alpha.
Vector conditioning(int d, double alpha) {
  Vector v(d);
  for (int i = 0; i < d; ++i) v[i] = std::pow(alpha, 0.5 * double(i) / double(d - 1));
  return v;
}

double fpen(const Vector& x) {
  double s = 0.0;
  for (double v : x) {
    const double e = std::abs(v) - 5.0;
    if (e > 0) s += e * e;
  }
  return s;
}

double rastrigin_core(const Vector& z) {
  double s = 0.0;
  for (double v : z) s += 1.0 - std::cos(2.0 * kPi * v);
  return 10.0 * s + z.squaredNorm();
}

double rosenbrock_core(const Vector& z) {
  double s = 0.0;
  for (Eigen::Index i = 0; i + 1 < z.size(); ++i) {
    const double a = z[i] * z[i] - z[i + 1];
    const double b = z[i] - 1.0;
    s += 100.0 * a * a + b * b;
  }
  return s;
}

double weighted_squares(const Vector& z, double max_exponent) {
  const auto d = z.size();
  double s = 0.0;
  for (Eigen::Index i = 0; i < d; ++i)
    s += std::pow(10.0, max_exponent * double(i) / double(d - 1)) * z[i] * z[i];
  return s;
}

double schaffers_core(const Vector& z) {
  const auto d = z.size();
  double s = 0.0;
  for (Eigen::Index i = 0; i + 1 < d; ++i) {
    const double si = std::sqrt(z[i] * z[i] + z[i + 1] * z[i + 1]);
    const double sq = std::sqrt(si);
    const double sn = std::sin(50.0 * std::pow(si, 0.2));
    s += sq + sq * sn * sn;
  }
  s /= double(d - 1);
  return s * s;
}

}  // namespace

namespace detail {

struct InstanceData {
  int fid = 0;
  int iid = 0;
  int dim = 0;
  Vector xopt;
  double fopt = 0.0;
  std::vector<Interval> bounds;
  Matrix R;
  Matrix Q;
  Vector signs;
  Vector lambda;  // function-specific conditioning diagonal
  double rosen_scale = 1.0;

  // Gallagher peaks, stored in the rotated frame.
  Matrix peak_centers;  // dim x peaks, already multiplied by R
  Matrix peak_cond;     // dim x peaks
  Vector peak_weights;

  double raw(const Vector& x) const;
};

double InstanceData::raw(const Vector& x) const {
  const int d = dim;
  switch (fid) {
    case 1:
      return (x - xopt).squaredNorm();
    case 2:
      return weighted_squares(tosz(Vector(x - xopt)), 6.0);
    case 3: {
      Vector z = lambda.cwiseProduct(tasy(tosz(Vector(x - xopt)), 0.2));
      return rastrigin_core(z);
    }
    case 4: {
      Vector z = tosz(Vector(x - xopt));
      for (int i = 0; i < d; ++i) {
        double s = std::pow(10.0, 0.5 * double(i) / double(d - 1));
        if (z[i] > 0 && i % 2 == 0) s *= 10.0;
        z[i] *= s;
      }
      return rastrigin_core(z) + 100.0 * fpen(x);
    }
    case 5: {
      // Linear slope towards xopt. Instead of a plateau past xopt the slope
      // is mirrored, so xopt stays the unique minimizer.
      double f = 0.0;
      for (int i = 0; i < d; ++i) {
        const double s = (xopt[i] >= 0 ? 1.0 : -1.0) * std::pow(10.0, double(i) / double(d - 1));
        const double z = xopt[i] * x[i] < xopt[i] * xopt[i] ? x[i] : 2.0 * xopt[i] - x[i];
        f += std::abs(s) * std::abs(xopt[i]) - s * z;
      }
      return std::max(f, 0.0);
    }
    case 6: {
      Vector z = Q * lambda.cwiseProduct(R * (x - xopt));
      double s = 0.0;
      for (int i = 0; i < d; ++i) {
        const double w = z[i] * xopt[i] > 0 ? 100.0 : 1.0;
        s += (w * z[i]) * (w * z[i]);
      }
      return std::pow(tosz(s), 0.9);
    }
    case 7: {
      Vector zh = lambda.cwiseProduct(R * (x - xopt));
      Vector zt(d);
      for (int i = 0; i < d; ++i)
        zt[i] = std::abs(zh[i]) > 0.5 ? std::floor(0.5 + zh[i])
                                      : std::floor(0.5 + 10.0 * zh[i]) / 10.0;
      Vector z = Q * zt;
      return 0.1 * std::max(std::abs(zh[0]) / 1e4, weighted_squares(z, 2.0)) + fpen(x);
    }
    case 8: {
      Vector z = rosen_scale * (x - xopt);
      z.array() += 1.0;
      return rosenbrock_core(z);
    }
    case 9: {
      Vector z = rosen_scale * (R * (x - xopt));
      z.array() += 1.0;
      return rosenbrock_core(z);
    }
    case 10:
      return weighted_squares(tosz(Vector(R * (x - xopt))), 6.0);
    case 11: {
      Vector z = tosz(Vector(R * (x - xopt)));
      return 1e6 * z[0] * z[0] + z.tail(d - 1).squaredNorm();
    }
    case 12: {
      Vector z = R * tasy(R * (x - xopt), 0.5);
      return z[0] * z[0] + 1e6 * z.tail(d - 1).squaredNorm();
    }
    case 13: {
      Vector z = Q * lambda.cwiseProduct(R * (x - xopt));
      return z[0] * z[0] + 100.0 * z.tail(d - 1).norm();
    }
    case 14: {
      Vector z = R * (x - xopt);
      double s = 0.0;
      for (int i = 0; i < d; ++i) s += std::pow(std::abs(z[i]), 2.0 + 4.0 * double(i) / double(d - 1));
      return std::sqrt(s);
    }
    case 15: {
      Vector z = R * lambda.cwiseProduct(Q * tasy(tosz(Vector(R * (x - xopt))), 0.2));
      return rastrigin_core(z);
    }
    case 16: {
      Vector z = R * lambda.cwiseProduct(Q * tosz(Vector(R * (x - xopt))));
      // sum_k 2^-k (cos(2 pi 3^k (z + 1/2)) + 1) is the Weierstrass term
      // minus its value at z = 0, so it is non-negative by construction.
      double total = 0.0;
      for (int i = 0; i < d; ++i) {
        double a = 0.0, half = 1.0, three = 1.0;
        for (int k = 0; k < 12; ++k) {
          a += half * (std::cos(2.0 * kPi * three * (z[i] + 0.5)) + 1.0);
          half *= 0.5;
          three *= 3.0;
        }
        total += a;
      }
      const double m = total / double(d);
      return 10.0 * m * m * m + 10.0 / double(d) * fpen(x);
    }
    case 17:
    case 18: {
      Vector z = lambda.cwiseProduct(Q * tasy(R * (x - xopt), 0.5));
      return schaffers_core(z) + 10.0 * fpen(x);
    }
    case 19: {
      Vector z = rosen_scale * (R * (x - xopt));
      z.array() += 1.0;
      double s = 0.0;
      for (int i = 0; i + 1 < d; ++i) {
        const double a = z[i] * z[i] - z[i + 1];
        const double b = z[i] - 1.0;
        const double si = 100.0 * a * a + b * b;
        s += si / 4000.0 - std::cos(si) + 1.0;
      }
      return 10.0 / double(d - 1) * s;
    }
    case 20: {
      // Canonical Schwefel optimum sits at signs * 4.2096874633 / 2; the
      // whole landscape is shifted so that it lands on xopt instead.
      constexpr double kOpt2 = 4.2096874633;
      Vector xh = 2.0 * signs.cwiseProduct(Vector(x - xopt + 0.5 * kOpt2 * signs));
      Vector zh = xh;
      for (int i = 1; i < d; ++i) zh[i] = xh[i] + 0.25 * (xh[i - 1] - kOpt2);
      Vector z = 100.0 * (lambda.array() * (zh.array() - kOpt2) + kOpt2).matrix();
      double s = 0.0;
      for (double v : z) s += v * std::sin(std::sqrt(std::abs(v)));
      return std::max(0.0, -s / (100.0 * d) + 4.189828872724339) + 100.0 * fpen(Vector(z / 100.0));
    }
    case 21:
    case 22: {
      Vector rx = R * x;
      double best = 0.0;
      for (Eigen::Index p = 0; p < peak_centers.cols(); ++p) {
        const double q = (rx - peak_centers.col(p)).cwiseAbs2().dot(peak_cond.col(p));
        best = std::max(best, peak_weights[p] * std::exp(-q / (2.0 * d)));
      }
      const double t = tosz(10.0 - best);
      return t * t + fpen(x);
    }
    case 23: {
      Vector z = Q * lambda.cwiseProduct(R * (x - xopt));
      const double expo = 10.0 / std::pow(double(d), 1.2);
      double prod = 1.0;
      for (int i = 0; i < d; ++i) {
        double s = 0.0, p2 = 1.0;
        for (int j = 1; j <= 32; ++j) {
          p2 *= 2.0;
          const double v = p2 * z[i];
          s += std::abs(v - std::nearbyint(v)) / p2;
        }
        prod *= std::pow(1.0 + double(i + 1) * s, expo);
      }
      return 10.0 / double(d * d) * (prod - 1.0) + fpen(x);
    }
    case 24: {
      constexpr double mu0 = 2.5;
      const double s = 1.0 - 1.0 / (2.0 * std::sqrt(double(d) + 20.0) - 8.2);
      const double mu1 = -std::sqrt((mu0 * mu0 - 1.0) / s);
      Vector xh = 2.0 * signs.cwiseProduct(Vector(x - xopt));
      xh.array() += mu0;
      Vector z = Q * lambda.cwiseProduct(R * (xh.array() - mu0).matrix());
      const double a = (xh.array() - mu0).square().sum();
      const double b = double(d) + s * (xh.array() - mu1).square().sum();
      double c = 0.0;
      for (double v : z) c += 1.0 - std::cos(2.0 * kPi * v);
      return std::min(a, b) + 10.0 * c + 1e4 * fpen(x);
    }
    default:
      throw std::logic_error("unreachable fid");
  }
}

}  // namespace detail

Matrix random_rotation(int dim, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> n01;
  Matrix g(dim, dim);
  for (int j = 0; j < dim; ++j)
    for (int i = 0; i < dim; ++i) g(i, j) = n01(rng);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ();
  const Matrix& r = qr.matrixQR();
  for (int j = 0; j < dim; ++j)
    if (r(j, j) < 0) q.col(j) *= -1.0;
  return q;
}

ProblemInstance::ProblemInstance(std::shared_ptr<const detail::InstanceData> data)
    : data_(std::move(data)) {}

int ProblemInstance::fid() const { return data_->fid; }
int ProblemInstance::iid() const { return data_->iid; }
int ProblemInstance::dim() const { return data_->dim; }
const Vector& ProblemInstance::x_opt() const { return data_->xopt; }
double ProblemInstance::f_opt() const { return data_->fopt; }
const std::vector<Interval>& ProblemInstance::bounds() const { return data_->bounds; }
std::string_view ProblemInstance::name() const { return function_name(data_->fid); }
bool ProblemInstance::multimodal() const { return is_multimodal(data_->fid); }

double ProblemInstance::evaluate(const Vector& x) const {
  if (x.size() != data_->dim)
    throw std::invalid_argument("evaluate: expected length " + std::to_string(data_->dim) +
                                ", got " + std::to_string(x.size()));
  return data_->raw(x) + data_->fopt;
}

std::string_view function_name(int fid) {
  if (fid < 1 || fid > kNumFunctions) throw std::invalid_argument("fid out of range");
  return kNames[fid - 1];
}

bool is_multimodal(int fid) {
  if (fid < 1 || fid > kNumFunctions) throw std::invalid_argument("fid out of range");
  return fid == 3 || fid == 4 || fid >= 15;
}

ProblemInstance instantiate(int fid, int iid, int dim) {
  if (fid < 1 || fid > kNumFunctions)
    throw std::invalid_argument("fid must be in 1..24, got " + std::to_string(fid));
  if (iid < 1) throw std::invalid_argument("iid must be >= 1, got " + std::to_string(iid));
  if (dim < 2) throw std::invalid_argument("dim must be >= 2, got " + std::to_string(dim));

  auto seed = [&](Salt salt) {
    return hash_seed({std::uint64_t(fid), std::uint64_t(iid), std::uint64_t(dim), salt});
  };

  auto data = std::make_shared<detail::InstanceData>();
  data->fid = fid;
  data->iid = iid;
  data->dim = dim;
  data->bounds.assign(dim, Interval{});

  {
    Rng rng(seed(kSaltXopt));
    data->xopt.resize(dim);
    for (int i = 0; i < dim; ++i) data->xopt[i] = uniform(rng, -4.0, 4.0);
  }
  {
    Rng rng(seed(kSaltFopt));
    data->fopt = uniform(rng, -100.0, 100.0);
  }
  data->R = random_rotation(dim, seed(kSaltR));
  data->Q = random_rotation(dim, seed(kSaltQ));
  {
    Rng rng(seed(kSaltSigns));
    data->signs.resize(dim);
    for (int i = 0; i < dim; ++i) data->signs[i] = (rng() & 1) ? 1.0 : -1.0;
  }
  data->rosen_scale = std::max(1.0, std::sqrt(double(dim)) / 8.0);

  switch (fid) {
    case 3:
    case 6:
    case 7:
    case 13:
    case 15:
    case 17:
    case 20:
      data->lambda = conditioning(dim, 10.0);
      break;
    case 16:
      data->lambda = conditioning(dim, 0.01);
      break;
    case 18:
      data->lambda = conditioning(dim, 1000.0);
      break;
    case 23:
    case 24:
      data->lambda = conditioning(dim, 100.0);
      break;
    default:
      break;
  }

  if (fid == 21 || fid == 22) {
    const int peaks = fid == 21 ? 101 : 21;
    const double spread = fid == 21 ? 5.0 : 4.9;
    Rng rng(seed(kSaltPeaks));
    Matrix centers(dim, peaks);
    centers.col(0) = data->xopt;
    for (int p = 1; p < peaks; ++p)
      for (int i = 0; i < dim; ++i) centers(i, p) = uniform(rng, -spread, spread);
    data->peak_centers = data->R * centers;

    data->peak_weights.resize(peaks);
    data->peak_weights[0] = 10.0;
    for (int p = 1; p < peaks; ++p)
      data->peak_weights[p] = 1.1 + 8.0 * double(p - 1) / double(peaks - 2);

    Rng crng(seed(kSaltPeakCond));
    std::vector<double> alphas(peaks - 1);
    for (int j = 0; j < peaks - 1; ++j)
      alphas[j] = std::pow(1000.0, 2.0 * double(j) / double(peaks - 2));
    std::shuffle(alphas.begin(), alphas.end(), crng);
    alphas.insert(alphas.begin(), fid == 21 ? 1000.0 : 1e6);

    data->peak_cond.resize(dim, peaks);
    std::vector<int> perm(dim);
    for (int p = 0; p < peaks; ++p) {
      std::iota(perm.begin(), perm.end(), 0);
      std::shuffle(perm.begin(), perm.end(), crng);
      Vector diag = conditioning(dim, alphas[p]) / std::pow(alphas[p], 0.25);
      for (int i = 0; i < dim; ++i) data->peak_cond(i, p) = diag[perm[i]];
    }
  }

  return ProblemInstance(std::move(data));
}

double precision(const ProblemInstance& inst, double f) {
  return std::max(f - inst.f_opt(), kPrecisionFloor);
}

nlohmann::json suite_manifest(const std::vector<int>& fids, const std::vector<int>& iids,
                              const std::vector<int>& dims) {
  auto out = nlohmann::json::array();
  for (int fid : fids)
    for (int dim : dims)
      for (int iid : iids) {
        auto inst = instantiate(fid, iid, dim);
        out.push_back({{"fid", fid},
                       {"name", std::string(inst.name())},
                       {"multimodal", inst.multimodal()},
                       {"dim", dim},
                       {"iid", iid},
                       {"f_opt", inst.f_opt()}});
      }
  return out;
}

}  // namespace dynas::problems
