#include "horizon/quadrature.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>

#include "horizon/common.hpp"
#include "horizon/rng.hpp"

namespace horizon {

namespace {

// Jacobi-matrix eigendecomposition: nodes are eigenvalues, weights are
// mu0 * (first eigenvector component)^2.
QuadRule golub_welsch(const std::vector<double>& offdiag, double mu0) {
  const int n = static_cast<int>(offdiag.size()) + 1;
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  for (int k = 0; k + 1 < n; ++k) {
    J(k, k + 1) = offdiag[k];
    J(k + 1, k) = offdiag[k];
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  QuadRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (int k = 0; k < n; ++k) {
    rule.nodes[k] = es.eigenvalues()(k);
    const double v0 = es.eigenvectors()(0, k);
    rule.weights[k] = mu0 * v0 * v0;
  }
  return rule;
}

std::map<int, QuadRule>& cache(int which) {
  static std::map<int, QuadRule> legendre, hermite;
  return which == 0 ? legendre : hermite;
}

std::mutex cache_mu;

constexpr int kPrimes[] = {2,  3,  5,  7,  11, 13, 17, 19, 23, 29, 31,  37,  41,  43,  47, 53,
                           59, 61, 67, 71, 73, 79, 83, 89, 97, 101, 103, 107, 109, 113, 127, 131};

}  // namespace

const QuadRule& gauss_legendre(int n) {
  require(n >= 1 && n <= 256, "InvalidConfig", "Legendre node count out of range");
  std::lock_guard<std::mutex> lock(cache_mu);
  auto& c = cache(0);
  auto it = c.find(n);
  if (it == c.end()) {
    std::vector<double> off;
    for (int k = 1; k < n; ++k) off.push_back(k / std::sqrt(4.0 * k * k - 1.0));
    it = c.emplace(n, golub_welsch(off, 2.0)).first;
  }
  return it->second;
}

const QuadRule& gauss_hermite(int n) {
  require(n >= 1 && n <= 256, "InvalidConfig", "Hermite node count out of range");
  std::lock_guard<std::mutex> lock(cache_mu);
  auto& c = cache(1);
  auto it = c.find(n);
  if (it == c.end()) {
    std::vector<double> off;
    for (int k = 1; k < n; ++k) off.push_back(std::sqrt(k / 2.0));
    it = c.emplace(n, golub_welsch(off, std::sqrt(std::numbers::pi))).first;
  }
  return it->second;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x * std::numbers::sqrt2 / 2.0); }

double logistic_cdf(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double inverse_normal_cdf(double p) {
  require(p > 0.0 && p < 1.0, "InvalidConfig", "quantile argument outside (0,1)");
  // Acklam's rational approximation
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425, phigh = 1 - plow;
  double x;
  if (p < plow) {
    const double q = std::sqrt(-2 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  } else if (p <= phigh) {
    const double q = p - 0.5, r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
  } else {
    const double q = std::sqrt(-2 * std::log(1 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  }
  // one Halley refinement pushes the error to ~1e-15
  const double e = normal_cdf(x) - p;
  const double u = e * std::sqrt(2 * std::numbers::pi) * std::exp(x * x / 2);
  return x - u / (1 + x * u / 2);
}

ScrambledHalton::ScrambledHalton(int dim, std::uint64_t seed) : dim_(dim) {
  require(dim >= 1 && dim <= 32, "InvalidConfig", "Halton dimension out of range");
  for (int d = 0; d < dim; ++d) {
    const int base = kPrimes[d];
    bases_.push_back(base);
    // Fisher-Yates over digits 1..base-1 (0 fixed), driven by splitmix
    std::vector<int> perm(base);
    for (int k = 0; k < base; ++k) perm[k] = k;
    std::uint64_t s = derive_seed(seed, d, 0x51acULL);
    for (int k = base - 1; k > 1; --k) {
      s = splitmix64(s);
      const int j = 1 + static_cast<int>(s % static_cast<std::uint64_t>(k));
      std::swap(perm[k], perm[j]);
    }
    perms_.push_back(std::move(perm));
  }
}

void ScrambledHalton::point(std::int64_t index, std::vector<double>& u) const {
  u.resize(dim_);
  for (int d = 0; d < dim_; ++d) {
    const int base = bases_[d];
    const auto& perm = perms_[d];
    double f = 1.0, x = 0.0;
    // index+1: skip the origin
    std::int64_t i = index + 1;
    while (i > 0) {
      f /= base;
      x += f * perm[i % base];
      i /= base;
    }
    // nudge off 0 so inverse CDFs stay finite
    u[d] = x > 0.0 ? x : 0.5 * f;
  }
}

}  // namespace horizon
