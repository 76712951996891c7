#pragma once

#include <cstdint>
#include <vector>

namespace horizon {

struct QuadRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

// Gauss-Legendre on [-1, 1]; nodes ascending.  Computed once per n via the
// symmetric tridiagonal (Golub-Welsch) eigenproblem and cached.
const QuadRule& gauss_legendre(int n);

// Gauss-Hermite for weight e^{-x^2} (physicists' convention), nodes ascending.
// E f(U) with U ~ N(0, s^2) = sum_k w_k/sqrt(pi) * f(sqrt(2) s x_k).
const QuadRule& gauss_hermite(int n);

// Integral of f over [a, b] with an n-node Legendre rule.
template <class F>
double gl_integrate(const QuadRule& rule, double a, double b, F&& f) {
  const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
  double acc = 0.0;
  for (std::size_t k = 0; k < rule.nodes.size(); ++k)
    acc += rule.weights[k] * f(mid + half * rule.nodes[k]);
  return half * acc;
}

// Standard normal quantile (Acklam's rational approximation polished by one
// Halley step); |error| < 1e-15 over (0, 1).
double inverse_normal_cdf(double p);

double normal_cdf(double x);
double logistic_cdf(double x);

// Scrambled Halton sequence: dimension d uses the d-th prime base with a
// seed-derived digit permutation (0 stays fixed to preserve equidistribution).
// Deterministic for a fixed (dim, seed); skip-ahead via the index argument.
class ScrambledHalton {
public:
  ScrambledHalton(int dim, std::uint64_t seed);
  // Fills u with point `index` (index >= 0); components in (0, 1).
  void point(std::int64_t index, std::vector<double>& u) const;
  int dim() const { return dim_; }

private:
  int dim_;
  std::vector<int> bases_;
  std::vector<std::vector<int>> perms_;  // per dimension, permutation of digits
};

}  // namespace horizon
