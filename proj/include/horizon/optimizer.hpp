#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

namespace horizon {

using ObjectiveFn = std::function<double(const Eigen::VectorXd&)>;

struct OptimOptions {
  int max_iterations = 500;
  double f_rel_tol = 1e-8;
  double grad_tol = 1e-5;    // max-norm of the gradient
  double fd_step = 1e-6;     // relative central-difference step
};

struct OptimResult {
  Eigen::VectorXd x;
  double f = 0.0;  // maximized objective value
  Eigen::VectorXd gradient;
  int iterations = 0;
  bool converged = false;
  std::string message;
  std::vector<double> f_trace;  // accepted values, nondecreasing
};

// Central finite differences; step scaled per-coordinate by (1 + |x_i|).
Eigen::VectorXd numerical_gradient(const ObjectiveFn& f, const Eigen::VectorXd& x, double step);

// Symmetric second-difference Hessian (for standard errors at the optimum).
Eigen::MatrixXd numerical_hessian(const ObjectiveFn& f, const Eigen::VectorXd& x, double step);

// Maximizes f by BFGS with backtracking line search and finite-difference
// gradients.  Deterministic: no randomness, fixed evaluation order.
OptimResult maximize(const ObjectiveFn& f, const Eigen::VectorXd& x0, const OptimOptions& opts);

}  // namespace horizon
