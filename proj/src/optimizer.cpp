#include "horizon/optimizer.hpp"

#include <cmath>

#include "horizon/common.hpp"

namespace horizon {

Eigen::VectorXd numerical_gradient(const ObjectiveFn& f, const Eigen::VectorXd& x, double step) {
  const int p = static_cast<int>(x.size());
  Eigen::VectorXd g(p), xt = x;
  for (int i = 0; i < p; ++i) {
    const double h = step * (1.0 + std::abs(x[i]));
    xt[i] = x[i] + h;
    const double fp = f(xt);
    xt[i] = x[i] - h;
    const double fm = f(xt);
    xt[i] = x[i];
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

Eigen::MatrixXd numerical_hessian(const ObjectiveFn& f, const Eigen::VectorXd& x, double step) {
  const int p = static_cast<int>(x.size());
  Eigen::MatrixXd H(p, p);
  Eigen::VectorXd xt = x;
  std::vector<double> h(p);
  for (int i = 0; i < p; ++i) h[i] = step * (1.0 + std::abs(x[i]));
  const double f0 = f(x);
  for (int i = 0; i < p; ++i) {
    xt[i] = x[i] + h[i];
    const double fp = f(xt);
    xt[i] = x[i] - h[i];
    const double fm = f(xt);
    xt[i] = x[i];
    H(i, i) = (fp - 2.0 * f0 + fm) / (h[i] * h[i]);
  }
  for (int i = 0; i < p; ++i) {
    for (int j = i + 1; j < p; ++j) {
      xt[i] = x[i] + h[i]; xt[j] = x[j] + h[j];
      const double fpp = f(xt);
      xt[j] = x[j] - h[j];
      const double fpm = f(xt);
      xt[i] = x[i] - h[i]; xt[j] = x[j] + h[j];
      const double fmp = f(xt);
      xt[j] = x[j] - h[j];
      const double fmm = f(xt);
      xt[i] = x[i]; xt[j] = x[j];
      H(i, j) = H(j, i) = (fpp - fpm - fmp + fmm) / (4.0 * h[i] * h[j]);
    }
  }
  return H;
}

OptimResult maximize(const ObjectiveFn& f, const Eigen::VectorXd& x0, const OptimOptions& opts) {
  const int p = static_cast<int>(x0.size());
  OptimResult res;
  res.x = x0;
  res.f = f(x0);
  require(std::isfinite(res.f), "NonFiniteLikelihood", "objective not finite at the start point");
  res.f_trace.push_back(res.f);

  Eigen::VectorXd g = numerical_gradient(f, res.x, opts.fd_step);
  Eigen::MatrixXd Hinv = Eigen::MatrixXd::Identity(p, p);

  for (int iter = 0; iter < opts.max_iterations; ++iter) {
    res.iterations = iter;
    if (g.lpNorm<Eigen::Infinity>() < opts.grad_tol) {
      res.converged = true;
      res.message = "gradient below tolerance";
      break;
    }

    Eigen::VectorXd d = Hinv * g;  // ascent direction
    if (d.dot(g) <= 0.0) {
      Hinv = Eigen::MatrixXd::Identity(p, p);  // reset on loss of positivity
      d = g;
    }

    // backtracking Armijo line search on -f
    double alpha = 1.0;
    const double slope = d.dot(g);
    double f_new = -std::numeric_limits<double>::infinity();
    Eigen::VectorXd x_new;
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls) {
      x_new = res.x + alpha * d;
      f_new = f(x_new);
      if (std::isfinite(f_new) && f_new >= res.f + 1e-4 * alpha * slope) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      res.message = "line search failed to improve the objective";
      // gradient may simply be at noise level; report convergence state by
      // the usual criteria below
      res.converged = g.lpNorm<Eigen::Infinity>() < 10 * opts.grad_tol;
      break;
    }

    const Eigen::VectorXd g_new = numerical_gradient(f, x_new, opts.fd_step);
    const Eigen::VectorXd s = x_new - res.x;
    const Eigen::VectorXd y = g - g_new;  // note: gradient of -f changes sign
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      // BFGS update of the inverse Hessian of -f
      const Eigen::VectorXd Hy = Hinv * y;
      const double yHy = y.dot(Hy);
      Hinv += ((sy + yHy) / (sy * sy)) * (s * s.transpose()) -
              (Hy * s.transpose() + s * Hy.transpose()) / sy;
    }

    const double improvement = f_new - res.f;
    res.x = x_new;
    res.f = f_new;
    res.f_trace.push_back(res.f);
    g = g_new;

    if (improvement < opts.f_rel_tol * (std::abs(res.f) + 1.0)) {
      res.converged = true;
      res.message = "function improvement below tolerance";
      break;
    }
  }
  if (res.message.empty()) {
    res.message = res.converged ? "converged" : "iteration limit reached";
  }
  res.gradient = g;
  return res;
}

}  // namespace horizon
