#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>

#include "helpers.hpp"
#include "oracles.hpp"
#include "horizon/estimate.hpp"
#include "horizon/quadrature.hpp"
#include "horizon/rng.hpp"
#include "horizon/system.hpp"

using namespace horizon;

namespace {

// Full parameter table for the quantitative families, observation noise included.
ParamSet quant_truth(const builders::QuantOpts& o, double obs_sigma) {
  ParamSet th;
  th.set("mu0", o.mu0);
  th.set("beta0", o.beta0);
  if (o.g) th.set("beta1", o.beta1);
  if (o.v) th.set("beta2", o.beta2);
  th.set("beta3", 1.0);
  th.set("sigmaY0", o.sy0);
  th.set("sigmaB", o.sb);
  th.set("sigmaU", o.u ? o.su : 0.0);
  th.set("sigmaEps", obs_sigma);
  th.set("alpha0D", o.a0d);
  if (o.g) th.set("gamma1", o.gamma1);
  if (o.v) th.set("gamma2", o.gamma2);
  th.set("gamma3", o.death_reads_y ? o.gamma3 : 0.0);
  th.set("gamma4", o.gamma4);
  return th;
}

struct SubjView {
  double g = 0.0, v = 0.0;
  std::vector<double> zt, z;
  double death_time = 0.0;
  bool death_observed = false;
};

std::map<std::int64_t, SubjView> view_dataset(const Dataset& d) {
  std::map<std::int64_t, SubjView> out;
  for (const auto& r : d.longitudinal) {
    auto& s = out[r.subject];
    if (r.channel == "g") s.g = r.value;
    else if (r.channel == "v") s.v = r.value;
    else if (r.channel == "z") {
      s.zt.push_back(r.time);
      s.z.push_back(r.value);
    }
  }
  for (const auto& rec : d.deaths) {
    out[rec.subject].death_time = rec.time;
    out[rec.subject].death_observed = rec.observed;
  }
  return out;
}

double simpson(double a, double b, int n, const std::function<double(double)>& f) {
  const double h = (b - a) / (2 * n);
  double acc = f(a) + f(b);
  for (int k = 1; k < 2 * n; ++k) acc += f(a + k * h) * (k % 2 ? 4.0 : 2.0);
  return acc * h / 3.0;
}

}  // namespace

TEST_CASE("quadrature rules integrate polynomials and smooth functions exactly") {
  const auto& gl5 = gauss_legendre(5);
  CHECK(gl_integrate(gl5, 0.0, 1.0, [](double x) { return std::pow(x, 9.0); }) ==
        doctest::Approx(0.1).epsilon(1e-13));
  const auto& gl7 = gauss_legendre(7);
  CHECK(gl_integrate(gl7, 0.0, 2.0, [](double x) { return std::exp(x); }) ==
        doctest::Approx(std::exp(2.0) - 1.0).epsilon(1e-12));

  // E[f(U)] for U ~ N(0, s^2) via the Hermite rule's change of variables
  const auto& gh = gauss_hermite(5);
  const double s = 0.7;
  double m4 = 0.0, m0 = 0.0;
  for (std::size_t k = 0; k < gh.nodes.size(); ++k) {
    const double u = std::sqrt(2.0) * s * gh.nodes[k];
    const double w = gh.weights[k] / std::sqrt(M_PI);
    m0 += w;
    m4 += w * u * u * u * u;
  }
  CHECK(m0 == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(m4 == doctest::Approx(3.0 * s * s * s * s).epsilon(1e-12));
}

TEST_CASE("normal quantile and cdf invert each other") {
  for (double x : {-3.0, -1.5, -0.5, 0.0, 0.7, 2.2, 3.5})
    CHECK(inverse_normal_cdf(normal_cdf(x)) == doctest::Approx(x).epsilon(1e-9));
  CHECK(normal_cdf(1.96) == doctest::Approx(0.9750021048517795).epsilon(1e-12));
  CHECK(inverse_normal_cdf(0.5) == doctest::Approx(0.0));
  CHECK(logistic_cdf(0.0) == doctest::Approx(0.5));
}

TEST_CASE("scrambled halton points are deterministic and well spread") {
  ScrambledHalton seq(3, 42);
  std::vector<double> u, w;
  double mean0 = 0.0;
  for (int k = 0; k < 2000; ++k) {
    seq.point(k, u);
    for (double x : u) {
      CHECK(x > 0.0);
      CHECK(x < 1.0);
    }
    mean0 += u[0];
  }
  CHECK(mean0 / 2000 == doctest::Approx(0.5).epsilon(0.02));
  seq.point(1234, u);
  ScrambledHalton again(3, 42);
  again.point(1234, w);
  CHECK(u == w);
  ScrambledHalton other(3, 43);
  other.point(1234, w);
  CHECK(u != w);
}

TEST_CASE("each family exposes its parameter table") {
  const auto data = Dataset{};
  const auto ill = model_param_names(builders::illness_model(true, false), data);
  CHECK(ill == std::vector<std::string>{"alpha0Y", "alpha0D", "beta1", "beta2", "gamma1",
                                        "gamma2", "gamma3"});
  const auto illw = model_param_names(builders::illness_model(false, true), data);
  CHECK(illw == std::vector<std::string>{"shapeY", "scaleY", "shapeD", "scaleD", "gamma3"});
  const auto naive = model_param_names(builders::naive_survival_model(true, false), data);
  CHECK(naive == std::vector<std::string>{"alpha0Y", "beta1", "beta2"});

  auto jm = builders::joint_model();
  jm.channels.ordinal = {"q"};
  jm.ordinal_levels = {3};
  const auto joint = model_param_names(jm, data);
  const auto has = [&](const std::string& n) {
    return std::find(joint.begin(), joint.end(), n) != joint.end();
  };
  CHECK(has("cut_q_1"));
  CHECK(has("cut_q_2"));
  CHECK(has("eps_q"));
  CHECK(has("gamma4"));
  CHECK(has("sigmaU"));
}

TEST_CASE("log-likelihood is finite at the truth for every family") {
  const auto ispec = builders::illness_system(true, false);
  const auto idata =
      builders::quick_data(ispec, builders::interval_illness_scheme(true, {1.0, 2.0, 3.0}), {},
                           300, 5);
  const auto itruth = true_params(validate_system(ispec));
  CHECK(std::isfinite(log_likelihood(builders::illness_model(true, false), idata, itruth)));
  CHECK(std::isfinite(log_likelihood(builders::naive_survival_model(true, false), idata, itruth)));

  builders::QuantOpts o;
  o.u = true;
  const auto qspec = builders::quant_system(o);
  const auto qdata =
      builders::quick_data(qspec, builders::quant_scheme({0.5, 1.5, 2.5, 3.5}, 0.3), {}, 300, 5);
  const auto qtruth = quant_truth(o, 0.3);
  CHECK(std::isfinite(log_likelihood(builders::joint_model(), qdata, qtruth)));
  CHECK(std::isfinite(log_likelihood(builders::naive_mixed_model(), qdata, qtruth)));
}

TEST_CASE("naive mixed likelihood equals the dense gaussian computation") {
  builders::QuantOpts o;
  o.u = true;
  const auto spec = builders::quant_system(o);
  const auto data =
      builders::quick_data(spec, builders::quant_scheme({0.5, 1.5, 2.5, 3.5}, 0.3), {}, 250, 9);
  const auto th = quant_truth(o, 0.3);

  double want = 0.0;
  for (const auto& [id, s] : view_dataset(data)) {
    const std::size_t m = s.zt.size();
    if (m == 0) continue;
    Eigen::VectorXd mean(m);
    Eigen::MatrixXd cov(m, m);
    for (std::size_t j = 0; j < m; ++j) {
      mean(j) = th.get("mu0") + (th.get("beta0") + th.get("beta1") * s.g + th.get("beta2") * s.v) *
                                    s.zt[j];
      for (std::size_t k = 0; k < m; ++k) {
        const double su = th.get("sigmaU");
        cov(j, k) = th.get("sigmaY0") * th.get("sigmaY0") +
                    th.get("sigmaB") * th.get("sigmaB") * std::min(s.zt[j], s.zt[k]) +
                    su * su * s.zt[j] * s.zt[k] + (j == k ? 0.09 : 0.0);
      }
    }
    Eigen::VectorXd z(m);
    for (std::size_t j = 0; j < m; ++j) z(j) = s.z[j];
    want += oracle::gaussian_loglik(z, mean, cov);
  }
  const double got = log_likelihood(builders::naive_mixed_model(), data, th);
  CHECK(got == doctest::Approx(want).epsilon(1e-10));
}

TEST_CASE("joint likelihood at sigmaU zero matches the factorized oracle") {
  builders::QuantOpts o;
  o.death_reads_y = true;  // gives the death part a real dependence on the path mean
  const auto spec = builders::quant_system(o);
  const auto data =
      builders::quick_data(spec, builders::quant_scheme({0.5, 1.5, 2.5, 3.5}, 0.3), {}, 200, 17);
  ParamSet th = quant_truth(o, 0.3);
  th.set("sigmaU", 0.0);

  double want = 0.0;
  for (const auto& [id, s] : view_dataset(data)) {
    const double drift = th.get("beta0") + th.get("beta1") * s.g + th.get("beta2") * s.v;
    const std::size_t m = s.zt.size();
    if (m > 0) {
      Eigen::VectorXd mean(m), z(m);
      Eigen::MatrixXd cov(m, m);
      for (std::size_t j = 0; j < m; ++j) {
        mean(j) = th.get("mu0") + drift * s.zt[j];
        z(j) = s.z[j];
        for (std::size_t k = 0; k < m; ++k)
          cov(j, k) = th.get("sigmaY0") * th.get("sigmaY0") +
                      th.get("sigmaB") * th.get("sigmaB") * std::min(s.zt[j], s.zt[k]) +
                      (j == k ? 0.09 : 0.0);
      }
      want += oracle::gaussian_loglik(z, mean, cov);
    }
    const auto hazard = [&](double t) {
      return th.get("alpha0D") *
             std::exp(th.get("gamma1") * s.g + th.get("gamma2") * s.v +
                      th.get("gamma3") * (th.get("mu0") + drift * t));
    };
    want -= simpson(0.0, s.death_time, 2000, hazard);
    if (s.death_observed) want += std::log(hazard(s.death_time));
  }
  const double got = log_likelihood(builders::joint_model(), data, th);
  CHECK(got == doctest::Approx(want).epsilon(1e-9));
}

TEST_CASE("binary channels evaluate exactly like two-level ordinal channels") {
  const auto spec = builders::quant_system();
  const auto data =
      builders::quick_data(spec, builders::threshold_scheme({0.5, 1.5, 2.5}, {2.3}, true), {},
                           200, 3);

  auto m_bin = builders::joint_model();
  m_bin.channels.longitudinal.clear();
  m_bin.channels.binary = "z";
  auto m_ord = builders::joint_model();
  m_ord.channels.longitudinal.clear();
  m_ord.channels.ordinal = {"z"};
  m_ord.ordinal_levels = {2};

  Rng rng(404);
  for (int rep = 0; rep < 10; ++rep) {
    ParamSet th;
    th.set("mu0", 1.5 + rng.uniform());
    th.set("beta0", 0.5 * rng.uniform());
    th.set("beta1", 0.6 * rng.uniform() - 0.3);
    th.set("beta2", 0.6 * rng.uniform() - 0.3);
    th.set("sigmaY0", 0.1 + 0.4 * rng.uniform());
    th.set("sigmaB", 0.05 + 0.3 * rng.uniform());
    th.set("sigmaU", 0.05 + 0.3 * rng.uniform());
    th.set("alpha0D", 0.02 + 0.2 * rng.uniform());
    th.set("gamma1", 0.8 * rng.uniform() - 0.4);
    th.set("gamma2", 0.8 * rng.uniform() - 0.4);
    th.set("gamma3", 0.8 * rng.uniform() - 0.4);
    th.set("gamma4", 0.6 * rng.uniform() - 0.3);
    const double cut = 1.5 + 1.5 * rng.uniform();
    const double eps = 0.5 + rng.uniform();
    ParamSet tb = th, to = th;
    tb.set("cut_z", cut);
    tb.set("eps_z", eps);
    to.set("cut_z_1", cut);
    to.set("eps_z", eps);
    const double lb = log_likelihood(m_bin, data, tb);
    const double lo = log_likelihood(m_ord, data, to);
    CHECK(std::isfinite(lb));
    CHECK(lb == doctest::Approx(lo).epsilon(1e-13));
  }
}

TEST_CASE("finite-difference gradients are stable across step sizes") {
  const auto spec = builders::illness_system(true, false);
  const auto data = builders::quick_data(
      spec, builders::interval_illness_scheme(true, {1.0, 2.0, 3.0}), {}, 200, 7);
  const auto model = builders::illness_model(true, false);
  ParamSet th = true_params(validate_system(spec));
  th.set("gamma3", 0.5);  // move off the truth so the gradient is nonzero
  const auto names = model_param_names(model, data);
  for (const auto& n : names) {
    const double v = th.get(n);
    const auto grad_at = [&](double h) {
      const double d = h * (1.0 + std::abs(v));
      ParamSet hi = th, lo = th;
      hi.set(n, v + d);
      lo.set(n, v - d);
      return (log_likelihood(model, data, hi) - log_likelihood(model, data, lo)) / (2.0 * d);
    };
    const double g1 = grad_at(1e-4), g2 = grad_at(1e-5);
    CHECK(std::abs(g1 - g2) <= 1e-3 * std::max(1.0, std::abs(g2)));
  }
}

TEST_CASE("fitting the illness model recovers its generating values") {
  const auto spec = builders::illness_system(false, false);
  const auto data =
      builders::quick_data(spec, builders::continuous_illness_scheme(false), {}, 1500, 11);
  const auto model = builders::illness_model(false, false);
  ParamSet init;
  init.set("alpha0Y", 0.3);
  init.set("alpha0D", 0.15);
  init.set("gamma3", 0.0);
  FitOptions opts;
  opts.workers = 1;
  const auto fr = fit(model, data, init, opts);
  REQUIRE(fr.converged);
  REQUIRE(fr.hessian_pd);
  CHECK(fr.free_names == std::vector<std::string>{"alpha0Y", "alpha0D", "gamma3"});
  const std::map<std::string, double> truth{
      {"alpha0Y", 0.2}, {"alpha0D", 0.1}, {"gamma3", 0.7}};
  for (const auto& [name, value] : truth) {
    const double se = fr.std_errors.get(name);
    CHECK(se > 0.0);
    CHECK(std::abs(fr.estimates.get(name) - value) < 4.0 * se);
  }
  // deterministic: a second identical fit lands on the same optimum
  const auto fr2 = fit(model, data, init, opts);
  CHECK(fr2.loglik == fr.loglik);
  CHECK(fr2.iterations == fr.iterations);
}

TEST_CASE("beta3 stays pinned unless explicitly estimated") {
  builders::QuantOpts o;
  o.u = true;
  const auto spec = builders::quant_system(o);
  const auto data =
      builders::quick_data(spec, builders::quant_scheme({0.5, 1.5, 2.5, 3.5}, 0.3), {}, 300, 13);
  ParamSet init = quant_truth(o, 0.3);
  FitOptions opts;
  opts.workers = 1;
  const auto fr = fit(builders::naive_mixed_model(), data, init, opts);
  REQUIRE(fr.converged);
  CHECK(std::find(fr.free_names.begin(), fr.free_names.end(), "beta3") == fr.free_names.end());
  CHECK(fr.estimates.get("beta3") == 1.0);
}

TEST_CASE("user-fixed parameters hold their initial value") {
  builders::QuantOpts o;
  const auto spec = builders::quant_system(o);
  const auto data =
      builders::quick_data(spec, builders::quant_scheme({0.5, 1.5, 2.5}, 0.3), {}, 250, 19);
  ParamSet init = quant_truth(o, 0.3);
  FitOptions opts;
  opts.workers = 1;
  opts.fixed = {"beta2"};
  const auto fr = fit(builders::naive_mixed_model(), data, init, opts);
  REQUIRE(fr.converged);
  CHECK(fr.estimates.get("beta2") == init.get("beta2"));
  CHECK(std::find(fr.free_names.begin(), fr.free_names.end(), "beta2") == fr.free_names.end());

  FitOptions bad;
  bad.fixed = {"not_a_param"};
  CHECK_THROWS_AS(fit(builders::naive_mixed_model(), data, init, bad), Error);
}

TEST_CASE("a fit fails loudly when the init omits a needed parameter") {
  const auto spec = builders::illness_system(false, false);
  const auto data =
      builders::quick_data(spec, builders::continuous_illness_scheme(false), {}, 100, 3);
  ParamSet init;
  init.set("alpha0Y", 0.2);  // alpha0D and gamma3 missing
  try {
    fit(builders::illness_model(false, false), data, init);
    FAIL("expected a missing-parameter error");
  } catch (const Error& e) {
    CHECK(e.code() == "UnknownReference");
  }
}

TEST_CASE("the profile cut through the optimum peaks at the estimate") {
  builders::QuantOpts o;
  const auto spec = builders::quant_system(o);
  const auto data =
      builders::quick_data(spec, builders::quant_scheme({0.5, 1.5, 2.5}, 0.3), {}, 300, 29);
  const auto model = builders::naive_mixed_model();
  ParamSet init = quant_truth(o, 0.3);
  FitOptions opts;
  opts.workers = 1;
  const auto fr = fit(model, data, init, opts);
  REQUIRE(fr.converged);
  const double b1 = fr.estimates.get("beta1");
  const auto prof =
      profile_check(model, data, fr.estimates, "beta1", {b1 - 0.2, b1, b1 + 0.2});
  REQUIRE(prof.size() == 3);
  CHECK(prof[0].first == doctest::Approx(b1 - 0.2));
  CHECK(prof[1].second >= prof[0].second);
  CHECK(prof[1].second >= prof[2].second);
  CHECK(prof[1].second == doctest::Approx(fr.loglik).epsilon(1e-9));
}
