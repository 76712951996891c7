#include "horizon/estimate.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "horizon/common.hpp"
#include "horizon/model_data.hpp"

namespace horizon {

std::string family_name(Family f) {
  switch (f) {
    case Family::illness_death_interval: return "illness_death_interval";
    case Family::joint_quantitative_shared_effect: return "joint_quantitative_shared_effect";
    case Family::naive_mixed_longitudinal: return "naive_mixed_longitudinal";
    case Family::naive_survival_only: return "naive_survival_only";
  }
  return "?";
}

Family family_from_name(const std::string& s) {
  if (s == "illness_death_interval") return Family::illness_death_interval;
  if (s == "joint_quantitative_shared_effect") return Family::joint_quantitative_shared_effect;
  if (s == "naive_mixed_longitudinal") return Family::naive_mixed_longitudinal;
  if (s == "naive_survival_only") return Family::naive_survival_only;
  fail("InvalidConfig", "unknown model family '" + s + "'");
}

namespace {

void push_hazard_names(const BaselineShape& bs, const std::string& sfx,
                       std::vector<std::string>& out) {
  switch (bs.form) {
    case BaselineShape::Form::constant:
      out.push_back("alpha0" + sfx);
      break;
    case BaselineShape::Form::weibull:
      out.push_back("shape" + sfx);
      out.push_back("scale" + sfx);
      break;
    case BaselineShape::Form::piecewise:
      for (std::size_t i = 0; i <= bs.cuts.size(); ++i)
        out.push_back("alpha0" + sfx + "_" + std::to_string(i + 1));
      break;
  }
}

void push_drift_names(const BaselineShape& bs, std::vector<std::string>& out) {
  if (bs.form == BaselineShape::Form::constant) {
    out.push_back("beta0");
  } else {
    for (std::size_t i = 0; i <= bs.cuts.size(); ++i)
      out.push_back("beta0_" + std::to_string(i + 1));
  }
}

}  // namespace

std::vector<std::string> model_param_names(const ModelSpec& model, const Dataset& data) {
  (void)data;
  std::vector<std::string> out;
  const bool has_g = !model.channels.attribute.empty();
  const bool has_v = !model.channels.factor.empty();
  switch (model.family) {
    case Family::illness_death_interval:
      push_hazard_names(model.outcome_baseline, "Y", out);
      push_hazard_names(model.death_baseline, "D", out);
      if (has_g) out.push_back("beta1");
      if (has_v) out.push_back("beta2");
      if (has_g) out.push_back("gamma1");
      if (has_v) out.push_back("gamma2");
      out.push_back("gamma3");
      break;
    case Family::naive_survival_only:
      push_hazard_names(model.outcome_baseline, "Y", out);
      if (has_g) out.push_back("beta1");
      if (has_v) out.push_back("beta2");
      break;
    case Family::naive_mixed_longitudinal:
      out.push_back("mu0");
      push_drift_names(model.drift_shape, out);
      if (has_g) out.push_back("beta1");
      if (has_v) out.push_back("beta2");
      out.push_back("beta3");
      out.push_back("sigmaY0");
      out.push_back("sigmaB");
      out.push_back("sigmaU");
      out.push_back("sigmaEps");
      break;
    case Family::joint_quantitative_shared_effect:
      out.push_back("mu0");
      push_drift_names(model.drift_shape, out);
      if (has_g) out.push_back("beta1");
      if (has_v) out.push_back("beta2");
      out.push_back("beta3");
      out.push_back("sigmaY0");
      out.push_back("sigmaB");
      out.push_back("sigmaU");
      if (!model.channels.longitudinal.empty()) out.push_back("sigmaEps");
      push_hazard_names(model.death_baseline, "D", out);
      if (has_g) out.push_back("gamma1");
      if (has_v) out.push_back("gamma2");
      out.push_back("gamma3");
      out.push_back("gamma4");
      for (std::size_t c = 0; c < model.channels.ordinal.size(); ++c) {
        const std::string& name = model.channels.ordinal[c];
        for (int k = 1; k < model.ordinal_levels[c]; ++k)
          out.push_back("cut_" + name + "_" + std::to_string(k));
        out.push_back("eps_" + name);
      }
      if (!model.channels.binary.empty()) {
        out.push_back("cut_" + model.channels.binary);
        out.push_back("eps_" + model.channels.binary);
      }
      break;
  }
  return out;
}

namespace {

double dispatch_loglik(const ModelSpec& model, const PreparedData& prep, const ParamSet& theta,
                       int workers) {
  switch (model.family) {
    case Family::illness_death_interval:
      return loglik_illness_death(model, prep, theta, workers);
    case Family::joint_quantitative_shared_effect:
      return loglik_joint(model, prep, theta, workers);
    case Family::naive_mixed_longitudinal:
      return loglik_naive_mixed(model, prep, theta, workers);
    case Family::naive_survival_only:
      return loglik_naive_survival(model, prep, theta, workers);
  }
  fail("InvalidConfig", "unhandled model family");
}

// --- constrained-to-unconstrained parameter transforms ---

struct TransformEntry {
  std::string name;
  enum class Kind { identity, log_positive, cut_chain } kind = Kind::identity;
  std::string chain_prev;  // cut_chain: name of the previous cut in the chain
};

bool is_positive_name(const std::string& n) {
  return n.rfind("sigma", 0) == 0 || n.rfind("alpha0", 0) == 0 || n.rfind("shape", 0) == 0 ||
         n.rfind("scale", 0) == 0 || n.rfind("eps_", 0) == 0;
}

std::vector<TransformEntry> build_layout(const ModelSpec& model,
                                         const std::vector<std::string>& free_names) {
  // cut chains are identified from the model bindings, never by name parsing
  std::map<std::string, std::string> prev_cut;
  for (std::size_t c = 0; c < model.channels.ordinal.size(); ++c) {
    const std::string& ch = model.channels.ordinal[c];
    for (int k = 2; k < model.ordinal_levels[c]; ++k)
      prev_cut["cut_" + ch + "_" + std::to_string(k)] = "cut_" + ch + "_" + std::to_string(k - 1);
  }
  std::vector<TransformEntry> layout;
  for (const auto& n : free_names) {
    TransformEntry e;
    e.name = n;
    if (auto it = prev_cut.find(n); it != prev_cut.end()) {
      e.kind = TransformEntry::Kind::cut_chain;
      e.chain_prev = it->second;
    } else if (is_positive_name(n)) {
      e.kind = TransformEntry::Kind::log_positive;
    }
    layout.push_back(std::move(e));
  }
  return layout;
}

Eigen::VectorXd to_unconstrained(const std::vector<TransformEntry>& layout,
                                 const ParamSet& theta) {
  Eigen::VectorXd x(static_cast<Eigen::Index>(layout.size()));
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const double v = theta.get(layout[i].name);
    const Eigen::Index k = static_cast<Eigen::Index>(i);
    switch (layout[i].kind) {
      case TransformEntry::Kind::identity:
        x(k) = v;
        break;
      case TransformEntry::Kind::log_positive:
        x(k) = std::log(std::max(v, 1e-10));
        break;
      case TransformEntry::Kind::cut_chain: {
        const double gap = v - theta.get(layout[i].chain_prev);
        require(gap > 0.0, "InvalidConfig", "cut values must be strictly increasing at init");
        x(k) = std::log(gap);
        break;
      }
    }
  }
  return x;
}

void from_unconstrained(const std::vector<TransformEntry>& layout, const Eigen::VectorXd& x,
                        ParamSet& theta) {
  // chain entries read their predecessor from theta, so layout order (cut k
  // after cut k-1) makes each chain well defined
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const Eigen::Index k = static_cast<Eigen::Index>(i);
    switch (layout[i].kind) {
      case TransformEntry::Kind::identity:
        theta.set(layout[i].name, x(k));
        break;
      case TransformEntry::Kind::log_positive:
        theta.set(layout[i].name, std::exp(x(k)));
        break;
      case TransformEntry::Kind::cut_chain:
        theta.set(layout[i].name, theta.get(layout[i].chain_prev) + std::exp(x(k)));
        break;
    }
  }
}

// d theta_free / d eta at eta; lower triangular because a cut depends on every
// earlier free gap in its chain
Eigen::MatrixXd transform_jacobian(const std::vector<TransformEntry>& layout,
                                   const Eigen::VectorXd& x) {
  const Eigen::Index m = static_cast<Eigen::Index>(layout.size());
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(m, m);
  std::map<std::string, Eigen::Index> pos;
  for (Eigen::Index i = 0; i < m; ++i) pos[layout[static_cast<std::size_t>(i)].name] = i;
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto& e = layout[static_cast<std::size_t>(i)];
    switch (e.kind) {
      case TransformEntry::Kind::identity:
        jac(i, i) = 1.0;
        break;
      case TransformEntry::Kind::log_positive:
        jac(i, i) = std::exp(x(i));
        break;
      case TransformEntry::Kind::cut_chain: {
        jac(i, i) = std::exp(x(i));
        if (auto it = pos.find(e.chain_prev); it != pos.end()) jac.row(i) += jac.row(it->second);
        break;
      }
    }
  }
  return jac;
}

void fill_defaults(const ModelSpec& model, const std::vector<std::string>& names, ParamSet& theta) {
  for (const auto& n : names) {
    if (theta.values.count(n)) continue;
    if (n == "beta3") {
      theta.set(n, 1.0);
    } else if (n.rfind("eps_", 0) == 0) {
      theta.set(n, 1.0);
    } else {
      bool first_cut = false;
      for (const auto& ch : model.channels.ordinal)
        first_cut = first_cut || n == "cut_" + ch + "_1";
      if (first_cut)
        theta.set(n, 0.0);
      else
        fail("UnknownReference", "init is missing parameter '" + n + "'");
    }
  }
}

std::vector<std::string> default_fixed(const ModelSpec& model) {
  std::vector<std::string> fixed;
  if (!model.estimate_beta3 &&
      (model.family == Family::joint_quantitative_shared_effect ||
       model.family == Family::naive_mixed_longitudinal))
    fixed.push_back("beta3");
  for (const auto& ch : model.channels.ordinal) {
    fixed.push_back("cut_" + ch + "_1");  // location normalization
    fixed.push_back("eps_" + ch);         // scale normalization
  }
  if (!model.channels.binary.empty()) fixed.push_back("eps_" + model.channels.binary);
  return fixed;
}

}  // namespace

double log_likelihood(const ModelSpec& model, const Dataset& data, const ParamSet& theta,
                      std::vector<std::string>* warnings, int workers) {
  PreparedData prep = prepare(model, data);
  if (warnings)
    warnings->insert(warnings->end(), prep.car_warnings.begin(), prep.car_warnings.end());
  return dispatch_loglik(model, prep, theta, workers);
}

FitResult fit(const ModelSpec& model, const Dataset& data, const ParamSet& init,
              const FitOptions& opts) {
  PreparedData prep = prepare(model, data);
  const std::vector<std::string> names = model_param_names(model, data);

  ParamSet work = init;
  fill_defaults(model, names, work);

  std::set<std::string> fixed;
  for (const auto& n : default_fixed(model)) fixed.insert(n);
  for (const auto& n : opts.fixed) {
    require(std::find(names.begin(), names.end(), n) != names.end(), "UnknownReference",
            "fixed parameter '" + n + "' is not read by this family");
    fixed.insert(n);
  }
  std::vector<std::string> free_names;
  for (const auto& n : names)
    if (!fixed.count(n)) free_names.push_back(n);
  require(!free_names.empty(), "InvalidConfig", "no free parameters to estimate");

  const std::vector<TransformEntry> layout = build_layout(model, free_names);
  const Eigen::VectorXd x0 = to_unconstrained(layout, work);

  FitResult out;
  out.gh_nodes = model.quad.gh_nodes;
  out.qmc_seed = model.qmc.seed;
  out.free_names = free_names;
  out.warnings = prep.car_warnings;

  ParamSet scratch = work;
  const ObjectiveFn objective = [&](const Eigen::VectorXd& x) {
    from_unconstrained(layout, x, scratch);
    try {
      return dispatch_loglik(model, prep, scratch, opts.workers);
    } catch (const Error& e) {
      if (e.code() == "NonFiniteLikelihood")
        return -std::numeric_limits<double>::infinity();
      throw;
    }
  };

  OptimResult opt = maximize(objective, x0, opts.optim);
  from_unconstrained(layout, opt.x, work);
  out.estimates = work;
  out.loglik = opt.f;
  out.converged = opt.converged;
  out.iterations = opt.iterations;
  out.f_trace = opt.f_trace;
  out.grad_norm = opt.gradient.size() > 0 ? opt.gradient.cwiseAbs().maxCoeff() : 0.0;
  if (!opt.converged) out.warnings.push_back("NonConvergence: " + opt.message);

  // standard errors: numerical Hessian on the unconstrained scale, mapped back
  const Eigen::Index m = static_cast<Eigen::Index>(free_names.size());
  const Eigen::MatrixXd neg_h = -numerical_hessian(objective, opt.x, 5e-4);
  Eigen::LLT<Eigen::MatrixXd> llt(neg_h);
  if (llt.info() == Eigen::Success) {
    const Eigen::MatrixXd cov_eta = llt.solve(Eigen::MatrixXd::Identity(m, m));
    const Eigen::MatrixXd jac = transform_jacobian(layout, opt.x);
    const Eigen::MatrixXd cov = jac * cov_eta * jac.transpose();
    out.hessian_pd = true;
    for (Eigen::Index i = 0; i < m; ++i) {
      const double v = cov(i, i);
      out.std_errors.set(free_names[static_cast<std::size_t>(i)], v > 0.0 ? std::sqrt(v) : 0.0);
    }
  } else {
    out.hessian_pd = false;
    out.warnings.push_back("SingularHessian: observed information not positive definite");
  }
  return out;
}

std::vector<std::pair<double, double>> profile_check(const ModelSpec& model, const Dataset& data,
                                                     const ParamSet& theta_hat,
                                                     const std::string& param_name,
                                                     const std::vector<double>& grid,
                                                     int workers) {
  PreparedData prep = prepare(model, data);
  std::vector<std::pair<double, double>> curve;
  curve.reserve(grid.size());
  ParamSet theta = theta_hat;
  for (double v : grid) {
    theta.set(param_name, v);
    double ll;
    try {
      ll = dispatch_loglik(model, prep, theta, workers);
    } catch (const Error&) {
      ll = -std::numeric_limits<double>::infinity();
    }
    curve.emplace_back(v, ll);
  }
  return curve;
}

}  // namespace horizon
