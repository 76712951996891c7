#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "horizon/estimate.hpp"
#include "horizon/observe.hpp"

namespace horizon {

// Per-subject view of a Dataset joined against a ModelSpec's channel bindings.
// All record lookups happen once here; likelihood evaluations then touch plain
// arrays only.

struct ThresholdObs {
  std::vector<double> t;
  std::vector<int> level;
};

struct PreparedSubject {
  std::int64_t id = 0;

  double g = 0.0;
  bool has_g = false;

  // factor path, piecewise linear between knots, flat beyond the last one
  bool has_v = false;
  bool v_constant = true;
  std::vector<double> v_t, v_x, v_cum;  // v_cum[k] = integral of V over [0, v_t[k]]

  std::vector<double> zt, z;  // additive-noise channel visits

  std::vector<ThresholdObs> ordinal;  // parallel to ModelSpec::channels.ordinal
  ThresholdObs binary;

  enum class Event { none, exact, interval, censored } event = Event::none;
  double ev_exact = 0.0;
  double ev_left = 0.0, ev_right = 0.0;
  double ev_censor = 0.0;

  bool has_death = false;
  double death_time = 0.0;
  bool death_observed = false;

  // union of visit times carrying a latent-path value (threshold channels, and
  // the additive channel when threshold channels force path draws)
  std::vector<double> path_t;
  std::vector<int> z_slot, bin_slot;
  std::vector<std::vector<int>> ord_slot;

  double v_at(double t) const;
  double v_integral(double t) const;
};

struct PreparedData {
  std::vector<PreparedSubject> subjects;
  bool any_threshold = false;
  std::size_t max_path_dim = 0;
  // standard-normal quasi-random draws for latent-path integration,
  // draws x max_path_dim, fixed at preparation time
  std::vector<std::vector<double>> qmc_normals;
  std::vector<std::string> car_warnings;
};

PreparedData prepare(const ModelSpec& model, const Dataset& data);

// --- likelihood families (log scale throughout) ---

double loglik_illness_death(const ModelSpec& model, const PreparedData& prep,
                            const ParamSet& theta, int workers);
double loglik_naive_survival(const ModelSpec& model, const PreparedData& prep,
                             const ParamSet& theta, int workers);
double loglik_naive_mixed(const ModelSpec& model, const PreparedData& prep,
                          const ParamSet& theta, int workers);
double loglik_joint(const ModelSpec& model, const PreparedData& prep, const ParamSet& theta,
                    int workers);

// Joint-family per-subject log-likelihood conditional on the shared random
// effect value u.  The marginal equals E_U[exp(of this)]; exposed so plain
// Monte Carlo over U can cross-check the Gauss-Hermite marginal.  Building the
// evaluator binds theta once; operator() is then cheap per call.
class JointConditionalEval {
public:
  JointConditionalEval(const ModelSpec& model, const PreparedData& prep, const ParamSet& theta);
  ~JointConditionalEval();
  JointConditionalEval(JointConditionalEval&&) noexcept;
  double operator()(std::size_t subject, double u) const;

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

double joint_subject_conditional(const ModelSpec& model, const PreparedData& prep,
                                 std::size_t subject, const ParamSet& theta, double u);

}  // namespace horizon
