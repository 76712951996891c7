#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "horizon/observe.hpp"
#include "horizon/optimizer.hpp"
#include "horizon/param_set.hpp"

namespace horizon {

// --- model specification ---

enum class Family {
  illness_death_interval,          // three-state event model, interval-censored outcome
  joint_quantitative_shared_effect,  // longitudinal + survival, shared random effect
  naive_mixed_longitudinal,        // longitudinal only, death treated as plain dropout
  naive_survival_only,             // outcome event only, death treated as censoring
};

std::string family_name(Family f);
Family family_from_name(const std::string& s);

struct BaselineShape {
  enum class Form { constant, weibull, piecewise } form = Form::constant;
  std::vector<double> cuts;  // piecewise only, strictly increasing
};

struct QuadratureConfig {
  int gh_nodes = 15;        // Gauss-Hermite nodes for the random-effect integral
  int gl_nodes = 7;         // Gauss-Legendre nodes per hazard segment
  double max_segment = 2.5;  // hazard integrals subdivide segments longer than this
};

struct QmcConfig {
  int draws = 256;               // latent-path draws for threshold channels
  std::uint64_t seed = 9001;     // scrambling seed, echoed in FitResult
};

struct ChannelBinding {
  std::string event;                  // counting outcome channel (interval or exact)
  std::string longitudinal;           // additive-noise quantitative channel
  std::vector<std::string> ordinal;   // threshold ordinal channels
  std::string binary;                 // threshold binary channel
  std::string attribute;              // baseline covariate channel (G)
  std::string factor;                 // external factor channel (V)
};

enum class ThresholdLaw { logistic, normal };

struct ModelSpec {
  Family family = Family::illness_death_interval;
  ChannelBinding channels;
  BaselineShape outcome_baseline;  // outcome hazard (event families) or unused
  BaselineShape death_baseline;
  BaselineShape drift_shape;       // joint/naive longitudinal drift beta0(t); no weibull
  QuadratureConfig quad;
  QmcConfig qmc;
  ThresholdLaw threshold_law = ThresholdLaw::logistic;  // noise law behind cuts
  bool estimate_beta3 = false;     // random-effect slope in the drift, else fixed at init
  std::vector<int> ordinal_levels;  // level count Q per ordinal channel, parallel array
};

// --- fit output ---

struct FitResult {
  ParamSet estimates;
  ParamSet std_errors;   // empty unless the Hessian is positive definite
  double loglik = 0.0;
  bool converged = false;
  bool hessian_pd = false;
  int iterations = 0;
  double grad_norm = 0.0;
  std::vector<std::string> free_names;   // estimated parameters, layout order
  std::vector<double> f_trace;
  std::vector<std::string> warnings;
  int gh_nodes = 0;
  std::uint64_t qmc_seed = 0;
};

struct FitOptions {
  OptimOptions optim;
  std::vector<std::string> fixed;  // extra parameters held at their init values
  int workers = 0;                 // 0 = available parallelism
};

// --- operations ---

// Joint log-likelihood of the dataset under the family in `model`.  Attaches a
// loud warning (if `warnings` given) when the dataset's ignorability verdicts
// report a failing channel: the value is then a partial likelihood computed as
// if the observation plan were fixed in advance.
double log_likelihood(const ModelSpec& model, const Dataset& data, const ParamSet& theta,
                      std::vector<std::string>* warnings = nullptr, int workers = 0);

FitResult fit(const ModelSpec& model, const Dataset& data, const ParamSet& init,
              const FitOptions& opts = {});

// Log-likelihood along one coordinate with all others pinned at theta_hat.
std::vector<std::pair<double, double>> profile_check(const ModelSpec& model, const Dataset& data,
                                                     const ParamSet& theta_hat,
                                                     const std::string& param_name,
                                                     const std::vector<double>& grid,
                                                     int workers = 0);

// Names of the parameters the family reads from a ParamSet, given the data
// layout (which channels are present, baseline shapes, cut counts).
std::vector<std::string> model_param_names(const ModelSpec& model, const Dataset& data);

}  // namespace horizon
