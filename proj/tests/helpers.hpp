#pragma once

// Shared scenario builders.  Systems are assembled through the JSON dialect so
// tests exercise the same entry path as user configs.

#include <string>
#include <vector>

#include "horizon/config.hpp"
#include "horizon/observe.hpp"
#include "horizon/simulate.hpp"

namespace builders {

using horizon::json;

// Three-state illness-death system; labels follow the fitted-model names so
// true_params() doubles as the truth table of a study.
inline horizon::SystemSpec illness_system(bool covariates, bool weibull) {
  json ill_base = weibull ? json{{"form", "weibull"}, {"shape", 1.3}, {"scale", 4.0},
                                {"shape_param", "shapeY"}, {"scale_param", "scaleY"}}
                          : json{{"form", "constant"}, {"value", 0.2}, {"param", "alpha0Y"}};
  json death_base = weibull ? json{{"form", "weibull"}, {"shape", 1.1}, {"scale", 7.0},
                                  {"shape_param", "shapeD"}, {"scale_param", "scaleD"}}
                            : json{{"form", "constant"}, {"value", 0.1}, {"param", "alpha0D"}};
  json ill_terms = json::array();
  json death_terms = json::array();
  death_terms.push_back({{"source", "ill"}, {"coef", 0.7}, {"param", "gamma3"}});
  json procs;
  if (covariates) {
    procs["g"] = {{"kind", "attribute"}, {"law", {{"type", "bernoulli"}, {"p", 0.5}}}};
    procs["v"] = {{"kind", "external_factor"},
                  {"path", {{"type", "random_constant"},
                            {"law", {{"type", "normal"}, {"mean", 0.0}, {"sd", 1.0}}}}}};
    ill_terms.push_back({{"source", "g"}, {"coef", 0.4}, {"param", "beta1"}});
    ill_terms.push_back({{"source", "v"}, {"coef", 0.5}, {"param", "beta2"}});
    death_terms.push_back({{"source", "g"}, {"coef", 0.3}, {"param", "gamma1"}});
    death_terms.push_back({{"source", "v"}, {"coef", 0.25}, {"param", "gamma2"}});
  }
  procs["ill"] = {{"kind", "counting"},
                  {"intensity", {{"baseline", ill_base}, {"terms", ill_terms}}}};
  procs["death"] = {{"kind", "counting"},
                    {"intensity", {{"baseline", death_base}, {"terms", death_terms}}}};
  json sys = {{"name", "illness_death"}, {"processes", procs}, {"outcome", "ill"}};
  return horizon::parse_system(sys);
}

struct QuantOpts {
  bool g = true, v = true, u = false;
  bool death_reads_y = false;        // direct influence: intensity term on current Y
  bool death_reads_samples = false;  // chicken: intensity term on last noisy reading
  std::vector<double> sample_times{0.5, 1.5, 2.5, 3.5};
  double sample_noise = 0.3;
  double a0d = 0.06, gamma1 = 0.25, gamma2 = 0.3, gamma3 = 0.5, gamma_s = 0.4, gamma4 = 0.0;
  double mu0 = 2.0, sy0 = 0.3, beta0 = 0.3, beta1 = 0.3, beta2 = 0.5, sb = 0.25, su = 0.45;
};

// Diffusion outcome with optional attribute g, factor V, shared effect U, and a
// death intensity reading any mix of (g, V, current Y, sampled Y, U).
inline horizon::SystemSpec quant_system(const QuantOpts& o = {}) {
  json procs;
  json drift_terms = json::array();
  json death_terms = json::array();
  if (o.g) {
    procs["g"] = {{"kind", "attribute"}, {"law", {{"type", "bernoulli"}, {"p", 0.5}}}};
    drift_terms.push_back({{"source", "g"}, {"coef", o.beta1}, {"param", "beta1"}});
    death_terms.push_back({{"source", "g"}, {"coef", o.gamma1}, {"param", "gamma1"}});
  }
  if (o.v) {
    procs["v"] = {{"kind", "external_factor"},
                  {"path", {{"type", "random_constant"},
                            {"law", {{"type", "normal"}, {"mean", 0.5}, {"sd", 0.8}}}}}};
    drift_terms.push_back({{"source", "v"}, {"coef", o.beta2}, {"param", "beta2"}});
    death_terms.push_back({{"source", "v"}, {"coef", o.gamma2}, {"param", "gamma2"}});
  }
  if (o.u) {
    procs["u"] = {{"kind", "attribute"},
                  {"latent", true},
                  {"law", {{"type", "normal"}, {"mean", 0.0}, {"sd", o.su},
                           {"sd_param", "sigmaU"}}}};
    drift_terms.push_back({{"source", "u"}, {"coef", 1.0}, {"param", "beta3"}});
    if (o.gamma4 != 0.0)
      death_terms.push_back({{"source", "u"}, {"coef", o.gamma4}, {"param", "gamma4"}});
  }
  if (o.death_reads_y)
    death_terms.push_back({{"source", "y"}, {"coef", o.gamma3}, {"param", "gamma3"}});
  if (o.death_reads_samples)
    death_terms.push_back({{"source", "y"},
                           {"coef", o.gamma_s},
                           {"param", "gamma_s"},
                           {"ref", "sampled_last"},
                           {"sample_times", o.sample_times},
                           {"sample_noise_sd", o.sample_noise}});
  procs["y"] = {{"kind", "diffusion"},
                {"dynamics",
                 {{"drift", {{"form", "constant"}, {"value", o.beta0}, {"param", "beta0"}}},
                  {"terms", drift_terms},
                  {"sigma", o.sb},
                  {"sigma_param", "sigmaB"},
                  {"init_mean", o.mu0},
                  {"init_mean_param", "mu0"},
                  {"init_sd", o.sy0},
                  {"init_sd_param", "sigmaY0"}}}};
  procs["death"] = {{"kind", "counting"},
                    {"intensity",
                     {{"baseline", {{"form", "constant"}, {"value", o.a0d}, {"param", "alpha0D"}}},
                      {"terms", death_terms}}}};
  json sys = {{"name", "quant"}, {"processes", procs}, {"outcome", "y"}};
  if (o.v) sys["factor"] = "v";
  return horizon::parse_system(sys);
}

// Observation schemes ---------------------------------------------------------

inline json baseline_channels(bool g, bool v) {
  json chans;
  chans["death"] = {{"process", "death"}, {"rip", {{"type", "continuous"}}}};
  if (g) chans["g"] = {{"process", "g"}, {"rip", {{"type", "continuous"}}}};
  if (v) chans["v"] = {{"process", "v"}, {"rip", {{"type", "continuous"}}}};
  return chans;
}

inline horizon::ObservationScheme continuous_illness_scheme(bool covariates) {
  json chans = baseline_channels(covariates, covariates);
  chans["ill"] = {{"process", "ill"}, {"rip", {{"type", "continuous"}}}};
  return horizon::parse_scheme(json{{"channels", chans}});
}

inline horizon::ObservationScheme interval_illness_scheme(bool covariates,
                                                          const std::vector<double>& visits) {
  json chans = baseline_channels(covariates, covariates);
  chans["ill"] = {{"process", "ill"},
                  {"rip", {{"type", "discrete"},
                           {"visits", {{"type", "fixed"}, {"times", visits}}}}}};
  return horizon::parse_scheme(json{{"channels", chans}});
}

inline horizon::ObservationScheme quant_scheme(const std::vector<double>& visits, double sigma,
                                               bool reuse = false, bool g = true, bool v = true) {
  json chans = baseline_channels(g, v);
  json noise = {{"type", "additive"}, {"sigma", sigma}};
  if (reuse) noise["reuse_system_samples"] = true;
  chans["z"] = {{"process", "y"},
                {"rip", {{"type", "discrete"}, {"visits", {{"type", "fixed"}, {"times", visits}}}}},
                {"noise", noise}};
  return horizon::parse_scheme(json{{"channels", chans}});
}

inline horizon::ObservationScheme threshold_scheme(const std::vector<double>& visits,
                                                   const std::vector<double>& cuts, bool binary,
                                                   bool g = true, bool v = true) {
  json chans = baseline_channels(g, v);
  json noise = binary ? json{{"type", "binary"}, {"cut", cuts.front()}}
                      : json{{"type", "ordinal"}, {"cuts", cuts}};
  chans["z"] = {{"process", "y"},
                {"rip", {{"type", "discrete"}, {"visits", {{"type", "fixed"}, {"times", visits}}}}},
                {"noise", noise}};
  return horizon::parse_scheme(json{{"channels", chans}});
}

// Model specs ------------------------------------------------------------------

inline horizon::ModelSpec illness_model(bool covariates, bool weibull) {
  json m = {{"family", "illness_death_interval"},
            {"channels", {{"event", "ill"}}},
            {"outcome_baseline", {{"form", weibull ? "weibull" : "constant"}}},
            {"death_baseline", {{"form", weibull ? "weibull" : "constant"}}}};
  if (covariates) {
    m["channels"]["attribute"] = "g";
    m["channels"]["factor"] = "v";
  }
  return horizon::parse_model(m);
}

inline horizon::ModelSpec naive_survival_model(bool covariates, bool weibull) {
  json m = {{"family", "naive_survival_only"},
            {"channels", {{"event", "ill"}}},
            {"outcome_baseline", {{"form", weibull ? "weibull" : "constant"}}}};
  if (covariates) {
    m["channels"]["attribute"] = "g";
    m["channels"]["factor"] = "v";
  }
  return horizon::parse_model(m);
}

inline horizon::ModelSpec joint_model(bool g = true, bool v = true, int gh_nodes = 15) {
  json m = {{"family", "joint_quantitative_shared_effect"},
            {"channels", {{"longitudinal", "z"}}},
            {"death_baseline", {{"form", "constant"}}},
            {"drift", {{"form", "constant"}}},
            {"quadrature", {{"gh_nodes", gh_nodes}}}};
  if (g) m["channels"]["attribute"] = "g";
  if (v) m["channels"]["factor"] = "v";
  return horizon::parse_model(m);
}

inline horizon::ModelSpec naive_mixed_model(bool g = true, bool v = true) {
  json m = {{"family", "naive_mixed_longitudinal"},
            {"channels", {{"longitudinal", "z"}}},
            {"drift", {{"form", "constant"}}}};
  if (g) m["channels"]["attribute"] = "g";
  if (v) m["channels"]["factor"] = "v";
  return horizon::parse_model(m);
}

// Simulation shortcuts ---------------------------------------------------------

inline horizon::Population quick_pop(const horizon::SystemSpec& spec,
                                     const horizon::ParamSet& overlay, std::int64_t n,
                                     std::uint64_t seed, double step = 0.05,
                                     double horizon_t = 4.0) {
  const auto vs = horizon::validate_system(spec);
  horizon::SimConfig cfg;
  cfg.n_subjects = n;
  cfg.step = step;
  cfg.horizon = horizon_t;
  cfg.master_seed = seed;
  return horizon::simulate_population(vs, overlay, cfg, 1);
}

inline horizon::Dataset quick_data(const horizon::SystemSpec& spec,
                                   const horizon::ObservationScheme& scheme,
                                   const horizon::ParamSet& overlay, std::int64_t n,
                                   std::uint64_t seed, double step = 0.05,
                                   double horizon_t = 4.0) {
  const auto pop = quick_pop(spec, overlay, n, seed, step, horizon_t);
  return horizon::apply_observation(pop, scheme, seed + 1);
}

}  // namespace builders
