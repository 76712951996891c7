#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "horizon/baseline.hpp"
#include "horizon/param_set.hpp"

namespace horizon {

// A system is a closed set of stochastic processes on a common timeline plus
// one privileged absorbing process named "death".  Counting processes carry a
// multiplicative-intensity jump model, diffusions an Euler drift/volatility
// model; attributes are frozen at time zero and external factors evolve
// autonomously (nothing in the system may influence them).

enum class ProcessKind { counting, diffusion, attribute, external_factor };

constexpr const char* kDeathName = "death";

// --- linear predictors -------------------------------------------------------

enum class TermRef {
  current,       // use the source's current (true) value
  sampled_last,  // use the most recent noisy sample of the source (see below)
};

// Sampling rule for sampled_last terms: the source diffusion is read at the
// scheduled times with additive Gaussian noise, and the intensity sees the
// latest such reading (0 before the first one).  Realized samples are kept on
// the trajectory so an observation channel can reuse the identical values.
struct SampleRule {
  std::vector<double> times;
  double noise_sd = 0.0;
};

struct Term {
  std::string source;
  double coef = 0.0;
  std::string param;  // optional label for rebinding
  TermRef ref = TermRef::current;
  SampleRule sample;                  // only for sampled_last
  std::optional<double> threshold;    // use 1{value >= threshold} instead of value
};

struct LinearPredictor {
  std::vector<Term> terms;
};

// --- process models ----------------------------------------------------------

// lambda(t) = baseline(t) * exp(predictor(t)), switched off after the jump.
struct CountingIntensity {
  BaselineFn baseline;
  LinearPredictor predictor;
};

// dY = (drift_baseline(t) + predictor(t)) dt + sigma dB.
struct DiffusionDynamics {
  BaselineFn drift_baseline;
  LinearPredictor predictor;
  double sigma = 0.0;
  std::string sigma_param;
  double init_mean = 0.0;
  double init_sd = 0.0;
  std::string init_mean_param;
  std::string init_sd_param;
};

struct BernoulliLaw {
  double p = 0.5;
  std::string param;
};
struct NormalLaw {
  double mean = 0.0;
  double sd = 1.0;
  std::string mean_param;
  std::string sd_param;
};
using AttributeLaw = std::variant<BernoulliLaw, NormalLaw>;

struct ConstantFactor {
  double value = 0.0;
};
struct LinearFactor {
  double intercept = 0.0;
  double slope = 0.0;
};
// Linear interpolation through (times, values); flat extrapolation outside.
struct PiecewiseLinearFactor {
  std::vector<double> times;
  std::vector<double> values;
};
// Subject-specific constant level drawn once per subject.
struct RandomConstantFactor {
  AttributeLaw law;
};
using FactorLaw =
    std::variant<ConstantFactor, LinearFactor, PiecewiseLinearFactor, RandomConstantFactor>;

// Deterministic factor path usable as an intervention override.
struct FactorPath {
  std::variant<ConstantFactor, LinearFactor, PiecewiseLinearFactor> fn;
  double operator()(double t) const;
};

double factor_value(const FactorLaw& law, double t);  // deterministic laws only
bool factor_is_random(const FactorLaw& law);

// --- declarations ------------------------------------------------------------

struct ProcessDecl {
  std::string name;
  ProcessKind kind = ProcessKind::diffusion;
  bool latent = false;  // identically-null observation permitted

  // exactly one of these is meaningful, matching `kind`
  std::optional<CountingIntensity> intensity;
  std::optional<DiffusionDynamics> dynamics;
  std::optional<AttributeLaw> law;
  std::optional<FactorLaw> factor;
};

struct SystemSpec {
  std::string name;
  std::vector<ProcessDecl> processes;
  // Optional role hints; resolved (or auto-detected) during validation.
  std::string outcome;
  std::string factor;
};

// Registered sampled_last term (owner is always a counting process).
struct SampledTermRef {
  int owner = -1;  // process index
  int term = -1;   // index into owner's predictor
  std::string source;
};

// --- validated view ----------------------------------------------------------

class ValidatedSystem {
public:
  const SystemSpec& spec() const { return spec_; }
  const std::vector<ProcessDecl>& processes() const { return spec_.processes; }
  const ProcessDecl& process(int i) const { return spec_.processes[i]; }

  int index_of(const std::string& name) const;  // -1 if absent
  const ProcessDecl& decl(const std::string& name) const;

  int death_index() const { return death_; }
  int outcome_index() const { return outcome_; }  // -1 if no unique candidate
  int factor_index() const { return factor_; }    // -1 if none

  const std::vector<int>& counting() const { return counting_; }
  const std::vector<int>& diffusions() const { return diffusion_; }
  const std::vector<int>& attributes() const { return attribute_; }
  const std::vector<int>& factors() const { return factor_list_; }
  const std::vector<SampledTermRef>& sampled_terms() const { return sampled_; }

  // Position of process i within its kind list (attribute slot etc).
  int slot(int i) const { return slot_[i]; }

private:
  friend ValidatedSystem validate_system(SystemSpec spec);
  SystemSpec spec_;
  int death_ = -1, outcome_ = -1, factor_ = -1;
  std::vector<int> counting_, diffusion_, attribute_, factor_list_, slot_;
  std::vector<SampledTermRef> sampled_;
};

// Structural checks; throws Error on violation.  See error codes in the user
// guide: NoDeathProcess, DeathHasOutgoingEdge, UnknownReference,
// AttributeInfluenced, InvalidSystem.
ValidatedSystem validate_system(SystemSpec spec);

// All labeled quantities with their current values.
ParamSet true_params(const ValidatedSystem& sys);

// Copy of the system with labeled quantities replaced from `p`, revalidated.
ValidatedSystem bind_params(const ValidatedSystem& sys, const ParamSet& p);

}  // namespace horizon
