#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "horizon/trajectory.hpp"

namespace horizon {

struct SimConfig {
  std::int64_t n_subjects = 1;
  double step = 0.05;
  double horizon = 10.0;
  std::uint64_t master_seed = 1;
};

void validate_sim_config(const SimConfig& cfg);

// Draws one subject.  params overlays labeled system quantities first (pass an
// empty set to simulate at the declared values).  The optional factor path
// replaces the role factor's own law (intervention arm).
Trajectory simulate_subject(const ValidatedSystem& sys, const ParamSet& params,
                            const SimConfig& cfg, std::int64_t subject_index,
                            const std::optional<FactorPath>& factor_override = std::nullopt);

Population simulate_population(const ValidatedSystem& sys, const ParamSet& params,
                               const SimConfig& cfg, int workers = 1);

// --- Monte Carlo population summaries ----------------------------------------
// These stream subjects through accumulators instead of materializing a
// Population, so n_mc = 1e5+ stays cheap on memory.  cfg supplies (step,
// horizon); its n_subjects/master_seed are superseded by n_mc/seed.

struct OccupancyRow {
  double t = 0.0;
  double healthy = 0.0, ill = 0.0, dead = 0.0;
  double se_healthy = 0.0, se_ill = 0.0, se_dead = 0.0;
};

// Binary outcome only.  Rows partition the cohort: healthy + ill + dead == 1.
std::vector<OccupancyRow> occupation_probabilities(
    const ValidatedSystem& sys, const ParamSet& params, const SimConfig& cfg,
    const std::optional<FactorPath>& v, const std::vector<double>& t_grid, std::int64_t n_mc,
    std::uint64_t seed);

struct AliveMeanRow {
  double t = 0.0;
  double mean = 0.0;  // NaN when no survivors
  double se = 0.0;
  std::int64_t n_alive = 0;
  bool defined = true;
};

// Quantitative outcome: mean over survivors at each t (undefined cells flagged).
std::vector<AliveMeanRow> mean_outcome_alive(
    const ValidatedSystem& sys, const ParamSet& params, const SimConfig& cfg,
    const std::optional<FactorPath>& v, const std::vector<double>& t_grid, std::int64_t n_mc,
    std::uint64_t seed);

// --- preferable order ---------------------------------------------------------

enum class Preference { v1_preferable, v2_preferable, incomparable, indistinguishable };

const char* to_string(Preference p);

struct PreferenceRow {
  double t = 0.0;
  double dead1 = 0.0, dead2 = 0.0, se_dead = 0.0;        // se of the difference
  double outcome1 = 0.0, outcome2 = 0.0, se_outcome = 0.0;
  bool outcome_defined = true;
};

struct PreferenceReport {
  Preference verdict = Preference::indistinguishable;
  std::vector<PreferenceRow> rows;
  std::vector<std::string> warnings;  // e.g. confounded (V, D) pair
};

// Lower death risk and lower outcome level are both "better"; v1 is preferable
// when it is never significantly worse and strictly better somewhere.  Both
// arms reuse the same per-subject streams (common random numbers), so v1 == v2
// is exactly indistinguishable rather than noisily so.
PreferenceReport preferable(const ValidatedSystem& sys, const ParamSet& params,
                            const SimConfig& cfg, const FactorPath& v1, const FactorPath& v2,
                            const std::vector<double>& t_grid, std::int64_t n_mc,
                            std::uint64_t seed, double z_threshold = 1.96);

// --- contrasts ----------------------------------------------------------------

enum class ContrastKind { hazard_ratio, drift_difference, survival_difference, mean_difference };

struct ContrastRow {
  double t = 0.0;
  double value = 0.0;
  double se = 0.0;  // 0 for the analytic kinds
  bool defined = true;
};

// hazard_ratio and drift_difference read the factor coefficient straight off
// the parametric form; the other two are Monte Carlo marginals over attributes.
std::vector<ContrastRow> contrast(const ValidatedSystem& sys, const ParamSet& params,
                                  const SimConfig& cfg, const FactorPath& v1,
                                  const FactorPath& v2, ContrastKind kind,
                                  const std::vector<double>& t_grid, std::int64_t n_mc = 20000,
                                  std::uint64_t seed = 7);

}  // namespace horizon
