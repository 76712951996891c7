#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "horizon/trajectory.hpp"

namespace horizon {

// Observation layer: response-indicator processes (when is a value seen) and
// noise models (what is seen).  Death composes multiplicatively with any
// response indicator: nothing is recorded at or after the death time.

// --- response indicator specs ------------------------------------------------

// Inputs a rule is allowed to read; the declaration drives CAR classification.
enum class RuleInput { observed_history, true_latent, attributes, death_status };

struct ContinuousRip {
  std::optional<double> admin_censor;  // fixed end of follow-up
  std::optional<double> random_censor_rate;  // exponential censoring, independent
};

struct FixedVisits {
  std::vector<double> times;
};

// Next visit delayed according to the last *observed* value of this channel
// (post-noise), never the latent state; that restriction is what keeps the
// scheme ignorable.
struct DoctorCareVisits {
  double first_visit = 0.0;
  double threshold = 0.0;     // observed value >= threshold: worrying
  double delay_if_above = 0.5;
  double delay_if_below = 1.0;
};

// Visit at each candidate time attended with probability
// logistic(intercept + slope * true current value) -- reads the latent state.
struct OutcomeDependentVisits {
  std::vector<double> candidates;
  double intercept = 0.0;
  double slope = 0.0;
};

using VisitRule = std::variant<FixedVisits, DoctorCareVisits, OutcomeDependentVisits>;

struct DiscreteRip {
  VisitRule visits;
};

// Dropout: visits continue until a latent stopping time S with intensity
// base_rate * exp(sum of terms).  Terms read the declared inputs only.
struct DropoutTerm {
  RuleInput input = RuleInput::observed_history;
  std::string source;  // process name for true_latent / attributes ("" = channel process)
  double coef = 0.0;
  std::optional<double> threshold;  // use 1{value >= threshold}
};

struct DropoutRip {
  VisitRule visits;
  double base_rate = 0.0;
  std::vector<DropoutTerm> terms;
};

struct RipSpec {
  bool death_truncated = true;
  std::variant<ContinuousRip, DiscreteRip, DropoutRip> base;
  // Free-form extra input declarations (vocabulary-checked at classification;
  // unrecognized tokens force a conservative fails verdict).
  std::vector<std::string> extra_inputs;
};

// --- noise models -------------------------------------------------------------

struct NoNoise {};

struct NoiseLaw {
  enum class Kind { logistic, normal } kind = Kind::logistic;
  double scale = 1.0;
};

// Z_j = Y_{t_j} + eps_j.  reuse_system_samples replays the realized readings
// of the system's sampled_last intensity term on the same process, so the
// dataset contains byte-identical values to what the intensity saw.
struct ModelANoise {
  double sigma = 0.0;
  bool reuse_system_samples = false;
};

// Ordinal level q iff c_q <= Y + eps < c_{q+1}, with c_0 = -inf, c_Q = +inf.
struct ModelBOrdinal {
  std::vector<double> cuts;
  NoiseLaw eps;
};

struct ModelBBinary {
  double cut = 0.0;
  NoiseLaw eps;
};

// Binary state reported with P(1|1)=sensitivity, P(0|0)=specificity.
struct Misclassification {
  double sensitivity = 1.0;
  double specificity = 1.0;
};

using NoiseModel = std::variant<NoNoise, ModelANoise, ModelBOrdinal, ModelBBinary, Misclassification>;

struct ChannelSpec {
  std::string process;
  RipSpec rip;
  NoiseModel noise;
};

struct ObservationScheme {
  // Channel name -> spec; sorted iteration keeps all outputs deterministic.
  std::map<std::string, ChannelSpec> channels;
};

void validate_scheme(const ObservationScheme& scheme, const ValidatedSystem& sys);

// --- observed data ------------------------------------------------------------

struct LongRecord {
  std::int64_t subject = 0;
  std::string channel;
  double time = 0.0;
  double value = 0.0;  // real, or ordinal level stored as a small integer
};

enum class EventStatus { observed_jump, right_censored, interval };

struct EventRecord {
  std::int64_t subject = 0;
  std::string channel;
  std::string process;
  EventStatus status = EventStatus::right_censored;
  double entry = 0.0;
  double exit = 0.0;              // jump time or censor time
  double left = 0.0, right = 0.0;  // interval (l, r], status == interval only
};

struct DeathRecord {
  std::int64_t subject = 0;
  double time = 0.0;  // censored death time
  bool observed = false;
};

struct Dataset {
  std::vector<LongRecord> longitudinal;  // sorted by (subject, channel, time)
  std::vector<EventRecord> events;       // sorted by (subject, process)
  std::vector<DeathRecord> deaths;       // sorted by subject
  std::uint64_t scheme_fingerprint = 0;
  std::map<std::string, std::string> car_verdicts;  // channel -> rendered verdict
  double horizon = 0.0;
};

// Realizes every channel against the population.  Noise/visit streams derive
// from (seed, subject, channel index), so adding a channel never perturbs the
// draws of existing ones.
Dataset apply_observation(const Population& pop, const ObservationScheme& scheme,
                          std::uint64_t seed);

}  // namespace horizon
