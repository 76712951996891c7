#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "horizon/estimate.hpp"
#include "horizon/harness.hpp"
#include "horizon/observe.hpp"
#include "horizon/simulate.hpp"
#include "horizon/system.hpp"

namespace horizon {

using json = nlohmann::json;

// Parsed run configuration.  Sections are optional; each operation checks for
// the sections it needs.  Parsing is fail-closed: unknown keys are rejected
// unless prefixed with '_' (comment convention).

struct RunConfig {
  int schema_version = 1;
  std::string name;

  std::optional<SystemSpec> system;
  SimConfig sim;
  bool has_sim = false;
  std::optional<ObservationScheme> scheme;
  std::optional<ModelSpec> model;
  ParamSet init;         // fit starting values
  ParamSet params;       // overlay for simulation-time rebinding
  std::optional<Scenario> study;
  std::vector<Scenario> typology;

  // summary-operation extras
  std::vector<double> t_grid;
  std::int64_t mc_subjects = 20000;
  std::uint64_t mc_seed = 7;
  double z_threshold = 1.96;
  std::optional<FactorPath> v1, v2;
  std::string contrast_kind = "survival_difference";
  std::vector<std::string> fixed;  // parameters pinned at their init values when fitting
};

RunConfig parse_config(const json& j);
RunConfig load_config(const std::string& path);

// Sub-parsers, exposed for tests and for embedding snippets in other files.
SystemSpec parse_system(const json& j);
ObservationScheme parse_scheme(const json& j);
ModelSpec parse_model(const json& j);
Scenario parse_scenario(const json& j);
SimConfig parse_sim(const json& j);
ParamSet parse_params(const json& j);
FactorPath parse_factor_path(const json& j);

// Canonical serializations (stable key order; used by fingerprints and the
// manifest writer).
json scheme_to_json(const ObservationScheme& scheme);
json system_to_json(const SystemSpec& spec);
json model_to_json(const ModelSpec& model);
json params_to_json(const ParamSet& p);
json fit_to_json(const FitResult& fit);

// FNV-1a hash of the canonical scheme serialization; stored on every Dataset.
std::uint64_t scheme_fingerprint(const ObservationScheme& scheme);
std::uint64_t fnv1a(const std::string& bytes);

}  // namespace horizon
