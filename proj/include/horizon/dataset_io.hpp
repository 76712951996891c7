#pragma once

#include <string>

#include "horizon/harness.hpp"
#include "horizon/observe.hpp"

namespace horizon {

// Shortest decimal string that round-trips the double exactly.
std::string format_double(double v);

// One row per subject-gridpoint while alive (columns: every declared process),
// plus a separate jump-time file covering counting processes.  The manifest
// carries step/horizon/seed, the parameter overlay, and any realized noisy
// readings of sampled intensity terms, so a population round-trips exactly.
void write_population_csv(const Population& pop, const std::string& grid_path,
                          const std::string& events_path, const std::string& manifest_path,
                          const ParamSet& params);
Population read_population_csv(const std::string& grid_path, const std::string& events_path,
                               const std::string& manifest_path,
                               std::shared_ptr<const ValidatedSystem> system);

// Longitudinal records and the combined event/death file round-trip exactly;
// the manifest carries the scheme fingerprint, horizon, and CAR verdicts.
void write_dataset_csv(const Dataset& data, const std::string& long_path,
                       const std::string& events_path, const std::string& manifest_path);
Dataset read_dataset_csv(const std::string& long_path, const std::string& events_path,
                         const std::string& manifest_path);

// Long format: one row per family x parameter.
void write_study_csv(const StudyReport& rep, const std::string& path);

void write_typology_csv(const std::vector<TypologyRow>& rows, const std::string& path);

}  // namespace horizon
