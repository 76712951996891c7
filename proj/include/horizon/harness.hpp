#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "horizon/estimate.hpp"
#include "horizon/observe.hpp"
#include "horizon/system.hpp"

namespace horizon {

// One model family to fit per replication.  An empty init means "start at the
// scenario's true values", the standard choice for bias studies.

struct FamilyJob {
  std::string label;
  ModelSpec model;
  ParamSet init;
  std::vector<std::string> fixed;  // extra parameters pinned at their init values
};

struct Scenario {
  std::string name;
  SystemSpec system;
  ObservationScheme scheme;
  ParamSet true_params;  // overlay on the system's embedded values; may be empty
  std::vector<FamilyJob> families;
  int replications = 30;
  std::int64_t n_subjects = 500;
  double step = 0.05;
  double horizon = 10.0;
  std::uint64_t seed = 1;
  std::string bias_param = "beta2";  // headline parameter for verdict checks
  std::string stated_verdict;        // typology expectation: "holds" / "fails" / ""
  bool report_only = false;          // descriptive run, exempt from verdict checks
};

struct ParamCell {
  std::string family;  // FamilyJob label
  std::string param;
  double truth = 0.0;      // NaN when the truth has no such parameter
  double mean_est = 0.0;
  double bias = 0.0;
  double mc_se = 0.0;      // empirical SD / sqrt(replications used)
  double emp_sd = 0.0;
  double mean_se = 0.0;    // mean model-based SE (NaN if never available)
  double coverage = 0.0;   // 95% CI coverage of the truth (NaN without SEs)
  int used = 0;            // replications entering the estimate column
};

struct StudyReport {
  std::string scenario;
  int replications = 0;
  std::vector<ParamCell> cells;  // ordered by (family label, parameter name)
  std::map<std::string, std::string> car_verdicts;  // channel -> rendered verdict
  // family label -> naive-vs-verdict consistency (joint families: bias small)
  std::map<std::string, bool> verdict_consistent;
  std::map<std::string, int> exclusions;  // family label -> dropped replications
  double exclusion_rate = 0.0;            // worst family
  std::vector<std::string> notes;
};

StudyReport run_scenario(const Scenario& s, int workers = 0);

struct TypologyRow {
  std::string cell;
  std::string stated;     // verdict the typology table asserts for this cell
  std::string classified;  // classifier's verdict for the outcome channel
  std::string empirical;  // "unbiased" / "biased" from the naive fit
  bool agree = false;
};

// Runs each cell scenario and tabulates stated vs classified vs empirical.
std::vector<TypologyRow> typology_suite(const std::vector<Scenario>& cells, int workers = 0);

// --- report helpers shared by the CLI ---

std::string render_study_text(const StudyReport& report);
std::string render_typology_text(const std::vector<TypologyRow>& rows);

// Bias verdict used by consistency checks: |bias| <= k * MCSE.
bool bias_within(const ParamCell& cell, double k);

// Finds the cell for (family, param); nullptr if absent.
const ParamCell* find_cell(const StudyReport& report, const std::string& family,
                           const std::string& param);

}  // namespace horizon
