#include <doctest.h>

#include <cmath>

#include "helpers.hpp"

using namespace horizon;

namespace {

Scenario illness_scenario(bool report_only, int reps, std::int64_t n) {
  Scenario s;
  s.name = "illness-check";
  s.system = builders::illness_system(true, false);
  s.scheme = builders::continuous_illness_scheme(true);
  s.families.push_back({"naive", builders::naive_survival_model(true, false), {}, {}});
  s.families.push_back({"full", builders::illness_model(true, false), {}, {}});
  s.replications = reps;
  s.n_subjects = n;
  s.step = 0.05;
  s.horizon = 4.0;
  s.seed = 11;
  s.report_only = report_only;
  return s;
}

// equality that treats NaN as equal to NaN, for bitwise-determinism checks
bool same(double a, double b) {
  return a == b || (std::isnan(a) && std::isnan(b));
}

// the active-study report is expensive; compute it once and share
const StudyReport& active_report() {
  static const StudyReport rep = run_scenario(illness_scenario(false, 30, 100), 1);
  return rep;
}

}  // namespace

TEST_CASE("misconfigured studies fail before any replication runs") {
  auto s = illness_scenario(false, 30, 50);

  auto no_families = s;
  no_families.families.clear();
  CHECK_THROWS_AS(run_scenario(no_families, 1), Error);

  auto too_few = s;
  too_few.replications = 5;
  try {
    run_scenario(too_few, 1);
    FAIL("expected a scenario error");
  } catch (const Error& e) {
    CHECK(e.code() == "InvalidScenario");
  }

  auto no_naive = s;
  no_naive.families.erase(no_naive.families.begin());  // only the correct model left
  try {
    run_scenario(no_naive, 1);
    FAIL("expected a scenario error");
  } catch (const Error& e) {
    CHECK(e.code() == "InvalidScenario");
  }
}

TEST_CASE("a family whose baseline names are absent fails the whole study") {
  // weibull fit families need shape/scale starting values; a constant-baseline
  // system has none, so the mismatch must surface as an error, not exclusions
  auto s = illness_scenario(true, 2, 30);
  s.families = {{"weib", builders::naive_survival_model(true, true), {}, {}}};
  try {
    run_scenario(s, 1);
    FAIL("expected a reference error");
  } catch (const Error& e) {
    CHECK(e.code() == "UnknownReference");
  }
}

TEST_CASE("report-only studies tabulate deterministically across worker counts") {
  const auto s = illness_scenario(true, 4, 60);
  const StudyReport a = run_scenario(s, 1);
  const StudyReport b = run_scenario(s, 3);

  CHECK(a.scenario == "illness-check");
  CHECK(a.replications == 4);
  REQUIRE(a.cells.size() == b.cells.size());
  for (std::size_t i = 0; i < a.cells.size(); ++i) {
    const auto& x = a.cells[i];
    const auto& y = b.cells[i];
    CHECK(x.family == y.family);
    CHECK(x.param == y.param);
    CHECK(same(x.truth, y.truth));
    CHECK(same(x.mean_est, y.mean_est));
    CHECK(same(x.bias, y.bias));
    CHECK(same(x.mc_se, y.mc_se));
    CHECK(same(x.emp_sd, y.emp_sd));
    CHECK(same(x.mean_se, y.mean_se));
    CHECK(same(x.coverage, y.coverage));
    CHECK(x.used == y.used);
  }
  CHECK(a.car_verdicts == b.car_verdicts);

  // descriptive bookkeeping
  CHECK(!a.car_verdicts.empty());
  for (const auto& [ch, v] : a.car_verdicts) {
    (void)ch;
    CHECK(v.rfind("holds", 0) == 0);
  }
  CHECK(a.exclusions.at("naive") == 0);
  CHECK(a.exclusions.at("full") == 0);
  CHECK(a.exclusion_rate == 0.0);
  CHECK(a.verdict_consistent.empty());
  bool noted = false;
  for (const auto& n : a.notes) noted = noted || n.find("report-only") != std::string::npos;
  CHECK(noted);

  // cells are grouped by family in declaration order, params sorted inside
  std::vector<std::string> naive_params;
  for (const auto& c : a.cells)
    if (c.family == "naive") naive_params.push_back(c.param);
  CHECK(naive_params == std::vector<std::string>{"alpha0Y", "beta1", "beta2"});
  for (const auto& c : a.cells) CHECK(c.used == 4);

  auto shifted = s;
  shifted.seed = 12;
  const StudyReport c = run_scenario(shifted, 1);
  CHECK(c.cells[0].mean_est != a.cells[0].mean_est);
}

TEST_CASE("an active study recovers the truth and marks both families consistent") {
  const StudyReport& rep = active_report();
  CHECK(rep.replications == 30);
  CHECK(rep.exclusion_rate == 0.0);

  const ParamCell* naive = find_cell(rep, "naive", "beta2");
  REQUIRE(naive != nullptr);
  CHECK(naive->truth == 0.5);
  CHECK(naive->used == 30);
  CHECK(bias_within(*naive, 3.0));
  CHECK(naive->coverage >= 0.75);
  CHECK(naive->coverage <= 1.0);
  CHECK(naive->mean_se > 0.0);
  CHECK(naive->emp_sd > 0.0);

  const ParamCell* full = find_cell(rep, "full", "beta2");
  REQUIRE(full != nullptr);
  CHECK(bias_within(*full, 3.0));
  CHECK(full->coverage >= 0.75);

  // continuous noiseless channels classify as CAR-holds, and an unbiased
  // naive fit is consistent with that verdict
  CHECK(rep.verdict_consistent.at("naive"));
  CHECK(rep.verdict_consistent.at("full"));
}

TEST_CASE("a stated failure verdict flips consistency for naive families only") {
  auto s = illness_scenario(false, 30, 100);
  s.stated_verdict = "fails";
  const StudyReport rep = run_scenario(s, 1);
  CHECK_FALSE(rep.verdict_consistent.at("naive"));  // unbiased, but told to expect bias
  CHECK(rep.verdict_consistent.at("full"));         // correct model judged on bias alone
}

TEST_CASE("family-level pins drop parameters from the report") {
  auto s = illness_scenario(true, 2, 40);
  s.families = {{"pinned", builders::naive_survival_model(true, false), {}, {"beta1"}}};
  const StudyReport rep = run_scenario(s, 1);
  CHECK(find_cell(rep, "pinned", "beta1") == nullptr);
  CHECK(find_cell(rep, "pinned", "beta2") != nullptr);
  CHECK(find_cell(rep, "pinned", "alpha0Y") != nullptr);
}

TEST_CASE("typology rows compare stated, classified, and empirical verdicts") {
  std::vector<Scenario> cells;

  // descriptive cell whose mechanism is CAR: stated matches the classifier
  auto holds_desc = illness_scenario(true, 2, 30);
  holds_desc.name = "desc-holds";
  holds_desc.stated_verdict = "holds";
  cells.push_back(holds_desc);

  // descriptive cell that claims failure but uses the same CAR mechanism
  auto wrong_desc = holds_desc;
  wrong_desc.name = "desc-wrong";
  wrong_desc.stated_verdict = "fails";
  cells.push_back(wrong_desc);

  // visits that read the current true outcome are non-ignorable by construction
  auto od = illness_scenario(true, 2, 30);
  od.name = "desc-outcome-dependent";
  od.stated_verdict = "fails";
  od.system = builders::quant_system();
  ParamSet obs_init;  // observation-side scales live outside the system truth
  obs_init.set("sigmaU", 0.3);
  obs_init.set("sigmaEps", 0.3);
  od.families = {{"nm", builders::naive_mixed_model(), obs_init, {}}};
  json chans;
  chans["death"] = {{"process", "death"}, {"rip", {{"type", "continuous"}}}};
  chans["z"] = {{"process", "y"},
                {"rip", {{"type", "discrete"},
                         {"visits", {{"type", "outcome_dependent"},
                                     {"candidates", {0.5, 1.5, 2.5}},
                                     {"intercept", 4.0},
                                     {"slope", 0.0}}}}},
                {"noise", {{"type", "additive"}, {"sigma", 0.3}}}};
  chans["g"] = {{"process", "g"}, {"rip", {{"type", "continuous"}}}};
  chans["v"] = {{"process", "v"}, {"rip", {{"type", "continuous"}}}};
  od.scheme = parse_scheme(json{{"channels", chans}});
  cells.push_back(od);

  // one active cell: CAR holds and the naive fit is unbiased
  auto active = illness_scenario(false, 30, 80);
  active.name = "active-holds";
  active.stated_verdict = "holds";
  active.families = {{"naive", builders::naive_survival_model(true, false), {}, {}}};
  cells.push_back(active);

  const auto rows = typology_suite(cells, 1);
  REQUIRE(rows.size() == 4);

  CHECK(rows[0].cell == "desc-holds");
  CHECK(rows[0].classified == "holds");
  CHECK(rows[0].empirical == "n/a");
  CHECK(rows[0].agree);

  CHECK(rows[1].classified == "holds");
  CHECK_FALSE(rows[1].agree);

  CHECK(rows[2].cell == "desc-outcome-dependent");
  CHECK(rows[2].classified == "fails");
  CHECK(rows[2].agree);

  CHECK(rows[3].cell == "active-holds");
  CHECK(rows[3].classified == "holds");
  CHECK(rows[3].empirical == "unbiased");
  CHECK(rows[3].agree);
}

TEST_CASE("bias_within applies the k standard-error rule") {
  ParamCell c;
  c.bias = 0.02;
  c.mc_se = 0.01;
  CHECK(bias_within(c, 3.0));
  CHECK_FALSE(bias_within(c, 1.0));
  c.mc_se = std::numeric_limits<double>::quiet_NaN();
  CHECK_FALSE(bias_within(c, 3.0));
}

TEST_CASE("rendered reports name families, parameters, and verdicts") {
  const std::string text = render_study_text(active_report());
  CHECK(text.find("scenario: illness-check") != std::string::npos);
  CHECK(text.find("family naive") != std::string::npos);
  CHECK(text.find("family full") != std::string::npos);
  CHECK(text.find("beta2") != std::string::npos);
  CHECK(text.find("verdict consistency:") != std::string::npos);
  CHECK(text.find("INCONSISTENT") == std::string::npos);

  TypologyRow good{"a", "holds", "holds", "unbiased", true};
  TypologyRow bad{"b", "fails", "holds", "unbiased", false};
  const std::string ttext = render_typology_text({good, bad});
  CHECK(ttext.find("cell") != std::string::npos);
  CHECK(ttext.find("yes") != std::string::npos);
  CHECK(ttext.find("NO") != std::string::npos);
}
