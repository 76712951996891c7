#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "helpers.hpp"
#include "horizon/dataset_io.hpp"

using namespace horizon;
namespace fs = std::filesystem;

namespace {

std::string error_code(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return "";
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path temp_dir(const std::string& tag) {
  const fs::path dir = fs::temp_directory_path() / ("horizon_io_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

ObservationScheme kitchen_sink_scheme() {
  json chans;
  chans["death"] = {{"process", "death"},
                    {"rip", {{"type", "continuous"},
                             {"admin_censor", 3.5},
                             {"random_censor_rate", 0.05}}}};
  chans["g"] = {{"process", "g"}, {"rip", {{"type", "continuous"}}}};
  chans["care"] = {{"process", "y"},
                   {"rip", {{"type", "discrete"},
                            {"visits", {{"type", "doctor_care"},
                                        {"first_visit", 0.5},
                                        {"threshold", 2.5},
                                        {"delay_if_above", 0.5},
                                        {"delay_if_below", 1.0}}}}},
                   {"noise", {{"type", "additive"}, {"sigma", 0.2}}}};
  chans["dep"] = {{"process", "y"},
                  {"rip", {{"type", "discrete"},
                           {"visits", {{"type", "outcome_dependent"},
                                       {"candidates", {1.0, 2.0, 3.0}},
                                       {"intercept", 1.5},
                                       {"slope", -0.5}}}}},
                  {"noise", {{"type", "ordinal"}, {"cuts", {1.5, 2.5}}, {"law", "normal"},
                             {"scale", 0.8}}}};
  chans["quit"] = {{"process", "y"},
                   {"rip", {{"type", "dropout"},
                            {"visits", {{"type", "fixed"}, {"times", {0.5, 1.5, 2.5}}}},
                            {"base_rate", 0.1},
                            {"terms", {{{"input", "observed_history"},
                                        {"coef", 0.4},
                                        {"threshold", 2.0}}}}}},
                   {"death_truncated", false},
                   {"noise", {{"type", "binary"}, {"cut", 2.2}}}};
  return parse_scheme(json{{"channels", chans}});
}

}  // namespace

TEST_CASE("unknown keys are rejected everywhere, underscore keys pass") {
  json sys = {{"name", "s"},
              {"processes",
               {{"death",
                 {{"kind", "counting"},
                  {"intensity", {{"baseline", {{"form", "constant"}, {"value", 0.1}}}}}}}}}};
  CHECK(parse_system(sys).name == "s");

  json bad1 = sys;
  bad1["surprise"] = 1;
  CHECK(error_code([&] { parse_system(bad1); }) == "InvalidConfig");

  json bad2 = sys;
  bad2["processes"]["death"]["intenstiy"] = 1;  // typo must not be silently ignored
  CHECK(error_code([&] { parse_system(bad2); }) == "InvalidConfig");

  json ok = sys;
  ok["_note"] = "free-form commentary";
  ok["processes"]["death"]["_todo"] = "check this rate";
  CHECK(parse_system(ok).name == "s");
}

TEST_CASE("malformed sections report a path to the offending key") {
  json sys = {{"name", "s"},
              {"processes",
               {{"death",
                 {{"kind", "counting"},
                  {"intensity", {{"baseline", {{"form", "weird"}}}}}}}}}};
  try {
    parse_system(sys);
    FAIL("expected a parse error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("death") != std::string::npos);
  }
}

TEST_CASE("system serialization round-trips exactly") {
  builders::QuantOpts o;
  o.u = true;
  o.death_reads_samples = true;
  for (const auto& spec :
       {builders::quant_system(o), builders::illness_system(true, true)}) {
    const json j1 = system_to_json(spec);
    const json j2 = system_to_json(parse_system(j1));
    CHECK(j1 == j2);
    CHECK(j1.dump() == j2.dump());
  }
}

TEST_CASE("scheme serialization round-trips with a matching fingerprint") {
  const auto scheme = kitchen_sink_scheme();
  const json j1 = scheme_to_json(scheme);
  const auto back = parse_scheme(j1);
  CHECK(scheme_to_json(back) == j1);
  CHECK(scheme_fingerprint(back) == scheme_fingerprint(scheme));
  // any edit moves the fingerprint
  auto other = scheme;
  other.channels.erase("quit");
  CHECK(scheme_fingerprint(other) != scheme_fingerprint(scheme));
}

TEST_CASE("model serialization round-trips") {
  auto model = builders::joint_model();
  model.channels.ordinal = {"q"};
  model.ordinal_levels = {4};
  model.qmc.draws = 128;
  model.quad.gh_nodes = 21;
  model.death_baseline.form = BaselineShape::Form::piecewise;
  model.death_baseline.cuts = {1.0, 2.5};
  model.threshold_law = ThresholdLaw::normal;
  model.estimate_beta3 = true;
  const json j1 = model_to_json(model);
  const json j2 = model_to_json(parse_model(j1));
  CHECK(j1 == j2);
}

TEST_CASE("parameter tables round-trip with exact values") {
  ParamSet p;
  p.set("beta2", 0.1 + 0.2);  // not representable, must survive untouched
  p.set("sigmaB", 1e-17);
  p.set("gamma3", -3.25);
  const ParamSet q = parse_params(params_to_json(p));
  CHECK(q.values == p.values);
}

TEST_CASE("factor paths parse their three deterministic forms") {
  const auto c = parse_factor_path(json{{"type", "constant"}, {"value", 0.7}});
  CHECK(c(12.0) == 0.7);
  const auto l = parse_factor_path(json{{"type", "linear"}, {"intercept", 1.0}, {"slope", 0.5}});
  CHECK(l(2.0) == doctest::Approx(2.0));
  const auto pw = parse_factor_path(json{{"type", "piecewise_linear"},
                                         {"times", {0.0, 1.0, 2.0}},
                                         {"values", {0.0, 1.0, 0.0}}});
  CHECK(pw(0.5) == doctest::Approx(0.5));
  CHECK(pw(1.5) == doctest::Approx(0.5));
  CHECK(pw(5.0) == doctest::Approx(0.0));  // flat extrapolation
  CHECK(error_code([] {
          parse_factor_path(json{{"type", "random_constant"}});
        }) == "InvalidConfig");
}

TEST_CASE("a full run config parses and keeps its sections") {
  json cfg = {
      {"schema_version", 1},
      {"name", "demo"},
      {"system", system_to_json(builders::quant_system())},
      {"simulate", {{"n_subjects", 500}, {"step", 0.05}, {"horizon", 4.0}, {"master_seed", 12}}},
      {"observation", scheme_to_json(builders::quant_scheme({0.5, 1.5}, 0.3))},
      {"model", model_to_json(builders::joint_model())},
      {"init", {{"mu0", 2.0}, {"beta2", 0.4}}},
      {"fixed", {"gamma4"}},
      {"grid", {0.5, 1.0, 2.0}},
      {"mc_subjects", 5000},
      {"v1", {{"type", "constant"}, {"value", 0.0}}},
      {"v2", {{"type", "constant"}, {"value", 1.0}}},
      {"contrast", "hazard_ratio"},
      {"_scratch", "ignored"}};
  const RunConfig rc = parse_config(cfg);
  CHECK(rc.name == "demo");
  CHECK(rc.has_sim);
  CHECK(rc.sim.n_subjects == 500);
  CHECK(rc.system.has_value());
  CHECK(rc.scheme.has_value());
  CHECK(rc.model.has_value());
  CHECK(rc.init.get("beta2") == 0.4);
  CHECK(rc.fixed == std::vector<std::string>{"gamma4"});
  CHECK(rc.t_grid.size() == 3);
  CHECK(rc.mc_subjects == 5000);
  CHECK(rc.v1.has_value());
  CHECK(rc.contrast_kind == "hazard_ratio");
  CHECK(error_code([&] {
          json bad = cfg;
          bad["schema_version"] = 2;
          parse_config(bad);
        }) == "InvalidConfig");
}

TEST_CASE("scenario configs parse families with their pins") {
  json sc = {{"name", "cell"},
             {"system", system_to_json(builders::quant_system())},
             {"observation", scheme_to_json(builders::quant_scheme({0.5, 1.5}, 0.3))},
             {"true_params", {{"beta2", 0.5}}},
             {"families",
              {{{"label", "naive"},
                {"model", model_to_json(builders::naive_mixed_model())},
                {"init", {{"sigmaEps", 0.3}}},
                {"fixed", {"sigmaU"}}}}},
             {"replications", 4},
             {"n_subjects", 50},
             {"step", 0.1},
             {"horizon", 3.0},
             {"seed", 99},
             {"stated_verdict", "fails"},
             {"report_only", true}};
  const Scenario s = parse_scenario(sc);
  CHECK(s.name == "cell");
  CHECK(s.true_params.get("beta2") == 0.5);
  REQUIRE(s.families.size() == 1);
  CHECK(s.families[0].label == "naive");
  CHECK(s.families[0].init.get("sigmaEps") == 0.3);
  CHECK(s.families[0].fixed == std::vector<std::string>{"sigmaU"});
  CHECK(s.replications == 4);
  CHECK(s.seed == 99);
  CHECK(s.report_only);
  CHECK(s.stated_verdict == "fails");
}

TEST_CASE("load_config reads files and rejects bad ones") {
  const auto dir = temp_dir("cfg");
  const auto path = dir / "run.json";
  {
    std::ofstream out(path);
    out << json{{"schema_version", 1}, {"name", "fromfile"}}.dump(2);
  }
  CHECK(load_config(path.string()).name == "fromfile");
  CHECK(error_code([&] { load_config((dir / "missing.json").string()); }) == "InvalidConfig");
  {
    std::ofstream out(path);
    out << "{not json";
  }
  CHECK(error_code([&] { load_config(path.string()); }) == "InvalidConfig");
}

TEST_CASE("format_double strings survive a parse round trip") {
  for (double v : {0.1, 1.0 / 3.0, 1e-17, -2.5, 123456789.123456789, 0.0}) {
    CHECK(std::stod(format_double(v)) == v);
  }
  CHECK(format_double(std::numeric_limits<double>::quiet_NaN()) == "nan");
  CHECK(format_double(std::numeric_limits<double>::infinity()) == "inf");
}

TEST_CASE("datasets round-trip through csv byte for byte") {
  builders::QuantOpts o;
  o.u = true;
  const auto spec = builders::quant_system(o);
  const auto data =
      builders::quick_data(spec, builders::quant_scheme({0.5, 1.5, 2.5}, 0.3), {}, 120, 21);

  const auto dir = temp_dir("ds");
  const auto lp = (dir / "records.csv").string();
  const auto ep = (dir / "events.csv").string();
  const auto mp = (dir / "manifest.json").string();
  write_dataset_csv(data, lp, ep, mp);
  const Dataset back = read_dataset_csv(lp, ep, mp);

  REQUIRE(back.longitudinal.size() == data.longitudinal.size());
  for (std::size_t i = 0; i < data.longitudinal.size(); ++i) {
    CHECK(back.longitudinal[i].subject == data.longitudinal[i].subject);
    CHECK(back.longitudinal[i].channel == data.longitudinal[i].channel);
    CHECK(back.longitudinal[i].time == data.longitudinal[i].time);
    CHECK(back.longitudinal[i].value == data.longitudinal[i].value);
  }
  REQUIRE(back.deaths.size() == data.deaths.size());
  for (std::size_t i = 0; i < data.deaths.size(); ++i) {
    CHECK(back.deaths[i].time == data.deaths[i].time);
    CHECK(back.deaths[i].observed == data.deaths[i].observed);
  }
  CHECK(back.scheme_fingerprint == data.scheme_fingerprint);
  CHECK(back.horizon == data.horizon);
  CHECK(back.car_verdicts == data.car_verdicts);

  const auto lp2 = (dir / "records2.csv").string();
  const auto ep2 = (dir / "events2.csv").string();
  const auto mp2 = (dir / "manifest2.json").string();
  write_dataset_csv(back, lp2, ep2, mp2);
  CHECK(slurp(lp) == slurp(lp2));
  CHECK(slurp(ep) == slurp(ep2));
  CHECK(slurp(mp) == slurp(mp2));
}

TEST_CASE("event records round-trip through csv") {
  const auto spec = builders::illness_system(true, false);
  const auto data = builders::quick_data(
      spec, builders::interval_illness_scheme(true, {1.0, 2.0, 3.0}), {}, 150, 33);
  const auto dir = temp_dir("ev");
  const auto lp = (dir / "r.csv").string(), ep = (dir / "e.csv").string(),
             mp = (dir / "m.json").string();
  write_dataset_csv(data, lp, ep, mp);
  const Dataset back = read_dataset_csv(lp, ep, mp);
  REQUIRE(back.events.size() == data.events.size());
  for (std::size_t i = 0; i < data.events.size(); ++i) {
    CHECK(back.events[i].subject == data.events[i].subject);
    CHECK(back.events[i].channel == data.events[i].channel);
    CHECK(back.events[i].process == data.events[i].process);
    CHECK(back.events[i].status == data.events[i].status);
    CHECK(back.events[i].entry == data.events[i].entry);
    CHECK(back.events[i].exit == data.events[i].exit);
    CHECK(back.events[i].left == data.events[i].left);
    CHECK(back.events[i].right == data.events[i].right);
  }
}

TEST_CASE("populations round-trip so observation replays identically") {
  builders::QuantOpts o;
  o.u = true;
  o.death_reads_samples = true;  // exercises the realized-sample manifest
  const auto spec = builders::quant_system(o);
  auto sys = std::make_shared<const ValidatedSystem>(validate_system(spec));
  SimConfig cfg;
  cfg.n_subjects = 120;
  cfg.step = 0.05;
  cfg.horizon = 4.0;
  cfg.master_seed = 44;
  const Population pop = simulate_population(*sys, {}, cfg, 1);

  const auto dir = temp_dir("pop");
  const auto gp = (dir / "grid.csv").string(), ep = (dir / "events.csv").string(),
             mp = (dir / "manifest.json").string();
  write_population_csv(pop, gp, ep, mp, {});
  const Population back = read_population_csv(gp, ep, mp, sys);

  REQUIRE(back.subjects.size() == pop.subjects.size());
  CHECK(back.step == pop.step);
  CHECK(back.horizon == pop.horizon);
  CHECK(back.master_seed == pop.master_seed);
  for (std::size_t i = 0; i < pop.subjects.size(); ++i) {
    const auto& a = pop.subjects[i];
    const auto& b = back.subjects[i];
    CHECK(a.death_time == b.death_time);
    CHECK(a.attributes == b.attributes);
    CHECK(a.jump_times == b.jump_times);
    CHECK(a.diffusion_paths == b.diffusion_paths);
    CHECK(a.factor_levels == b.factor_levels);
    CHECK(a.samples == b.samples);
  }

  const auto scheme = builders::quant_scheme(o.sample_times, 0.3, true);
  const auto d1 = apply_observation(pop, scheme, 77);
  const auto d2 = apply_observation(back, scheme, 77);
  REQUIRE(d1.longitudinal.size() == d2.longitudinal.size());
  for (std::size_t i = 0; i < d1.longitudinal.size(); ++i)
    CHECK(d1.longitudinal[i].value == d2.longitudinal[i].value);
}

TEST_CASE("study and typology tables have the documented columns") {
  StudyReport rep;
  rep.scenario = "demo";
  rep.replications = 4;
  ParamCell cell;
  cell.family = "naive";
  cell.param = "beta2";
  cell.truth = 0.5;
  cell.mean_est = 0.48;
  cell.bias = -0.02;
  cell.mc_se = 0.01;
  cell.emp_sd = 0.02;
  cell.mean_se = 0.011;
  cell.coverage = 0.95;
  cell.used = 4;
  rep.cells.push_back(cell);

  const auto dir = temp_dir("study");
  const auto sp = (dir / "study.csv").string();
  write_study_csv(rep, sp);
  const std::string text = slurp(sp);
  CHECK(text.rfind("scenario,family,param,truth,mean_est,bias,mc_se,emp_sd,mean_se,coverage,used",
                   0) == 0);
  CHECK(text.find("demo,naive,beta2,0.5,") != std::string::npos);

  TypologyRow row{"cell-a", "holds", "holds", "unbiased", true};
  const auto tp = (dir / "typology.csv").string();
  write_typology_csv({row}, tp);
  const std::string ttext = slurp(tp);
  CHECK(ttext.rfind("cell,stated,classified,empirical,agree", 0) == 0);
  CHECK(ttext.find("cell-a,holds,holds,unbiased,1") != std::string::npos);
}
