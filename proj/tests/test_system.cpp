#include <doctest.h>

#include "helpers.hpp"
#include "horizon/baseline.hpp"
#include "horizon/common.hpp"
#include "horizon/graph.hpp"
#include "horizon/system.hpp"

using namespace horizon;

namespace {

std::string error_code(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return "";
}

}  // namespace

TEST_CASE("validation accepts the illness-death system and resolves roles") {
  const auto vs = validate_system(builders::illness_system(true, false));
  CHECK(vs.death_index() >= 0);
  CHECK(vs.process(vs.death_index()).name == "death");
  CHECK(vs.outcome_index() >= 0);
  CHECK(vs.process(vs.outcome_index()).name == "ill");
}

TEST_CASE("a system without a death process is rejected") {
  SystemSpec spec = builders::illness_system(false, false);
  spec.processes.erase(
      std::remove_if(spec.processes.begin(), spec.processes.end(),
                     [](const ProcessDecl& d) { return d.name == "death"; }),
      spec.processes.end());
  CHECK(error_code([&] { validate_system(spec); }) == "NoDeathProcess");
}

TEST_CASE("death may not influence other processes") {
  SystemSpec spec = builders::illness_system(false, false);
  for (auto& d : spec.processes)
    if (d.name == "ill") {
      Term t;
      t.source = "death";
      t.coef = 1.0;
      d.intensity->predictor.terms.push_back(t);
    }
  CHECK(error_code([&] { validate_system(spec); }) == "DeathHasOutgoingEdge");
}

TEST_CASE("unknown term sources are rejected") {
  SystemSpec spec = builders::illness_system(false, false);
  for (auto& d : spec.processes)
    if (d.name == "death") d.intensity->predictor.terms[0].source = "ghost";
  CHECK(error_code([&] { validate_system(spec); }) == "UnknownReference");
}

TEST_CASE("attributes cannot carry dynamics") {
  SystemSpec spec = builders::quant_system();
  for (auto& d : spec.processes)
    if (d.name == "g") d.dynamics = DiffusionDynamics{};
  CHECK(error_code([&] { validate_system(spec); }) == "AttributeInfluenced");
}

TEST_CASE("influence graph records direct edges and sampled-observation edges") {
  builders::QuantOpts o;
  o.death_reads_samples = true;
  const auto vs = validate_system(builders::quant_system(o));
  const auto g = influence_graph(vs);
  CHECK(g.has_edge("g", "y"));
  CHECK(g.has_edge("v", "y"));
  CHECK(g.has_edge("y", "death"));
  CHECK(g.edge_only_via_observed("y", "death"));
  CHECK(!g.has_edge("death", "y"));

  builders::QuantOpts direct;
  direct.death_reads_y = true;
  const auto g2 = influence_graph(validate_system(builders::quant_system(direct)));
  CHECK(g2.has_edge("y", "death"));
  CHECK(!g2.edge_only_via_observed("y", "death"));
}

TEST_CASE("dot rendering is deterministic and names every node") {
  const auto vs = validate_system(builders::quant_system());
  const std::string a = to_dot(influence_graph(vs));
  const std::string b = to_dot(influence_graph(vs));
  CHECK(a == b);
  for (const auto& d : vs.processes()) CHECK(a.find(d.name) != std::string::npos);
}

TEST_CASE("nuc detection flags a latent common cause of factor and outcome") {
  // latent w drives both the factor choice and the outcome drift
  json procs;
  procs["w"] = {{"kind", "attribute"},
                {"latent", true},
                {"law", {{"type", "normal"}, {"mean", 0.0}, {"sd", 1.0}}}};
  procs["v"] = {{"kind", "counting"},
                {"intensity",
                 {{"baseline", {{"form", "constant"}, {"value", 0.3}}},
                  {"terms", json::array({{{"source", "w"}, {"coef", 0.5}}})}}}};
  procs["y"] = {{"kind", "diffusion"},
                {"dynamics",
                 {{"drift", {{"form", "constant"}, {"value", 0.1}}},
                  {"terms", json::array({{{"source", "w"}, {"coef", 0.5}},
                                         {{"source", "v"}, {"coef", 0.4}}})},
                  {"sigma", 0.2},
                  {"init_mean", 0.0},
                  {"init_sd", 0.1}}}};
  procs["death"] = {{"kind", "counting"},
                    {"intensity", {{"baseline", {{"form", "constant"}, {"value", 0.05}}}}}};
  const auto vs =
      validate_system(parse_system(json{{"name", "conf"}, {"processes", procs}, {"outcome", "y"}}));
  const auto verdict = is_nuc(vs, "v", "y");
  CHECK(verdict.status == NucStatus::confounded);
  CHECK(verdict.confounder == "w");

  // without the confounding edge into v the pair is clean
  json procs2 = procs;
  procs2["v"]["intensity"]["terms"] = json::array();
  const auto vs2 = validate_system(
      parse_system(json{{"name", "clean"}, {"processes", procs2}, {"outcome", "y"}}));
  CHECK(is_nuc(vs2, "v", "y").status == NucStatus::nuc);
}

TEST_CASE("true parameters collect labels and rebinding overlays them") {
  const auto vs = validate_system(builders::illness_system(true, false));
  const ParamSet truth = true_params(vs);
  CHECK(truth.get("alpha0Y") == doctest::Approx(0.2));
  CHECK(truth.get("gamma3") == doctest::Approx(0.7));
  CHECK(truth.has("beta2"));

  ParamSet overlay;
  overlay.set("gamma3", 0.0);
  const auto bound = bind_params(vs, overlay);
  CHECK(true_params(bound).get("gamma3") == doctest::Approx(0.0));
  CHECK(true_params(bound).get("alpha0Y") == doctest::Approx(0.2));
  // the original is untouched
  CHECK(true_params(vs).get("gamma3") == doctest::Approx(0.7));
}

TEST_CASE("baseline integrals match numeric integration") {
  const BaselineFn forms[] = {
      ConstantBaseline{0.37, ""},
      WeibullBaseline{1.7, 3.1, "", ""},
      PiecewiseBaseline{{1.0, 2.5}, {0.2, 0.5, 0.1}, {}},
  };
  for (const auto& b : forms) {
    for (double t : {0.3, 1.0, 2.9, 6.0}) {
      const int n = 20000;
      double acc = 0.0;
      const double h = t / n;
      for (int i = 0; i < n; ++i)
        acc += 0.5 * h * (baseline_value(b, i * h) + baseline_value(b, (i + 1) * h));
      CHECK(baseline_integral(b, t) == doctest::Approx(acc).epsilon(1e-5));
    }
  }
}

TEST_CASE("hazard baselines reject negative values") {
  CHECK(error_code([] {
          validate_baseline(ConstantBaseline{-0.1, ""}, true, "x");
        }) != "");
  CHECK(error_code([] {
          validate_baseline(WeibullBaseline{-1.0, 2.0, "", ""}, true, "x");
        }) != "");
}
