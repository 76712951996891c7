#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "helpers.hpp"

using namespace horizon;
namespace fs = std::filesystem;

namespace {

const fs::path kRoot = fs::temp_directory_path() / "horizon_cli";

int run(const std::string& args, const std::string& log_name = "log.txt") {
  const std::string cmd = std::string(HORIZON_BIN) + " " + args + " > " +
                          (kRoot / log_name).string() + " 2>&1";
  const int st = std::system(cmd.c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_json(const fs::path& p, const json& j) {
  std::ofstream out(p);
  out << j.dump(2) << '\n';
}

// self-contained quantitative-marker run: system, draw, scheme, and a mixed
// model whose starting values sit near the generating ones
json quant_config() {
  return json{
      {"schema_version", 1},
      {"name", "cli-quant"},
      {"system", system_to_json(builders::quant_system())},
      {"simulate",
       {{"n_subjects", 150}, {"step", 0.05}, {"horizon", 4.0}, {"master_seed", 5}}},
      {"observation", scheme_to_json(builders::quant_scheme({0.5, 1.5, 2.5}, 0.3))},
      {"model", model_to_json(builders::naive_mixed_model())},
      {"init",
       {{"mu0", 2.0}, {"beta0", 0.3}, {"beta1", 0.3}, {"beta2", 0.5}, {"sigmaY0", 0.3},
        {"sigmaB", 0.25}, {"sigmaU", 0.3}, {"sigmaEps", 0.3}}},
      {"grid", {0.5, 1.5, 2.5, 3.5}},
      {"mc_subjects", 2000},
      {"v1", {{"type", "constant"}, {"value", 0.0}}},
      {"v2", {{"type", "constant"}, {"value", 1.0}}},
      {"contrast", "drift_difference"}};
}

struct Paths {
  fs::path cfg = kRoot / "quant.json";
};

}  // namespace

TEST_CASE("command line misuse exits with the usage code") {
  fs::create_directories(kRoot);
  CHECK(run("") == 2);
  CHECK(run("frobnicate --config x.json") == 2);
  CHECK(run("simulate") == 2);  // --config is required
  CHECK(run("--help") == 0);
}

TEST_CASE("broken configs exit with the error code") {
  fs::create_directories(kRoot);
  CHECK(run("validate --config " + (kRoot / "absent.json").string() + " --out " +
            (kRoot / "o1").string()) == 1);
  write_json(kRoot / "bad.json", json{{"schema_version", 1}, {"mystery", true}});
  CHECK(run("validate --config " + (kRoot / "bad.json").string() + " --out " +
            (kRoot / "o2").string()) == 1);
  const std::string log = slurp(kRoot / "log.txt");
  CHECK(log.find("error:") != std::string::npos);
  CHECK(log.find("mystery") != std::string::npos);
}

TEST_CASE("validate and graph describe the system") {
  fs::create_directories(kRoot);
  Paths p;
  write_json(p.cfg, quant_config());

  const auto vdir = kRoot / "validate";
  REQUIRE(run("validate --config " + p.cfg.string() + " --out " + vdir.string()) == 0);
  const std::string dot = slurp(vdir / "graph.dot");
  CHECK(dot.find("digraph") != std::string::npos);
  const json man = json::parse(slurp(vdir / "manifest.json"));
  CHECK(man.at("subcommand") == "validate");
  CHECK(man.at("outputs").size() >= 1);

  const auto gdir = kRoot / "graph";
  REQUIRE(run("graph --config " + p.cfg.string() + " --out " + gdir.string(), "graph.txt") == 0);
  const std::string out = slurp(kRoot / "graph.txt");
  CHECK(out.find("->") != std::string::npos);
  CHECK(json::parse(slurp(gdir / "manifest.json")).at("subcommand") == "graph");
}

TEST_CASE("classify-car reports one verdict per channel") {
  fs::create_directories(kRoot);
  Paths p;
  write_json(p.cfg, quant_config());
  const auto dir = kRoot / "classify";
  REQUIRE(run("classify-car --config " + p.cfg.string() + " --out " + dir.string()) == 0);
  const json verdicts = json::parse(slurp(dir / "classification.json"));
  for (const auto& ch : {"death", "z", "g", "v"}) CHECK(verdicts.contains(ch));
  for (const auto& [ch, v] : verdicts.items()) {
    (void)ch;
    const std::string s = v.get<std::string>();
    CHECK((s.rfind("holds", 0) == 0 || s.rfind("fails", 0) == 0 || s.rfind("holds_if", 0) == 0));
  }
}

TEST_CASE("simulate, observe, and fit chain through directories") {
  fs::create_directories(kRoot);
  Paths p;
  write_json(p.cfg, quant_config());
  const auto pop = kRoot / "pop", data = kRoot / "data", fitd = kRoot / "fit";

  REQUIRE(run("simulate --config " + p.cfg.string() + " --out " + pop.string()) == 0);
  for (const auto& f : {"population.csv", "population_events.csv", "population_manifest.json",
                        "manifest.json"})
    CHECK(fs::exists(pop / f));

  REQUIRE(run("observe --config " + p.cfg.string() + " --pop " + pop.string() + " --out " +
              data.string()) == 0);
  for (const auto& f : {"records.csv", "events.csv", "dataset_manifest.json"})
    CHECK(fs::exists(data / f));

  REQUIRE(run("fit --config " + p.cfg.string() + " --data " + data.string() + " --out " +
              fitd.string()) == 0);
  const json fit = json::parse(slurp(fitd / "fit.json"));
  CHECK(fit.at("converged") == true);
  CHECK(fit.at("family") == "naive_mixed_longitudinal");
  const double mu0 = fit.at("estimates").at("mu0").get<double>();
  CHECK(mu0 == doctest::Approx(2.0).epsilon(0.25));

  // the self-contained path derives the same seeds, so the fit is identical
  const auto fitd2 = kRoot / "fit_self";
  REQUIRE(run("fit --config " + p.cfg.string() + " --out " + fitd2.string()) == 0);
  CHECK(json::parse(slurp(fitd2 / "fit.json")).at("estimates") == fit.at("estimates"));
}

TEST_CASE("seed overrides change the draw and are recorded") {
  fs::create_directories(kRoot);
  Paths p;
  write_json(p.cfg, quant_config());
  const auto a = kRoot / "seed5", b = kRoot / "seed9";
  REQUIRE(run("simulate --config " + p.cfg.string() + " --out " + a.string()) == 0);
  REQUIRE(run("simulate --config " + p.cfg.string() + " --seed 9 --out " + b.string()) == 0);
  CHECK(json::parse(slurp(a / "manifest.json")).at("seed") == 5);
  CHECK(json::parse(slurp(b / "manifest.json")).at("seed") == 9);
  CHECK(slurp(a / "population.csv") != slurp(b / "population.csv"));
}

TEST_CASE("plot data follows the outcome kind") {
  fs::create_directories(kRoot);
  Paths p;
  write_json(p.cfg, quant_config());
  const auto dir = kRoot / "plot";
  REQUIRE(run("simulate --config " + p.cfg.string() + " --emit-plot-data --out " +
              dir.string()) == 0);
  const std::string csv = slurp(dir / "plot_data.csv");
  CHECK(csv.rfind("t,mean_alive,se,n_alive", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);  // header + four grid times
}

TEST_CASE("preferable and contrast write their tables") {
  fs::create_directories(kRoot);
  Paths p;
  write_json(p.cfg, quant_config());

  const auto pdir = kRoot / "pref";
  REQUIRE(run("preferable --config " + p.cfg.string() + " --out " + pdir.string(),
              "pref.txt") == 0);
  CHECK(slurp(pdir / "preferable.csv")
            .rfind("t,dead1,dead2,se_dead,outcome1,outcome2,se_outcome,outcome_defined", 0) == 0);
  CHECK(slurp(kRoot / "pref.txt").find("verdict:") != std::string::npos);

  const auto cdir = kRoot / "contrast";
  REQUIRE(run("contrast --config " + p.cfg.string() + " --out " + cdir.string()) == 0);
  const std::string csv = slurp(cdir / "contrast.csv");
  CHECK(csv.rfind("t,value,se,defined", 0) == 0);
  // drift_difference is closed-form: beta2 * (v2 - v1) at every grid time
  std::istringstream lines(csv);
  std::string line;
  std::getline(lines, line);
  while (std::getline(lines, line)) {
    const auto c1 = line.find(','), c2 = line.find(',', c1 + 1);
    CHECK(std::stod(line.substr(c1 + 1, c2 - c1 - 1)) == 0.5);
  }
}

TEST_CASE("study output is byte-identical across worker counts") {
  fs::create_directories(kRoot);
  json study = {{"name", "cli-study"},
                {"system", system_to_json(builders::illness_system(true, false))},
                {"observation", scheme_to_json(builders::continuous_illness_scheme(true))},
                {"families",
                 {{{"label", "naive"},
                   {"model", model_to_json(builders::naive_survival_model(true, false))}},
                  {{"label", "full"},
                   {"model", model_to_json(builders::illness_model(true, false))}}}},
                {"replications", 6},
                {"n_subjects", 60},
                {"step", 0.05},
                {"horizon", 4.0},
                {"seed", 3},
                {"report_only", true}};
  const auto cfg = kRoot / "study.json";
  write_json(cfg, json{{"schema_version", 1}, {"name", "study"}, {"study", study}});

  const auto w1 = kRoot / "study_w1", w3 = kRoot / "study_w3";
  REQUIRE(run("study --config " + cfg.string() + " --workers 1 --out " + w1.string()) == 0);
  REQUIRE(run("study --config " + cfg.string() + " --workers 3 --out " + w3.string()) == 0);
  const std::string csv1 = slurp(w1 / "study.csv");
  CHECK(csv1 == slurp(w3 / "study.csv"));
  CHECK(csv1.rfind("scenario,family,param,", 0) == 0);
  CHECK(slurp(w1 / "study.txt") == slurp(w3 / "study.txt"));
}

TEST_CASE("typology runs its cells and writes the table") {
  fs::create_directories(kRoot);
  json cell = {{"name", "cell-a"},
               {"system", system_to_json(builders::illness_system(true, false))},
               {"observation", scheme_to_json(builders::continuous_illness_scheme(true))},
               {"families",
                {{{"label", "naive"},
                  {"model", model_to_json(builders::naive_survival_model(true, false))}}}},
               {"replications", 2},
               {"n_subjects", 40},
               {"step", 0.05},
               {"horizon", 4.0},
               {"seed", 3},
               {"stated_verdict", "holds"},
               {"report_only", true}};
  const auto cfg = kRoot / "typology.json";
  write_json(cfg, json{{"schema_version", 1}, {"name", "t"}, {"typology", json::array({cell})}});

  const auto dir = kRoot / "typ";
  REQUIRE(run("typology --config " + cfg.string() + " --out " + dir.string()) == 0);
  const std::string csv = slurp(dir / "typology.csv");
  CHECK(csv.rfind("cell,stated,classified,empirical,agree", 0) == 0);
  CHECK(csv.find("cell-a,holds,holds,n/a,1") != std::string::npos);
}
