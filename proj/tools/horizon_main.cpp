#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "horizon/classify.hpp"
#include "horizon/common.hpp"
#include "horizon/config.hpp"
#include "horizon/dataset_io.hpp"
#include "horizon/graph.hpp"
#include "horizon/harness.hpp"
#include "horizon/parallel.hpp"
#include "horizon/rng.hpp"
#include "horizon/simulate.hpp"
#include "horizon/version.hpp"

namespace fs = std::filesystem;
using namespace horizon;

namespace {

struct Ctx {
  std::string config_path;
  std::string out_dir = "out";
  std::string pop_dir;   // observe: population produced by `simulate`
  std::string data_dir;  // fit: dataset produced by `observe`
  std::optional<std::uint64_t> seed;
  int workers = 0;
  bool emit_plot = false;

  std::vector<std::string> outputs;  // files written, for the manifest

  std::string path(const std::string& name) const { return (fs::path(out_dir) / name).string(); }
  std::string mark(const std::string& name) {
    outputs.push_back(name);
    return path(name);
  }
};

std::string hash_hex(std::uint64_t h) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string file_hash(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "IoError", "cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return hash_hex(fnv1a(buf.str()));
}

void write_manifest(const Ctx& ctx, const std::string& subcommand, std::uint64_t seed_used) {
  json man;
  man["subcommand"] = subcommand;
  man["toolkit_version"] = kToolkitVersion;
  man["config"] = ctx.config_path;
  man["config_hash"] = file_hash(ctx.config_path);
  man["seed"] = seed_used;
  man["workers"] = ctx.workers;
  man["outputs"] = ctx.outputs;
  std::ofstream out(ctx.path("manifest.json"));
  require(out.good(), "IoError", "cannot write manifest");
  out << man.dump(2) << '\n';
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  require(out.good(), "IoError", "cannot write '" + path + "'");
  out << text;
}

int effective_workers(const Ctx& ctx) {
  return ctx.workers > 0 ? ctx.workers : default_workers();
}

// simulate -> observe chains reproducibly: the observation layer gets its own
// seed, derived from the population seed unless overridden on the command line.
std::uint64_t observation_seed(const Ctx& ctx, std::uint64_t pop_seed) {
  return ctx.seed ? *ctx.seed : derive_seed(pop_seed, 0, 0x0B5E);
}

ContrastKind parse_contrast_kind(const std::string& s) {
  if (s == "hazard_ratio") return ContrastKind::hazard_ratio;
  if (s == "drift_difference") return ContrastKind::drift_difference;
  if (s == "survival_difference") return ContrastKind::survival_difference;
  if (s == "mean_difference") return ContrastKind::mean_difference;
  fail("InvalidConfig", "unknown contrast kind '" + s + "'");
}

Population load_or_simulate_population(Ctx& ctx, const RunConfig& cfg,
                                       std::shared_ptr<const ValidatedSystem> vs) {
  if (!ctx.pop_dir.empty()) {
    const fs::path dir(ctx.pop_dir);
    return read_population_csv((dir / "population.csv").string(),
                               (dir / "population_events.csv").string(),
                               (dir / "population_manifest.json").string(), std::move(vs));
  }
  require(cfg.has_sim, "InvalidConfig",
          "need either --pop or a 'simulate' block in the config");
  SimConfig sim = cfg.sim;
  if (ctx.seed) sim.master_seed = *ctx.seed;
  return simulate_population(*vs, cfg.params, sim, effective_workers(ctx));
}

// --- subcommands --------------------------------------------------------------

int cmd_validate(Ctx& ctx, bool graph_only) {
  const RunConfig cfg = load_config(ctx.config_path);
  require(cfg.system.has_value(), "InvalidConfig", "config has no 'system' section");
  const ValidatedSystem vs = validate_system(*cfg.system);
  const InfluenceGraph g = influence_graph(vs);
  write_text(ctx.mark("graph.dot"), to_dot(g));

  std::cout << "system '" << vs.spec().name << "': " << vs.processes().size()
            << " processes, " << g.edges.size() << " influence edges\n";
  std::cout << "  death: " << vs.process(vs.death_index()).name;
  if (vs.outcome_index() >= 0) std::cout << "   outcome: " << vs.process(vs.outcome_index()).name;
  if (vs.factor_index() >= 0) std::cout << "   factor: " << vs.process(vs.factor_index()).name;
  std::cout << "\n";
  if (!graph_only && cfg.scheme) {
    validate_scheme(*cfg.scheme, vs);
    std::cout << "observation scheme: ok (" << cfg.scheme->channels.size() << " channels)\n";
  }
  if (graph_only) {
    for (const auto& e : g.edges)
      std::cout << "  " << e.from << " -> " << e.to << (e.via_observed ? "  [via observed]" : "")
                << "\n";
  }
  write_manifest(ctx, graph_only ? "graph" : "validate", 0);
  return 0;
}

int cmd_simulate(Ctx& ctx) {
  const RunConfig cfg = load_config(ctx.config_path);
  require(cfg.system.has_value(), "InvalidConfig", "config has no 'system' section");
  require(cfg.has_sim, "InvalidConfig", "config has no 'simulate' section");
  auto vs = std::make_shared<const ValidatedSystem>(validate_system(*cfg.system));
  SimConfig sim = cfg.sim;
  if (ctx.seed) sim.master_seed = *ctx.seed;

  const Population pop = simulate_population(*vs, cfg.params, sim, effective_workers(ctx));
  write_population_csv(pop, ctx.mark("population.csv"), ctx.mark("population_events.csv"),
                       ctx.mark("population_manifest.json"), cfg.params);

  std::int64_t deaths = 0;
  for (const auto& tr : pop.subjects) deaths += tr.dead() ? 1 : 0;
  std::cout << "simulated " << pop.subjects.size() << " subjects on [0, " << pop.horizon
            << "], step " << pop.step << "; " << deaths << " deaths\n";

  if (ctx.emit_plot && !cfg.t_grid.empty()) {
    const int oi = vs->outcome_index();
    require(oi >= 0, "InvalidConfig", "plot data needs an outcome process");
    std::ostringstream plot;
    if (vs->process(oi).kind == ProcessKind::counting) {
      plot << "t,healthy,ill,dead,se_healthy,se_ill,se_dead\n";
      for (const auto& row : occupation_probabilities(*vs, cfg.params, sim, std::nullopt,
                                                      cfg.t_grid, cfg.mc_subjects, cfg.mc_seed))
        plot << format_double(row.t) << ',' << format_double(row.healthy) << ','
             << format_double(row.ill) << ',' << format_double(row.dead) << ','
             << format_double(row.se_healthy) << ',' << format_double(row.se_ill) << ','
             << format_double(row.se_dead) << '\n';
    } else {
      plot << "t,mean_alive,se,n_alive\n";
      for (const auto& row : mean_outcome_alive(*vs, cfg.params, sim, std::nullopt, cfg.t_grid,
                                                cfg.mc_subjects, cfg.mc_seed))
        plot << format_double(row.t) << ',' << format_double(row.mean) << ','
             << format_double(row.se) << ',' << row.n_alive << '\n';
    }
    write_text(ctx.mark("plot_data.csv"), plot.str());
  }
  write_manifest(ctx, "simulate", sim.master_seed);
  return 0;
}

int cmd_observe(Ctx& ctx) {
  const RunConfig cfg = load_config(ctx.config_path);
  require(cfg.system.has_value(), "InvalidConfig", "config has no 'system' section");
  require(cfg.scheme.has_value(), "InvalidConfig", "config has no 'observation' section");
  auto vs = std::make_shared<const ValidatedSystem>(validate_system(*cfg.system));
  validate_scheme(*cfg.scheme, *vs);

  const Population pop = load_or_simulate_population(ctx, cfg, vs);
  const std::uint64_t obs_seed = observation_seed(ctx, pop.master_seed);
  const Dataset data = apply_observation(pop, *cfg.scheme, obs_seed);
  write_dataset_csv(data, ctx.mark("records.csv"), ctx.mark("events.csv"),
                    ctx.mark("dataset_manifest.json"));

  std::cout << "observed " << pop.subjects.size() << " subjects: " << data.longitudinal.size()
            << " longitudinal records, " << data.events.size() << " event records, "
            << data.deaths.size() << " death rows\n";
  std::cout << "scheme fingerprint " << hash_hex(data.scheme_fingerprint) << "\n";
  for (const auto& [ch, v] : data.car_verdicts) std::cout << "  " << ch << ": " << v << "\n";
  write_manifest(ctx, "observe", obs_seed);
  return 0;
}

int cmd_classify(Ctx& ctx) {
  const RunConfig cfg = load_config(ctx.config_path);
  require(cfg.system.has_value(), "InvalidConfig", "config has no 'system' section");
  require(cfg.scheme.has_value(), "InvalidConfig", "config has no 'observation' section");
  const ValidatedSystem vs = validate_system(*cfg.system);
  validate_scheme(*cfg.scheme, vs);
  const auto verdicts = classify_car(*cfg.scheme, influence_graph(vs));

  json out = json::object();
  for (const auto& [ch, v] : verdicts) {
    const std::string text = to_string(v);
    out[ch] = text;
    std::cout << ch << ": " << text << "\n";
  }
  std::ofstream jf(ctx.mark("classification.json"));
  jf << out.dump(2) << '\n';
  write_manifest(ctx, "classify-car", 0);
  return 0;
}

int cmd_fit(Ctx& ctx) {
  const RunConfig cfg = load_config(ctx.config_path);
  require(cfg.model.has_value(), "InvalidConfig", "config has no 'model' section");

  Dataset data;
  std::uint64_t seed_used = 0;
  if (!ctx.data_dir.empty()) {
    const fs::path dir(ctx.data_dir);
    data = read_dataset_csv((dir / "records.csv").string(), (dir / "events.csv").string(),
                            (dir / "dataset_manifest.json").string());
  } else {
    require(cfg.system.has_value() && cfg.scheme.has_value(), "InvalidConfig",
            "need either --data or system+observation sections to generate data");
    auto vs = std::make_shared<const ValidatedSystem>(validate_system(*cfg.system));
    validate_scheme(*cfg.scheme, *vs);
    const Population pop = load_or_simulate_population(ctx, cfg, vs);
    seed_used = observation_seed(ctx, pop.master_seed);
    data = apply_observation(pop, *cfg.scheme, seed_used);
  }

  FitOptions opts;
  opts.workers = effective_workers(ctx);
  opts.fixed = cfg.fixed;
  const FitResult fr = fit(*cfg.model, data, cfg.init, opts);

  json out = fit_to_json(fr);
  out["family"] = family_name(cfg.model->family);
  out["dataset_fingerprint"] = data.scheme_fingerprint;
  std::ofstream jf(ctx.mark("fit.json"));
  jf << out.dump(2) << '\n';

  std::cout << "family " << family_name(cfg.model->family) << "   loglik "
            << format_double(fr.loglik) << "   " << (fr.converged ? "converged" : "NOT CONVERGED")
            << " in " << fr.iterations << " iterations\n";
  for (const auto& name : fr.free_names) {
    std::cout << "  " << name << " = " << format_double(fr.estimates.get(name));
    if (fr.std_errors.has(name))
      std::cout << "  (se " << format_double(fr.std_errors.get(name)) << ")";
    std::cout << "\n";
  }
  for (const auto& w : fr.warnings) std::cout << "warning: " << w << "\n";

  if (ctx.emit_plot) {
    std::ostringstream trace;
    trace << "iteration,loglik\n";
    for (std::size_t i = 0; i < fr.f_trace.size(); ++i)
      trace << i << ',' << format_double(fr.f_trace[i]) << '\n';
    write_text(ctx.mark("plot_data.csv"), trace.str());
  }
  write_manifest(ctx, "fit", seed_used);
  return fr.converged ? 0 : 1;
}

int cmd_preferable(Ctx& ctx) {
  const RunConfig cfg = load_config(ctx.config_path);
  require(cfg.system.has_value(), "InvalidConfig", "config has no 'system' section");
  require(cfg.v1 && cfg.v2, "InvalidConfig", "preferable needs 'v1' and 'v2' factor paths");
  require(!cfg.t_grid.empty(), "InvalidConfig", "preferable needs a 'grid' of times");
  const ValidatedSystem vs = validate_system(*cfg.system);
  const std::uint64_t seed = ctx.seed ? *ctx.seed : cfg.mc_seed;

  const PreferenceReport rep = preferable(vs, cfg.params, cfg.sim, *cfg.v1, *cfg.v2, cfg.t_grid,
                                          cfg.mc_subjects, seed, cfg.z_threshold);

  std::ostringstream csv;
  csv << "t,dead1,dead2,se_dead,outcome1,outcome2,se_outcome,outcome_defined\n";
  for (const auto& r : rep.rows)
    csv << format_double(r.t) << ',' << format_double(r.dead1) << ',' << format_double(r.dead2)
        << ',' << format_double(r.se_dead) << ',' << format_double(r.outcome1) << ','
        << format_double(r.outcome2) << ',' << format_double(r.se_outcome) << ','
        << (r.outcome_defined ? 1 : 0) << '\n';
  write_text(ctx.mark("preferable.csv"), csv.str());

  std::cout << "verdict: " << to_string(rep.verdict) << "\n";
  for (const auto& w : rep.warnings) std::cout << "warning: " << w << "\n";
  write_manifest(ctx, "preferable", seed);
  return 0;
}

int cmd_contrast(Ctx& ctx) {
  const RunConfig cfg = load_config(ctx.config_path);
  require(cfg.system.has_value(), "InvalidConfig", "config has no 'system' section");
  require(cfg.v1 && cfg.v2, "InvalidConfig", "contrast needs 'v1' and 'v2' factor paths");
  require(!cfg.t_grid.empty(), "InvalidConfig", "contrast needs a 'grid' of times");
  const ValidatedSystem vs = validate_system(*cfg.system);
  const ContrastKind kind = parse_contrast_kind(cfg.contrast_kind);
  const std::uint64_t seed = ctx.seed ? *ctx.seed : cfg.mc_seed;

  const auto rows =
      contrast(vs, cfg.params, cfg.sim, *cfg.v1, *cfg.v2, kind, cfg.t_grid, cfg.mc_subjects, seed);

  std::ostringstream csv;
  csv << "t,value,se,defined\n";
  for (const auto& r : rows)
    csv << format_double(r.t) << ',' << format_double(r.value) << ',' << format_double(r.se)
        << ',' << (r.defined ? 1 : 0) << '\n';
  write_text(ctx.mark("contrast.csv"), csv.str());

  std::cout << "contrast " << cfg.contrast_kind << " over " << rows.size() << " times\n";
  if (kind == ContrastKind::mean_difference)
    std::cout << "note: outcome means condition on being alive at t; with differential survival"
                 " this is a survivor contrast, not a population one\n";
  for (const auto& r : rows)
    std::cout << "  t=" << format_double(r.t) << "  " << format_double(r.value)
              << (r.defined ? "" : "  [undefined]") << "\n";
  write_manifest(ctx, "contrast", seed);
  return 0;
}

int cmd_study(Ctx& ctx) {
  const RunConfig cfg = load_config(ctx.config_path);
  require(cfg.study.has_value(), "InvalidConfig", "config has no 'study' section");
  Scenario s = *cfg.study;
  if (ctx.seed) s.seed = *ctx.seed;

  const StudyReport rep = run_scenario(s, effective_workers(ctx));
  write_study_csv(rep, ctx.mark("study.csv"));
  const std::string text = render_study_text(rep);
  write_text(ctx.mark("study.txt"), text);
  std::cout << text;
  write_manifest(ctx, "study", s.seed);
  require(s.report_only || rep.exclusion_rate < 0.05, "ExclusionRateExceeded",
          "scenario '" + s.name + "' dropped too many replications");
  return 0;
}

int cmd_typology(Ctx& ctx) {
  const RunConfig cfg = load_config(ctx.config_path);
  require(!cfg.typology.empty(), "InvalidConfig", "config has no 'typology' section");
  std::vector<Scenario> cells = cfg.typology;
  if (ctx.seed)
    for (auto& s : cells) s.seed = *ctx.seed;

  const auto rows = typology_suite(cells, effective_workers(ctx));
  write_typology_csv(rows, ctx.mark("typology.csv"));
  const std::string text = render_typology_text(rows);
  write_text(ctx.mark("typology.txt"), text);
  std::cout << text;
  write_manifest(ctx, "typology", cells.empty() ? 0 : cells.front().seed);
  return 0;
}

void add_common(CLI::App* sub, Ctx& ctx) {
  sub->add_option("--config", ctx.config_path, "JSON config file")->required();
  sub->add_option("--out", ctx.out_dir, "output directory (created if absent)");
  sub->add_option("--seed", ctx.seed, "override the config's seed");
  sub->add_option("--workers", ctx.workers, "worker threads (0 = all cores)");
  sub->add_flag("--emit-plot-data", ctx.emit_plot, "also write tidy plot CSVs");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"horizon: joint longitudinal-survival simulation and bias toolkit"};
  app.require_subcommand(1);
  Ctx ctx;
  int rc = 0;

  auto* validate = app.add_subcommand("validate", "check a system (and scheme) config");
  add_common(validate, ctx);
  validate->callback([&] { fs::create_directories(ctx.out_dir); rc = cmd_validate(ctx, false); });

  auto* graph = app.add_subcommand("graph", "emit the influence graph");
  add_common(graph, ctx);
  graph->callback([&] { fs::create_directories(ctx.out_dir); rc = cmd_validate(ctx, true); });

  auto* simulate = app.add_subcommand("simulate", "draw a population");
  add_common(simulate, ctx);
  simulate->callback([&] { fs::create_directories(ctx.out_dir); rc = cmd_simulate(ctx); });

  auto* observe = app.add_subcommand("observe", "realize an observation scheme");
  add_common(observe, ctx);
  observe->add_option("--pop", ctx.pop_dir, "population directory from `simulate`");
  observe->callback([&] { fs::create_directories(ctx.out_dir); rc = cmd_observe(ctx); });

  auto* classify = app.add_subcommand("classify-car", "classify each channel's mechanism");
  add_common(classify, ctx);
  classify->callback([&] { fs::create_directories(ctx.out_dir); rc = cmd_classify(ctx); });

  auto* fit = app.add_subcommand("fit", "maximum likelihood fit");
  add_common(fit, ctx);
  fit->add_option("--data", ctx.data_dir, "dataset directory from `observe`");
  fit->callback([&] { fs::create_directories(ctx.out_dir); rc = cmd_fit(ctx); });

  auto* preferable = app.add_subcommand("preferable", "compare two factor paths");
  add_common(preferable, ctx);
  preferable->callback([&] { fs::create_directories(ctx.out_dir); rc = cmd_preferable(ctx); });

  auto* contrast = app.add_subcommand("contrast", "effect contrast along a time grid");
  add_common(contrast, ctx);
  contrast->callback([&] { fs::create_directories(ctx.out_dir); rc = cmd_contrast(ctx); });

  auto* study = app.add_subcommand("study", "replicated bias study");
  add_common(study, ctx);
  study->callback([&] { fs::create_directories(ctx.out_dir); rc = cmd_study(ctx); });

  auto* typology = app.add_subcommand("typology", "run the scenario typology table");
  add_common(typology, ctx);
  typology->callback([&] { fs::create_directories(ctx.out_dir); rc = cmd_typology(ctx); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return rc;
}
