#include "horizon/config.hpp"

#include <fstream>
#include <set>

#include "horizon/common.hpp"

namespace horizon {

namespace {

// Fail-closed object view: every key must be consumed or start with '_'.
class Obj {
public:
  Obj(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    require(j.is_object(), "InvalidConfig", where_ + ": expected an object");
  }

  const json* opt(const std::string& key) const {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  const json& get(const std::string& key) const {
    const json* p = opt(key);
    require(p != nullptr, "InvalidConfig", where_ + ": missing required key '" + key + "'");
    return *p;
  }

  double num(const std::string& key) const { return as_num(get(key), key); }
  double num(const std::string& key, double def) const {
    const json* p = opt(key);
    return p ? as_num(*p, key) : def;
  }
  std::int64_t integer(const std::string& key, std::int64_t def) const {
    const json* p = opt(key);
    if (!p) return def;
    require(p->is_number_integer(), "InvalidConfig", where_ + ": '" + key + "' must be an integer");
    return p->get<std::int64_t>();
  }
  std::int64_t integer(const std::string& key) const {
    const json& v = get(key);
    require(v.is_number_integer(), "InvalidConfig", where_ + ": '" + key + "' must be an integer");
    return v.get<std::int64_t>();
  }
  bool flag(const std::string& key, bool def) const {
    const json* p = opt(key);
    if (!p) return def;
    require(p->is_boolean(), "InvalidConfig", where_ + ": '" + key + "' must be a boolean");
    return p->get<bool>();
  }
  std::string str(const std::string& key) const {
    const json& v = get(key);
    require(v.is_string(), "InvalidConfig", where_ + ": '" + key + "' must be a string");
    return v.get<std::string>();
  }
  std::string str(const std::string& key, const std::string& def) const {
    const json* p = opt(key);
    if (!p) return def;
    require(p->is_string(), "InvalidConfig", where_ + ": '" + key + "' must be a string");
    return p->get<std::string>();
  }
  std::vector<double> nums(const std::string& key) const { return as_nums(get(key), key); }
  std::vector<double> nums(const std::string& key, std::vector<double> def) const {
    const json* p = opt(key);
    return p ? as_nums(*p, key) : std::move(def);
  }

  const std::string& where() const { return where_; }

  // call after all reads: rejects unknown keys so typos cannot pass silently
  void done() const {
    for (const auto& [key, value] : j_.items()) {
      (void)value;
      if (!key.empty() && key[0] == '_') continue;  // comment key
      require(seen_.count(key) != 0, "InvalidConfig",
              where_ + ": unknown key '" + key + "'");
    }
  }

private:
  double as_num(const json& v, const std::string& key) const {
    require(v.is_number(), "InvalidConfig", where_ + ": '" + key + "' must be a number");
    return v.get<double>();
  }
  std::vector<double> as_nums(const json& v, const std::string& key) const {
    require(v.is_array(), "InvalidConfig", where_ + ": '" + key + "' must be an array");
    std::vector<double> out;
    for (const auto& e : v) {
      require(e.is_number(), "InvalidConfig", where_ + ": '" + key + "' must hold numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }

  const json& j_;
  std::string where_;
  mutable std::set<std::string> seen_;
};

// --- baseline / term / predictor ---

BaselineFn parse_baseline(const json& j, const std::string& where) {
  Obj o(j, where);
  const std::string form = o.str("form");
  if (form == "constant") {
    ConstantBaseline b;
    b.value = o.num("value");
    b.param = o.str("param", "");
    o.done();
    return b;
  }
  if (form == "weibull") {
    WeibullBaseline b;
    b.shape = o.num("shape");
    b.scale = o.num("scale");
    b.shape_param = o.str("shape_param", "");
    b.scale_param = o.str("scale_param", "");
    o.done();
    return b;
  }
  if (form == "piecewise") {
    PiecewiseBaseline b;
    b.cuts = o.nums("cuts");
    b.values = o.nums("values");
    if (const json* p = o.opt("value_params")) {
      require(p->is_array(), "InvalidConfig", where + ": 'value_params' must be an array");
      for (const auto& e : *p) b.value_params.push_back(e.get<std::string>());
    }
    o.done();
    return b;
  }
  fail("InvalidConfig", where + ": unknown baseline form '" + form + "'");
}

Term parse_term(const json& j, const std::string& where) {
  Obj o(j, where);
  Term t;
  t.source = o.str("source");
  t.coef = o.num("coef");
  t.param = o.str("param", "");
  const std::string ref = o.str("ref", "current");
  if (ref == "sampled_last") {
    t.ref = TermRef::sampled_last;
    t.sample.times = o.nums("sample_times");
    t.sample.noise_sd = o.num("sample_noise_sd", 0.0);
  } else {
    require(ref == "current", "InvalidConfig", where + ": term ref must be current|sampled_last");
  }
  if (const json* p = o.opt("threshold")) t.threshold = p->get<double>();
  o.done();
  return t;
}

LinearPredictor parse_predictor(const Obj& o, const std::string& where) {
  LinearPredictor lp;
  if (const json* terms = o.opt("terms")) {
    require(terms->is_array(), "InvalidConfig", where + ": 'terms' must be an array");
    int k = 0;
    for (const auto& e : *terms)
      lp.terms.push_back(parse_term(e, where + ".terms[" + std::to_string(k++) + "]"));
  }
  return lp;
}

AttributeLaw parse_attribute_law(const json& j, const std::string& where) {
  Obj o(j, where);
  const std::string type = o.str("type");
  if (type == "bernoulli") {
    BernoulliLaw law;
    law.p = o.num("p");
    law.param = o.str("param", "");
    o.done();
    return law;
  }
  if (type == "normal") {
    NormalLaw law;
    law.mean = o.num("mean");
    law.sd = o.num("sd");
    law.mean_param = o.str("mean_param", "");
    law.sd_param = o.str("sd_param", "");
    o.done();
    return law;
  }
  fail("InvalidConfig", where + ": unknown attribute law '" + type + "'");
}

FactorLaw parse_factor_law(const json& j, const std::string& where) {
  Obj o(j, where);
  const std::string type = o.str("type");
  if (type == "constant") {
    ConstantFactor f;
    f.value = o.num("value");
    o.done();
    return f;
  }
  if (type == "linear") {
    LinearFactor f;
    f.intercept = o.num("intercept");
    f.slope = o.num("slope");
    o.done();
    return f;
  }
  if (type == "piecewise_linear") {
    PiecewiseLinearFactor f;
    f.times = o.nums("times");
    f.values = o.nums("values");
    o.done();
    return f;
  }
  if (type == "random_constant") {
    RandomConstantFactor f;
    f.law = parse_attribute_law(o.get("law"), where + ".law");
    o.done();
    return f;
  }
  fail("InvalidConfig", where + ": unknown factor path type '" + type + "'");
}

ProcessDecl parse_process(const std::string& name, const json& j) {
  const std::string where = "system.processes." + name;
  Obj o(j, where);
  ProcessDecl d;
  d.name = name;
  const std::string kind = o.str("kind");
  d.latent = o.flag("latent", false);
  if (kind == "counting") {
    d.kind = ProcessKind::counting;
    Obj oi(o.get("intensity"), where + ".intensity");
    CountingIntensity ci;
    ci.baseline = parse_baseline(oi.get("baseline"), where + ".intensity.baseline");
    ci.predictor = parse_predictor(oi, where + ".intensity");
    oi.done();
    d.intensity = std::move(ci);
  } else if (kind == "diffusion") {
    d.kind = ProcessKind::diffusion;
    Obj od(o.get("dynamics"), where + ".dynamics");
    DiffusionDynamics dd;
    dd.drift_baseline = parse_baseline(od.get("drift"), where + ".dynamics.drift");
    dd.predictor = parse_predictor(od, where + ".dynamics");
    dd.sigma = od.num("sigma");
    dd.sigma_param = od.str("sigma_param", "");
    dd.init_mean = od.num("init_mean", 0.0);
    dd.init_sd = od.num("init_sd", 0.0);
    dd.init_mean_param = od.str("init_mean_param", "");
    dd.init_sd_param = od.str("init_sd_param", "");
    od.done();
    d.dynamics = std::move(dd);
  } else if (kind == "attribute") {
    d.kind = ProcessKind::attribute;
    d.law = parse_attribute_law(o.get("law"), where + ".law");
  } else if (kind == "external_factor") {
    d.kind = ProcessKind::external_factor;
    d.factor = parse_factor_law(o.get("path"), where + ".path");
  } else {
    fail("InvalidConfig", where + ": unknown process kind '" + kind + "'");
  }
  o.done();
  return d;
}

// --- observation scheme ---

VisitRule parse_visit_rule(const json& j, const std::string& where) {
  Obj o(j, where);
  const std::string type = o.str("type");
  if (type == "fixed") {
    FixedVisits v;
    v.times = o.nums("times");
    o.done();
    return v;
  }
  if (type == "doctor_care") {
    DoctorCareVisits v;
    v.first_visit = o.num("first_visit", 0.0);
    v.threshold = o.num("threshold");
    v.delay_if_above = o.num("delay_if_above");
    v.delay_if_below = o.num("delay_if_below");
    o.done();
    return v;
  }
  if (type == "outcome_dependent") {
    OutcomeDependentVisits v;
    v.candidates = o.nums("candidates");
    v.intercept = o.num("intercept");
    v.slope = o.num("slope");
    o.done();
    return v;
  }
  fail("InvalidConfig", where + ": unknown visit rule '" + type + "'");
}

RuleInput parse_rule_input(const std::string& s, const std::string& where) {
  if (s == "observed_history") return RuleInput::observed_history;
  if (s == "true_value") return RuleInput::true_latent;
  if (s == "attribute") return RuleInput::attributes;
  fail("InvalidConfig", where + ": unknown dropout input '" + s + "'");
}

ChannelSpec parse_channel(const std::string& name, const json& j) {
  const std::string where = "observation.channels." + name;
  Obj o(j, where);
  ChannelSpec c;
  c.process = o.str("process");

  Obj orip(o.get("rip"), where + ".rip");
  const std::string type = orip.str("type");
  if (type == "continuous") {
    ContinuousRip rip;
    if (const json* p = orip.opt("admin_censor")) rip.admin_censor = p->get<double>();
    if (const json* p = orip.opt("random_censor_rate")) rip.random_censor_rate = p->get<double>();
    c.rip.base = rip;
  } else if (type == "discrete") {
    DiscreteRip rip;
    rip.visits = parse_visit_rule(orip.get("visits"), where + ".rip.visits");
    c.rip.base = std::move(rip);
  } else if (type == "dropout") {
    DropoutRip rip;
    rip.visits = parse_visit_rule(orip.get("visits"), where + ".rip.visits");
    rip.base_rate = orip.num("base_rate");
    if (const json* terms = orip.opt("terms")) {
      int k = 0;
      for (const auto& e : *terms) {
        const std::string tw = where + ".rip.terms[" + std::to_string(k++) + "]";
        Obj ot(e, tw);
        DropoutTerm t;
        t.input = parse_rule_input(ot.str("input"), tw);
        t.source = ot.str("source", "");
        t.coef = ot.num("coef");
        if (const json* p = ot.opt("threshold")) t.threshold = p->get<double>();
        ot.done();
        rip.terms.push_back(std::move(t));
      }
    }
    c.rip.base = std::move(rip);
  } else {
    fail("InvalidConfig", where + ": unknown rip type '" + type + "'");
  }
  orip.done();

  c.rip.death_truncated = o.flag("death_truncated", true);
  if (const json* p = o.opt("extra_inputs")) {
    require(p->is_array(), "InvalidConfig", where + ": 'extra_inputs' must be an array");
    for (const auto& e : *p) c.rip.extra_inputs.push_back(e.get<std::string>());
  }

  if (const json* pn = o.opt("noise")) {
    Obj on(*pn, where + ".noise");
    const std::string nt = on.str("type");
    if (nt == "none") {
      c.noise = NoNoise{};
    } else if (nt == "additive") {
      ModelANoise nm;
      nm.sigma = on.num("sigma");
      nm.reuse_system_samples = on.flag("reuse_system_samples", false);
      c.noise = nm;
    } else if (nt == "ordinal" || nt == "binary") {
      NoiseLaw law;
      const std::string lname = on.str("law", "logistic");
      require(lname == "logistic" || lname == "normal", "InvalidConfig",
              where + ": noise law must be logistic|normal");
      law.kind = lname == "normal" ? NoiseLaw::Kind::normal : NoiseLaw::Kind::logistic;
      law.scale = on.num("scale", 1.0);
      if (nt == "ordinal") {
        ModelBOrdinal nm;
        nm.cuts = on.nums("cuts");
        nm.eps = law;
        c.noise = std::move(nm);
      } else {
        ModelBBinary nm;
        nm.cut = on.num("cut");
        nm.eps = law;
        c.noise = nm;
      }
    } else if (nt == "misclassification") {
      Misclassification nm;
      nm.sensitivity = on.num("sensitivity");
      nm.specificity = on.num("specificity");
      c.noise = nm;
    } else {
      fail("InvalidConfig", where + ": unknown noise type '" + nt + "'");
    }
    on.done();
  } else {
    c.noise = NoNoise{};
  }
  o.done();
  return c;
}

// --- model spec ---

BaselineShape parse_shape(const json& j, const std::string& where) {
  Obj o(j, where);
  BaselineShape s;
  const std::string form = o.str("form");
  if (form == "constant") {
    s.form = BaselineShape::Form::constant;
  } else if (form == "weibull") {
    s.form = BaselineShape::Form::weibull;
  } else if (form == "piecewise") {
    s.form = BaselineShape::Form::piecewise;
    s.cuts = o.nums("cuts");
  } else {
    fail("InvalidConfig", where + ": unknown baseline form '" + form + "'");
  }
  o.done();
  return s;
}

}  // namespace

SystemSpec parse_system(const json& j) {
  Obj o(j, "system");
  SystemSpec spec;
  spec.name = o.str("name", "");
  spec.outcome = o.str("outcome", "");
  spec.factor = o.str("factor", "");
  const json& procs = o.get("processes");
  require(procs.is_object(), "InvalidConfig", "system.processes must be an object");
  for (const auto& [name, body] : procs.items())
    spec.processes.push_back(parse_process(name, body));
  o.done();
  return spec;
}

ObservationScheme parse_scheme(const json& j) {
  Obj o(j, "observation");
  ObservationScheme scheme;
  const json& chans = o.get("channels");
  require(chans.is_object(), "InvalidConfig", "observation.channels must be an object");
  for (const auto& [name, body] : chans.items())
    scheme.channels.emplace(name, parse_channel(name, body));
  o.done();
  return scheme;
}

ModelSpec parse_model(const json& j) {
  Obj o(j, "model");
  ModelSpec m;
  m.family = family_from_name(o.str("family"));
  if (const json* pc = o.opt("channels")) {
    Obj oc(*pc, "model.channels");
    m.channels.event = oc.str("event", "");
    m.channels.longitudinal = oc.str("longitudinal", "");
    m.channels.binary = oc.str("binary", "");
    m.channels.attribute = oc.str("attribute", "");
    m.channels.factor = oc.str("factor", "");
    if (const json* po = oc.opt("ordinal")) {
      require(po->is_array(), "InvalidConfig", "model.channels.ordinal must be an array");
      for (const auto& e : *po) m.channels.ordinal.push_back(e.get<std::string>());
    }
    oc.done();
  }
  if (const json* p = o.opt("outcome_baseline")) m.outcome_baseline = parse_shape(*p, "model.outcome_baseline");
  if (const json* p = o.opt("death_baseline")) m.death_baseline = parse_shape(*p, "model.death_baseline");
  if (const json* p = o.opt("drift")) m.drift_shape = parse_shape(*p, "model.drift");
  if (const json* p = o.opt("quadrature")) {
    Obj oq(*p, "model.quadrature");
    m.quad.gh_nodes = static_cast<int>(oq.integer("gh_nodes", m.quad.gh_nodes));
    m.quad.gl_nodes = static_cast<int>(oq.integer("gl_nodes", m.quad.gl_nodes));
    m.quad.max_segment = oq.num("max_segment", m.quad.max_segment);
    oq.done();
  }
  if (const json* p = o.opt("qmc")) {
    Obj oq(*p, "model.qmc");
    m.qmc.draws = static_cast<int>(oq.integer("draws", m.qmc.draws));
    m.qmc.seed = static_cast<std::uint64_t>(oq.integer("seed", static_cast<std::int64_t>(m.qmc.seed)));
    oq.done();
  }
  const std::string law = o.str("threshold_law", "logistic");
  require(law == "logistic" || law == "normal", "InvalidConfig",
          "model.threshold_law must be logistic|normal");
  m.threshold_law = law == "normal" ? ThresholdLaw::normal : ThresholdLaw::logistic;
  m.estimate_beta3 = o.flag("estimate_beta3", false);
  if (const json* p = o.opt("ordinal_levels")) {
    for (const auto& e : *p) m.ordinal_levels.push_back(e.get<int>());
  }
  require(m.ordinal_levels.size() == m.channels.ordinal.size(), "InvalidConfig",
          "model.ordinal_levels must parallel model.channels.ordinal");
  o.done();
  return m;
}

ParamSet parse_params(const json& j) {
  require(j.is_object(), "InvalidConfig", "parameter blocks must be objects");
  ParamSet p;
  for (const auto& [name, v] : j.items()) {
    if (!name.empty() && name[0] == '_') continue;
    require(v.is_number(), "InvalidConfig", "parameter '" + name + "' must be a number");
    p.set(name, v.get<double>());
  }
  return p;
}

FactorPath parse_factor_path(const json& j) {
  const FactorLaw law = parse_factor_law(j, "factor path");
  FactorPath path;
  if (const auto* c = std::get_if<ConstantFactor>(&law)) path.fn = *c;
  else if (const auto* l = std::get_if<LinearFactor>(&law)) path.fn = *l;
  else if (const auto* p = std::get_if<PiecewiseLinearFactor>(&law)) path.fn = *p;
  else fail("InvalidConfig", "factor path override must be deterministic");
  return path;
}

SimConfig parse_sim(const json& j) {
  Obj o(j, "simulate");
  SimConfig cfg;
  cfg.n_subjects = o.integer("n_subjects");
  cfg.step = o.num("step");
  cfg.horizon = o.num("horizon");
  cfg.master_seed = static_cast<std::uint64_t>(o.integer("master_seed", 1));
  o.done();
  return cfg;
}

Scenario parse_scenario(const json& j) {
  Obj o(j, "scenario");
  Scenario s;
  s.name = o.str("name");
  s.system = parse_system(o.get("system"));
  s.scheme = parse_scheme(o.get("observation"));
  if (const json* p = o.opt("true_params")) s.true_params = parse_params(*p);
  const json& fams = o.get("families");
  require(fams.is_array() && !fams.empty(), "InvalidConfig",
          "scenario.families must be a nonempty array");
  int k = 0;
  for (const auto& e : fams) {
    const std::string where = "scenario.families[" + std::to_string(k++) + "]";
    Obj of(e, where);
    FamilyJob job;
    job.label = of.str("label");
    job.model = parse_model(of.get("model"));
    if (const json* p = of.opt("init")) job.init = parse_params(*p);
    if (const json* p = of.opt("fixed")) {
      require(p->is_array(), "InvalidConfig", where + ".fixed must be an array");
      for (const auto& e : *p) job.fixed.push_back(e.get<std::string>());
    }
    of.done();
    s.families.push_back(std::move(job));
  }
  s.replications = static_cast<int>(o.integer("replications"));
  s.n_subjects = o.integer("n_subjects");
  s.step = o.num("step");
  s.horizon = o.num("horizon");
  s.seed = static_cast<std::uint64_t>(o.integer("seed", 1));
  s.bias_param = o.str("bias_param", "beta2");
  s.stated_verdict = o.str("stated_verdict", "");
  s.report_only = o.flag("report_only", false);
  o.done();
  return s;
}

RunConfig parse_config(const json& j) {
  Obj o(j, "config");
  RunConfig cfg;
  cfg.schema_version = static_cast<int>(o.integer("schema_version"));
  require(cfg.schema_version == 1, "InvalidConfig", "unsupported schema_version");
  cfg.name = o.str("name", "");
  if (const json* p = o.opt("system")) cfg.system = parse_system(*p);
  if (const json* p = o.opt("simulate")) {
    cfg.sim = parse_sim(*p);
    cfg.has_sim = true;
  }
  if (const json* p = o.opt("observation")) cfg.scheme = parse_scheme(*p);
  if (const json* p = o.opt("model")) cfg.model = parse_model(*p);
  if (const json* p = o.opt("init")) cfg.init = parse_params(*p);
  if (const json* p = o.opt("params")) cfg.params = parse_params(*p);
  if (const json* p = o.opt("study")) cfg.study = parse_scenario(*p);
  if (const json* p = o.opt("typology")) {
    require(p->is_array(), "InvalidConfig", "typology must be an array of scenarios");
    for (const auto& e : *p) cfg.typology.push_back(parse_scenario(e));
  }
  if (const json* p = o.opt("grid")) {
    for (const auto& e : *p) cfg.t_grid.push_back(e.get<double>());
  }
  cfg.mc_subjects = o.integer("mc_subjects", cfg.mc_subjects);
  cfg.mc_seed = static_cast<std::uint64_t>(o.integer("mc_seed", static_cast<std::int64_t>(cfg.mc_seed)));
  cfg.z_threshold = o.num("z_threshold", cfg.z_threshold);
  if (const json* p = o.opt("v1")) cfg.v1 = parse_factor_path(*p);
  if (const json* p = o.opt("v2")) cfg.v2 = parse_factor_path(*p);
  cfg.contrast_kind = o.str("contrast", cfg.contrast_kind);
  if (const json* p = o.opt("fixed")) {
    require(p->is_array(), "InvalidConfig", "fixed must be an array of parameter names");
    for (const auto& e : *p) cfg.fixed.push_back(e.get<std::string>());
  }
  o.done();
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "InvalidConfig", "cannot open config file '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    fail("InvalidConfig", "config '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_config(j);
}

// --- canonical serialization ---

namespace {

json baseline_to_json(const BaselineFn& b) {
  json j;
  if (const auto* c = std::get_if<ConstantBaseline>(&b)) {
    j["form"] = "constant";
    j["value"] = c->value;
    if (!c->param.empty()) j["param"] = c->param;
  } else if (const auto* w = std::get_if<WeibullBaseline>(&b)) {
    j["form"] = "weibull";
    j["shape"] = w->shape;
    j["scale"] = w->scale;
    if (!w->shape_param.empty()) j["shape_param"] = w->shape_param;
    if (!w->scale_param.empty()) j["scale_param"] = w->scale_param;
  } else if (const auto* p = std::get_if<PiecewiseBaseline>(&b)) {
    j["form"] = "piecewise";
    j["cuts"] = p->cuts;
    j["values"] = p->values;
    if (!p->value_params.empty()) j["value_params"] = p->value_params;
  }
  return j;
}

json predictor_to_json(const LinearPredictor& lp) {
  json arr = json::array();
  for (const auto& t : lp.terms) {
    json e;
    e["source"] = t.source;
    e["coef"] = t.coef;
    if (!t.param.empty()) e["param"] = t.param;
    if (t.ref == TermRef::sampled_last) {
      e["ref"] = "sampled_last";
      e["sample_times"] = t.sample.times;
      if (t.sample.noise_sd != 0.0) e["sample_noise_sd"] = t.sample.noise_sd;
    }
    if (t.threshold) e["threshold"] = *t.threshold;
    arr.push_back(std::move(e));
  }
  return arr;
}

json attribute_law_to_json(const AttributeLaw& law) {
  json j;
  if (const auto* b = std::get_if<BernoulliLaw>(&law)) {
    j["type"] = "bernoulli";
    j["p"] = b->p;
    if (!b->param.empty()) j["param"] = b->param;
  } else {
    const auto& n = std::get<NormalLaw>(law);
    j["type"] = "normal";
    j["mean"] = n.mean;
    j["sd"] = n.sd;
    if (!n.mean_param.empty()) j["mean_param"] = n.mean_param;
    if (!n.sd_param.empty()) j["sd_param"] = n.sd_param;
  }
  return j;
}

json factor_law_to_json(const FactorLaw& law) {
  json j;
  if (const auto* c = std::get_if<ConstantFactor>(&law)) {
    j["type"] = "constant";
    j["value"] = c->value;
  } else if (const auto* l = std::get_if<LinearFactor>(&law)) {
    j["type"] = "linear";
    j["intercept"] = l->intercept;
    j["slope"] = l->slope;
  } else if (const auto* p = std::get_if<PiecewiseLinearFactor>(&law)) {
    j["type"] = "piecewise_linear";
    j["times"] = p->times;
    j["values"] = p->values;
  } else {
    j["type"] = "random_constant";
    j["law"] = attribute_law_to_json(std::get<RandomConstantFactor>(law).law);
  }
  return j;
}

json visit_rule_to_json(const VisitRule& v) {
  json j;
  if (const auto* f = std::get_if<FixedVisits>(&v)) {
    j["type"] = "fixed";
    j["times"] = f->times;
  } else if (const auto* c = std::get_if<DoctorCareVisits>(&v)) {
    j["type"] = "doctor_care";
    j["first_visit"] = c->first_visit;
    j["threshold"] = c->threshold;
    j["delay_if_above"] = c->delay_if_above;
    j["delay_if_below"] = c->delay_if_below;
  } else {
    const auto& d = std::get<OutcomeDependentVisits>(v);
    j["type"] = "outcome_dependent";
    j["candidates"] = d.candidates;
    j["intercept"] = d.intercept;
    j["slope"] = d.slope;
  }
  return j;
}

const char* rule_input_name(RuleInput in) {
  switch (in) {
    case RuleInput::observed_history: return "observed_history";
    case RuleInput::true_latent: return "true_value";
    case RuleInput::attributes: return "attribute";
    case RuleInput::death_status: return "death_status";
  }
  return "?";
}

}  // namespace

json system_to_json(const SystemSpec& spec) {
  json j;
  if (!spec.name.empty()) j["name"] = spec.name;
  if (!spec.outcome.empty()) j["outcome"] = spec.outcome;
  if (!spec.factor.empty()) j["factor"] = spec.factor;
  json procs;
  for (const auto& d : spec.processes) {
    json p;
    switch (d.kind) {
      case ProcessKind::counting: {
        p["kind"] = "counting";
        json in;
        in["baseline"] = baseline_to_json(d.intensity->baseline);
        if (!d.intensity->predictor.terms.empty())
          in["terms"] = predictor_to_json(d.intensity->predictor);
        p["intensity"] = std::move(in);
        break;
      }
      case ProcessKind::diffusion: {
        p["kind"] = "diffusion";
        json dy;
        dy["drift"] = baseline_to_json(d.dynamics->drift_baseline);
        if (!d.dynamics->predictor.terms.empty())
          dy["terms"] = predictor_to_json(d.dynamics->predictor);
        dy["sigma"] = d.dynamics->sigma;
        if (!d.dynamics->sigma_param.empty()) dy["sigma_param"] = d.dynamics->sigma_param;
        dy["init_mean"] = d.dynamics->init_mean;
        dy["init_sd"] = d.dynamics->init_sd;
        if (!d.dynamics->init_mean_param.empty()) dy["init_mean_param"] = d.dynamics->init_mean_param;
        if (!d.dynamics->init_sd_param.empty()) dy["init_sd_param"] = d.dynamics->init_sd_param;
        p["dynamics"] = std::move(dy);
        break;
      }
      case ProcessKind::attribute:
        p["kind"] = "attribute";
        p["law"] = attribute_law_to_json(*d.law);
        break;
      case ProcessKind::external_factor:
        p["kind"] = "external_factor";
        p["path"] = factor_law_to_json(*d.factor);
        break;
    }
    if (d.latent) p["latent"] = true;
    procs[d.name] = std::move(p);
  }
  j["processes"] = std::move(procs);
  return j;
}

json scheme_to_json(const ObservationScheme& scheme) {
  json chans;
  for (const auto& [name, c] : scheme.channels) {
    json j;
    j["process"] = c.process;
    json rip;
    if (const auto* cont = std::get_if<ContinuousRip>(&c.rip.base)) {
      rip["type"] = "continuous";
      if (cont->admin_censor) rip["admin_censor"] = *cont->admin_censor;
      if (cont->random_censor_rate) rip["random_censor_rate"] = *cont->random_censor_rate;
    } else if (const auto* disc = std::get_if<DiscreteRip>(&c.rip.base)) {
      rip["type"] = "discrete";
      rip["visits"] = visit_rule_to_json(disc->visits);
    } else {
      const auto& drop = std::get<DropoutRip>(c.rip.base);
      rip["type"] = "dropout";
      rip["visits"] = visit_rule_to_json(drop.visits);
      rip["base_rate"] = drop.base_rate;
      json terms = json::array();
      for (const auto& t : drop.terms) {
        json e;
        e["input"] = rule_input_name(t.input);
        if (!t.source.empty()) e["source"] = t.source;
        e["coef"] = t.coef;
        if (t.threshold) e["threshold"] = *t.threshold;
        terms.push_back(std::move(e));
      }
      if (!terms.empty()) rip["terms"] = std::move(terms);
    }
    j["rip"] = std::move(rip);
    if (!c.rip.death_truncated) j["death_truncated"] = false;
    if (!c.rip.extra_inputs.empty()) j["extra_inputs"] = c.rip.extra_inputs;

    json noise;
    if (std::holds_alternative<NoNoise>(c.noise)) {
      noise["type"] = "none";
    } else if (const auto* a = std::get_if<ModelANoise>(&c.noise)) {
      noise["type"] = "additive";
      noise["sigma"] = a->sigma;
      if (a->reuse_system_samples) noise["reuse_system_samples"] = true;
    } else if (const auto* ord = std::get_if<ModelBOrdinal>(&c.noise)) {
      noise["type"] = "ordinal";
      noise["cuts"] = ord->cuts;
      noise["law"] = ord->eps.kind == NoiseLaw::Kind::normal ? "normal" : "logistic";
      noise["scale"] = ord->eps.scale;
    } else if (const auto* b = std::get_if<ModelBBinary>(&c.noise)) {
      noise["type"] = "binary";
      noise["cut"] = b->cut;
      noise["law"] = b->eps.kind == NoiseLaw::Kind::normal ? "normal" : "logistic";
      noise["scale"] = b->eps.scale;
    } else {
      const auto& mc = std::get<Misclassification>(c.noise);
      noise["type"] = "misclassification";
      noise["sensitivity"] = mc.sensitivity;
      noise["specificity"] = mc.specificity;
    }
    j["noise"] = std::move(noise);
    chans[name] = std::move(j);
  }
  json out;
  out["channels"] = std::move(chans);
  return out;
}

json model_to_json(const ModelSpec& m) {
  json j;
  j["family"] = family_name(m.family);
  json ch;
  if (!m.channels.event.empty()) ch["event"] = m.channels.event;
  if (!m.channels.longitudinal.empty()) ch["longitudinal"] = m.channels.longitudinal;
  if (!m.channels.ordinal.empty()) ch["ordinal"] = m.channels.ordinal;
  if (!m.channels.binary.empty()) ch["binary"] = m.channels.binary;
  if (!m.channels.attribute.empty()) ch["attribute"] = m.channels.attribute;
  if (!m.channels.factor.empty()) ch["factor"] = m.channels.factor;
  j["channels"] = std::move(ch);
  const auto shape = [](const BaselineShape& s) {
    json o;
    switch (s.form) {
      case BaselineShape::Form::constant: o["form"] = "constant"; break;
      case BaselineShape::Form::weibull: o["form"] = "weibull"; break;
      case BaselineShape::Form::piecewise:
        o["form"] = "piecewise";
        o["cuts"] = s.cuts;
        break;
    }
    return o;
  };
  j["outcome_baseline"] = shape(m.outcome_baseline);
  j["death_baseline"] = shape(m.death_baseline);
  j["drift"] = shape(m.drift_shape);
  j["quadrature"] = {{"gh_nodes", m.quad.gh_nodes},
                     {"gl_nodes", m.quad.gl_nodes},
                     {"max_segment", m.quad.max_segment}};
  j["qmc"] = {{"draws", m.qmc.draws}, {"seed", m.qmc.seed}};
  j["threshold_law"] = m.threshold_law == ThresholdLaw::normal ? "normal" : "logistic";
  if (m.estimate_beta3) j["estimate_beta3"] = true;
  if (!m.ordinal_levels.empty()) j["ordinal_levels"] = m.ordinal_levels;
  return j;
}

json params_to_json(const ParamSet& p) {
  json j = json::object();
  for (const auto& [name, v] : p.values) j[name] = v;
  return j;
}

json fit_to_json(const FitResult& fit) {
  json j;
  j["estimates"] = params_to_json(fit.estimates);
  j["std_errors"] = params_to_json(fit.std_errors);
  j["loglik"] = fit.loglik;
  j["converged"] = fit.converged;
  j["hessian_pd"] = fit.hessian_pd;
  j["iterations"] = fit.iterations;
  j["grad_norm"] = fit.grad_norm;
  j["free_parameters"] = fit.free_names;
  j["gh_nodes"] = fit.gh_nodes;
  j["qmc_seed"] = fit.qmc_seed;
  if (!fit.warnings.empty()) j["warnings"] = fit.warnings;
  return j;
}

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::uint64_t scheme_fingerprint(const ObservationScheme& scheme) {
  return fnv1a(scheme_to_json(scheme).dump());
}

}  // namespace horizon
