#include "horizon/system.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace horizon {

namespace {

double interp_path(const std::vector<double>& ts, const std::vector<double>& vs, double t) {
  if (t <= ts.front()) return vs.front();
  if (t >= ts.back()) return vs.back();
  std::size_t j = std::upper_bound(ts.begin(), ts.end(), t) - ts.begin();
  const double w = (t - ts[j - 1]) / (ts[j] - ts[j - 1]);
  return vs[j - 1] + w * (vs[j] - vs[j - 1]);
}

void validate_attribute_law(const AttributeLaw& law, const std::string& where) {
  if (const auto* b = std::get_if<BernoulliLaw>(&law)) {
    require(b->p >= 0.0 && b->p <= 1.0, "InvalidSystem", where + ": bernoulli p outside [0,1]");
  } else {
    const auto& n = std::get<NormalLaw>(law);
    require(n.sd >= 0.0 && std::isfinite(n.mean) && std::isfinite(n.sd), "InvalidSystem",
            where + ": normal law needs finite mean and sd >= 0");
  }
}

void rebind_attribute_law(AttributeLaw& law, const ParamSet& p) {
  if (auto* b = std::get_if<BernoulliLaw>(&law)) {
    if (!b->param.empty() && p.has(b->param)) b->p = p.get(b->param);
  } else {
    auto& n = std::get<NormalLaw>(law);
    if (!n.mean_param.empty() && p.has(n.mean_param)) n.mean = p.get(n.mean_param);
    if (!n.sd_param.empty() && p.has(n.sd_param)) n.sd = p.get(n.sd_param);
  }
}

void collect_attribute_law(const AttributeLaw& law, ParamSet& out) {
  if (const auto* b = std::get_if<BernoulliLaw>(&law)) {
    if (!b->param.empty()) out.set(b->param, b->p);
  } else {
    const auto& n = std::get<NormalLaw>(law);
    if (!n.mean_param.empty()) out.set(n.mean_param, n.mean);
    if (!n.sd_param.empty()) out.set(n.sd_param, n.sd);
  }
}

void validate_predictor(const SystemSpec& spec, const LinearPredictor& pred, bool owner_counting,
                        const std::string& where) {
  for (const auto& term : pred.terms) {
    auto it = std::find_if(spec.processes.begin(), spec.processes.end(),
                           [&](const ProcessDecl& d) { return d.name == term.source; });
    require(it != spec.processes.end(), "UnknownReference",
            where + ": term references undeclared process '" + term.source + "'");
    require(term.source != kDeathName, "DeathHasOutgoingEdge",
            where + ": death may not influence any process");
    require(std::isfinite(term.coef), "InvalidSystem", where + ": term coefficient not finite");
    if (term.ref == TermRef::sampled_last) {
      require(owner_counting, "InvalidSystem",
              where + ": sampled_last terms are only supported in counting intensities");
      require(it->kind == ProcessKind::diffusion, "InvalidSystem",
              where + ": sampled_last source must be a diffusion");
      require(!term.sample.times.empty(), "InvalidSystem",
              where + ": sampled_last term needs sample times");
      for (std::size_t j = 0; j < term.sample.times.size(); ++j) {
        require(term.sample.times[j] >= 0.0 &&
                    (j == 0 || term.sample.times[j] > term.sample.times[j - 1]),
                "InvalidSystem", where + ": sample times must be increasing and nonnegative");
      }
      require(term.sample.noise_sd >= 0.0, "InvalidSystem",
              where + ": sample noise sd must be >= 0");
    }
  }
}

}  // namespace

double FactorPath::operator()(double t) const {
  if (const auto* c = std::get_if<ConstantFactor>(&fn)) return c->value;
  if (const auto* l = std::get_if<LinearFactor>(&fn)) return l->intercept + l->slope * t;
  const auto& pw = std::get<PiecewiseLinearFactor>(fn);
  return interp_path(pw.times, pw.values, t);
}

double factor_value(const FactorLaw& law, double t) {
  if (const auto* c = std::get_if<ConstantFactor>(&law)) return c->value;
  if (const auto* l = std::get_if<LinearFactor>(&law)) return l->intercept + l->slope * t;
  if (const auto* pw = std::get_if<PiecewiseLinearFactor>(&law))
    return interp_path(pw->times, pw->values, t);
  fail("InvalidSystem", "random-constant factor has no deterministic value");
}

bool factor_is_random(const FactorLaw& law) {
  return std::holds_alternative<RandomConstantFactor>(law);
}

int ValidatedSystem::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < spec_.processes.size(); ++i)
    if (spec_.processes[i].name == name) return static_cast<int>(i);
  return -1;
}

const ProcessDecl& ValidatedSystem::decl(const std::string& name) const {
  const int i = index_of(name);
  require(i >= 0, "UnknownReference", "no process named '" + name + "'");
  return spec_.processes[i];
}

ValidatedSystem validate_system(SystemSpec spec) {
  ValidatedSystem sys;

  std::set<std::string> names;
  for (const auto& d : spec.processes) {
    require(!d.name.empty(), "InvalidSystem", "process with empty name");
    require(names.insert(d.name).second, "InvalidSystem", "duplicate process name '" + d.name + "'");
  }

  for (std::size_t i = 0; i < spec.processes.size(); ++i) {
    const auto& d = spec.processes[i];
    const std::string where = "process '" + d.name + "'";
    switch (d.kind) {
      case ProcessKind::counting:
        require(d.intensity.has_value(), "InvalidSystem", where + ": counting needs an intensity");
        require(!d.dynamics && !d.law && !d.factor, "InvalidSystem",
                where + ": counting carries only an intensity");
        validate_baseline(d.intensity->baseline, /*hazard=*/true, where);
        validate_predictor(spec, d.intensity->predictor, /*owner_counting=*/true, where);
        break;
      case ProcessKind::diffusion:
        require(d.dynamics.has_value(), "InvalidSystem", where + ": diffusion needs dynamics");
        require(!d.intensity && !d.law && !d.factor, "InvalidSystem",
                where + ": diffusion carries only dynamics");
        validate_baseline(d.dynamics->drift_baseline, /*hazard=*/false, where);
        validate_predictor(spec, d.dynamics->predictor, /*owner_counting=*/false, where);
        require(d.dynamics->sigma >= 0.0 && d.dynamics->init_sd >= 0.0, "InvalidSystem",
                where + ": sigma and init_sd must be >= 0");
        break;
      case ProcessKind::attribute:
        require(d.law.has_value(), "InvalidSystem", where + ": attribute needs a law");
        require(!d.intensity && !d.dynamics && !d.factor, "AttributeInfluenced",
                where + ": attributes are frozen at time zero and admit no dynamics");
        validate_attribute_law(*d.law, where);
        break;
      case ProcessKind::external_factor:
        require(d.factor.has_value(), "InvalidSystem", where + ": external factor needs a law");
        require(!d.intensity && !d.dynamics && !d.law, "InvalidSystem",
                where + ": external factor evolves autonomously");
        require(!d.latent, "InvalidSystem", where + ": external factors cannot be latent");
        if (const auto* rc = std::get_if<RandomConstantFactor>(&*d.factor))
          validate_attribute_law(rc->law, where);
        if (const auto* pw = std::get_if<PiecewiseLinearFactor>(&*d.factor)) {
          require(pw->times.size() >= 2 && pw->times.size() == pw->values.size(), "InvalidSystem",
                  where + ": piecewise factor needs matching times/values (>= 2)");
          for (std::size_t j = 1; j < pw->times.size(); ++j)
            require(pw->times[j] > pw->times[j - 1], "InvalidSystem",
                    where + ": factor times must be strictly increasing");
        }
        break;
    }
  }

  const auto death_it = std::find_if(spec.processes.begin(), spec.processes.end(),
                                     [](const ProcessDecl& d) { return d.name == kDeathName; });
  require(death_it != spec.processes.end(), "NoDeathProcess",
          "system must declare a counting process named 'death'");
  require(death_it->kind == ProcessKind::counting, "NoDeathProcess",
          "'death' must be a counting process");

  // Edges into attributes are impossible by construction (attributes carry no
  // predictor), so AttributeInfluenced can only arise from a mis-kinded
  // declaration, which the per-kind checks above already reject.

  sys.spec_ = std::move(spec);
  sys.slot_.assign(sys.spec_.processes.size(), -1);
  for (std::size_t i = 0; i < sys.spec_.processes.size(); ++i) {
    const auto& d = sys.spec_.processes[i];
    const int idx = static_cast<int>(i);
    switch (d.kind) {
      case ProcessKind::counting:
        sys.slot_[i] = static_cast<int>(sys.counting_.size());
        sys.counting_.push_back(idx);
        if (d.name == kDeathName) sys.death_ = idx;
        break;
      case ProcessKind::diffusion:
        sys.slot_[i] = static_cast<int>(sys.diffusion_.size());
        sys.diffusion_.push_back(idx);
        break;
      case ProcessKind::attribute:
        sys.slot_[i] = static_cast<int>(sys.attribute_.size());
        sys.attribute_.push_back(idx);
        break;
      case ProcessKind::external_factor:
        sys.slot_[i] = static_cast<int>(sys.factor_list_.size());
        sys.factor_list_.push_back(idx);
        break;
    }
  }

  for (int ci : sys.counting_) {
    const auto& terms = sys.spec_.processes[ci].intensity->predictor.terms;
    for (std::size_t k = 0; k < terms.size(); ++k) {
      if (terms[k].ref == TermRef::sampled_last)
        sys.sampled_.push_back({ci, static_cast<int>(k), terms[k].source});
    }
  }

  // Role resolution.  Explicit names win; otherwise the unique non-death
  // counting process, else the unique diffusion, is the outcome.
  if (!sys.spec_.outcome.empty()) {
    sys.outcome_ = sys.index_of(sys.spec_.outcome);
    require(sys.outcome_ >= 0, "UnknownReference",
            "outcome role names undeclared process '" + sys.spec_.outcome + "'");
    require(sys.outcome_ != sys.death_, "InvalidSystem", "death cannot be the outcome role");
  } else {
    std::vector<int> cand;
    for (int ci : sys.counting_)
      if (ci != sys.death_) cand.push_back(ci);
    if (cand.empty()) cand = sys.diffusion_;
    if (cand.size() == 1) sys.outcome_ = cand[0];
  }
  if (!sys.spec_.factor.empty()) {
    sys.factor_ = sys.index_of(sys.spec_.factor);
    require(sys.factor_ >= 0, "UnknownReference",
            "factor role names undeclared process '" + sys.spec_.factor + "'");
  } else if (sys.factor_list_.size() == 1) {
    sys.factor_ = sys.factor_list_[0];
  }

  return sys;
}

ParamSet true_params(const ValidatedSystem& sys) {
  ParamSet out;
  for (const auto& d : sys.processes()) {
    if (d.intensity) {
      collect_baseline_params(d.intensity->baseline, out);
      for (const auto& t : d.intensity->predictor.terms)
        if (!t.param.empty()) out.set(t.param, t.coef);
    }
    if (d.dynamics) {
      collect_baseline_params(d.dynamics->drift_baseline, out);
      for (const auto& t : d.dynamics->predictor.terms)
        if (!t.param.empty()) out.set(t.param, t.coef);
      if (!d.dynamics->sigma_param.empty()) out.set(d.dynamics->sigma_param, d.dynamics->sigma);
      if (!d.dynamics->init_mean_param.empty())
        out.set(d.dynamics->init_mean_param, d.dynamics->init_mean);
      if (!d.dynamics->init_sd_param.empty())
        out.set(d.dynamics->init_sd_param, d.dynamics->init_sd);
    }
    if (d.law) collect_attribute_law(*d.law, out);
    if (d.factor) {
      if (const auto* rc = std::get_if<RandomConstantFactor>(&*d.factor))
        collect_attribute_law(rc->law, out);
    }
  }
  return out;
}

ValidatedSystem bind_params(const ValidatedSystem& sys, const ParamSet& p) {
  SystemSpec spec = sys.spec();
  for (auto& d : spec.processes) {
    if (d.intensity) {
      rebind_baseline(d.intensity->baseline, p);
      for (auto& t : d.intensity->predictor.terms)
        if (!t.param.empty() && p.has(t.param)) t.coef = p.get(t.param);
    }
    if (d.dynamics) {
      rebind_baseline(d.dynamics->drift_baseline, p);
      for (auto& t : d.dynamics->predictor.terms)
        if (!t.param.empty() && p.has(t.param)) t.coef = p.get(t.param);
      if (!d.dynamics->sigma_param.empty() && p.has(d.dynamics->sigma_param))
        d.dynamics->sigma = p.get(d.dynamics->sigma_param);
      if (!d.dynamics->init_mean_param.empty() && p.has(d.dynamics->init_mean_param))
        d.dynamics->init_mean = p.get(d.dynamics->init_mean_param);
      if (!d.dynamics->init_sd_param.empty() && p.has(d.dynamics->init_sd_param))
        d.dynamics->init_sd = p.get(d.dynamics->init_sd_param);
    }
    if (d.law) rebind_attribute_law(*d.law, p);
    if (d.factor) {
      if (auto* rc = std::get_if<RandomConstantFactor>(&*d.factor))
        rebind_attribute_law(rc->law, p);
    }
  }
  return validate_system(std::move(spec));
}

}  // namespace horizon
