#include "horizon/observe.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "horizon/classify.hpp"
#include "horizon/config.hpp"
#include "horizon/rng.hpp"

namespace horizon {

namespace {

// Realization always truncates at death: no value exists for a dead subject,
// whatever the scheme declares.  The death_truncated flag only feeds the CAR
// classifier, which judges the declared mechanism.

struct ChannelCtx {
  std::string name;
  const ChannelSpec* spec = nullptr;
  int cidx = 0;       // stable channel index (sorted name order) for streams
  int proc = -1;
  ProcessKind kind = ProcessKind::diffusion;
  int sample_entry = -1;  // registry entry to replay for reuse_system_samples
};

double logistic_cdf_at(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double draw_eps(const NoiseLaw& law, Rng& rng) {
  return law.kind == NoiseLaw::Kind::logistic ? rng.logistic(law.scale)
                                              : law.scale * rng.normal();
}

// True value of a process at grid index i (counting: 0/1 state).
double true_value(const Trajectory& tr, const ValidatedSystem& sys, int proc, std::int64_t i) {
  const auto& d = sys.process(proc);
  const double t = i * tr.step;
  switch (d.kind) {
    case ProcessKind::counting:
      return tr.jumped_at(d.name, t) ? 1.0 : 0.0;
    case ProcessKind::diffusion:
      return tr.diffusion_paths.at(d.name)[i];
    case ProcessKind::attribute:
      return tr.attributes.at(d.name);
    case ProcessKind::external_factor: {
      const auto& law = *d.factor;
      if (factor_is_random(law)) {
        auto it = tr.factor_levels.find(d.name);
        require(it != tr.factor_levels.end(), "RuleInputUnavailable",
                "random-constant factor '" + d.name + "' has no realized level on the trajectory");
        return it->second;
      }
      return factor_value(law, t);
    }
  }
  return 0.0;
}

struct Visit {
  double time = 0.0;
  double value = 0.0;
};

class ChannelRealizer {
public:
  ChannelRealizer(const Population& pop, const ChannelCtx& ctx, std::uint64_t seed,
                  const Trajectory& tr, double followup_cap)
      : pop_(pop), sys_(*pop.system), ctx_(ctx), tr_(tr), cap_(followup_cap),
        noise_rng_(derive_seed(seed, tr.subject_id, stream::channel_noise + ctx.cidx)),
        visit_rng_(derive_seed(seed, tr.subject_id, stream::channel_visits + ctx.cidx)),
        drop_rng_(derive_seed(seed, tr.subject_id, stream::channel_dropout + ctx.cidx)),
        censor_rng_(derive_seed(seed, tr.subject_id, stream::channel_censor + ctx.cidx)) {}

  void run(Dataset& out);

private:
  double observe_value(std::int64_t i);
  void run_discrete(const VisitRule& visits, const DropoutRip* drop, Dataset& out);
  void run_continuous(const ContinuousRip& rip, Dataset& out);
  double dropout_intensity(const DropoutRip& drop, std::int64_t i) const;

  const Population& pop_;
  const ValidatedSystem& sys_;
  const ChannelCtx& ctx_;
  const Trajectory& tr_;
  double cap_;  // censored death time: follow-up on every channel stops here
  Rng noise_rng_, visit_rng_, drop_rng_, censor_rng_;
  bool has_observed_ = false;
  double last_observed_ = 0.0;
  std::vector<Visit> emitted_;
};

// Post-noise value at grid index i; draws exactly one noise variate per call
// for stochastic models, keeping streams aligned across model variants.
double ChannelRealizer::observe_value(std::int64_t i) {
  const double y = true_value(tr_, sys_, ctx_.proc, i);
  const auto& noise = ctx_.spec->noise;
  if (std::holds_alternative<NoNoise>(noise)) return y;
  if (const auto* a = std::get_if<ModelANoise>(&noise)) {
    if (a->reuse_system_samples) {
      const double t = i * tr_.step;
      for (const auto& [st, sv] : tr_.samples[ctx_.sample_entry]) {
        if (std::abs(st - t) < 1e-9) return sv;
      }
      fail("RuleInputUnavailable", "channel '" + ctx_.name +
               "' reuses system samples but none was realized at the visit time");
    }
    return y + a->sigma * noise_rng_.normal();
  }
  if (const auto* o = std::get_if<ModelBOrdinal>(&noise)) {
    const double z = y + draw_eps(o->eps, noise_rng_);
    const auto it = std::upper_bound(o->cuts.begin(), o->cuts.end(), z);
    return static_cast<double>(it - o->cuts.begin());
  }
  if (const auto* b = std::get_if<ModelBBinary>(&noise)) {
    const double z = y + draw_eps(b->eps, noise_rng_);
    return z >= b->cut ? 1.0 : 0.0;
  }
  const auto& mc = std::get<Misclassification>(noise);
  const bool truth = y >= 0.5;
  const double u = noise_rng_.uniform();
  if (truth) return u < mc.sensitivity ? 1.0 : 0.0;
  return u < mc.specificity ? 0.0 : 1.0;
}

double ChannelRealizer::dropout_intensity(const DropoutRip& drop, std::int64_t i) const {
  double lin = 0.0;
  for (const auto& term : drop.terms) {
    double v = 0.0;
    switch (term.input) {
      case RuleInput::observed_history:
        v = has_observed_ ? last_observed_ : 0.0;
        break;
      case RuleInput::true_latent: {
        const int src = term.source.empty() ? ctx_.proc : sys_.index_of(term.source);
        v = true_value(tr_, sys_, src, i);
        break;
      }
      case RuleInput::attributes:
        v = tr_.attributes.at(term.source);
        break;
      case RuleInput::death_status:
        v = 0.0;  // the subject is alive while this intensity is evaluated
        break;
    }
    if (term.threshold) v = (v >= *term.threshold) ? 1.0 : 0.0;
    lin += term.coef * v;
  }
  return drop.base_rate * std::exp(lin);
}

void ChannelRealizer::run_discrete(const VisitRule& visits, const DropoutRip* drop,
                                   Dataset& out) {
  const double h = tr_.step;
  std::int64_t m = std::llround(tr_.horizon / h);
  if (cap_ < tr_.horizon) m = std::min(m, static_cast<std::int64_t>(std::floor(cap_ / h + 1e-9)));
  const std::int64_t death_idx =
      tr_.dead() ? std::llround(tr_.death_time / h) : m + 1;

  // visit schedule bookkeeping
  const auto* fixed = std::get_if<FixedVisits>(&visits);
  const auto* care = std::get_if<DoctorCareVisits>(&visits);
  const auto* dep = std::get_if<OutcomeDependentVisits>(&visits);
  std::vector<std::int64_t> queue;  // snapped candidate indices (fixed / dep)
  if (fixed) {
    for (double u : fixed->times) {
      const std::int64_t k = std::llround(u / h);
      if (k >= 0 && k <= m) queue.push_back(k);
    }
    std::sort(queue.begin(), queue.end());
  } else if (dep) {
    for (double u : dep->candidates) {
      const std::int64_t k = std::llround(u / h);
      if (k >= 0 && k <= m) queue.push_back(k);
    }
    std::sort(queue.begin(), queue.end());
  }
  std::size_t qpos = 0;
  std::int64_t next_care = care ? std::llround(care->first_visit / h) : -1;

  for (std::int64_t i = 0; i <= m; ++i) {
    if (i >= death_idx) break;  // strictly before death

    // visits due at this grid point
    bool visit_now = false;
    if (fixed) {
      while (qpos < queue.size() && queue[qpos] < i) ++qpos;
      if (qpos < queue.size() && queue[qpos] == i) {
        visit_now = true;
        ++qpos;
      }
    } else if (dep) {
      while (qpos < queue.size() && queue[qpos] < i) ++qpos;
      if (qpos < queue.size() && queue[qpos] == i) {
        const double y = true_value(tr_, sys_, ctx_.proc, i);
        visit_now = visit_rng_.uniform() < logistic_cdf_at(dep->intercept + dep->slope * y);
        ++qpos;
      }
    } else if (care && next_care == i) {
      visit_now = true;
    }

    if (visit_now) {
      const double z = observe_value(i);
      emitted_.push_back({i * h, z});
      has_observed_ = true;
      last_observed_ = z;
      if (care) {
        const double delay = z >= care->threshold ? care->delay_if_above : care->delay_if_below;
        const std::int64_t dk = std::max<std::int64_t>(1, std::llround(delay / h));
        next_care = i + dk;
      }
    }

    // dropout over (t, t+h] with left-endpoint intensity
    if (drop && i < m) {
      const double lam = dropout_intensity(*drop, i);
      require(std::isfinite(lam), "NonFiniteState", "dropout intensity not finite");
      if (drop_rng_.uniform() < -std::expm1(-lam * h)) break;  // S = (i+1)h, no later visits
    }
  }

  // emit records
  if (ctx_.kind == ProcessKind::counting) {
    // interval construction: l = last visit observed 0 before the first 1
    EventRecord ev;
    ev.subject = tr_.subject_id;
    ev.channel = ctx_.name;
    ev.process = sys_.process(ctx_.proc).name;
    // A positive reading at t=0 brackets nothing ((0,0] is empty, and the
    // process starts at 0 anyway): only t>0 readings can close an interval.
    std::size_t first1 = emitted_.size();
    for (std::size_t k = 0; k < emitted_.size(); ++k) {
      if (emitted_[k].value >= 0.5 && emitted_[k].time > 0.0) {
        first1 = k;
        break;
      }
    }
    if (first1 < emitted_.size()) {
      ev.status = EventStatus::interval;
      ev.left = first1 == 0 ? 0.0 : emitted_[first1 - 1].time;
      ev.right = emitted_[first1].time;
      ev.exit = ev.right;
      out.events.push_back(ev);
    } else {
      ev.status = EventStatus::right_censored;
      ev.exit = emitted_.empty() ? 0.0 : emitted_.back().time;
      out.events.push_back(ev);
    }
  } else {
    for (const auto& v : emitted_) {
      out.longitudinal.push_back({tr_.subject_id, ctx_.name, v.time, v.value});
    }
  }
}

void ChannelRealizer::run_continuous(const ContinuousRip& rip, Dataset& out) {
  const double h = tr_.step;
  const std::int64_t m = std::llround(tr_.horizon / h);
  double censor = std::min(tr_.horizon, cap_);
  if (rip.admin_censor) censor = std::min(censor, *rip.admin_censor);
  if (rip.random_censor_rate && *rip.random_censor_rate > 0.0)
    censor = std::min(censor, censor_rng_.exponential(*rip.random_censor_rate));

  const std::string pname = sys_.process(ctx_.proc).name;

  if (ctx_.proc == sys_.death_index()) {
    DeathRecord rec;
    rec.subject = tr_.subject_id;
    const bool dead = tr_.dead() && tr_.death_time <= censor;
    rec.time = dead ? tr_.death_time : censor;
    rec.observed = dead;
    out.deaths.push_back(rec);
    return;
  }

  // effective end of follow-up for this channel
  const double end = std::min(censor, tr_.dead() ? tr_.death_time : tr_.horizon);

  if (ctx_.kind == ProcessKind::counting) {
    EventRecord ev;
    ev.subject = tr_.subject_id;
    ev.channel = ctx_.name;
    ev.process = pname;
    const auto it = tr_.jump_times.find(pname);
    if (it != tr_.jump_times.end() && it->second <= end) {
      ev.status = EventStatus::observed_jump;
      ev.exit = it->second;
    } else {
      ev.status = EventStatus::right_censored;
      ev.exit = end;
    }
    out.events.push_back(ev);
    return;
  }

  if (ctx_.kind == ProcessKind::attribute) {
    out.longitudinal.push_back({tr_.subject_id, ctx_.name, 0.0, tr_.attributes.at(pname)});
    return;
  }
  if (ctx_.kind == ProcessKind::external_factor &&
      factor_is_random(*sys_.process(ctx_.proc).factor)) {
    // constant level: a single baseline record carries the whole path
    out.longitudinal.push_back({tr_.subject_id, ctx_.name, 0.0, true_value(tr_, sys_, ctx_.proc, 0)});
    return;
  }

  // full-resolution observation on the grid
  const std::int64_t last = std::min<std::int64_t>(std::llround(end / h), m);
  for (std::int64_t i = 0; i <= last; ++i) {
    if (tr_.dead() && i * h >= tr_.death_time) break;
    out.longitudinal.push_back({tr_.subject_id, ctx_.name, i * h, observe_value(i)});
  }
}

void ChannelRealizer::run(Dataset& out) {
  const auto& rip = ctx_.spec->rip;
  if (const auto* c = std::get_if<ContinuousRip>(&rip.base)) {
    run_continuous(*c, out);
  } else if (const auto* d = std::get_if<DiscreteRip>(&rip.base)) {
    run_discrete(d->visits, nullptr, out);
  } else {
    const auto& dr = std::get<DropoutRip>(rip.base);
    run_discrete(dr.visits, &dr, out);
  }
}

void validate_noise(const ChannelSpec& spec, const ValidatedSystem& sys, const std::string& name) {
  const ProcessKind kind = sys.decl(spec.process).kind;
  const std::string where = "channel '" + name + "'";
  if (std::holds_alternative<NoNoise>(spec.noise)) return;
  if (const auto* a = std::get_if<ModelANoise>(&spec.noise)) {
    require(kind == ProcessKind::diffusion, "InvalidScheme",
            where + ": additive noise applies to real-state processes only");
    require(a->sigma >= 0.0, "InvalidScheme", where + ": sigma must be >= 0");
    if (a->reuse_system_samples) {
      bool found = false;
      for (const auto& ref : sys.sampled_terms()) found |= ref.source == spec.process;
      require(found, "InvalidScheme",
              where + ": reuse_system_samples needs a sampled intensity term on this process");
    }
    return;
  }
  if (const auto* o = std::get_if<ModelBOrdinal>(&spec.noise)) {
    require(kind == ProcessKind::diffusion, "InvalidScheme",
            where + ": threshold models apply to real-state processes only");
    require(!o->cuts.empty(), "InvalidScheme", where + ": ordinal model needs cuts");
    for (std::size_t j = 1; j < o->cuts.size(); ++j)
      require(o->cuts[j] > o->cuts[j - 1], "InvalidScheme",
              where + ": cuts must be strictly increasing");
    require(o->eps.scale > 0.0, "InvalidScheme", where + ": noise scale must be > 0");
    return;
  }
  if (const auto* b = std::get_if<ModelBBinary>(&spec.noise)) {
    require(kind == ProcessKind::diffusion, "InvalidScheme",
            where + ": threshold models apply to real-state processes only");
    require(b->eps.scale > 0.0, "InvalidScheme", where + ": noise scale must be > 0");
    return;
  }
  const auto& mc = std::get<Misclassification>(spec.noise);
  require(kind == ProcessKind::counting, "InvalidScheme",
          where + ": misclassification applies to binary processes only");
  require(mc.sensitivity > 0.0 && mc.sensitivity <= 1.0 && mc.specificity > 0.0 &&
              mc.specificity <= 1.0,
          "InvalidScheme", where + ": sensitivity and specificity must lie in (0,1]");
}

}  // namespace

void validate_scheme(const ObservationScheme& scheme, const ValidatedSystem& sys) {
  int death_channels = 0;
  for (const auto& [name, spec] : scheme.channels) {
    const std::string where = "channel '" + name + "'";
    const int proc = sys.index_of(spec.process);
    require(proc >= 0, "ChannelUnmapped",
            where + " maps to undeclared process '" + spec.process + "'");
    const auto& decl = sys.process(proc);

    if (proc == sys.death_index()) {
      ++death_channels;
      require(std::holds_alternative<ContinuousRip>(spec.rip.base), "InvalidScheme",
              where + ": the death channel is observed in continuous time");
      require(std::holds_alternative<NoNoise>(spec.noise), "InvalidScheme",
              where + ": the death channel admits no noise model");
    }
    require(!(decl.kind == ProcessKind::attribute && decl.latent), "InvalidScheme",
            where + ": latent attributes are unobservable by definition");
    if (decl.kind == ProcessKind::attribute) {
      require(std::holds_alternative<ContinuousRip>(spec.rip.base), "InvalidScheme",
              where + ": attributes are recorded once at baseline");
    }

    validate_noise(spec, sys, name);

    // rule-input availability
    auto check_visits = [&](const VisitRule& visits) {
      if (std::holds_alternative<OutcomeDependentVisits>(visits)) {
        require(decl.kind == ProcessKind::diffusion || decl.kind == ProcessKind::counting,
                "RuleInputUnavailable",
                where + ": outcome-dependent visits need a simulated state to read");
      }
    };
    if (const auto* d = std::get_if<DiscreteRip>(&spec.rip.base)) check_visits(d->visits);
    if (const auto* dr = std::get_if<DropoutRip>(&spec.rip.base)) {
      check_visits(dr->visits);
      require(dr->base_rate >= 0.0, "InvalidScheme", where + ": dropout base_rate must be >= 0");
      for (const auto& term : dr->terms) {
        switch (term.input) {
          case RuleInput::observed_history:
            break;  // reads this channel's own records
          case RuleInput::true_latent: {
            const int src = term.source.empty() ? proc : sys.index_of(term.source);
            require(src >= 0, "UnknownReference",
                    where + ": dropout term names undeclared process '" + term.source + "'");
            const auto k = sys.process(src).kind;
            require(k == ProcessKind::diffusion || k == ProcessKind::counting,
                    "RuleInputUnavailable",
                    where + ": true-value dropout term needs a simulated state");
            break;
          }
          case RuleInput::attributes: {
            const int src = sys.index_of(term.source);
            require(src >= 0 && sys.process(src).kind == ProcessKind::attribute,
                    "RuleInputUnavailable",
                    where + ": attribute dropout term must name an attribute");
            break;
          }
          case RuleInput::death_status:
            fail("InvalidScheme", where + ": dropout terms cannot read death status");
        }
      }
    }
  }
  require(death_channels == 1, "ChannelUnmapped",
          "scheme must include exactly one channel on the death process");
}

Dataset apply_observation(const Population& pop, const ObservationScheme& scheme,
                          std::uint64_t seed) {
  require(pop.system != nullptr, "InvalidConfig", "population carries no system");
  const ValidatedSystem& sys = *pop.system;
  validate_scheme(scheme, sys);

  std::vector<ChannelCtx> ctxs;
  int cidx = 0;
  for (const auto& [name, spec] : scheme.channels) {
    ChannelCtx ctx;
    ctx.name = name;
    ctx.spec = &spec;
    ctx.cidx = cidx++;
    ctx.proc = sys.index_of(spec.process);
    ctx.kind = sys.process(ctx.proc).kind;
    if (const auto* a = std::get_if<ModelANoise>(&spec.noise)) {
      if (a->reuse_system_samples) {
        const auto& reg = sys.sampled_terms();
        for (std::size_t k = 0; k < reg.size(); ++k)
          if (reg[k].source == spec.process) ctx.sample_entry = static_cast<int>(k);
      }
    }
    ctxs.push_back(ctx);
  }

  Dataset out;
  out.horizon = pop.horizon;
  out.scheme_fingerprint = scheme_fingerprint(scheme);
  const InfluenceGraph graph = influence_graph(sys);
  for (const auto& [name, verdict] : classify_car(scheme, graph))
    out.car_verdicts[name] = to_string(verdict);

  // the death channel runs first per subject: its censored death time caps
  // follow-up on every other channel, so no record can outlive the subject's
  // presence in the study
  const ChannelCtx* death_ctx = nullptr;
  for (const auto& ctx : ctxs)
    if (ctx.proc == sys.death_index()) death_ctx = &ctx;

  const double inf = std::numeric_limits<double>::infinity();
  for (const auto& tr : pop.subjects) {
    ChannelRealizer dr(pop, *death_ctx, seed, tr, inf);
    dr.run(out);
    const double cap = out.deaths.back().time;
    for (const auto& ctx : ctxs) {
      if (&ctx == death_ctx) continue;
      ChannelRealizer r(pop, ctx, seed, tr, cap);
      r.run(out);
    }
  }
  return out;
}

}  // namespace horizon
