#include "horizon/simulate.hpp"

#include <algorithm>
#include <cmath>

#include "horizon/graph.hpp"
#include "horizon/parallel.hpp"
#include "horizon/rng.hpp"

namespace horizon {

namespace {

constexpr double kGridTol = 1e-9;

std::int64_t grid_steps(const SimConfig& cfg) {
  const std::int64_t m = std::llround(cfg.horizon / cfg.step);
  require(m >= 1 && std::abs(m * cfg.step - cfg.horizon) <= kGridTol * std::max(1.0, cfg.horizon),
          "InvalidConfig", "horizon must be an integer number of steps");
  return m;
}

std::int64_t grid_index(double t, double step) {
  const std::int64_t i = std::llround(t / step);
  require(i >= 0 && std::abs(i * step - t) <= kGridTol * std::max(1.0, t), "InvalidConfig",
          "time does not lie on the simulation grid");
  return i;
}

double draw_attr(const AttributeLaw& law, Rng& rng) {
  if (const auto* b = std::get_if<BernoulliLaw>(&law)) return rng.bernoulli(b->p) ? 1.0 : 0.0;
  const auto& n = std::get<NormalLaw>(law);
  return n.mean + n.sd * rng.normal();
}

enum class Src { counting, diffusion, attribute, factor };

struct CTerm {
  Src src = Src::diffusion;
  int slot = 0;
  double coef = 0.0;
  bool thresholded = false;
  double threshold = 0.0;
  int sample_entry = -1;  // >= 0: read the latest realized sample instead
};

struct CPredictor {
  std::vector<CTerm> terms;
};

struct CCounting {
  int proc = 0;
  const BaselineFn* baseline = nullptr;
  CPredictor pred;
};

struct CDiffusion {
  int proc = 0;
  const BaselineFn* drift = nullptr;
  CPredictor pred;
  double sigma = 0.0, init_mean = 0.0, init_sd = 0.0;
  bool overridden = false;  // factor override replaces the dynamics
};

struct CSampleEntry {
  int source_slot = 0;  // diffusion slot
  std::vector<std::int64_t> due;  // schedule snapped to grid indices
  double noise_sd = 0.0;
};

// One subject's simulation engine: compiled system plus reusable workspace.
// Streaming summaries call simulate() per subject and read the workspace
// without materializing a Trajectory.
class Engine {
public:
  Engine(const ValidatedSystem& sys, const SimConfig& cfg,
         const std::optional<FactorPath>& factor_override)
      : sys_(sys), cfg_(cfg), m_(grid_steps(cfg)) {
    if (factor_override) {
      require(sys.factor_index() >= 0, "UnknownReference",
              "factor override given but the system declares no factor role");
      override_proc_ = sys.factor_index();
      override_ = *factor_override;
    }
    compile();
  }

  const ValidatedSystem& sys() const { return sys_; }
  std::int64_t steps() const { return m_; }

  void simulate(std::uint64_t master, std::int64_t subject);

  // --- post-simulate accessors (valid until the next simulate call) ---
  std::int64_t death_index() const { return death_idx_; }  // -1: survived past horizon
  bool dead_at_index(std::int64_t i) const { return death_idx_ >= 0 && death_idx_ <= i; }
  std::int64_t jump_index(int counting_slot) const { return jump_idx_[counting_slot]; }
  double path_at(int diffusion_slot, std::int64_t i) const { return paths_[diffusion_slot][i]; }
  double attribute(int slot) const { return attr_[slot]; }

  Trajectory to_trajectory(std::int64_t subject) const;

private:
  void compile();
  double term_value(const CTerm& t, double time, std::int64_t i, const char* overlay) const;
  double predictor(const CPredictor& p, double time, std::int64_t i, const char* overlay) const;
  double factor_at(int slot, double time) const;

  const ValidatedSystem& sys_;
  SimConfig cfg_;
  std::int64_t m_;
  int override_proc_ = -1;
  FactorPath override_;

  std::vector<CCounting> counting_;  // death moved last: it sees post-jump values
  std::vector<CDiffusion> diffusion_;
  std::vector<const AttributeLaw*> attr_laws_;
  std::vector<const FactorLaw*> factor_laws_;
  std::vector<CSampleEntry> sample_entries_;

  // workspace
  std::vector<double> attr_;
  std::vector<double> factor_level_;
  std::vector<std::vector<double>> paths_;
  std::vector<std::int64_t> jump_idx_;  // by counting slot; -1 none
  std::vector<double> last_sample_;
  std::vector<char> has_sample_;
  std::vector<std::vector<std::pair<double, double>>> samples_;
  std::vector<Rng> brownian_, jump_rng_, sample_rng_;
  std::vector<char> resolved_;
  std::vector<std::size_t> cursor_;
  std::int64_t death_idx_ = -1;
};

void Engine::compile() {
  const auto& procs = sys_.processes();
  auto compile_pred = [&](const LinearPredictor& pred, int owner_proc) {
    CPredictor out;
    for (std::size_t k = 0; k < pred.terms.size(); ++k) {
      const auto& term = pred.terms[k];
      if (term.coef == 0.0 && term.ref == TermRef::current) continue;
      CTerm ct;
      const int src = sys_.index_of(term.source);
      ct.slot = sys_.slot(src);
      switch (procs[src].kind) {
        case ProcessKind::counting: ct.src = Src::counting; break;
        case ProcessKind::diffusion: ct.src = Src::diffusion; break;
        case ProcessKind::attribute: ct.src = Src::attribute; break;
        case ProcessKind::external_factor: ct.src = Src::factor; break;
      }
      ct.coef = term.coef;
      if (term.threshold) {
        ct.thresholded = true;
        ct.threshold = *term.threshold;
      }
      if (term.ref == TermRef::sampled_last) {
        const auto& reg = sys_.sampled_terms();
        for (std::size_t r = 0; r < reg.size(); ++r) {
          if (reg[r].owner == owner_proc && reg[r].term == static_cast<int>(k))
            ct.sample_entry = static_cast<int>(r);
        }
      }
      out.terms.push_back(ct);
    }
    return out;
  };

  for (int ci : sys_.counting()) {
    if (ci == sys_.death_index()) continue;
    counting_.push_back(
        {ci, &procs[ci].intensity->baseline, compile_pred(procs[ci].intensity->predictor, ci)});
  }
  {
    const int di = sys_.death_index();
    counting_.push_back(
        {di, &procs[di].intensity->baseline, compile_pred(procs[di].intensity->predictor, di)});
  }
  for (int di : sys_.diffusions()) {
    const auto& dyn = *procs[di].dynamics;
    CDiffusion cd{di, &dyn.drift_baseline, compile_pred(dyn.predictor, di),
                  dyn.sigma, dyn.init_mean, dyn.init_sd, di == override_proc_};
    diffusion_.push_back(cd);
  }
  for (int ai : sys_.attributes()) attr_laws_.push_back(&*procs[ai].law);
  for (int fi : sys_.factors()) factor_laws_.push_back(&*procs[fi].factor);

  for (const auto& ref : sys_.sampled_terms()) {
    const auto& term = procs[ref.owner].intensity->predictor.terms[ref.term];
    CSampleEntry e;
    e.source_slot = sys_.slot(sys_.index_of(ref.source));
    e.noise_sd = term.sample.noise_sd;
    for (double u : term.sample.times) {
      const std::int64_t idx = std::llround(u / cfg_.step);
      if (idx >= 0 && idx <= m_) e.due.push_back(idx);
    }
    sample_entries_.push_back(std::move(e));
  }

  attr_.resize(attr_laws_.size());
  factor_level_.assign(factor_laws_.size(), 0.0);
  paths_.resize(diffusion_.size());
  jump_idx_.resize(sys_.counting().size());
  last_sample_.resize(sample_entries_.size());
  has_sample_.resize(sample_entries_.size());
  samples_.resize(sample_entries_.size());
  resolved_.resize(sys_.counting().size());
  cursor_.resize(sample_entries_.size());
}

double Engine::factor_at(int slot, double time) const {
  const int proc = sys_.factors()[slot];
  if (proc == override_proc_) return override_(time);
  const auto& law = *factor_laws_[slot];
  if (std::holds_alternative<RandomConstantFactor>(law)) return factor_level_[slot];
  return factor_value(law, time);
}

double Engine::term_value(const CTerm& t, double time, std::int64_t i, const char* overlay) const {
  double v = 0.0;
  if (t.sample_entry >= 0) {
    v = has_sample_[t.sample_entry] ? last_sample_[t.sample_entry] : 0.0;
  } else {
    switch (t.src) {
      case Src::counting: {
        const std::int64_t j = jump_idx_[t.slot];
        v = ((overlay && overlay[t.slot]) || (j >= 0 && j <= i)) ? 1.0 : 0.0;
        break;
      }
      case Src::diffusion: {
        const auto& cd = diffusion_[t.slot];
        v = cd.overridden ? override_(time) : paths_[t.slot][i];
        break;
      }
      case Src::attribute:
        v = attr_[t.slot];
        break;
      case Src::factor:
        v = factor_at(t.slot, time);
        break;
    }
  }
  if (t.thresholded) v = (v >= t.threshold) ? 1.0 : 0.0;
  return t.coef * v;
}

double Engine::predictor(const CPredictor& p, double time, std::int64_t i,
                         const char* overlay) const {
  double acc = 0.0;
  for (const auto& t : p.terms) acc += term_value(t, time, i, overlay);
  return acc;
}

void Engine::simulate(std::uint64_t master, std::int64_t subject) {
  const double h = cfg_.step;
  const double sqh = std::sqrt(h);

  Rng attr_rng(derive_seed(master, subject, stream::attributes));
  for (std::size_t a = 0; a < attr_laws_.size(); ++a) attr_[a] = draw_attr(*attr_laws_[a], attr_rng);

  Rng fac_rng(derive_seed(master, subject, stream::factor_level));
  for (std::size_t f = 0; f < factor_laws_.size(); ++f) {
    if (const auto* rc = std::get_if<RandomConstantFactor>(factor_laws_[f])) {
      if (sys_.factors()[f] != override_proc_) factor_level_[f] = draw_attr(rc->law, fac_rng);
    }
  }

  Rng init_rng(derive_seed(master, subject, stream::diffusion_init));
  brownian_.clear();
  for (std::size_t d = 0; d < diffusion_.size(); ++d) {
    paths_[d].clear();
    paths_[d].reserve(m_ + 1);
    const double y0 = diffusion_[d].init_mean + diffusion_[d].init_sd * init_rng.normal();
    paths_[d].push_back(diffusion_[d].overridden ? override_(0.0) : y0);
    brownian_.emplace_back(derive_seed(master, subject, stream::brownian + d));
  }

  jump_rng_.clear();
  for (std::size_t c = 0; c < jump_idx_.size(); ++c) {
    jump_idx_[c] = -1;
    jump_rng_.emplace_back(derive_seed(master, subject, stream::jumps + c));
  }
  sample_rng_.clear();
  for (std::size_t s = 0; s < sample_entries_.size(); ++s) {
    has_sample_[s] = 0;
    samples_[s].clear();
    sample_rng_.emplace_back(derive_seed(master, subject, stream::sampled_term + s));
  }
  death_idx_ = -1;
  std::fill(cursor_.begin(), cursor_.end(), 0);
  const int death_slot = sys_.slot(sys_.death_index());

  for (std::int64_t i = 0; i < m_; ++i) {
    const double t = i * h;

    // 1. realize scheduled noisy readings that have come due
    for (std::size_t s = 0; s < sample_entries_.size(); ++s) {
      auto& e = sample_entries_[s];
      while (cursor_[s] < e.due.size() && e.due[cursor_[s]] <= i) {
        const std::int64_t at = e.due[cursor_[s]];
        const auto& cd = diffusion_[e.source_slot];
        const double truth = cd.overridden ? override_(at * h) : paths_[e.source_slot][at];
        const double z = truth + e.noise_sd * sample_rng_[s].normal();
        last_sample_[s] = z;
        has_sample_[s] = 1;
        samples_[s].emplace_back(at * h, z);
        ++cursor_[s];
      }
    }

    // 2. jumps, death last (a same-step outcome jump is visible to death)
    std::fill(resolved_.begin(), resolved_.end(), 0);
    bool death_now = false;
    for (const auto& cc : counting_) {
      const int slot = sys_.slot(cc.proc);
      if (jump_idx_[slot] >= 0) continue;
      const double lam = baseline_value(*cc.baseline, t) *
                         std::exp(predictor(cc.pred, t, i, resolved_.data()));
      require(std::isfinite(lam), "NonFiniteState",
              "intensity of '" + sys_.process(cc.proc).name + "' is not finite");
      require(lam * h < 1.0, "StepTooCoarse",
              "hazard*step >= 1 for '" + sys_.process(cc.proc).name + "'; reduce the step");
      const double p = -std::expm1(-lam * h);
      if (jump_rng_[slot].uniform() < p) {
        resolved_[slot] = 1;
        jump_idx_[slot] = i + 1;
        if (slot == death_slot) death_now = true;
      }
    }

    // 3. Euler step from left-endpoint values (same-step jumps not visible)
    for (std::size_t d = 0; d < diffusion_.size(); ++d) {
      auto& cd = diffusion_[d];
      if (cd.overridden) {
        paths_[d].push_back(override_((i + 1) * h));
        continue;
      }
      const double drift = baseline_value(*cd.drift, t) + predictor(cd.pred, t, i, nullptr);
      const double y = paths_[d][i] + drift * h + cd.sigma * sqh * brownian_[d].normal();
      require(std::isfinite(y), "NonFiniteState",
              "diffusion '" + sys_.process(cd.proc).name + "' diverged");
      paths_[d].push_back(y);
    }

    if (death_now) {
      death_idx_ = i + 1;
      break;
    }
  }
}

Trajectory Engine::to_trajectory(std::int64_t subject) const {
  Trajectory tr;
  tr.subject_id = subject;
  tr.step = cfg_.step;
  tr.horizon = cfg_.horizon;
  if (death_idx_ >= 0) tr.death_time = death_idx_ * cfg_.step;

  for (std::size_t a = 0; a < attr_.size(); ++a)
    tr.attributes[sys_.process(sys_.attributes()[a]).name] = attr_[a];
  for (std::size_t c = 0; c < jump_idx_.size(); ++c) {
    if (jump_idx_[c] >= 0)
      tr.jump_times[sys_.process(sys_.counting()[c]).name] = jump_idx_[c] * cfg_.step;
  }
  const std::int64_t last = death_idx_ >= 0 ? death_idx_ : m_;
  for (std::size_t d = 0; d < diffusion_.size(); ++d) {
    auto& dst = tr.diffusion_paths[sys_.process(sys_.diffusions()[d]).name];
    dst.assign(paths_[d].begin(), paths_[d].begin() + last + 1);
  }
  for (std::size_t f = 0; f < factor_laws_.size(); ++f) {
    if (std::holds_alternative<RandomConstantFactor>(*factor_laws_[f])) {
      const int proc = sys_.factors()[f];
      tr.factor_levels[sys_.process(proc).name] =
          proc == override_proc_ ? override_(0.0) : factor_level_[f];
    }
  }
  const int fi = sys_.factor_index();
  if (fi >= 0) {
    tr.factor_path.reserve(last + 1);
    if (sys_.process(fi).kind == ProcessKind::diffusion) {
      const int slot = sys_.slot(fi);
      for (std::int64_t i = 0; i <= last; ++i) tr.factor_path.push_back(paths_[slot][i]);
    } else {
      const int slot = sys_.slot(fi);
      for (std::int64_t i = 0; i <= last; ++i)
        tr.factor_path.push_back(factor_at(slot, i * cfg_.step));
    }
  }
  tr.samples = samples_;
  return tr;
}

ValidatedSystem bind_if_needed(const ValidatedSystem& sys, const ParamSet& params,
                               ValidatedSystem& storage) {
  if (params.empty()) return sys;
  storage = bind_params(sys, params);
  return storage;
}

// Streams subjects through fn(engine) in subject order.
template <class Fn>
void stream_subjects(const ValidatedSystem& sys, const ParamSet& params, const SimConfig& cfg,
                     const std::optional<FactorPath>& v, std::int64_t n, std::uint64_t seed,
                     Fn&& fn) {
  ValidatedSystem storage;
  const ValidatedSystem& bound = bind_if_needed(sys, params, storage);
  Engine eng(bound, cfg, v);
  for (std::int64_t i = 0; i < n; ++i) {
    eng.simulate(seed, i);
    fn(eng, i);
  }
}

int require_binary_outcome(const ValidatedSystem& sys) {
  const int oi = sys.outcome_index();
  require(oi >= 0 && sys.process(oi).kind == ProcessKind::counting, "NotBinaryY",
          "operation needs a binary (counting) outcome role");
  return oi;
}

int require_quant_outcome(const ValidatedSystem& sys) {
  const int oi = sys.outcome_index();
  require(oi >= 0 && sys.process(oi).kind == ProcessKind::diffusion,
          "KindIncompatibleWithStateSpace", "operation needs a quantitative (diffusion) outcome");
  return oi;
}

struct Welford {
  std::int64_t n = 0;
  double mean = 0.0, m2 = 0.0;
  void add(double x) {
    ++n;
    const double d = x - mean;
    mean += d / n;
    m2 += d * (x - mean);
  }
  double se() const { return n > 1 ? std::sqrt(m2 / (double(n) * (n - 1))) : 0.0; }
};

double prop_se(double p, std::int64_t n) { return std::sqrt(p * (1.0 - p) / n); }

}  // namespace

void validate_sim_config(const SimConfig& cfg) {
  require(cfg.n_subjects >= 1, "InvalidConfig", "n_subjects must be >= 1");
  require(cfg.step > 0.0 && cfg.horizon > 0.0, "InvalidConfig", "step and horizon must be > 0");
  require(cfg.step <= cfg.horizon, "InvalidConfig", "step must not exceed the horizon");
  grid_steps(cfg);
}

Trajectory simulate_subject(const ValidatedSystem& sys, const ParamSet& params,
                            const SimConfig& cfg, std::int64_t subject_index,
                            const std::optional<FactorPath>& factor_override) {
  validate_sim_config(cfg);
  ValidatedSystem storage;
  const ValidatedSystem& bound = bind_if_needed(sys, params, storage);
  Engine eng(bound, cfg, factor_override);
  eng.simulate(cfg.master_seed, subject_index);
  return eng.to_trajectory(subject_index);
}

Population simulate_population(const ValidatedSystem& sys, const ParamSet& params,
                               const SimConfig& cfg, int workers) {
  validate_sim_config(cfg);
  auto shared = std::make_shared<ValidatedSystem>(params.empty() ? sys : bind_params(sys, params));
  Population pop;
  pop.system = shared;
  pop.step = cfg.step;
  pop.horizon = cfg.horizon;
  pop.master_seed = cfg.master_seed;
  pop.subjects.resize(cfg.n_subjects);
  // Per-subject streams make the result independent of the partition.
  const std::int64_t n = cfg.n_subjects;
  const int w = std::max(1, workers);
  const std::int64_t chunk = (n + w - 1) / w;
  parallel_for(static_cast<std::size_t>(w), w, [&](std::size_t k) {
    const std::int64_t lo = k * chunk, hi = std::min<std::int64_t>(n, lo + chunk);
    if (lo >= hi) return;
    Engine eng(*shared, cfg, std::nullopt);
    for (std::int64_t i = lo; i < hi; ++i) {
      eng.simulate(cfg.master_seed, i);
      pop.subjects[i] = eng.to_trajectory(i);
    }
  });
  return pop;
}

std::vector<OccupancyRow> occupation_probabilities(
    const ValidatedSystem& sys, const ParamSet& params, const SimConfig& cfg,
    const std::optional<FactorPath>& v, const std::vector<double>& t_grid, std::int64_t n_mc,
    std::uint64_t seed) {
  validate_sim_config(cfg);
  require(n_mc >= 1, "InvalidConfig", "n_mc must be >= 1");
  std::vector<std::int64_t> idx;
  for (double t : t_grid) {
    require(t <= cfg.horizon + kGridTol, "InvalidConfig", "t_grid beyond the horizon");
    idx.push_back(grid_index(t, cfg.step));
  }
  std::vector<std::int64_t> c_ill(t_grid.size(), 0), c_dead(t_grid.size(), 0);
  const int outcome_slot = sys.slot(require_binary_outcome(sys));
  stream_subjects(sys, params, cfg, v, n_mc, seed, [&](const Engine& eng, std::int64_t) {
    const std::int64_t jy = eng.jump_index(outcome_slot);
    for (std::size_t k = 0; k < idx.size(); ++k) {
      if (eng.dead_at_index(idx[k]))
        ++c_dead[k];
      else if (jy >= 0 && jy <= idx[k])
        ++c_ill[k];
    }
  });
  std::vector<OccupancyRow> out;
  for (std::size_t k = 0; k < t_grid.size(); ++k) {
    OccupancyRow row;
    row.t = t_grid[k];
    row.ill = double(c_ill[k]) / n_mc;
    row.dead = double(c_dead[k]) / n_mc;
    // complement, so the three entries sum to exactly 1.0
    row.healthy = 1.0 - row.ill - row.dead;
    row.se_healthy = prop_se(row.healthy, n_mc);
    row.se_ill = prop_se(row.ill, n_mc);
    row.se_dead = prop_se(row.dead, n_mc);
    out.push_back(row);
  }
  return out;
}

std::vector<AliveMeanRow> mean_outcome_alive(
    const ValidatedSystem& sys, const ParamSet& params, const SimConfig& cfg,
    const std::optional<FactorPath>& v, const std::vector<double>& t_grid, std::int64_t n_mc,
    std::uint64_t seed) {
  validate_sim_config(cfg);
  require(n_mc >= 1, "InvalidConfig", "n_mc must be >= 1");
  std::vector<std::int64_t> idx;
  for (double t : t_grid) {
    require(t <= cfg.horizon + kGridTol, "InvalidConfig", "t_grid beyond the horizon");
    idx.push_back(grid_index(t, cfg.step));
  }
  std::vector<Welford> acc(t_grid.size());
  const int outcome_slot = sys.slot(require_quant_outcome(sys));
  stream_subjects(sys, params, cfg, v, n_mc, seed, [&](const Engine& eng, std::int64_t) {
    for (std::size_t k = 0; k < idx.size(); ++k) {
      if (!eng.dead_at_index(idx[k])) acc[k].add(eng.path_at(outcome_slot, idx[k]));
    }
  });
  std::vector<AliveMeanRow> out;
  for (std::size_t k = 0; k < t_grid.size(); ++k) {
    AliveMeanRow row;
    row.t = t_grid[k];
    row.n_alive = acc[k].n;
    row.defined = acc[k].n > 0;
    row.mean = row.defined ? acc[k].mean : std::numeric_limits<double>::quiet_NaN();
    row.se = acc[k].se();
    out.push_back(row);
  }
  return out;
}

const char* to_string(Preference p) {
  switch (p) {
    case Preference::v1_preferable: return "v1_preferable";
    case Preference::v2_preferable: return "v2_preferable";
    case Preference::incomparable: return "incomparable";
    case Preference::indistinguishable: return "indistinguishable";
  }
  return "?";
}

PreferenceReport preferable(const ValidatedSystem& sys, const ParamSet& params,
                            const SimConfig& cfg, const FactorPath& v1, const FactorPath& v2,
                            const std::vector<double>& t_grid, std::int64_t n_mc,
                            std::uint64_t seed, double z_threshold) {
  validate_sim_config(cfg);
  ValidatedSystem storage;
  const ValidatedSystem& bound = bind_if_needed(sys, params, storage);
  const int oi = bound.outcome_index();
  require(oi >= 0, "UnknownReference", "preferable needs an outcome role");
  require(bound.factor_index() >= 0, "UnknownReference", "preferable needs a factor role");
  const bool quant = bound.process(oi).kind == ProcessKind::diffusion;
  const int oslot = bound.slot(oi);

  PreferenceReport rep;
  const std::string vname = bound.process(bound.factor_index()).name;
  for (const std::string& target : {std::string(kDeathName), bound.process(oi).name}) {
    if (vname == target) continue;
    const NucVerdict nv = is_nuc(bound, vname, target);
    if (nv.status == NucStatus::confounded)
      rep.warnings.push_back("(" + vname + ", " + target + ") confounded by latent '" +
                             nv.confounder + "'");
    else if (nv.status == NucStatus::perfect_unknown)
      rep.warnings.push_back("(" + vname + ", " + target + "): factor is latent, no-confounding "
                             "status unknown");
  }

  std::vector<std::int64_t> idx;
  for (double t : t_grid) {
    require(t <= cfg.horizon + kGridTol, "InvalidConfig", "t_grid beyond the horizon");
    idx.push_back(grid_index(t, cfg.step));
  }

  const std::size_t K = idx.size();
  std::vector<std::int64_t> dead1(K, 0), dead2(K, 0), ill1(K, 0), ill2(K, 0);
  std::vector<Welford> out1(K), out2(K);

  // Common random numbers: both arms replay the same subject streams.
  Engine e1(bound, cfg, v1);
  Engine e2(bound, cfg, v2);
  for (std::int64_t i = 0; i < n_mc; ++i) {
    e1.simulate(seed, i);
    e2.simulate(seed, i);
    for (std::size_t k = 0; k < K; ++k) {
      const bool d1 = e1.dead_at_index(idx[k]);
      const bool d2 = e2.dead_at_index(idx[k]);
      if (d1) ++dead1[k];
      if (d2) ++dead2[k];
      if (quant) {
        if (!d1) out1[k].add(e1.path_at(oslot, idx[k]));
        if (!d2) out2[k].add(e2.path_at(oslot, idx[k]));
      } else {
        const std::int64_t j1 = e1.jump_index(oslot), j2 = e2.jump_index(oslot);
        if (!d1 && j1 >= 0 && j1 <= idx[k]) ++ill1[k];
        if (!d2 && j2 >= 0 && j2 <= idx[k]) ++ill2[k];
      }
    }
  }

  bool favor1 = false, favor2 = false;
  auto judge = [&](double a, double b, double se) {
    const double d = a - b;
    if (d == 0.0) return;
    const double z = se > 0.0 ? d / se : (d < 0 ? -1e30 : 1e30);
    if (z < -z_threshold) favor1 = true;
    if (z > z_threshold) favor2 = true;
  };

  for (std::size_t k = 0; k < K; ++k) {
    PreferenceRow row;
    row.t = t_grid[k];
    row.dead1 = double(dead1[k]) / n_mc;
    row.dead2 = double(dead2[k]) / n_mc;
    row.se_dead = std::sqrt(prop_se(row.dead1, n_mc) * prop_se(row.dead1, n_mc) +
                            prop_se(row.dead2, n_mc) * prop_se(row.dead2, n_mc));
    if (quant) {
      row.outcome_defined = out1[k].n > 0 && out2[k].n > 0;
      row.outcome1 = out1[k].n ? out1[k].mean : std::numeric_limits<double>::quiet_NaN();
      row.outcome2 = out2[k].n ? out2[k].mean : std::numeric_limits<double>::quiet_NaN();
      row.se_outcome = std::sqrt(out1[k].se() * out1[k].se() + out2[k].se() * out2[k].se());
    } else {
      row.outcome1 = double(ill1[k]) / n_mc;
      row.outcome2 = double(ill2[k]) / n_mc;
      row.se_outcome = std::sqrt(prop_se(row.outcome1, n_mc) * prop_se(row.outcome1, n_mc) +
                                 prop_se(row.outcome2, n_mc) * prop_se(row.outcome2, n_mc));
    }
    judge(row.dead1, row.dead2, row.se_dead);
    if (row.outcome_defined) judge(row.outcome1, row.outcome2, row.se_outcome);
    rep.rows.push_back(row);
  }

  if (favor1 && favor2)
    rep.verdict = Preference::incomparable;
  else if (favor1)
    rep.verdict = Preference::v1_preferable;
  else if (favor2)
    rep.verdict = Preference::v2_preferable;
  else
    rep.verdict = Preference::indistinguishable;
  return rep;
}

std::vector<ContrastRow> contrast(const ValidatedSystem& sys, const ParamSet& params,
                                  const SimConfig& cfg, const FactorPath& v1,
                                  const FactorPath& v2, ContrastKind kind,
                                  const std::vector<double>& t_grid, std::int64_t n_mc,
                                  std::uint64_t seed) {
  validate_sim_config(cfg);
  ValidatedSystem storage;
  const ValidatedSystem& bound = bind_if_needed(sys, params, storage);
  require(bound.factor_index() >= 0, "UnknownReference", "contrast needs a factor role");
  const std::string vname = bound.process(bound.factor_index()).name;

  auto factor_coef = [&](const LinearPredictor& pred) {
    double c = 0.0;
    for (const auto& term : pred.terms)
      if (term.source == vname && term.ref == TermRef::current && !term.threshold) c += term.coef;
    return c;
  };

  std::vector<ContrastRow> out;
  if (kind == ContrastKind::hazard_ratio) {
    const double g2 = factor_coef(bound.process(bound.death_index()).intensity->predictor);
    for (double t : t_grid) out.push_back({t, std::exp(g2 * (v2(t) - v1(t))), 0.0, true});
    return out;
  }
  if (kind == ContrastKind::drift_difference) {
    const int oi = require_quant_outcome(bound);
    const double b2 = factor_coef(bound.process(oi).dynamics->predictor);
    for (double t : t_grid) out.push_back({t, b2 * (v2(t) - v1(t)), 0.0, true});
    return out;
  }

  // Monte Carlo marginal contrasts (common random numbers across arms).
  std::vector<std::int64_t> idx;
  for (double t : t_grid) {
    require(t <= cfg.horizon + kGridTol, "InvalidConfig", "t_grid beyond the horizon");
    idx.push_back(grid_index(t, cfg.step));
  }
  const std::size_t K = idx.size();
  if (kind == ContrastKind::survival_difference) {
    std::vector<std::int64_t> dead1(K, 0), dead2(K, 0);
    Engine e1(bound, cfg, v1);
    Engine e2(bound, cfg, v2);
    for (std::int64_t i = 0; i < n_mc; ++i) {
      e1.simulate(seed, i);
      e2.simulate(seed, i);
      for (std::size_t k = 0; k < K; ++k) {
        if (e1.dead_at_index(idx[k])) ++dead1[k];
        if (e2.dead_at_index(idx[k])) ++dead2[k];
      }
    }
    for (std::size_t k = 0; k < K; ++k) {
      const double s1 = 1.0 - double(dead1[k]) / n_mc;
      const double s2 = 1.0 - double(dead2[k]) / n_mc;
      const double se = std::sqrt(prop_se(s1, n_mc) * prop_se(s1, n_mc) +
                                  prop_se(s2, n_mc) * prop_se(s2, n_mc));
      out.push_back({t_grid[k], s1 - s2, se, true});
    }
    return out;
  }

  // mean_difference
  const int oi = require_quant_outcome(bound);
  const int oslot = bound.slot(oi);
  std::vector<Welford> m1(K), m2(K);
  Engine e1(bound, cfg, v1);
  Engine e2(bound, cfg, v2);
  for (std::int64_t i = 0; i < n_mc; ++i) {
    e1.simulate(seed, i);
    e2.simulate(seed, i);
    for (std::size_t k = 0; k < K; ++k) {
      if (!e1.dead_at_index(idx[k])) m1[k].add(e1.path_at(oslot, idx[k]));
      if (!e2.dead_at_index(idx[k])) m2[k].add(e2.path_at(oslot, idx[k]));
    }
  }
  for (std::size_t k = 0; k < K; ++k) {
    ContrastRow row;
    row.t = t_grid[k];
    row.defined = m1[k].n > 0 && m2[k].n > 0;
    row.value = row.defined ? m1[k].mean - m2[k].mean : std::numeric_limits<double>::quiet_NaN();
    row.se = std::sqrt(m1[k].se() * m1[k].se() + m2[k].se() * m2[k].se());
    out.push_back(row);
  }
  return out;
}

}  // namespace horizon
