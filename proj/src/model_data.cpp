#include "horizon/model_data.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "horizon/common.hpp"
#include "horizon/quadrature.hpp"

namespace horizon {

double PreparedSubject::v_at(double t) const {
  if (!has_v) return 0.0;
  if (v_constant || t <= v_t.front()) return v_x.front();
  if (t >= v_t.back()) return v_x.back();
  const auto it = std::upper_bound(v_t.begin(), v_t.end(), t);
  const std::size_t k = static_cast<std::size_t>(it - v_t.begin());
  const double w = (t - v_t[k - 1]) / (v_t[k] - v_t[k - 1]);
  return v_x[k - 1] + w * (v_x[k] - v_x[k - 1]);
}

double PreparedSubject::v_integral(double t) const {
  if (!has_v) return 0.0;
  if (v_constant) return v_x.front() * t;
  if (t <= v_t.front()) return v_x.front() * t;  // flat before the first knot
  if (t >= v_t.back()) return v_cum.back() + v_x.back() * (t - v_t.back());
  const auto it = std::upper_bound(v_t.begin(), v_t.end(), t);
  const std::size_t k = static_cast<std::size_t>(it - v_t.begin());
  const double dt = t - v_t[k - 1];
  const double vt = v_at(t);
  return v_cum[k - 1] + 0.5 * (v_x[k - 1] + vt) * dt;
}

namespace {

struct SubjectIndex {
  std::map<std::int64_t, std::size_t> pos;
  std::size_t at(std::vector<PreparedSubject>& subs, std::int64_t id) {
    auto it = pos.find(id);
    if (it != pos.end()) return it->second;
    const std::size_t k = subs.size();
    subs.emplace_back();
    subs.back().id = id;
    pos.emplace(id, k);
    return k;
  }
};

int path_slot(std::vector<double>& path_t, double t) {
  const auto it = std::lower_bound(path_t.begin(), path_t.end(), t);
  if (it != path_t.end() && *it == t) return static_cast<int>(it - path_t.begin());
  return static_cast<int>(path_t.insert(it, t) - path_t.begin());
}

}  // namespace

PreparedData prepare(const ModelSpec& model, const Dataset& data) {
  PreparedData out;
  SubjectIndex idx;
  const auto& ch = model.channels;

  require(model.channels.ordinal.size() == model.ordinal_levels.size(), "InvalidConfig",
          "ordinal_levels must parallel the ordinal channel list");
  for (int q : model.ordinal_levels)
    require(q >= 2, "InvalidConfig", "ordinal channel needs at least two levels");

  const bool wants_event =
      model.family == Family::illness_death_interval || model.family == Family::naive_survival_only;
  const bool wants_long = model.family == Family::joint_quantitative_shared_effect ||
                          model.family == Family::naive_mixed_longitudinal;
  if (wants_event)
    require(!ch.event.empty(), "IncompatibleChannels", "event family needs an event channel");
  if (wants_long)
    require(!ch.longitudinal.empty() || !ch.ordinal.empty() || !ch.binary.empty(),
            "IncompatibleChannels", "longitudinal family needs a measurement channel");
  if (model.family == Family::naive_mixed_longitudinal)
    require(ch.ordinal.empty() && ch.binary.empty(), "IncompatibleChannels",
            "naive mixed model reads the additive-noise channel only");
  if (model.family != Family::joint_quantitative_shared_effect)
    require(ch.ordinal.empty() && ch.binary.empty(), "IncompatibleChannels",
            "threshold channels belong to the joint family");
  if (wants_event)
    require(ch.longitudinal.empty(), "IncompatibleChannels",
            "event families do not read longitudinal channels");

  for (const auto& r : data.longitudinal) {
    const std::size_t k = idx.at(out.subjects, r.subject);
    auto& s = out.subjects[k];
    if (!ch.attribute.empty() && r.channel == ch.attribute) {
      s.g = r.value;
      s.has_g = true;
    } else if (!ch.factor.empty() && r.channel == ch.factor) {
      s.has_v = true;
      s.v_t.push_back(r.time);
      s.v_x.push_back(r.value);
    } else if (!ch.longitudinal.empty() && r.channel == ch.longitudinal) {
      s.zt.push_back(r.time);
      s.z.push_back(r.value);
    } else if (!ch.binary.empty() && r.channel == ch.binary) {
      s.binary.t.push_back(r.time);
      s.binary.level.push_back(static_cast<int>(std::lround(r.value)));
    } else {
      for (std::size_t c = 0; c < ch.ordinal.size(); ++c) {
        if (r.channel == ch.ordinal[c]) {
          if (s.ordinal.empty()) s.ordinal.resize(ch.ordinal.size());
          s.ordinal[c].t.push_back(r.time);
          s.ordinal[c].level.push_back(static_cast<int>(std::lround(r.value)));
          break;
        }
      }
    }
  }

  if (!ch.event.empty()) {
    for (const auto& e : data.events) {
      if (e.channel != ch.event) continue;
      const std::size_t k = idx.at(out.subjects, e.subject);
      auto& s = out.subjects[k];
      switch (e.status) {
        case EventStatus::observed_jump:
          s.event = PreparedSubject::Event::exact;
          s.ev_exact = e.exit;
          break;
        case EventStatus::interval:
          s.event = PreparedSubject::Event::interval;
          s.ev_left = e.left;
          s.ev_right = e.right;
          break;
        case EventStatus::right_censored:
          s.event = PreparedSubject::Event::censored;
          s.ev_censor = e.exit;
          break;
      }
    }
  }

  const bool wants_death =
      model.family == Family::illness_death_interval || model.family == Family::joint_quantitative_shared_effect;
  for (const auto& d : data.deaths) {
    const auto it = idx.pos.find(d.subject);
    if (it == idx.pos.end()) continue;  // subject contributed no bound records
    auto& s = out.subjects[it->second];
    s.has_death = true;
    s.death_time = d.time;
    s.death_observed = d.observed;
  }

  out.any_threshold = !ch.ordinal.empty() || !ch.binary.empty();

  for (auto& s : out.subjects) {
    if (s.ordinal.empty() && !ch.ordinal.empty()) s.ordinal.resize(ch.ordinal.size());
    if (s.has_v) {
      if (s.v_t.size() >= 2) {
        s.v_constant = false;
        for (std::size_t k = 1; k < s.v_t.size(); ++k)
          require(s.v_t[k] > s.v_t[k - 1], "InvalidConfig", "factor records out of order");
        s.v_cum.assign(s.v_t.size(), 0.0);
        double acc = s.v_x.front() * s.v_t.front();  // flat from 0 to first knot
        s.v_cum[0] = acc;
        for (std::size_t k = 1; k < s.v_t.size(); ++k) {
          acc += 0.5 * (s.v_x[k - 1] + s.v_x[k]) * (s.v_t[k] - s.v_t[k - 1]);
          s.v_cum[k] = acc;
        }
      }
    }
    if (wants_event)
      require(s.event != PreparedSubject::Event::none, "IncompatibleChannels",
              "subject has no record on the bound event channel");
    if (model.family == Family::illness_death_interval)
      require(s.has_death, "IncompatibleChannels", "illness-death family needs death records");
    if (wants_death && s.has_death) {
      if (s.event == PreparedSubject::Event::exact)
        require(s.ev_exact <= s.death_time + 1e-9, "InvalidConfig",
                "event time beyond censored death time");
    }
    if (!ch.attribute.empty())
      require(s.has_g, "IncompatibleChannels", "subject missing bound attribute record");
    if (!ch.factor.empty())
      require(s.has_v, "IncompatibleChannels", "subject missing bound factor records");

    if (out.any_threshold) {
      // latent path support: every visit of every path-valued channel
      s.ord_slot.resize(s.ordinal.size());
      for (std::size_t c = 0; c < s.ordinal.size(); ++c)
        for (double t : s.ordinal[c].t) path_slot(s.path_t, t);
      for (double t : s.binary.t) path_slot(s.path_t, t);
      for (double t : s.zt) path_slot(s.path_t, t);
      for (std::size_t c = 0; c < s.ordinal.size(); ++c)
        for (double t : s.ordinal[c].t) s.ord_slot[c].push_back(path_slot(s.path_t, t));
      for (double t : s.binary.t) s.bin_slot.push_back(path_slot(s.path_t, t));
      for (double t : s.zt) s.z_slot.push_back(path_slot(s.path_t, t));
      out.max_path_dim = std::max(out.max_path_dim, s.path_t.size());
    }
  }

  if (out.any_threshold && out.max_path_dim > 0) {
    require(model.qmc.draws > 0, "InvalidConfig", "threshold channels need qmc draws > 0");
    require(out.max_path_dim <= 32, "InvalidConfig",
            "latent-path dimension above 32; thin the threshold-channel visit plan");
    ScrambledHalton seq(static_cast<int>(out.max_path_dim), model.qmc.seed);
    out.qmc_normals.assign(static_cast<std::size_t>(model.qmc.draws),
                           std::vector<double>(out.max_path_dim, 0.0));
    std::vector<double> u(out.max_path_dim);
    for (int r = 0; r < model.qmc.draws; ++r) {
      seq.point(r, u);
      for (std::size_t d = 0; d < out.max_path_dim; ++d)
        out.qmc_normals[static_cast<std::size_t>(r)][d] = inverse_normal_cdf(u[d]);
    }
  }

  for (const auto& [channel, verdict] : data.car_verdicts) {
    if (verdict.rfind("fails", 0) == 0)
      out.car_warnings.push_back("channel '" + channel + "' classified " + verdict +
                                 ": likelihood treats the observation plan as fixed");
  }
  return out;
}

}  // namespace horizon
