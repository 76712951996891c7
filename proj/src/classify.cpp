#include "horizon/classify.hpp"

#include <algorithm>

namespace horizon {

namespace {

struct Inputs {
  std::set<RuleInput> set;
  bool death_truncated = false;
  std::string unknown;  // first unrecognized token, if any
};

Inputs collect_inputs(const ChannelSpec& spec, const InfluenceGraph& graph) {
  Inputs in;
  in.death_truncated = spec.rip.death_truncated;

  auto add_visits = [&](const VisitRule& visits) {
    if (std::holds_alternative<DoctorCareVisits>(visits)) in.set.insert(RuleInput::observed_history);
    if (std::holds_alternative<OutcomeDependentVisits>(visits)) in.set.insert(RuleInput::true_latent);
  };
  if (const auto* d = std::get_if<DiscreteRip>(&spec.rip.base)) add_visits(d->visits);
  if (const auto* dr = std::get_if<DropoutRip>(&spec.rip.base)) {
    add_visits(dr->visits);
    for (const auto& term : dr->terms) {
      RuleInput input = term.input;
      // a rule reading a latent attribute reads something unobservable
      if (input == RuleInput::attributes) {
        auto it = graph.latent.find(term.source);
        if (it != graph.latent.end() && it->second) input = RuleInput::true_latent;
      }
      in.set.insert(input);
    }
  }
  for (const auto& tok : spec.rip.extra_inputs) {
    if (tok == "observed_history") in.set.insert(RuleInput::observed_history);
    else if (tok == "true_latent") in.set.insert(RuleInput::true_latent);
    else if (tok == "attributes") in.set.insert(RuleInput::attributes);
    else if (tok == "death_status") in.death_truncated = true;
    else if (in.unknown.empty()) in.unknown = tok;
  }
  return in;
}

bool subset_of(const std::set<RuleInput>& s, std::initializer_list<RuleInput> allowed) {
  return std::all_of(s.begin(), s.end(), [&](RuleInput r) {
    return std::find(allowed.begin(), allowed.end(), r) != allowed.end();
  });
}

bool any_latent_into_death(const InfluenceGraph& g) {
  for (const auto& e : g.edges) {
    if (e.to == kDeathName && g.latent.at(e.from)) return true;
  }
  return false;
}

CarVerdict classify_channel(const std::string& process, const ChannelSpec& spec,
                            const InfluenceGraph& graph) {
  const Inputs in = collect_inputs(spec, graph);
  if (!in.unknown.empty())
    return {CarStatus::fails, "undeclared input '" + in.unknown + "'"};

  // a rule reading the true latent state is non-ignorable regardless of death
  if (in.set.count(RuleInput::true_latent))
    return {CarStatus::fails, "rule reads the true latent state (outcome-dependent)"};

  const ProcessKind kind = graph.kind.at(process);
  const bool continuous = std::holds_alternative<ContinuousRip>(spec.rip.base);

  if (!in.death_truncated) {
    if (in.set.empty())
      return {CarStatus::holds, "response mechanism independent of the system"};
    if (subset_of(in.set, {RuleInput::observed_history, RuleInput::attributes}))
      return {CarStatus::holds, "doctor's care: reads only the observed past"};
    return {CarStatus::fails, "unrecognized input combination"};
  }

  // death-truncated channels
  if (!subset_of(in.set, {RuleInput::observed_history, RuleInput::attributes}))
    return {CarStatus::fails, "unrecognized input combination"};

  if (kind == ProcessKind::attribute)
    return {CarStatus::holds, "baseline attribute recorded before any truncation"};

  const bool extra_censor = [&] {
    const auto* c = std::get_if<ContinuousRip>(&spec.rip.base);
    return c && (c->admin_censor || c->random_censor_rate);
  }();

  if (kind == ProcessKind::counting) {
    if (continuous) {
      if (extra_censor)
        return {CarStatus::holds_if, "non-death censoring is independent of the system"};
      return {CarStatus::holds, "censoring comes only from death"};
    }
    // interval-censored status: death is informative when it reads the
    // process or anything unobserved
    if (graph.has_edge(process, kDeathName) && !graph.edge_only_via_observed(process, kDeathName))
      return {CarStatus::fails, "death reads the true process state between visits"};
    if (any_latent_into_death(graph))
      return {CarStatus::fails, "a latent process drives death"};
    return {CarStatus::holds, "death carries no information beyond the observed past"};
  }

  // quantitative (diffusion) or time-varying factor
  if (continuous)
    return {CarStatus::holds, "the full past is observed up to death"};
  if (any_latent_into_death(graph))
    return {CarStatus::fails, "a latent process drives death"};
  if (graph.has_edge(process, kDeathName)) {
    if (graph.edge_only_via_observed(process, kDeathName))
      return {CarStatus::holds, "death reads the process only through recorded readings"};
    return {CarStatus::fails, "death reads the true process value between visits"};
  }
  return {CarStatus::holds, "death carries no information beyond the observed past"};
}

}  // namespace

std::string to_string(const CarVerdict& v) {
  switch (v.status) {
    case CarStatus::holds: return "holds (" + v.detail + ")";
    case CarStatus::fails: return "fails (" + v.detail + ")";
    case CarStatus::holds_if: return "holds_if (" + v.detail + ")";
  }
  return "?";
}

std::map<std::string, CarVerdict> classify_car(const ObservationScheme& scheme,
                                               const InfluenceGraph& graph) {
  std::map<std::string, CarVerdict> out;
  for (const auto& [name, spec] : scheme.channels) {
    require(graph.kind.count(spec.process) != 0, "ChannelUnmapped",
            "channel '" + name + "' maps to unknown process '" + spec.process + "'");
    if (spec.process == kDeathName) {
      // the death channel records the truncating process itself; censoring
      // independence is the only condition
      const auto* c = std::get_if<ContinuousRip>(&spec.rip.base);
      if (c && (c->admin_censor || c->random_censor_rate))
        out[name] = {CarStatus::holds_if, "censoring of death is independent of the system"};
      else
        out[name] = {CarStatus::holds, "death fully observed"};
      continue;
    }
    out[name] = classify_channel(spec.process, spec, graph);
  }
  return out;
}

}  // namespace horizon
