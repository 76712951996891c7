#include "horizon/graph.hpp"

#include <algorithm>
#include <sstream>

namespace horizon {

bool InfluenceGraph::has_edge(const std::string& from, const std::string& to) const {
  return std::any_of(edges.begin(), edges.end(),
                     [&](const Edge& e) { return e.from == from && e.to == to; });
}

bool InfluenceGraph::edge_only_via_observed(const std::string& from, const std::string& to) const {
  bool any = false;
  for (const auto& e : edges) {
    if (e.from == from && e.to == to) {
      any = true;
      if (!e.via_observed) return false;
    }
  }
  return any;
}

InfluenceGraph influence_graph(const ValidatedSystem& sys) {
  InfluenceGraph g;
  for (const auto& d : sys.processes()) {
    g.nodes.push_back(d.name);
    g.kind[d.name] = d.kind;
    g.latent[d.name] = d.latent;
  }
  std::sort(g.nodes.begin(), g.nodes.end());

  // (from, to) -> flags: seen current-value edge / seen sampled edge
  std::map<std::pair<std::string, std::string>, std::pair<bool, bool>> seen;
  auto scan = [&](const LinearPredictor& pred, const std::string& to) {
    for (const auto& t : pred.terms) {
      if (t.coef == 0.0) continue;
      auto& flags = seen[{t.source, to}];
      (t.ref == TermRef::sampled_last ? flags.second : flags.first) = true;
    }
  };
  for (const auto& d : sys.processes()) {
    if (d.intensity) scan(d.intensity->predictor, d.name);
    if (d.dynamics) scan(d.dynamics->predictor, d.name);
  }
  for (const auto& [key, flags] : seen) {
    // Collapse parallel edges; via_observed survives only if no direct edge.
    g.edges.push_back({key.first, key.second, flags.second && !flags.first});
  }
  return g;
}

std::string to_dot(const InfluenceGraph& g) {
  std::ostringstream out;
  out << "digraph influence {\n  rankdir=LR;\n";
  for (const auto& n : g.nodes) {
    out << "  \"" << n << "\" [";
    if (n == kDeathName) {
      out << "label=\"" << n << " *\", shape=doublecircle";
    } else if (g.kind.at(n) == ProcessKind::attribute) {
      out << "shape=box";
    } else if (g.kind.at(n) == ProcessKind::external_factor) {
      out << "shape=hexagon";
    } else {
      out << "shape=ellipse";
    }
    if (g.latent.at(n)) out << ", style=dashed";
    out << "];\n";
  }
  for (const auto& e : g.edges) {
    out << "  \"" << e.from << "\" -> \"" << e.to << "\"";
    if (e.via_observed) out << " [style=dotted, label=\"sampled\"]";
    out << ";\n";
  }
  out << "}\n";
  return out.str();
}

NucVerdict is_nuc(const ValidatedSystem& sys, const std::string& factor,
                  const std::string& target) {
  const int fi = sys.index_of(factor);
  const int ti = sys.index_of(target);
  require(fi >= 0, "UnknownReference", "no process named '" + factor + "'");
  require(ti >= 0, "UnknownReference", "no process named '" + target + "'");
  require(sys.process(ti).kind != ProcessKind::attribute, "TargetIsAttribute",
          "attributes are frozen at time zero and cannot be influence targets");

  if (sys.process(fi).latent) return {NucStatus::perfect_unknown, ""};

  const InfluenceGraph g = influence_graph(sys);
  for (const auto& n : g.nodes) {  // sorted: first confounder by name wins
    if (n == factor || n == target || !g.latent.at(n)) continue;
    if (g.has_edge(n, target) && g.has_edge(n, factor)) return {NucStatus::confounded, n};
  }
  return {NucStatus::nuc, ""};
}

}  // namespace horizon
