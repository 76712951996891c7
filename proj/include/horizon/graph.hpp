#pragma once

#include <map>
#include <string>
#include <vector>

#include "horizon/system.hpp"

namespace horizon {

// Direct-influence graph: edge a -> b iff b's intensity or drift carries a
// term in a with nonzero coefficient.  via_observed marks edges realized
// through noisy sampled readings rather than the current true value; that
// distinction is what separates observable from unobservable feedback when
// classifying observation schemes.

struct Edge {
  std::string from, to;
  bool via_observed = false;
};

struct InfluenceGraph {
  // Nodes sorted by name: two systems equal up to declaration order produce
  // identical graphs.
  std::vector<std::string> nodes;
  std::map<std::string, ProcessKind> kind;
  std::map<std::string, bool> latent;
  std::vector<Edge> edges;  // sorted by (from, to)

  bool has_edge(const std::string& from, const std::string& to) const;
  // True only if every from->to influence goes through sampled readings.
  bool edge_only_via_observed(const std::string& from, const std::string& to) const;
};

InfluenceGraph influence_graph(const ValidatedSystem& sys);

// Graphviz rendering; death gets a star badge, attributes are boxes, latent
// nodes are dashed.  Output is deterministic.
std::string to_dot(const InfluenceGraph& g);

// --- no-unmeasured-confounders check ----------------------------------------

enum class NucStatus { nuc, confounded, perfect_unknown };

struct NucVerdict {
  NucStatus status = NucStatus::nuc;
  std::string confounder;  // set when status == confounded
};

// Is `factor`'s influence on `target` free of unmeasured confounding?  A latent
// node with edges into both spoils it; a latent factor itself cannot be judged.
NucVerdict is_nuc(const ValidatedSystem& sys, const std::string& factor,
                  const std::string& target);

}  // namespace horizon
