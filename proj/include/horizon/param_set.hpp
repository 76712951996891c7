#pragma once

#include <map>
#include <string>

#include "horizon/common.hpp"

namespace horizon {

// Named scalar parameters.  std::map keeps iteration order sorted by name,
// which every serializer and aggregator relies on.
struct ParamSet {
  std::map<std::string, double> values;

  bool has(const std::string& name) const { return values.count(name) != 0; }

  double get(const std::string& name) const {
    auto it = values.find(name);
    require(it != values.end(), "UnknownReference", "no parameter named '" + name + "'");
    return it->second;
  }

  double get_or(const std::string& name, double fallback) const {
    auto it = values.find(name);
    return it == values.end() ? fallback : it->second;
  }

  void set(const std::string& name, double v) { values[name] = v; }

  // Overlay: entries of `other` replace entries here, new names are added.
  void merge(const ParamSet& other) {
    for (const auto& [k, v] : other.values) values[k] = v;
  }

  std::size_t size() const { return values.size(); }
  bool empty() const { return values.empty(); }
};

}  // namespace horizon
