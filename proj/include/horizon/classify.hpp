#pragma once

#include <map>
#include <string>

#include "horizon/graph.hpp"
#include "horizon/observe.hpp"

namespace horizon {

enum class CarStatus { holds, fails, holds_if };

struct CarVerdict {
  CarStatus status = CarStatus::holds;
  std::string detail;  // reason (fails) or condition (holds_if)
};

std::string to_string(const CarVerdict& v);

// Pure rule-based classification of each channel's observation mechanism
// against the coarsening-at-random typology.  Conservative: input sets the
// rules do not recognize yield fails, never a silent holds.
std::map<std::string, CarVerdict> classify_car(const ObservationScheme& scheme,
                                               const InfluenceGraph& graph);

}  // namespace horizon
