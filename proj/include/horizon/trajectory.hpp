#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "horizon/system.hpp"

namespace horizon {

// One subject's realized paths on [0, min(T_D, tau)].  Paths live on the
// uniform grid t_i = i*step; entries after death are absent, never zero-filled.
// Jump times sit on grid points, so index arithmetic (llround(t/step)) is
// exact and state queries need no tolerance.
struct Trajectory {
  std::int64_t subject_id = 0;
  double step = 0.0;
  double horizon = 0.0;
  double death_time = std::numeric_limits<double>::infinity();

  std::map<std::string, double> attributes;
  std::map<std::string, double> jump_times;  // counting processes that jumped (death included)
  std::map<std::string, std::vector<double>> diffusion_paths;
  std::vector<double> factor_path;  // role factor on the grid (empty if no factor role)
  std::map<std::string, double> factor_levels;  // realized random-constant factor levels

  // Realized noisy readings for sampled_last intensity terms, aligned with
  // ValidatedSystem::sampled_terms(): (time, value) pairs drawn while alive.
  std::vector<std::vector<std::pair<double, double>>> samples;

  bool dead() const { return std::isfinite(death_time); }
  // Grid index of the last defined path entry.
  std::int64_t last_index() const {
    return std::llround((dead() ? death_time : horizon) / step);
  }
  bool dead_at(double t) const { return death_time <= t; }
  bool jumped_at(const std::string& process, double t) const {
    auto it = jump_times.find(process);
    return it != jump_times.end() && it->second <= t;
  }
};

struct Population {
  std::shared_ptr<const ValidatedSystem> system;
  double step = 0.0;
  double horizon = 0.0;
  std::uint64_t master_seed = 0;
  std::vector<Trajectory> subjects;
};

}  // namespace horizon
