#pragma once

#include <string>
#include <variant>
#include <vector>

#include "horizon/param_set.hpp"

namespace horizon {

// Time-varying baseline for hazards and drifts.  Optional *_param labels tie
// individual numbers to named parameters so a fitted or perturbed ParamSet can
// be rebound onto the same structure.

struct ConstantBaseline {
  double value = 0.0;
  std::string param;  // empty: not rebindable
};

// Hazard parameterization (shape/scale)*(t/scale)^(shape-1).
struct WeibullBaseline {
  double shape = 1.0;
  double scale = 1.0;
  std::string shape_param;
  std::string scale_param;
};

// Right-continuous step function: values[j] on [cuts[j-1], cuts[j]), with
// cuts[-1]=0 and cuts[last]=inf implied.  cuts.size()+1 == values.size().
struct PiecewiseBaseline {
  std::vector<double> cuts;
  std::vector<double> values;
  std::vector<std::string> value_params;  // empty or values.size()
};

using BaselineFn = std::variant<ConstantBaseline, WeibullBaseline, PiecewiseBaseline>;

double baseline_value(const BaselineFn& b, double t);

// Interior knots where the function is non-smooth (quadrature must break here).
std::vector<double> baseline_cuts(const BaselineFn& b);

// Closed-form integral over [0, t].  Exact for all three forms.
double baseline_integral(const BaselineFn& b, double t);

// hazard=true additionally requires nonnegative values / positive Weibull pars.
void validate_baseline(const BaselineFn& b, bool hazard, const std::string& where);

// Replace labeled numbers with values from `p` (labels absent from p are kept).
void rebind_baseline(BaselineFn& b, const ParamSet& p);

// Collect labeled numbers into `out` (used to extract a system's true values).
void collect_baseline_params(const BaselineFn& b, ParamSet& out);

}  // namespace horizon
