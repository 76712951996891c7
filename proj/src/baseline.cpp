#include "horizon/baseline.hpp"

#include <algorithm>
#include <cmath>

namespace horizon {

double baseline_value(const BaselineFn& b, double t) {
  if (const auto* c = std::get_if<ConstantBaseline>(&b)) return c->value;
  if (const auto* w = std::get_if<WeibullBaseline>(&b)) {
    if (t <= 0.0) {
      // Left limit at the origin; shape>1 vanishes, shape==1 is the flat case.
      return w->shape == 1.0 ? 1.0 / w->scale : 0.0;
    }
    return (w->shape / w->scale) * std::pow(t / w->scale, w->shape - 1.0);
  }
  const auto& p = std::get<PiecewiseBaseline>(b);
  std::size_t j = std::upper_bound(p.cuts.begin(), p.cuts.end(), t) - p.cuts.begin();
  return p.values[j];
}

std::vector<double> baseline_cuts(const BaselineFn& b) {
  if (const auto* p = std::get_if<PiecewiseBaseline>(&b)) return p->cuts;
  return {};
}

double baseline_integral(const BaselineFn& b, double t) {
  if (t <= 0.0) return 0.0;
  if (const auto* c = std::get_if<ConstantBaseline>(&b)) return c->value * t;
  if (const auto* w = std::get_if<WeibullBaseline>(&b)) return std::pow(t / w->scale, w->shape);
  const auto& p = std::get<PiecewiseBaseline>(b);
  double acc = 0.0, lo = 0.0;
  for (std::size_t j = 0; j < p.cuts.size(); ++j) {
    if (t <= p.cuts[j]) {
      return acc + p.values[j] * (t - lo);
    }
    acc += p.values[j] * (p.cuts[j] - lo);
    lo = p.cuts[j];
  }
  return acc + p.values.back() * (t - lo);
}

void validate_baseline(const BaselineFn& b, bool hazard, const std::string& where) {
  if (const auto* c = std::get_if<ConstantBaseline>(&b)) {
    require(std::isfinite(c->value), "InvalidSystem", where + ": baseline value not finite");
    if (hazard) require(c->value >= 0.0, "InvalidSystem", where + ": hazard baseline negative");
    return;
  }
  if (const auto* w = std::get_if<WeibullBaseline>(&b)) {
    require(w->shape > 0.0 && w->scale > 0.0, "InvalidSystem",
            where + ": weibull shape/scale must be positive");
    require(hazard, "InvalidSystem", where + ": weibull form is hazard-only");
    return;
  }
  const auto& p = std::get<PiecewiseBaseline>(b);
  require(p.values.size() == p.cuts.size() + 1, "InvalidSystem",
          where + ": piecewise needs cuts.size()+1 values");
  require(p.value_params.empty() || p.value_params.size() == p.values.size(), "InvalidSystem",
          where + ": value_params must be empty or match values");
  for (std::size_t j = 0; j < p.cuts.size(); ++j) {
    require(p.cuts[j] > 0.0 && (j == 0 || p.cuts[j] > p.cuts[j - 1]), "InvalidSystem",
            where + ": cuts must be positive and strictly increasing");
  }
  for (double v : p.values) {
    require(std::isfinite(v), "InvalidSystem", where + ": baseline value not finite");
    if (hazard) require(v >= 0.0, "InvalidSystem", where + ": hazard baseline negative");
  }
}

void rebind_baseline(BaselineFn& b, const ParamSet& p) {
  if (auto* c = std::get_if<ConstantBaseline>(&b)) {
    if (!c->param.empty() && p.has(c->param)) c->value = p.get(c->param);
    return;
  }
  if (auto* w = std::get_if<WeibullBaseline>(&b)) {
    if (!w->shape_param.empty() && p.has(w->shape_param)) w->shape = p.get(w->shape_param);
    if (!w->scale_param.empty() && p.has(w->scale_param)) w->scale = p.get(w->scale_param);
    return;
  }
  auto& pw = std::get<PiecewiseBaseline>(b);
  for (std::size_t j = 0; j < pw.value_params.size(); ++j) {
    if (!pw.value_params[j].empty() && p.has(pw.value_params[j]))
      pw.values[j] = p.get(pw.value_params[j]);
  }
}

void collect_baseline_params(const BaselineFn& b, ParamSet& out) {
  if (const auto* c = std::get_if<ConstantBaseline>(&b)) {
    if (!c->param.empty()) out.set(c->param, c->value);
    return;
  }
  if (const auto* w = std::get_if<WeibullBaseline>(&b)) {
    if (!w->shape_param.empty()) out.set(w->shape_param, w->shape);
    if (!w->scale_param.empty()) out.set(w->scale_param, w->scale);
    return;
  }
  const auto& pw = std::get<PiecewiseBaseline>(b);
  for (std::size_t j = 0; j < pw.value_params.size(); ++j) {
    if (!pw.value_params[j].empty()) out.set(pw.value_params[j], pw.values[j]);
  }
}

}  // namespace horizon
