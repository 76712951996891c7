#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "horizon/common.hpp"
#include "horizon/model_data.hpp"
#include "horizon/parallel.hpp"
#include "horizon/quadrature.hpp"

namespace horizon {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kLog2Pi = 1.8378770664093454836;

double logaddexp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

// --- baseline shapes bound to parameter values ---

struct ShapeFn {
  BaselineShape::Form form = BaselineShape::Form::constant;
  double p1 = 0.0, p2 = 1.0;  // constant: level p1; weibull: shape p1, scale p2
  std::vector<double> cuts, vals, cum_cut;

  double value(double t) const {
    switch (form) {
      case BaselineShape::Form::constant:
        return p1;
      case BaselineShape::Form::weibull:
        if (t <= 0.0) return p1 == 1.0 ? 1.0 / p2 : (p1 > 1.0 ? 0.0 : std::numeric_limits<double>::infinity());
        return (p1 / p2) * std::pow(t / p2, p1 - 1.0);
      case BaselineShape::Form::piecewise: {
        const auto it = std::upper_bound(cuts.begin(), cuts.end(), t);
        return vals[static_cast<std::size_t>(it - cuts.begin())];
      }
    }
    return 0.0;
  }

  // integral over [0, t], closed form for every shape
  double cum(double t) const {
    if (t <= 0.0) return 0.0;
    switch (form) {
      case BaselineShape::Form::constant:
        return p1 * t;
      case BaselineShape::Form::weibull:
        return std::pow(t / p2, p1);
      case BaselineShape::Form::piecewise: {
        const auto it = std::upper_bound(cuts.begin(), cuts.end(), t);
        const std::size_t k = static_cast<std::size_t>(it - cuts.begin());
        const double left = k == 0 ? 0.0 : cuts[k - 1];
        return cum_cut[k] + vals[k] * (t - left);
      }
    }
    return 0.0;
  }
};

ShapeFn bind_hazard_shape(const BaselineShape& bs, const ParamSet& th, const std::string& sfx) {
  ShapeFn f;
  f.form = bs.form;
  switch (bs.form) {
    case BaselineShape::Form::constant:
      f.p1 = th.get("alpha0" + sfx);
      require(f.p1 >= 0.0, "InvalidConfig", "negative baseline hazard alpha0" + sfx);
      break;
    case BaselineShape::Form::weibull:
      f.p1 = th.get("shape" + sfx);
      f.p2 = th.get("scale" + sfx);
      require(f.p1 > 0.0 && f.p2 > 0.0, "InvalidConfig", "weibull shape/scale must be positive");
      break;
    case BaselineShape::Form::piecewise: {
      f.cuts = bs.cuts;
      const std::size_t k = bs.cuts.size() + 1;
      f.vals.resize(k);
      for (std::size_t i = 0; i < k; ++i) {
        f.vals[i] = th.get("alpha0" + sfx + "_" + std::to_string(i + 1));
        require(f.vals[i] >= 0.0, "InvalidConfig", "negative piecewise hazard level");
      }
      f.cum_cut.assign(k, 0.0);
      for (std::size_t i = 1; i < k; ++i) {
        const double left = i == 1 ? 0.0 : f.cuts[i - 2];
        f.cum_cut[i] = f.cum_cut[i - 1] + f.vals[i - 1] * (f.cuts[i - 1] - left);
      }
      break;
    }
  }
  return f;
}

ShapeFn bind_drift_shape(const BaselineShape& bs, const ParamSet& th) {
  require(bs.form != BaselineShape::Form::weibull, "InvalidConfig",
          "drift baseline supports constant or piecewise form only");
  ShapeFn f;
  f.form = bs.form;
  if (bs.form == BaselineShape::Form::constant) {
    f.p1 = th.get("beta0");
  } else {
    f.cuts = bs.cuts;
    const std::size_t k = bs.cuts.size() + 1;
    f.vals.resize(k);
    for (std::size_t i = 0; i < k; ++i) f.vals[i] = th.get("beta0_" + std::to_string(i + 1));
    f.cum_cut.assign(k, 0.0);
    for (std::size_t i = 1; i < k; ++i) {
      const double left = i == 1 ? 0.0 : f.cuts[i - 2];
      f.cum_cut[i] = f.cum_cut[i - 1] + f.vals[i - 1] * (f.cuts[i - 1] - left);
    }
  }
  return f;
}

// segment boundaries for hazard integrals: baseline cuts, factor knots, and a
// cap on segment length so the per-segment rule stays adequate
void split_segments(double a, double b, const std::vector<double>& knots, double max_seg,
                    std::vector<std::pair<double, double>>& out) {
  out.clear();
  if (!(b > a)) return;
  std::vector<double> pts;
  pts.push_back(a);
  for (double k : knots)
    if (k > a && k < b) pts.push_back(k);
  pts.push_back(b);
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  for (std::size_t i = 1; i < pts.size(); ++i) {
    const double lo = pts[i - 1], hi = pts[i];
    const int parts = std::max(1, static_cast<int>(std::ceil((hi - lo) / max_seg)));
    for (int p = 0; p < parts; ++p)
      out.emplace_back(lo + (hi - lo) * p / parts, lo + (hi - lo) * (p + 1) / parts);
  }
}

// --- event-family machinery ---

// hazard a0(t) * exp(cg + b2 * V(t)) for one subject; b2 folds into cg when the
// factor path is constant, making the compensator closed form
struct SubjectHazard {
  const ShapeFn* shape = nullptr;
  const PreparedSubject* s = nullptr;
  double cg = 0.0;
  double b2 = 0.0;  // nonzero only for a genuinely time-varying factor path
  const QuadRule* gl = nullptr;
  double max_seg = 2.5;

  double lp(double t) const { return cg + (b2 != 0.0 ? b2 * s->v_at(t) : 0.0); }
  double log_value(double t) const { return std::log(shape->value(t)) + lp(t); }

  double cum(double t) const {
    if (t <= 0.0) return 0.0;
    if (b2 == 0.0) return std::exp(cg) * shape->cum(t);
    std::vector<std::pair<double, double>> segs;
    std::vector<double> knots = shape->cuts;
    knots.insert(knots.end(), s->v_t.begin(), s->v_t.end());
    split_segments(0.0, t, knots, max_seg, segs);
    double acc = 0.0;
    for (const auto& [a, b] : segs)
      acc += gl_integrate(*gl, a, b, [&](double u) { return shape->value(u) * std::exp(lp(u)); });
    return acc;
  }
};

SubjectHazard make_subject_hazard(const ShapeFn& shape, const PreparedSubject& s, double b1,
                                  double b2, const QuadRule& gl, double max_seg) {
  SubjectHazard h;
  h.shape = &shape;
  h.s = &s;
  h.cg = b1 * s.g;
  h.gl = &gl;
  h.max_seg = max_seg;
  if (s.has_v) {
    if (s.v_constant)
      h.cg += b2 * s.v_x.front();
    else
      h.b2 = b2;
  }
  return h;
}

// log of the integral over (l, r] of
//   exp(-A_Y(u) - A_2(u)) * h_Y(u) * exp(-k3 * (A_2(X) - A_2(u)))
// by per-segment Gauss-Legendre in log space
double log_transition_integral(const SubjectHazard& hy, const SubjectHazard& hd, double k3,
                               double l, double r, double a2x, const QuadRule& gl,
                               double max_seg) {
  std::vector<std::pair<double, double>> segs;
  std::vector<double> knots = hy.shape->cuts;
  knots.insert(knots.end(), hd.shape->cuts.begin(), hd.shape->cuts.end());
  if (hy.b2 != 0.0 || hd.b2 != 0.0)
    knots.insert(knots.end(), hy.s->v_t.begin(), hy.s->v_t.end());
  split_segments(l, r, knots, max_seg, segs);
  if (segs.empty()) return kNegInf;

  std::vector<double> lg;
  lg.reserve(segs.size() * gl.nodes.size());
  for (const auto& [a, b] : segs) {
    const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    for (std::size_t q = 0; q < gl.nodes.size(); ++q) {
      const double u = mid + half * gl.nodes[q];
      const double a2u = hd.cum(u);
      const double lf = hy.log_value(u) - hy.cum(u) - a2u - k3 * (a2x - a2u);
      lg.push_back(std::log(gl.weights[q] * half) + lf);
    }
  }
  double m = kNegInf;
  for (double v : lg) m = std::max(m, v);
  if (m == kNegInf) return kNegInf;
  double acc = 0.0;
  for (double v : lg) acc += std::exp(v - m);
  return m + std::log(acc);
}

double sum_contributions(std::vector<double>& contrib) {
  KahanSum acc;
  for (double c : contrib) acc.add(c);
  const double total = acc.value();
  require(std::isfinite(total), "NonFiniteLikelihood",
          "log-likelihood not finite (overflow, underflow, or impossible record)");
  return total;
}

}  // namespace

// --- illness-death with interval-censored outcome ---

double loglik_illness_death(const ModelSpec& model, const PreparedData& prep,
                            const ParamSet& theta, int workers) {
  const ShapeFn sy = bind_hazard_shape(model.outcome_baseline, theta, "Y");
  const ShapeFn sd = bind_hazard_shape(model.death_baseline, theta, "D");
  const bool has_g = !model.channels.attribute.empty();
  const bool has_v = !model.channels.factor.empty();
  const double b1 = has_g ? theta.get("beta1") : 0.0;
  const double b2 = has_v ? theta.get("beta2") : 0.0;
  const double g1 = has_g ? theta.get("gamma1") : 0.0;
  const double g2 = has_v ? theta.get("gamma2") : 0.0;
  const double g3 = theta.get("gamma3");
  const double k3 = std::exp(g3);
  const QuadRule& gl = gauss_legendre(model.quad.gl_nodes);
  const double max_seg = model.quad.max_segment;

  std::vector<double> contrib(prep.subjects.size(), 0.0);
  parallel_for(prep.subjects.size(), workers, [&](std::size_t i) {
    const PreparedSubject& s = prep.subjects[i];
    const SubjectHazard hy = make_subject_hazard(sy, s, b1, b2, gl, max_seg);
    const SubjectHazard hd = make_subject_hazard(sd, s, g1, g2, gl, max_seg);
    const double x = s.death_time;
    const double a2x = hd.cum(x);
    const double dlog = s.death_observed ? hd.log_value(x) : 0.0;

    double ll = 0.0;
    switch (s.event) {
      case PreparedSubject::Event::exact: {
        const double t = s.ev_exact;
        ll = hy.log_value(t) - hy.cum(t) - hd.cum(t) - k3 * (a2x - hd.cum(t)) +
             (s.death_observed ? dlog + g3 : 0.0);
        break;
      }
      case PreparedSubject::Event::interval: {
        ll = log_transition_integral(hy, hd, k3, s.ev_left, s.ev_right, a2x, gl, max_seg) +
             (s.death_observed ? dlog + g3 : 0.0);
        break;
      }
      case PreparedSubject::Event::censored: {
        const double c = std::min(s.ev_censor, x);
        const double healthy = -hy.cum(x) - a2x + (s.death_observed ? dlog : 0.0);
        if (c < x) {
          const double moved = log_transition_integral(hy, hd, k3, c, x, a2x, gl, max_seg) +
                               (s.death_observed ? dlog + g3 : 0.0);
          ll = logaddexp(healthy, moved);
        } else {
          ll = healthy;
        }
        break;
      }
      case PreparedSubject::Event::none:
        break;
    }
    contrib[i] = ll;
  });
  return sum_contributions(contrib);
}

// --- outcome-event fit that treats death as independent censoring ---

double loglik_naive_survival(const ModelSpec& model, const PreparedData& prep,
                             const ParamSet& theta, int workers) {
  const ShapeFn sy = bind_hazard_shape(model.outcome_baseline, theta, "Y");
  const bool has_g = !model.channels.attribute.empty();
  const bool has_v = !model.channels.factor.empty();
  const double b1 = has_g ? theta.get("beta1") : 0.0;
  const double b2 = has_v ? theta.get("beta2") : 0.0;
  const QuadRule& gl = gauss_legendre(model.quad.gl_nodes);

  std::vector<double> contrib(prep.subjects.size(), 0.0);
  parallel_for(prep.subjects.size(), workers, [&](std::size_t i) {
    const PreparedSubject& s = prep.subjects[i];
    const SubjectHazard hy = make_subject_hazard(sy, s, b1, b2, gl, model.quad.max_segment);
    double ll = 0.0;
    switch (s.event) {
      case PreparedSubject::Event::exact:
        ll = hy.log_value(s.ev_exact) - hy.cum(s.ev_exact);
        break;
      case PreparedSubject::Event::censored:
        ll = -hy.cum(s.ev_censor);
        break;
      case PreparedSubject::Event::interval: {
        const double al = hy.cum(s.ev_left), ar = hy.cum(s.ev_right);
        ll = -al + std::log(-std::expm1(-(ar - al)));
        break;
      }
      case PreparedSubject::Event::none:
        break;
    }
    contrib[i] = ll;
  });
  return sum_contributions(contrib);
}

// --- joint quantitative model: shared pieces ---

namespace {

struct JointParams {
  ShapeFn drift, dhaz;
  double mu0, sy0, sb, su, seps, b1, b2, b3, g1, g2, g3, g4;
  bool has_g, has_v, any_death;
  std::vector<std::vector<double>> ord_cuts;  // per ordinal channel, ascending
  std::vector<double> ord_eps;
  double bin_cut = 0.0, bin_eps = 1.0;
  bool has_bin = false;
  ThresholdLaw law = ThresholdLaw::logistic;
};

JointParams bind_joint(const ModelSpec& model, const PreparedData& prep, const ParamSet& th) {
  JointParams p;
  p.drift = bind_drift_shape(model.drift_shape, th);
  p.mu0 = th.get("mu0");
  p.sy0 = th.get("sigmaY0");
  p.sb = th.get("sigmaB");
  p.su = th.get("sigmaU");
  require(p.sy0 >= 0.0 && p.sb >= 0.0 && p.su >= 0.0, "InvalidConfig",
          "variance components must be nonnegative");
  p.has_g = !model.channels.attribute.empty();
  p.has_v = !model.channels.factor.empty();
  p.b1 = p.has_g ? th.get("beta1") : 0.0;
  p.b2 = p.has_v ? th.get("beta2") : 0.0;
  p.b3 = th.get_or("beta3", 1.0);
  p.seps = model.channels.longitudinal.empty() ? 0.0 : th.get("sigmaEps");
  if (!model.channels.longitudinal.empty())
    require(p.seps > 0.0, "InvalidConfig", "sigmaEps must be positive");

  p.any_death = false;
  for (const auto& s : prep.subjects) p.any_death = p.any_death || s.has_death;
  if (p.any_death) {
    p.dhaz = bind_hazard_shape(model.death_baseline, th, "D");
    p.g1 = p.has_g ? th.get("gamma1") : 0.0;
    p.g2 = p.has_v ? th.get("gamma2") : 0.0;
    p.g3 = th.get("gamma3");
    p.g4 = th.get("gamma4");
  } else {
    p.g1 = p.g2 = p.g3 = p.g4 = 0.0;
  }

  p.law = model.threshold_law;
  for (std::size_t c = 0; c < model.channels.ordinal.size(); ++c) {
    const std::string& name = model.channels.ordinal[c];
    const int q = model.ordinal_levels[c];
    std::vector<double> cuts(static_cast<std::size_t>(q - 1));
    for (int k = 1; k < q; ++k) cuts[static_cast<std::size_t>(k - 1)] = th.get("cut_" + name + "_" + std::to_string(k));
    for (std::size_t k = 1; k < cuts.size(); ++k)
      require(cuts[k] > cuts[k - 1], "InvalidConfig", "cuts for '" + name + "' not increasing");
    p.ord_cuts.push_back(std::move(cuts));
    const double eps = th.get_or("eps_" + name, 1.0);
    require(eps > 0.0, "InvalidConfig", "threshold noise scale must be positive");
    p.ord_eps.push_back(eps);
  }
  if (!model.channels.binary.empty()) {
    p.has_bin = true;
    p.bin_cut = th.get("cut_" + model.channels.binary);
    p.bin_eps = th.get_or("eps_" + model.channels.binary, 1.0);
    require(p.bin_eps > 0.0, "InvalidConfig", "threshold noise scale must be positive");
  }
  return p;
}

double threshold_cdf(double x, ThresholdLaw law) {
  return law == ThresholdLaw::logistic ? logistic_cdf(x) : normal_cdf(x);
}

// P(lo < y + eps*E <= hi) for symmetric E; computed from the smaller tail side
double interval_prob(double y, double lo, double hi, double eps, ThresholdLaw law) {
  const double a = lo == kNegInf ? kNegInf : (lo - y) / eps;
  const double b = hi == std::numeric_limits<double>::infinity()
                       ? std::numeric_limits<double>::infinity()
                       : (hi - y) / eps;
  if (a == kNegInf) return b == std::numeric_limits<double>::infinity() ? 1.0 : threshold_cdf(b, law);
  if (b == std::numeric_limits<double>::infinity()) return threshold_cdf(-a, law);
  if (a + b > 0.0) return threshold_cdf(-a, law) - threshold_cdf(-b, law);
  return threshold_cdf(b, law) - threshold_cdf(a, law);
}

// everything needed to evaluate one subject's conditional log-likelihood at
// any random-effect value u
struct SubjCond {
  // analytic longitudinal part: K - 0.5*(c0 - 2*b3*u*c1 + b3^2*u^2*c2)
  bool analytic = true;
  double lk = 0.0, c0 = 0.0, c1 = 0.0, c2 = 0.0;
  double b3 = 1.0;

  // latent-path part: draws x dim matrix of u-free latent values
  Eigen::MatrixXd ypath;
  std::vector<double> tpath;
  struct Vis {
    int slot;
    bool threshold;
    double z, lo, hi, eps;
  };
  std::vector<Vis> vis;
  ThresholdLaw law = ThresholdLaw::logistic;

  // survival: Lambda(X|u) = sum w_q exp(base_q + u*slope_q)
  bool has_death = false, death_obs = false;
  std::vector<double> sw, sbase, sslope;
  double base_x = 0.0, slope_x = 0.0;

  double cond(double u) const {
    double lz;
    if (analytic) {
      lz = lk - 0.5 * (c0 - 2.0 * b3 * u * c1 + b3 * b3 * u * u * c2);
    } else if (vis.empty()) {
      lz = 0.0;
    } else {
      const auto draws = ypath.rows();
      double m = kNegInf;
      std::vector<double> lp(static_cast<std::size_t>(draws), 0.0);
      for (Eigen::Index r = 0; r < draws; ++r) {
        double acc = 0.0;
        for (const Vis& w : vis) {
          const double y = ypath(r, w.slot) + b3 * u * tpath[static_cast<std::size_t>(w.slot)];
          if (w.threshold) {
            const double pr = interval_prob(y, w.lo, w.hi, w.eps, law);
            acc += pr > 0.0 ? std::log(pr) : kNegInf;
          } else {
            const double d = (w.z - y) / w.eps;
            acc += -0.5 * kLog2Pi - std::log(w.eps) - 0.5 * d * d;
          }
        }
        lp[static_cast<std::size_t>(r)] = acc;
        m = std::max(m, acc);
      }
      if (m == kNegInf) return kNegInf;
      double s = 0.0;
      for (double v : lp) s += std::exp(v - m);
      lz = m + std::log(s) - std::log(static_cast<double>(draws));
    }

    double ls = 0.0;
    if (has_death) {
      double lam = 0.0;
      for (std::size_t q = 0; q < sw.size(); ++q) lam += sw[q] * std::exp(sbase[q] + u * sslope[q]);
      ls = -lam + (death_obs ? base_x + u * slope_x : 0.0);
    }
    return lz + ls;
  }
};

SubjCond build_subject(const ModelSpec& model, const PreparedData& prep, const JointParams& p,
                       const PreparedSubject& s) {
  SubjCond sc;
  sc.b3 = p.b3;
  sc.law = p.law;
  const auto drift_mean = [&](double t) {
    return p.mu0 + p.drift.cum(t) + p.b1 * s.g * t + p.b2 * s.v_integral(t);
  };

  if (!prep.any_threshold) {
    const std::size_t m = s.zt.size();
    if (m > 0) {
      Eigen::MatrixXd cov(m, m);
      Eigen::VectorXd r0(m), tvec(m);
      for (std::size_t j = 0; j < m; ++j) {
        tvec(static_cast<Eigen::Index>(j)) = s.zt[j];
        r0(static_cast<Eigen::Index>(j)) = s.z[j] - drift_mean(s.zt[j]);
        for (std::size_t k = 0; k < m; ++k)
          cov(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) =
              p.sy0 * p.sy0 + p.sb * p.sb * std::min(s.zt[j], s.zt[k]) +
              (j == k ? p.seps * p.seps : 0.0);
      }
      Eigen::LLT<Eigen::MatrixXd> llt(cov);
      require(llt.info() == Eigen::Success, "NonFiniteLikelihood",
              "longitudinal covariance not positive definite");
      const Eigen::MatrixXd l = llt.matrixL();
      double logdet = 0.0;
      for (std::size_t j = 0; j < m; ++j)
        logdet += 2.0 * std::log(l(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j)));
      const Eigen::VectorXd a = l.triangularView<Eigen::Lower>().solve(r0);
      const Eigen::VectorXd b = l.triangularView<Eigen::Lower>().solve(tvec);
      sc.analytic = true;
      sc.lk = -0.5 * (static_cast<double>(m) * kLog2Pi + logdet);
      sc.c0 = a.squaredNorm();
      sc.c1 = a.dot(b);
      sc.c2 = b.squaredNorm();
    }
  } else {
    sc.analytic = false;
    const std::size_t dim = s.path_t.size();
    sc.tpath = s.path_t;
    if (dim > 0) {
      Eigen::MatrixXd cov(dim, dim);
      for (std::size_t j = 0; j < dim; ++j)
        for (std::size_t k = 0; k < dim; ++k)
          cov(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) =
              p.sy0 * p.sy0 + p.sb * p.sb * std::min(s.path_t[j], s.path_t[k]);
      Eigen::MatrixXd a;
      if (p.sy0 == 0.0 && p.sb == 0.0) {
        a = Eigen::MatrixXd::Zero(dim, dim);
      } else {
        Eigen::LDLT<Eigen::MatrixXd> ldlt(cov);
        require(ldlt.info() == Eigen::Success, "NonFiniteLikelihood",
                "latent-path covariance factorization failed");
        Eigen::VectorXd d = ldlt.vectorD();
        for (Eigen::Index j = 0; j < d.size(); ++j) d(j) = std::sqrt(std::max(d(j), 0.0));
        a = ldlt.transpositionsP().transpose() *
            (Eigen::MatrixXd(ldlt.matrixL()) * d.asDiagonal());
      }
      const int draws = static_cast<int>(prep.qmc_normals.size());
      sc.ypath.resize(draws, static_cast<Eigen::Index>(dim));
      Eigen::VectorXd m0(static_cast<Eigen::Index>(dim)), xi(static_cast<Eigen::Index>(dim));
      for (std::size_t j = 0; j < dim; ++j)
        m0(static_cast<Eigen::Index>(j)) = drift_mean(s.path_t[j]);
      for (int r = 0; r < draws; ++r) {
        for (std::size_t j = 0; j < dim; ++j)
          xi(static_cast<Eigen::Index>(j)) = prep.qmc_normals[static_cast<std::size_t>(r)][j];
        sc.ypath.row(r) = (m0 + a * xi).transpose();
      }
      for (std::size_t j = 0; j < s.zt.size(); ++j)
        sc.vis.push_back({s.z_slot[j], false, s.z[j], 0.0, 0.0, p.seps});
      for (std::size_t c = 0; c < s.ordinal.size(); ++c) {
        const auto& cuts = p.ord_cuts[c];
        const int q_levels = static_cast<int>(cuts.size()) + 1;
        for (std::size_t j = 0; j < s.ordinal[c].t.size(); ++j) {
          const int q = s.ordinal[c].level[j];
          require(q >= 0 && q < q_levels, "InvalidConfig", "ordinal level outside model range");
          const double lo = q == 0 ? kNegInf : cuts[static_cast<std::size_t>(q - 1)];
          const double hi = q == q_levels - 1 ? std::numeric_limits<double>::infinity()
                                              : cuts[static_cast<std::size_t>(q)];
          sc.vis.push_back({s.ord_slot[c][j], true, 0.0, lo, hi, p.ord_eps[c]});
        }
      }
      for (std::size_t j = 0; j < s.binary.t.size(); ++j) {
        const int q = s.binary.level[j];
        require(q == 0 || q == 1, "InvalidConfig", "binary level must be 0 or 1");
        const double lo = q == 1 ? p.bin_cut : kNegInf;
        const double hi = q == 1 ? std::numeric_limits<double>::infinity() : p.bin_cut;
        sc.vis.push_back({s.bin_slot[j], true, 0.0, lo, hi, p.bin_eps});
      }
    }
  }

  if (s.has_death && p.any_death) {
    sc.has_death = true;
    sc.death_obs = s.death_observed;
    const double x = s.death_time;
    const auto log_base = [&](double t) {
      return std::log(p.dhaz.value(t)) + p.g1 * s.g + p.g2 * s.v_at(t) + p.g3 * drift_mean(t);
    };
    const auto slope = [&](double t) { return p.g3 * p.b3 * t + p.g4; };
    std::vector<std::pair<double, double>> segs;
    std::vector<double> knots = p.dhaz.cuts;
    knots.insert(knots.end(), p.drift.cuts.begin(), p.drift.cuts.end());
    if (s.has_v && !s.v_constant) knots.insert(knots.end(), s.v_t.begin(), s.v_t.end());
    split_segments(0.0, x, knots, model.quad.max_segment, segs);
    const QuadRule& gl = gauss_legendre(model.quad.gl_nodes);
    for (const auto& [a, b] : segs) {
      const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
      for (std::size_t q = 0; q < gl.nodes.size(); ++q) {
        const double t = mid + half * gl.nodes[q];
        sc.sw.push_back(gl.weights[q] * half);
        sc.sbase.push_back(log_base(t));
        sc.sslope.push_back(slope(t));
      }
    }
    sc.base_x = log_base(x);
    sc.slope_x = slope(x);
  }
  return sc;
}

// Newton search for the mode and curvature of log N(u; 0, su^2) + cond(u).
// Centering the Hermite nodes there keeps the quadrature accurate even when
// many precise readings make the conditional law of U much narrower than its
// prior. Returns false when no concave interior mode is found; the caller
// then falls back to prior-scaled nodes.
bool laplace_center(const SubjCond& sc, double su, double& mode, double& scale) {
  const double prior_prec = 1.0 / (su * su);
  double u = 0.0;
  for (int it = 0; it < 50; ++it) {
    double d1, d2;
    if (sc.analytic) {
      double e1 = 0.0, e2 = 0.0;
      if (sc.has_death) {
        for (std::size_t q = 0; q < sc.sw.size(); ++q) {
          const double lam = sc.sw[q] * std::exp(std::min(sc.sbase[q] + u * sc.sslope[q], 500.0));
          e1 -= lam * sc.sslope[q];
          e2 -= lam * sc.sslope[q] * sc.sslope[q];
        }
        if (sc.death_obs) e1 += sc.slope_x;
      }
      d1 = sc.b3 * sc.c1 - sc.b3 * sc.b3 * sc.c2 * u + e1 - u * prior_prec;
      d2 = -sc.b3 * sc.b3 * sc.c2 + e2 - prior_prec;
    } else {
      const double h = 1e-3 * su;
      const double f0 = sc.cond(u), fp = sc.cond(u + h), fm = sc.cond(u - h);
      if (!std::isfinite(f0) || !std::isfinite(fp) || !std::isfinite(fm)) return false;
      d1 = (fp - fm) / (2.0 * h) - u * prior_prec;
      d2 = (fp - 2.0 * f0 + fm) / (h * h) - prior_prec;
    }
    if (!(d2 < 0.0) || !std::isfinite(d1)) return false;
    const double step = std::clamp(d1 / d2, -6.0 * su, 6.0 * su);
    u -= step;
    if (std::abs(step) < 1e-9 * su) {
      mode = u;
      scale = 1.0 / std::sqrt(-d2);
      return std::isfinite(mode) && std::isfinite(scale) && scale > 0.0;
    }
  }
  return false;
}

}  // namespace

// --- joint family: marginal over U by Gauss-Hermite ---

double loglik_joint(const ModelSpec& model, const PreparedData& prep, const ParamSet& theta,
                    int workers) {
  const JointParams p = bind_joint(model, prep, theta);
  const QuadRule& gh = gauss_hermite(model.quad.gh_nodes);
  gauss_legendre(model.quad.gl_nodes);  // warm the cache before the parallel region

  const std::size_t nk = gh.nodes.size();
  std::vector<double> lwx(nk);
  for (std::size_t k = 0; k < nk; ++k)
    lwx[k] = std::log(gh.weights[k]) + gh.nodes[k] * gh.nodes[k];

  const double lprior = -0.5 * kLog2Pi - (p.su > 0.0 ? std::log(p.su) : 0.0);
  std::vector<double> contrib(prep.subjects.size(), 0.0);
  parallel_for(prep.subjects.size(), workers, [&](std::size_t i) {
    const SubjCond sc = build_subject(model, prep, p, prep.subjects[i]);
    if (p.su <= 0.0) {
      // degenerate random effect: the prior is a point mass at zero
      contrib[i] = sc.cond(0.0);
      return;
    }
    double mode = 0.0, scale = p.su;
    if (!laplace_center(sc, p.su, mode, scale)) {
      mode = 0.0;
      scale = p.su;
    }
    const double sqrt2s = std::sqrt(2.0) * scale;
    double m = kNegInf;
    std::vector<double> lg(nk);
    for (std::size_t k = 0; k < nk; ++k) {
      const double u = mode + sqrt2s * gh.nodes[k];
      lg[k] = lwx[k] + lprior - 0.5 * u * u / (p.su * p.su) + sc.cond(u);
      m = std::max(m, lg[k]);
    }
    if (m == kNegInf) {
      contrib[i] = kNegInf;
      return;
    }
    double acc = 0.0;
    for (double v : lg) acc += std::exp(v - m);
    contrib[i] = std::log(sqrt2s) + m + std::log(acc);
  });
  return sum_contributions(contrib);
}

// --- naive longitudinal fit: drops the survival factor entirely ---

double loglik_naive_mixed(const ModelSpec& model, const PreparedData& prep, const ParamSet& theta,
                          int workers) {
  const ShapeFn drift = bind_drift_shape(model.drift_shape, theta);
  const double mu0 = theta.get("mu0");
  const double sy0 = theta.get("sigmaY0");
  const double sb = theta.get("sigmaB");
  const double su = theta.get("sigmaU");
  const double seps = theta.get("sigmaEps");
  require(seps > 0.0, "InvalidConfig", "sigmaEps must be positive");
  const bool has_g = !model.channels.attribute.empty();
  const bool has_v = !model.channels.factor.empty();
  const double b1 = has_g ? theta.get("beta1") : 0.0;
  const double b2 = has_v ? theta.get("beta2") : 0.0;
  const double b3 = theta.get_or("beta3", 1.0);

  std::vector<double> contrib(prep.subjects.size(), 0.0);
  parallel_for(prep.subjects.size(), workers, [&](std::size_t i) {
    const PreparedSubject& s = prep.subjects[i];
    const std::size_t m = s.zt.size();
    if (m == 0) return;
    Eigen::MatrixXd cov(m, m);
    Eigen::VectorXd r(m);
    for (std::size_t j = 0; j < m; ++j) {
      r(static_cast<Eigen::Index>(j)) =
          s.z[j] - (mu0 + drift.cum(s.zt[j]) + b1 * s.g * s.zt[j] + b2 * s.v_integral(s.zt[j]));
      for (std::size_t k = 0; k < m; ++k)
        cov(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) =
            sy0 * sy0 + sb * sb * std::min(s.zt[j], s.zt[k]) +
            b3 * b3 * su * su * s.zt[j] * s.zt[k] + (j == k ? seps * seps : 0.0);
    }
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    require(llt.info() == Eigen::Success, "NonFiniteLikelihood",
            "longitudinal covariance not positive definite");
    const Eigen::MatrixXd l = llt.matrixL();
    double logdet = 0.0;
    for (std::size_t j = 0; j < m; ++j)
      logdet += 2.0 * std::log(l(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j)));
    const Eigen::VectorXd a = l.triangularView<Eigen::Lower>().solve(r);
    contrib[i] = -0.5 * (static_cast<double>(m) * kLog2Pi + logdet + a.squaredNorm());
  });
  return sum_contributions(contrib);
}

// --- conditional evaluator for cross-checking the Gauss-Hermite marginal ---

struct JointConditionalEval::Impl {
  std::vector<SubjCond> subjects;
};

JointConditionalEval::JointConditionalEval(const ModelSpec& model, const PreparedData& prep,
                                           const ParamSet& theta)
    : impl_(new Impl) {
  require(model.family == Family::joint_quantitative_shared_effect, "IncompatibleChannels",
          "conditional evaluation is defined for the joint family");
  const JointParams p = bind_joint(model, prep, theta);
  gauss_legendre(model.quad.gl_nodes);
  impl_->subjects.reserve(prep.subjects.size());
  for (const auto& s : prep.subjects) impl_->subjects.push_back(build_subject(model, prep, p, s));
}

JointConditionalEval::~JointConditionalEval() = default;
JointConditionalEval::JointConditionalEval(JointConditionalEval&&) noexcept = default;

double JointConditionalEval::operator()(std::size_t subject, double u) const {
  require(subject < impl_->subjects.size(), "UnknownReference", "subject index out of range");
  return impl_->subjects[subject].cond(u);
}

double joint_subject_conditional(const ModelSpec& model, const PreparedData& prep,
                                 std::size_t subject, const ParamSet& theta, double u) {
  return JointConditionalEval(model, prep, theta)(subject, u);
}

}  // namespace horizon
