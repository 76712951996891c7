#include "horizon/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <memory>
#include <set>
#include <sstream>

#include "horizon/common.hpp"
#include "horizon/parallel.hpp"
#include "horizon/rng.hpp"
#include "horizon/simulate.hpp"

namespace horizon {

namespace {

constexpr std::uint64_t kSimStream = 0x51D;
constexpr std::uint64_t kObsStream = 0x0B5;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool naive_family(Family f) {
  return f == Family::naive_mixed_longitudinal || f == Family::naive_survival_only;
}

// Configuration mistakes fail the whole study; stochastic fit failures are
// excluded per replication and surface through the exclusion rate.
bool config_error(const std::string& code) {
  return code == "InvalidConfig" || code == "UnknownReference" || code == "UnknownProcess" ||
         code == "IncompatibleChannels" || code == "InvalidData" || code == "InvalidScheme";
}

struct RepFit {
  bool ok = false;
  std::string why;
  std::map<std::string, double> est;
  std::map<std::string, double> se;  // empty when the information matrix failed
};

struct RepResult {
  std::vector<RepFit> fits;
  std::map<std::string, std::string> verdicts;
};

std::string fmt(double v, int width) {
  char buf[40];
  if (std::isnan(v))
    std::snprintf(buf, sizeof(buf), "-");
  else
    std::snprintf(buf, sizeof(buf), "%.4g", v);
  std::string s(buf);
  if (static_cast<int>(s.size()) < width) s = std::string(width - s.size(), ' ') + s;
  return s;
}

}  // namespace

StudyReport run_scenario(const Scenario& s, int workers) {
  if (workers <= 0) workers = default_workers();
  auto vs = std::make_shared<const ValidatedSystem>(validate_system(s.system));
  validate_scheme(s.scheme, *vs);
  require(!s.families.empty(), "InvalidScenario", "scenario has no fit families");
  if (!s.report_only) {
    require(s.replications >= 30, "InvalidScenario",
            "bias studies need at least 30 replications");
    const bool any_naive = std::any_of(s.families.begin(), s.families.end(),
                                       [](const FamilyJob& j) { return naive_family(j.model.family); });
    require(any_naive, "InvalidScenario", "bias studies need a naive comparator family");
  }

  ParamSet truth = true_params(*vs);
  truth.merge(s.true_params);

  const int R = s.replications;
  std::vector<RepResult> results(static_cast<std::size_t>(R));

  parallel_for(static_cast<std::size_t>(R), workers, [&](std::size_t r) {
    SimConfig cfg;
    cfg.n_subjects = s.n_subjects;
    cfg.step = s.step;
    cfg.horizon = s.horizon;
    cfg.master_seed = derive_seed(s.seed, r, kSimStream);
    const Population pop = simulate_population(*vs, s.true_params, cfg, 1);
    const Dataset data = apply_observation(pop, s.scheme, derive_seed(s.seed, r, kObsStream));
    if (r == 0) results[0].verdicts = data.car_verdicts;

    RepResult& rr = results[r];
    rr.fits.resize(s.families.size());
    for (std::size_t fi = 0; fi < s.families.size(); ++fi) {
      const FamilyJob& job = s.families[fi];
      RepFit& rf = rr.fits[fi];
      try {
        const auto names = model_param_names(job.model, data);
        ParamSet init;
        for (const auto& n : names)
          if (truth.has(n)) init.set(n, truth.get(n));
        init.merge(job.init);
        FitOptions opts;
        opts.workers = 1;
        opts.fixed = job.fixed;
        const FitResult fit_res = fit(job.model, data, init, opts);
        if (!fit_res.converged) {
          rf.why = "NonConvergence";
          continue;
        }
        rf.ok = true;
        for (const auto& n : fit_res.free_names) rf.est[n] = fit_res.estimates.get(n);
        for (const auto& n : fit_res.free_names)
          if (fit_res.std_errors.has(n)) rf.se[n] = fit_res.std_errors.get(n);
      } catch (const Error& e) {
        if (config_error(e.code())) throw;
        rf.why = e.code();
      }
    }
  });

  StudyReport rep;
  rep.scenario = s.name;
  rep.replications = R;
  rep.car_verdicts = results[0].verdicts;

  for (std::size_t fi = 0; fi < s.families.size(); ++fi) {
    const std::string& label = s.families[fi].label;
    std::set<std::string> params;
    int used = 0;
    for (const auto& rr : results) {
      const RepFit& rf = rr.fits[fi];
      if (!rf.ok) continue;
      ++used;
      for (const auto& [k, v] : rf.est) {
        (void)v;
        params.insert(k);
      }
    }
    rep.exclusions[label] = R - used;
    rep.exclusion_rate = std::max(rep.exclusion_rate,
                                  static_cast<double>(R - used) / static_cast<double>(R));

    for (const auto& p : params) {
      ParamCell cell;
      cell.family = label;
      cell.param = p;
      cell.truth = truth.get_or(p, kNaN);
      cell.used = used;

      KahanSum sum;
      for (const auto& rr : results)
        if (rr.fits[fi].ok) sum.add(rr.fits[fi].est.at(p));
      cell.mean_est = used > 0 ? sum.value() / used : kNaN;
      cell.bias = cell.mean_est - cell.truth;

      if (used > 1) {
        KahanSum ss;
        for (const auto& rr : results)
          if (rr.fits[fi].ok) {
            const double d = rr.fits[fi].est.at(p) - cell.mean_est;
            ss.add(d * d);
          }
        cell.emp_sd = std::sqrt(ss.value() / (used - 1));
        cell.mc_se = cell.emp_sd / std::sqrt(static_cast<double>(used));
      } else {
        cell.emp_sd = kNaN;
        cell.mc_se = kNaN;
      }

      KahanSum se_sum;
      int n_se = 0, covered = 0;
      for (const auto& rr : results) {
        const RepFit& rf = rr.fits[fi];
        if (!rf.ok) continue;
        const auto it = rf.se.find(p);
        if (it == rf.se.end()) continue;
        ++n_se;
        se_sum.add(it->second);
        if (std::isfinite(cell.truth) &&
            std::abs(rf.est.at(p) - cell.truth) <= 1.96 * it->second)
          ++covered;
      }
      cell.mean_se = n_se > 0 ? se_sum.value() / n_se : kNaN;
      cell.coverage = (n_se > 0 && std::isfinite(cell.truth))
                          ? static_cast<double>(covered) / n_se
                          : kNaN;
      rep.cells.push_back(std::move(cell));
    }

    int no_se = 0;
    for (const auto& rr : results)
      if (rr.fits[fi].ok && rr.fits[fi].se.empty()) ++no_se;
    if (no_se > 0)
      rep.notes.push_back(label + ": " + std::to_string(no_se) +
                          " replications without standard errors");
  }

  // verdict consistency: a "holds" mechanism should leave the naive fit
  // unbiased, a "fails" mechanism should show up as bias; correct-model
  // families are expected unbiased either way
  if (s.report_only) {
    rep.notes.push_back("report-only scenario: verdict checks skipped");
    return rep;
  }
  std::string verdict = s.stated_verdict;
  if (verdict.empty()) {
    verdict = "holds";
    for (const auto& [ch, v] : rep.car_verdicts) {
      (void)ch;
      if (v.rfind("fails", 0) == 0) verdict = "fails";
    }
  }
  for (const auto& job : s.families) {
    const ParamCell* cell = find_cell(rep, job.label, s.bias_param);
    if (cell == nullptr) {
      rep.notes.push_back(job.label + ": bias parameter '" + s.bias_param + "' not fitted");
      continue;
    }
    const bool small = bias_within(*cell, 3.0);
    const bool consistent =
        naive_family(job.model.family) ? (verdict == "holds" ? small : !small) : small;
    rep.verdict_consistent[job.label] = consistent;
  }
  return rep;
}

std::vector<TypologyRow> typology_suite(const std::vector<Scenario>& cells, int workers) {
  std::vector<TypologyRow> rows;
  for (const auto& s : cells) {
    const StudyReport rep = run_scenario(s, workers);
    TypologyRow row;
    row.cell = s.name;
    row.stated = s.stated_verdict;

    row.classified = "holds";
    for (const auto& [ch, v] : rep.car_verdicts) {
      (void)ch;
      if (v.rfind("fails", 0) == 0) row.classified = "fails";
    }

    if (s.report_only) {
      row.empirical = "n/a";
      row.agree = row.stated.empty() || row.stated == row.classified;
      rows.push_back(std::move(row));
      continue;
    }

    std::size_t naive_idx = 0;
    for (std::size_t fi = 0; fi < s.families.size(); ++fi)
      if (naive_family(s.families[fi].model.family)) {
        naive_idx = fi;
        break;
      }
    const ParamCell* cell = find_cell(rep, s.families[naive_idx].label, s.bias_param);
    require(cell != nullptr, "InvalidScenario",
            s.name + ": bias parameter '" + s.bias_param + "' missing from the naive fit");
    row.empirical = bias_within(*cell, 3.0) ? "unbiased" : "biased";
    row.agree = row.stated == row.classified &&
                (row.classified == "fails" ? row.empirical == "biased"
                                           : row.empirical == "unbiased");
    rows.push_back(std::move(row));
  }
  return rows;
}

// --- rendering ----------------------------------------------------------------

std::string render_study_text(const StudyReport& report) {
  std::ostringstream out;
  out << "scenario: " << report.scenario << "   replications: " << report.replications << "\n";
  if (!report.car_verdicts.empty()) {
    out << "channel verdicts:\n";
    for (const auto& [ch, v] : report.car_verdicts) out << "  " << ch << ": " << v << "\n";
  }
  std::string family;
  for (const auto& c : report.cells) {
    if (c.family != family) {
      family = c.family;
      const auto ex = report.exclusions.find(family);
      out << "family " << family;
      if (ex != report.exclusions.end() && ex->second > 0)
        out << "   (excluded " << ex->second << "/" << report.replications << ")";
      out << "\n";
      out << "  " << std::left << std::setw(16) << "param" << std::right << std::setw(10)
          << "truth" << std::setw(10) << "mean" << std::setw(10) << "bias" << std::setw(10)
          << "mc_se" << std::setw(10) << "emp_sd" << std::setw(10) << "mean_se" << std::setw(8)
          << "cover" << "\n";
    }
    out << "  " << std::left << std::setw(16) << c.param << std::right << fmt(c.truth, 10)
        << fmt(c.mean_est, 10) << fmt(c.bias, 10) << fmt(c.mc_se, 10) << fmt(c.emp_sd, 10)
        << fmt(c.mean_se, 10) << fmt(c.coverage, 8) << "\n";
  }
  if (!report.verdict_consistent.empty()) {
    out << "verdict consistency:\n";
    for (const auto& [fam, ok] : report.verdict_consistent)
      out << "  " << fam << ": " << (ok ? "consistent" : "INCONSISTENT") << "\n";
  }
  for (const auto& n : report.notes) out << "note: " << n << "\n";
  return out.str();
}

std::string render_typology_text(const std::vector<TypologyRow>& rows) {
  std::ostringstream out;
  out << std::left << std::setw(40) << "cell" << std::setw(10) << "stated" << std::setw(12)
      << "classified" << std::setw(12) << "empirical" << "agree" << "\n";
  for (const auto& r : rows)
    out << std::left << std::setw(40) << r.cell << std::setw(10) << r.stated << std::setw(12)
        << r.classified << std::setw(12) << r.empirical << (r.agree ? "yes" : "NO") << "\n";
  return out.str();
}

bool bias_within(const ParamCell& cell, double k) {
  return std::isfinite(cell.bias) && std::isfinite(cell.mc_se) &&
         std::abs(cell.bias) <= k * cell.mc_se;
}

const ParamCell* find_cell(const StudyReport& report, const std::string& family,
                           const std::string& param) {
  for (const auto& c : report.cells)
    if (c.family == family && c.param == param) return &c;
  return nullptr;
}

}  // namespace horizon
