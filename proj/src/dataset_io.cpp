#include "horizon/dataset_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "horizon/common.hpp"
#include "horizon/config.hpp"

namespace horizon {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

double parse_double(const std::string& s, const std::string& where) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  require(res.ec == std::errc{} && res.ptr == s.data() + s.size(), "InvalidData",
          where + ": bad number '" + s + "'");
  return v;
}

std::int64_t parse_int(const std::string& s, const std::string& where) {
  std::int64_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  require(res.ec == std::errc{} && res.ptr == s.data() + s.size(), "InvalidData",
          where + ": bad integer '" + s + "'");
  return v;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  require(out.good(), "IoError", "cannot open '" + path + "' for writing");
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "IoError", "cannot open '" + path + "'");
  return in;
}

void check_name(const std::string& s) {
  require(s.find(',') == std::string::npos && s.find('\n') == std::string::npos, "IoError",
          "name '" + s + "' cannot appear in a CSV field");
}

}  // namespace

namespace {

double eval_factor_law(const FactorLaw& law, double t) {
  if (const auto* c = std::get_if<ConstantFactor>(&law)) return c->value;
  if (const auto* l = std::get_if<LinearFactor>(&law)) return l->intercept + l->slope * t;
  const auto& p = std::get<PiecewiseLinearFactor>(law);
  if (t <= p.times.front()) return p.values.front();
  if (t >= p.times.back()) return p.values.back();
  for (std::size_t k = 1; k < p.times.size(); ++k) {
    if (t <= p.times[k]) {
      const double w = (t - p.times[k - 1]) / (p.times[k] - p.times[k - 1]);
      return p.values[k - 1] + w * (p.values[k] - p.values[k - 1]);
    }
  }
  return p.values.back();
}

}  // namespace

void write_population_csv(const Population& pop, const std::string& grid_path,
                          const std::string& events_path, const std::string& manifest_path,
                          const ParamSet& params) {
  require(pop.system != nullptr, "InvalidPopulation", "population has no system");
  const SystemSpec& spec = pop.system->spec();
  const auto& procs = spec.processes;

  auto grid = open_out(grid_path);
  grid << "subject,t";
  for (const auto& d : procs) {
    check_name(d.name);
    grid << ',' << d.name;
  }
  grid << '\n';
  for (const auto& tr : pop.subjects) {
    const std::int64_t last = tr.last_index();
    for (std::int64_t i = 0; i <= last; ++i) {
      const double t = static_cast<double>(i) * tr.step;
      grid << tr.subject_id << ',' << format_double(t);
      for (const auto& d : procs) {
        grid << ',';
        switch (d.kind) {
          case ProcessKind::counting:
            grid << (tr.jumped_at(d.name, t) ? '1' : '0');
            break;
          case ProcessKind::diffusion:
            grid << format_double(tr.diffusion_paths.at(d.name)[static_cast<std::size_t>(i)]);
            break;
          case ProcessKind::attribute:
            grid << format_double(tr.attributes.at(d.name));
            break;
          case ProcessKind::external_factor: {
            const auto lv = tr.factor_levels.find(d.name);
            if (lv != tr.factor_levels.end())
              grid << format_double(lv->second);
            else if (d.name == spec.factor && !tr.factor_path.empty())
              grid << format_double(tr.factor_path[static_cast<std::size_t>(i)]);
            else
              grid << format_double(eval_factor_law(*d.factor, t));
            break;
          }
        }
      }
      grid << '\n';
    }
  }
  require(grid.good(), "IoError", "write failed on '" + grid_path + "'");

  auto events = open_out(events_path);
  events << "subject,process,time\n";
  for (const auto& tr : pop.subjects)
    for (const auto& [name, t] : tr.jump_times)
      events << tr.subject_id << ',' << name << ',' << format_double(t) << '\n';
  require(events.good(), "IoError", "write failed on '" + events_path + "'");

  json man;
  man["n_subjects"] = pop.subjects.size();
  man["step"] = pop.step;
  man["horizon"] = pop.horizon;
  man["master_seed"] = pop.master_seed;
  man["params"] = params_to_json(params);
  if (!pop.system->sampled_terms().empty()) {
    json samples = json::object();
    for (const auto& tr : pop.subjects) {
      json per_term = json::array();
      bool any = false;
      for (const auto& readings : tr.samples) {
        json arr = json::array();
        for (const auto& [t, v] : readings) arr.push_back({t, v});
        any = any || !readings.empty();
        per_term.push_back(std::move(arr));
      }
      if (any) samples[std::to_string(tr.subject_id)] = std::move(per_term);
    }
    man["samples"] = std::move(samples);
  }
  auto mf = open_out(manifest_path);
  mf << man.dump(2) << '\n';
  require(mf.good(), "IoError", "write failed on '" + manifest_path + "'");
}

Population read_population_csv(const std::string& grid_path, const std::string& events_path,
                               const std::string& manifest_path,
                               std::shared_ptr<const ValidatedSystem> system) {
  require(system != nullptr, "InvalidPopulation", "population reader needs the system spec");
  const SystemSpec& spec = system->spec();

  auto mf = open_in(manifest_path);
  json man;
  try {
    mf >> man;
  } catch (const json::parse_error& e) {
    fail("InvalidData", manifest_path + ": " + e.what());
  }
  Population pop;
  pop.system = system;
  pop.step = man.at("step").get<double>();
  pop.horizon = man.at("horizon").get<double>();
  pop.master_seed = man.value("master_seed", std::uint64_t{0});
  require(pop.step > 0.0, "InvalidData", manifest_path + ": step must be positive");

  // verbatim jump times, keyed by subject
  std::map<std::int64_t, std::map<std::string, double>> jumps;
  {
    auto ef = open_in(events_path);
    std::string line;
    require(static_cast<bool>(std::getline(ef, line)), "InvalidData", events_path + ": empty file");
    std::int64_t lineno = 1;
    while (std::getline(ef, line)) {
      ++lineno;
      if (line.empty()) continue;
      const auto f = split_csv(line);
      const std::string where = events_path + ":" + std::to_string(lineno);
      require(f.size() == 3, "InvalidData", where + ": expected 3 fields");
      jumps[parse_int(f[0], where)][f[1]] = parse_double(f[2], where);
    }
  }

  auto gf = open_in(grid_path);
  std::string line;
  require(static_cast<bool>(std::getline(gf, line)), "InvalidData", grid_path + ": empty file");
  const auto header = split_csv(line);
  require(header.size() >= 2 && header[0] == "subject" && header[1] == "t", "InvalidData",
          grid_path + ": bad header");
  std::map<std::string, std::size_t> col;
  for (std::size_t k = 2; k < header.size(); ++k) col[header[k]] = k;
  for (const auto& d : spec.processes)
    require(col.count(d.name) != 0, "InvalidData",
            grid_path + ": missing column '" + d.name + "'");

  const std::string death =
      system->death_index() >= 0 ? system->process(system->death_index()).name : std::string();
  Trajectory cur;
  bool open = false;
  auto flush = [&]() {
    if (!open) return;
    const auto jt = jumps.find(cur.subject_id);
    if (jt != jumps.end()) {
      cur.jump_times = jt->second;
      const auto dt = cur.jump_times.find(death);
      if (dt != cur.jump_times.end()) cur.death_time = dt->second;
    }
    cur.samples.resize(system->sampled_terms().size());
    pop.subjects.push_back(std::move(cur));
    cur = Trajectory{};
  };

  std::int64_t lineno = 1;
  while (std::getline(gf, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split_csv(line);
    const std::string where = grid_path + ":" + std::to_string(lineno);
    require(f.size() == header.size(), "InvalidData", where + ": wrong field count");
    const std::int64_t id = parse_int(f[0], where);
    if (!open || id != cur.subject_id) {
      flush();
      open = true;
      cur.subject_id = id;
      cur.step = pop.step;
      cur.horizon = pop.horizon;
      for (const auto& d : spec.processes) {
        const double v = parse_double(f[col[d.name]], where);
        if (d.kind == ProcessKind::attribute) cur.attributes[d.name] = v;
        if (d.kind == ProcessKind::external_factor &&
            std::holds_alternative<RandomConstantFactor>(*d.factor))
          cur.factor_levels[d.name] = v;
      }
    }
    for (const auto& d : spec.processes) {
      if (d.kind == ProcessKind::diffusion)
        cur.diffusion_paths[d.name].push_back(parse_double(f[col[d.name]], where));
      else if (d.kind == ProcessKind::external_factor && d.name == spec.factor)
        cur.factor_path.push_back(parse_double(f[col[d.name]], where));
    }
  }
  flush();

  if (man.contains("samples")) {
    std::map<std::int64_t, std::size_t> index;
    for (std::size_t i = 0; i < pop.subjects.size(); ++i)
      index[pop.subjects[i].subject_id] = i;
    for (const auto& [key, per_term] : man["samples"].items()) {
      const auto it = index.find(std::stoll(key));
      require(it != index.end(), "InvalidData",
              manifest_path + ": samples for unknown subject " + key);
      Trajectory& tr = pop.subjects[it->second];
      require(per_term.size() == tr.samples.size(), "InvalidData",
              manifest_path + ": sample group count mismatch for subject " + key);
      for (std::size_t k = 0; k < tr.samples.size(); ++k)
        for (const auto& pair : per_term[k])
          tr.samples[k].emplace_back(pair[0].get<double>(), pair[1].get<double>());
    }
  }
  const auto n = man.value("n_subjects", pop.subjects.size());
  require(n == pop.subjects.size(), "InvalidData",
          grid_path + ": subject count disagrees with the manifest");
  return pop;
}

// --- dataset ------------------------------------------------------------------

void write_dataset_csv(const Dataset& data, const std::string& long_path,
                       const std::string& events_path, const std::string& manifest_path) {
  auto lf = open_out(long_path);
  lf << "subject,channel,time,value\n";
  for (const auto& r : data.longitudinal) {
    check_name(r.channel);
    lf << r.subject << ',' << r.channel << ',' << format_double(r.time) << ','
       << format_double(r.value) << '\n';
  }
  require(lf.good(), "IoError", "write failed on '" + long_path + "'");

  auto ef = open_out(events_path);
  ef << "subject,kind,channel,process,status,entry,exit,left,right,observed\n";
  for (const auto& e : data.events) {
    check_name(e.channel);
    check_name(e.process);
    const char* status = e.status == EventStatus::observed_jump ? "jump"
                         : e.status == EventStatus::interval    ? "interval"
                                                                : "censored";
    ef << e.subject << ",event," << e.channel << ',' << e.process << ',' << status << ','
       << format_double(e.entry) << ',' << format_double(e.exit) << ','
       << format_double(e.left) << ',' << format_double(e.right) << ",\n";
  }
  for (const auto& d : data.deaths) {
    ef << d.subject << ",death,,,,," << format_double(d.time) << ",,," << (d.observed ? 1 : 0)
       << '\n';
  }
  require(ef.good(), "IoError", "write failed on '" + events_path + "'");

  json man;
  man["scheme_fingerprint"] = data.scheme_fingerprint;
  man["horizon"] = data.horizon;
  man["car_verdicts"] = data.car_verdicts;
  auto mf = open_out(manifest_path);
  mf << man.dump(2) << '\n';
  require(mf.good(), "IoError", "write failed on '" + manifest_path + "'");
}

Dataset read_dataset_csv(const std::string& long_path, const std::string& events_path,
                         const std::string& manifest_path) {
  Dataset data;

  auto lf = open_in(long_path);
  std::string line;
  require(static_cast<bool>(std::getline(lf, line)), "InvalidData", long_path + ": empty file");
  std::int64_t lineno = 1;
  while (std::getline(lf, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split_csv(line);
    const std::string where = long_path + ":" + std::to_string(lineno);
    require(f.size() == 4, "InvalidData", where + ": expected 4 fields");
    LongRecord r;
    r.subject = parse_int(f[0], where);
    r.channel = f[1];
    r.time = parse_double(f[2], where);
    r.value = parse_double(f[3], where);
    data.longitudinal.push_back(std::move(r));
  }

  auto ef = open_in(events_path);
  require(static_cast<bool>(std::getline(ef, line)), "InvalidData", events_path + ": empty file");
  lineno = 1;
  while (std::getline(ef, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split_csv(line);
    const std::string where = events_path + ":" + std::to_string(lineno);
    require(f.size() == 10, "InvalidData", where + ": expected 10 fields");
    if (f[1] == "event") {
      EventRecord e;
      e.subject = parse_int(f[0], where);
      e.channel = f[2];
      e.process = f[3];
      if (f[4] == "jump")
        e.status = EventStatus::observed_jump;
      else if (f[4] == "interval")
        e.status = EventStatus::interval;
      else if (f[4] == "censored")
        e.status = EventStatus::right_censored;
      else
        fail("InvalidData", where + ": unknown status '" + f[4] + "'");
      e.entry = parse_double(f[5], where);
      e.exit = parse_double(f[6], where);
      e.left = parse_double(f[7], where);
      e.right = parse_double(f[8], where);
      data.events.push_back(std::move(e));
    } else if (f[1] == "death") {
      DeathRecord d;
      d.subject = parse_int(f[0], where);
      d.time = parse_double(f[6], where);
      d.observed = parse_int(f[9], where) != 0;
      data.deaths.push_back(d);
    } else {
      fail("InvalidData", where + ": unknown record kind '" + f[1] + "'");
    }
  }

  auto mf = open_in(manifest_path);
  json man;
  try {
    mf >> man;
  } catch (const json::parse_error& e) {
    fail("InvalidData", manifest_path + ": " + e.what());
  }
  data.scheme_fingerprint = man.value("scheme_fingerprint", std::uint64_t{0});
  data.horizon = man.value("horizon", 0.0);
  if (man.contains("car_verdicts"))
    for (const auto& [k, v] : man["car_verdicts"].items())
      data.car_verdicts[k] = v.get<std::string>();
  return data;
}

// --- reports ------------------------------------------------------------------

void write_study_csv(const StudyReport& rep, const std::string& path) {
  auto out = open_out(path);
  out << "scenario,family,param,truth,mean_est,bias,mc_se,emp_sd,mean_se,coverage,used\n";
  for (const auto& c : rep.cells) {
    check_name(c.family);
    check_name(c.param);
    out << rep.scenario << ',' << c.family << ',' << c.param << ',' << format_double(c.truth)
        << ',' << format_double(c.mean_est) << ',' << format_double(c.bias) << ','
        << format_double(c.mc_se) << ',' << format_double(c.emp_sd) << ','
        << format_double(c.mean_se) << ',' << format_double(c.coverage) << ',' << c.used << '\n';
  }
  require(out.good(), "IoError", "write failed on '" + path + "'");
}

void write_typology_csv(const std::vector<TypologyRow>& rows, const std::string& path) {
  auto out = open_out(path);
  out << "cell,stated,classified,empirical,agree\n";
  for (const auto& r : rows) {
    out << r.cell << ',' << r.stated << ',' << r.classified << ',' << r.empirical << ','
        << (r.agree ? 1 : 0) << '\n';
  }
  require(out.good(), "IoError", "write failed on '" + path + "'");
}

}  // namespace horizon
