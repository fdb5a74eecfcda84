#pragma once

// JSON and CSV (de)serialization for patients, certificates, gain sets,
// Monte Carlo configurations, reports and trajectories.

#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "glucoctl/contraction.hpp"
#include "glucoctl/metrics.hpp"
#include "glucoctl/scenarios.hpp"
#include "glucoctl/sim.hpp"

namespace glucoctl {

using json = nlohmann::ordered_json;

namespace io_detail {

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  return it->get<T>();
}

inline json vec_to_json(const Vec4& v) { return json::array({v[0], v[1], v[2], v[3]}); }

inline Vec4 vec_from_json(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 4) {
    throw ConfigError(std::string(what) + " must be an array of 4 numbers");
  }
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
}

inline json interval_to_json(const Interval& iv) { return json::array({iv.lo, iv.hi}); }

inline Interval interval_from_json(const json& j) {
  if (j.is_number()) return {j.get<double>(), j.get<double>()};
  if (!j.is_array() || j.size() != 2) {
    throw ConfigError("interval must be a number or [lo, hi]");
  }
  return {j[0].get<double>(), j[1].get<double>()};
}

}  // namespace io_detail

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("invalid JSON in '" + path + "': " + e.what());
  }
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out << text;
}

inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

// ---- patients -------------------------------------------------------------

inline json to_json(const PatientParams& p) {
  return {{"label", p.label}, {"p1", p.p1}, {"p2", p.p2}, {"p3", p.p3},
          {"p4", p.p4},       {"p5", p.p5}, {"p6", p.p6}, {"egp", p.egp}};
}

inline PatientParams patient_from_json(const json& j) {
  try {
    PatientParams p;
    p.label = j.value("label", std::string{});
    p.p1 = j.at("p1").get<double>();
    p.p2 = j.at("p2").get<double>();
    p.p3 = j.at("p3").get<double>();
    p.p4 = j.at("p4").get<double>();
    p.p5 = j.at("p5").get<double>();
    p.p6 = j.at("p6").get<double>();
    p.egp = j.at("egp").get<double>();
    if (!p.valid()) throw ConfigError("patient '" + p.label + "' has nonpositive parameters");
    return p;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("patient entry: ") + e.what());
  }
}

inline std::vector<PatientParams> patients_from_json(const json& j) {
  const json& arr = j.is_object() ? j.at("subjects") : j;
  std::vector<PatientParams> out;
  for (const auto& e : arr) out.push_back(patient_from_json(e));
  return out;
}

inline std::vector<PatientParams> load_patients(const std::string& path) {
  return patients_from_json(read_json_file(path));
}

// ---- meal / sim / limits --------------------------------------------------

inline json to_json(const MealParams& m) {
  return {{"t_max", m.t_max},
          {"bio", m.bio},
          {"bio_units", m.bio_units == BioUnits::percent ? "percent" : "fraction"},
          {"carb_gain", m.carb_gain},
          {"pulse_width", m.pulse_width}};
}

inline MealParams meal_params_from_json(const json& j, MealParams m = {}) {
  using io_detail::get_or;
  m.t_max = get_or(j, "t_max", m.t_max);
  m.bio = get_or(j, "bio", m.bio);
  const std::string units = get_or<std::string>(
      j, "bio_units", m.bio_units == BioUnits::percent ? "percent" : "fraction");
  if (units == "percent") m.bio_units = BioUnits::percent;
  else if (units == "fraction") m.bio_units = BioUnits::fraction;
  else throw ConfigError("bio_units must be 'percent' or 'fraction'");
  m.carb_gain = get_or(j, "carb_gain", m.carb_gain);
  m.pulse_width = get_or(j, "pulse_width", m.pulse_width);
  m.validate();
  return m;
}

inline json to_json(const SimOptions& s) {
  return {{"step_h", s.step_h}, {"record_every", s.record_every}, {"duration", s.duration}};
}

inline SimOptions sim_options_from_json(const json& j, SimOptions s = {}) {
  using io_detail::get_or;
  s.step_h = get_or(j, "step_h", s.step_h);
  s.record_every = get_or(j, "record_every", s.record_every);
  s.duration = get_or(j, "duration", s.duration);
  return s;
}

inline json to_json(const ControlLimits& l) {
  json u_max = std::isfinite(l.u_max) ? json(l.u_max) : json(nullptr);
  return {{"u_min", l.u_min}, {"u_max", u_max}, {"hold_period", l.hold_period}};
}

inline ControlLimits limits_from_json(const json& j, ControlLimits l = {}) {
  using io_detail::get_or;
  l.u_min = get_or(j, "u_min", l.u_min);
  l.u_max = get_or(j, "u_max", l.u_max);
  l.hold_period = get_or(j, "hold_period", l.hold_period);
  l.validate();
  return l;
}

inline json to_json(const std::vector<Meal>& meals) {
  json arr = json::array();
  for (const auto& m : meals) arr.push_back({{"time", m.time}, {"grams", m.grams}});
  return arr;
}

inline std::vector<Meal> meals_from_json(const json& j) {
  std::vector<Meal> out;
  for (const auto& e : j) {
    out.push_back({e.at("time").get<double>(), e.at("grams").get<double>()});
  }
  return out;
}

// ---- certificates ---------------------------------------------------------

inline json to_json(const StateBox& b) {
  return {{"glucose", io_detail::interval_to_json(b.glucose)},
          {"insulin", io_detail::interval_to_json(b.insulin)}};
}

inline StateBox box_from_json(const json& j) {
  StateBox b;
  b.glucose = io_detail::interval_from_json(j.at("glucose"));
  if (j.contains("insulin")) b.insulin = io_detail::interval_from_json(j.at("insulin"));
  b.validate();
  return b;
}

inline json to_json(const Certificate& c) {
  return {{"target", c.target == CertificateTarget::observer ? "observer" : "controller"},
          {"subject", c.subject},
          {"kind", to_string(c.kind)},
          {"mode", to_string(c.mode)},
          {"gains", io_detail::vec_to_json(c.gains)},
          {"theta", io_detail::vec_to_json(c.theta)},
          {"box", to_json(c.box)},
          {"margin", c.margin}};
}

inline Certificate certificate_from_json(const json& j) {
  try {
    Certificate c;
    const std::string target = j.at("target").get<std::string>();
    if (target == "observer") c.target = CertificateTarget::observer;
    else if (target == "controller") c.target = CertificateTarget::controller;
    else throw ConfigError("certificate target must be observer|controller");
    c.subject = j.value("subject", std::string{});
    c.kind = measure_kind_from_string(j.at("kind").get<std::string>());
    c.mode = jacobian_mode_from_string(j.value("mode", std::string("corrected")));
    c.gains = io_detail::vec_from_json(j.at("gains"), "gains");
    c.theta = io_detail::vec_from_json(j.at("theta"), "theta");
    c.box = box_from_json(j.at("box"));
    c.margin = j.at("margin").get<double>();
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("certificate: ") + e.what());
  }
}

inline json to_json(const GainSet& g) {
  return {{"subject", g.observer.subject},
          {"mode", to_string(g.controller.mode)},
          {"kind", to_string(g.observer.kind)},
          {"L", io_detail::vec_to_json(g.observer.gains)},
          {"K", io_detail::vec_to_json(g.controller.gains)},
          {"margin", g.margin()},
          {"observer", to_json(g.observer)},
          {"controller", to_json(g.controller)}};
}

inline GainSet gain_set_from_json(const json& j) {
  try {
    return {certificate_from_json(j.at("observer")),
            certificate_from_json(j.at("controller"))};
  } catch (const json::exception& e) {
    throw ConfigError(std::string("gain file: ") + e.what());
  }
}

inline GainSet load_gain_set(const std::string& path) {
  return gain_set_from_json(read_json_file(path));
}

// ---- Monte Carlo configuration -------------------------------------------

inline json to_json(const PerturbationSpec& p) {
  const auto& w = p.half_width;
  return {{"p1", w[0]}, {"p2", w[1]}, {"p3", w[2]}, {"p4", w[3]}, {"p5", w[4]}};
}

inline PerturbationSpec perturbation_from_json(const json& j, PerturbationSpec p = {}) {
  const char* keys[] = {"p1", "p2", "p3", "p4", "p5"};
  for (int i = 0; i < 5; ++i) p.half_width[i] = io_detail::get_or(j, keys[i], p.half_width[i]);
  p.validate();
  return p;
}

inline json to_json(const InitSpec& s) {
  return {{"x1", io_detail::interval_to_json(s.x1)},
          {"x2", s.x2},
          {"x3", io_detail::interval_to_json(s.x3)},
          {"x4", s.x4}};
}

inline InitSpec init_from_json(const json& j, InitSpec s = {}) {
  if (j.contains("x1")) s.x1 = io_detail::interval_from_json(j["x1"]);
  s.x2 = io_detail::get_or(j, "x2", s.x2);
  if (j.contains("x3")) s.x3 = io_detail::interval_from_json(j["x3"]);
  s.x4 = io_detail::get_or(j, "x4", s.x4);
  s.validate();
  return s;
}

inline json to_json(const MonteCarloConfig& c) {
  json j = {{"subject", c.subject},
            {"scenario", c.scenario},
            {"trial_count", c.trial_count},
            {"master_seed", c.master_seed},
            {"setpoint", c.setpoint},
            {"meals", to_json(c.meals)},
            {"sim", to_json(c.sim)},
            {"meal_params", to_json(c.meal_params)},
            {"limits", to_json(c.limits)},
            {"perturbation", to_json(c.perturbation)},
            {"init", to_json(c.init)}};
  if (!c.gains_path.empty()) j["gains"] = c.gains_path;
  return j;
}

// Scenario defaults first, then any keys present in the file.
inline MonteCarloConfig monte_carlo_config_from_json(const json& j) {
  try {
    const std::string subject = j.value("subject", std::string("1"));
    const std::string scenario = j.value("scenario", std::string("2C"));
    MonteCarloConfig c = monte_carlo_config(scenario, subject);
    c.trial_count = j.value("trial_count", c.trial_count);
    c.master_seed = j.value("master_seed", c.master_seed);
    c.setpoint = j.value("setpoint", c.setpoint);
    if (j.contains("meals")) c.meals = meals_from_json(j["meals"]);
    if (j.contains("sim")) c.sim = sim_options_from_json(j["sim"], c.sim);
    if (j.contains("meal_params")) c.meal_params = meal_params_from_json(j["meal_params"], c.meal_params);
    if (j.contains("limits")) c.limits = limits_from_json(j["limits"], c.limits);
    if (j.contains("perturbation")) c.perturbation = perturbation_from_json(j["perturbation"], c.perturbation);
    if (j.contains("init")) c.init = init_from_json(j["init"], c.init);
    c.gains_path = j.value("gains", std::string{});
    c.validate();
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("Monte Carlo config: ") + e.what());
  }
}

// ---- reports --------------------------------------------------------------

inline json to_json(const GlycemicReport& r) {
  return {{"pct_eu", r.pct_eu},       {"pct_hyper", r.pct_hyper},
          {"pct_hypo", r.pct_hypo},   {"pct_severe_hypo", r.pct_severe_hypo},
          {"lbgi", r.lbgi},           {"hbgi", r.hbgi},
          {"mean_bg", r.mean_bg},     {"cov", r.cov},
          {"hba1c", r.hba1c},         {"cvga", to_string(r.cvga)},
          {"min_bg", r.min_bg},       {"max_bg", r.max_bg}};
}

inline json to_json(const TrajectorySummary& s) {
  return {{"min_bg", s.min_bg},
          {"max_bg", s.max_bg},
          {"final_bg", s.final_bg},
          {"samples", s.samples},
          {"violations", s.violations}};
}

inline json to_json(const TrialResult& t) {
  json j = {{"index", t.index}, {"seed", t.seed}, {"ok", t.ok}};
  if (!t.ok) j["error"] = t.error;
  j["patient"] = to_json(t.patient);
  j["x0"] = io_detail::vec_to_json(t.x0);
  if (t.ok) {
    j["summary"] = to_json(t.summary);
    j["report"] = to_json(t.report);
  }
  return j;
}

inline json to_json(const MonteCarloAggregate& a) {
  json zones = json::object();
  for (const auto& [k, v] : a.cvga_counts) zones[k] = v;
  return {{"trials", a.trials},       {"completed", a.completed},
          {"failed", a.failed},       {"pct_eu", a.pct_eu},
          {"pct_hyper", a.pct_hyper}, {"pct_hypo", a.pct_hypo},
          {"pct_severe_hypo", a.pct_severe_hypo},
          {"lbgi", a.lbgi},           {"hbgi", a.hbgi},
          {"mean_bg", a.mean_bg},     {"cov", a.cov},
          {"hba1c", a.hba1c},         {"min_bg", a.min_bg},
          {"max_bg", a.max_bg},       {"cvga_counts", zones}};
}

// One row per subject/scenario: time in range followed by summary statistics.
inline std::string summary_csv_header() {
  return "subject,scenario,pct_eu,pct_hyper,pct_hypo,pct_severe_hypo,mean_bg,cov,hba1c,lbgi,hbgi\n";
}

inline std::string summary_csv_row(const std::string& subject,
                                   const std::string& scenario,
                                   const MonteCarloAggregate& a) {
  std::ostringstream os;
  os << subject << ',' << scenario;
  for (double v : {a.pct_eu, a.pct_hyper, a.pct_hypo, a.pct_severe_hypo, a.mean_bg,
                   a.cov, a.hba1c, a.lbgi, a.hbgi}) {
    os << ',' << format_double(v);
  }
  os << '\n';
  return os.str();
}

// ---- trajectory CSV -------------------------------------------------------

inline Trajectory read_trajectory_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("trajectory CSV is empty");
  if (line != "t,x1,x2,x3,x4,xh1,xh2,xh3,xh4,u,ra,d1,d2") {
    throw ConfigError("unexpected trajectory CSV header: " + line);
  }
  Trajectory tr;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<double> v;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        v.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw ConfigError("bad number on CSV line " + std::to_string(lineno));
      }
    }
    if (v.size() != 13) {
      throw ConfigError("CSV line " + std::to_string(lineno) + " has " +
                        std::to_string(v.size()) + " fields, expected 13");
    }
    tr.times.push_back(v[0]);
    tr.x.emplace_back(v[1], v[2], v[3], v[4]);
    tr.xh.emplace_back(v[5], v[6], v[7], v[8]);
    tr.u.push_back(v[9]);
    tr.ra.push_back(v[10]);
    tr.meal.emplace_back(v[11], v[12]);
    tr.violation.push_back(v[1] < 0.0 || v[3] < 0.0 || v[4] < 0.0);
  }
  if (tr.size() == 0) throw ConfigError("trajectory CSV has no rows");
  return tr;
}

inline Trajectory load_trajectory_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  return read_trajectory_csv(in);
}

}  // namespace glucoctl
