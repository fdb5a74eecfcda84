#pragma once

// Scenario definitions (single nominal day; intra-patient variability
// variants 2A-2D), seeded parameter/initial-condition sampling, and the
// Monte Carlo batch runner.

#include <algorithm>
#include <array>
#include <atomic>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "glucoctl/contraction.hpp"
#include "glucoctl/metrics.hpp"
#include "glucoctl/model.hpp"
#include "glucoctl/sim.hpp"

namespace glucoctl {

// Relative half-widths for p1..p5 (EGP and p6 are never perturbed).
struct PerturbationSpec {
  std::array<double, 5> half_width{0, 0, 0, 0, 0};

  void validate() const {
    for (double w : half_width) {
      if (!(w >= 0.0 && w < 1.0)) {
        throw ConfigError("perturbation half-widths must lie in [0, 1)");
      }
    }
  }

  friend bool operator==(const PerturbationSpec&, const PerturbationSpec&) = default;
};

// Initial plant state; x1 and x3 may be drawn from intervals (lo == hi means fixed).
struct InitSpec {
  Interval x1{120, 120};
  double x2 = 0.01;
  Interval x3{1, 1};
  double x4 = 1;

  void validate() const {
    if (!(x1.lo <= x1.hi) || !(x3.lo <= x3.hi)) {
      throw ConfigError("initial-condition intervals must be nonempty");
    }
  }

  // State the observer starts from: interval midpoints.
  PlantState nominal() const {
    return {0.5 * (x1.lo + x1.hi), x2, 0.5 * (x3.lo + x3.hi), x4};
  }

  friend bool operator==(const InitSpec&, const InitSpec&) = default;
};

struct ScenarioSetup {
  std::string id;  // "1", "2A".."2D"
  PatientParams nominal;
  PerturbationSpec perturbation;
  InitSpec init;
  std::vector<Meal> meals;
  double duration = 1440.0;
};

inline std::vector<Meal> three_meal_day() {
  return {{10.0, 75.0}, {360.0, 75.0}, {720.0, 75.0}};
}

inline ScenarioSetup scenario1(const std::string& subject) {
  ScenarioSetup s;
  s.id = "1";
  s.nominal = reference_subject(subject);
  s.init = InitSpec{{120, 120}, 0.01, {1, 1}, 1};
  s.meals = three_meal_day();
  s.duration = 1440.0;
  return s;
}

// Variability variants. 2A-2C start from x2 = 0.1; 2D from 0.01.
inline ScenarioSetup scenario2(const std::string& variant,
                               const std::string& subject) {
  ScenarioSetup s;
  s.id = variant;
  s.nominal = reference_subject(subject);
  s.meals = three_meal_day();
  s.duration = 1440.0;
  constexpr double w = 0.30;
  if (variant == "2A") {
    s.perturbation.half_width = {0, 0, w, 0, 0};
    s.init = InitSpec{{120, 120}, 0.1, {1, 1}, 1};
  } else if (variant == "2B") {
    s.perturbation.half_width = {0, 0, 0, w, w};
    s.init = InitSpec{{120, 120}, 0.1, {1, 1}, 1};
  } else if (variant == "2C") {
    s.perturbation.half_width = {w, w, w, w, w};
    s.init = InitSpec{{120, 120}, 0.1, {1, 1}, 1};
  } else if (variant == "2D") {
    s.perturbation.half_width = {w, w, w, w, w};
    s.init = InitSpec{{80, 140}, 0.01, {0, 10}, 1};
  } else {
    throw ConfigError("unknown scenario variant '" + variant + "' (2A|2B|2C|2D)");
  }
  return s;
}

inline ScenarioSetup make_scenario(const std::string& id,
                                   const std::string& subject) {
  if (id == "1") return scenario1(subject);
  return scenario2(id, subject);
}

// Per-trial random stream. The seed depends only on (master_seed, trial), so
// results do not depend on which worker runs a trial or in what order.
class TrialStream {
 public:
  static std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t trial) {
    return splitmix64(splitmix64(master_seed) ^ splitmix64(trial + 0x632BE59BD9B4E019ull));
  }

  TrialStream(std::uint64_t master_seed, std::uint64_t trial)
      : seed_(derive_seed(master_seed, trial)), engine_(seed_) {}

  explicit TrialStream(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }

  // Uniform on [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

 private:
  static std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
  }

  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

inline PatientParams sample_patient(const PatientParams& nominal,
                                    const PerturbationSpec& spec,
                                    TrialStream& rng) {
  spec.validate();
  PatientParams p = nominal;
  std::array<double*, 5> slots{&p.p1, &p.p2, &p.p3, &p.p4, &p.p5};
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const double w = spec.half_width[i];
    if (w == 0.0) continue;
    const double base = *slots[i];
    *slots[i] = rng.uniform((1.0 - w) * base, (1.0 + w) * base);
  }
  return p;
}

inline PlantState sample_initial_state(const InitSpec& init, TrialStream& rng) {
  init.validate();
  auto draw = [&](const Interval& iv) {
    return iv.lo == iv.hi ? iv.lo : rng.uniform(iv.lo, iv.hi);
  };
  const double x1 = draw(init.x1);
  const double x3 = draw(init.x3);
  return {x1, init.x2, x3, init.x4};
}

struct MonteCarloConfig {
  std::string subject = "1";
  std::string scenario = "2C";
  int trial_count = 100;
  std::uint64_t master_seed = 20240101;
  double setpoint = 120.0;
  std::vector<Meal> meals = three_meal_day();
  SimOptions sim;
  MealParams meal_params;
  ControlLimits limits;
  PerturbationSpec perturbation;
  InitSpec init;
  std::string gains_path;  // certificate file; empty = synthesize from nominal

  void validate() const {
    if (trial_count < 1) throw ConfigError("trial_count must be >= 1");
    perturbation.validate();
    init.validate();
    try {
      sim.validate();
      meal_params.validate();
      limits.validate();
    } catch (const DomainError& e) {
      throw ConfigError(e.what());
    }
    for (const auto& m : meals) {
      if (!(m.time >= 0.0) || !(m.time < sim.duration) || !(m.grams >= 0.0)) {
        throw ConfigError("meals must lie in [0, duration) with nonnegative grams");
      }
    }
  }
};

// Config with the scenario's perturbation, initial conditions, meals and
// duration filled in.
inline MonteCarloConfig monte_carlo_config(const std::string& scenario,
                                           const std::string& subject) {
  const ScenarioSetup s = make_scenario(scenario, subject);
  MonteCarloConfig cfg;
  cfg.subject = subject;
  cfg.scenario = scenario;
  cfg.meals = s.meals;
  cfg.sim.duration = s.duration;
  cfg.perturbation = s.perturbation;
  cfg.init = s.init;
  return cfg;
}

struct TrajectorySummary {
  double min_bg = 0;
  double max_bg = 0;
  double final_bg = 0;
  std::size_t samples = 0;
  std::size_t violations = 0;
};

struct TrialResult {
  int index = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  PatientParams patient;
  PlantState x0 = PlantState::Zero();
  TrajectorySummary summary;
  GlycemicReport report;
};

struct MonteCarloAggregate {
  int trials = 0;
  int completed = 0;
  int failed = 0;
  double pct_eu = 0;
  double pct_hyper = 0;
  double pct_hypo = 0;
  double pct_severe_hypo = 0;
  double lbgi = 0;
  double hbgi = 0;
  double mean_bg = 0;
  double cov = 0;
  double hba1c = 0;
  double min_bg = 0;  // over all trials
  double max_bg = 0;
  std::map<std::string, int> cvga_counts;
};

struct MonteCarloResult {
  std::vector<TrialResult> trials;
  MonteCarloAggregate aggregate;
};

inline TrajectorySummary summarize(const Trajectory& tr) {
  const auto g = tr.glucose();
  TrajectorySummary s;
  const auto [lo, hi] = std::minmax_element(g.begin(), g.end());
  s.min_bg = *lo;
  s.max_bg = *hi;
  s.final_bg = g.back();
  s.samples = g.size();
  s.violations = tr.violation_count();
  return s;
}

struct TrialInputs {
  std::uint64_t seed = 0;
  PatientParams nominal;
  PatientParams patient;
  EquilibriumPoint eq;
  PlantState x0 = PlantState::Zero();
  PlantState xh0 = PlantState::Zero();
};

// Draws trial `index`: parameters first, then initial conditions. The observer
// starts from the nominal initial state with x1 set to the first reading.
inline TrialInputs trial_inputs(const MonteCarloConfig& cfg, int index) {
  TrialInputs in;
  TrialStream rng(cfg.master_seed, static_cast<std::uint64_t>(index));
  in.seed = rng.seed();
  in.nominal = reference_subject(cfg.subject);
  in.patient = sample_patient(in.nominal, cfg.perturbation, rng);
  in.x0 = sample_initial_state(cfg.init, rng);
  in.xh0 = cfg.init.nominal();
  in.xh0[idx::glucose] = in.x0[idx::glucose];
  in.eq = equilibrium_for_setpoint(in.nominal, cfg.setpoint);
  return in;
}

// Closed loop for one trial with the nominal-model observer and controller.
inline Trajectory simulate_trial(const MonteCarloConfig& cfg,
                                 const GainSet& gains, const TrialInputs& in) {
  return simulate_closed_loop(in.patient, in.nominal, in.eq,
                              gains.observer_gain(), gains.controller_gain(),
                              cfg.limits, cfg.meals, cfg.meal_params, in.x0,
                              in.xh0, cfg.sim);
}

inline TrialResult run_trial(const MonteCarloConfig& cfg, const GainSet& gains,
                             int index) {
  TrialResult r;
  r.index = index;
  const TrialInputs in = trial_inputs(cfg, index);
  r.seed = in.seed;
  r.patient = in.patient;
  r.x0 = in.x0;
  try {
    const Trajectory tr = simulate_trial(cfg, gains, in);
    r.summary = summarize(tr);
    r.report = glycemic_report(tr.glucose());
    r.ok = true;
  } catch (const IntegrationError& e) {
    r.error = "trial " + std::to_string(index) + ": " + e.what();
  } catch (const DomainError& e) {
    r.error = "trial " + std::to_string(index) + ": " + e.what();
  }
  return r;
}

inline MonteCarloAggregate aggregate_trials(const std::vector<TrialResult>& trials) {
  MonteCarloAggregate a;
  a.trials = static_cast<int>(trials.size());
  bool first = true;
  for (const auto& t : trials) {  // index order
    if (!t.ok) {
      ++a.failed;
      continue;
    }
    ++a.completed;
    const auto& r = t.report;
    a.pct_eu += r.pct_eu;
    a.pct_hyper += r.pct_hyper;
    a.pct_hypo += r.pct_hypo;
    a.pct_severe_hypo += r.pct_severe_hypo;
    a.lbgi += r.lbgi;
    a.hbgi += r.hbgi;
    a.mean_bg += r.mean_bg;
    a.cov += r.cov;
    a.hba1c += r.hba1c;
    a.min_bg = first ? r.min_bg : std::min(a.min_bg, r.min_bg);
    a.max_bg = first ? r.max_bg : std::max(a.max_bg, r.max_bg);
    first = false;
    ++a.cvga_counts[to_string(r.cvga)];
  }
  if (a.completed > 0) {
    const double n = a.completed;
    for (double* v : {&a.pct_eu, &a.pct_hyper, &a.pct_hypo, &a.pct_severe_hypo,
                      &a.lbgi, &a.hbgi, &a.mean_bg, &a.cov, &a.hba1c}) {
      *v /= n;
    }
  }
  return a;
}

// Trials are distributed over `workers` threads; results are stored by trial
// index and reduced in index order.
inline MonteCarloResult run_monte_carlo(const MonteCarloConfig& cfg,
                                        const GainSet& gains, int workers = 1) {
  cfg.validate();
  equilibrium_for_setpoint(reference_subject(cfg.subject), cfg.setpoint);
  MonteCarloResult out;
  out.trials.resize(static_cast<std::size_t>(cfg.trial_count));
  std::atomic<int> next{0};
  auto work = [&] {
    for (int i = next++; i < cfg.trial_count; i = next++) {
      out.trials[static_cast<std::size_t>(i)] = run_trial(cfg, gains, i);
    }
  };
  const int n_threads = std::clamp(workers, 1, cfg.trial_count);
  if (n_threads == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(static_cast<std::size_t>(n_threads));
    for (int w = 0; w < n_threads; ++w) pool.emplace_back(work);
  }
  out.aggregate = aggregate_trials(out.trials);
  return out;
}

}  // namespace glucoctl
