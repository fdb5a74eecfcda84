#pragma once

// Fixed-step RK4 integration of plant + gut + observer with a sample-and-hold
// controller.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <string>
#include <system_error>
#include <vector>

#include "glucoctl/control.hpp"
#include "glucoctl/model.hpp"

namespace glucoctl {

// Classical four-stage Runge-Kutta step.
template <typename State, typename Field>
State rk4_step(Field&& f, double t, const State& x, double h) {
  if (!(h > 0.0)) throw DomainError("rk4_step: step must be positive");
  auto checked = [t](State k, const char* stage) {
    if (!k.allFinite()) {
      throw IntegrationError(std::string("non-finite RK4 stage ") + stage, t);
    }
    return k;
  };
  const State k1 = checked(f(t, x), "k1");
  const State k2 = checked(f(t + 0.5 * h, State(x + 0.5 * h * k1)), "k2");
  const State k3 = checked(f(t + 0.5 * h, State(x + 0.5 * h * k2)), "k3");
  const State k4 = checked(f(t + h, State(x + h * k3)), "k4");
  return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

struct SimOptions {
  double step_h = 0.1;         // [min]
  double record_every = 1.0;   // [min]
  double duration = 1440.0;    // [min]
  double hold_period = 1.0;    // [min]

  // Number of integrator steps in `span`, which must be a whole multiple.
  long steps_in(double span, const char* what) const {
    const double r = span / step_h;
    const long n = std::lround(r);
    if (n < 1 || std::abs(r - static_cast<double>(n)) > 1e-9 * std::max(1.0, r)) {
      throw DomainError(std::string(what) + " must be a positive multiple of step_h");
    }
    return n;
  }

  void validate() const {
    if (!(step_h > 0.0) || !(duration > 0.0) || !std::isfinite(duration)) {
      throw DomainError("step_h and duration must be positive");
    }
    steps_in(record_every, "record_every");
    steps_in(hold_period, "hold_period");
    steps_in(duration, "duration");
  }
};

struct Trajectory {
  std::vector<double> times;
  std::vector<PlantState> x;
  std::vector<PlantState> xh;
  std::vector<double> u;
  std::vector<double> ra;
  std::vector<MealState> meal;
  // 1 where x1 < 0, x3 < 0 or x4 < 0 (the model left its physical domain)
  std::vector<std::uint8_t> violation;

  std::size_t size() const { return times.size(); }

  std::size_t violation_count() const {
    std::size_t n = 0;
    for (auto v : violation) n += v;
    return n;
  }

  std::vector<double> glucose() const {
    std::vector<double> g;
    g.reserve(x.size());
    for (const auto& s : x) g.push_back(s[idx::glucose]);
    return g;
  }
};

using SimState = Eigen::Matrix<double, 10, 1>;

namespace detail {

inline SimState pack(const PlantState& x, const MealState& m,
                     const PlantState& xh) {
  SimState z;
  z << x, m, xh;
  return z;
}

// Shared integration loop. `p` drives the plant and `model` the observer;
// `input_at(xh)` is evaluated from the current estimate at each hold boundary.
template <typename InputPolicy>
Trajectory integrate(const PatientParams& p, const PatientParams& model,
                     const ObserverGain& L,
                     const std::vector<Meal>& meals, const MealParams& mp,
                     const PlantState& x0, const PlantState& xh0,
                     const SimOptions& opts, InputPolicy&& input_at) {
  require_valid(p);
  require_valid(model);
  mp.validate();
  opts.validate();
  if (!x0.allFinite() || !xh0.allFinite()) {
    throw DomainError("initial states must be finite");
  }
  for (const auto& meal : meals) {
    if (!(meal.time >= 0.0) || !(meal.time < opts.duration) || !(meal.grams >= 0.0)) {
      throw DomainError("meals must lie in [0, duration) with nonnegative grams");
    }
  }

  const long n_steps = opts.steps_in(opts.duration, "duration");
  const long rec_steps = opts.steps_in(opts.record_every, "record_every");
  const long hold_steps = opts.steps_in(opts.hold_period, "hold_period");
  const double h = opts.step_h;

  Trajectory tr;
  const std::size_t n_rec = static_cast<std::size_t>(n_steps / rec_steps) + 1;
  tr.times.reserve(n_rec);
  tr.x.reserve(n_rec);
  tr.xh.reserve(n_rec);
  tr.u.reserve(n_rec);
  tr.ra.reserve(n_rec);
  tr.meal.reserve(n_rec);
  tr.violation.reserve(n_rec);

  SimState z = pack(x0, MealState::Zero(), xh0);
  double u = 0.0;

  auto record = [&](double t) {
    const PlantState x = z.head<4>();
    tr.times.push_back(t);
    tr.x.push_back(x);
    tr.xh.push_back(z.tail<4>());
    tr.u.push_back(u);
    tr.meal.push_back(z.segment<2>(4));
    tr.ra.push_back(z[5] / mp.t_max);
    tr.violation.push_back(x[0] < 0.0 || x[2] < 0.0 || x[3] < 0.0);
  };

  for (long i = 0; i <= n_steps; ++i) {
    const double t = static_cast<double>(i) * h;
    if (i % hold_steps == 0) {
      u = input_at(PlantState(z.tail<4>()));
    }
    if (i % rec_steps == 0) record(t);
    if (i == n_steps) break;

    const double carb = carb_rate_average(meals, mp, t, t + h);
    auto field = [&](double, const SimState& s) {
      const PlantState x = s.head<4>();
      const MealDeriv md = meal_deriv(s.segment<2>(4), mp, carb);
      SimState ds;
      ds << plant_deriv(x, p, u, md.ra), md.dm,
          observer_deriv(s.tail<4>(), x[0], u, model, L);
      return ds;
    };
    z = rk4_step(field, t, z, h);
  }
  return tr;
}

}  // namespace detail

// Plant parameters `plant` may differ from the nominal `model` the observer
// and the equilibrium were built from. The hold period of `lim` overrides the
// one in `opts`.
inline Trajectory simulate_closed_loop(
    const PatientParams& plant, const PatientParams& model,
    const EquilibriumPoint& eq, const ObserverGain& L, const ControllerGain& K,
    const ControlLimits& lim, const std::vector<Meal>& meals,
    const MealParams& mp, const PlantState& x0, const PlantState& xh0,
    const SimOptions& opts) {
  lim.validate();
  SimOptions o = opts;
  o.hold_period = lim.hold_period;
  return detail::integrate(plant, model, L, meals, mp, x0, xh0, o,
                           [&](const PlantState& xh) {
                             return control_law(xh, eq, K, lim);
                           });
}

inline Trajectory simulate_closed_loop(
    const PatientParams& p, const EquilibriumPoint& eq, const ObserverGain& L,
    const ControllerGain& K, const ControlLimits& lim,
    const std::vector<Meal>& meals, const MealParams& mp, const PlantState& x0,
    const PlantState& xh0, const SimOptions& opts) {
  return simulate_closed_loop(p, p, eq, L, K, lim, meals, mp, x0, xh0, opts);
}

// Open-loop estimation run: the plant receives a constant input and one meal;
// the observer runs alongside from its own initial estimate.
inline Trajectory simulate_estimation(const PatientParams& p,
                                      const ObserverGain& L, const Meal& meal,
                                      const MealParams& mp,
                                      const PlantState& x0,
                                      const PlantState& xh0, double u_const,
                                      const SimOptions& opts) {
  if (!std::isfinite(u_const) || u_const < 0.0) {
    throw DomainError("constant input must be finite and nonnegative");
  }
  return detail::integrate(p, p, L, {meal}, mp, x0, xh0, opts,
                           [u_const](const PlantState&) { return u_const; });
}

inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline void write_trajectory_csv(std::ostream& os, const Trajectory& tr) {
  os << "t,x1,x2,x3,x4,xh1,xh2,xh3,xh4,u,ra,d1,d2\n";
  for (std::size_t i = 0; i < tr.size(); ++i) {
    os << format_double(tr.times[i]);
    for (int j = 0; j < 4; ++j) os << ',' << format_double(tr.x[i][j]);
    for (int j = 0; j < 4; ++j) os << ',' << format_double(tr.xh[i][j]);
    os << ',' << format_double(tr.u[i]) << ',' << format_double(tr.ra[i]) << ','
       << format_double(tr.meal[i][0]) << ',' << format_double(tr.meal[i][1])
       << '\n';
  }
}

}  // namespace glucoctl
