#pragma once

// Glucose-insulin plant (Medtronic Virtual Patient form), two-compartment gut
// absorption, setpoint equilibria and analytic Jacobians.
//
// State layout:  x1 blood glucose [mg/dl]
//                x2 effective insulin [1/min]
//                x3 plasma insulin [mU/l]
//                x4 subcutaneous insulin [mU/l]

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "glucoctl/errors.hpp"

namespace glucoctl {

using Vec2 = Eigen::Vector2d;
using Vec4 = Eigen::Vector4d;
using Mat4 = Eigen::Matrix4d;

using PlantState = Vec4;
using MealState = Vec2;

namespace idx {
inline constexpr int glucose = 0;
inline constexpr int effective_insulin = 1;
inline constexpr int plasma_insulin = 2;
inline constexpr int subcut_insulin = 3;
}  // namespace idx

struct PatientParams {
  double p1 = 0;   // glucose effectiveness [1/min]
  double p2 = 0;   // effective-insulin decay [1/min]
  double p3 = 0;   // plasma -> effective insulin coupling
  double p4 = 0;   // plasma insulin time constant [1/min]
  double p5 = 0;   // subcutaneous insulin time constant [1/min]
  double p6 = 0;   // input coupling
  double egp = 0;  // endogenous glucose production [mg/dl/min]
  std::string label;

  bool valid() const {
    for (double v : {p1, p2, p3, p4, p5, p6, egp}) {
      if (!std::isfinite(v) || v <= 0.0) return false;
    }
    return true;
  }

  // Open-loop (zero insulin) equilibrium glucose.
  double basal_glucose() const { return egp / p1; }

  friend bool operator==(const PatientParams&, const PatientParams&) = default;
};

inline void require_valid(const PatientParams& p) {
  if (!p.valid()) {
    throw DomainError("patient parameters must be positive and finite (" +
                      p.label + ")");
  }
}

// Estimated parameters of the three virtual subjects.
inline std::vector<PatientParams> reference_subjects() {
  return {
      {2.20e-3, 1.06e-2, 8.60e-6, 0.0213, 0.0204, 1.02e-5, 1.33, "1"},
      {3.50e-3, 2.33e-2, 1.079e-5, 0.0143, 0.0141, 1.55e-5, 1.07, "3"},
      {4.33e-3, 9.63e-3, 1.974e-6, 0.0217, 0.0217, 1.416e-5, 0.6, "5"},
  };
}

inline PatientParams reference_subject(const std::string& label) {
  for (const auto& p : reference_subjects()) {
    if (p.label == label) return p;
  }
  throw ConfigError("unknown subject '" + label + "' (expected 1, 3 or 5)");
}

enum class BioUnits { fraction, percent };

struct MealParams {
  double t_max = 43.0;  // time-to-maximum appearance [min]
  double bio = 71.0;    // bioavailability, stored as configured
  BioUnits bio_units = BioUnits::percent;
  double carb_gain = 1.0;    // model input units [mg/dl] per gram
  double pulse_width = 1.0;  // meal injection width [min]

  double bio_fraction() const {
    return bio_units == BioUnits::percent ? bio / 100.0 : bio;
  }

  void validate() const {
    if (!(t_max > 0) || !(bio > 0) || !(carb_gain > 0) || !(pulse_width > 0) ||
        !std::isfinite(t_max) || !std::isfinite(bio) ||
        !std::isfinite(carb_gain) || !std::isfinite(pulse_width)) {
      throw DomainError("meal parameters must be positive and finite");
    }
  }
};

struct Meal {
  double time = 0;   // [min]
  double grams = 0;  // carbohydrate [g]

  friend bool operator==(const Meal&, const Meal&) = default;
};

struct EquilibriumPoint {
  PlantState state = PlantState::Zero();
  double u_basal = 0;
  double g_sp = 0;
};

namespace detail {
template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& v) {
  return v.allFinite();
}
}  // namespace detail

inline Vec4 plant_deriv(const PlantState& x, const PatientParams& p, double u,
                        double ra) {
  if (!detail::all_finite(x) || !std::isfinite(u) || !std::isfinite(ra)) {
    throw DomainError("plant_deriv: non-finite input");
  }
  return {-p.p1 * x[0] - x[0] * x[1] + p.egp + ra,
          -p.p2 * x[1] + p.p3 * x[2],
          -p.p4 * x[2] + p.p4 * x[3],
          -p.p5 * x[3] + p.p6 * u};
}

struct MealDeriv {
  Vec2 dm;
  double ra = 0;  // rate of appearance [mg/dl/min]
};

inline MealDeriv meal_deriv(const MealState& m, const MealParams& mp,
                            double carb_rate) {
  if (!detail::all_finite(m) || !std::isfinite(carb_rate)) {
    throw DomainError("meal_deriv: non-finite input");
  }
  const double out1 = m[0] / mp.t_max;
  const double out2 = m[1] / mp.t_max;
  return {Vec2(-out1 + mp.bio_fraction() * carb_rate, out1 - out2), out2};
}

// Carbohydrate input averaged over [t0, t1]: each meal is a rectangular pulse
// of height carb_gain*grams/pulse_width starting at the meal time.
inline double carb_rate_average(const std::vector<Meal>& meals,
                                const MealParams& mp, double t0, double t1) {
  double total = 0;
  for (const auto& meal : meals) {
    const double lo = std::max(t0, meal.time);
    const double hi = std::min(t1, meal.time + mp.pulse_width);
    if (hi > lo) {
      total += (hi - lo) * mp.carb_gain * meal.grams / mp.pulse_width;
    }
  }
  return total / (t1 - t0);
}

// Setpoint-parameterized equilibrium: x1 = g_sp, the remaining states and the
// basal input chosen so the plant derivative vanishes with no meal.
inline EquilibriumPoint equilibrium_for_setpoint(const PatientParams& p,
                                                 double g_sp) {
  require_valid(p);
  if (!std::isfinite(g_sp) || g_sp <= 0.0 || g_sp > p.basal_glucose()) {
    throw InfeasibleSetpoint("setpoint " + std::to_string(g_sp) +
                             " mg/dl outside (0, EGP/p1 = " +
                             std::to_string(p.basal_glucose()) + "]");
  }
  EquilibriumPoint eq;
  eq.g_sp = g_sp;
  const double x2 = std::max(0.0, (p.egp - p.p1 * g_sp) / g_sp);
  const double x3 = (p.p2 / p.p3) * x2;
  eq.state = PlantState(g_sp, x2, x3, x3);
  eq.u_basal = (p.p5 / p.p6) * x3;
  return eq;
}

// The zero-insulin equilibrium (EGP/p1, 0, 0, 0).
inline EquilibriumPoint open_loop_equilibrium(const PatientParams& p) {
  return equilibrium_for_setpoint(p, p.basal_glucose());
}

inline Vec4 to_deviation(const PlantState& x, const EquilibriumPoint& eq) {
  return x - eq.state;
}

inline PlantState from_deviation(const Vec4& xd, const EquilibriumPoint& eq) {
  return xd + eq.state;
}

inline Mat4 plant_jacobian(const PlantState& x, const PatientParams& p) {
  Mat4 j;
  // clang-format off
  j << -p.p1 - x[1], -x[0],  0,     0,
       0,            -p.p2,  p.p3,  0,
       0,            0,     -p.p4,  p.p4,
       0,            0,      0,    -p.p5;
  // clang-format on
  return j;
}

}  // namespace glucoctl
