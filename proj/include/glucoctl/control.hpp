#pragma once

// Extended Luenberger observer driven by the glucose measurement, the
// proportional state-feedback law on estimated deviations, and the Jacobians
// the contraction engine evaluates.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "glucoctl/model.hpp"

namespace glucoctl {

struct ObserverGain {
  Vec4 l = Vec4::Zero();

  ObserverGain() = default;
  explicit ObserverGain(const Vec4& v) : l(v) {}
  ObserverGain(double l1, double l2, double l3, double l4) : l(l1, l2, l3, l4) {}
};

struct ControllerGain {
  Vec4 k = Vec4::Zero();

  ControllerGain() = default;
  explicit ControllerGain(const Vec4& v) : k(v) {}
  ControllerGain(double k1, double k2, double k3, double k4)
      : k(k1, k2, k3, k4) {}
};

struct ControlLimits {
  double u_min = 0.0;
  double u_max = std::numeric_limits<double>::infinity();
  double hold_period = 1.0;  // [min]

  void validate() const {
    if (!(u_min >= 0.0) || !(u_min < u_max) || !(hold_period > 0.0) ||
        !std::isfinite(hold_period)) {
      throw DomainError("control limits require 0 <= u_min < u_max and hold_period > 0");
    }
  }
};

// Closed-loop Jacobian entry (1,2): `corrected` differentiates the deviated
// plant (entry = -x1); `uncorrected` uses (EGP/p1) - x1d.
enum class JacobianMode { corrected, uncorrected };

inline std::string to_string(JacobianMode m) {
  return m == JacobianMode::corrected ? "corrected" : "uncorrected";
}

inline JacobianMode jacobian_mode_from_string(const std::string& s) {
  if (s == "corrected") return JacobianMode::corrected;
  if (s == "uncorrected") return JacobianMode::uncorrected;
  throw ConfigError("unknown mode '" + s + "' (corrected|uncorrected)");
}

// Observer vector field. The bilinear term uses the measured glucose y, and
// the correction is L * (xh1 - y).
inline Vec4 observer_deriv(const PlantState& xh, double y, double u,
                           const PatientParams& p, const ObserverGain& gain) {
  if (!xh.allFinite() || !std::isfinite(y) || !std::isfinite(u) ||
      !gain.l.allFinite()) {
    throw DomainError("observer_deriv: non-finite input");
  }
  const double err = xh[0] - y;
  return {-p.p1 * xh[0] - xh[1] * y + p.egp + gain.l[0] * err,
          -p.p2 * xh[1] + p.p3 * xh[2] + gain.l[1] * err,
          -p.p4 * xh[2] + p.p4 * xh[3] + gain.l[2] * err,
          -p.p5 * xh[3] + p.p6 * u + gain.l[3] * err};
}

inline double control_raw(const PlantState& xh, const EquilibriumPoint& eq,
                          const ControllerGain& gain) {
  return eq.u_basal + gain.k.dot(xh - eq.state);
}

inline double control_law(const PlantState& xh, const EquilibriumPoint& eq,
                          const ControllerGain& gain,
                          const ControlLimits& lim) {
  return std::clamp(control_raw(xh, eq, gain), lim.u_min, lim.u_max);
}

// Jacobian of the virtual system that admits both plant (ra = 0) and observer
// as particular solutions.
inline Mat4 observer_virtual_jacobian(const PatientParams& p,
                                      const ObserverGain& gain, double x1) {
  const Vec4& l = gain.l;
  Mat4 j;
  // clang-format off
  j << -p.p1 + l[0], -x1,    0,      0,
       l[1],         -p.p2,  p.p3,   0,
       l[2],         0,     -p.p4,   p.p4,
       l[3],         0,      0,     -p.p5;
  // clang-format on
  return j;
}

// Jacobian of the closed-loop deviation field f(x_d) + B K x_d, where x_d is
// measured from the open-loop equilibrium (EGP/p1, 0, 0, 0). In corrected mode
// entries (1,1) and (1,2) equal -p1 - x2 and -x1 of the absolute state.
inline Mat4 closed_loop_jacobian(const PatientParams& p,
                                 const ControllerGain& gain, const Vec4& x_d,
                                 JacobianMode mode) {
  const double g0 = p.basal_glucose();
  const double a12 = mode == JacobianMode::corrected ? -g0 - x_d[0]
                                                     : g0 - x_d[0];
  const Vec4 kb = gain.k * p.p6;
  Mat4 j;
  // clang-format off
  j << -p.p1 - x_d[1], a12,    0,      0,
       0,              -p.p2,  p.p3,   0,
       0,              0,     -p.p4,   p.p4,
       kb[0],          kb[1],  kb[2],  kb[3] - p.p5;
  // clang-format on
  return j;
}

// Closed-loop deviation vector field (no meal, no estimation error), the map
// whose derivative closed_loop_jacobian returns in corrected mode.
inline Vec4 closed_loop_deviation_field(const PatientParams& p,
                                        const ControllerGain& gain,
                                        const Vec4& x_d) {
  const double g0 = p.basal_glucose();
  return {-p.p1 * x_d[0] - g0 * x_d[1] - x_d[0] * x_d[1],
          -p.p2 * x_d[1] + p.p3 * x_d[2],
          -p.p4 * x_d[2] + p.p4 * x_d[3],
          -p.p5 * x_d[3] + p.p6 * gain.k.dot(x_d)};
}

}  // namespace glucoctl
