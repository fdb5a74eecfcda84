#pragma once

// Matrix measures (logarithmic norms), diagonal-metric contraction
// certificates over state boxes, and certificate-driven gain synthesis.
//
// A certificate states that for every state in the box
//     mu( Theta J Theta^-1 ) <= -margin,   Theta = diag(theta),
// so the weighted distance ||Theta (a - b)|| between any two trajectories of
// the certified system shrinks at least like exp(-margin t).

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "glucoctl/control.hpp"
#include "glucoctl/model.hpp"

namespace glucoctl {

enum class MeasureKind { one, two, inf };

inline std::string to_string(MeasureKind k) {
  switch (k) {
    case MeasureKind::one: return "one";
    case MeasureKind::two: return "two";
    case MeasureKind::inf: return "inf";
  }
  return "one";
}

inline MeasureKind measure_kind_from_string(const std::string& s) {
  if (s == "one" || s == "1") return MeasureKind::one;
  if (s == "two" || s == "2") return MeasureKind::two;
  if (s == "inf") return MeasureKind::inf;
  throw ConfigError("unknown norm '" + s + "' (one|two|inf)");
}

// Per-column (kind one), per-row (kind inf) Gershgorin-type sums, or the
// eigenvalues of the symmetric part (kind two). The measure is their maximum.
template <typename Derived>
Eigen::VectorXd measure_terms(const Eigen::MatrixBase<Derived>& a,
                              MeasureKind kind) {
  if (a.rows() != a.cols()) {
    throw DomainError("matrix measure requires a square matrix");
  }
  if (!a.allFinite()) {
    throw DomainError("matrix measure requires finite entries");
  }
  const Eigen::Index n = a.rows();
  Eigen::VectorXd terms(n);
  switch (kind) {
    case MeasureKind::one:
      for (Eigen::Index j = 0; j < n; ++j) {
        double s = a(j, j);
        for (Eigen::Index i = 0; i < n; ++i) {
          if (i != j) s += std::abs(a(i, j));
        }
        terms[j] = s;
      }
      break;
    case MeasureKind::inf:
      for (Eigen::Index i = 0; i < n; ++i) {
        double s = a(i, i);
        for (Eigen::Index j = 0; j < n; ++j) {
          if (i != j) s += std::abs(a(i, j));
        }
        terms[i] = s;
      }
      break;
    case MeasureKind::two: {
      const Eigen::MatrixXd sym = 0.5 * (a + a.transpose());
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
          sym, Eigen::EigenvaluesOnly);
      terms = es.eigenvalues();
      break;
    }
  }
  return terms;
}

template <typename Derived>
double matrix_measure(const Eigen::MatrixBase<Derived>& a, MeasureKind kind) {
  return measure_terms(a, kind).maxCoeff();
}

inline void require_positive_theta(const Vec4& theta) {
  for (int i = 0; i < 4; ++i) {
    if (!std::isfinite(theta[i]) || theta[i] <= 0.0) {
      throw DomainError("metric weights must be positive and finite");
    }
  }
}

inline Mat4 scale_by_metric(const Mat4& a, const Vec4& theta) {
  require_positive_theta(theta);
  return theta.asDiagonal() * a * theta.cwiseInverse().asDiagonal();
}

inline double scaled_measure(const Mat4& a, const Vec4& theta,
                             MeasureKind kind) {
  return matrix_measure(scale_by_metric(a, theta), kind);
}

struct Interval {
  double lo = 0;
  double hi = 0;

  bool contains(double v) const { return v >= lo && v <= hi; }
  friend bool operator==(const Interval&, const Interval&) = default;
};

// Free variables of the Jacobians: absolute glucose x1 (observer and
// controller) and absolute effective insulin x2 (controller only).
struct StateBox {
  Interval glucose{40.0, 400.0};
  Interval insulin{0.0, 0.05};

  void validate() const {
    for (const auto& iv : {glucose, insulin}) {
      if (!std::isfinite(iv.lo) || !std::isfinite(iv.hi) || iv.lo > iv.hi) {
        throw DomainError("state box bounds must be finite with lo <= hi");
      }
    }
  }

  friend bool operator==(const StateBox&, const StateBox&) = default;
};

enum class CertificateTarget { observer, controller };

struct Certificate {
  CertificateTarget target = CertificateTarget::observer;
  MeasureKind kind = MeasureKind::one;
  JacobianMode mode = JacobianMode::corrected;
  Vec4 theta = Vec4::Ones();
  StateBox box;
  Vec4 gains = Vec4::Zero();  // L for observer, K for controller
  double margin = 0;
  std::string subject;
};

// Observer: margin = min over x1 in {lo, hi} of -mu(Theta J Theta^-1).
// Entries are affine in x1 and every measure is convex, so the endpoints
// carry the extremum.
inline Eigen::VectorXd observer_slack(const PatientParams& p,
                                      const ObserverGain& gain,
                                      const StateBox& box, const Vec4& theta,
                                      MeasureKind kind) {
  if (box.glucose.lo < 0.0) {
    throw DomainError("observer box requires x1 >= 0");
  }
  Eigen::VectorXd slack = Eigen::VectorXd::Constant(
      4, std::numeric_limits<double>::infinity());
  for (double x1 : {box.glucose.lo, box.glucose.hi}) {
    const Eigen::VectorXd t = measure_terms(
        scale_by_metric(observer_virtual_jacobian(p, gain, x1), theta), kind);
    slack = slack.cwiseMin(-t);
  }
  return slack;
}

inline double observer_feasibility(const PatientParams& p,
                                   const ObserverGain& gain,
                                   const StateBox& box, const Vec4& theta,
                                   MeasureKind kind) {
  return observer_slack(p, gain, box, theta, kind).minCoeff();
}

inline Eigen::VectorXd controller_slack(const PatientParams& p,
                                        const ControllerGain& gain,
                                        const StateBox& box,
                                        const Vec4& theta, MeasureKind kind,
                                        JacobianMode mode) {
  const double g0 = p.basal_glucose();
  Eigen::VectorXd slack = Eigen::VectorXd::Constant(
      4, std::numeric_limits<double>::infinity());
  for (double x1 : {box.glucose.lo, box.glucose.hi}) {
    for (double x2 : {box.insulin.lo, box.insulin.hi}) {
      const Vec4 xd(x1 - g0, x2, 0.0, 0.0);
      const Eigen::VectorXd t = measure_terms(
          scale_by_metric(closed_loop_jacobian(p, gain, xd, mode), theta),
          kind);
      slack = slack.cwiseMin(-t);
    }
  }
  return slack;
}

inline double controller_feasibility(const PatientParams& p,
                                     const ControllerGain& gain,
                                     const StateBox& box, const Vec4& theta,
                                     MeasureKind kind, JacobianMode mode) {
  return controller_slack(p, gain, box, theta, kind, mode).minCoeff();
}

inline double certificate_margin(const PatientParams& p,
                                 const Certificate& c) {
  if (c.target == CertificateTarget::observer) {
    return observer_feasibility(p, ObserverGain(c.gains), c.box, c.theta,
                                c.kind);
  }
  return controller_feasibility(p, ControllerGain(c.gains), c.box, c.theta,
                                c.kind, c.mode);
}

// Raised when no candidate reaches the requested margin; carries the best one.
class Infeasible : public std::runtime_error {
 public:
  explicit Infeasible(Certificate best)
      : std::runtime_error("no certificate reaches the requested margin (best " +
                           std::to_string(best.margin) + ")"),
        best_(std::move(best)) {}

  const Certificate& best() const noexcept { return best_; }
  double best_margin() const noexcept { return best_.margin; }

 private:
  Certificate best_;
};

struct SynthesisOptions {
  // log10 metric ratios theta2/theta1, theta3/theta2, theta4/theta3
  double ratio_exp_min = -10.0;
  double ratio_exp_max = 10.0;
  // gain magnitudes, in units of 1/min (controller: k * p6)
  double gain_exp_min = -6.0;
  double gain_exp_max = 1.0;
  int steps_per_decade = 16;
  int max_sweeps = 200;
};

namespace detail {

inline std::vector<double> log_grid(double lo, double hi, int per_decade) {
  std::vector<double> g;
  const int n = static_cast<int>(std::lround((hi - lo) * per_decade));
  g.reserve(n + 1);
  for (int i = 0; i <= n; ++i) g.push_back(lo + static_cast<double>(i) / per_decade);
  return g;
}

// Signed gain grid, ascending: -10^hi ... -10^lo, 0, 10^lo ... 10^hi.
inline std::vector<double> gain_grid(const SynthesisOptions& o, double unit) {
  const auto e = log_grid(o.gain_exp_min, o.gain_exp_max, o.steps_per_decade);
  std::vector<double> g;
  g.reserve(2 * e.size() + 1);
  for (auto it = e.rbegin(); it != e.rend(); ++it) g.push_back(-std::pow(10.0, *it) / unit);
  g.push_back(0.0);
  for (double v : e) g.push_back(std::pow(10.0, v) / unit);
  return g;
}

inline Vec4 theta_from_exponents(const Eigen::Vector3d& r) {
  Vec4 theta;
  theta[0] = 1.0;
  for (int i = 0; i < 3; ++i) theta[i + 1] = theta[i] * std::pow(10.0, r[i]);
  return theta;
}

// Coordinate descent over (three metric ratio exponents, four gains). Each
// coordinate takes the grid value maximizing the margin; ties prefer a smaller
// gain 1-norm, then the value nearest the current one, then the lower index.
// Stops at the first point whose margin reaches `required`.
template <typename MarginFn>
Certificate coordinate_search(Certificate cert, MarginFn&& margin_of,
                              double gain_unit, double required,
                              const SynthesisOptions& opt) {
  if (!(required >= 0.0)) {
    throw DomainError("required margin must be nonnegative");
  }
  const auto ratio_grid =
      log_grid(opt.ratio_exp_min, opt.ratio_exp_max, opt.steps_per_decade);
  const auto gains_grid = gain_grid(opt, gain_unit);

  Eigen::Vector3d ratio_exp = Eigen::Vector3d::Zero();
  Vec4 gains = Vec4::Zero();
  double best = margin_of(theta_from_exponents(ratio_exp), gains);

  auto finish = [&](double m) {
    cert.theta = theta_from_exponents(ratio_exp);
    cert.gains = gains;
    cert.margin = m;
    return cert;
  };
  if (best >= required) return finish(best);

  constexpr double kTieTol = 1e-15;
  for (int sweep = 0; sweep < opt.max_sweeps; ++sweep) {
    bool changed = false;
    for (int c = 0; c < 7; ++c) {
      const bool is_ratio = c < 3;
      const auto& grid = is_ratio ? ratio_grid : gains_grid;
      double& slot = is_ratio ? ratio_exp[c] : gains[c - 3];
      const double current = slot;

      double best_val = current;
      double best_m = best;
      double best_norm = gains.lpNorm<1>();
      double best_dist = 0.0;
      for (double v : grid) {
        slot = v;
        const double m = margin_of(theta_from_exponents(ratio_exp), gains);
        const double norm = gains.lpNorm<1>();
        const double dist = std::abs(v - current);
        bool take = false;
        if (m > best_m + kTieTol) {
          take = true;
        } else if (m >= best_m - kTieTol) {
          if (norm < best_norm) {
            take = true;
          } else if (norm == best_norm && dist < best_dist) {
            take = true;
          }
        }
        if (take) {
          best_val = v;
          best_m = m;
          best_norm = norm;
          best_dist = dist;
        }
      }
      slot = best_val;
      if (best_val != current) changed = true;
      best = best_m;
      if (best >= required) return finish(best);
    }
    if (!changed) break;
  }
  throw Infeasible(finish(best));
}

}  // namespace detail

inline Certificate synthesize_observer_gains(const PatientParams& p,
                                             const StateBox& box,
                                             MeasureKind kind,
                                             double required_margin,
                                             const SynthesisOptions& opt = {}) {
  require_valid(p);
  box.validate();
  Certificate cert;
  cert.target = CertificateTarget::observer;
  cert.kind = kind;
  cert.box = box;
  cert.subject = p.label;
  auto margin_of = [&](const Vec4& theta, const Vec4& l) {
    return observer_feasibility(p, ObserverGain(l), box, theta, kind);
  };
  return detail::coordinate_search(cert, margin_of, 1.0, required_margin, opt);
}

inline Certificate synthesize_controller_gains(
    const PatientParams& p, const StateBox& box, MeasureKind kind,
    double required_margin, JacobianMode mode,
    const SynthesisOptions& opt = {}) {
  require_valid(p);
  box.validate();
  Certificate cert;
  cert.target = CertificateTarget::controller;
  cert.kind = kind;
  cert.mode = mode;
  cert.box = box;
  cert.subject = p.label;
  auto margin_of = [&](const Vec4& theta, const Vec4& k) {
    return controller_feasibility(p, ControllerGain(k), box, theta, kind, mode);
  };
  return detail::coordinate_search(cert, margin_of, p.p6, required_margin, opt);
}

// Observer and controller certificates synthesized for one subject.
struct GainSet {
  Certificate observer;
  Certificate controller;

  ObserverGain observer_gain() const { return ObserverGain(observer.gains); }
  ControllerGain controller_gain() const { return ControllerGain(controller.gains); }
  double margin() const { return std::min(observer.margin, controller.margin); }
};

struct GainSynthesisSpec {
  StateBox observer_box{{40.0, 400.0}, {0.0, 0.0}};
  StateBox controller_box{{40.0, 400.0}, {0.0, 0.05}};
  MeasureKind kind = MeasureKind::one;
  JacobianMode mode = JacobianMode::corrected;
  double observer_margin = 5e-3;
  double controller_margin = 1e-3;
};

inline GainSet synthesize_gain_set(const PatientParams& p,
                                   const GainSynthesisSpec& spec = {}) {
  return {synthesize_observer_gains(p, spec.observer_box, spec.kind,
                                    spec.observer_margin),
          synthesize_controller_gains(p, spec.controller_box, spec.kind,
                                      spec.controller_margin, spec.mode)};
}

}  // namespace glucoctl
