#pragma once

// Glycemic outcome metrics over a sampled glucose trace.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <string>

#include "glucoctl/errors.hpp"

namespace glucoctl {

inline constexpr double kHypoThreshold = 70.0;
inline constexpr double kHyperThreshold = 180.0;
inline constexpr double kSevereHypoThreshold = 50.0;

struct TimeInRange {
  double pct_eu = 0;           // x1 in [70, 180]
  double pct_hyper = 0;        // x1 > 180
  double pct_hypo = 0;         // x1 < 70
  double pct_severe_hypo = 0;  // x1 < 50, a sub-band of hypo
};

inline void require_nonempty(std::span<const double> bg, const char* what) {
  if (bg.empty()) throw DomainError(std::string(what) + ": empty series");
}

inline TimeInRange time_in_ranges(std::span<const double> bg) {
  require_nonempty(bg, "time_in_ranges");
  std::size_t hyper = 0, hypo = 0, severe = 0;
  for (double g : bg) {
    if (g > kHyperThreshold) ++hyper;
    if (g < kHypoThreshold) ++hypo;
    if (g < kSevereHypoThreshold) ++severe;
  }
  const std::size_t eu = bg.size() - hyper - hypo;
  const double scale = 100.0 / static_cast<double>(bg.size());
  return {scale * static_cast<double>(eu), scale * static_cast<double>(hyper),
          scale * static_cast<double>(hypo), scale * static_cast<double>(severe)};
}

// Symmetrized log-glucose risk transform; zero near 112.5 mg/dl.
inline double risk_transform(double bg) {
  return 1.509 * (std::pow(std::log(bg), 1.084) - 5.381);
}

struct RiskIndices {
  double lbgi = 0;
  double hbgi = 0;
};

inline RiskIndices risk_indices(std::span<const double> bg) {
  require_nonempty(bg, "risk_indices");
  double low = 0, high = 0;
  for (double g : bg) {
    if (!(g > 0.0) || !std::isfinite(g)) {
      throw DomainError("risk_indices: glucose must be positive and finite");
    }
    const double f = risk_transform(g);
    const double r = 10.0 * f * f;
    if (f < 0) low += r;
    else if (f > 0) high += r;
  }
  const double n = static_cast<double>(bg.size());
  return {low / n, high / n};
}

// Estimated HbA1c [%] from mean glucose [mg/dl].
inline double hba1c_from_mean(double mean_bg) { return (mean_bg + 46.7) / 28.7; }

struct SummaryStats {
  double mean_bg = 0;
  double cov = 0;  // population std / mean
  double hba1c = 0;
};

inline SummaryStats summary_stats(std::span<const double> bg) {
  require_nonempty(bg, "summary_stats");
  const double n = static_cast<double>(bg.size());
  const double mean = std::accumulate(bg.begin(), bg.end(), 0.0) / n;
  double ss = 0;
  for (double g : bg) ss += (g - mean) * (g - mean);
  const double sd = std::sqrt(ss / n);
  return {mean, mean != 0.0 ? sd / mean : 0.0, hba1c_from_mean(mean)};
}

enum class CvgaZone { A, LowerB, UpperB, B, LowerC, UpperC, LowerD, UpperD, E };

inline std::string to_string(CvgaZone z) {
  switch (z) {
    case CvgaZone::A: return "A";
    case CvgaZone::LowerB: return "LowerB";
    case CvgaZone::UpperB: return "UpperB";
    case CvgaZone::B: return "B";
    case CvgaZone::LowerC: return "LowerC";
    case CvgaZone::UpperC: return "UpperC";
    case CvgaZone::LowerD: return "LowerD";
    case CvgaZone::UpperD: return "UpperD";
    case CvgaZone::E: return "E";
  }
  return "E";
}

inline CvgaZone cvga_zone_from_string(const std::string& s) {
  for (auto z : {CvgaZone::A, CvgaZone::LowerB, CvgaZone::UpperB, CvgaZone::B,
                 CvgaZone::LowerC, CvgaZone::UpperC, CvgaZone::LowerD,
                 CvgaZone::UpperD, CvgaZone::E}) {
    if (to_string(z) == s) return z;
  }
  throw ConfigError("unknown CVGA zone '" + s + "'");
}

// Grid cell: column 0/1/2 for min_bg >90 | [70,90] | <70, row 0/1/2 for
// max_bg <180 | [180,300] | >300. Larger indices are further from zone A.
struct CvgaCell {
  int column = 0;
  int row = 0;
};

inline CvgaCell cvga_cell(double min_bg, double max_bg) {
  if (!(min_bg <= max_bg)) throw DomainError("cvga: min_bg > max_bg");
  const int column = min_bg > 90.0 ? 0 : (min_bg >= 70.0 ? 1 : 2);
  const int row = max_bg < 180.0 ? 0 : (max_bg <= 300.0 ? 1 : 2);
  return {column, row};
}

inline CvgaZone cvga_zone(double min_bg, double max_bg) {
  static constexpr CvgaZone grid[3][3] = {
      // column: >90            [70,90]           <70
      {CvgaZone::A, CvgaZone::LowerB, CvgaZone::LowerC},       // max < 180
      {CvgaZone::UpperB, CvgaZone::B, CvgaZone::LowerD},       // [180, 300]
      {CvgaZone::UpperC, CvgaZone::UpperD, CvgaZone::E},       // > 300
  };
  const CvgaCell c = cvga_cell(min_bg, max_bg);
  return grid[c.row][c.column];
}

struct GlycemicReport {
  double pct_eu = 0;
  double pct_hyper = 0;
  double pct_hypo = 0;
  double pct_severe_hypo = 0;
  double lbgi = 0;
  double hbgi = 0;
  double mean_bg = 0;
  double cov = 0;
  double hba1c = 0;
  CvgaZone cvga = CvgaZone::A;
  double min_bg = 0;
  double max_bg = 0;
};

inline GlycemicReport glycemic_report(std::span<const double> bg) {
  require_nonempty(bg, "glycemic_report");
  GlycemicReport r;
  const TimeInRange tir = time_in_ranges(bg);
  r.pct_eu = tir.pct_eu;
  r.pct_hyper = tir.pct_hyper;
  r.pct_hypo = tir.pct_hypo;
  r.pct_severe_hypo = tir.pct_severe_hypo;
  const SummaryStats st = summary_stats(bg);
  r.mean_bg = st.mean_bg;
  r.cov = st.cov;
  r.hba1c = st.hba1c;
  const auto [lo, hi] = std::minmax_element(bg.begin(), bg.end());
  r.min_bg = *lo;
  r.max_bg = *hi;
  r.cvga = cvga_zone(r.min_bg, r.max_bg);
  // Risk indices are undefined for nonpositive glucose; report them as NaN
  // rather than failing the whole report for a trace that left the domain.
  if (r.min_bg > 0.0) {
    const RiskIndices ri = risk_indices(bg);
    r.lbgi = ri.lbgi;
    r.hbgi = ri.hbgi;
  } else {
    r.lbgi = r.hbgi = std::nan("");
  }
  return r;
}

}  // namespace glucoctl
