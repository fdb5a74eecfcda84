#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "glucoctl/metrics.hpp"

using namespace glucoctl;

namespace {

std::vector<double> constant(double v, std::size_t n = 1441) { return std::vector<double>(n, v); }

}  // namespace

TEST(TimeInRange, Examples) {
  auto a = time_in_ranges(constant(120));
  EXPECT_EQ(a.pct_eu, 100.0);
  EXPECT_EQ(a.pct_hyper + a.pct_hypo + a.pct_severe_hypo, 0.0);

  auto b = time_in_ranges(constant(200));
  EXPECT_EQ(b.pct_hyper, 100.0);
  EXPECT_EQ(b.pct_eu, 0.0);

  std::vector<double> half = constant(120, 720);
  half.insert(half.end(), 720, 200.0);
  auto c = time_in_ranges(half);
  EXPECT_DOUBLE_EQ(c.pct_eu, 50.0);
  EXPECT_DOUBLE_EQ(c.pct_hyper, 50.0);
  EXPECT_EQ(c.pct_hypo, 0.0);

  auto d = time_in_ranges(std::vector<double>{45, 60, 100, 190});
  EXPECT_DOUBLE_EQ(d.pct_hypo, 50.0);
  EXPECT_DOUBLE_EQ(d.pct_severe_hypo, 25.0);

  EXPECT_THROW(time_in_ranges(std::vector<double>{}), DomainError);
}

TEST(TimeInRange, BoundariesAreEuglycemic) {
  auto r = time_in_ranges(std::vector<double>{70.0, 180.0});
  EXPECT_EQ(r.pct_eu, 100.0);
}

TEST(TimeInRange, PartitionOnRandomTraces) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(20, 450);
  for (int n = 0; n < 200; ++n) {
    std::vector<double> bg(1 + rng() % 3000);
    for (auto& g : bg) g = u(rng);
    const auto r = time_in_ranges(bg);
    EXPECT_NEAR(r.pct_eu + r.pct_hyper + r.pct_hypo, 100.0, 1e-9);
    EXPECT_LE(r.pct_severe_hypo, r.pct_hypo);
  }
}

TEST(Risk, TransformRootAndKnownValues) {
  EXPECT_NEAR(risk_transform(112.5), 0.0, 2e-3);
  EXPECT_NEAR(risk_transform(50), -1.50, 5e-3);
  const auto at_root = risk_indices(constant(112.5));
  EXPECT_LE(at_root.lbgi, 1e-3);
  EXPECT_LE(at_root.hbgi, 1e-3);

  const auto low = risk_indices(constant(50));
  EXPECT_NEAR(low.lbgi, 22.5, 0.1);
  EXPECT_EQ(low.hbgi, 0.0);

  const auto high = risk_indices(constant(400));
  EXPECT_GT(high.hbgi, 0.0);
  EXPECT_EQ(high.lbgi, 0.0);

  EXPECT_THROW(risk_indices(std::vector<double>{100, 0}), DomainError);
  EXPECT_THROW(risk_indices(std::vector<double>{100, -3}), DomainError);
  EXPECT_THROW(risk_indices(std::vector<double>{}), DomainError);
}

TEST(Risk, ScaleMonotone) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(115, 300);
  std::vector<double> bg(500);
  for (auto& g : bg) g = u(rng);
  const auto base = risk_indices(bg);
  for (auto& g : bg) g += 10;
  const auto raised = risk_indices(bg);
  EXPECT_GT(raised.hbgi, base.hbgi);
  EXPECT_EQ(raised.lbgi, 0.0);
}

TEST(Summary, HbA1cFromMeanAndCov) {
  EXPECT_NEAR(hba1c_from_mean(148.69), 6.8081, 5e-3);
  EXPECT_NEAR(hba1c_from_mean(136.48), 6.3827, 5e-3);
  const auto c = summary_stats(constant(140));
  EXPECT_EQ(c.cov, 0.0);
  EXPECT_DOUBLE_EQ(c.mean_bg, 140.0);
  const auto s = summary_stats(std::vector<double>{100, 200});
  EXPECT_DOUBLE_EQ(s.mean_bg, 150.0);
  EXPECT_DOUBLE_EQ(s.cov, 50.0 / 150.0);
  EXPECT_THROW(summary_stats(std::vector<double>{}), DomainError);
}

TEST(Cvga, CanonicalProbes) {
  EXPECT_EQ(cvga_zone(95, 160), CvgaZone::A);
  EXPECT_EQ(cvga_zone(80, 160), CvgaZone::LowerB);
  EXPECT_EQ(cvga_zone(60, 160), CvgaZone::LowerC);
  EXPECT_EQ(cvga_zone(95, 250), CvgaZone::UpperB);
  EXPECT_EQ(cvga_zone(75, 250), CvgaZone::B);
  EXPECT_EQ(cvga_zone(60, 250), CvgaZone::LowerD);
  EXPECT_EQ(cvga_zone(95, 350), CvgaZone::UpperC);
  EXPECT_EQ(cvga_zone(80, 350), CvgaZone::UpperD);
  EXPECT_EQ(cvga_zone(45, 350), CvgaZone::E);
  EXPECT_THROW(cvga_zone(200, 100), DomainError);
}

TEST(Cvga, OrderPreserving) {
  // Raising min_bg or lowering max_bg never moves a cell further from A.
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(30, 420);
  for (int n = 0; n < 2000; ++n) {
    double lo = u(rng), hi = u(rng);
    if (lo > hi) std::swap(lo, hi);
    const CvgaCell c = cvga_cell(lo, hi);
    const double lo2 = std::min(hi, lo + u(rng) / 4);
    const double hi2 = std::max(lo2, hi - u(rng) / 4);
    const CvgaCell d = cvga_cell(lo2, hi2);
    EXPECT_LE(d.column, c.column);
    EXPECT_LE(d.row, c.row);
  }
}

TEST(Cvga, StringRoundTrip) {
  for (auto z : {CvgaZone::A, CvgaZone::LowerB, CvgaZone::UpperB, CvgaZone::B, CvgaZone::LowerC,
                 CvgaZone::UpperC, CvgaZone::LowerD, CvgaZone::UpperD, CvgaZone::E}) {
    EXPECT_EQ(cvga_zone_from_string(to_string(z)), z);
  }
  EXPECT_THROW(cvga_zone_from_string("F"), ConfigError);
}

TEST(Report, CombinesMetrics) {
  std::vector<double> bg = constant(120, 100);
  bg[10] = 250;
  bg[20] = 65;
  const auto r = glycemic_report(bg);
  EXPECT_DOUBLE_EQ(r.min_bg, 65);
  EXPECT_DOUBLE_EQ(r.max_bg, 250);
  EXPECT_EQ(r.cvga, CvgaZone::LowerD);
  EXPECT_DOUBLE_EQ(r.pct_hypo, 1.0);
  EXPECT_DOUBLE_EQ(r.pct_hyper, 1.0);
  EXPECT_GT(r.lbgi, 0.0);
  EXPECT_GT(r.hbgi, 0.0);

  bg[30] = -5;
  const auto bad = glycemic_report(bg);
  EXPECT_TRUE(std::isnan(bad.lbgi));
  EXPECT_TRUE(std::isnan(bad.hbgi));
}
