#include <gtest/gtest.h>

#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <filesystem>
#include <random>

#include "test_util.hpp"

using namespace traveltime;
using namespace traveltime::testing;

namespace {

std::vector<double> t_sample(int n, double loc, double scale, double dof, std::uint64_t seed) {
  std::mt19937_64 eng(seed);
  std::student_t_distribution<double> t(dof);
  std::vector<double> out(n);
  for (double& v : out) v = loc + scale * t(eng);
  return out;
}

}  // namespace

TEST(TLoglik, MatchesBoostDensity) {
  const TFit f{1.5, 0.3, 4.2};
  const boost::math::students_t d(4.2);
  const std::vector<double> y{1.0, 1.5, 2.7};
  double want = 0.0;
  for (double v : y) want += std::log(boost::math::pdf(d, (v - 1.5) / 0.3) / 0.3);
  EXPECT_NEAR(t_loglik(y, f), want, 1e-10);
}

TEST(FitT, RecoversParameters) {
  const auto y = t_sample(6000, 3.0, 0.25, 5.0, 1);
  const auto f = fit_t(y);
  EXPECT_NEAR(f.location, 3.0, 0.02);
  EXPECT_NEAR(f.scale, 0.25, 0.02);
  EXPECT_GT(f.dof, 3.0);
  EXPECT_LT(f.dof, 9.0);
}

TEST(FitT, NormalDataGivesLargeDof) {
  std::mt19937_64 eng(2);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> y(5000);
  for (double& v : y) v = n(eng);
  EXPECT_GT(fit_t(y).dof, 20.0);
}

TEST(FitT, FixedDofIsMaximumOverGrid) {
  const auto y = t_sample(200, -1.0, 2.0, 3.0, 3);
  const TFit f = fit_t_fixed_dof(y, 3.0, 1e-6);
  const double ll = t_loglik(y, f);
  double best = -INFINITY;
  for (double loc = -2.0; loc <= 0.0; loc += 0.01)
    for (double sc = 1.0; sc <= 3.0; sc += 0.01) best = std::max(best, t_loglik(y, TFit{loc, sc, 3.0}));
  EXPECT_GE(ll, best - 1e-6);
}

TEST(FitT, ConstantSampleHitsScaleFloor) {
  const std::vector<double> y(40, 2.0);
  const auto f = fit_t(y);
  EXPECT_DOUBLE_EQ(f.location, 2.0);
  EXPECT_LE(f.scale, 1e-6 * (1 + 1e-9));
  EXPECT_THROW(fit_t(std::vector<double>{}), ValidationError);
}

TEST(BudgeBins, EqualCountBins) {
  std::vector<std::pair<double, double>> dt;
  for (int i = 0; i < 300; ++i) dt.emplace_back(100.0 + i, 10.0 + 0.1 * i);
  const auto m = fit_budge_bins_from_distances(dt);
  ASSERT_EQ(m.bins.size(), 10u);
  ASSERT_EQ(m.edges.size(), 11u);
  for (const auto& b : m.bins) EXPECT_EQ(b.count, 30);
  EXPECT_DOUBLE_EQ(m.bins[0].center, 114.5);
  EXPECT_DOUBLE_EQ(m.edges[1], 129.5);
  for (std::size_t e = 1; e < m.edges.size(); ++e) EXPECT_GT(m.edges[e], m.edges[e - 1]);
}

TEST(BudgeBins, TiedDistancesShareBin) {
  // Grid distances come in multiples of the block: heavy ties.
  std::vector<std::pair<double, double>> dt;
  for (int i = 0; i < 400; ++i) dt.emplace_back(100.0 * (1 + i % 7), 20.0 + i % 13);
  std::ostringstream log;
  const auto m = fit_budge_bins_from_distances(dt, {}, &log);
  int total = 0;
  for (const auto& b : m.bins) {
    total += b.count;
    EXPECT_GE(b.count, 30);
  }
  EXPECT_EQ(total, 400);
  EXPECT_LE(m.bins.size(), 7u);
  // Every edge separates distinct distances.
  for (std::size_t e = 1; e + 1 < m.edges.size(); ++e) EXPECT_NE(std::fmod(m.edges[e], 100.0), 0.0);
  EXPECT_NE(log.str().find("warning"), std::string::npos);
}

TEST(BudgeBins, FewTripsReduceBinsOrThrow) {
  std::vector<std::pair<double, double>> dt;
  for (int i = 0; i < 95; ++i) dt.emplace_back(100.0 + i, 30.0);
  std::ostringstream log;
  const auto m = fit_budge_bins_from_distances(dt, {}, &log);
  EXPECT_EQ(m.bins.size(), 3u);
  EXPECT_NE(log.str().find("reducing bin count"), std::string::npos);
  dt.resize(29);
  EXPECT_THROW(fit_budge_bins_from_distances(dt), ValidationError);
}

TEST(BudgeQuantile, InterpolatesBetweenCenters) {
  BinModel m;
  m.edges = {0, 200, 400};
  m.bins = {{100.0, {std::log(10.0), 0.1, 5.0}, 30}, {300.0, {std::log(30.0), 0.1, 5.0}, 30}};
  EXPECT_NEAR(budge_point(m, 50.0), 10.0, 1e-9);
  EXPECT_NEAR(budge_point(m, 100.0), 10.0, 1e-9);
  EXPECT_NEAR(budge_point(m, 200.0), 20.0, 1e-9);
  EXPECT_NEAR(budge_point(m, 999.0), 30.0, 1e-9);
  const double q90 = budge_quantile(m, 150.0, 0.9);
  EXPECT_NEAR(budge_cdf(m, 150.0, q90), 0.9, 1e-6);
  EXPECT_LT(budge_cdf(m, 150.0, 0.001), 1e-6);
  const boost::math::students_t d(5.0);
  EXPECT_NEAR(budge_quantile(m, 100.0, 0.975), std::exp(std::log(10.0) + 0.1 * boost::math::quantile(d, 0.975)), 1e-9);
}

TEST(BudgeBins, FromNetworkUsesShortestDistance) {
  const auto net = line_network({0, 100, 250, 450});
  std::vector<Trip> trips;
  for (int i = 0; i < 60; ++i) trips.push_back(bare_trip(i, 0, 1 + i % 3, 10.0 + i));
  const auto m = fit_budge_bins(net, trips);
  int n = 0;
  for (const auto& b : m.bins) n += b.count;
  EXPECT_EQ(n, 60);
  EXPECT_DOUBLE_EQ(m.edges.front(), 100.0);
  EXPECT_DOUBLE_EQ(m.edges.back(), 450.0);
  EXPECT_DOUBLE_EQ(trip_distance(net, trips[2], net.lengths()), 450.0);
}

TEST(BudgeBins, RoundTrip) {
  std::vector<std::pair<double, double>> dt;
  for (int i = 0; i < 120; ++i) dt.emplace_back(100.0 + 3 * i, 10.0 + std::sin(i) + 0.2 * i);
  const auto m = fit_budge_bins_from_distances(dt);
  const auto dir = std::filesystem::temp_directory_path() / "traveltime_budge_rt";
  std::filesystem::remove_all(dir);
  write_bin_model(m, dir / "budge_bins.csv");
  const auto back = read_bin_model(dir / "budge_bins.csv");
  ASSERT_EQ(back.bins.size(), m.bins.size());
  EXPECT_EQ(back.edges, m.edges);
  for (std::size_t b = 0; b < m.bins.size(); ++b) {
    EXPECT_DOUBLE_EQ(back.bins[b].fit.location, m.bins[b].fit.location);
    EXPECT_DOUBLE_EQ(back.bins[b].fit.dof, m.bins[b].fit.dof);
    EXPECT_EQ(back.bins[b].count, m.bins[b].count);
  }
  std::filesystem::remove_all(dir);
}
