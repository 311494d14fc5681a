#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "test_util.hpp"

using namespace traveltime;
using namespace traveltime::testing;

namespace {

Trip trip_with_speeds(TripId id, const std::vector<std::pair<double, double>>& xy, const std::vector<double>& speeds) {
  Trip t = bare_trip(id, 0, 1, 100.0);
  for (std::size_t k = 0; k < speeds.size(); ++k)
    t.readings.push_back({id, static_cast<int>(k + 1), 1.0 + k, xy[k].first, xy[k].second, speeds[k]});
  return t;
}

}  // namespace

TEST(Harmonic, TwoSpeeds) {
  const auto e = fit_harmonic({0, {10.0, 20.0}}, 100.0);
  EXPECT_DOUBLE_EQ(e.point, 7.5);
  EXPECT_EQ(e.empirical, (std::vector<double>{10.0, 5.0}));
}

TEST(Mle, TwoSpeeds) {
  const auto e = fit_mle({0, {10.0, 20.0}}, 100.0);
  const double m = 0.5 * (std::log(10.0) + std::log(20.0));
  const double s2 = std::pow(std::log(20.0) - std::log(10.0), 2) / 4.0;
  EXPECT_NEAR(e.log_mean, std::log(100.0) - m, 1e-12);
  EXPECT_NEAR(e.log_var, s2, 1e-12);
  EXPECT_NEAR(e.point, std::exp(std::log(100.0) - m + 0.5 * s2), 1e-12);
}

TEST(Mle, SingleReadingHasZeroSpread) {
  const auto e = fit_mle({0, {12.0}}, 120.0);
  EXPECT_DOUBLE_EQ(e.log_var, 0.0);
  EXPECT_NEAR(e.point, 10.0, 1e-12);
}

TEST(LocalFits, RejectEmpty) {
  EXPECT_THROW(fit_harmonic({3, {}}, 100.0), ValidationError);
  EXPECT_THROW(fit_mle({3, {}}, 100.0), ValidationError);
}

TEST(MapSpeeds, DirectionsMergedAndFloorApplied) {
  const auto net = line_network({0, 100, 200});
  const auto t = trip_with_speeds(1, {{20, 1}, {80, -1}, {150, 0}}, {10.0, 0.0, 7.0});
  const auto samples = map_speeds_to_arcs(net, {t});
  EXPECT_EQ(samples[0].speeds, (std::vector<double>{10.0, kSpeedFloor}));
  EXPECT_EQ(samples[2].speeds, (std::vector<double>{7.0}));
  EXPECT_TRUE(samples[1].speeds.empty());
}

TEST(LocalModel, BothDirectionsShareEstimate) {
  const auto net = line_network({0, 100, 200});
  const auto t = trip_with_speeds(1, {{20, 0}, {80, 0}, {150, 0}}, {10.0, 20.0, 5.0});
  for (auto method : {LocalMethod::harmonic, LocalMethod::mle}) {
    const auto model = fit_local_model(net, {t}, method);
    EXPECT_DOUBLE_EQ(model.per_arc[0].point, model.per_arc[1].point);
    EXPECT_DOUBLE_EQ(model.per_arc[2].point, model.per_arc[3].point);
    EXPECT_EQ(model.per_arc[1].arc, 1);
  }
  EXPECT_DOUBLE_EQ(fit_local_model(net, {t}, LocalMethod::harmonic).per_arc[0].point, 7.5);
}

TEST(Impute, NearestSameClassByHops) {
  // Line 0-1-2-3-4; arcs (canonical) 0,2,4,6. Data on arc 0 and 6; arc 2 is one hop from 0, arc 4 one hop from 6.
  const auto net = line_network({0, 100, 200, 300, 400});
  const auto t = trip_with_speeds(1, {{50, 0}, {350, 0}}, {10.0, 5.0});
  const auto model = fit_local_model(net, {t}, LocalMethod::harmonic);
  EXPECT_EQ(model.per_arc[2].donor, 0);
  EXPECT_EQ(model.per_arc[4].donor, 6);
  EXPECT_DOUBLE_EQ(model.per_arc[2].point, 10.0);
  EXPECT_DOUBLE_EQ(model.per_arc[4].point, 20.0);
}

TEST(Impute, TieGoesToSmallestArcAndUsesOwnLength) {
  // Middle arc is equidistant from both observed arcs.
  const auto net = line_network({0, 100, 300, 400});
  const auto t = trip_with_speeds(1, {{50, 0}, {350, 0}}, {10.0, 5.0});
  const auto model = fit_local_model(net, {t}, LocalMethod::mle);
  EXPECT_EQ(model.per_arc[2].donor, 0);
  EXPECT_NEAR(model.per_arc[2].point, 200.0 / 10.0, 1e-12);
}

TEST(Impute, SkipsOtherClasses) {
  std::vector<Node> nodes{{0, 0, 0}, {1, 100, 0}, {2, 200, 0}, {3, 300, 0}};
  std::vector<Arc> arcs{{0, 0, 1, 100, RoadClass::primary, 1},   {1, 1, 0, 100, RoadClass::primary, 0},
                        {2, 1, 2, 100, RoadClass::tertiary, 3},  {3, 2, 1, 100, RoadClass::tertiary, 2},
                        {4, 2, 3, 100, RoadClass::primary, 5},   {5, 3, 2, 100, RoadClass::primary, 4}};
  const RoadNetwork net(std::move(nodes), std::move(arcs));
  const auto t = trip_with_speeds(1, {{50, 0}, {150, 0}}, {10.0, 4.0});
  const auto model = fit_local_model(net, {t}, LocalMethod::harmonic);
  EXPECT_EQ(model.per_arc[4].donor, 0);  // the tertiary arc is closer but of another class
  EXPECT_DOUBLE_EQ(model.per_arc[4].point, 10.0);
}

TEST(Impute, ThrowsWhenClassHasNoData) {
  const auto net = make_grid_network(3, 3, 100.0, ClassPattern{});
  std::vector<Trip> trips{trip_with_speeds(1, {{50, 0}}, {10.0})};
  EXPECT_THROW(fit_local_model(net, trips, LocalMethod::harmonic), ValidationError);
}

TEST(Impute, MatchesBruteForceBfs) {
  const auto net = make_grid_network(5, 5, 100.0, ClassPattern{});
  std::mt19937_64 eng(2);
  std::uniform_real_distribution<double> u(0.0, 400.0);
  std::vector<Trip> trips;
  Trip t = bare_trip(1, 0, 24, 100.0);
  for (int k = 0; k < 25; ++k) t.readings.push_back({1, k + 1, 1.0 + k, u(eng), u(eng), 5.0 + k});
  trips.push_back(t);
  const auto samples = map_speeds_to_arcs(net, trips);
  std::vector<ArcId> canon;
  for (const Arc& a : net.arcs())
    if (net.canonical(a.id) == a.id) canon.push_back(a.id);
  auto share_node = [&](ArcId a, ArcId b) {
    const Arc &x = net.arc(a), &y = net.arc(b);
    return x.from == y.from || x.from == y.to || x.to == y.from || x.to == y.to;
  };
  ClassPattern pattern;
  bool all_classes = true;
  for (int c = 0; c < kNumRoadClasses; ++c) {
    bool any = false;
    for (ArcId a : canon) any = any || (static_cast<int>(net.arc(a).road_class) == c && !samples[a].speeds.empty());
    all_classes = all_classes && any;
  }
  if (!all_classes) GTEST_SKIP() << "random readings missed a class";
  const auto model = fit_local_model(net, trips, LocalMethod::harmonic);
  for (ArcId j : canon) {
    if (!samples[j].speeds.empty()) {
      EXPECT_EQ(model.per_arc[j].donor, j);
      continue;
    }
    // Hop distances by repeated relaxation over the arc adjacency.
    std::map<ArcId, int> d{{j, 0}};
    for (bool changed = true; changed;) {
      changed = false;
      for (ArcId a : canon)
        for (ArcId b : canon)
          if (d.count(a) && share_node(a, b) && (!d.count(b) || d[b] > d[a] + 1)) d[b] = d[a] + 1, changed = true;
    }
    ArcId best = -1;
    for (ArcId a : canon)
      if (a != j && !samples[a].speeds.empty() && net.arc(a).road_class == net.arc(j).road_class &&
          (best < 0 || d[a] < d[best]))
        best = a;
    EXPECT_EQ(model.per_arc[j].donor, best) << "arc " << j;
  }
}

TEST(LocalModel, RoundTrip) {
  const auto net = line_network({0, 100, 200});
  const auto t = trip_with_speeds(1, {{20, 0}, {80, 0}, {150, 0}}, {10.0, 20.0, 5.0});
  const auto dir = std::filesystem::temp_directory_path() / "traveltime_local_rt";
  std::filesystem::remove_all(dir);
  for (auto method : {LocalMethod::harmonic, LocalMethod::mle}) {
    const auto model = fit_local_model(net, {t}, method);
    write_local_model(model, dir);
    const auto back = read_local_model(dir);
    EXPECT_EQ(back.method, method);
    ASSERT_EQ(back.per_arc.size(), model.per_arc.size());
    for (std::size_t j = 0; j < model.per_arc.size(); ++j) {
      EXPECT_DOUBLE_EQ(back.per_arc[j].point, model.per_arc[j].point);
      EXPECT_DOUBLE_EQ(back.per_arc[j].log_var, model.per_arc[j].log_var);
      EXPECT_EQ(back.per_arc[j].empirical, model.per_arc[j].empirical);
    }
  }
  std::filesystem::remove_all(dir);
}

TEST(PriorFromData, ClassSpeedsAreGeometricMeans) {
  const auto net = line_network({0, 100, 200}, RoadClass::primary);
  const auto t = trip_with_speeds(1, {{20, 0}, {150, 0}}, {4.0, 9.0});
  const auto s = class_speeds_from_data(net, {t});
  EXPECT_NEAR(s[0], 6.0, 1e-12);
  EXPECT_DOUBLE_EQ(s[1], kDefaultPriorSpeeds[1]);
}

TEST(PriorFromData, S2RecoversBetweenArcSpread) {
  // Many arcs of one class, per-arc log-speed offsets with variance 0.04, many readings each.
  std::vector<double> xs;
  for (int i = 0; i <= 60; ++i) xs.push_back(100.0 * i);
  const auto net = line_network(xs, RoadClass::primary);
  std::mt19937_64 eng(3);
  std::normal_distribution<double> off(0.0, 0.2), noise(0.0, 0.1);
  Trip t = bare_trip(1, 0, 60, 1000.0);
  int seq = 1;
  for (int a = 0; a < 60; ++a) {
    const double m = std::log(10.0) + off(eng);
    for (int k = 0; k < 30; ++k)
      t.readings.push_back({1, seq, static_cast<double>(seq), 100.0 * a + 50.0, 0.0, std::exp(m + noise(eng))}), ++seq;
  }
  EXPECT_NEAR(prior_s2_from_data(net, {t}), 0.04, 0.02);
}
