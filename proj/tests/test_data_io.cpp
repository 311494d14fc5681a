#include <gtest/gtest.h>

#include <set>

#include "test_util.hpp"

using namespace traveltime;
using namespace traveltime::testing;

namespace {

const std::string kTripHeader = "trip_id,start_node,end_node,t_start_s,t_end_s\n";
const std::string kGpsHeader = "trip_id,seq,t_s,x_m,y_m,speed_mps\n";

LoadResult load(const RoadNetwork& net, const std::string& trips, const std::string& gps, const LoadOptions& o = {}) {
  std::istringstream t(kTripHeader + trips), g(kGpsHeader + gps);
  return load_dataset(net, t, g, o);
}

std::string reason_of(const LoadResult& r, TripId id) {
  for (const auto& s : r.skipped)
    if (s.id == id) return s.reason;
  return "";
}

}  // namespace

TEST(LoadDataset, TripWithoutReadings) {
  const auto net = line_network({0, 100, 200});
  const auto r = load(net, "1,0,2,0,30\n", "");
  ASSERT_EQ(r.trips.size(), 1u);
  EXPECT_TRUE(r.trips[0].readings.empty());
  EXPECT_DOUBLE_EQ(r.trips[0].duration(), 30.0);
}

TEST(LoadDataset, SnapsMissingEndpoints) {
  const auto net = line_network({0, 100, 200, 300});
  const auto r = load(net, "7,-1,-1,-1,-1\n", "7,1,5,4,1,10\n7,2,20,150,0,10\n7,3,40,290,-3,10\n");
  ASSERT_EQ(r.trips.size(), 1u);
  EXPECT_EQ(r.trips[0].start_node, 0);
  EXPECT_EQ(r.trips[0].end_node, 3);
  EXPECT_DOUBLE_EQ(r.trips[0].t_start, 5.0);
  EXPECT_DOUBLE_EQ(r.trips[0].t_end, 40.0);
  EXPECT_EQ(r.trips[0].readings.size(), 3u);
}

TEST(LoadDataset, ReadingsOrderedBySeq) {
  const auto net = line_network({0, 100, 200});
  const auto r = load(net, "1,0,2,0,30\n", "1,2,20,150,0,5\n1,1,10,50,0,5\n");
  ASSERT_EQ(r.trips.size(), 1u);
  EXPECT_EQ(r.trips[0].readings[0].seq, 1);
  EXPECT_DOUBLE_EQ(r.trips[0].readings[1].t, 20.0);
}

TEST(LoadDataset, SkipReasons) {
  const auto net = line_network({0, 100, 200});
  const auto r = load(net,
                      "1,0,2,0,30\n"    // time goes backwards
                      "2,-1,2,0,30\n"   // one reading, cannot snap
                      "3,0,9,0,30\n"    // unknown node
                      "4,0,2,10,10\n"   // zero duration
                      "5,1,1,0,10\n"    // same node
                      "6,0,2,0,30\n"    // reading after end
                      "7,0,2,0,1000\n"  // long stop
                      "8,-1,-1,0,0\n",  // both readings near node 1
                      "1,1,10,50,0,5\n1,2,5,60,0,5\n"
                      "2,1,10,50,0,5\n"
                      "6,1,40,50,0,5\n"
                      "7,1,10,50,0,5\n7,2,700,52,0,5\n"
                      "8,1,1,95,0,5\n8,2,9,105,0,5\n");
  EXPECT_TRUE(r.trips.empty());
  EXPECT_EQ(reason_of(r, 1), "readings not strictly increasing in time");
  EXPECT_EQ(reason_of(r, 2), "too few readings");
  EXPECT_EQ(reason_of(r, 3), "endpoint not in network");
  EXPECT_EQ(reason_of(r, 4), "zero duration");
  EXPECT_EQ(reason_of(r, 5), "start and end node coincide");
  EXPECT_EQ(reason_of(r, 6), "reading outside trip time window");
  EXPECT_EQ(reason_of(r, 7), "long stop");
  EXPECT_EQ(reason_of(r, 8), "endpoints snap to the same node");
}

TEST(LoadDataset, LongGapAtSpeedIsKept) {
  const auto net = line_network({0, 1000, 2000});
  LoadOptions o;
  o.max_gap_s = 100.0;
  const auto r = load(net, "1,0,2,0,500\n", "1,1,10,0,0,5\n1,2,400,1800,0,5\n", o);
  EXPECT_EQ(r.trips.size(), 1u);
}

TEST(LoadDataset, MalformedTextThrows) {
  const auto net = line_network({0, 100});
  EXPECT_THROW(load(net, "1,0,1,zero,10\n", ""), ParseError);
  EXPECT_THROW(load(net, "1,0,1,0,10\n", "1,1,5,0,0,-2\n"), ParseError);
  EXPECT_THROW(load(net, "1,0,1\n", ""), ParseError);
  std::istringstream t("id,s,e,a,b\n"), g(kGpsHeader);
  EXPECT_THROW(load_dataset(net, t, g), ParseError);
}

TEST(WriteDataset, RoundTrip) {
  const auto net = line_network({0, 100, 200});
  const auto first = load(net, "3,0,2,0,30.5\n4,2,0,1,20\n", "3,1,10,50.25,0.5,5.125\n3,2,20,150,0,7\n");
  std::ostringstream t, g;
  write_dataset(first.trips, t, g);
  std::istringstream ti(t.str()), gi(g.str());
  const auto back = load_dataset(net, ti, gi);
  ASSERT_EQ(back.trips.size(), 2u);
  EXPECT_DOUBLE_EQ(back.trips[0].t_end, 30.5);
  EXPECT_DOUBLE_EQ(back.trips[0].readings[0].x, 50.25);
  EXPECT_DOUBLE_EQ(back.trips[0].readings[0].speed, 5.125);
  EXPECT_EQ(back.trips[1].start_node, 2);
}

TEST(SplitFolds, SizesAndDisjointness) {
  for (int n : {20, 21, 37, 1000, 1001}) {
    std::vector<TripId> ids(n);
    for (int i = 0; i < n; ++i) ids[i] = i * 3 + 1;
    const auto plan = split_folds(ids, 42);
    EXPECT_EQ(plan.training.size(), static_cast<std::size_t>(n / 2));
    ASSERT_EQ(plan.folds.size(), 10u);
    std::set<TripId> seen(plan.training.begin(), plan.training.end());
    std::size_t prev = plan.folds[0].size();
    for (const auto& f : plan.folds) {
      EXPECT_LE(f.size(), prev);  // larger folds first
      EXPECT_LE(plan.folds[0].size() - f.size(), 1u);
      prev = f.size();
      for (TripId id : f) EXPECT_TRUE(seen.insert(id).second);
    }
    EXPECT_EQ(seen.size(), static_cast<std::size_t>(n));
  }
}

TEST(SplitFolds, DeterministicAndOrderIndependent) {
  std::vector<TripId> ids(100);
  for (int i = 0; i < 100; ++i) ids[i] = i;
  const auto a = split_folds(ids, 7);
  std::reverse(ids.begin(), ids.end());
  const auto b = split_folds(ids, 7);
  EXPECT_EQ(a.training, b.training);
  EXPECT_EQ(a.folds, b.folds);
  const auto c = split_folds(ids, 8);
  EXPECT_NE(a.training, c.training);
}

TEST(SplitFolds, TooFewTrips) {
  EXPECT_THROW(split_folds(std::vector<TripId>(19, 0), 1), ValidationError);
}

TEST(SelectTrips, KeepsRequestedOrder) {
  const std::vector<Trip> trips{bare_trip(1, 0, 1, 5), bare_trip(2, 0, 1, 6), bare_trip(3, 0, 1, 7)};
  const auto s = select_trips(trips, {3, 1});
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s[0].id, 3);
  EXPECT_EQ(s[1].id, 1);
  EXPECT_EQ(trip_ids(trips), (std::vector<TripId>{1, 2, 3}));
}
