#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include "traveltime/csv.hpp"
#include "traveltime/random.hpp"
#include "traveltime/road_network.hpp"

namespace traveltime {

using TripId = long long;

struct GpsReading {
  TripId trip_id = 0;
  int seq = 1;
  double t = 0.0;      // seconds
  double x = 0.0;      // meters
  double y = 0.0;
  double speed = 0.0;  // meters/second
};

struct Trip {
  TripId id = 0;
  NodeId start_node = -1;
  NodeId end_node = -1;
  double t_start = 0.0;
  double t_end = 0.0;
  std::vector<GpsReading> readings;

  double duration() const { return t_end - t_start; }
};

struct SkippedTrip {
  TripId id;
  std::string reason;
};

struct LoadOptions {
  /// A trip is dropped when two consecutive readings are further apart in time than this...
  double max_gap_s = 300.0;
  /// ...while the straight-line speed implied across that gap is below this.
  double stop_speed_mps = 1.0;
};

struct LoadResult {
  std::vector<Trip> trips;
  std::vector<SkippedTrip> skipped;
};

inline const std::vector<std::string> kTripColumns{"trip_id", "start_node", "end_node", "t_start_s", "t_end_s"};
inline const std::vector<std::string> kGpsColumns{"trip_id", "seq", "t_s", "x_m", "y_m", "speed_mps"};

/**
 * Reads trips and GPS readings, snapping missing endpoints (-1) to the nodes
 * nearest the first/last reading. Per-trip problems skip the trip and record
 * a reason; malformed text throws ParseError.
 */
inline LoadResult load_dataset(const RoadNetwork& net, std::istream& trips_in, std::istream& gps_in,
                               const LoadOptions& options = {}, const std::string& trips_name = "trips.csv",
                               const std::string& gps_name = "gps.csv") {
  std::map<TripId, std::vector<GpsReading>> by_trip;
  for (const auto& row : csv::read(gps_in, kGpsColumns, gps_name)) {
    GpsReading r;
    r.trip_id = csv::parse_number<TripId>(row, 0, gps_name);
    r.seq = csv::parse_number<int>(row, 1, gps_name);
    r.t = csv::parse_number<double>(row, 2, gps_name);
    r.x = csv::parse_number<double>(row, 3, gps_name);
    r.y = csv::parse_number<double>(row, 4, gps_name);
    r.speed = csv::parse_number<double>(row, 5, gps_name);
    if (r.speed < 0.0 || !std::isfinite(r.speed)) throw ParseError(gps_name, row.line, "speed must be >= 0");
    by_trip[r.trip_id].push_back(r);
  }

  LoadResult result;
  for (const auto& row : csv::read(trips_in, kTripColumns, trips_name)) {
    Trip trip;
    trip.id = csv::parse_number<TripId>(row, 0, trips_name);
    trip.start_node = csv::parse_number<int>(row, 1, trips_name);
    trip.end_node = csv::parse_number<int>(row, 2, trips_name);
    trip.t_start = csv::parse_number<double>(row, 3, trips_name);
    trip.t_end = csv::parse_number<double>(row, 4, trips_name);
    if (auto it = by_trip.find(trip.id); it != by_trip.end()) trip.readings = it->second;
    std::sort(trip.readings.begin(), trip.readings.end(),
              [](const GpsReading& a, const GpsReading& b) { return a.seq < b.seq; });

    auto skip = [&](std::string reason) { result.skipped.push_back({trip.id, std::move(reason)}); };

    bool bad_order = false;
    for (std::size_t k = 1; k < trip.readings.size(); ++k)
      if (!(trip.readings[k].t > trip.readings[k - 1].t) || trip.readings[k].seq == trip.readings[k - 1].seq)
        bad_order = true;
    if (bad_order) {
      skip("readings not strictly increasing in time");
      continue;
    }

    const bool snap = trip.start_node < 0 || trip.end_node < 0;
    if (snap) {
      if (trip.readings.size() < 2) {
        skip("too few readings");
        continue;
      }
      const GpsReading& first = trip.readings.front();
      const GpsReading& last = trip.readings.back();
      if (trip.start_node < 0) {
        trip.start_node = nearest_node(net, first.x, first.y);
        trip.t_start = first.t;
      }
      if (trip.end_node < 0) {
        trip.end_node = nearest_node(net, last.x, last.y);
        trip.t_end = last.t;
      }
    }
    if (!net.has_node(trip.start_node) || !net.has_node(trip.end_node)) {
      skip("endpoint not in network");
      continue;
    }
    if (!(trip.t_end > trip.t_start)) {
      skip("zero duration");
      continue;
    }
    if (trip.start_node == trip.end_node) {
      skip(snap ? "endpoints snap to the same node" : "start and end node coincide");
      continue;
    }
    bool outside = false;
    for (const auto& r : trip.readings)
      if (r.t < trip.t_start || r.t > trip.t_end) outside = true;
    if (outside) {
      skip("reading outside trip time window");
      continue;
    }
    bool long_stop = false;
    for (std::size_t k = 1; k < trip.readings.size(); ++k) {
      const auto& a = trip.readings[k - 1];
      const auto& b = trip.readings[k];
      const double gap = b.t - a.t;
      const double dist = std::hypot(b.x - a.x, b.y - a.y);
      if (gap > options.max_gap_s && dist / gap < options.stop_speed_mps) long_stop = true;
    }
    if (long_stop) {
      skip("long stop");
      continue;
    }
    result.trips.push_back(std::move(trip));
  }
  return result;
}

inline LoadResult load_dataset_files(const RoadNetwork& net, const std::string& trips_path, const std::string& gps_path,
                                     const LoadOptions& options = {}) {
  std::ifstream t(trips_path), g(gps_path);
  if (!t) throw ParseError(trips_path, 0, "cannot open file");
  if (!g) throw ParseError(gps_path, 0, "cannot open file");
  return load_dataset(net, t, g, options, trips_path, gps_path);
}

inline void write_dataset(const std::vector<Trip>& trips, std::ostream& trips_out, std::ostream& gps_out) {
  trips_out << "trip_id,start_node,end_node,t_start_s,t_end_s\n";
  gps_out << "trip_id,seq,t_s,x_m,y_m,speed_mps\n";
  for (const Trip& trip : trips) {
    csv::write_row(trips_out, trip.id, trip.start_node, trip.end_node, trip.t_start, trip.t_end);
    for (const GpsReading& r : trip.readings) csv::write_row(gps_out, trip.id, r.seq, r.t, r.x, r.y, r.speed);
  }
}

// ---------------------------------------------------------------------------

inline constexpr int kNumFolds = 10;

/// Training ids plus ten disjoint validation/test folds covering the remaining trips.
struct FoldPlan {
  std::vector<TripId> training;
  std::vector<std::vector<TripId>> folds;

  std::vector<TripId> evaluation() const {
    std::vector<TripId> out;
    for (const auto& f : folds) out.insert(out.end(), f.begin(), f.end());
    return out;
  }
};

/**
 * Seeded shuffle, then floor(n/2) trips for training and the rest dealt into
 * ten folds whose sizes differ by at most one (larger folds first).
 */
inline FoldPlan split_folds(std::vector<TripId> ids, std::uint64_t seed) {
  if (ids.size() < 2 * kNumFolds)
    throw ValidationError("split_folds needs at least " + std::to_string(2 * kNumFolds) + " trips, got " +
                          std::to_string(ids.size()));
  std::sort(ids.begin(), ids.end());
  Rng rng(substream_seed(seed, 0xF01D));
  for (std::size_t i = ids.size() - 1; i > 0; --i) std::swap(ids[i], ids[rng.index(i + 1)]);

  FoldPlan plan;
  const std::size_t n_train = ids.size() / 2;
  plan.training.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_train));
  const std::size_t rest = ids.size() - n_train;
  plan.folds.resize(kNumFolds);
  std::size_t at = n_train;
  for (std::size_t k = 0; k < kNumFolds; ++k) {
    const std::size_t size = rest / kNumFolds + (k < rest % kNumFolds ? 1 : 0);
    plan.folds[k].assign(ids.begin() + static_cast<std::ptrdiff_t>(at),
                         ids.begin() + static_cast<std::ptrdiff_t>(at + size));
    at += size;
  }
  return plan;
}

inline std::vector<TripId> trip_ids(const std::vector<Trip>& trips) {
  std::vector<TripId> out;
  out.reserve(trips.size());
  for (const auto& t : trips) out.push_back(t.id);
  return out;
}

/// Trips whose ids appear in `ids`, in the order of `ids`.
inline std::vector<Trip> select_trips(const std::vector<Trip>& trips, const std::vector<TripId>& ids) {
  std::map<TripId, const Trip*> index;
  for (const auto& t : trips) index[t.id] = &t;
  std::vector<Trip> out;
  out.reserve(ids.size());
  for (TripId id : ids) out.push_back(*index.at(id));
  return out;
}

}  // namespace traveltime
