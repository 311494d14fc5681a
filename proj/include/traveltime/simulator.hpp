#pragma once

#include <array>
#include <cassert>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "traveltime/csv.hpp"
#include "traveltime/data_io.hpp"
#include "traveltime/random.hpp"
#include "traveltime/road_network.hpp"
#include "traveltime/travel_time_model.hpp"

namespace traveltime {

enum class Regime { good, bad };

inline std::string_view to_string(Regime r) { return r == Regime::good ? "good" : "bad"; }

/// GPS quality constants of a simulation regime.
struct RegimeConstants {
  double spacing_m;
  double location_variance;  // Sigma = diag(v, v), m^2
  double zeta2;
};

inline constexpr RegimeConstants regime_constants(Regime r) {
  return r == Regime::good ? RegimeConstants{250.0, 100.0, 0.004} : RegimeConstants{1000.0, 465.0, 0.01575};
}

/// Lower and upper bound of the per-arc log-time standard deviation.
inline const double kSimSigmaLo = 0.5 * std::log(std::sqrt(3.0));
inline const double kSimSigmaHi = 0.5 * std::log(3.0);

/**
 * Which grid rows/columns are primary or secondary streets, and the speed
 * range (mph) each class draws from. Row/column index i is primary when
 * i % primary_every == 0, else secondary when i % secondary_every == 0.
 */
struct ClassPattern {
  int primary_every = 4;
  int secondary_every = 2;
  std::array<std::array<double, 2>, kNumRoadClasses> speed_mph{{{30.0, 40.0}, {25.0, 35.0}, {20.0, 30.0}}};

  RoadClass class_of(int index) const {
    if (primary_every > 0 && index % primary_every == 0) return RoadClass::primary;
    if (secondary_every > 0 && index % secondary_every == 0) return RoadClass::secondary;
    return RoadClass::tertiary;
  }
};

struct Scenario {
  RoadNetwork net;
  std::vector<ArcParams> truth;
  GpsNoise noise;
  double gps_spacing = 250.0;
  Regime regime = Regime::good;
};

inline GpsNoise regime_noise(Regime r) {
  const auto c = regime_constants(r);
  return GpsNoise::isotropic(c.location_variance, c.zeta2);
}

/// Draws arc parameters: uniform speed in the class range, sigma uniform, mu so that L / theta equals the speed.
inline std::vector<ArcParams> draw_arc_params(const RoadNetwork& net, const ClassPattern& pattern, Rng& rng) {
  std::vector<ArcParams> out(net.num_arcs());
  for (const Arc& a : net.arcs()) {
    const auto& range = pattern.speed_mph[static_cast<int>(a.road_class)];
    const double speed = rng.uniform(range[0], range[1]) * kMph;
    const double sd = rng.uniform(kSimSigmaLo, kSimSigmaHi);
    out[a.id].sigma2 = sd * sd;
    out[a.id].mu = std::log(a.length / speed) - 0.5 * out[a.id].sigma2;
  }
  return out;
}

/// rows x cols grid of two-way streets, block_m apart; node id = row * cols + col.
inline RoadNetwork make_grid_network(int rows, int cols, double block_m, const ClassPattern& pattern) {
  if (rows < 2 || cols < 2) throw ValidationError("grid needs at least 2 rows and 2 columns");
  std::vector<Node> nodes;
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) nodes.push_back({r * cols + c, c * block_m, r * block_m});
  std::vector<Arc> arcs;
  auto add_street = [&](NodeId u, NodeId v, RoadClass cls) {
    const ArcId a = static_cast<ArcId>(arcs.size());
    arcs.push_back({a, u, v, block_m, cls, a + 1});
    arcs.push_back({a + 1, v, u, block_m, cls, a});
  };
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c + 1 < cols; ++c) add_street(r * cols + c, r * cols + c + 1, pattern.class_of(r));
  for (int c = 0; c < cols; ++c)
    for (int r = 0; r + 1 < rows; ++r) add_street(r * cols + c, (r + 1) * cols + c, pattern.class_of(c));
  return RoadNetwork(std::move(nodes), std::move(arcs));
}

inline Scenario build_grid_scenario(int rows, int cols, double block_m, const ClassPattern& pattern, Regime regime,
                                    std::uint64_t seed) {
  Scenario s;
  s.net = make_grid_network(rows, cols, block_m, pattern);
  Rng rng(substream_seed(seed, 0x5CE4));
  s.truth = draw_arc_params(s.net, pattern, rng);
  s.noise = regime_noise(regime);
  s.gps_spacing = regime_constants(regime).spacing_m;
  s.regime = regime;
  return s;
}

/// A generated trip with its hidden truth.
struct SimulatedTrip {
  Trip trip;
  Path true_path;
  std::vector<double> true_times;
};

/**
 * Builds a path from `start` to `end` by repeatedly choosing, uniformly, an
 * outgoing arc whose head has strictly lower expected time to `end`.
 */
inline Path generate_path(const RoadNetwork& net, std::span<const double> thetas, NodeId start, NodeId end, Rng& rng) {
  const auto h = time_to_target_map(net, thetas, end);
  if (!std::isfinite(h[start])) throw UnreachableError("end node unreachable from start node");
  Path path;
  NodeId at = start;
  std::vector<ArcId> options;
  while (at != end) {
    options.clear();
    for (ArcId a : net.outgoing(at))
      if (h[net.arc(a).to] < h[at]) options.push_back(a);
    assert(!options.empty());
    const ArcId pick = options[rng.index(options.size())];
    path.arcs.push_back(pick);
    at = net.arc(pick).to;
  }
  return path;
}

/// Trip between uniform distinct endpoints, with lognormal arc times; t_start = 0.
inline SimulatedTrip simulate_trip(const Scenario& s, TripId id, std::uint64_t seed) {
  Rng rng(substream_seed(seed, 0x7217, static_cast<std::uint64_t>(id)));
  const auto n = s.net.num_nodes();
  const auto start = static_cast<NodeId>(rng.index(n));
  auto end = static_cast<NodeId>(rng.index(n - 1));
  if (end >= start) ++end;
  const auto thetas = theta_map(s.truth);
  SimulatedTrip out;
  out.true_path = generate_path(s.net, thetas, start, end, rng);
  double total = 0.0;
  for (ArcId a : out.true_path.arcs) {
    const ArcParams& p = s.truth[static_cast<std::size_t>(a)];
    out.true_times.push_back(rng.lognormal(p.mu, p.sigma2));
    total += out.true_times.back();
  }
  out.trip = Trip{id, start, end, 0.0, total, {}};
  return out;
}

enum class SamplingMode { by_distance, by_time };

/**
 * GPS readings at along-path distances interval, 2*interval, ... (or at
 * times interval, 2*interval, ...), with bivariate normal location noise and
 * mean-corrected lognormal speed noise.
 */
inline std::vector<GpsReading> sample_gps_readings(const RoadNetwork& net, const SimulatedTrip& st, const GpsNoise& noise,
                                                   SamplingMode mode, double interval, std::uint64_t seed) {
  if (!(interval > 0.0)) throw ValidationError("GPS sampling interval must be positive");
  Rng rng(substream_seed(seed, 0x6B5, static_cast<std::uint64_t>(st.trip.id)));
  const Trajectory traj(net, st.true_path, st.true_times);
  std::vector<double> times;
  if (mode == SamplingMode::by_time) {
    for (int k = 1; k * interval <= traj.total() * (1.0 + 1e-12); ++k) times.push_back(k * interval);
  } else {
    double arc_start_d = 0.0, arc_start_t = 0.0;
    std::size_t k = 0;
    const double total_len = path_length(net, st.true_path);
    for (int m = 1; m * interval <= total_len * (1.0 + 1e-12); ++m) {
      const double d = m * interval;
      while (k + 1 < st.true_path.size() && arc_start_d + net.arc(st.true_path.arcs[k]).length <= d) {
        arc_start_d += net.arc(st.true_path.arcs[k]).length;
        arc_start_t += st.true_times[k];
        ++k;
      }
      const double frac = std::min((d - arc_start_d) / net.arc(st.true_path.arcs[k]).length, 1.0);
      times.push_back(std::min(arc_start_t + frac * st.true_times[k], traj.total()));
    }
  }
  const auto [l11, l21, l22] = noise.cholesky();
  const double z = std::sqrt(noise.zeta2());
  std::vector<GpsReading> out;
  int seq = 1;
  for (double t : times) {
    const Kinematics k = traj.at(t);
    const double e1 = rng.normal(), e2 = rng.normal();
    GpsReading r;
    r.trip_id = st.trip.id;
    r.seq = seq++;
    r.t = st.trip.t_start + t;
    r.x = k.x + l11 * e1;
    r.y = k.y + l21 * e1 + l22 * e2;
    r.speed = k.speed * std::exp(-0.5 * noise.zeta2() + z * rng.normal());
    out.push_back(r);
  }
  return out;
}

/// `n` simulated trips with ids first_id.. and GPS readings at the scenario's spacing.
inline std::vector<SimulatedTrip> simulate_dataset(const Scenario& s, int n, std::uint64_t seed, TripId first_id = 0,
                                                   SamplingMode mode = SamplingMode::by_distance) {
  std::vector<SimulatedTrip> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    SimulatedTrip st = simulate_trip(s, first_id + i, seed);
    st.trip.readings = sample_gps_readings(s.net, st, s.noise, mode, s.gps_spacing, seed);
    out.push_back(std::move(st));
  }
  return out;
}

inline std::vector<Trip> trips_of(const std::vector<SimulatedTrip>& sim) {
  std::vector<Trip> out;
  out.reserve(sim.size());
  for (const auto& s : sim) out.push_back(s.trip);
  return out;
}

inline void write_ground_truth(const Scenario& s, const std::vector<SimulatedTrip>& trips, std::ostream& trips_out,
                               std::ostream& arcs_out) {
  trips_out << "trip_id,arc_seq,arc_id,true_time_s\n";
  for (const auto& st : trips)
    for (std::size_t k = 0; k < st.true_path.size(); ++k)
      csv::write_row(trips_out, st.trip.id, k, st.true_path.arcs[k], st.true_times[k]);
  arcs_out << "arc_id,true_mu,true_sigma2\n";
  for (std::size_t j = 0; j < s.truth.size(); ++j) csv::write_row(arcs_out, j, s.truth[j].mu, s.truth[j].sigma2);
}

/// Ground truth read back: true paths/times keyed by trip id, and true arc parameters.
struct GroundTruth {
  std::map<TripId, std::pair<Path, std::vector<double>>> trips;
  std::vector<ArcParams> arcs;
};

inline GroundTruth read_ground_truth(const std::string& trips_path, const std::string& arcs_path) {
  GroundTruth g;
  for (const auto& row : csv::read_file(trips_path, {"trip_id", "arc_seq", "arc_id", "true_time_s"})) {
    auto& [path, times] = g.trips[csv::parse_number<TripId>(row, 0, trips_path)];
    path.arcs.push_back(csv::parse_number<ArcId>(row, 2, trips_path));
    times.push_back(csv::parse_number<double>(row, 3, trips_path));
  }
  for (const auto& row : csv::read_file(arcs_path, {"arc_id", "true_mu", "true_sigma2"}))
    g.arcs.push_back({csv::parse_number<double>(row, 1, arcs_path), csv::parse_number<double>(row, 2, arcs_path)});
  return g;
}

}  // namespace traveltime
