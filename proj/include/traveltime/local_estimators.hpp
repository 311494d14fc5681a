#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "traveltime/csv.hpp"
#include "traveltime/data_io.hpp"
#include "traveltime/road_network.hpp"
#include "traveltime/travel_time_model.hpp"

namespace traveltime {

/// Clamped GPS speeds mapped to one direction-merged arc.
struct ArcSpeedSample {
  ArcId arc = -1;  // canonical id
  std::vector<double> speeds;
};

enum class LocalMethod { harmonic, mle };

inline std::string_view to_string(LocalMethod m) { return m == LocalMethod::harmonic ? "harmonic" : "mle"; }

/**
 * Travel-time estimate for one arc. Harmonic estimates carry the empirical
 * times L/V_k; MLE estimates carry a lognormal on log seconds.
 */
struct LocalEstimate {
  ArcId arc = -1;
  LocalMethod method = LocalMethod::harmonic;
  double point = 0.0;                 // seconds
  std::vector<double> empirical;      // harmonic: L / V_k
  double log_mean = 0.0;              // mle: log L - m_hat
  double log_var = 0.0;               // mle: s_hat^2
  ArcId donor = -1;                   // canonical arc the speeds came from (itself when observed)
};

/// Per-arc speed samples indexed by canonical arc id (non-canonical slots stay empty).
inline std::vector<ArcSpeedSample> map_speeds_to_arcs(const RoadNetwork& net, const std::vector<Trip>& trips,
                                                      double speed_floor = kSpeedFloor) {
  std::vector<ArcSpeedSample> out(net.num_arcs());
  for (std::size_t j = 0; j < out.size(); ++j) out[j].arc = static_cast<ArcId>(j);
  for (const Trip& trip : trips)
    for (const GpsReading& r : trip.readings)
      out[static_cast<std::size_t>(nearest_arc(net, r.x, r.y))].speeds.push_back(std::max(r.speed, speed_floor));
  return out;
}

/// Per-class geometric-mean GPS speed (m/s) of the readings nearest each class; `fallback` for classes without readings.
inline ClassSpeeds class_speeds_from_data(const RoadNetwork& net, const std::vector<Trip>& trips,
                                          const ClassSpeeds& fallback = kDefaultPriorSpeeds,
                                          double speed_floor = kSpeedFloor) {
  std::array<double, kNumRoadClasses> sum{};
  std::array<long, kNumRoadClasses> count{};
  for (const auto& sample : map_speeds_to_arcs(net, trips, speed_floor)) {
    const int c = static_cast<int>(net.arc(sample.arc).road_class);
    for (double v : sample.speeds) {
      sum[c] += std::log(v);
      ++count[c];
    }
  }
  ClassSpeeds out = fallback;
  for (int c = 0; c < kNumRoadClasses; ++c)
    if (count[c] > 0) out[c] = std::exp(sum[c] / static_cast<double>(count[c]));
  return out;
}

/**
 * Method-of-moments estimate of the between-arc variance of mean log speed
 * around its class mean: the spread of per-arc mean log speeds minus their
 * average sampling variance. Uses arcs with at least two readings; never
 * returns less than `floor`.
 */
inline double prior_s2_from_data(const RoadNetwork& net, const std::vector<Trip>& trips, double floor = 1e-3,
                                 double speed_floor = kSpeedFloor) {
  struct ArcMoments {
    int cls;
    double n, mean, var;
  };
  std::vector<ArcMoments> arcs;
  std::array<double, kNumRoadClasses> weight{}, total{};
  for (const auto& sample : map_speeds_to_arcs(net, trips, speed_floor)) {
    const auto n = static_cast<double>(sample.speeds.size());
    if (n < 2) continue;
    double m = 0.0, ss = 0.0;
    for (double v : sample.speeds) m += std::log(v);
    m /= n;
    for (double v : sample.speeds) ss += (std::log(v) - m) * (std::log(v) - m);
    const int c = static_cast<int>(net.arc(sample.arc).road_class);
    arcs.push_back({c, n, m, ss / (n - 1.0)});
    weight[c] += 1.0;
    total[c] += m;
  }
  if (arcs.size() < 2) return floor;
  double spread = 0.0, noise = 0.0, dof = 0.0;
  for (const auto& a : arcs) {
    const double k = weight[a.cls];
    if (k < 2) continue;
    const double d = a.mean - total[a.cls] / k;
    spread += d * d * k / (k - 1.0);
    noise += a.var / a.n;
    dof += 1.0;
  }
  if (dof == 0.0) return floor;
  return std::max(floor, (spread - noise) / dof);
}

/// Harmonic-mean ("space mean speed") estimate: (L/n) * sum 1/V_k.
inline LocalEstimate fit_harmonic(const ArcSpeedSample& sample, double length) {
  if (sample.speeds.empty()) throw ValidationError("fit_harmonic: arc " + std::to_string(sample.arc) + " has no speeds");
  LocalEstimate e;
  e.arc = sample.arc;
  e.donor = sample.arc;
  e.method = LocalMethod::harmonic;
  double inv = 0.0;
  for (double v : sample.speeds) {
    inv += 1.0 / v;
    e.empirical.push_back(length / v);
  }
  e.point = length * inv / static_cast<double>(sample.speeds.size());
  return e;
}

/// Lognormal speed MLE (population variance) turned into a lognormal travel time.
inline LocalEstimate fit_mle(const ArcSpeedSample& sample, double length) {
  if (sample.speeds.empty()) throw ValidationError("fit_mle: arc " + std::to_string(sample.arc) + " has no speeds");
  const auto n = static_cast<double>(sample.speeds.size());
  double m = 0.0;
  for (double v : sample.speeds) m += std::log(v);
  m /= n;
  double s2 = 0.0;
  for (double v : sample.speeds) s2 += (std::log(v) - m) * (std::log(v) - m);
  s2 /= n;
  LocalEstimate e;
  e.arc = sample.arc;
  e.donor = sample.arc;
  e.method = LocalMethod::mle;
  e.log_mean = std::log(length) - m;
  e.log_var = s2;
  e.point = std::exp(e.log_mean + 0.5 * s2);
  return e;
}

inline LocalEstimate fit_local(LocalMethod method, const ArcSpeedSample& sample, double length) {
  return method == LocalMethod::harmonic ? fit_harmonic(sample, length) : fit_mle(sample, length);
}

/**
 * Fills arcs without data from the nearest same-class arc that has data,
 * searching breadth-first over the undirected arc-adjacency graph of
 * canonical arcs. Ties at equal hop distance go to the smallest arc id.
 * The donor's speeds are refitted against the recipient's own length.
 *
 * `estimates` is indexed by canonical arc id; entries without a value are
 * filled. Throws when a class with missing arcs has no data anywhere.
 */
inline void impute_missing(const RoadNetwork& net, std::vector<std::optional<LocalEstimate>>& estimates,
                           const std::vector<ArcSpeedSample>& samples, LocalMethod method) {
  // Canonical arcs touching each node.
  std::vector<std::vector<ArcId>> at_node(net.num_nodes());
  std::vector<ArcId> canon;
  for (const Arc& a : net.arcs()) {
    if (net.canonical(a.id) != a.id) continue;
    canon.push_back(a.id);
    at_node[a.from].push_back(a.id);
    at_node[a.to].push_back(a.id);
  }
  const std::vector<std::optional<LocalEstimate>> observed = estimates;

  for (ArcId j : canon) {
    if (observed[j]) continue;
    const RoadClass cls = net.arc(j).road_class;
    std::vector<int> dist(net.num_arcs(), -1);
    std::deque<ArcId> queue{j};
    dist[j] = 0;
    ArcId donor = -1;
    int donor_dist = -1;
    while (!queue.empty()) {
      const ArcId a = queue.front();
      queue.pop_front();
      if (donor >= 0 && dist[a] > donor_dist) break;
      if (a != j && observed[a] && net.arc(a).road_class == cls) {
        if (donor < 0 || a < donor) donor = a;
        donor_dist = dist[a];
        continue;
      }
      for (NodeId v : {net.arc(a).from, net.arc(a).to})
        for (ArcId b : at_node[v])
          if (dist[b] < 0) {
            dist[b] = dist[a] + 1;
            queue.push_back(b);
          }
    }
    if (donor < 0)
      throw ValidationError("no arc of class '" + std::string(to_string(cls)) +
                            "' has GPS data to impute arc " + std::to_string(j) + " from");
    LocalEstimate e = fit_local(method, samples[donor], net.arc(j).length);
    e.arc = j;
    e.donor = donor;
    estimates[j] = std::move(e);
  }
}

/**
 * A fitted local method: one estimate per directed arc. Both directions of a
 * two-way road share the canonical arc's estimate.
 */
struct LocalModel {
  LocalMethod method = LocalMethod::harmonic;
  std::vector<LocalEstimate> per_arc;  // indexed by directed arc id

  std::vector<double> point_times() const {
    std::vector<double> out;
    out.reserve(per_arc.size());
    for (const auto& e : per_arc) out.push_back(e.point);
    return out;
  }
};

inline LocalModel fit_local_model(const RoadNetwork& net, const std::vector<Trip>& trips, LocalMethod method,
                                  double speed_floor = kSpeedFloor) {
  const auto samples = map_speeds_to_arcs(net, trips, speed_floor);
  std::vector<std::optional<LocalEstimate>> canon(net.num_arcs());
  for (const Arc& a : net.arcs())
    if (net.canonical(a.id) == a.id && !samples[a.id].speeds.empty())
      canon[a.id] = fit_local(method, samples[a.id], a.length);
  impute_missing(net, canon, samples, method);
  LocalModel model;
  model.method = method;
  for (const Arc& a : net.arcs()) {
    LocalEstimate e = *canon[net.canonical(a.id)];
    e.arc = a.id;
    model.per_arc.push_back(std::move(e));
  }
  return model;
}

// ---------------------------------------------------------------------------
// Persistence: `arc_id,method,point_s,dist_kind,dist_param1,dist_param2` plus an
// `arc_id,time_s` sidecar for empirical distributions.

inline void write_local_model(const LocalModel& model, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream out(dir / "estimates.csv");
  out << "arc_id,method,point_s,dist_kind,dist_param1,dist_param2\n";
  std::ofstream side(dir / "estimates_empirical.csv");
  side << "arc_id,time_s\n";
  for (const auto& e : model.per_arc) {
    if (e.method == LocalMethod::harmonic) {
      csv::write_row(out, e.arc, "harmonic", e.point, "empirical", static_cast<double>(e.empirical.size()), 0.0);
      for (double t : e.empirical) csv::write_row(side, e.arc, t);
    } else {
      csv::write_row(out, e.arc, "mle", e.point, "lognormal", e.log_mean, e.log_var);
    }
  }
}

inline LocalModel read_local_model(const std::filesystem::path& dir) {
  LocalModel model;
  const std::string name = (dir / "estimates.csv").string();
  const auto rows = csv::read_file(name, {"arc_id", "method", "point_s", "dist_kind", "dist_param1", "dist_param2"});
  for (const auto& row : rows) {
    LocalEstimate e;
    e.arc = csv::parse_number<ArcId>(row, 0, name);
    if (row.fields[1] != "harmonic" && row.fields[1] != "mle") throw ParseError(name, row.line, "unknown method");
    e.method = row.fields[1] == "harmonic" ? LocalMethod::harmonic : LocalMethod::mle;
    e.point = csv::parse_number<double>(row, 2, name);
    e.log_mean = csv::parse_number<double>(row, 4, name);
    e.log_var = csv::parse_number<double>(row, 5, name);
    if (e.method == LocalMethod::harmonic) e.log_mean = e.log_var = 0.0;
    if (static_cast<std::size_t>(e.arc) != model.per_arc.size()) throw ParseError(name, row.line, "arc ids must be 0..J-1 in order");
    model.method = e.method;
    model.per_arc.push_back(std::move(e));
  }
  if (model.method == LocalMethod::harmonic) {
    const std::string sname = (dir / "estimates_empirical.csv").string();
    for (const auto& row : csv::read_file(sname, {"arc_id", "time_s"}))
      model.per_arc.at(csv::parse_number<std::size_t>(row, 0, sname)).empirical.push_back(csv::parse_number<double>(row, 1, sname));
  }
  return model;
}

}  // namespace traveltime
