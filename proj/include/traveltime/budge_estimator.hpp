#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <span>
#include <string>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "traveltime/csv.hpp"
#include "traveltime/data_io.hpp"
#include "traveltime/road_network.hpp"

namespace traveltime {

/// Location-scale t distribution on log seconds.
struct TFit {
  double location = 0.0;
  double scale = 1.0;
  double dof = 5.0;
};

struct DistanceBin {
  double center = 0.0;  // median trip distance, meters
  TFit fit;
  int count = 0;
};

/// Trip-distance bins, each with a t fit to its log travel times.
struct BinModel {
  std::vector<double> edges;  // size bins + 1, strictly increasing
  std::vector<DistanceBin> bins;
};

struct BudgeOptions {
  int n_bins = 10;
  int min_per_bin = 30;
  double dof_min = 2.5;
  double dof_max = 100.0;
  double scale_floor = 1e-6;
};

inline double t_loglik(std::span<const double> y, const TFit& f) {
  const double nu = f.dof;
  const double c = std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) - 0.5 * std::log(nu * M_PI) - std::log(f.scale);
  double out = 0.0;
  for (double v : y) {
    const double z = (v - f.location) / f.scale;
    out += c - 0.5 * (nu + 1.0) * std::log1p(z * z / nu);
  }
  return out;
}

/// Location and scale MLE for fixed dof by EM (iteratively reweighted moments).
inline TFit fit_t_fixed_dof(std::span<const double> y, double dof, double scale_floor) {
  TFit f;
  f.dof = dof;
  std::vector<double> sorted(y.begin(), y.end());
  std::sort(sorted.begin(), sorted.end());
  f.location = sorted[sorted.size() / 2];
  double var = 0.0;
  for (double v : y) var += (v - f.location) * (v - f.location);
  f.scale = std::max(std::sqrt(var / static_cast<double>(y.size())), scale_floor);
  for (int it = 0; it < 500; ++it) {
    double sw = 0.0, swy = 0.0;
    std::vector<double> w(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
      const double z = (y[i] - f.location) / f.scale;
      w[i] = (dof + 1.0) / (dof + z * z);
      sw += w[i];
      swy += w[i] * y[i];
    }
    const double loc = swy / sw;
    double ss = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) ss += w[i] * (y[i] - loc) * (y[i] - loc);
    const double scale = std::max(std::sqrt(ss / static_cast<double>(y.size())), scale_floor);
    const bool done = std::abs(loc - f.location) < 1e-12 && std::abs(scale - f.scale) < 1e-12 * scale;
    f.location = loc;
    f.scale = scale;
    if (done || scale == scale_floor) break;
  }
  return f;
}

/**
 * Maximum-likelihood location-scale t fit with dof profiled over a log-spaced
 * grid in [dof_min, dof_max], then refined by golden-section search around
 * the best grid point.
 */
inline TFit fit_t(std::span<const double> y, const BudgeOptions& opt = {}) {
  if (y.empty()) throw ValidationError("fit_t on an empty sample");
  constexpr int kGrid = 24;
  auto dof_at = [&](double u) { return std::exp(std::log(opt.dof_min) + u * (std::log(opt.dof_max) - std::log(opt.dof_min))); };
  auto profile = [&](double u) {
    const TFit f = fit_t_fixed_dof(y, dof_at(u), opt.scale_floor);
    return std::pair{t_loglik(y, f), f};
  };
  int best_k = 0;
  double best_ll = -INFINITY;
  TFit best;
  for (int k = 0; k < kGrid; ++k) {
    auto [ll, f] = profile(static_cast<double>(k) / (kGrid - 1));
    if (ll > best_ll) {
      best_ll = ll;
      best = f;
      best_k = k;
    }
  }
  if (best.scale <= opt.scale_floor) return best;
  double lo = static_cast<double>(std::max(best_k - 1, 0)) / (kGrid - 1);
  double hi = static_cast<double>(std::min(best_k + 1, kGrid - 1)) / (kGrid - 1);
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = hi - g * (hi - lo), b = lo + g * (hi - lo);
  auto [fa, ta] = profile(a);
  auto [fb, tb] = profile(b);
  for (int it = 0; it < 40; ++it) {
    if (fa > fb) {
      hi = b;
      b = a;
      fb = fa;
      tb = ta;
      a = hi - g * (hi - lo);
      std::tie(fa, ta) = profile(a);
    } else {
      lo = a;
      a = b;
      fa = fb;
      ta = tb;
      b = lo + g * (hi - lo);
      std::tie(fb, tb) = profile(b);
    }
  }
  if (fa > best_ll) best = ta, best_ll = fa;
  if (fb > best_ll) best = tb;
  return best;
}

inline double t_quantile(const TFit& f, double q) {
  boost::math::students_t dist(f.dof);
  return f.location + f.scale * boost::math::quantile(dist, q);
}

/**
 * Bins trips by distance and fits each bin. Cut points between bins fall at
 * equal-count positions, moved to the nearest change of distance so tied
 * distances share a bin; bins below `min_per_bin` are merged into a
 * neighbour. Warnings go to `log`.
 */
inline BinModel fit_budge_bins_from_distances(std::vector<std::pair<double, double>> dist_time, const BudgeOptions& opt = {},
                                              std::ostream* log = nullptr) {
  if (dist_time.size() < static_cast<std::size_t>(opt.min_per_bin))
    throw ValidationError("budge: need at least " + std::to_string(opt.min_per_bin) + " trips, got " +
                          std::to_string(dist_time.size()));
  std::sort(dist_time.begin(), dist_time.end());
  const std::size_t n = dist_time.size();
  int n_bins = opt.n_bins;
  if (static_cast<std::size_t>(n_bins * opt.min_per_bin) > n) {
    n_bins = static_cast<int>(n / static_cast<std::size_t>(opt.min_per_bin));
    if (log) *log << "warning: budge: reducing bin count from " << opt.n_bins << " to " << n_bins << " (" << n << " trips)\n";
  }

  std::vector<std::size_t> cuts{0};
  for (int b = 1; b < n_bins; ++b) {
    const std::size_t target = n * static_cast<std::size_t>(b) / static_cast<std::size_t>(n_bins);
    std::size_t down = target, up = target;
    while (down > 0 && dist_time[down - 1].first == dist_time[down].first) --down;
    while (up < n && up > 0 && dist_time[up - 1].first == dist_time[up].first) ++up;
    const std::size_t cut = (target - down <= up - target && down > 0) ? down : up;
    if (cut > cuts.back() && cut < n) cuts.push_back(cut);
  }
  cuts.push_back(n);
  // Merge underpopulated bins into the neighbour with fewer trips.
  bool merged = true;
  while (merged && cuts.size() > 2) {
    merged = false;
    for (std::size_t b = 0; b + 1 < cuts.size(); ++b) {
      if (cuts[b + 1] - cuts[b] >= static_cast<std::size_t>(opt.min_per_bin)) continue;
      const bool has_left = b > 0, has_right = b + 2 < cuts.size();
      const std::size_t left = has_left ? cuts[b] - cuts[b - 1] : SIZE_MAX;
      const std::size_t right = has_right ? cuts[b + 2] - cuts[b + 1] : SIZE_MAX;
      cuts.erase(cuts.begin() + static_cast<std::ptrdiff_t>(left <= right ? b : b + 1));
      merged = true;
      break;
    }
  }
  if (log && static_cast<int>(cuts.size()) - 1 < n_bins)
    *log << "warning: budge: using " << cuts.size() - 1 << " bins after resolving ties\n";

  BinModel model;
  model.edges.push_back(dist_time.front().first);
  for (std::size_t b = 0; b + 1 < cuts.size(); ++b) {
    std::vector<double> d, y;
    for (std::size_t i = cuts[b]; i < cuts[b + 1]; ++i) {
      d.push_back(dist_time[i].first);
      y.push_back(std::log(dist_time[i].second));
    }
    DistanceBin bin;
    bin.count = static_cast<int>(d.size());
    bin.center = d.size() % 2 ? d[d.size() / 2] : 0.5 * (d[d.size() / 2 - 1] + d[d.size() / 2]);
    bin.fit = fit_t(y, opt);
    model.bins.push_back(bin);
    if (b + 2 < cuts.size())
      model.edges.push_back(0.5 * (dist_time[cuts[b + 1] - 1].first + dist_time[cuts[b + 1]].first));
  }
  model.edges.push_back(dist_time.back().first);
  if (model.edges.back() <= model.edges[model.edges.size() - 2]) model.edges.back() = model.edges[model.edges.size() - 2] + 1e-9;
  return model;
}

/// Shortest-distance path length between a trip's endpoints.
inline double trip_distance(const RoadNetwork& net, const Trip& trip, std::span<const double> lengths) {
  auto route = shortest_path(net, lengths, trip.start_node, trip.end_node);
  if (!route) throw UnreachableError("trip " + std::to_string(trip.id) + " endpoints are disconnected");
  return route->cost;
}

inline BinModel fit_budge_bins(const RoadNetwork& net, const std::vector<Trip>& trips, const BudgeOptions& opt = {},
                               std::ostream* log = nullptr) {
  const auto lengths = net.lengths();
  std::vector<std::pair<double, double>> dist_time;
  dist_time.reserve(trips.size());
  for (const Trip& t : trips) dist_time.emplace_back(trip_distance(net, t, lengths), t.duration());
  return fit_budge_bins_from_distances(std::move(dist_time), opt, log);
}

/// q-quantile of travel time (seconds) at a distance, interpolated linearly between bin centers.
inline double budge_quantile(const BinModel& model, double distance, double q) {
  const auto& bins = model.bins;
  auto bin_q = [&](std::size_t b) { return std::exp(t_quantile(bins[b].fit, q)); };
  if (distance <= bins.front().center) return bin_q(0);
  if (distance >= bins.back().center) return bin_q(bins.size() - 1);
  std::size_t b = 0;
  while (bins[b + 1].center < distance) ++b;
  const double w = (distance - bins[b].center) / (bins[b + 1].center - bins[b].center);
  return (1.0 - w) * bin_q(b) + w * bin_q(b + 1);
}

inline double budge_point(const BinModel& model, double distance) { return budge_quantile(model, distance, 0.5); }

/// P(time <= threshold) at a distance, by inverting the interpolated quantile function.
inline double budge_cdf(const BinModel& model, double distance, double threshold) {
  double lo = 1e-12, hi = 1.0 - 1e-12;
  if (budge_quantile(model, distance, lo) > threshold) return 0.0;
  if (budge_quantile(model, distance, hi) <= threshold) return 1.0;
  for (int it = 0; it < 100; ++it) {
    const double mid = 0.5 * (lo + hi);
    (budge_quantile(model, distance, mid) <= threshold ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

inline void write_bin_model(const BinModel& model, const std::filesystem::path& file) {
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
  std::ofstream out(file);
  out << "bin,center_m,location,scale,dof,count\n";
  for (std::size_t b = 0; b < model.bins.size(); ++b) {
    const auto& bin = model.bins[b];
    csv::write_row(out, b, bin.center, bin.fit.location, bin.fit.scale, bin.fit.dof, bin.count);
  }
  std::ofstream edges(file.parent_path() / "budge_edges.csv");
  edges << "edge,distance_m\n";
  for (std::size_t e = 0; e < model.edges.size(); ++e) csv::write_row(edges, e, model.edges[e]);
}

inline BinModel read_bin_model(const std::filesystem::path& file) {
  BinModel model;
  const std::string name = file.string();
  for (const auto& row : csv::read_file(name, {"bin", "center_m", "location", "scale", "dof", "count"})) {
    DistanceBin bin;
    bin.center = csv::parse_number<double>(row, 1, name);
    bin.fit = {csv::parse_number<double>(row, 2, name), csv::parse_number<double>(row, 3, name),
               csv::parse_number<double>(row, 4, name)};
    bin.count = csv::parse_number<int>(row, 5, name);
    model.bins.push_back(bin);
  }
  if (model.bins.empty()) throw ParseError(name, 0, "no bins");
  const auto edges_file = file.parent_path() / "budge_edges.csv";
  if (std::filesystem::exists(edges_file)) {
    const std::string en = edges_file.string();
    for (const auto& row : csv::read_file(en, {"edge", "distance_m"})) model.edges.push_back(csv::parse_number<double>(row, 1, en));
  }
  return model;
}

}  // namespace traveltime
