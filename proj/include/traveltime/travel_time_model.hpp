#pragma once

#include <algorithm>
#include <array>
#include <cassert>
#include <cmath>
#include <span>
#include <vector>

#include "traveltime/data_io.hpp"
#include "traveltime/numeric.hpp"
#include "traveltime/road_network.hpp"

namespace traveltime {

/// Lognormal travel-time parameters of one arc (log-seconds).
struct ArcParams {
  double mu = 0.0;
  double sigma2 = 0.0;
};

/// Expected travel time exp(mu + sigma2/2).
inline double theta(const ArcParams& p) { return std::exp(p.mu + 0.5 * p.sigma2); }

inline std::vector<double> theta_map(std::span<const ArcParams> params) {
  std::vector<double> out(params.size());
  for (std::size_t j = 0; j < params.size(); ++j) out[j] = theta(params[j]);
  return out;
}

inline constexpr double kMph = 0.44704;               // m/s per mile per hour
inline constexpr double kSpeedFloor = 5.0 * kMph;     // 2.2352 m/s

/// Bivariate normal location covariance (m^2) and lognormal speed variance.
class GpsNoise {
 public:
  GpsNoise() : GpsNoise(100.0, 0.0, 100.0, 0.004) {}
  GpsNoise(double sxx, double sxy, double syy, double zeta2) : sxx_(sxx), sxy_(sxy), syy_(syy), zeta2_(zeta2) {
    det_ = sxx_ * syy_ - sxy_ * sxy_;
    if (!(sxx_ > 0.0) || !(syy_ > 0.0) || !(det_ > 0.0))
      throw ValidationError("GPS location covariance must be symmetric positive definite");
    log_norm_ = -kLog2Pi - 0.5 * std::log(det_);
    if (!(zeta2_ > 0.0)) throw ValidationError("zeta2 must be positive");
  }
  static GpsNoise isotropic(double variance, double zeta2) { return GpsNoise(variance, 0.0, variance, zeta2); }

  double sxx() const { return sxx_; }
  double sxy() const { return sxy_; }
  double syy() const { return syy_; }
  double zeta2() const { return zeta2_; }
  double det() const { return det_; }

  /// Log N2(dx, dy; 0, Sigma).
  double location_logpdf(double dx, double dy) const {
    const double q = (syy_ * dx * dx - 2.0 * sxy_ * dx * dy + sxx_ * dy * dy) / det_;
    return log_norm_ - 0.5 * q;
  }

  /// Lower Cholesky factor (l11, l21, l22) for sampling.
  std::array<double, 3> cholesky() const {
    const double l11 = std::sqrt(sxx_);
    const double l21 = sxy_ / l11;
    return {l11, l21, std::sqrt(syy_ - l21 * l21)};
  }

 private:
  double sxx_, sxy_, syy_, zeta2_;
  double det_ = 0.0;
  double log_norm_ = 0.0;
};

/**
 * Prior hyperparameters and proposal concentrations.
 *
 * `prior_mean` holds m_j per arc. Bounds [b1, b2] and [b3, b4] are on the
 * standard deviations sigma_j and zeta, not on the variances.
 */
struct Hyperparams {
  std::vector<double> prior_mean;
  double s2 = 1.0;
  double b1 = 0.05, b2 = 1.5;
  double b3 = 0.01, b4 = 0.5;
  double C = 0.01;  // 1/seconds
  double alpha = 1.0;
  double alpha_prime = 0.5;
  double speed_floor = kSpeedFloor;

  void validate(std::size_t num_arcs) const {
    if (prior_mean.size() != num_arcs) throw ValidationError("prior_mean must have one entry per arc");
    if (!(b1 < b2) || !(b1 > 0.0)) throw ValidationError("need 0 < b1 < b2");
    if (!(b3 < b4) || !(b3 > 0.0)) throw ValidationError("need 0 < b3 < b4");
    if (!(s2 > 0.0) || !(C > 0.0) || !(alpha > 0.0) || !(alpha_prime > 0.0) || !(speed_floor > 0.0))
      throw ValidationError("s2, C, alpha, alpha_prime and speed_floor must be positive");
  }
};

/// Per-class prior speeds in m/s (primary, secondary, tertiary).
using ClassSpeeds = std::array<double, kNumRoadClasses>;
inline constexpr ClassSpeeds kDefaultPriorSpeeds{15.6, 11.2, 6.7};

/// m_j = log(L_j / v_class(j)).
inline std::vector<double> prior_means_from_speeds(const RoadNetwork& net, const ClassSpeeds& speeds) {
  std::vector<double> out(net.num_arcs());
  for (const Arc& a : net.arcs()) out[a.id] = std::log(a.length / speeds[static_cast<int>(a.road_class)]);
  return out;
}

inline Hyperparams default_hyperparams(const RoadNetwork& net, const ClassSpeeds& speeds = kDefaultPriorSpeeds) {
  Hyperparams h;
  h.prior_mean = prior_means_from_speeds(net, speeds);
  return h;
}

// ---------------------------------------------------------------------------
// Path prior

/// Unnormalized log path prior: -C * sum of expected arc times.
inline double path_log_prior_unnorm(const Path& path, std::span<const double> thetas, double C) {
  return -C * path_cost(path, thetas);
}

// ---------------------------------------------------------------------------
// Trajectory

struct Kinematics {
  double x = 0.0;
  double y = 0.0;
  double speed = 0.0;
};

/**
 * Piecewise-constant-speed position along a path. Arc k owns the half-open
 * interval [start_k, start_k + T_k); the trip end belongs to the last arc.
 */
class Trajectory {
 public:
  Trajectory(const RoadNetwork& net, const Path& path, std::span<const double> times)
      : net_(&net), path_(&path), times_(times) {
    assert(path.size() == times.size() && !path.empty());
    starts_.resize(times.size());
    double acc = 0.0;
    for (std::size_t k = 0; k < times.size(); ++k) {
      starts_[k] = acc;
      acc += times[k];
    }
    total_ = acc;
  }

  double total() const { return total_; }

  std::size_t arc_index_at(double t) const {
    const auto it = std::upper_bound(starts_.begin(), starts_.end(), t);
    return static_cast<std::size_t>(it - starts_.begin()) - 1;
  }

  Kinematics at(double t) const {
    if (!(t >= 0.0) || t > total_ * (1.0 + 1e-12) + 1e-12)
      throw ValidationError("trajectory query time " + std::to_string(t) + " outside [0, " + std::to_string(total_) + "]");
    const std::size_t k = arc_index_at(t);
    const Arc& arc = net_->arc(path_->arcs[k]);
    const Node& u = net_->node(arc.from);
    const Node& v = net_->node(arc.to);
    const double frac = std::clamp((t - starts_[k]) / times_[k], 0.0, 1.0);
    return {u.x + frac * (v.x - u.x), u.y + frac * (v.y - u.y), arc.length / times_[k]};
  }

 private:
  const RoadNetwork* net_;
  const Path* path_;
  std::span<const double> times_;
  std::vector<double> starts_;
  double total_ = 0.0;
};

inline Kinematics trajectory_at(const RoadNetwork& net, const Path& path, std::span<const double> times, double t_query) {
  return Trajectory(net, path, times).at(t_query);
}

// ---------------------------------------------------------------------------
// GPS likelihood

/// A GPS reading prepared for repeated likelihood evaluation: trip-relative time, clamped log speed.
struct Observation {
  double t = 0.0;
  double x = 0.0;
  double y = 0.0;
  double log_speed = 0.0;
};

inline std::vector<Observation> prepare_observations(const Trip& trip, double speed_floor = kSpeedFloor) {
  std::vector<Observation> out;
  out.reserve(trip.readings.size());
  for (const auto& r : trip.readings)
    out.push_back({r.t - trip.t_start, r.x, r.y, std::log(std::max(r.speed, speed_floor))});
  return out;
}

/// Density of the measured log speed, log V ~ N(log sp - zeta2/2, zeta2). The 1/V
/// Jacobian is omitted: it depends on data only and cancels in every ratio.
inline double speed_logpdf(double log_measured, double predicted_speed, double zeta2) {
  return normal_logpdf(log_measured, std::log(predicted_speed) - 0.5 * zeta2, zeta2);
}

/// Log likelihood of one reading given the true position and speed at its timestamp.
inline double gps_loglik(const GpsReading& reading, const Kinematics& predicted, const GpsNoise& noise,
                         double speed_floor = kSpeedFloor) {
  if (!(predicted.speed > 0.0)) throw ValidationError("predicted speed must be positive");
  const double v = std::max(reading.speed, speed_floor);
  return noise.location_logpdf(reading.x - predicted.x, reading.y - predicted.y) +
         speed_logpdf(std::log(v), predicted.speed, noise.zeta2());
}

/// Sum of GPS log likelihoods for a trip's prepared observations; zeta2 overrides the noise's value.
inline double gps_loglik_sum_unsorted(const RoadNetwork& net, const Path& path, std::span<const double> times,
                                      std::span<const Observation> obs, const GpsNoise& noise, double zeta2) {
  const Trajectory traj(net, path, times);
  double out = 0.0;
  for (const auto& o : obs) {
    const Kinematics k = traj.at(o.t);
    out += noise.location_logpdf(o.x - k.x, o.y - k.y) + speed_logpdf(o.log_speed, k.speed, zeta2);
  }
  return out;
}

/// Sum of gps_loglik over readings sorted by time; a single walk along the path (same arc rule as Trajectory).
inline double gps_loglik_sum(const RoadNetwork& net, const Path& path, std::span<const double> times,
                             std::span<const Observation> obs, const GpsNoise& noise, double zeta2) {
  if (obs.empty()) return 0.0;
  assert(path.size() == times.size() && !path.empty());
  double total = 0.0;
  for (double t : times) total += t;
  std::size_t k = 0;
  double start = 0.0;
  double out = 0.0;
  const double speed_norm = -0.5 * (kLog2Pi + std::log(zeta2));
  for (const auto& o : obs) {
    if (!(o.t >= 0.0) || o.t > total * (1.0 + 1e-12) + 1e-12)
      throw ValidationError("trajectory query time " + std::to_string(o.t) + " outside [0, " + std::to_string(total) + "]");
    if (o.t < start) return gps_loglik_sum_unsorted(net, path, times, obs, noise, zeta2);
    while (k + 1 < times.size() && start + times[k] <= o.t) start += times[k++];
    const Arc& arc = net.arc(path.arcs[k]);
    const Node& u = net.node(arc.from);
    const Node& v = net.node(arc.to);
    const double frac = std::clamp((o.t - start) / times[k], 0.0, 1.0);
    const double x = u.x + frac * (v.x - u.x), y = u.y + frac * (v.y - u.y);
    const double r = o.log_speed - std::log(arc.length / times[k]) + 0.5 * zeta2;
    out += noise.location_logpdf(o.x - x, o.y - y) + speed_norm - 0.5 * r * r / zeta2;
  }
  return out;
}

inline double times_loglik(const Path& path, std::span<const double> times, std::span<const ArcParams> params) {
  double out = 0.0;
  for (std::size_t k = 0; k < path.size(); ++k) {
    const ArcParams& p = params[static_cast<std::size_t>(path.arcs[k])];
    out += lognormal_logpdf(times[k], p.mu, p.sigma2);
  }
  return out;
}

/**
 * Complete-data log density of one trip: unnormalized path prior, lognormal
 * arc times, and GPS readings. Times must sum to the trip's duration.
 */
inline double trip_loglik(const RoadNetwork& net, const Trip& trip, const Path& path, std::span<const double> times,
                          std::span<const ArcParams> params, double zeta2, const GpsNoise& noise,
                          const Hyperparams& hyper) {
  assert(path.size() == times.size());
  double prior = 0.0;
  for (ArcId a : path.arcs) prior += theta(params[static_cast<std::size_t>(a)]);
  const auto obs = prepare_observations(trip, hyper.speed_floor);
  return -hyper.C * prior + times_loglik(path, times, params) + gps_loglik_sum(net, path, times, obs, noise, zeta2);
}

/**
 * Log prior of the parameters up to constants: normal on each mu_j, uniform on
 * each sigma_j in [b1, b2] and on zeta in [b3, b4]. Out of support gives -inf.
 */
inline double log_prior_params(std::span<const ArcParams> params, double zeta2, const Hyperparams& hyper) {
  double out = 0.0;
  for (std::size_t j = 0; j < params.size(); ++j) {
    const double sd = std::sqrt(params[j].sigma2);
    if (sd < hyper.b1 || sd > hyper.b2) return -INFINITY;
    out += normal_logpdf(params[j].mu, hyper.prior_mean[j], hyper.s2);
  }
  const double z = std::sqrt(zeta2);
  if (z < hyper.b3 || z > hyper.b4) return -INFINITY;
  return out;
}

}  // namespace traveltime
