#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <span>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "traveltime/csv.hpp"
#include "traveltime/data_io.hpp"
#include "traveltime/numeric.hpp"
#include "traveltime/random.hpp"
#include "traveltime/road_network.hpp"
#include "traveltime/travel_time_model.hpp"

namespace traveltime {

/// Nodes the initial path is routed through: the node nearest the middle reading, or nearest every reading in turn.
enum class InitAnchors { middle_reading, all_readings };

inline std::string_view to_string(InitAnchors a) {
  return a == InitAnchors::middle_reading ? "middle_reading" : "all_readings";
}

struct SamplerConfig {
  int iterations = 50000;  // total, burn-in included
  int burn_in = 25000;
  int thin = 10;
  int max_section_arcs = 6;  // K
  double eta2 = 0.5;         // initial sigma2 proposal variance (log scale)
  double nu2 = 0.05;         // initial zeta2 proposal variance (log scale)
  double target_accept = 0.23;
  int adapt_every = 100;
  std::uint64_t seed = 1;
  int n_chains = 2;
  bool record_paths = true;
  InitAnchors init_anchors = InitAnchors::all_readings;
  int time_moves_per_arc = 1;  // time-split moves per trip per sweep = this * path arcs (at least one)

  void validate() const {
    if (!(burn_in < iterations) || burn_in < 0) throw ValidationError("need 0 <= burn_in < iterations");
    if (thin < 1) throw ValidationError("thin must be >= 1");
    if (max_section_arcs < 1) throw ValidationError("K must be >= 1");
    if (!(eta2 > 0.0) || !(nu2 > 0.0)) throw ValidationError("proposal variances must be positive");
    if (n_chains < 1) throw ValidationError("n_chains must be >= 1");
    if (time_moves_per_arc < 0) throw ValidationError("time_moves_per_arc must be >= 0");
  }

  int num_draws() const { return (iterations - burn_in) / thin; }
};

struct TripState {
  Path path;
  std::vector<double> times;
};

/// Augmented state of one chain: a path and arc times per trip plus all parameters.
struct ChainState {
  std::vector<TripState> trips;
  std::vector<ArcParams> params;
  double zeta2 = 0.0;
};

struct MoveCounter {
  long long attempted = 0;
  long long accepted = 0;
  long long skipped = 0;

  double rate() const {
    const long long tried = attempted - skipped;
    return tried > 0 ? static_cast<double>(accepted) / static_cast<double>(tried) : 0.0;
  }
  MoveCounter& operator+=(const MoveCounter& o) {
    attempted += o.attempted;
    accepted += o.accepted;
    skipped += o.skipped;
    return *this;
  }
};

struct MoveCounters {
  MoveCounter path, times, mu, sigma2, zeta2;

  long long total_attempted() const {
    return path.attempted + times.attempted + mu.attempted + sigma2.attempted + zeta2.attempted;
  }
  MoveCounters& operator+=(const MoveCounters& o) {
    path += o.path;
    times += o.times;
    mu += o.mu;
    sigma2 += o.sigma2;
    zeta2 += o.zeta2;
    return *this;
  }
};

/**
 * Thinned post-burn-in draws. Draws from several chains are concatenated;
 * `chain_of_draw` records which chain produced each one.
 */
struct PosteriorSamples {
  std::vector<TripId> trip_ids;
  std::vector<std::vector<ArcParams>> params;  // draw x arc
  std::vector<double> zeta2;                   // per draw
  std::vector<std::vector<Path>> paths;        // draw x trip (empty when not recorded)
  std::vector<int> chain_of_draw;
  MoveCounters counters;         // post-burn-in
  std::vector<TripId> excluded;  // trips whose endpoints are disconnected

  std::size_t num_draws() const { return params.size(); }
  std::size_t num_arcs() const { return params.empty() ? 0 : params.front().size(); }

  /// Draws of one chain as a separate sample set.
  PosteriorSamples chain(int c) const {
    PosteriorSamples out;
    out.trip_ids = trip_ids;
    for (std::size_t d = 0; d < num_draws(); ++d) {
      if (chain_of_draw[d] != c) continue;
      out.params.push_back(params[d]);
      out.zeta2.push_back(zeta2[d]);
      if (!paths.empty()) out.paths.push_back(paths[d]);
      out.chain_of_draw.push_back(0);
    }
    return out;
  }

  int num_chains() const {
    return chain_of_draw.empty() ? 0 : *std::max_element(chain_of_draw.begin(), chain_of_draw.end()) + 1;
  }

  /// Posterior mean of exp(mu + sigma2/2) per arc.
  std::vector<double> posterior_mean_theta() const {
    std::vector<double> out(num_arcs(), 0.0);
    for (const auto& draw : params)
      for (std::size_t j = 0; j < draw.size(); ++j) out[j] += theta(draw[j]);
    for (double& v : out) v /= static_cast<double>(num_draws());
    return out;
  }
};

/// Sufficient statistics of the current log arc times, per arc.
struct ArcTimeStats {
  int n = 0;
  double sum_log = 0.0;
  double sum_log2 = 0.0;
};

/**
 * Reversible-jump data-augmentation sampler for one chain.
 *
 * Each iteration updates every trip's path (reversible jump over a bounded
 * update section) and arc-time split, then every mu_j (conjugate), every
 * sigma2_j (lognormal random walk), and zeta2 (lognormal random walk).
 * Proposal variances adapt during burn-in only.
 */
class RjmcmcSampler {
 public:
  RjmcmcSampler(const RoadNetwork& net, const std::vector<Trip>& trips, Hyperparams hyper, GpsNoise noise,
                SamplerConfig config, int chain_index = 0)
      : net_(net), hyper_(std::move(hyper)), noise_(noise), config_(config), chain_(chain_index),
        rng_(substream_seed(config.seed, 0xC4A1, static_cast<std::uint64_t>(chain_index))) {
    hyper_.validate(net.num_arcs());
    config_.validate();
    lengths_ = net.lengths();
    eta2_.assign(net.num_arcs(), config_.eta2);
    batch_sigma_.assign(net.num_arcs(), MoveCounter{});
    nu2_ = config_.nu2;
    init_state(trips);
  }

  const ChainState& state() const { return state_; }
  const std::vector<Trip>& trips() const { return trips_; }
  const std::vector<TripId>& excluded() const { return excluded_; }
  const MoveCounters& counters() const { return counters_; }
  const Hyperparams& hyper() const { return hyper_; }
  const SamplerConfig& config() const { return config_; }
  Rng& rng() { return rng_; }
  double eta2(ArcId j) const { return eta2_[static_cast<std::size_t>(j)]; }
  double nu2() const { return nu2_; }
  const std::vector<ArcTimeStats>& arc_stats() const { return arc_stats_; }

  /// Replace the state (tests and restarts). Derived caches are rebuilt.
  void set_state(ChainState s) {
    state_ = std::move(s);
    refresh_theta();
    rebuild_arc_stats();
  }

  /// Log complete-data density of trip i for a candidate path and times.
  double trip_logdensity(std::size_t i, const Path& path, std::span<const double> times) const {
    double prior = 0.0;
    for (ArcId a : path.arcs) prior += theta_[static_cast<std::size_t>(a)];
    return -hyper_.C * prior + times_loglik(path, times, state_.params) +
           gps_loglik_sum(net_, path, times, obs_[i], noise_, state_.zeta2);
  }

  /// All routes of <= K arcs from `from` to `to` whose interior avoids `forbidden`.
  std::vector<const Path*> admissible_routes(NodeId from, NodeId to, std::span<const char> forbidden) {
    const RouteSet& set = route_set(from, to);
    std::vector<const Path*> out;
    out.reserve(set.routes.size());
    for (std::size_t r = 0; r < set.routes.size(); ++r) {
      bool ok = true;
      for (NodeId v : set.interiors[r])
        if (forbidden[v]) {
          ok = false;
          break;
        }
      if (ok) out.push_back(&set.routes[r]);
    }
    return out;
  }

  /**
   * Log Metropolis-Hastings ratio of replacing arcs [start, start+section) of
   * trip i's path by `route` with arc times `route_times` (which must sum to
   * the replaced section's total time).
   */
  double path_move_log_ratio(std::size_t i, std::size_t start, std::size_t section, const Path& route,
                             std::span<const double> route_times) const {
    const TripState& cur = state_.trips[i];
    const std::size_t n_cur = cur.path.size();
    const std::size_t m = section;
    const std::size_t n = route.size();
    const auto K = static_cast<std::size_t>(config_.max_section_arcs);

    TripState prop;
    splice(cur, start, section, route, route_times, prop);

    double S = 0.0;
    for (std::size_t k = 0; k < m; ++k) S += cur.times[start + k];

    std::vector<double> frac_cur(m), conc_cur(m), frac_new(n), conc_new(n);
    for (std::size_t k = 0; k < m; ++k) {
      frac_cur[k] = cur.times[start + k] / S;
      conc_cur[k] = hyper_.alpha * theta_[static_cast<std::size_t>(cur.path.arcs[start + k])];
    }
    for (std::size_t k = 0; k < n; ++k) {
      frac_new[k] = route_times[k] / S;
      conc_new[k] = hyper_.alpha * theta_[static_cast<std::size_t>(route.arcs[k])];
    }

    const std::size_t a1 = n_cur - start;
    const std::size_t a2 = prop.path.size() - start;
    double log_ratio = trip_logdensity(i, prop.path, prop.times) - trip_logdensity(i, cur.path, cur.times);
    log_ratio += std::log(static_cast<double>(n_cur) * static_cast<double>(std::min(a1, K))) -
                 std::log(static_cast<double>(prop.path.size()) * static_cast<double>(std::min(a2, K)));
    log_ratio += dirichlet_logpdf(frac_cur, conc_cur) - dirichlet_logpdf(frac_new, conc_new);
    log_ratio += (static_cast<double>(n) - static_cast<double>(m)) * std::log(S);
    return log_ratio;
  }

  /// Reversible-jump update of trip i's path and times. Returns true on acceptance.
  bool step_path(std::size_t i) {
    ++counters_.path.attempted;
    TripState& cur = state_.trips[i];
    const std::size_t N = cur.path.size();
    const auto K = static_cast<std::size_t>(config_.max_section_arcs);
    const auto nodes = path_nodes(net_, cur.path);

    const std::size_t start = rng_.index(N);           // d' : any node but the last
    const std::size_t after = N - start;               // a(1): nodes following d'
    const std::size_t w = 1 + rng_.index(std::min(after, K));
    const NodeId d1 = nodes[start];
    const NodeId d2 = nodes[start + w];

    std::fill(forbidden_.begin(), forbidden_.end(), 0);
    for (std::size_t k = 0; k < nodes.size(); ++k)
      if (k < start || k > start + w) forbidden_[nodes[k]] = 1;
    const auto routes = admissible_routes(d1, d2, forbidden_);
    if (routes.empty()) {
      ++counters_.path.skipped;
      ++skips_[i];
      return false;
    }
    const Path& route = *routes[rng_.index(routes.size())];

    double S = 0.0;
    for (std::size_t k = 0; k < w; ++k) S += cur.times[start + k];
    std::vector<double> conc(route.size()), frac(route.size()), new_times(route.size());
    for (std::size_t k = 0; k < route.size(); ++k) conc[k] = hyper_.alpha * theta_[static_cast<std::size_t>(route.arcs[k])];
    rng_.dirichlet(conc, frac);
    double acc = 0.0;
    for (std::size_t k = 0; k + 1 < route.size(); ++k) {
      new_times[k] = frac[k] * S;
      acc += new_times[k];
    }
    new_times.back() = S - acc;
    for (double t : new_times)
      if (!(t > 0.0)) return false;

    const double log_ratio = path_move_log_ratio(i, start, w, route, new_times);
    if (accept(log_ratio)) {
      TripState prop;
      splice(cur, start, w, route, new_times, prop);
      cur = std::move(prop);
      ++counters_.path.accepted;
      return true;
    }
    return false;
  }

  /// Re-split the time of two distinct arcs of trip i's path. Skipped for one-arc paths.
  bool step_times(std::size_t i) {
    ++counters_.times.attempted;
    TripState& cur = state_.trips[i];
    const std::size_t N = cur.path.size();
    if (N < 2) {
      ++counters_.times.skipped;
      return false;
    }
    const std::size_t k1 = rng_.index(N);
    std::size_t k2 = rng_.index(N - 1);
    if (k2 >= k1) ++k2;
    const double S = cur.times[k1] + cur.times[k2];
    const double a1 = hyper_.alpha_prime * theta_[static_cast<std::size_t>(cur.path.arcs[k1])];
    const double a2 = hyper_.alpha_prime * theta_[static_cast<std::size_t>(cur.path.arcs[k2])];
    const double g1 = rng_.gamma(a1);
    const double g2 = rng_.gamma(a2);
    const double r1 = g1 / (g1 + g2);
    const double t1 = r1 * S;
    const double t2 = S - t1;
    if (!(t1 > 0.0) || !(t2 > 0.0)) return false;

    const double old1 = cur.times[k1], old2 = cur.times[k2];
    const ArcParams& p1 = state_.params[static_cast<std::size_t>(cur.path.arcs[k1])];
    const ArcParams& p2 = state_.params[static_cast<std::size_t>(cur.path.arcs[k2])];
    // Only the two re-split arcs and the GPS terms change; the path prior does not.
    const double before = lognormal_logpdf(old1, p1.mu, p1.sigma2) + lognormal_logpdf(old2, p2.mu, p2.sigma2) +
                          gps_loglik_sum(net_, cur.path, cur.times, obs_[i], noise_, state_.zeta2);
    cur.times[k1] = t1;
    cur.times[k2] = t2;
    const double after = lognormal_logpdf(t1, p1.mu, p1.sigma2) + lognormal_logpdf(t2, p2.mu, p2.sigma2) +
                         gps_loglik_sum(net_, cur.path, cur.times, obs_[i], noise_, state_.zeta2);
    const std::array<double, 2> conc{a1, a2};
    const std::array<double, 2> x_old{old1 / S, old2 / S};
    const std::array<double, 2> x_new{t1 / S, t2 / S};
    const double log_ratio = after - before + dirichlet_logpdf(x_old, conc) - dirichlet_logpdf(x_new, conc);
    if (accept(log_ratio)) {
      ++counters_.times.accepted;
      return true;
    }
    cur.times[k1] = old1;
    cur.times[k2] = old2;
    return false;
  }

  /// Closed-form conditional draw of mu_j given sigma2_j and the current arc times.
  void step_mu(ArcId j) {
    ++counters_.mu.attempted;
    ++counters_.mu.accepted;
    const auto ju = static_cast<std::size_t>(j);
    const auto [mean, var] = mu_conditional(j);
    state_.params[ju].mu = rng_.normal(mean, std::sqrt(var));
  }

  /// Mean and variance of the normal full conditional of mu_j.
  std::pair<double, double> mu_conditional(ArcId j) const {
    const auto ju = static_cast<std::size_t>(j);
    const ArcTimeStats& st = arc_stats_[ju];
    const double sigma2 = state_.params[ju].sigma2;
    const double var = 1.0 / (1.0 / hyper_.s2 + st.n / sigma2);
    const double mean = var * (hyper_.prior_mean[ju] / hyper_.s2 + st.sum_log / sigma2);
    return {mean, var};
  }

  /// Log acceptance ratio for moving sigma2_j to `proposal`.
  double sigma2_log_ratio(ArcId j, double proposal) const {
    const auto ju = static_cast<std::size_t>(j);
    const double current = state_.params[ju].sigma2;
    const double sd_new = std::sqrt(proposal);
    if (sd_new < hyper_.b1 || sd_new > hyper_.b2) return -INFINITY;
    const ArcTimeStats& st = arc_stats_[ju];
    const double mu = state_.params[ju].mu;
    const double ss = st.sum_log2 - 2.0 * mu * st.sum_log + st.n * mu * mu;
    const double lik = -0.5 * st.n * std::log(proposal / current) - 0.5 * ss * (1.0 / proposal - 1.0 / current);
    const double eta2 = eta2_[ju];
    const double q = lognormal_logpdf(current, std::log(proposal), eta2) - lognormal_logpdf(proposal, std::log(current), eta2);
    return std::log(std::sqrt(current) / sd_new) + lik + q;
  }

  bool step_sigma2(ArcId j) {
    ++counters_.sigma2.attempted;
    const auto ju = static_cast<std::size_t>(j);
    const double current = state_.params[ju].sigma2;
    const double proposal = current * std::exp(std::sqrt(eta2_[ju]) * rng_.normal());
    ++batch_sigma_[ju].attempted;
    if (accept(sigma2_log_ratio(j, proposal))) {
      state_.params[ju].sigma2 = proposal;
      ++counters_.sigma2.accepted;
      ++batch_sigma_[ju].accepted;
      return true;
    }
    return false;
  }

  /// Residual summary r = log V - log sp over all readings: (count, sum r, sum r^2).
  std::array<double, 3> speed_residuals() const {
    std::array<double, 3> out{0.0, 0.0, 0.0};
    for (std::size_t i = 0; i < trips_.size(); ++i) {
      if (obs_[i].empty()) continue;
      const TripState& ts = state_.trips[i];
      const Trajectory traj(net_, ts.path, ts.times);
      for (const auto& o : obs_[i]) {
        const double r = o.log_speed - std::log(traj.at(o.t).speed);
        out[0] += 1.0;
        out[1] += r;
        out[2] += r * r;
      }
    }
    return out;
  }

  /// Log likelihood of all GPS speed terms as a function of zeta2, from residual sums.
  static double speed_loglik(const std::array<double, 3>& res, double zeta2) {
    const auto [n, s1, s2] = res;
    const double ss = s2 + zeta2 * s1 + n * zeta2 * zeta2 / 4.0;
    return -0.5 * n * (kLog2Pi + std::log(zeta2)) - 0.5 * ss / zeta2;
  }

  double zeta2_log_ratio(const std::array<double, 3>& res, double proposal) const {
    const double current = state_.zeta2;
    const double z_new = std::sqrt(proposal);
    if (z_new < hyper_.b3 || z_new > hyper_.b4) return -INFINITY;
    const double q = lognormal_logpdf(current, std::log(proposal), nu2_) - lognormal_logpdf(proposal, std::log(current), nu2_);
    return std::log(std::sqrt(current) / z_new) + speed_loglik(res, proposal) - speed_loglik(res, current) + q;
  }

  bool step_zeta2() {
    ++counters_.zeta2.attempted;
    ++batch_zeta_.attempted;
    const double proposal = state_.zeta2 * std::exp(std::sqrt(nu2_) * rng_.normal());
    const auto res = speed_residuals();
    if (accept(zeta2_log_ratio(res, proposal))) {
      state_.zeta2 = proposal;
      ++counters_.zeta2.accepted;
      ++batch_zeta_.accepted;
      return true;
    }
    return false;
  }

  /// One full sweep over trips, arcs, and zeta2.
  void iterate() {
    for (std::size_t i = 0; i < trips_.size(); ++i) {
      step_path(i);
      const std::size_t moves = std::max<std::size_t>(1, static_cast<std::size_t>(config_.time_moves_per_arc) * state_.trips[i].path.size());
      for (std::size_t m = 0; m < moves; ++m) step_times(i);
    }
    rebuild_arc_stats();
    const auto J = static_cast<ArcId>(net_.num_arcs());
    for (ArcId j = 0; j < J; ++j) step_mu(j);
    for (ArcId j = 0; j < J; ++j) step_sigma2(j);
    step_zeta2();
    refresh_theta();
    ++iteration_;
    if (iteration_ <= config_.burn_in && iteration_ % config_.adapt_every == 0) adapt();
  }

  /// Runs the configured iterations and returns the thinned post-burn-in draws.
  PosteriorSamples run() {
    PosteriorSamples out;
    out.trip_ids = trip_ids(trips_);
    out.excluded = excluded_;
    MoveCounters at_burn_in;
    for (int it = 0; it < config_.iterations; ++it) {
      iterate();
      if (it + 1 == config_.burn_in) at_burn_in = counters_;
      if (it + 1 > config_.burn_in && (it + 1 - config_.burn_in) % config_.thin == 0) {
        out.params.push_back(state_.params);
        out.zeta2.push_back(state_.zeta2);
        if (config_.record_paths) {
          std::vector<Path> snap;
          snap.reserve(trips_.size());
          for (const auto& ts : state_.trips) snap.push_back(ts.path);
          out.paths.push_back(std::move(snap));
        }
        out.chain_of_draw.push_back(chain_);
      }
    }
    out.counters = counters_;
    out.counters.path.attempted -= at_burn_in.path.attempted;
    out.counters.path.accepted -= at_burn_in.path.accepted;
    out.counters.path.skipped -= at_burn_in.path.skipped;
    out.counters.times.attempted -= at_burn_in.times.attempted;
    out.counters.times.accepted -= at_burn_in.times.accepted;
    out.counters.times.skipped -= at_burn_in.times.skipped;
    out.counters.mu.attempted -= at_burn_in.mu.attempted;
    out.counters.mu.accepted -= at_burn_in.mu.accepted;
    out.counters.sigma2.attempted -= at_burn_in.sigma2.attempted;
    out.counters.sigma2.accepted -= at_burn_in.sigma2.accepted;
    out.counters.zeta2.attempted -= at_burn_in.zeta2.attempted;
    out.counters.zeta2.accepted -= at_burn_in.zeta2.accepted;
    return out;
  }

  /// Fraction of step_path calls per trip that found no candidate route.
  std::vector<double> path_skip_rates() const {
    std::vector<double> out(trips_.size());
    for (std::size_t i = 0; i < trips_.size(); ++i)
      out[i] = iteration_ > 0 ? static_cast<double>(skips_[i]) / static_cast<double>(iteration_) : 0.0;
    return out;
  }

  /// Asserts every trip's path and times are consistent and parameters are in support.
  bool state_is_valid() const {
    for (std::size_t i = 0; i < trips_.size(); ++i) {
      const TripState& ts = state_.trips[i];
      if (!is_valid_path(net_, ts.path, trips_[i].start_node, trips_[i].end_node)) return false;
      if (ts.times.size() != ts.path.size()) return false;
      double total = 0.0;
      for (double t : ts.times) {
        if (!(t > 0.0)) return false;
        total += t;
      }
      if (std::abs(total - trips_[i].duration()) > 1e-9 * std::max(1.0, trips_[i].duration())) return false;
    }
    return std::isfinite(log_prior_params(state_.params, state_.zeta2, hyper_));
  }

 private:
  struct RouteSet {
    std::vector<Path> routes;
    std::vector<std::vector<NodeId>> interiors;
  };

  const RouteSet& route_set(NodeId from, NodeId to) {
    const long long key = static_cast<long long>(from) * static_cast<long long>(net_.num_nodes()) + to;
    auto it = route_cache_.find(key);
    if (it != route_cache_.end()) return it->second;
    RouteSet set;
    set.routes = enumerate_local_routes(net_, from, to, config_.max_section_arcs);
    for (const Path& r : set.routes) {
      std::vector<NodeId> interior;
      for (std::size_t k = 0; k + 1 < r.size(); ++k) interior.push_back(net_.arc(r.arcs[k]).to);
      set.interiors.push_back(std::move(interior));
    }
    return route_cache_.emplace(key, std::move(set)).first->second;
  }

  static void splice(const TripState& cur, std::size_t start, std::size_t section, const Path& route,
                     std::span<const double> route_times, TripState& out) {
    out.path.arcs.assign(cur.path.arcs.begin(), cur.path.arcs.begin() + static_cast<std::ptrdiff_t>(start));
    out.times.assign(cur.times.begin(), cur.times.begin() + static_cast<std::ptrdiff_t>(start));
    out.path.arcs.insert(out.path.arcs.end(), route.arcs.begin(), route.arcs.end());
    out.times.insert(out.times.end(), route_times.begin(), route_times.end());
    out.path.arcs.insert(out.path.arcs.end(), cur.path.arcs.begin() + static_cast<std::ptrdiff_t>(start + section),
                         cur.path.arcs.end());
    out.times.insert(out.times.end(), cur.times.begin() + static_cast<std::ptrdiff_t>(start + section), cur.times.end());
  }

  bool accept(double log_ratio) {
    if (std::isnan(log_ratio)) return false;
    if (log_ratio >= 0.0) return true;
    return std::log(rng_.uniform()) < log_ratio;
  }

  void refresh_theta() { theta_ = theta_map(state_.params); }

  void rebuild_arc_stats() {
    arc_stats_.assign(net_.num_arcs(), ArcTimeStats{});
    for (const TripState& ts : state_.trips) {
      for (std::size_t k = 0; k < ts.path.size(); ++k) {
        ArcTimeStats& st = arc_stats_[static_cast<std::size_t>(ts.path.arcs[k])];
        const double l = std::log(ts.times[k]);
        ++st.n;
        st.sum_log += l;
        st.sum_log2 += l * l;
      }
    }
  }

  /// Multiplicative tuning toward the target acceptance rate, factor bounded to [0.5, 2].
  void adapt() {
    auto factor = [&](const MoveCounter& c) {
      if (c.attempted == 0) return 1.0;
      const double rate = static_cast<double>(c.accepted) / static_cast<double>(c.attempted);
      return std::clamp(rate / config_.target_accept, 0.5, 2.0);
    };
    for (std::size_t j = 0; j < eta2_.size(); ++j) {
      eta2_[j] = std::clamp(eta2_[j] * factor(batch_sigma_[j]), 1e-6, 25.0);
      batch_sigma_[j] = MoveCounter{};
    }
    nu2_ = std::clamp(nu2_ * factor(batch_zeta_), 1e-8, 25.0);
    batch_zeta_ = MoveCounter{};
  }

  /**
   * Initial paths route through the node nearest the middle reading using
   * shortest-distance legs; times split proportional to arc length;
   * parameters drawn from their priors.
   */
  void init_state(const std::vector<Trip>& trips) {
    const std::size_t J = net_.num_arcs();
    std::map<NodeId, std::vector<double>> to_target_cache;
    auto to_target = [&](NodeId t) -> const std::vector<double>& {
      auto it = to_target_cache.find(t);
      if (it == to_target_cache.end()) it = to_target_cache.emplace(t, time_to_target_map(net_, lengths_, t)).first;
      return it->second;
    };
    auto leg = [&](NodeId s, NodeId t) -> std::optional<Path> {
      if (s == t) return Path{};
      const auto& h = to_target(t);
      if (!std::isfinite(h[s])) return std::nullopt;
      return route_from_cost_map(net_, lengths_, h, s, t).path;
    };

    for (const Trip& trip : trips) {
      auto direct = leg(trip.start_node, trip.end_node);
      if (!direct || direct->empty()) {
        excluded_.push_back(trip.id);
        continue;
      }
      Path path = *direct;
      auto through = [&](const std::vector<NodeId>& vias) -> std::optional<Path> {
        Path joined;
        NodeId at = trip.start_node;
        for (NodeId v : vias) {
          if (v == at) continue;
          auto part = leg(at, v);
          if (!part) return std::nullopt;
          joined.arcs.insert(joined.arcs.end(), part->arcs.begin(), part->arcs.end());
          at = v;
        }
        auto last = leg(at, trip.end_node);
        if (!last) return std::nullopt;
        joined.arcs.insert(joined.arcs.end(), last->arcs.begin(), last->arcs.end());
        if (!is_valid_path(net_, joined, trip.start_node, trip.end_node)) return std::nullopt;
        return joined;
      };
      if (!trip.readings.empty()) {
        const GpsReading& mid = trip.readings[trip.readings.size() / 2];
        std::optional<Path> anchored;
        if (config_.init_anchors == InitAnchors::all_readings) {
          std::vector<NodeId> vias;
          for (const auto& r : trip.readings) vias.push_back(nearest_node(net_, r.x, r.y));
          anchored = through(vias);
        }
        if (!anchored) anchored = through({nearest_node(net_, mid.x, mid.y)});
        if (anchored) path = std::move(*anchored);
      }
      TripState ts;
      const double total_len = path_length(net_, path);
      ts.times.resize(path.size());
      double acc = 0.0;
      for (std::size_t k = 0; k + 1 < path.size(); ++k) {
        ts.times[k] = trip.duration() * net_.arc(path.arcs[k]).length / total_len;
        acc += ts.times[k];
      }
      ts.times.back() = trip.duration() - acc;
      ts.path = std::move(path);
      trips_.push_back(trip);
      obs_.push_back(prepare_observations(trip, hyper_.speed_floor));
      state_.trips.push_back(std::move(ts));
    }

    state_.params.resize(J);
    for (std::size_t j = 0; j < J; ++j) {
      state_.params[j].mu = rng_.normal(hyper_.prior_mean[j], std::sqrt(hyper_.s2));
      const double sd = rng_.uniform(hyper_.b1, hyper_.b2);
      state_.params[j].sigma2 = sd * sd;
    }
    const double z = rng_.uniform(hyper_.b3, hyper_.b4);
    state_.zeta2 = z * z;
    skips_.assign(trips_.size(), 0);
    forbidden_.assign(net_.num_nodes(), 0);
    refresh_theta();
    rebuild_arc_stats();
  }

  const RoadNetwork& net_;
  Hyperparams hyper_;
  GpsNoise noise_;
  SamplerConfig config_;
  int chain_;
  Rng rng_;

  std::vector<Trip> trips_;
  std::vector<std::vector<Observation>> obs_;
  std::vector<TripId> excluded_;
  ChainState state_;
  std::vector<double> lengths_;
  std::vector<double> theta_;
  std::vector<ArcTimeStats> arc_stats_;
  std::vector<double> eta2_;
  double nu2_ = 0.0;
  std::vector<MoveCounter> batch_sigma_;
  MoveCounter batch_zeta_;
  MoveCounters counters_;
  std::vector<long long> skips_;
  std::vector<char> forbidden_;
  std::unordered_map<long long, RouteSet> route_cache_;
  int iteration_ = 0;
};

/**
 * Runs `config.n_chains` independent chains (concurrently when `threads` > 1)
 * and concatenates their draws in chain order.
 */
inline PosteriorSamples run_chains(const RoadNetwork& net, const std::vector<Trip>& trips, const Hyperparams& hyper,
                                   const GpsNoise& noise, const SamplerConfig& config, int threads = 1) {
  std::vector<PosteriorSamples> per_chain(static_cast<std::size_t>(config.n_chains));
  auto work = [&](int c) {
    RjmcmcSampler sampler(net, trips, hyper, noise, config, c);
    per_chain[static_cast<std::size_t>(c)] = sampler.run();
  };
  if (threads <= 1 || config.n_chains == 1) {
    for (int c = 0; c < config.n_chains; ++c) work(c);
  } else {
    for (int first = 0; first < config.n_chains; first += threads) {
      std::vector<std::thread> pool;
      for (int c = first; c < std::min(config.n_chains, first + threads); ++c) pool.emplace_back(work, c);
      for (auto& t : pool) t.join();
    }
  }
  PosteriorSamples out = std::move(per_chain.front());
  for (std::size_t c = 1; c < per_chain.size(); ++c) {
    auto& p = per_chain[c];
    out.params.insert(out.params.end(), p.params.begin(), p.params.end());
    out.zeta2.insert(out.zeta2.end(), p.zeta2.begin(), p.zeta2.end());
    out.paths.insert(out.paths.end(), p.paths.begin(), p.paths.end());
    out.chain_of_draw.insert(out.chain_of_draw.end(), p.chain_of_draw.begin(), p.chain_of_draw.end());
    out.counters += p.counters;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Convergence

struct PsrfResult {
  double psrf = 1.0;
  bool zero_variance = false;
};

/// Potential scale reduction factor of equal-length chains of one scalar.
inline PsrfResult gelman_rubin(const std::vector<std::vector<double>>& chains) {
  if (chains.size() < 2) throw ValidationError("gelman_rubin needs at least two chains");
  const std::size_t n = chains.front().size();
  for (const auto& c : chains)
    if (c.size() != n) throw ValidationError("gelman_rubin needs equal-length chains");
  if (n < 2) throw ValidationError("gelman_rubin needs at least two draws per chain");
  const auto m = static_cast<double>(chains.size());
  const auto nd = static_cast<double>(n);
  std::vector<double> means;
  double W = 0.0;
  for (const auto& c : chains) {
    const double mu = mean(c);
    means.push_back(mu);
    double ss = 0.0;
    for (double x : c) ss += (x - mu) * (x - mu);
    W += ss / (nd - 1.0);
  }
  W /= m;
  const double grand = mean(means);
  double B = 0.0;
  for (double mu : means) B += (mu - grand) * (mu - grand);
  B *= nd / (m - 1.0);
  if (!(W > 0.0)) return {1.0, true};
  return {std::sqrt(((nd - 1.0) / nd * W + B / nd) / W), false};
}

/// PSRF of mu_j (or sigma2_j when `sigma2` is set) for every arc across the chains in `samples`.
inline std::vector<PsrfResult> psrf_per_arc(const PosteriorSamples& samples, bool sigma2 = false) {
  const int m = samples.num_chains();
  std::vector<PosteriorSamples> chains;
  std::size_t n = SIZE_MAX;
  for (int c = 0; c < m; ++c) {
    chains.push_back(samples.chain(c));
    n = std::min(n, chains.back().num_draws());
  }
  std::vector<PsrfResult> out;
  for (std::size_t j = 0; j < samples.num_arcs(); ++j) {
    std::vector<std::vector<double>> series(static_cast<std::size_t>(m));
    for (int c = 0; c < m; ++c)
      for (std::size_t d = 0; d < n; ++d) {
        const ArcParams& p = chains[static_cast<std::size_t>(c)].params[d][j];
        series[static_cast<std::size_t>(c)].push_back(sigma2 ? p.sigma2 : p.mu);
      }
    out.push_back(gelman_rubin(series));
  }
  return out;
}

inline PsrfResult psrf_zeta2(const PosteriorSamples& samples) {
  std::vector<std::vector<double>> series;
  std::size_t n = SIZE_MAX;
  for (int c = 0; c < samples.num_chains(); ++c) {
    series.push_back(samples.chain(c).zeta2);
    n = std::min(n, series.back().size());
  }
  for (auto& s : series) s.resize(n);
  return gelman_rubin(series);
}

// ---------------------------------------------------------------------------
// Persistence

inline void write_posterior(const PosteriorSamples& s, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream params(dir / "posterior_params.csv");
  params << "draw,arc_id,mu,sigma2\n";
  for (std::size_t d = 0; d < s.num_draws(); ++d)
    for (std::size_t j = 0; j < s.params[d].size(); ++j) csv::write_row(params, d, j, s.params[d][j].mu, s.params[d][j].sigma2);
  std::ofstream zeta(dir / "posterior_zeta2.csv");
  zeta << "draw,zeta2\n";
  for (std::size_t d = 0; d < s.num_draws(); ++d) csv::write_row(zeta, d, s.zeta2[d]);
  std::ofstream chains(dir / "posterior_chains.csv");
  chains << "draw,chain\n";
  for (std::size_t d = 0; d < s.num_draws(); ++d) csv::write_row(chains, d, s.chain_of_draw[d]);
  std::ofstream paths(dir / "posterior_paths.csv");
  paths << "draw,trip_id,arc_seq,arc_id\n";
  for (std::size_t d = 0; d < s.paths.size(); ++d)
    for (std::size_t i = 0; i < s.paths[d].size(); ++i)
      for (std::size_t k = 0; k < s.paths[d][i].size(); ++k) csv::write_row(paths, d, s.trip_ids[i], k, s.paths[d][i].arcs[k]);
}

inline PosteriorSamples read_posterior(const std::filesystem::path& dir) {
  PosteriorSamples s;
  const std::string pname = (dir / "posterior_params.csv").string();
  for (const auto& row : csv::read_file(pname, {"draw", "arc_id", "mu", "sigma2"})) {
    const auto d = csv::parse_number<std::size_t>(row, 0, pname);
    const auto j = csv::parse_number<std::size_t>(row, 1, pname);
    if (d >= s.params.size()) s.params.resize(d + 1);
    if (j >= s.params[d].size()) s.params[d].resize(j + 1);
    s.params[d][j] = {csv::parse_number<double>(row, 2, pname), csv::parse_number<double>(row, 3, pname)};
  }
  const std::string zname = (dir / "posterior_zeta2.csv").string();
  for (const auto& row : csv::read_file(zname, {"draw", "zeta2"})) s.zeta2.push_back(csv::parse_number<double>(row, 1, zname));
  const std::string cname = (dir / "posterior_chains.csv").string();
  if (std::filesystem::exists(cname)) {
    for (const auto& row : csv::read_file(cname, {"draw", "chain"})) s.chain_of_draw.push_back(csv::parse_number<int>(row, 1, cname));
  } else {
    s.chain_of_draw.assign(s.params.size(), 0);
  }
  const std::string tname = (dir / "posterior_paths.csv").string();
  if (std::filesystem::exists(tname)) {
    std::map<TripId, std::size_t> index;
    for (const auto& row : csv::read_file(tname, {"draw", "trip_id", "arc_seq", "arc_id"})) {
      const auto d = csv::parse_number<std::size_t>(row, 0, tname);
      const auto id = csv::parse_number<TripId>(row, 1, tname);
      auto [it, fresh] = index.emplace(id, index.size());
      if (fresh) s.trip_ids.push_back(id);
      if (d >= s.paths.size()) s.paths.resize(d + 1);
      auto& snap = s.paths[d];
      if (it->second >= snap.size()) snap.resize(it->second + 1);
      snap[it->second].arcs.push_back(csv::parse_number<ArcId>(row, 3, tname));
    }
  }
  if (s.zeta2.size() != s.params.size() || s.chain_of_draw.size() != s.params.size())
    throw ValidationError("posterior files in " + dir.string() + " disagree on the draw count");
  return s;
}

}  // namespace traveltime
