#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <functional>
#include <iomanip>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "traveltime/budge_estimator.hpp"
#include "traveltime/csv.hpp"
#include "traveltime/data_io.hpp"
#include "traveltime/local_estimators.hpp"
#include "traveltime/numeric.hpp"
#include "traveltime/random.hpp"
#include "traveltime/rjmcmc.hpp"
#include "traveltime/road_network.hpp"
#include "traveltime/travel_time_model.hpp"

namespace traveltime {

/// Calls body(i) once for every i in [0, n) on up to `threads` workers; rethrows the first failure.
inline void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& body) {
  const auto workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex mutex;
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(mutex);
        if (!error) error = std::current_exception();
        next = n;
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  if (error) std::rethrow_exception(error);
}

inline constexpr int kDefaultIntervalDraws = 5000;
inline constexpr int kDefaultCoverageDraws = 2000;

/// Route chosen for a query and its point travel time.
struct PointEstimate {
  Path path;
  double seconds = 0.0;
  double distance = 0.0;  // meters along `path`
};

struct CoverageEntry {
  NodeId node = 0;
  double probability = 0.0;
  bool reachable = true;
};

/**
 * A fitted travel-time method. Path-based methods route on their own
 * per-arc point times; Budge routes on distance and predicts from distance
 * alone.
 */
class Predictor {
 public:
  virtual ~Predictor() = default;

  virtual std::string name() const = 0;
  virtual bool has_intervals() const { return true; }
  /// Whether predictions can follow a known path rather than a routed one.
  virtual bool uses_paths() const { return true; }

  /// Fastest expected route between two nodes; throws UnreachableError.
  virtual PointEstimate point(NodeId s, NodeId t) const = 0;
  /// Point estimate along a given path.
  virtual PointEstimate point_on(const Path& path) const = 0;
  /// Central `level` predictive interval for a point estimate.
  virtual std::pair<double, double> interval(const PointEstimate& p, int n_draws, double level, Rng& rng) const = 0;
  /// P(trip time <= threshold) from `start` to every node.
  virtual std::vector<CoverageEntry> coverage_map(NodeId start, double threshold, int n_draws,
                                                  std::uint64_t seed) const = 0;
};

/// Base for methods that give each arc an independent travel-time distribution.
class PathPredictor : public Predictor {
 public:
  PathPredictor(const RoadNetwork& net, std::vector<double> weights) : net_(&net), weights_(std::move(weights)) {
    if (weights_.size() != net.num_arcs()) throw ValidationError("one point time per arc required");
  }

  const std::vector<double>& weights() const { return weights_; }

  PointEstimate point(NodeId s, NodeId t) const override {
    if (!net_->has_node(s) || !net_->has_node(t)) throw ValidationError("query node not in network");
    if (s == t) return {};
    auto route = shortest_path(*net_, weights_, s, t);
    if (!route) throw UnreachableError("node " + std::to_string(t) + " unreachable from node " + std::to_string(s));
    return point_on(route->path);
  }

  PointEstimate point_on(const Path& path) const override {
    PointEstimate p;
    p.path = path;
    p.seconds = path_cost(path, weights_);
    p.distance = path_length(*net_, path);
    return p;
  }

  std::pair<double, double> interval(const PointEstimate& p, int n_draws, double level, Rng& rng) const override {
    if (n_draws < 1) throw ValidationError("n_draws must be positive");
    std::vector<double> totals(static_cast<std::size_t>(n_draws));
    for (int k = 0; k < n_draws; ++k) {
      double total = 0.0;
      for (ArcId a : p.path.arcs) total += sample_arc(a, static_cast<std::size_t>(k), rng);
      totals[static_cast<std::size_t>(k)] = total;
    }
    const double tail = 0.5 * (1.0 - level);
    const double lo = quantile_inplace(totals, tail);
    const double hi = quantile_inplace(totals, 1.0 - tail);
    return {lo, hi};
  }

  /// Simulates arrival times over the fastest-expected-path tree, so each draw is shared by every node.
  std::vector<CoverageEntry> coverage_map(NodeId start, double threshold, int n_draws,
                                          std::uint64_t seed) const override {
    if (!net_->has_node(start)) throw ValidationError("start node not in network");
    if (n_draws < 1) throw ValidationError("n_draws must be positive");
    const PathTree tree = shortest_path_tree(*net_, weights_, start);
    std::vector<NodeId> order;
    for (std::size_t v = 0; v < net_->num_nodes(); ++v)
      if (static_cast<NodeId>(v) != start && tree.reachable(static_cast<NodeId>(v))) order.push_back(static_cast<NodeId>(v));
    std::stable_sort(order.begin(), order.end(), [&](NodeId a, NodeId b) { return tree.cost[a] < tree.cost[b]; });

    Rng rng(substream_seed(seed, 0xC0F, static_cast<std::uint64_t>(start)));
    std::vector<double> arrival(net_->num_nodes(), 0.0);
    std::vector<long> hits(net_->num_nodes(), 0);
    for (int k = 0; k < n_draws; ++k) {
      for (NodeId v : order) {
        const ArcId a = tree.parent_arc[v];
        arrival[v] = arrival[net_->arc(a).from] + sample_arc(a, static_cast<std::size_t>(k), rng);
        if (arrival[v] <= threshold) ++hits[v];
      }
    }
    std::vector<CoverageEntry> out(net_->num_nodes());
    for (std::size_t v = 0; v < out.size(); ++v) {
      out[v].node = static_cast<NodeId>(v);
      out[v].reachable = tree.reachable(static_cast<NodeId>(v));
      out[v].probability = static_cast<NodeId>(v) == start ? 1.0 : static_cast<double>(hits[v]) / n_draws;
    }
    return out;
  }

 protected:
  /// One travel-time draw for arc `a` on Monte Carlo replicate `draw`.
  virtual double sample_arc(ArcId a, std::size_t draw, Rng& rng) const = 0;

  const RoadNetwork* net_;
  std::vector<double> weights_;
};

/// Posterior predictive: replicate k uses stored draw k mod D.
class BayesPredictor final : public PathPredictor {
 public:
  BayesPredictor(const RoadNetwork& net, const PosteriorSamples& samples)
      : PathPredictor(net, checked_theta(net, samples)), samples_(&samples) {}

  std::string name() const override { return "bayes"; }

 protected:
  double sample_arc(ArcId a, std::size_t draw, Rng& rng) const override {
    const ArcParams& p = samples_->params[draw % samples_->num_draws()][static_cast<std::size_t>(a)];
    return rng.lognormal(p.mu, p.sigma2);
  }

 private:
  static std::vector<double> checked_theta(const RoadNetwork& net, const PosteriorSamples& s) {
    if (s.num_draws() == 0) throw ValidationError("posterior has no draws");
    if (s.num_arcs() != net.num_arcs()) throw ValidationError("posterior arc count does not match network");
    return s.posterior_mean_theta();
  }

  const PosteriorSamples* samples_;
};

/// Local harmonic resamples each arc's empirical times; local MLE draws from its fitted lognormal.
class LocalPredictor final : public PathPredictor {
 public:
  LocalPredictor(const RoadNetwork& net, const LocalModel& model)
      : PathPredictor(net, checked_points(net, model)), model_(&model) {}

  std::string name() const override { return std::string(to_string(model_->method)); }

 protected:
  double sample_arc(ArcId a, std::size_t, Rng& rng) const override {
    const LocalEstimate& e = model_->per_arc[static_cast<std::size_t>(a)];
    if (e.method == LocalMethod::harmonic) return e.empirical[rng.index(e.empirical.size())];
    return rng.lognormal(e.log_mean, e.log_var);
  }

 private:
  static std::vector<double> checked_points(const RoadNetwork& net, const LocalModel& m) {
    if (m.per_arc.size() != net.num_arcs()) throw ValidationError("local model arc count does not match network");
    for (const auto& e : m.per_arc)
      if (e.method == LocalMethod::harmonic && e.empirical.empty())
        throw ValidationError("arc " + std::to_string(e.arc) + " has no empirical times");
    return m.point_times();
  }

  const LocalModel* model_;
};

/// Ground-truth parameters (simulation only). Point = sum of true theta along the path.
class OraclePredictor final : public PathPredictor {
 public:
  OraclePredictor(const RoadNetwork& net, const std::vector<ArcParams>& truth)
      : PathPredictor(net, theta_map(truth)), truth_(&truth) {}

  std::string name() const override { return "oracle"; }
  bool has_intervals() const override { return false; }

 protected:
  double sample_arc(ArcId a, std::size_t, Rng& rng) const override {
    const ArcParams& p = (*truth_)[static_cast<std::size_t>(a)];
    return rng.lognormal(p.mu, p.sigma2);
  }

 private:
  const std::vector<ArcParams>* truth_;
};

/// Distance-binning baseline: routes on length, predicts from the bin fits at that distance.
class BudgePredictor final : public Predictor {
 public:
  BudgePredictor(const RoadNetwork& net, const BinModel& model) : net_(&net), model_(&model), lengths_(net.lengths()) {
    if (model.bins.empty()) throw ValidationError("Budge model has no bins");
  }

  std::string name() const override { return "budge"; }
  bool uses_paths() const override { return false; }

  PointEstimate point(NodeId s, NodeId t) const override {
    if (!net_->has_node(s) || !net_->has_node(t)) throw ValidationError("query node not in network");
    if (s == t) return {};
    auto route = shortest_path(*net_, lengths_, s, t);
    if (!route) throw UnreachableError("node " + std::to_string(t) + " unreachable from node " + std::to_string(s));
    return point_on(route->path);
  }

  PointEstimate point_on(const Path& path) const override {
    PointEstimate p;
    p.path = path;
    p.distance = path_length(*net_, path);
    p.seconds = path.empty() ? 0.0 : budge_point(*model_, p.distance);
    return p;
  }

  std::pair<double, double> interval(const PointEstimate& p, int, double level, Rng&) const override {
    if (p.path.empty()) return {0.0, 0.0};
    const double tail = 0.5 * (1.0 - level);
    return {budge_quantile(*model_, p.distance, tail), budge_quantile(*model_, p.distance, 1.0 - tail)};
  }

  std::vector<CoverageEntry> coverage_map(NodeId start, double threshold, int, std::uint64_t) const override {
    if (!net_->has_node(start)) throw ValidationError("start node not in network");
    const PathTree tree = shortest_path_tree(*net_, lengths_, start);
    std::vector<CoverageEntry> out(net_->num_nodes());
    for (std::size_t v = 0; v < out.size(); ++v) {
      const auto node = static_cast<NodeId>(v);
      out[v].node = node;
      out[v].reachable = tree.reachable(node);
      if (node == start)
        out[v].probability = 1.0;
      else if (out[v].reachable)
        out[v].probability = budge_cdf(*model_, tree.cost[v], threshold);
    }
    return out;
  }

 private:
  const RoadNetwork* net_;
  const BinModel* model_;
  std::vector<double> lengths_;
};

// ---------------------------------------------------------------------------
// Per-trip estimates

struct TravelTimeEstimate {
  TripId trip_id = 0;
  std::string method;
  double point = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  bool has_interval = false;
};

struct PredictOptions {
  int n_draws = kDefaultIntervalDraws;
  double level = 0.95;
  int threads = 1;
  std::uint64_t seed = 0;
};

/**
 * Estimates for each trip. When `known_paths` holds a trip's path and the
 * method is path-based, the estimate follows that path; otherwise it routes
 * between the trip's endpoints.
 */
inline std::vector<TravelTimeEstimate> predict_trips(const Predictor& pred, const std::vector<Trip>& trips,
                                                     const std::map<TripId, Path>* known_paths,
                                                     const PredictOptions& opt = {}) {
  std::vector<TravelTimeEstimate> out(trips.size());
  parallel_for(trips.size(), opt.threads, [&](std::size_t i) {
    const Trip& trip = trips[i];
    PointEstimate p;
    const Path* known = nullptr;
    if (known_paths && pred.uses_paths()) {
      auto it = known_paths->find(trip.id);
      if (it != known_paths->end()) known = &it->second;
    }
    p = known ? pred.point_on(*known) : pred.point(trip.start_node, trip.end_node);
    TravelTimeEstimate& e = out[i];
    e.trip_id = trip.id;
    e.method = pred.name();
    e.point = p.seconds;
    if (pred.has_intervals()) {
      Rng rng(substream_seed(opt.seed, 0xE57, static_cast<std::uint64_t>(trip.id)));
      std::tie(e.lo, e.hi) = pred.interval(p, opt.n_draws, opt.level, rng);
      e.has_interval = true;
    }
  });
  return out;
}

/// b = mean(log estimate) - mean(log truth).
inline double compute_bias_factor(std::span<const double> estimates, std::span<const double> truths) {
  if (estimates.size() != truths.size()) throw ValidationError("bias factor: size mismatch");
  if (estimates.empty()) throw ValidationError("bias factor: no values");
  double sum = 0.0;
  for (std::size_t i = 0; i < estimates.size(); ++i) {
    if (!(estimates[i] > 0.0) || !(truths[i] > 0.0)) throw ValidationError("bias factor: values must be positive");
    sum += std::log(estimates[i]) - std::log(truths[i]);
  }
  return sum / static_cast<double>(estimates.size());
}

/// Multiplies point and interval endpoints by exp(-b).
inline TravelTimeEstimate apply_bias(double b, TravelTimeEstimate e) {
  const double f = std::exp(-b);
  e.point *= f;
  e.lo *= f;
  e.hi *= f;
  return e;
}

// ---------------------------------------------------------------------------
// Cross-validated metrics

struct MethodMetrics {
  std::string method;
  std::size_t n = 0;
  double rmse = 0.0;      // seconds
  double rmse_log = 0.0;
  double bias_ma = 0.0;   // after correction
  double bias_ma_uncorrected = 0.0;
  std::optional<double> coverage_pct;
  std::optional<double> width;  // geometric mean interval width, seconds
};

struct MetricsReport {
  std::vector<MethodMetrics> methods;

  const MethodMetrics& at(const std::string& method) const {
    for (const auto& m : methods)
      if (m.method == method) return m;
    throw ValidationError("no metrics for method '" + method + "'");
  }
};

/**
 * Scores one method over the 10 fold rotations: the bias factor is fitted on
 * the nine non-test folds and applied to the test fold. Bias M.A. is the mean
 * over folds of |mean log residual in the fold|.
 */
inline MethodMetrics score_method(const FoldPlan& plan, const std::vector<TravelTimeEstimate>& estimates,
                                  const std::map<TripId, double>& truths) {
  std::map<TripId, const TravelTimeEstimate*> by_id;
  for (const auto& e : estimates) by_id[e.trip_id] = &e;
  auto lookup = [&](TripId id) -> std::pair<const TravelTimeEstimate&, double> {
    auto e = by_id.find(id);
    auto t = truths.find(id);
    if (e == by_id.end() || t == truths.end()) throw ValidationError("no estimate or truth for trip " + std::to_string(id));
    return {*e->second, t->second};
  };

  MethodMetrics m;
  m.method = estimates.empty() ? std::string() : estimates.front().method;
  const bool intervals = !estimates.empty() && estimates.front().has_interval;
  double se = 0.0, se_log = 0.0, log_width = 0.0;
  std::size_t covered = 0;
  const auto k = plan.folds.size();
  for (std::size_t r = 0; r < k; ++r) {
    std::vector<double> est, tru;
    for (std::size_t f = 0; f < k; ++f) {
      if (f == r) continue;
      for (TripId id : plan.folds[f]) {
        auto [e, t] = lookup(id);
        est.push_back(e.point);
        tru.push_back(t);
      }
    }
    const double b = compute_bias_factor(est, tru);
    if (plan.folds[r].empty()) continue;
    double fold_resid = 0.0, fold_resid_raw = 0.0;
    for (TripId id : plan.folds[r]) {
      auto [raw, t] = lookup(id);
      const TravelTimeEstimate e = apply_bias(b, raw);
      if (!(e.point > 0.0)) throw ValidationError("nonpositive estimate for trip " + std::to_string(id));
      se += (e.point - t) * (e.point - t);
      const double lr = std::log(e.point) - std::log(t);
      se_log += lr * lr;
      fold_resid += lr;
      fold_resid_raw += std::log(raw.point) - std::log(t);
      if (intervals) {
        if (e.lo <= t && t <= e.hi) ++covered;
        log_width += std::log(e.hi - e.lo);
      }
      ++m.n;
    }
    const auto nf = static_cast<double>(plan.folds[r].size());
    m.bias_ma += std::abs(fold_resid / nf);
    m.bias_ma_uncorrected += std::abs(fold_resid_raw / nf);
  }
  if (m.n == 0) throw ValidationError("no evaluation trips");
  const auto n = static_cast<double>(m.n);
  m.rmse = std::sqrt(se / n);
  m.rmse_log = std::sqrt(se_log / n);
  m.bias_ma /= static_cast<double>(k);
  m.bias_ma_uncorrected /= static_cast<double>(k);
  if (intervals) {
    m.coverage_pct = 100.0 * static_cast<double>(covered) / n;
    m.width = std::exp(log_width / n);
  }
  return m;
}

inline std::map<TripId, double> trip_durations(const std::vector<Trip>& trips) {
  std::map<TripId, double> out;
  for (const Trip& t : trips) out[t.id] = t.duration();
  return out;
}

/// Predicts every evaluation trip of `plan` with each method and scores it.
inline MetricsReport evaluate_methods(const FoldPlan& plan, const std::vector<const Predictor*>& methods,
                                      const std::vector<Trip>& trips, const std::map<TripId, Path>* known_paths,
                                      const PredictOptions& opt = {}) {
  const auto eval_ids = plan.evaluation();
  const auto eval_trips = select_trips(trips, eval_ids);
  const auto truths = trip_durations(eval_trips);
  MetricsReport report;
  for (const Predictor* p : methods) {
    auto est = predict_trips(*p, eval_trips, known_paths, opt);
    report.methods.push_back(score_method(plan, est, truths));
    report.methods.back().method = p->name();
  }
  return report;
}

// ---------------------------------------------------------------------------
// Oracles

/// Oracle point estimates: sum of true theta along each trip's true path.
inline std::vector<TravelTimeEstimate> oracle_estimates(const RoadNetwork& net, const std::vector<ArcParams>& truth,
                                                        const std::vector<Trip>& trips,
                                                        const std::map<TripId, Path>& true_paths) {
  const OraclePredictor oracle(net, truth);
  for (const Trip& t : trips)
    if (!true_paths.contains(t.id)) throw ValidationError("oracle needs the true path of trip " + std::to_string(t.id));
  return predict_trips(oracle, trips, &true_paths);
}

struct EstimatedOracle {
  double rmse = 0.0;
  double rmse_log = 0.0;
};

/**
 * Treats a local MLE fit as the truth: simulates `n_sim` realized times per
 * trip on its fastest path and scores the MLE point against them.
 */
inline EstimatedOracle estimated_oracle(const RoadNetwork& net, const LocalModel& mle, const std::vector<Trip>& trips,
                                        int n_sim = 1000, std::uint64_t seed = 0) {
  if (mle.method != LocalMethod::mle) throw ValidationError("estimated oracle needs a local MLE model");
  if (n_sim < 1) throw ValidationError("n_sim must be positive");
  const LocalPredictor pred(net, mle);
  double se = 0.0, se_log = 0.0;
  std::size_t n = 0;
  for (const Trip& trip : trips) {
    const PointEstimate p = pred.point(trip.start_node, trip.end_node);
    Rng rng(substream_seed(seed, 0xE0, static_cast<std::uint64_t>(trip.id)));
    for (int k = 0; k < n_sim; ++k) {
      double t = 0.0;
      for (ArcId a : p.path.arcs) {
        const LocalEstimate& e = mle.per_arc[static_cast<std::size_t>(a)];
        t += rng.lognormal(e.log_mean, e.log_var);
      }
      se += (p.seconds - t) * (p.seconds - t);
      se_log += (std::log(p.seconds) - std::log(t)) * (std::log(p.seconds) - std::log(t));
      ++n;
    }
  }
  if (n == 0) throw ValidationError("no trips");
  return {std::sqrt(se / static_cast<double>(n)), std::sqrt(se_log / static_cast<double>(n))};
}

// ---------------------------------------------------------------------------
// Path marginals

struct ArcMarginal {
  ArcId arc = 0;
  double probability = 0.0;
};

/// Fraction of stored path snapshots of a trip that use each arc; arcs below `min_probability` omitted.
inline std::vector<ArcMarginal> map_match_marginals(const PosteriorSamples& samples, TripId trip_id,
                                                    std::size_t min_snapshots = 100, double min_probability = 0.01) {
  auto it = std::find(samples.trip_ids.begin(), samples.trip_ids.end(), trip_id);
  if (it == samples.trip_ids.end()) throw ValidationError("unknown trip id " + std::to_string(trip_id));
  const auto i = static_cast<std::size_t>(it - samples.trip_ids.begin());
  if (samples.paths.size() < min_snapshots)
    throw ValidationError("need at least " + std::to_string(min_snapshots) + " stored path snapshots, have " +
                          std::to_string(samples.paths.size()));
  std::map<ArcId, long> counts;
  for (const auto& draw : samples.paths) {
    std::vector<ArcId> arcs = draw.at(i).arcs;
    std::sort(arcs.begin(), arcs.end());
    arcs.erase(std::unique(arcs.begin(), arcs.end()), arcs.end());
    for (ArcId a : arcs) ++counts[a];
  }
  std::vector<ArcMarginal> out;
  const auto d = static_cast<double>(samples.paths.size());
  for (auto [a, c] : counts) {
    const double p = static_cast<double>(c) / d;
    if (p >= min_probability) out.push_back({a, p});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Output

inline void write_estimates(const std::vector<TravelTimeEstimate>& est, std::ostream& out) {
  out << "trip_id,method,point_s,lo_s,hi_s\n";
  for (const auto& e : est) {
    if (e.has_interval)
      csv::write_row(out, e.trip_id, e.method, e.point, e.lo, e.hi);
    else
      csv::write_row(out, e.trip_id, e.method, e.point, "", "");
  }
}

inline void write_coverage_map(const std::vector<CoverageEntry>& map, std::ostream& out) {
  out << "node_id,probability\n";
  for (const auto& e : map) csv::write_row(out, e.node, e.probability);
}

inline void write_marginals(TripId trip_id, const std::vector<ArcMarginal>& m, std::ostream& out, bool header = true) {
  if (header) out << "trip_id,arc_id,probability\n";
  for (const auto& e : m) csv::write_row(out, trip_id, e.arc, e.probability);
}

inline void write_metrics_csv(const MetricsReport& r, std::ostream& out) {
  out << "method,n,rmse_s,rmse_log,bias_ma,bias_ma_uncorrected,coverage_pct,width_s\n";
  for (const auto& m : r.methods) {
    out << m.method << ',' << m.n << ',' << csv::format(m.rmse) << ',' << csv::format(m.rmse_log) << ','
        << csv::format(m.bias_ma) << ',' << csv::format(m.bias_ma_uncorrected) << ','
        << (m.coverage_pct ? csv::format(*m.coverage_pct) : std::string()) << ','
        << (m.width ? csv::format(*m.width) : std::string()) << '\n';
  }
}

inline std::string format_metrics_table(const MetricsReport& r) {
  std::ostringstream os;
  os << std::left << std::setw(10) << "method" << std::right << std::setw(10) << "RMSE(s)" << std::setw(10)
     << "RMSE log" << std::setw(10) << "Bias M.A." << std::setw(11) << "Coverage%" << std::setw(11) << "Width(s)"
     << '\n';
  os << std::fixed;
  for (const auto& m : r.methods) {
    os << std::left << std::setw(10) << m.method << std::right << std::setprecision(1) << std::setw(10) << m.rmse
       << std::setprecision(3) << std::setw(10) << m.rmse_log << std::setw(10) << m.bias_ma;
    if (m.coverage_pct)
      os << std::setprecision(1) << std::setw(11) << *m.coverage_pct << std::setw(11) << *m.width;
    else
      os << std::setw(11) << "-" << std::setw(11) << "-";
    os << '\n';
  }
  return os.str();
}

}  // namespace traveltime
