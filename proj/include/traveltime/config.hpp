#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <string>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "traveltime/budge_estimator.hpp"
#include "traveltime/csv.hpp"
#include "traveltime/data_io.hpp"
#include "traveltime/error.hpp"
#include "traveltime/local_estimators.hpp"
#include "traveltime/rjmcmc.hpp"
#include "traveltime/simulator.hpp"
#include "traveltime/travel_time_model.hpp"

namespace traveltime {

/// Everything a pipeline run needs. Loaded from a sectioned key=value file; command-line flags override.
struct RunConfig {
  // [run]
  std::uint64_t seed = 1;
  int threads = 1;
  std::string out_dir = "out";

  // [data]
  std::string nodes = "nodes.csv";
  std::string arcs = "arcs.csv";
  std::string trips = "trips.csv";
  std::string gps = "gps.csv";
  std::string truth_trips;  // optional ground truth sidecars (simulated data only)
  std::string truth_arcs;
  LoadOptions load;

  // [simulate]
  int grid_rows = 8;
  int grid_cols = 8;
  double block_m = 150.0;
  Regime regime = Regime::good;
  int sim_trips = 1000;
  SamplingMode sampling = SamplingMode::by_distance;
  double sampling_interval = 0.0;  // 0: the regime's spacing

  // [prior]
  bool prior_speeds_from_data = false;  // "data": per-class geometric-mean GPS speed of the fitted trips
  ClassSpeeds prior_speeds = kDefaultPriorSpeeds;
  bool prior_s2_from_data = false;  // "data": method-of-moments between-arc variance of the fitted trips
  double s2 = 1.0;
  double b1 = 0.05, b2 = 1.5, b3 = 0.01, b4 = 0.5;
  double C = 0.01;
  double alpha = 1.0;
  double alpha_prime = 0.5;

  // [noise]
  double sxx = 100.0, sxy = 0.0, syy = 100.0;
  double zeta2 = 0.004;

  // [sampler]
  SamplerConfig sampler;

  // [budge]
  BudgeOptions budge;

  // [eval]
  int interval_draws = 5000;
  int coverage_draws = 2000;
  double level = 0.95;
  bool use_true_paths = true;

  GpsNoise noise() const { return GpsNoise(sxx, sxy, syy, zeta2); }

  Hyperparams hyperparams(const RoadNetwork& net, const ClassSpeeds& speeds) const {
    Hyperparams h = default_hyperparams(net, speeds);
    h.s2 = s2;
    h.b1 = b1;
    h.b2 = b2;
    h.b3 = b3;
    h.b4 = b4;
    h.C = C;
    h.alpha = alpha;
    h.alpha_prime = alpha_prime;
    h.validate(net.num_arcs());
    return h;
  }

  /// Hyperparameters with any "data" entries resolved from `trips`.
  Hyperparams resolve_hyperparams(const RoadNetwork& net, const std::vector<Trip>& trips) const {
    const ClassSpeeds speeds = prior_speeds_from_data ? class_speeds_from_data(net, trips, prior_speeds) : prior_speeds;
    RunConfig c = *this;
    if (prior_s2_from_data) c.s2 = traveltime::prior_s2_from_data(net, trips);
    return c.hyperparams(net, speeds);
  }

  void validate() const {
    if (threads < 1) throw ValidationError("threads must be >= 1");
    if (grid_rows < 2 || grid_cols < 2) throw ValidationError("grid must be at least 2x2");
    if (!(block_m > 0.0)) throw ValidationError("block_m must be positive");
    if (sim_trips < 1) throw ValidationError("simulate trips must be >= 1");
    if (sampling_interval < 0.0) throw ValidationError("sampling interval must be >= 0");
    if (!(b1 > 0.0 && b1 < b2) || !(b3 > 0.0 && b3 < b4)) throw ValidationError("need 0 < b1 < b2 and 0 < b3 < b4");
    if (!(s2 > 0.0) || !(C > 0.0) || !(alpha > 0.0) || !(alpha_prime > 0.0))
      throw ValidationError("s2, C, alpha and alpha_prime must be positive");
    for (double v : prior_speeds)
      if (!(v > 0.0)) throw ValidationError("prior speeds must be positive");
    (void)noise();
    sampler.validate();
    if (budge.n_bins < 1 || budge.min_per_bin < 1) throw ValidationError("budge n_bins and min_per_bin must be >= 1");
    if (interval_draws < 1000) throw ValidationError("interval_draws must be >= 1000");
    if (coverage_draws < 1) throw ValidationError("coverage_draws must be >= 1");
    if (!(level > 0.0 && level < 1.0)) throw ValidationError("level must be in (0, 1)");
  }
};

namespace config_detail {

using boost::property_tree::ptree;

inline std::string join_speeds(const ClassSpeeds& s) {
  return csv::format(s[0]) + "," + csv::format(s[1]) + "," + csv::format(s[2]);
}

inline ClassSpeeds parse_speeds(const std::string& text) {
  ClassSpeeds out{};
  const auto parts = csv::split(text);
  if (parts.size() != 3) throw ValidationError("prior speeds need three values: primary,secondary,tertiary");
  for (int c = 0; c < 3; ++c) {
    try {
      std::size_t used = 0;
      out[c] = std::stod(parts[c], &used);
      if (used != parts[c].size()) throw std::invalid_argument(parts[c]);
    } catch (const std::exception&) {
      throw ValidationError("bad prior speed '" + parts[c] + "'");
    }
  }
  return out;
}

template <class T>
T get(const ptree& tree, const std::string& key, const T& fallback) {
  auto node = tree.get_optional<std::string>(key);
  if (!node) return fallback;
  std::istringstream is(*node);
  T value{};
  is >> value;
  if (!is || !(is >> std::ws).eof()) throw ValidationError("config key '" + key + "': cannot parse '" + *node + "'");
  return value;
}

template <>
inline std::string get<std::string>(const ptree& tree, const std::string& key, const std::string& fallback) {
  return tree.get<std::string>(key, fallback);
}

template <>
inline bool get<bool>(const ptree& tree, const std::string& key, const bool& fallback) {
  auto node = tree.get_optional<std::string>(key);
  if (!node) return fallback;
  if (*node == "true" || *node == "1") return true;
  if (*node == "false" || *node == "0") return false;
  throw ValidationError("config key '" + key + "': expected true or false, got '" + *node + "'");
}

inline const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys{
      "run.seed", "run.threads", "run.out_dir",
      "data.nodes", "data.arcs", "data.trips", "data.gps", "data.truth_trips", "data.truth_arcs", "data.max_gap_s",
      "data.stop_speed_mps",
      "simulate.rows", "simulate.cols", "simulate.block_m", "simulate.regime", "simulate.trips", "simulate.sampling",
      "simulate.interval",
      "prior.speeds", "prior.s2", "prior.b1", "prior.b2", "prior.b3", "prior.b4", "prior.C", "prior.alpha",
      "prior.alpha_prime",
      "noise.sxx", "noise.sxy", "noise.syy", "noise.zeta2",
      "sampler.iterations", "sampler.burn_in", "sampler.thin", "sampler.max_section_arcs", "sampler.eta2",
      "sampler.nu2", "sampler.target_accept", "sampler.adapt_every", "sampler.chains", "sampler.record_paths",
      "sampler.init_anchors", "sampler.time_moves_per_arc",
      "budge.n_bins", "budge.min_per_bin",
      "eval.interval_draws", "eval.coverage_draws", "eval.level", "eval.use_true_paths"};
  return keys;
}

}  // namespace config_detail

/// Parses a config; unknown keys are errors. A [manifest] section is ignored so manifests can be replayed.
inline RunConfig parse_config(std::istream& in, const std::string& name = "config") {
  using namespace config_detail;
  ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ParseError(name, static_cast<std::size_t>(e.line()), e.message());
  }
  for (const auto& [section, body] : tree) {
    if (section == "manifest") continue;
    if (body.empty()) throw ValidationError(name + ": key '" + section + "' outside any section");
    for (const auto& [key, value] : body)
      if (!known_keys().contains(section + "." + key))
        throw ValidationError(name + ": unknown key '" + section + "." + key + "'");
  }

  RunConfig c;
  c.seed = get(tree, "run.seed", c.seed);
  c.threads = get(tree, "run.threads", c.threads);
  c.out_dir = get(tree, "run.out_dir", c.out_dir);

  c.nodes = get(tree, "data.nodes", c.nodes);
  c.arcs = get(tree, "data.arcs", c.arcs);
  c.trips = get(tree, "data.trips", c.trips);
  c.gps = get(tree, "data.gps", c.gps);
  c.truth_trips = get(tree, "data.truth_trips", c.truth_trips);
  c.truth_arcs = get(tree, "data.truth_arcs", c.truth_arcs);
  c.load.max_gap_s = get(tree, "data.max_gap_s", c.load.max_gap_s);
  c.load.stop_speed_mps = get(tree, "data.stop_speed_mps", c.load.stop_speed_mps);

  c.grid_rows = get(tree, "simulate.rows", c.grid_rows);
  c.grid_cols = get(tree, "simulate.cols", c.grid_cols);
  c.block_m = get(tree, "simulate.block_m", c.block_m);
  const auto regime = get<std::string>(tree, "simulate.regime", "good");
  if (regime != "good" && regime != "bad") throw ValidationError("simulate.regime must be good or bad");
  c.regime = regime == "good" ? Regime::good : Regime::bad;
  c.sim_trips = get(tree, "simulate.trips", c.sim_trips);
  const auto sampling = get<std::string>(tree, "simulate.sampling", "distance");
  if (sampling != "distance" && sampling != "time") throw ValidationError("simulate.sampling must be distance or time");
  c.sampling = sampling == "distance" ? SamplingMode::by_distance : SamplingMode::by_time;
  c.sampling_interval = get(tree, "simulate.interval", c.sampling_interval);

  const auto speeds = get<std::string>(tree, "prior.speeds", c.prior_speeds_from_data ? std::string("data") : config_detail::join_speeds(c.prior_speeds));
  c.prior_speeds_from_data = speeds == "data";
  if (!c.prior_speeds_from_data) c.prior_speeds = parse_speeds(speeds);
  const auto s2 = get<std::string>(tree, "prior.s2", c.prior_s2_from_data ? std::string("data") : csv::format(c.s2));
  c.prior_s2_from_data = s2 == "data";
  if (!c.prior_s2_from_data) c.s2 = get(tree, "prior.s2", c.s2);
  c.b1 = get(tree, "prior.b1", c.b1);
  c.b2 = get(tree, "prior.b2", c.b2);
  c.b3 = get(tree, "prior.b3", c.b3);
  c.b4 = get(tree, "prior.b4", c.b4);
  c.C = get(tree, "prior.C", c.C);
  c.alpha = get(tree, "prior.alpha", c.alpha);
  c.alpha_prime = get(tree, "prior.alpha_prime", c.alpha_prime);

  c.sxx = get(tree, "noise.sxx", c.sxx);
  c.sxy = get(tree, "noise.sxy", c.sxy);
  c.syy = get(tree, "noise.syy", c.syy);
  c.zeta2 = get(tree, "noise.zeta2", c.zeta2);

  SamplerConfig& s = c.sampler;
  s.iterations = get(tree, "sampler.iterations", s.iterations);
  s.burn_in = get(tree, "sampler.burn_in", s.burn_in);
  s.thin = get(tree, "sampler.thin", s.thin);
  s.max_section_arcs = get(tree, "sampler.max_section_arcs", s.max_section_arcs);
  s.eta2 = get(tree, "sampler.eta2", s.eta2);
  s.nu2 = get(tree, "sampler.nu2", s.nu2);
  s.target_accept = get(tree, "sampler.target_accept", s.target_accept);
  s.adapt_every = get(tree, "sampler.adapt_every", s.adapt_every);
  s.n_chains = get(tree, "sampler.chains", s.n_chains);
  s.record_paths = get(tree, "sampler.record_paths", s.record_paths);
  const auto anchors = get<std::string>(tree, "sampler.init_anchors", std::string(to_string(s.init_anchors)));
  if (anchors != "middle_reading" && anchors != "all_readings")
    throw ValidationError("sampler.init_anchors must be middle_reading or all_readings");
  s.init_anchors = anchors == "middle_reading" ? InitAnchors::middle_reading : InitAnchors::all_readings;
  s.time_moves_per_arc = get(tree, "sampler.time_moves_per_arc", s.time_moves_per_arc);

  c.budge.n_bins = get(tree, "budge.n_bins", c.budge.n_bins);
  c.budge.min_per_bin = get(tree, "budge.min_per_bin", c.budge.min_per_bin);

  c.interval_draws = get(tree, "eval.interval_draws", c.interval_draws);
  c.coverage_draws = get(tree, "eval.coverage_draws", c.coverage_draws);
  c.level = get(tree, "eval.level", c.level);
  c.use_true_paths = get(tree, "eval.use_true_paths", c.use_true_paths);
  return c;
}

inline RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file " + path);
  return parse_config(in, path);
}

/// Canonical text form; every field, fixed order. Re-parsing it reproduces the config.
inline std::string format_config(const RunConfig& c) {
  std::ostringstream os;
  auto kv = [&](const char* key, const auto& value) {
    os << key << " = ";
    if constexpr (std::is_same_v<std::decay_t<decltype(value)>, double>)
      os << csv::format(value);
    else if constexpr (std::is_same_v<std::decay_t<decltype(value)>, bool>)
      os << (value ? "true" : "false");
    else
      os << value;
    os << '\n';
  };
  os << "[run]\n";
  kv("seed", c.seed);
  kv("threads", c.threads);
  kv("out_dir", c.out_dir);
  os << "\n[data]\n";
  kv("nodes", c.nodes);
  kv("arcs", c.arcs);
  kv("trips", c.trips);
  kv("gps", c.gps);
  kv("truth_trips", c.truth_trips);
  kv("truth_arcs", c.truth_arcs);
  kv("max_gap_s", c.load.max_gap_s);
  kv("stop_speed_mps", c.load.stop_speed_mps);
  os << "\n[simulate]\n";
  kv("rows", c.grid_rows);
  kv("cols", c.grid_cols);
  kv("block_m", c.block_m);
  kv("regime", std::string(to_string(c.regime)));
  kv("trips", c.sim_trips);
  kv("sampling", std::string(c.sampling == SamplingMode::by_distance ? "distance" : "time"));
  kv("interval", c.sampling_interval);
  os << "\n[prior]\n";
  kv("speeds", c.prior_speeds_from_data ? std::string("data") : config_detail::join_speeds(c.prior_speeds));
  if (c.prior_s2_from_data)
    kv("s2", std::string("data"));
  else
    kv("s2", c.s2);
  kv("b1", c.b1);
  kv("b2", c.b2);
  kv("b3", c.b3);
  kv("b4", c.b4);
  kv("C", c.C);
  kv("alpha", c.alpha);
  kv("alpha_prime", c.alpha_prime);
  os << "\n[noise]\n";
  kv("sxx", c.sxx);
  kv("sxy", c.sxy);
  kv("syy", c.syy);
  kv("zeta2", c.zeta2);
  os << "\n[sampler]\n";
  kv("iterations", c.sampler.iterations);
  kv("burn_in", c.sampler.burn_in);
  kv("thin", c.sampler.thin);
  kv("max_section_arcs", c.sampler.max_section_arcs);
  kv("eta2", c.sampler.eta2);
  kv("nu2", c.sampler.nu2);
  kv("target_accept", c.sampler.target_accept);
  kv("adapt_every", c.sampler.adapt_every);
  kv("chains", c.sampler.n_chains);
  kv("record_paths", c.sampler.record_paths);
  kv("init_anchors", std::string(to_string(c.sampler.init_anchors)));
  kv("time_moves_per_arc", c.sampler.time_moves_per_arc);
  os << "\n[budge]\n";
  kv("n_bins", c.budge.n_bins);
  kv("min_per_bin", c.budge.min_per_bin);
  os << "\n[eval]\n";
  kv("interval_draws", c.interval_draws);
  kv("coverage_draws", c.coverage_draws);
  kv("level", c.level);
  kv("use_true_paths", c.use_true_paths);
  return os.str();
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Hash of the canonical config; the output directory is excluded since it does not affect results.
inline std::string config_hash(const RunConfig& c) {
  RunConfig keyed = c;
  keyed.out_dir.clear();
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << fnv1a(format_config(keyed));
  return os.str();
}

}  // namespace traveltime
