#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "traveltime/traveltime.hpp"

namespace fs = std::filesystem;
using namespace traveltime;

namespace {

constexpr const char* kVersion = TRAVELTIME_VERSION;

/// Flags shared by every subcommand; unset flags leave the config untouched.
struct GlobalFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<std::string> out_dir;
  std::optional<std::string> data_dir;
};

/// Key/value lines appended to the [manifest] section.
using ManifestExtras = std::vector<std::pair<std::string, std::string>>;

void write_text(const fs::path& file, const std::function<void(std::ostream&)>& body) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  std::ofstream out(file, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  body(out);
  if (!out) throw std::runtime_error("write failed for " + file.string());
}

void write_manifest(const RunConfig& cfg, const std::string& command, const std::vector<std::string>& args,
                    const ManifestExtras& extras) {
  std::string joined;
  for (const auto& a : args) joined += (joined.empty() ? "" : " ") + a;
  write_text(fs::path(cfg.out_dir) / "manifest.ini", [&](std::ostream& out) {
    out << "[manifest]\n";
    out << "command = " << command << '\n';
    out << "arguments = " << joined << '\n';
    out << "version = " << kVersion << '\n';
    out << "seed = " << cfg.seed << '\n';
    out << "config_hash = " << config_hash(cfg) << '\n';
    for (const auto& [k, v] : extras) out << k << " = " << v << '\n';
    out << '\n' << format_config(cfg);
  });
}

RunConfig resolve_config(const GlobalFlags& g) {
  RunConfig cfg = g.config.empty() ? RunConfig{} : load_config_file(g.config);
  if (g.seed) {
    cfg.seed = *g.seed;
    cfg.sampler.seed = *g.seed;
  } else {
    cfg.sampler.seed = cfg.seed;
  }
  if (g.threads) cfg.threads = *g.threads;
  if (g.out_dir) cfg.out_dir = *g.out_dir;
  if (g.data_dir) {
    const fs::path d(*g.data_dir);
    cfg.nodes = (d / "nodes.csv").string();
    cfg.arcs = (d / "arcs.csv").string();
    cfg.trips = (d / "trips.csv").string();
    cfg.gps = (d / "gps.csv").string();
    cfg.truth_trips = fs::exists(d / "truth_trips.csv") ? (d / "truth_trips.csv").string() : "";
    cfg.truth_arcs = fs::exists(d / "truth_arcs.csv") ? (d / "truth_arcs.csv").string() : "";
  }
  return cfg;
}

struct Dataset {
  RoadNetwork net;
  std::vector<Trip> trips;
  std::size_t skipped = 0;
  std::optional<GroundTruth> truth;
};

Dataset load_data(const RunConfig& cfg) {
  Dataset d;
  d.net = load_network_files(cfg.nodes, cfg.arcs);
  auto loaded = load_dataset_files(d.net, cfg.trips, cfg.gps, cfg.load);
  d.trips = std::move(loaded.trips);
  d.skipped = loaded.skipped.size();
  for (const auto& s : loaded.skipped) std::cerr << "skipped trip " << s.id << ": " << s.reason << '\n';
  if (!cfg.truth_trips.empty() && !cfg.truth_arcs.empty()) d.truth = read_ground_truth(cfg.truth_trips, cfg.truth_arcs);
  if (d.truth && d.truth->arcs.size() != d.net.num_arcs())
    throw ValidationError("ground truth has " + std::to_string(d.truth->arcs.size()) + " arcs, network has " +
                          std::to_string(d.net.num_arcs()));
  return d;
}

std::map<TripId, Path> true_paths(const GroundTruth& g) {
  std::map<TripId, Path> out;
  for (const auto& [id, pt] : g.trips) out[id] = pt.first;
  return out;
}

std::vector<Trip> training_trips(const RunConfig& cfg, const std::vector<Trip>& trips, const std::string& subset) {
  if (subset == "all") return trips;
  return select_trips(trips, split_folds(trip_ids(trips), cfg.seed).training);
}

std::string fmt(double v) { return csv::format(v); }

ManifestExtras sampler_extras(const PosteriorSamples& post) {
  ManifestExtras x;
  const auto& c = post.counters;
  x.emplace_back("accept_path", fmt(c.path.rate()));
  x.emplace_back("accept_times", fmt(c.times.rate()));
  x.emplace_back("accept_sigma2", fmt(c.sigma2.rate()));
  x.emplace_back("accept_zeta2", fmt(c.zeta2.rate()));
  x.emplace_back("draws", std::to_string(post.num_draws()));
  x.emplace_back("excluded_trips", std::to_string(post.excluded.size()));
  if (post.num_chains() >= 2) {
    const auto ps = psrf_per_arc(post);
    std::size_t under_11 = 0, under_12 = 0;
    for (const auto& p : ps) {
      under_11 += p.psrf < 1.1;
      under_12 += p.psrf <= 1.2;
    }
    x.emplace_back("psrf_mu_below_1.1", fmt(static_cast<double>(under_11) / static_cast<double>(ps.size())));
    x.emplace_back("psrf_mu_at_most_1.2", fmt(static_cast<double>(under_12) / static_cast<double>(ps.size())));
    x.emplace_back("psrf_zeta2", fmt(psrf_zeta2(post).psrf));
  }
  return x;
}

void write_psrf(const PosteriorSamples& post, const fs::path& file) {
  if (post.num_chains() < 2) return;
  const auto mu = psrf_per_arc(post, false);
  const auto s2 = psrf_per_arc(post, true);
  write_text(file, [&](std::ostream& out) {
    out << "arc_id,psrf_mu,psrf_sigma2\n";
    for (std::size_t j = 0; j < mu.size(); ++j) csv::write_row(out, j, mu[j].psrf, s2[j].psrf);
  });
}

// A fitted model loaded back from a fit output directory.
struct LoadedModel {
  std::optional<PosteriorSamples> posterior;
  std::optional<LocalModel> local;
  std::optional<BinModel> bins;
  std::unique_ptr<Predictor> predictor;
};

LoadedModel load_model(const RoadNetwork& net, const std::string& method, const fs::path& dir) {
  LoadedModel m;
  if (method == "bayes") {
    m.posterior = read_posterior(dir);
    if (m.posterior->num_arcs() != net.num_arcs()) throw ValidationError("posterior arc count does not match the network");
    m.predictor = std::make_unique<BayesPredictor>(net, *m.posterior);
  } else if (method == "harmonic" || method == "mle") {
    m.local = read_local_model(dir);
    if (to_string(m.local->method) != method) throw ValidationError("model in " + dir.string() + " is not " + method);
    m.predictor = std::make_unique<LocalPredictor>(net, *m.local);
  } else {
    m.bins = read_bin_model(dir / "budge_bins.csv");
    m.predictor = std::make_unique<BudgePredictor>(net, *m.bins);
  }
  return m;
}

PredictOptions predict_options(const RunConfig& cfg) {
  PredictOptions o;
  o.n_draws = cfg.interval_draws;
  o.level = cfg.level;
  o.threads = cfg.threads;
  o.seed = cfg.seed;
  return o;
}

const std::vector<std::string> kMethods{"bayes", "harmonic", "mle", "budge"};

// ---------------------------------------------------------------------------
// Subcommands

struct SimulateFlags {
  std::optional<std::string> regime, grid, sampling;
  std::optional<int> trips;
  std::optional<double> block, interval;
};

void run_simulate(RunConfig cfg, const SimulateFlags& f, const std::vector<std::string>& args) {
  if (f.regime) {
    if (*f.regime != "good" && *f.regime != "bad") throw ValidationError("--regime must be good or bad");
    cfg.regime = *f.regime == "good" ? Regime::good : Regime::bad;
  }
  if (f.grid) {
    int r = 0, c = 0;
    char x = 0;
    std::istringstream is(*f.grid);
    if (!(is >> r >> x >> c) || (x != 'x' && x != 'X') || !(is >> std::ws).eof())
      throw ValidationError("--grid must look like 8x8");
    cfg.grid_rows = r;
    cfg.grid_cols = c;
  }
  if (f.trips) cfg.sim_trips = *f.trips;
  if (f.block) cfg.block_m = *f.block;
  if (f.sampling) {
    if (*f.sampling != "distance" && *f.sampling != "time") throw ValidationError("--sampling must be distance or time");
    cfg.sampling = *f.sampling == "distance" ? SamplingMode::by_distance : SamplingMode::by_time;
  }
  if (f.interval) cfg.sampling_interval = *f.interval;
  cfg.validate();

  Scenario s = build_grid_scenario(cfg.grid_rows, cfg.grid_cols, cfg.block_m, ClassPattern{}, cfg.regime, cfg.seed);
  if (cfg.sampling_interval > 0.0) s.gps_spacing = cfg.sampling_interval;
  const auto sim = simulate_dataset(s, cfg.sim_trips, cfg.seed, 0, cfg.sampling);
  const fs::path out(cfg.out_dir);
  write_text(out / "nodes.csv", [&](std::ostream& n) {
    write_text(out / "arcs.csv", [&](std::ostream& a) { write_network(s.net, n, a); });
  });
  const auto trips = trips_of(sim);
  write_text(out / "trips.csv", [&](std::ostream& t) {
    write_text(out / "gps.csv", [&](std::ostream& g) { write_dataset(trips, t, g); });
  });
  write_text(out / "truth_trips.csv", [&](std::ostream& t) {
    write_text(out / "truth_arcs.csv", [&](std::ostream& a) { write_ground_truth(s, sim, t, a); });
  });
  cfg.nodes = (out / "nodes.csv").string();
  cfg.arcs = (out / "arcs.csv").string();
  cfg.trips = (out / "trips.csv").string();
  cfg.gps = (out / "gps.csv").string();
  cfg.truth_trips = (out / "truth_trips.csv").string();
  cfg.truth_arcs = (out / "truth_arcs.csv").string();
  const auto rc = regime_constants(s.regime);
  cfg.sxx = cfg.syy = rc.location_variance;
  cfg.sxy = 0.0;
  cfg.zeta2 = rc.zeta2;
  std::size_t readings = 0;
  for (const auto& t : trips) readings += t.readings.size();
  write_manifest(cfg, "simulate", args, {{"trips_written", std::to_string(trips.size())},
                                         {"readings_written", std::to_string(readings)}});
  std::cout << "wrote " << trips.size() << " trips and " << readings << " GPS readings to " << out.string() << '\n';
}

struct FitFlags {
  std::string method;
  std::optional<int> chains, iterations, burn_in;
  std::string subset = "all";
};

void run_fit(RunConfig cfg, const FitFlags& f, const std::vector<std::string>& args) {
  if (f.chains) cfg.sampler.n_chains = *f.chains;
  if (f.iterations) cfg.sampler.iterations = *f.iterations;
  if (f.burn_in) cfg.sampler.burn_in = *f.burn_in;
  cfg.validate();
  const Dataset d = load_data(cfg);
  const auto train = training_trips(cfg, d.trips, f.subset);
  const fs::path out(cfg.out_dir);
  ManifestExtras extras{{"method", f.method},
                        {"subset", f.subset},
                        {"trips_used", std::to_string(train.size())},
                        {"trips_skipped_on_load", std::to_string(d.skipped)}};
  if (f.method == "bayes") {
    const Hyperparams hyper = cfg.resolve_hyperparams(d.net, train);
    extras.emplace_back("resolved_s2", fmt(hyper.s2));
    const auto post = run_chains(d.net, train, hyper, cfg.noise(), cfg.sampler, cfg.threads);
    write_posterior(post, out);
    write_psrf(post, out / "psrf.csv");
    for (auto& kv : sampler_extras(post)) extras.push_back(std::move(kv));
    std::cout << "stored " << post.num_draws() << " posterior draws in " << out.string() << '\n';
  } else if (f.method == "harmonic" || f.method == "mle") {
    const auto model =
        fit_local_model(d.net, train, f.method == "harmonic" ? LocalMethod::harmonic : LocalMethod::mle);
    write_local_model(model, out);
    std::cout << "fitted " << f.method << " estimates for " << model.per_arc.size() << " arcs\n";
  } else {
    const auto bins = fit_budge_bins(d.net, train, cfg.budge, &std::cerr);
    write_bin_model(bins, out / "budge_bins.csv");
    std::cout << "fitted " << bins.bins.size() << " distance bins\n";
  }
  write_manifest(cfg, "fit", args, extras);
}

struct PredictFlags {
  std::string method;
  std::string model;
  std::string pairs;
};

void run_predict(RunConfig cfg, const PredictFlags& f, const std::vector<std::string>& args) {
  cfg.validate();
  const RoadNetwork net = load_network_files(cfg.nodes, cfg.arcs);
  const LoadedModel m = load_model(net, f.method, f.model);
  std::vector<Trip> queries;
  for (const auto& row : csv::read_file(f.pairs, {"origin", "destination"})) {
    Trip t;
    t.id = static_cast<TripId>(queries.size());
    t.start_node = csv::parse_number<NodeId>(row, 0, f.pairs);
    t.end_node = csv::parse_number<NodeId>(row, 1, f.pairs);
    if (t.start_node < 0 || t.end_node < 0 || static_cast<std::size_t>(t.start_node) >= net.num_nodes() ||
        static_cast<std::size_t>(t.end_node) >= net.num_nodes())
      throw ValidationError(f.pairs + ":" + std::to_string(row.line) + ": unknown node id");
    queries.push_back(t);
  }
  const auto est = predict_trips(*m.predictor, queries, nullptr, predict_options(cfg));
  write_text(fs::path(cfg.out_dir) / "estimates.csv", [&](std::ostream& out) { write_estimates(est, out); });
  write_manifest(cfg, "predict", args, {{"method", f.method}, {"model", f.model}, {"pairs", f.pairs},
                                        {"queries", std::to_string(queries.size())}});
  std::cout << "wrote " << est.size() << " estimates\n";
}

struct EvaluateFlags {
  std::vector<std::string> methods = kMethods;
};

void run_evaluate(RunConfig cfg, const EvaluateFlags& f, const std::vector<std::string>& args) {
  cfg.validate();
  const Dataset d = load_data(cfg);
  const FoldPlan plan = split_folds(trip_ids(d.trips), cfg.seed);
  const auto train = select_trips(d.trips, plan.training);
  const fs::path out(cfg.out_dir);
  ManifestExtras extras{{"training_trips", std::to_string(train.size())},
                        {"evaluation_trips", std::to_string(plan.evaluation().size())},
                        {"trips_skipped_on_load", std::to_string(d.skipped)}};

  std::optional<std::map<TripId, Path>> known;
  if (d.truth && cfg.use_true_paths) known = true_paths(*d.truth);
  extras.emplace_back("true_paths_used", known ? "true" : "false");

  std::vector<std::unique_ptr<Predictor>> preds;
  std::optional<PosteriorSamples> post;
  std::optional<LocalModel> harmonic, mle;
  std::optional<BinModel> bins;
  if (d.truth) preds.push_back(std::make_unique<OraclePredictor>(d.net, d.truth->arcs));
  for (const auto& m : f.methods) {
    if (m == "bayes") {
      const Hyperparams hyper = cfg.resolve_hyperparams(d.net, train);
      extras.emplace_back("resolved_s2", fmt(hyper.s2));
      post = run_chains(d.net, train, hyper, cfg.noise(), cfg.sampler, cfg.threads);
      write_posterior(*post, out / "bayes");
      write_psrf(*post, out / "bayes" / "psrf.csv");
      for (auto& kv : sampler_extras(*post)) extras.emplace_back("bayes_" + kv.first, kv.second);
      preds.push_back(std::make_unique<BayesPredictor>(d.net, *post));
    } else if (m == "harmonic") {
      harmonic = fit_local_model(d.net, train, LocalMethod::harmonic);
      preds.push_back(std::make_unique<LocalPredictor>(d.net, *harmonic));
    } else if (m == "mle") {
      mle = fit_local_model(d.net, train, LocalMethod::mle);
      preds.push_back(std::make_unique<LocalPredictor>(d.net, *mle));
    } else {
      bins = fit_budge_bins(d.net, train, cfg.budge);
      preds.push_back(std::make_unique<BudgePredictor>(d.net, *bins));
    }
  }

  std::vector<const Predictor*> ptrs;
  for (const auto& p : preds) ptrs.push_back(p.get());
  const MetricsReport report = evaluate_methods(plan, ptrs, d.trips, known ? &*known : nullptr, predict_options(cfg));
  if (!d.truth && mle) {
    const auto eo = estimated_oracle(d.net, *mle, select_trips(d.trips, plan.evaluation()), 1000, cfg.seed);
    extras.emplace_back("estimated_oracle_rmse_s", fmt(eo.rmse));
    extras.emplace_back("estimated_oracle_rmse_log", fmt(eo.rmse_log));
  }
  write_text(out / "metrics.csv", [&](std::ostream& o) { write_metrics_csv(report, o); });
  write_text(out / "metrics.txt", [&](std::ostream& o) { o << format_metrics_table(report); });
  write_manifest(cfg, "evaluate", args, extras);
  std::cout << format_metrics_table(report);
}

struct CoverageFlags {
  std::string method;
  std::string model;
  NodeId start = 0;
  double threshold = 0.0;
};

void run_coverage(RunConfig cfg, const CoverageFlags& f, const std::vector<std::string>& args) {
  cfg.validate();
  const RoadNetwork net = load_network_files(cfg.nodes, cfg.arcs);
  if (f.start < 0 || static_cast<std::size_t>(f.start) >= net.num_nodes()) throw ValidationError("unknown start node");
  if (!(f.threshold > 0.0)) throw ValidationError("--threshold must be positive");
  const LoadedModel m = load_model(net, f.method, f.model);
  const auto map = m.predictor->coverage_map(f.start, f.threshold, cfg.coverage_draws, cfg.seed);
  write_text(fs::path(cfg.out_dir) / "coverage_map.csv", [&](std::ostream& out) { write_coverage_map(map, out); });
  write_manifest(cfg, "coverage-map", args, {{"method", f.method}, {"model", f.model},
                                             {"start", std::to_string(f.start)}, {"threshold_s", fmt(f.threshold)}});
  std::cout << "wrote probabilities for " << map.size() << " nodes\n";
}

struct MapMatchFlags {
  std::string model;
  std::vector<TripId> trips;
  std::size_t min_snapshots = 100;
  double min_probability = 0.01;
};

void run_map_match(RunConfig cfg, const MapMatchFlags& f, const std::vector<std::string>& args) {
  cfg.validate();
  const PosteriorSamples post = read_posterior(f.model);
  const std::vector<TripId> ids = f.trips.empty() ? post.trip_ids : f.trips;
  write_text(fs::path(cfg.out_dir) / "marginals.csv", [&](std::ostream& out) {
    bool header = true;
    for (TripId id : ids) {
      write_marginals(id, map_match_marginals(post, id, f.min_snapshots, f.min_probability), out, header);
      header = false;
    }
    if (header) out << "trip_id,arc_id,probability\n";
  });
  write_manifest(cfg, "map-match", args, {{"model", f.model}, {"trips_matched", std::to_string(ids.size())}});
  std::cout << "wrote marginals for " << ids.size() << " trips\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Road-network travel-time estimation"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", std::string(kVersion));

  GlobalFlags g;
  app.add_option("--config", g.config, "INI config file; flags override it")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "Master seed");
  app.add_option("--threads", g.threads, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--out-dir", g.out_dir, "Output directory");
  app.add_option("--data", g.data_dir, "Directory with nodes/arcs/trips/gps (and optional truth) CSVs");

  SimulateFlags sf;
  auto* sim = app.add_subcommand("simulate", "Simulate a grid scenario with GPS readings and ground truth");
  sim->add_option("--regime", sf.regime, "good or bad GPS quality");
  sim->add_option("--grid", sf.grid, "Grid size RxC, e.g. 8x8");
  sim->add_option("--trips", sf.trips, "Number of trips");
  sim->add_option("--block", sf.block, "Block length in meters");
  sim->add_option("--sampling", sf.sampling, "distance or time");
  sim->add_option("--interval", sf.interval, "Sampling interval (m or s); default is the regime spacing");

  FitFlags ff;
  auto* fit = app.add_subcommand("fit", "Fit one method and persist the model");
  fit->add_option("--method", ff.method, "Estimation method")->required()->check(CLI::IsMember(kMethods));
  fit->add_option("--chains", ff.chains, "Number of MCMC chains (bayes)");
  fit->add_option("--iterations", ff.iterations, "Sampler iterations including burn-in (bayes)");
  fit->add_option("--burn-in", ff.burn_in, "Burn-in iterations (bayes)");
  fit->add_option("--subset", ff.subset, "Trips to fit: all, or the training half of the seeded split")
      ->check(CLI::IsMember({"all", "training"}));

  PredictFlags pf;
  auto* pred = app.add_subcommand("predict", "Predict travel times for origin-destination pairs");
  pred->add_option("--method", pf.method, "Method of the fitted model")->required()->check(CLI::IsMember(kMethods));
  pred->add_option("--model", pf.model, "Directory written by fit")->required()->check(CLI::ExistingDirectory);
  pred->add_option("--pairs", pf.pairs, "CSV with columns origin,destination")->required()->check(CLI::ExistingFile);

  EvaluateFlags ef;
  auto* eval = app.add_subcommand("evaluate", "Cross-validated comparison of methods");
  eval->add_option("--methods", ef.methods, "Methods to fit and score")->delimiter(',')->check(CLI::IsMember(kMethods));

  CoverageFlags cf;
  auto* cov = app.add_subcommand("coverage-map", "Probability of reaching each node within a time threshold");
  cov->add_option("--method", cf.method, "Method of the fitted model")->required()->check(CLI::IsMember(kMethods));
  cov->add_option("--model", cf.model, "Directory written by fit")->required()->check(CLI::ExistingDirectory);
  cov->add_option("--start", cf.start, "Origin node id")->required();
  cov->add_option("--threshold", cf.threshold, "Time threshold in seconds")->required();

  MapMatchFlags mf;
  auto* mm = app.add_subcommand("map-match", "Posterior arc-usage probabilities per trip");
  mm->add_option("--model", mf.model, "Directory written by fit --method bayes")->required()->check(CLI::ExistingDirectory);
  mm->add_option("--trip", mf.trips, "Trip ids (default: all fitted trips)");
  mm->add_option("--min-snapshots", mf.min_snapshots, "Required stored path snapshots");
  mm->add_option("--min-probability", mf.min_probability, "Omit arcs below this probability");

  bool print_defaults = false;
  auto* conf = app.add_subcommand("config", "Print the resolved config");
  conf->add_flag("--print-defaults", print_defaults, "Print the built-in defaults instead");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  const std::vector<std::string> args(argv + 1, argv + argc);
  try {
    RunConfig cfg = resolve_config(g);
    if (*sim) run_simulate(cfg, sf, args);
    else if (*fit) run_fit(cfg, ff, args);
    else if (*pred) run_predict(cfg, pf, args);
    else if (*eval) run_evaluate(cfg, ef, args);
    else if (*cov) run_coverage(cfg, cf, args);
    else if (*mm) run_map_match(cfg, mf, args);
    else if (*conf) {
      cfg.validate();
      std::cout << format_config(print_defaults ? RunConfig{} : cfg);
    }
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
