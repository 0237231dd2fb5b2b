#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "ejdke/adaptive.hpp"
#include "ejdke/error.hpp"
#include "ejdke/estimator.hpp"
#include "ejdke/kernel.hpp"
#include "ejdke/model.hpp"
#include "ejdke/parallel.hpp"
#include "ejdke/rates.hpp"
#include "ejdke/reference.hpp"
#include "ejdke/serialize.hpp"
#include "ejdke/simulate.hpp"
#include "ejdke/trajectory_io.hpp"

namespace ejdke {

inline constexpr const char* kVersion = "0.1.0";

/// Exit status for usage errors (unknown flags, malformed values).
inline constexpr int kExitUsage = 2;

namespace cli {

namespace fs = std::filesystem;

template <class T>
struct is_vector : std::false_type {};
template <class T>
struct is_vector<std::vector<T>> : std::true_type {};

/// Collects flag -> config-key bindings; only flags given on the command line
/// override the configuration.
class Binder {
 public:
  explicit Binder(CLI::App* app) : app_(app) {}

  template <class T>
  void option(const std::string& flag, const std::string& key, const std::string& help) {
    auto value = std::make_shared<T>();
    CLI::Option* o = app_->add_option(flag, *value, help);
    if constexpr (is_vector<T>::value) o->delimiter(',');
    apply_.push_back([o, value, key](json& cfg) {
      if (o->count() > 0) cfg[json::json_pointer(key)] = *value;
    });
  }

  void flag(const std::string& flag, const std::string& key, const std::string& help) {
    CLI::Option* o = app_->add_flag(flag, help);
    apply_.push_back([o, key](json& cfg) {
      if (o->count() > 0) cfg[json::json_pointer(key)] = true;
    });
  }

  void apply(json& cfg) const {
    for (const auto& f : apply_) f(cfg);
  }

 private:
  CLI::App* app_;
  std::vector<std::function<void(json&)>> apply_;
};

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
  }
}

template <class T>
T get_or(const json& cfg, const char* key, T fallback) {
  if (!cfg.contains(key) || cfg.at(key).is_null()) return fallback;
  try {
    return cfg.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config field '") + key + "' has the wrong type: " + e.what());
  }
}

template <class T>
T require(const json& cfg, const char* key) {
  if (!cfg.contains(key) || cfg.at(key).is_null()) throw ConfigError(std::string("missing required setting '") + key + "'");
  return get_or<T>(cfg, key, T{});
}

inline ModelSpec model_from(const json& cfg) {
  if (!cfg.contains("model") || cfg.at("model").is_null())
    throw ConfigError("no model given (use --preset or a 'model' entry in the config)");
  const json& m = cfg.at("model");
  if (m.is_string()) return build_model(json{{"preset", m.get<std::string>()}});
  return build_model(m);
}

inline json default_eval(std::size_t d) {
  if (d == 1) return {{"lo", {-3.0}}, {"hi", {3.0}}, {"nodes", {240}}};
  if (d == 2) return {{"lo", {-2.0, -2.0}}, {"hi", {2.0, 2.0}}, {"nodes", {64, 64}}};
  return {{"lo", std::vector<double>(d, -1.0)}, {"hi", std::vector<double>(d, 1.0)},
          {"nodes", std::vector<std::size_t>(d, 16)}};
}

inline EvalGrid eval_from(json& cfg, std::size_t d) {
  json e = default_eval(d);
  if (cfg.contains("eval"))
    for (auto& [k, v] : cfg.at("eval").items()) e[k] = v;
  for (const char* k : {"lo", "hi", "nodes"})
    if (e.at(k).is_array() && e.at(k).size() == 1 && d > 1) e[k] = json(std::vector<json>(d, e.at(k)[0]));
  cfg["eval"] = e;
  return eval_grid_from_json(e, d);
}

inline std::vector<double> bandwidth_from(const json& cfg, const char* key, std::size_t d) {
  std::vector<double> h = require<std::vector<double>>(cfg, key);
  if (h.size() == 1 && d > 1) h.assign(d, h[0]);
  if (h.size() != d)
    throw DimensionMismatch(std::string("'") + key + "' has " + std::to_string(h.size()) + " components for d = " +
                            std::to_string(d));
  return h;
}

/// Writes text atomically enough for our purposes and records the artifact.
class Output {
 public:
  explicit Output(fs::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw ConfigError("cannot create output directory '" + dir_.string() + "': " + ec.message());
  }
  void text(const std::string& name, const std::string& body) {
    std::ofstream out(dir_ / name, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write '" + (dir_ / name).string() + "'");
    out << body;
    artifacts_.push_back(name);
  }
  void json_file(const std::string& name, const json& j) { text(name, j.dump(2) + "\n"); }
  fs::path path(const std::string& name) const { return dir_ / name; }
  void record(const std::string& name) { artifacts_.push_back(name); }
  const std::vector<std::string>& artifacts() const { return artifacts_; }
  const fs::path& dir() const { return dir_; }

 private:
  fs::path dir_;
  std::vector<std::string> artifacts_;
};

inline json with_config(json j, const json& cfg) {
  j["config"] = cfg;
  return j;
}

template <class Writer>
std::string csv_text(Writer&& w) {
  std::ostringstream ss;
  w(ss);
  return ss.str();
}

// --- subcommands -----------------------------------------------------------

inline void run_simulate(json& cfg, Output& out, std::ostream& log) {
  const ModelSpec model = model_from(cfg);
  SimulationOptions opt;
  opt.T = get_or(cfg, "T", 1000.0);
  opt.dt = get_or(cfg, "dt", 0.01);
  opt.burn_in = get_or(cfg, "burn_in", default_burn_in(model));
  opt.seed = get_or<std::uint64_t>(cfg, "seed", 1);
  opt.substeps = get_or<std::size_t>(cfg, "substeps", 1);
  opt.small_jump_correction = get_or(cfg, "small_jump_correction", false);
  cfg["T"] = opt.T;
  cfg["dt"] = opt.dt;
  cfg["burn_in"] = *opt.burn_in;
  cfg["seed"] = opt.seed;
  cfg["substeps"] = opt.substeps;
  cfg["small_jump_correction"] = opt.small_jump_correction;
  cfg["model_resolved"] = model.config;
  const Trajectory traj = simulate_path(model, opt);
  write_trajectory(traj, out.path("trajectory.ejdt").string());
  out.record("trajectory.ejdt");
  if (get_or(cfg, "csv", false)) {
    out.text("trajectory.csv", csv_text([&](std::ostream& s) {
               write_config_line(s, cfg);
               write_trajectory_csv(traj, s);
             }));
  }
  log << "simulated " << traj.n_steps << " steps of " << model.label << " (d = " << model.dim << ")\n";
}

inline void run_estimate(json& cfg, Output& out, std::ostream& log) {
  const std::string path = require<std::string>(cfg, "traj");
  const Trajectory traj = read_trajectory(path);
  const int M = get_or(cfg, "kernel_order", 2);
  cfg["kernel_order"] = M;
  const Kernel kernel(M);
  const EvalGrid eval = eval_from(cfg, traj.dim);
  const std::vector<double> h = bandwidth_from(cfg, "h", traj.dim);
  DensityEstimate e = cfg.contains("eta") && !cfg.at("eta").is_null()
                          ? estimate_density_convolved(traj, kernel, h, bandwidth_from(cfg, "eta", traj.dim), eval)
                          : estimate_density(traj, kernel, h, eval);
  json j = to_json(e);
  j["kernel"] = to_json(kernel);
  out.json_file("estimate.json", with_config(j, cfg));
  out.text("estimate.csv", csv_text([&](std::ostream& s) { write_density_csv(s, e, cfg); }));
  log << "estimated density on " << eval.size() << " nodes\n";
}

inline void run_select(json& cfg, Output& out, std::ostream& log) {
  const std::string path = require<std::string>(cfg, "traj");
  const Trajectory traj = read_trajectory(path);
  const int M = get_or(cfg, "kernel_order", 5);
  const double k = get_or(cfg, "k", 2.0);
  const std::string mode = get_or<std::string>(cfg, "grid", "relaxed");
  const auto k_max = get_or<std::size_t>(cfg, "k_max", 4);
  cfg["kernel_order"] = M;
  cfg["k"] = k;
  cfg["grid"] = mode;
  cfg["k_max"] = k_max;
  const Kernel kernel(M);
  const EvalGrid eval = eval_from(cfg, traj.dim);
  const BandwidthGrid grid = candidate_bandwidths(traj.T(), traj.dim, parse_grid_mode(mode), k_max);
  if (grid.empty())
    throw InvalidArgument("candidate bandwidth grid is empty (mode " + mode + ", T = " + std::to_string(traj.T()) +
                          "); the paper-exact bounds are empty at desk-scale T, use --grid relaxed");
  const AdaptiveSelection s = select_bandwidth(traj, kernel, grid, eval, k);
  json j = to_json(s);
  j["trajectory"] = {{"path", path}, {"model", traj.model_label}, {"T", traj.T()}, {"dt", traj.dt}, {"seed", traj.seed}};
  out.json_file("selection.json", with_config(j, cfg));
  out.text("selection.csv", csv_text([&](std::ostream& o) { write_selection_csv(o, s, cfg); }));
  log << "selected h = (";
  for (std::size_t i = 0; i < s.h_tilde.size(); ++i) log << (i ? ", " : "") << s.h_tilde[i];
  log << ") from " << grid.size() << " candidates\n";
}

inline ReferenceDensity reference_from(json& cfg, const ModelSpec& model, const EvalGrid& eval, double max_T,
                                       double dt, std::uint64_t seed) {
  json r = cfg.value("reference", json::object());
  const std::string source =
      r.value("source", std::string(model.stationary_density ? "closed-form" : "histogram"));
  r["source"] = source;
  ReferenceDensity ref;
  if (source == "closed-form") {
    ref = closed_form_reference(model, eval);
  } else if (source == "histogram") {
    HistogramOracleConfig hc;
    hc.T = r.value("T", 100.0 * max_T);
    hc.dt = r.value("dt", dt);
    hc.seed = r.value("seed", derive_seed(seed, {0xffffffffULL}));
    hc.substeps = r.value("substeps", std::size_t{1});
    r["T"] = hc.T;
    r["dt"] = hc.dt;
    r["seed"] = hc.seed;
    r["substeps"] = hc.substeps;
    ref = histogram_reference(model, eval, hc);
  } else {
    throw ConfigError("unknown reference source '" + source + "' (expected closed-form or histogram)");
  }
  cfg["reference"] = r;
  return ref;
}

inline void run_rate(json& cfg, Output& out, std::ostream& log) {
  const ModelSpec model = model_from(cfg);
  const std::size_t d = model.dim;
  RateExperimentConfig rc;
  rc.T_grid = get_or(cfg, "T_grid", std::vector<double>{1000.0, 4000.0, 16000.0});
  if (rc.T_grid.size() < 3)
    throw InvalidArgument("rate-experiment needs at least 3 T values to fit a slope (got " +
                          std::to_string(rc.T_grid.size()) + ")");
  rc.replications = get_or<std::size_t>(cfg, "replications", 20);
  rc.dt = get_or(cfg, "dt", 0.01);
  rc.substeps = get_or<std::size_t>(cfg, "substeps", 1);
  rc.burn_in = get_or(cfg, "burn_in", default_burn_in(model));
  rc.kernel_order = get_or(cfg, "kernel_order", 2);
  rc.seed = get_or<std::uint64_t>(cfg, "seed", 1);
  rc.tolerance = get_or(cfg, "tolerance", d >= 3 ? 0.25 : 0.3);
  rc.eval = eval_from(cfg, d);

  const std::string rule_name = get_or<std::string>(cfg, "rule", "rate-optimal");
  BandwidthRule rule;
  if (rule_name == "rate-optimal") {
    std::vector<double> beta = get_or(cfg, "beta", std::vector<double>(d, 2.0));
    if (beta.size() == 1 && d > 1) beta.assign(d, beta[0]);
    cfg["beta"] = beta;
    rule = BandwidthRule::rate_optimal({beta});
  } else if (rule_name == "fixed") {
    rule = BandwidthRule::fixed_h(bandwidth_from(cfg, "h", d));
  } else {
    throw ConfigError("unknown bandwidth rule '" + rule_name + "' (expected rate-optimal or fixed)");
  }
  cfg["rule"] = rule_name;
  cfg["T_grid"] = rc.T_grid;
  cfg["replications"] = rc.replications;
  cfg["dt"] = rc.dt;
  cfg["substeps"] = rc.substeps;
  cfg["burn_in"] = *rc.burn_in;
  cfg["kernel_order"] = rc.kernel_order;
  cfg["seed"] = rc.seed;
  cfg["tolerance"] = rc.tolerance;
  const double max_T = *std::max_element(rc.T_grid.begin(), rc.T_grid.end());
  const ReferenceDensity ref = reference_from(cfg, model, rc.eval, max_T, rc.dt, rc.seed);
  const RateReport rep = mse_experiment(model, rule, rc, ref);
  out.json_file("rate.json", with_config(to_json(rep), cfg));
  out.text("rate.csv", csv_text([&](std::ostream& s) { write_rate_csv(s, rep, cfg); }));
  out.text("rate_plot.csv", csv_text([&](std::ostream& s) { write_rate_plot_csv(s, rep, cfg); }));
  log << "fitted slope " << rep.fit.slope << " (target " << rep.target_slope << " +- " << rep.tolerance << "): "
      << (rep.pass ? "pass" : "fail") << '\n';
}

inline void run_variance(json& cfg, Output& out, std::ostream& log) {
  const ModelSpec model = model_from(cfg);
  VarianceProbeConfig vc;
  vc.sizes = get_or(cfg, "sizes", std::vector<double>{0.125, 0.0625, 0.03125, 0.015625, 0.0078125});
  vc.T = get_or(cfg, "T", 500.0);
  vc.dt = get_or(cfg, "dt", 0.002);
  vc.substeps = get_or<std::size_t>(cfg, "substeps", 1);
  vc.burn_in = get_or(cfg, "burn_in", default_burn_in(model));
  vc.replications = get_or<std::size_t>(cfg, "replications", 100);
  vc.seed = get_or<std::uint64_t>(cfg, "seed", 1);
  vc.center = get_or(cfg, "center", std::vector<double>(model.dim, 0.0));
  vc.tolerance = get_or(cfg, "tolerance", model.dim >= 3 ? 0.3 : 0.4);
  cfg["sizes"] = vc.sizes;
  cfg["T"] = vc.T;
  cfg["dt"] = vc.dt;
  cfg["substeps"] = vc.substeps;
  cfg["burn_in"] = *vc.burn_in;
  cfg["replications"] = vc.replications;
  cfg["seed"] = vc.seed;
  cfg["center"] = vc.center;
  cfg["tolerance"] = vc.tolerance;
  const VarianceReport rep = variance_probe(model, vc);
  out.json_file("variance.json", with_config(to_json(rep), cfg));
  out.text("variance.csv", csv_text([&](std::ostream& s) { write_variance_csv(s, rep, cfg); }));
  log << "variance slope " << rep.fit.slope << " (target " << rep.target_slope << " +- " << rep.tolerance
      << "): " << (rep.pass ? "pass" : "fail") << '\n';
}

inline AdaptiveStudyConfig study_from(json& cfg, const ModelSpec& model) {
  AdaptiveStudyConfig sc;
  sc.T = get_or(cfg, "T", 500.0);
  sc.dt = get_or(cfg, "dt", 0.05);
  sc.substeps = get_or<std::size_t>(cfg, "substeps", 5);
  sc.burn_in = get_or(cfg, "burn_in", default_burn_in(model));
  sc.mode = parse_grid_mode(get_or<std::string>(cfg, "grid", "relaxed"));
  sc.k_max = get_or<std::size_t>(cfg, "k_max", 4);
  sc.kernel_order = get_or(cfg, "kernel_order", 5);
  sc.replications = get_or<std::size_t>(cfg, "replications", 20);
  sc.seed = get_or<std::uint64_t>(cfg, "seed", 1);
  sc.eval = eval_from(cfg, model.dim);
  cfg["T"] = sc.T;
  cfg["dt"] = sc.dt;
  cfg["substeps"] = sc.substeps;
  cfg["burn_in"] = *sc.burn_in;
  cfg["grid"] = to_string(sc.mode);
  cfg["k_max"] = sc.k_max;
  cfg["kernel_order"] = sc.kernel_order;
  cfg["replications"] = sc.replications;
  cfg["seed"] = sc.seed;
  return sc;
}

inline void run_calibrate(json& cfg, Output& out, std::ostream& log) {
  const ModelSpec model = model_from(cfg);
  const AdaptiveStudyConfig sc = study_from(cfg, model);
  const std::vector<double> k_grid = get_or(cfg, "k_grid", std::vector<double>{0.1, 0.2, 0.5, 1.0, 2.0, 4.0});
  cfg["k_grid"] = k_grid;
  const ReferenceDensity ref = reference_from(cfg, model, sc.eval, sc.T, sc.dt / static_cast<double>(sc.substeps), sc.seed);
  const CalibrationReport rep = calibrate_k(model, sc, k_grid, ref);
  out.json_file("calibration.json", with_config(to_json(rep), cfg));
  out.text("calibration.csv", csv_text([&](std::ostream& s) { write_calibration_csv(s, rep, cfg); }));
  log << "chosen k = " << rep.chosen_k << (rep.flat ? " (risk curve is flat)" : "") << '\n';
}

inline void run_validate(json& cfg, Output& out, std::ostream& log) {
  const ModelSpec model = model_from(cfg);
  const auto n = get_or<std::size_t>(cfg, "probes", 1000);
  const double radius = get_or(cfg, "probe_radius", 10.0);
  const auto seed = get_or<std::uint64_t>(cfg, "seed", 1);
  CheckConfig cc;
  cc.tolerance = get_or(cfg, "tolerance", 1e-8);
  cfg["probes"] = n;
  cfg["probe_radius"] = radius;
  cfg["seed"] = seed;
  cfg["tolerance"] = cc.tolerance;
  cfg["model_resolved"] = model.config;
  const AssumptionReport rep = check_assumptions(model, random_ball_probes(model.dim, n, radius, seed), cc);
  json j = to_json(rep);
  j["lipschitz_method"] = "sampled finite differences";
  if (cfg.contains("lyapunov_eps") && !cfg.at("lyapunov_eps").is_null()) {
    const double eps = cfg.at("lyapunov_eps").get<double>();
    const std::vector<double> radii = get_or(cfg, "radii", std::vector<double>{1, 2, 5, 10, 20, 50});
    cfg["radii"] = radii;
    const LyapunovReport lr = lyapunov_probe(model, eps, radii);
    j["lyapunov"] = {{"eps", lr.eps},
                     {"radii", lr.radii},
                     {"max_ratio", lr.max_ratio},
                     {"rays", lr.rays},
                     {"found", lr.found},
                     {"R0", lr.found ? json(lr.R0) : json(nullptr)},
                     {"c1", lr.found ? json(lr.c1) : json(nullptr)},
                     {"max_residual", lr.max_residual}};
  }
  out.json_file("assumptions.json", with_config(j, cfg));
  log << model.label << ": " << (rep.all_passed() ? "all checks pass" : "checks failed:");
  for (const auto& f : rep.failed()) log << ' ' << f;
  log << '\n';
}

inline json error_record(const std::string& kind, const std::string& message, int code) {
  return {{"error", {{"kind", kind}, {"message", message}, {"exit_code", code}}}};
}

}  // namespace cli

/// Command-line entry point. Returns the process exit status: 0 on success,
/// 2 for usage errors, otherwise the ErrorKind code of the failure.
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  using namespace cli;
  CLI::App app{"Invariant density estimation for ergodic jump diffusions", "ejdke"};
  app.require_subcommand(1);
  app.set_help_flag("--help", "print this help");  // -h is taken by the bandwidth flag
  app.set_version_flag("--version", std::string("ejdke ") + kVersion);

  struct Sub {
    std::string name;
    CLI::App* app;
    std::unique_ptr<Binder> binder;
    std::string config_path, out_dir = ".";
  };
  std::vector<Sub> subs;
  auto add_sub = [&](const std::string& name, const std::string& help) -> Sub& {
    Sub s;
    s.name = name;
    s.app = app.add_subcommand(name, help);
    s.binder = std::make_unique<Binder>(s.app);
    subs.push_back(std::move(s));
    Sub& r = subs.back();
    r.app->add_option("--config", r.config_path, "JSON config file, or a manifest.json from an earlier run");
    r.app->add_option("--out", r.out_dir, "output directory (default: current directory)");
    r.binder->option<std::uint64_t>("--seed", "/seed", "master seed");
    return r;
  };
  auto model_flags = [](Binder& b) {
    b.option<std::string>("--preset", "/model", "model preset, e.g. radial-pushback-3 or smooth-1d");
  };
  auto eval_flags = [](Binder& b) {
    b.option<std::vector<double>>("--eval-lo", "/eval/lo", "evaluation box lower corner (one value or d values)");
    b.option<std::vector<double>>("--eval-hi", "/eval/hi", "evaluation box upper corner");
    b.option<std::vector<std::size_t>>("--eval-nodes", "/eval/nodes", "midpoint nodes per axis");
  };
  subs.reserve(8);

  Sub& sim = add_sub("simulate", "simulate a trajectory");
  model_flags(*sim.binder);
  sim.binder->option<double>("--T", "/T", "time horizon");
  sim.binder->option<double>("--dt", "/dt", "recording step");
  sim.binder->option<double>("--burn-in", "/burn_in", "discarded initial time");
  sim.binder->option<std::size_t>("--substeps", "/substeps", "Euler steps per recorded step");
  sim.binder->flag("--small-jump-correction", "/small_jump_correction", "add the Gaussian small-jump term");
  sim.binder->flag("--csv", "/csv", "also write trajectory.csv");

  Sub& est = add_sub("estimate", "kernel density estimate from a trajectory");
  est.binder->option<std::string>("--traj", "/traj", "trajectory file");
  est.binder->option<int>("--M", "/kernel_order", "kernel order");
  est.binder->option<std::vector<double>>("--h", "/h", "bandwidth (one value or d values)");
  est.binder->option<std::vector<double>>("--eta", "/eta", "second bandwidth: convolved estimator");
  eval_flags(*est.binder);

  Sub& sel = add_sub("select-bandwidth", "Goldenshluger-Lepski bandwidth selection");
  sel.binder->option<std::string>("--traj", "/traj", "trajectory file");
  sel.binder->option<std::string>("--grid", "/grid", "candidate set: relaxed or paper-exact");
  sel.binder->option<std::size_t>("--k-max", "/k_max", "largest k_i in h_i = 1/k_i");
  sel.binder->option<double>("--k", "/k", "penalty constant");
  sel.binder->option<int>("--M", "/kernel_order", "kernel order");
  eval_flags(*sel.binder);

  Sub& rate = add_sub("rate-experiment", "Monte Carlo risk versus T");
  model_flags(*rate.binder);
  rate.binder->option<std::vector<double>>("--T-grid", "/T_grid", "time horizons (at least 3)");
  rate.binder->option<std::size_t>("--reps", "/replications", "replications per T");
  rate.binder->option<double>("--dt", "/dt", "recording step");
  rate.binder->option<std::size_t>("--substeps", "/substeps", "Euler steps per recorded step");
  rate.binder->option<double>("--burn-in", "/burn_in", "discarded initial time");
  rate.binder->option<int>("--M", "/kernel_order", "kernel order");
  rate.binder->option<std::string>("--rule", "/rule", "bandwidth rule: rate-optimal or fixed");
  rate.binder->option<std::vector<double>>("--beta", "/beta", "smoothness per axis for the rate-optimal rule");
  rate.binder->option<std::vector<double>>("--h", "/h", "bandwidth for the fixed rule");
  rate.binder->option<std::string>("--reference", "/reference/source", "closed-form or histogram");
  rate.binder->option<double>("--oracle-T", "/reference/T", "histogram oracle horizon");
  rate.binder->option<double>("--tolerance", "/tolerance", "slope tolerance");
  eval_flags(*rate.binder);

  Sub& var = add_sub("variance-probe", "occupation-time variance versus support size");
  model_flags(*var.binder);
  var.binder->option<std::vector<double>>("--sizes", "/sizes", "cube volumes");
  var.binder->option<double>("--T", "/T", "time horizon");
  var.binder->option<double>("--dt", "/dt", "recording step");
  var.binder->option<std::size_t>("--reps", "/replications", "replications (at least 20)");
  var.binder->option<double>("--tolerance", "/tolerance", "slope tolerance");

  Sub& cal = add_sub("calibrate-k", "choose the penalty constant k by simulation");
  model_flags(*cal.binder);
  cal.binder->option<std::vector<double>>("--k-grid", "/k_grid", "candidate k values");
  cal.binder->option<std::size_t>("--reps", "/replications", "replications (at least 10)");
  cal.binder->option<double>("--T", "/T", "time horizon");
  cal.binder->option<double>("--dt", "/dt", "recording step");
  cal.binder->option<std::size_t>("--substeps", "/substeps", "Euler steps per recorded step");
  cal.binder->option<std::string>("--grid", "/grid", "candidate set: relaxed or paper-exact");
  cal.binder->option<std::size_t>("--k-max", "/k_max", "largest k_i in h_i = 1/k_i");
  cal.binder->option<int>("--M", "/kernel_order", "kernel order");
  cal.binder->option<double>("--oracle-T", "/reference/T", "histogram oracle horizon");
  eval_flags(*cal.binder);

  Sub& val = add_sub("validate-model", "check the model assumptions numerically");
  model_flags(*val.binder);
  val.binder->option<std::size_t>("--probes", "/probes", "number of random probe points");
  val.binder->option<double>("--probe-radius", "/probe_radius", "radius of the probe ball");
  val.binder->option<double>("--tolerance", "/tolerance", "check tolerance");
  val.binder->option<double>("--lyapunov-eps", "/lyapunov_eps", "also run the Lyapunov probe with this eps");
  val.binder->option<std::vector<double>>("--radii", "/radii", "Lyapunov probe radii");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << app.version() << '\n';
    return 0;
  } catch (const CLI::ParseError& e) {
    err << error_record("usage", e.what(), kExitUsage).dump() << '\n';
    return kExitUsage;
  }

  Sub* active = nullptr;
  for (auto& s : subs)
    if (s.app->parsed()) active = &s;

  try {
    json cfg = json::object();
    if (!active->config_path.empty()) {
      json file = read_json_file(active->config_path);
      if (file.contains("config") && file.at("config").is_object()) file = file.at("config");
      if (!file.is_object()) throw ConfigError("config file must hold a JSON object");
      if (file.contains("subcommand") && file.at("subcommand") != active->name)
        throw ConfigError("config file is for '" + file.at("subcommand").get<std::string>() + "', not '" +
                          active->name + "'");
      cfg = file;
    }
    active->binder->apply(cfg);
    cfg["subcommand"] = active->name;
    cfg.erase("model_resolved");

    Output output(active->out_dir);
    const auto t0 = std::chrono::steady_clock::now();
    if (active->name == "simulate") run_simulate(cfg, output, out);
    else if (active->name == "estimate") run_estimate(cfg, output, out);
    else if (active->name == "select-bandwidth") run_select(cfg, output, out);
    else if (active->name == "rate-experiment") run_rate(cfg, output, out);
    else if (active->name == "variance-probe") run_variance(cfg, output, out);
    else if (active->name == "calibrate-k") run_calibrate(cfg, output, out);
    else if (active->name == "validate-model") run_validate(cfg, output, out);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    json manifest = {{"subcommand", active->name},
                     {"config", cfg},
                     {"version", std::string("ejdke ") + kVersion},
                     {"libraries",
                      {{"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                     std::to_string(EIGEN_MINOR_VERSION)},
                       {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                             std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                             std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
                       {"cli11", CLI11_VERSION}}},
                     {"workers", worker_count()},
                     {"wall_time_seconds", wall},
                     {"artifacts", output.artifacts()}};
    output.json_file("manifest.json", manifest);
    return 0;
  } catch (const Error& e) {
    err << error_record(e.kind_name(), e.what(), static_cast<int>(e.kind())).dump() << '\n';
    return static_cast<int>(e.kind());
  } catch (const json::exception& e) {
    err << error_record("config", e.what(), static_cast<int>(ErrorKind::kConfig)).dump() << '\n';
    return static_cast<int>(ErrorKind::kConfig);
  } catch (const std::exception& e) {
    err << error_record("internal", e.what(), 1).dump() << '\n';
    return 1;
  }
}

}  // namespace ejdke
