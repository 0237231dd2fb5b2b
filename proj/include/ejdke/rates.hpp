#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ejdke/error.hpp"
#include "ejdke/estimator.hpp"
#include "ejdke/kernel.hpp"
#include "ejdke/model.hpp"
#include "ejdke/numeric.hpp"
#include "ejdke/parallel.hpp"
#include "ejdke/reference.hpp"
#include "ejdke/rng.hpp"
#include "ejdke/simulate.hpp"

namespace ejdke {

/// Per-axis smoothness beta_1..beta_d; beta_bar is their harmonic mean.
struct SmoothnessSpec {
  std::vector<double> beta;

  void validate() const {
    if (beta.empty()) throw InvalidArgument("smoothness vector is empty");
    for (double b : beta)
      if (!(b > 0.0) || !std::isfinite(b)) throw InvalidArgument("smoothness components must be positive");
  }
  double beta_bar() const {
    validate();
    double s = 0.0;
    for (double b : beta) s += 1.0 / b;
    return static_cast<double>(beta.size()) / s;
  }
};

/// Exponents a_l with h_l = T^{-a_l}: a_l = beta_bar / (beta_l (2 beta_bar + d - 2)).
inline std::vector<double> rate_exponents(const SmoothnessSpec& spec, std::size_t d) {
  if (d < 3) throw InvalidArgument("rate-optimal bandwidths are defined for d >= 3 (got d = " + std::to_string(d) + ")");
  if (spec.beta.size() != d) throw DimensionMismatch("smoothness vector length differs from d");
  const double bb = spec.beta_bar(), dd = static_cast<double>(d);
  std::vector<double> a(d);
  for (std::size_t l = 0; l < d; ++l) a[l] = bb / (spec.beta[l] * (2.0 * bb + dd - 2.0));
  return a;
}

inline std::vector<double> rate_optimal_bandwidth(const SmoothnessSpec& spec, std::size_t d, double T) {
  if (!(T > 0.0)) throw InvalidArgument("T must be positive");
  const std::vector<double> a = rate_exponents(spec, d);
  std::vector<double> h(d);
  for (std::size_t l = 0; l < d; ++l) h[l] = std::min(1.0, std::pow(T, -a[l]));
  return h;
}

/// Exponent of T in the risk bound, log factors ignored: -2 beta_bar / (2 beta_bar + d - 2)
/// for d >= 3 and -1 for d = 1, 2.
inline double theoretical_exponent(std::size_t d, double beta_bar) {
  if (d == 0) throw InvalidArgument("dimension must be positive");
  if (d <= 2) return -1.0;
  const double dd = static_cast<double>(d);
  return -2.0 * beta_bar / (2.0 * beta_bar + dd - 2.0);
}

inline double theoretical_rate(std::size_t d, double alpha, double beta_bar, double T) {
  if (!(alpha > 0.0 && alpha < 2.0)) throw InvalidArgument("alpha must lie in (0, 2)");
  if (!(T > 1.0)) throw InvalidArgument("theoretical_rate needs T > 1");
  const double lt = std::log(T);
  switch (d) {
    case 0: throw InvalidArgument("dimension must be positive");
    case 1: return std::pow(lt, std::max(2.0 - (1.0 + alpha) / 2.0, 1.0)) / T;
    case 2: return lt / T;
    default: return std::pow(T, theoretical_exponent(d, beta_bar));
  }
}

/// How an experiment picks h as a function of T.
struct BandwidthRule {
  enum class Kind { kRateOptimal, kFixed, kPower };
  Kind kind = Kind::kRateOptimal;
  SmoothnessSpec spec;
  std::vector<double> fixed;
  double scale = 1.0, power = 0.0;  // kPower: h_l = scale * T^{-power}

  static BandwidthRule rate_optimal(SmoothnessSpec s) {
    BandwidthRule r;
    r.kind = Kind::kRateOptimal;
    r.spec = std::move(s);
    return r;
  }
  static BandwidthRule fixed_h(std::vector<double> h) {
    BandwidthRule r;
    r.kind = Kind::kFixed;
    r.fixed = std::move(h);
    return r;
  }
  static BandwidthRule power_law(double scale, double power) {
    BandwidthRule r;
    r.kind = Kind::kPower;
    r.scale = scale;
    r.power = power;
    return r;
  }

  /// For d = 1, 2 the rate-optimal rule uses h_l = T^{-1/(2 beta_l)}: the
  /// variance is of order 1/T up to logs whatever h is, so h only needs to push
  /// the squared bias below 1/T.
  std::vector<double> bandwidth(std::size_t d, double T) const {
    switch (kind) {
      case Kind::kRateOptimal: {
        if (d >= 3) return rate_optimal_bandwidth(spec, d, T);
        if (spec.beta.size() != d) throw DimensionMismatch("smoothness vector length differs from d");
        spec.validate();
        std::vector<double> h(d);
        for (std::size_t l = 0; l < d; ++l) h[l] = std::min(1.0, std::pow(T, -1.0 / (2.0 * spec.beta[l])));
        return h;
      }
      case Kind::kFixed:
        if (fixed.size() != d) throw DimensionMismatch("fixed bandwidth length differs from d");
        return fixed;
      case Kind::kPower:
        return std::vector<double>(d, std::min(1.0, scale * std::pow(T, -power)));
    }
    return {};
  }

  std::string describe() const {
    switch (kind) {
      case Kind::kRateOptimal: return "rate-optimal";
      case Kind::kFixed: return "fixed";
      case Kind::kPower: return "power";
    }
    return "unknown";
  }
};

struct RateExperimentConfig {
  std::vector<double> T_grid{1000.0, 4000.0, 16000.0};
  std::size_t replications = 50;
  double dt = 0.01;
  std::size_t substeps = 1;
  std::optional<double> burn_in;
  int kernel_order = 2;
  EvalGrid eval = EvalGrid::cube(1, -3.0, 3.0, 120);
  std::uint64_t seed = 1;
  double tolerance = 0.3;
  std::optional<double> target_slope;  // default: theoretical exponent
};

struct RateRow {
  double T = 0.0;
  std::vector<double> h;
  double median = 0.0, q25 = 0.0, q75 = 0.0;
  std::size_t n = 0;
};

struct RateReport {
  std::vector<RateRow> rows;
  std::vector<std::vector<double>> errors;  // errors[iT][rep]: ||mu_hat - mu||_A^2
  LinearFit fit;                            // log median vs log T
  double target_slope = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  std::string rule;
  std::string reference_source;
  double reference_T = 0.0;
};

namespace detail {

inline SimulationOptions replicate_options(double T, double dt, std::size_t substeps,
                                           const std::optional<double>& burn_in, std::uint64_t seed) {
  SimulationOptions opt;
  opt.T = T;
  opt.dt = dt;
  opt.substeps = substeps;
  opt.burn_in = burn_in;
  opt.seed = seed;
  return opt;
}

}  // namespace detail

/// Monte Carlo squared L2(A) risk of the plain estimator over a T grid, and
/// the least-squares slope of log median risk against log T. Replication r at
/// T index i uses seed derive_seed(seed, {i, r}).
inline RateReport mse_experiment(const ModelSpec& model, const BandwidthRule& rule, const RateExperimentConfig& cfg,
                                 const ReferenceDensity& ref) {
  const std::size_t d = model.dim;
  if (cfg.T_grid.size() < 3) throw InvalidArgument("rate experiment needs at least 3 T values to fit a slope");
  if (cfg.replications == 0) throw InvalidArgument("rate experiment needs replications");
  if (ref.values.empty()) throw InvalidArgument("rate experiment: reference density unavailable");
  if (!ref.grid.same_as(cfg.eval)) throw InvalidArgument("reference density grid differs from the evaluation grid");
  if (cfg.eval.dim() != d) throw DimensionMismatch("evaluation grid dimension differs from model");

  std::vector<std::vector<double>> hs;
  double h_min = 1.0, T_max = 0.0;
  for (double T : cfg.T_grid) {
    hs.push_back(rule.bandwidth(d, T));
    for (double v : hs.back()) h_min = std::min(h_min, v);
    T_max = std::max(T_max, T);
  }
  if (ref.source == "histogram") {
    if (ref.oracle_T < 100.0 * T_max)
      throw InvalidArgument("histogram oracle too short: T_oracle = " + std::to_string(ref.oracle_T) +
                            " < 100 x max T = " + std::to_string(100.0 * T_max));
    if (ref.cell_width > 0.5 * h_min * (1.0 + 1e-12))
      throw InvalidArgument("histogram cells too wide: width " + std::to_string(ref.cell_width) +
                            " exceeds half the smallest bandwidth " + std::to_string(h_min));
  }

  const Kernel kernel(cfg.kernel_order);
  const std::size_t nT = cfg.T_grid.size(), R = cfg.replications;
  RateReport rep;
  rep.errors.assign(nT, std::vector<double>(R));
  parallel_for(nT * R, [&](std::size_t task) {
    const std::size_t i = task / R, r = task % R;
    DensityAccumulator acc(kernel, hs[i], cfg.eval);
    simulate_stream(model,
                    detail::replicate_options(cfg.T_grid[i], cfg.dt, cfg.substeps, cfg.burn_in,
                                              derive_seed(cfg.seed, {i, r})),
                    [&](std::size_t, std::span<const double> x) { acc.add(x); });
    rep.errors[i][r] = squared_l2_on_A(acc.finish(), ref.values, cfg.eval);
  });

  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < nT; ++i) {
    RateRow row;
    row.T = cfg.T_grid[i];
    row.h = hs[i];
    row.median = median(rep.errors[i]);
    row.q25 = quantile(rep.errors[i], 0.25);
    row.q75 = quantile(rep.errors[i], 0.75);
    row.n = R;
    rep.rows.push_back(row);
    lx.push_back(std::log(row.T));
    ly.push_back(std::log(row.median));
  }
  rep.fit = fit_line(lx, ly);
  double bb = 2.0;
  if (rule.kind == BandwidthRule::Kind::kRateOptimal) bb = rule.spec.beta_bar();
  rep.target_slope = cfg.target_slope.value_or(theoretical_exponent(d, bb));
  rep.tolerance = cfg.tolerance;
  rep.pass = std::abs(rep.fit.slope - rep.target_slope) <= rep.tolerance;
  rep.rule = rule.describe();
  rep.reference_source = ref.source;
  rep.reference_T = ref.oracle_T;
  return rep;
}

struct VarianceProbeConfig {
  std::vector<double> sizes;  // cube volumes s < 1
  double T = 500.0;
  double dt = 0.002;
  std::size_t substeps = 1;
  std::optional<double> burn_in;
  std::size_t replications = 100;
  std::uint64_t seed = 1;
  std::vector<double> center;  // empty: origin
  double tolerance = 0.3;
};

struct VarianceReport {
  std::vector<double> sizes;
  std::vector<double> variance;     // sample variance of the occupation time of the cube
  std::vector<double> mean;         // its mean
  double control_variance = 0.0;    // f = 1 everywhere: the integral is T exactly
  LinearFit fit;                    // log(variance / T) against log s
  double target_slope = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

/// Variance of int_0^T 1_S(X_t) dt over replications for cubes S of volume s
/// centred at `center`, regressed as log(Var / T) on log s. The target slope is
/// 1 + 2/d for d >= 3 and 2 for d = 1, 2.
inline VarianceReport variance_probe(const ModelSpec& model, const VarianceProbeConfig& cfg) {
  const std::size_t d = model.dim;
  if (cfg.replications < 20) throw InvalidArgument("variance probe needs at least 20 replications");
  if (cfg.sizes.size() < 2) throw InvalidArgument("variance probe needs at least two support sizes");
  for (double s : cfg.sizes)
    if (!(s > 0.0 && s < 1.0)) throw InvalidArgument("support volumes must lie in (0, 1)");
  std::vector<double> center = cfg.center.empty() ? std::vector<double>(d, 0.0) : cfg.center;
  if (center.size() != d) throw DimensionMismatch("probe centre has wrong dimension");

  const std::size_t S = cfg.sizes.size(), R = cfg.replications;
  std::vector<double> half(S);
  for (std::size_t j = 0; j < S; ++j) half[j] = 0.5 * std::pow(cfg.sizes[j], 1.0 / static_cast<double>(d));

  std::vector<std::vector<double>> occ(S, std::vector<double>(R));
  std::vector<double> control(R);
  parallel_for(R, [&](std::size_t r) {
    std::vector<std::size_t> count(S, 0);
    std::size_t total = 0;
    simulate_stream(model, detail::replicate_options(cfg.T, cfg.dt, cfg.substeps, cfg.burn_in, derive_seed(cfg.seed, {r})),
                    [&](std::size_t, std::span<const double> x) {
                      ++total;
                      double dist = 0.0;
                      for (std::size_t m = 0; m < d; ++m) dist = std::max(dist, std::abs(x[m] - center[m]));
                      for (std::size_t j = 0; j < S; ++j)
                        if (dist <= half[j]) ++count[j];
                    });
    for (std::size_t j = 0; j < S; ++j) occ[j][r] = static_cast<double>(count[j]) * cfg.dt;
    control[r] = static_cast<double>(total) * cfg.dt;
  });

  VarianceReport rep;
  rep.sizes = cfg.sizes;
  std::vector<double> lx, ly;
  for (std::size_t j = 0; j < S; ++j) {
    rep.variance.push_back(sample_variance(occ[j]));
    rep.mean.push_back(pairwise_sum(occ[j]) / static_cast<double>(R));
    if (!(rep.variance.back() > 0.0))
      throw NumericalError("variance probe: occupation time of the cube with volume " + std::to_string(cfg.sizes[j]) +
                           " has zero variance (cube never visited?)");
    lx.push_back(std::log(cfg.sizes[j]));
    ly.push_back(std::log(rep.variance.back() / cfg.T));
  }
  rep.control_variance = sample_variance(control);
  rep.fit = fit_line(lx, ly);
  rep.target_slope = d >= 3 ? 1.0 + 2.0 / static_cast<double>(d) : 2.0;
  rep.tolerance = cfg.tolerance;
  rep.pass = std::abs(rep.fit.slope - rep.target_slope) <= rep.tolerance;
  return rep;
}

}  // namespace ejdke
