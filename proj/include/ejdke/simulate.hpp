#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ejdke/error.hpp"
#include "ejdke/levy.hpp"
#include "ejdke/model.hpp"
#include "ejdke/rng.hpp"

namespace ejdke {

struct JumpMark {
  double time = 0.0;  // offset within the step
  std::vector<double> z;
};

struct JumpBatch {
  std::size_t count = 0;
  std::vector<JumpMark> marks;
};

/// Draws marks of the truncated Levy density. Construction integrates the
/// total mass and compensator once; sampling is then exact in law:
/// radius by inverse CDF of r^{-1-alpha} on [trunc_low, trunc_high] thinned by
/// the taper, direction Gaussian-normalized and thinned by the skew weight.
class LevySampler {
 public:
  LevySampler(const LevySpec& levy, std::size_t d, const LevyQuadratureConfig& quad = {})
      : levy_(levy), d_(d) {
    levy.validate();
    if (d == 0) throw InvalidArgument("LevySampler: dimension must be positive");
    lambda_ = levy_total_mass(levy, d, quad);
    compensator_ = levy_compensator(levy, d, quad);
    lo_pow_ = std::pow(levy.trunc_low, -levy.alpha);
    hi_pow_ = std::isinf(levy.trunc_high) ? 0.0 : std::pow(levy.trunc_high, -levy.alpha);
  }

  const LevySpec& spec() const noexcept { return levy_; }
  std::size_t dim() const noexcept { return d_; }
  double total_mass() const noexcept { return lambda_; }
  const std::vector<double>& compensator() const noexcept { return compensator_; }

  /// One mark z, written into out (length d).
  void sample_mark(Rng& rng, std::span<double> out) const {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    double r;
    for (;;) {
      const double u = unif(rng);
      r = std::pow(lo_pow_ - u * (lo_pow_ - hi_pow_), -1.0 / levy_.alpha);
      if (levy_.taper == 0.0 || unif(rng) < std::exp(-levy_.taper * (r - levy_.trunc_low))) break;
    }
    std::normal_distribution<double> normal;
    for (;;) {
      double n2 = 0.0;
      for (double& v : out) {
        v = normal(rng);
        n2 += v * v;
      }
      if (n2 == 0.0) continue;
      const double inv = 1.0 / std::sqrt(n2);
      for (double& v : out) v *= inv;
      if (levy_.symmetric() || unif(rng) < levy_.direction_weight(out[0])) break;
    }
    if (levy_.symmetric() && unif(rng) < 0.5) r = -r;
    for (double& v : out) v *= r;
  }

  /// Marks of one step of length dt: Poisson(lambda dt) count, uniform times.
  JumpBatch increments(Rng& rng, double dt) const {
    if (dt < 0.0) throw InvalidArgument("levy_increments: dt must be nonnegative");
    JumpBatch batch;
    if (dt == 0.0) return batch;
    std::poisson_distribution<std::size_t> pois(lambda_ * dt);
    batch.count = pois(rng);
    std::uniform_real_distribution<double> unif(0.0, dt);
    for (std::size_t i = 0; i < batch.count; ++i) {
      JumpMark m;
      m.time = unif(rng);
      m.z.resize(d_);
      sample_mark(rng, m.z);
      batch.marks.push_back(std::move(m));
    }
    return batch;
  }

 private:
  LevySpec levy_;
  std::size_t d_;
  double lambda_ = 0.0;
  std::vector<double> compensator_;
  double lo_pow_ = 0.0, hi_pow_ = 0.0;
};

inline JumpBatch levy_increments(const LevySpec& levy, std::size_t d, double dt, Rng& rng) {
  return LevySampler(levy, d).increments(rng, dt);
}

struct Trajectory {
  std::size_t dim = 0;
  double dt = 0.0;
  std::size_t n_steps = 0;
  std::vector<double> states;  // n_steps x dim, row-major; row k is X at t = k dt
  std::string model_label;
  std::uint64_t seed = 0;
  double burn_in = 0.0;

  double T() const noexcept { return static_cast<double>(n_steps) * dt; }
  double time(std::size_t k) const noexcept { return static_cast<double>(k) * dt; }
  std::span<const double> row(std::size_t k) const { return {states.data() + k * dim, dim}; }
  std::vector<double> times() const {
    std::vector<double> t(n_steps);
    for (std::size_t k = 0; k < n_steps; ++k) t[k] = time(k);
    return t;
  }
  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

struct SimulationOptions {
  double T = 100.0;
  double dt = 0.01;              // recording step
  std::optional<double> burn_in;  // default max(50, 5 / C_tilde)
  std::uint64_t seed = 1;
  std::vector<double> x0;        // empty: origin
  std::size_t substeps = 1;      // Euler steps per recorded step
  bool small_jump_correction = false;
  bool drift_only = false;       // switch off diffusion and jumps
};

inline double default_burn_in(const ModelSpec& model) {
  return std::max(50.0, 5.0 / model.meta.C_tilde);
}

/// Number of recorded steps; T must be a whole number of dt steps.
inline std::size_t step_count(double T, double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidArgument("dt must be positive");
  if (!(T >= dt) || !std::isfinite(T)) throw InvalidArgument("T must be finite and at least dt");
  const double n = std::round(T / dt);
  if (std::abs(n * dt - T) > 1e-9 * T)
    throw InvalidArgument("T = " + std::to_string(T) + " is not a whole number of dt = " +
                          std::to_string(dt) + " steps");
  return static_cast<std::size_t>(n);
}

/// Euler scheme with per-step aggregated jumps, calling visit(k, x) for every
/// recorded state X_{k dt}, k = 0..n_steps-1, after the burn-in is discarded.
/// The visitor sees a view that is only valid during the call.
template <class Visitor>
void simulate_stream(const ModelSpec& model, const SimulationOptions& opt, Visitor&& visit) {
  const std::size_t d = model.dim;
  const std::size_t n = step_count(opt.T, opt.dt);
  if (opt.substeps == 0) throw InvalidArgument("substeps must be positive");
  const double h = opt.dt / static_cast<double>(opt.substeps);
  const double burn = opt.burn_in.value_or(default_burn_in(model));
  if (!(burn >= 0.0)) throw InvalidArgument("burn_in must be nonnegative");
  const auto n_burn = static_cast<std::size_t>(std::llround(burn / h));

  std::vector<double> x(d, 0.0);
  if (!opt.x0.empty()) {
    if (opt.x0.size() != d) throw DimensionMismatch("x0 has wrong dimension");
    x = opt.x0;
  }

  const bool jumps = model.has_jumps() && !opt.drift_only;
  std::optional<LevySampler> sampler;
  double small_sd = 0.0;
  if (jumps) {
    sampler.emplace(*model.levy, d);
    if (opt.small_jump_correction) small_sd = std::sqrt(levy_small_jump_variance(*model.levy, d) * h);
  }
  const double lambda = jumps ? sampler->total_mass() : 0.0;

  Rng rng = make_rng(opt.seed);
  std::normal_distribution<double> normal;
  std::exponential_distribution<double> expo(lambda > 0 ? lambda : 1.0);
  const double sqrt_h = std::sqrt(h);

  std::vector<double> b(d), a(d * d), g(d * d), xi(d), jump(d), mark(d), dx(d);
  // Jump arrivals as a Poisson process on the internal time axis.
  double next_jump = jumps ? expo(rng) : std::numeric_limits<double>::infinity();
  double t_int = 0.0;

  const std::size_t total = n_burn + n * opt.substeps;
  std::size_t recorded = 0;
  for (std::size_t s = 0;; ++s) {
    if (s >= n_burn && (s - n_burn) % opt.substeps == 0) {
      if (recorded == n) break;
      visit(recorded, std::span<const double>(x));
      ++recorded;
    }
    if (s == total) break;

    model.drift(x, b);
    for (std::size_t i = 0; i < d; ++i) dx[i] = b[i] * h;
    if (!opt.drift_only) {
      model.diffusion(x, a);
      for (double& v : xi) v = normal(rng);
      for (std::size_t i = 0; i < d; ++i) {
        double acc = 0.0;
        for (std::size_t k = 0; k < d; ++k) acc += a[i * d + k] * xi[k];
        dx[i] += sqrt_h * acc;
      }
    }
    if (jumps) {
      const double t_end = t_int + h;
      std::fill(jump.begin(), jump.end(), 0.0);
      while (next_jump < t_end) {
        sampler->sample_mark(rng, mark);
        for (std::size_t i = 0; i < d; ++i) jump[i] += mark[i];
        next_jump += expo(rng);
      }
      const auto& m = sampler->compensator();
      for (std::size_t i = 0; i < d; ++i) jump[i] -= m[i] * h;
      if (small_sd > 0.0)
        for (std::size_t i = 0; i < d; ++i) jump[i] += small_sd * normal(rng);
      model.jump_coeff(x, g);
      for (std::size_t i = 0; i < d; ++i) {
        double acc = 0.0;
        for (std::size_t k = 0; k < d; ++k) acc += g[i * d + k] * jump[k];
        dx[i] += acc;
      }
      t_int = t_end;
    }
    for (std::size_t i = 0; i < d; ++i) {
      x[i] += dx[i];
      if (!std::isfinite(x[i]))
        throw NumericalError("simulation produced a non-finite state at step " + std::to_string(s + 1) +
                             (s + 1 <= n_burn ? " (burn-in)" : ""));
    }
  }
}

inline Trajectory simulate_path(const ModelSpec& model, const SimulationOptions& opt) {
  Trajectory traj;
  traj.dim = model.dim;
  traj.dt = opt.dt;
  traj.n_steps = step_count(opt.T, opt.dt);
  traj.model_label = model.label;
  traj.seed = opt.seed;
  traj.burn_in = opt.burn_in.value_or(default_burn_in(model));
  traj.states.resize(traj.n_steps * traj.dim);
  simulate_stream(model, opt, [&](std::size_t k, std::span<const double> x) {
    std::copy(x.begin(), x.end(), traj.states.begin() + static_cast<std::ptrdiff_t>(k * traj.dim));
  });
  return traj;
}

inline Trajectory simulate_path(const ModelSpec& model, double T, double dt, double burn_in,
                                std::uint64_t seed) {
  SimulationOptions opt;
  opt.T = T;
  opt.dt = dt;
  opt.burn_in = burn_in;
  opt.seed = seed;
  return simulate_path(model, opt);
}

}  // namespace ejdke
