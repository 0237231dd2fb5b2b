#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ejdke/error.hpp"
#include "ejdke/kernel.hpp"
#include "ejdke/numeric.hpp"
#include "ejdke/simulate.hpp"

namespace ejdke {

/// Axis-aligned box with a midpoint rule: nodes at cell centres, every weight
/// equal to the cell volume. Node index is row-major, last axis fastest.
class EvalGrid {
 public:
  EvalGrid() = default;
  EvalGrid(std::vector<double> lo, std::vector<double> hi, std::vector<std::size_t> nodes)
      : lo_(std::move(lo)), hi_(std::move(hi)), n_(std::move(nodes)) {
    if (lo_.empty() || lo_.size() != hi_.size() || lo_.size() != n_.size())
      throw DimensionMismatch("EvalGrid: lo, hi and node counts must have the same positive length");
    cell_volume_ = 1.0;
    size_ = 1;
    for (std::size_t m = 0; m < lo_.size(); ++m) {
      if (!(lo_[m] < hi_[m])) throw InvalidArgument("EvalGrid: need lo < hi on every axis");
      if (n_[m] == 0) throw InvalidArgument("EvalGrid: node counts must be positive");
      step_.push_back((hi_[m] - lo_[m]) / static_cast<double>(n_[m]));
      cell_volume_ *= step_.back();
      size_ *= n_[m];
    }
  }

  /// Cube [lo, hi]^d with n nodes per axis.
  static EvalGrid cube(std::size_t d, double lo, double hi, std::size_t n) {
    return EvalGrid(std::vector<double>(d, lo), std::vector<double>(d, hi), std::vector<std::size_t>(d, n));
  }

  std::size_t dim() const noexcept { return lo_.size(); }
  std::size_t size() const noexcept { return size_; }
  const std::vector<double>& lo() const noexcept { return lo_; }
  const std::vector<double>& hi() const noexcept { return hi_; }
  const std::vector<std::size_t>& nodes() const noexcept { return n_; }
  double step(std::size_t m) const { return step_[m]; }
  double cell_volume() const noexcept { return cell_volume_; }
  double volume() const noexcept { return cell_volume_ * static_cast<double>(size_); }
  double coord(std::size_t m, std::size_t i) const {
    return lo_[m] + (static_cast<double>(i) + 0.5) * step_[m];
  }
  std::vector<double> axis(std::size_t m) const {
    std::vector<double> c(n_[m]);
    for (std::size_t i = 0; i < n_[m]; ++i) c[i] = coord(m, i);
    return c;
  }
  std::vector<double> node(std::size_t flat) const {
    std::vector<double> x(dim());
    for (std::size_t m = dim(); m-- > 0;) {
      x[m] = coord(m, flat % n_[m]);
      flat /= n_[m];
    }
    return x;
  }
  std::vector<double> weights() const { return std::vector<double>(size_, cell_volume_); }

  /// The same lattice extended by whole cells so that each side grows by at
  /// least pad.
  EvalGrid padded(double pad) const {
    std::vector<double> lo = lo_, hi = hi_;
    std::vector<std::size_t> n = n_;
    for (std::size_t m = 0; m < dim(); ++m) {
      const auto extra = static_cast<std::size_t>(std::ceil(pad / step_[m] - 1e-9));
      lo[m] -= static_cast<double>(extra) * step_[m];
      hi[m] += static_cast<double>(extra) * step_[m];
      n[m] += 2 * extra;
    }
    return EvalGrid(lo, hi, n);
  }

  bool same_as(const EvalGrid& o) const { return lo_ == o.lo_ && hi_ == o.hi_ && n_ == o.n_; }

 private:
  std::vector<double> lo_, hi_;
  std::vector<std::size_t> n_;
  std::vector<double> step_;
  double cell_volume_ = 0.0;
  std::size_t size_ = 0;
};

struct DensityEstimate {
  EvalGrid grid;
  std::vector<double> values;
  std::vector<double> h;
  std::optional<std::vector<double>> eta;
  std::string model_label;
  double T = 0.0;
  double dt = 0.0;
  std::uint64_t seed = 0;
};

/// Accumulates sum_k prod_m phi_m(x_m - X_k^m) over grid nodes x, visiting for
/// each sample only the nodes inside the separable support. phi(m, t) must
/// vanish for |t| > support[m].
template <class Factor>
class GridAccumulator {
 public:
  GridAccumulator(const EvalGrid& grid, std::vector<double> support, Factor phi)
      : grid_(grid), support_(std::move(support)), phi_(std::move(phi)), sums_(grid.size(), 0.0) {
    const std::size_t d = grid.dim();
    if (support_.size() != d) throw DimensionMismatch("support length differs from grid dimension");
    first_.resize(d);
    vals_.resize(d);
    stride_.assign(d, 1);
    for (std::size_t m = d - 1; m-- > 0;) stride_[m] = stride_[m + 1] * grid.nodes()[m + 1];
  }

  void add(std::span<const double> X) {
    const std::size_t d = grid_.dim();
    if (X.size() != d) throw DimensionMismatch("sample dimension differs from grid dimension");
    ++count_;
    for (std::size_t m = 0; m < d; ++m) {
      const double s = support_[m], step = grid_.step(m), lo = grid_.lo()[m];
      const auto n = static_cast<long>(grid_.nodes()[m]);
      // One extra node on each side; phi decides exact membership.
      long a = static_cast<long>(std::floor((X[m] - s - lo) / step - 0.5)) - 1;
      long b = static_cast<long>(std::ceil((X[m] + s - lo) / step - 0.5)) + 1;
      a = std::max(a, 0L);
      b = std::min(b, n - 1);
      vals_[m].clear();
      if (a > b) return;
      first_[m] = static_cast<std::size_t>(a);
      for (long i = a; i <= b; ++i) vals_[m].push_back(phi_(m, grid_.coord(m, static_cast<std::size_t>(i)) - X[m]));
    }
    scatter(0, 0, 1.0);
  }

  std::size_t count() const noexcept { return count_; }
  const std::vector<double>& sums() const noexcept { return sums_; }

 private:
  void scatter(std::size_t m, std::size_t base, double prod) {
    const std::size_t d = grid_.dim();
    const std::size_t off = base + first_[m] * stride_[m];
    if (m + 1 == d) {
      double* out = sums_.data() + off;
      for (std::size_t i = 0; i < vals_[m].size(); ++i) out[i] += prod * vals_[m][i];
      return;
    }
    for (std::size_t i = 0; i < vals_[m].size(); ++i) {
      const double v = vals_[m][i];
      if (v != 0.0) scatter(m + 1, off + i * stride_[m], prod * v);
    }
  }

  EvalGrid grid_;
  std::vector<double> support_;
  Factor phi_;
  std::vector<double> sums_;
  std::vector<std::size_t> first_, stride_;
  std::vector<std::vector<double>> vals_;
  std::size_t count_ = 0;
};

namespace detail {

inline void check_bandwidth(const std::vector<double>& h, std::size_t d, const char* name) {
  if (h.size() != d)
    throw DimensionMismatch(std::string(name) + " has " + std::to_string(h.size()) +
                            " components, expected " + std::to_string(d));
  for (double v : h)
    if (!(v > 0.0 && v <= 1.0))
      throw InvalidArgument(std::string(name) + " components must lie in (0, 1], got " + std::to_string(v));
}

}  // namespace detail

/// Streaming form of the plain estimator: feed samples, then finish().
class DensityAccumulator {
 public:
  DensityAccumulator(const Kernel& kernel, std::vector<double> h, const EvalGrid& grid)
      : h_(h), acc_(grid, h, Factor{&kernel, h}) {
    detail::check_bandwidth(h_, grid.dim(), "bandwidth h");
  }
  void add(std::span<const double> x) { acc_.add(x); }
  /// Values of (1 / (T prod h)) sum_k dt prod_m K((x_m - X_k^m) / h_m) with T = count * dt.
  std::vector<double> finish() const {
    std::vector<double> v = acc_.sums();
    double ph = 1.0;
    for (double x : h_) ph *= x;
    const double scale = 1.0 / (static_cast<double>(acc_.count()) * ph);
    for (double& x : v) x *= scale;
    return v;
  }

 private:
  struct Factor {
    const Kernel* k;
    std::vector<double> h;
    double operator()(std::size_t m, double t) const { return (*k)(t / h[m]); }
  };
  std::vector<double> h_;
  GridAccumulator<Factor> acc_;
};

/// Streaming form of the convolved estimator.
class ConvolvedAccumulator {
 public:
  ConvolvedAccumulator(const Kernel& kernel, std::vector<double> h, std::vector<double> eta,
                       const EvalGrid& grid)
      : acc_(grid, support(h, eta), Factor{&kernel, h, eta}) {
    detail::check_bandwidth(h, grid.dim(), "bandwidth h");
    detail::check_bandwidth(eta, grid.dim(), "bandwidth eta");
  }
  void add(std::span<const double> x) { acc_.add(x); }
  std::vector<double> finish() const {
    std::vector<double> v = acc_.sums();
    const double scale = 1.0 / static_cast<double>(acc_.count());
    for (double& x : v) x *= scale;
    return v;
  }

 private:
  static std::vector<double> support(const std::vector<double>& h, const std::vector<double>& eta) {
    std::vector<double> s(h.size());
    for (std::size_t i = 0; i < h.size() && i < eta.size(); ++i) s[i] = h[i] + eta[i];
    return s;
  }
  struct Factor {
    const Kernel* k;
    std::vector<double> h, eta;
    double operator()(std::size_t m, double t) const { return k->convolved(-t, h[m], eta[m]); }
  };
  GridAccumulator<Factor> acc_;
};

namespace detail {

inline void check_traj_grid(const Trajectory& traj, const EvalGrid& grid) {
  if (traj.dim != grid.dim())
    throw DimensionMismatch("trajectory dimension " + std::to_string(traj.dim) + " differs from grid dimension " +
                            std::to_string(grid.dim()));
  if (traj.n_steps == 0) throw InvalidArgument("trajectory is empty");
}

inline DensityEstimate make_estimate(const Trajectory& traj, const EvalGrid& grid, std::vector<double> h) {
  DensityEstimate e;
  e.grid = grid;
  e.h = std::move(h);
  e.model_label = traj.model_label;
  e.T = traj.T();
  e.dt = traj.dt;
  e.seed = traj.seed;
  return e;
}

}  // namespace detail

/// Kernel estimator of the invariant density on the grid nodes; the time
/// integral is the left Riemann sum over the trajectory samples.
inline DensityEstimate estimate_density(const Trajectory& traj, const Kernel& kernel,
                                        const std::vector<double>& h, const EvalGrid& grid) {
  detail::check_traj_grid(traj, grid);
  DensityAccumulator acc(kernel, h, grid);
  for (std::size_t k = 0; k < traj.n_steps; ++k) acc.add(traj.row(k));
  DensityEstimate e = detail::make_estimate(traj, grid, h);
  e.values = acc.finish();
  return e;
}

/// (1/T) integral of (K_h * K_eta)(X_u - x) du on the grid nodes.
inline DensityEstimate estimate_density_convolved(const Trajectory& traj, const Kernel& kernel,
                                                  const std::vector<double>& h, const std::vector<double>& eta,
                                                  const EvalGrid& grid) {
  detail::check_traj_grid(traj, grid);
  ConvolvedAccumulator acc(kernel, h, eta, grid);
  for (std::size_t k = 0; k < traj.n_steps; ++k) acc.add(traj.row(k));
  DensityEstimate e = detail::make_estimate(traj, grid, h);
  e.eta = eta;
  e.values = acc.finish();
  return e;
}

/// sum_i w_i (f_i - g_i)^2, summed pairwise.
inline double squared_l2_on_A(std::span<const double> f, std::span<const double> g, const EvalGrid& grid) {
  if (f.size() != grid.size() || g.size() != grid.size())
    throw DimensionMismatch("l2_distance_on_A: value arrays do not match the grid size " +
                            std::to_string(grid.size()));
  std::vector<double> sq(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) sq[i] = (f[i] - g[i]) * (f[i] - g[i]);
  return grid.cell_volume() * pairwise_sum(sq);
}

inline double l2_distance_on_A(std::span<const double> f, std::span<const double> g, const EvalGrid& grid) {
  return std::sqrt(squared_l2_on_A(f, g, grid));
}

/// Midpoint-rule integral of grid values.
inline double grid_integral(std::span<const double> v, const EvalGrid& grid) {
  if (v.size() != grid.size()) throw DimensionMismatch("grid_integral: size mismatch");
  return grid.cell_volume() * pairwise_sum(v);
}

}  // namespace ejdke
