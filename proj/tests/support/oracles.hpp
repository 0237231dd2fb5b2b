#pragma once

// Reference computations for the tests. Nothing here calls into the library's
// numerical paths except for plain data types.

#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ejdke/estimator.hpp"
#include "ejdke/simulate.hpp"

namespace oracle {

/// Legendre P_j(x) by the three-term recurrence in x.
inline double legendre(int j, double x) {
  if (j == 0) return 1.0;
  double p0 = 1.0, p1 = x;
  for (int k = 2; k <= j; ++k) {
    const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
    p0 = p1;
    p1 = p2;
  }
  return p1;
}

/// K(x) = sum_{j <= M} (2j+1)/2 P_j(0) P_j(x) on [-1, 1].
inline double kernel(int M, double x) {
  if (std::abs(x) > 1.0) return 0.0;
  double s = 0.0;
  for (int j = 0; j <= M; ++j) s += (2.0 * j + 1.0) / 2.0 * legendre(j, 0.0) * legendre(j, x);
  return s;
}

/// Composite Simpson with n (even) intervals.
inline double simpson(const std::function<double(double)>& f, double a, double b, int n) {
  if (n % 2) ++n;
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
  return s * h / 3.0;
}

/// Double loop over nodes and samples.
inline std::vector<double> naive_estimate(const ejdke::Trajectory& traj, int M, const std::vector<double>& h,
                                          const ejdke::EvalGrid& grid) {
  std::vector<double> out(grid.size(), 0.0);
  double ph = 1.0;
  for (double v : h) ph *= v;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const std::vector<double> x = grid.node(i);
    double s = 0.0;
    for (std::size_t k = 0; k < traj.n_steps; ++k) {
      double p = 1.0;
      for (std::size_t m = 0; m < traj.dim; ++m) p *= kernel(M, (x[m] - traj.states[k * traj.dim + m]) / h[m]);
      s += p * traj.dt;
    }
    out[i] = s / (traj.T() * ph);
  }
  return out;
}

/// integral of K_h over [a, b].
inline double kernel_mass(int M, double h, double a, double b) {
  a = std::max(a, -h);
  b = std::min(b, h);
  if (!(a < b)) return 0.0;
  return simpson([&](double u) { return kernel(M, u / h) / h; }, a, b, 64);
}

/// (K_h * g)(x) at the nodes of `eval` for g piecewise constant on the cells of
/// `outer`, by successive mode products with the per-axis cell masses.
inline std::vector<double> smooth_cells(int M, const std::vector<double>& h, const std::vector<double>& g,
                                        const ejdke::EvalGrid& outer, const ejdke::EvalGrid& eval) {
  const std::size_t d = outer.dim();
  std::vector<std::size_t> shape = outer.nodes();
  std::vector<double> cur = g;
  for (std::size_t m = 0; m < d; ++m) {
    const std::size_t nin = shape[m], nout = eval.nodes()[m];
    Eigen::MatrixXd W(nout, nin);
    for (std::size_t i = 0; i < nout; ++i)
      for (std::size_t c = 0; c < nin; ++c) {
        const double x = eval.coord(m, i), ctr = outer.coord(m, c), half = 0.5 * outer.step(m);
        // integral over y in the cell of K_h(x - y)
        W(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) =
            kernel_mass(M, h[m], x - ctr - half, x - ctr + half);
      }
    std::size_t before = 1, after = 1;
    for (std::size_t q = 0; q < m; ++q) before *= shape[q];
    for (std::size_t q = m + 1; q < d; ++q) after *= shape[q];
    std::vector<double> next(before * nout * after, 0.0);
    for (std::size_t b = 0; b < before; ++b)
      for (std::size_t a = 0; a < after; ++a)
        for (std::size_t i = 0; i < nout; ++i) {
          double s = 0.0;
          for (std::size_t c = 0; c < nin; ++c)
            s += W(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) * cur[(b * nin + c) * after + a];
          next[(b * nout + i) * after + a] = s;
        }
    cur = std::move(next);
    shape[m] = nout;
  }
  return cur;
}

/// Worst-case error of the midpoint sum of K_h over a covering 1-d grid with
/// the given step: the two jumps at +-h cost |K(1)| step / (2h) each, the cells
/// inside the support step^3 / 24 sup|K_h''| each (a straddling cell counts as
/// one of those after extending the polynomial across the jump).
inline double midpoint_mass_error(int M, double h, double step) {
  double k2 = 0.0;
  const double e = 1e-3;
  for (int i = 0; i <= 2000; ++i) {
    const double x = -1.0 + e + (2.0 - 2.0 * e) * i / 2000.0;
    k2 = std::max(k2, std::abs(kernel(M, std::min(x + e, 1.0)) - 2.0 * kernel(M, x) + kernel(M, std::max(x - e, -1.0))) / (e * e));
  }
  k2 *= 1.01;  // the polynomial's second difference is exact up to rounding for M <= 3
  const double jumps = std::abs(kernel(M, 1.0)) * step / h;
  const double smooth = (2.0 * h / step + 2.0) * std::pow(step, 3) / 24.0 * k2 / std::pow(h, 3);
  return jumps + smooth;
}

inline ejdke::Trajectory make_trajectory(std::size_t d, double dt, const std::vector<double>& states,
                                         std::string label = "test") {
  ejdke::Trajectory t;
  t.dim = d;
  t.dt = dt;
  t.n_steps = states.size() / d;
  t.states = states;
  t.model_label = std::move(label);
  return t;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// CSV body without the leading "# config:" line.
inline std::string csv_body(const std::filesystem::path& p) {
  const std::string s = slurp(p);
  if (s.rfind("# config:", 0) == 0) return s.substr(s.find('\n') + 1);
  return s;
}

inline std::filesystem::path temp_dir(const std::string& tag) {
  static std::mt19937_64 rng(std::random_device{}());
  auto p = std::filesystem::temp_directory_path() / ("ejdke_" + tag + "_" + std::to_string(rng()));
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace oracle
