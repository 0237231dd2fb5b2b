#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "ejdke/error.hpp"
#include "ejdke/numeric.hpp"

namespace ejdke {

/// Truncated alpha-stable-type Levy density on R^d,
///
///   F(z) = c |z|^{-(d+alpha)} exp(-taper |z|) w(z/|z|)   for trunc_low <= |z| <= trunc_high,
///
/// and zero elsewhere. The direction weight w(u) = (1 + skew u_1) / (1 + |skew|)
/// never exceeds one, so F(z) <= c / |z|^{d+alpha} holds everywhere.
struct LevySpec {
  double alpha = 0.5;
  double intensity = 0.05;
  double trunc_low = 1e-2;
  double trunc_high = 3.0;  // +inf allowed when taper > 0
  double taper = 0.0;
  double skew = 0.0;

  bool symmetric() const noexcept { return skew == 0.0; }

  void validate() const {
    if (!(alpha > 0.0 && alpha < 2.0))
      throw InvalidArgument("levy: alpha must lie in (0, 2), got " + std::to_string(alpha));
    if (!(intensity > 0.0) || !std::isfinite(intensity))
      throw InvalidArgument("levy: intensity must be positive and finite");
    if (!(trunc_low > 0.0) || !std::isfinite(trunc_low))
      throw InvalidArgument("levy: trunc_low must be positive and finite");
    if (!(trunc_low < trunc_high))
      throw InvalidArgument("levy: trunc_low must be below trunc_high");
    if (!(taper >= 0.0) || !std::isfinite(taper))
      throw InvalidArgument("levy: taper must be nonnegative and finite");
    if (std::isinf(trunc_high) && taper == 0.0)
      throw InvalidArgument("levy: an infinite trunc_high needs a positive taper");
    if (!(std::abs(skew) <= 1.0)) throw InvalidArgument("levy: skew must lie in [-1, 1]");
    if (alpha == 1.0 && !symmetric())
      throw InvalidArgument("levy: alpha = 1 requires a symmetric Levy density");
  }

  /// c r^{-1-alpha} e^{-taper r}: the radial density including the r^{d-1}
  /// Jacobian, before the direction weight.
  double radial_weight(double r) const noexcept {
    if (r < trunc_low || r > trunc_high) return 0.0;
    return intensity * std::pow(r, -1.0 - alpha) * std::exp(-taper * r);
  }

  double direction_weight(double u1) const noexcept {
    return (1.0 + skew * u1) / (1.0 + std::abs(skew));
  }

  double density(std::span<const double> z) const noexcept {
    double r2 = 0.0;
    for (double v : z) r2 += v * v;
    const double r = std::sqrt(r2);
    if (r < trunc_low || r > trunc_high) return 0.0;
    const double d = static_cast<double>(z.size());
    return intensity * std::pow(r, -d - alpha) * std::exp(-taper * r) * direction_weight(z[0] / r);
  }
};

struct LevyQuadratureConfig {
  double rel_tol = 1e-10;
  double abs_tol = 1e-13;
  int max_level = 2;       // node counts double per level
  int base_radial = 8;     // Gauss-Legendre nodes per radial panel at level 0
  int base_polar = 8;      // per polar angle at level 0
  int base_azimuth = 16;   // trapezoid nodes in the azimuth at level 0
  int max_panels = 200;
};

namespace detail {

/// Radial panel boundaries: geometric from trunc_low with ratio two, panel
/// width capped at 2 / taper when tapered. For an infinite upper truncation the
/// list is open ended and the caller decides when to stop.
struct RadialPanels {
  const LevySpec& levy;
  double next_upper(double lo) const {
    double width = lo;
    if (levy.taper > 0.0) width = std::min(width, 2.0 / levy.taper);
    return std::min(lo + width, levy.trunc_high);
  }
};

/// Quadrature rule on the unit sphere S^{d-1} in hyperspherical coordinates.
/// Nodes are stored row-major (one unit vector per row); weights sum to the
/// sphere's surface area.
struct SphereRule {
  std::size_t dim = 0;
  std::vector<double> nodes;
  std::vector<double> weights;
  std::size_t size() const { return weights.size(); }
};

inline SphereRule make_sphere_rule(std::size_t d, int level, const LevyQuadratureConfig& cfg) {
  SphereRule rule;
  rule.dim = d;
  if (d == 1) {
    rule.nodes = {-1.0, 1.0};
    rule.weights = {1.0, 1.0};
    return rule;
  }
  const std::size_t scale = std::size_t{1} << level;
  // Higher dimensions get coarser per-angle rules to bound the node count.
  const std::size_t polar_n = std::max<std::size_t>(4, cfg.base_polar * scale / (d > 3 ? 2 : 1));
  const std::size_t azim_n = std::max<std::size_t>(8, cfg.base_azimuth * scale / (d > 3 ? 2 : 1));
  const QuadratureRule gl = gauss_legendre(polar_n);
  const std::size_t n_polar = d - 2;

  std::vector<std::size_t> idx(n_polar, 0);
  std::vector<double> u(d);
  for (;;) {
    double w = 1.0;
    double sin_prod = 1.0;
    for (std::size_t k = 0; k < n_polar; ++k) {
      const double theta = 0.5 * std::numbers::pi * (gl.nodes[idx[k]] + 1.0);
      const double wt = 0.5 * std::numbers::pi * gl.weights[idx[k]];
      u[k] = sin_prod * std::cos(theta);
      w *= wt * std::pow(std::sin(theta), static_cast<double>(d - 2 - k));
      sin_prod *= std::sin(theta);
    }
    for (std::size_t j = 0; j < azim_n; ++j) {
      const double phi = 2.0 * std::numbers::pi * (static_cast<double>(j) + 0.5) /
                         static_cast<double>(azim_n);
      u[d - 2] = sin_prod * std::cos(phi);
      u[d - 1] = sin_prod * std::sin(phi);
      rule.nodes.insert(rule.nodes.end(), u.begin(), u.end());
      rule.weights.push_back(w * 2.0 * std::numbers::pi / static_cast<double>(azim_n));
    }
    std::size_t k = 0;
    while (k < n_polar && ++idx[k] == polar_n) idx[k++] = 0;
    if (k == n_polar) break;
  }
  return rule;
}

}  // namespace detail

struct LevyIntegral {
  std::vector<double> value;
  double residual = 0.0;
  int level = 0;
};

/// Integrates g(z) F(z) dz over the truncated support, where g maps R^d to
/// R^m. Panels and angular rules are refined level by level until two
/// successive levels agree; non-convergence or a non-finite value throws
/// NumericalError carrying the last residual.
inline LevyIntegral levy_integral(
    const LevySpec& levy, std::size_t d, std::size_t m,
    const std::function<void(std::span<const double> z, std::span<double> out)>& g,
    const LevyQuadratureConfig& cfg = {}) {
  const detail::RadialPanels panels{levy};
  std::vector<double> z(d), out(m);

  auto run_level = [&](int level, std::vector<double>& panel_upper, bool open_ended) {
    const detail::SphereRule sphere = detail::make_sphere_rule(d, level, cfg);
    const QuadratureRule gl = gauss_legendre(static_cast<std::size_t>(cfg.base_radial) << level);
    std::vector<double> total(m, 0.0), panel_sum(m);
    double lo = levy.trunc_low;
    std::size_t p = 0;
    int quiet = 0;
    double last_contrib = 0.0;
    for (;; ++p) {
      double hi;
      if (!open_ended) {
        if (p == panel_upper.size()) break;
        hi = panel_upper[p];
      } else {
        if (lo >= levy.trunc_high) break;
        if (p >= static_cast<std::size_t>(cfg.max_panels))
          throw NumericalError("levy quadrature: jump integral did not converge within " +
                                   std::to_string(cfg.max_panels) + " radial panels",
                               last_contrib);
        hi = panels.next_upper(lo);
        panel_upper.push_back(hi);
      }
      std::fill(panel_sum.begin(), panel_sum.end(), 0.0);
      const double half = 0.5 * (hi - lo), mid = 0.5 * (hi + lo);
      for (std::size_t i = 0; i < gl.nodes.size(); ++i) {
        const double r = mid + half * gl.nodes[i];
        const double rw = half * gl.weights[i] * levy.radial_weight(r);
        if (rw == 0.0) continue;
        for (std::size_t s = 0; s < sphere.size(); ++s) {
          const double* u = &sphere.nodes[s * d];
          const double w = rw * sphere.weights[s] * levy.direction_weight(u[0]);
          for (std::size_t k = 0; k < d; ++k) z[k] = r * u[k];
          g(z, out);
          for (std::size_t k = 0; k < m; ++k) panel_sum[k] += w * out[k];
        }
      }
      double contrib = 0.0, scale = 0.0;
      for (std::size_t k = 0; k < m; ++k) {
        if (!std::isfinite(panel_sum[k]))
          throw NumericalError("levy quadrature: non-finite integrand on panel [" +
                                   std::to_string(lo) + ", " + std::to_string(hi) + "]",
                               std::numeric_limits<double>::infinity());
        total[k] += panel_sum[k];
        contrib = std::max(contrib, std::abs(panel_sum[k]));
        scale = std::max(scale, std::abs(total[k]));
      }
      last_contrib = contrib;
      lo = hi;
      if (open_ended && std::isinf(levy.trunc_high)) {
        quiet = (contrib <= cfg.rel_tol * 1e-2 * scale + cfg.abs_tol * 1e-2) ? quiet + 1 : 0;
        if (quiet >= 3) break;
      }
    }
    return total;
  };

  std::vector<double> uppers;
  std::vector<double> prev = run_level(0, uppers, true);
  double residual = std::numeric_limits<double>::infinity();
  for (int level = 1; level <= cfg.max_level; ++level) {
    std::vector<double> cur = run_level(level, uppers, false);
    residual = 0.0;
    double scale = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
      residual = std::max(residual, std::abs(cur[k] - prev[k]));
      scale = std::max(scale, std::abs(cur[k]));
    }
    prev = std::move(cur);
    if (residual <= cfg.abs_tol + cfg.rel_tol * scale) return {prev, residual, level};
  }
  throw NumericalError("levy quadrature: refinement did not converge (residual " +
                           std::to_string(residual) + ")",
                       residual);
}

/// One-dimensional radial integral of q(r) * radial_weight(r) over the
/// truncated support, with the same panel scheme and level refinement.
inline double radial_integral(const LevySpec& levy, const std::function<double(double)>& q,
                              const LevyQuadratureConfig& cfg = {}) {
  // Reuse the d = 1 machinery with a symmetric two-point "sphere" and fold
  // the direction weights out: on {-1, +1} they sum to 2 / (1 + |skew|).
  const double dir_sum = 2.0 / (1.0 + std::abs(levy.skew));
  const LevyIntegral li = levy_integral(
      levy, 1, 1,
      [&](std::span<const double> z, std::span<double> out) { out[0] = q(std::abs(z[0])); },
      cfg);
  return li.value[0] / dir_sum;
}

/// Total mass lambda = integral of F over the truncated support.
inline double levy_total_mass(const LevySpec& levy, std::size_t d,
                              const LevyQuadratureConfig& cfg = {}) {
  return unit_sphere_area(d) / (1.0 + std::abs(levy.skew)) *
         radial_integral(levy, [](double) { return 1.0; }, cfg);
}

/// Compensation drift m_F = integral of z F(z) dz. Exactly zero for symmetric
/// specifications; otherwise it points along the first axis.
inline std::vector<double> levy_compensator(const LevySpec& levy, std::size_t d,
                                            const LevyQuadratureConfig& cfg = {}) {
  std::vector<double> m(d, 0.0);
  if (levy.symmetric()) return m;
  // Mean of u_1 * w(u) over the sphere is skew / (d (1 + |skew|)) times its area.
  m[0] = unit_sphere_area(d) * levy.skew / (static_cast<double>(d) * (1.0 + std::abs(levy.skew))) *
         radial_integral(levy, [](double r) { return r; }, cfg);
  return m;
}

/// Exponential moment integral of |z|^2 e^{eps |z|} F(z) dz.
inline double levy_exponential_moment(const LevySpec& levy, std::size_t d, double eps,
                                      const LevyQuadratureConfig& cfg = {}) {
  return unit_sphere_area(d) / (1.0 + std::abs(levy.skew)) *
         radial_integral(levy, [eps](double r) { return r * r * std::exp(eps * r); }, cfg);
}

/// Per-axis variance rate of the jumps with |z| < trunc_low that truncation
/// removes: (1/d) integral over |z| < eps of |z|^2 c |z|^{-d-alpha} dz.
inline double levy_small_jump_variance(const LevySpec& levy, std::size_t d) {
  const double e = levy.trunc_low;
  return unit_sphere_area(d) * levy.intensity * std::pow(e, 2.0 - levy.alpha) /
         (static_cast<double>(d) * (2.0 - levy.alpha) * (1.0 + std::abs(levy.skew)));
}

}  // namespace ejdke
