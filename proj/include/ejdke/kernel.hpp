#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "ejdke/error.hpp"
#include "ejdke/numeric.hpp"

namespace ejdke {

/// Univariate kernel on [-1, 1] reproducing polynomials up to degree M:
///   K(x) = sum_{j=0}^{M} (2j+1)/2 P_j(0) P_j(x).
/// Only even j contribute, so K is even and is stored as a polynomial in x^2.
class Kernel {
 public:
  explicit Kernel(int order) : order_(order) {
    if (order < 0) throw InvalidArgument("kernel order M must be nonnegative");
    // Power-basis coefficients of P_0..P_M by the three-term recurrence.
    const auto n = static_cast<std::size_t>(order);
    std::vector<std::vector<double>> P(n + 1, std::vector<double>(n + 1, 0.0));
    P[0][0] = 1.0;
    if (n >= 1) P[1][1] = 1.0;
    for (std::size_t k = 2; k <= n; ++k) {
      const double kk = static_cast<double>(k);
      for (std::size_t i = 0; i <= n; ++i) {
        double v = -(kk - 1.0) * P[k - 2][i];
        if (i >= 1) v += (2.0 * kk - 1.0) * P[k - 1][i - 1];
        P[k][i] = v / kk;
      }
    }
    legendre_.assign(n + 1, 0.0);
    std::vector<double> power(n + 1, 0.0);
    for (std::size_t j = 0; j <= n; j += 2) {
      legendre_[j] = (2.0 * static_cast<double>(j) + 1.0) / 2.0 * P[j][0];
      for (std::size_t i = 0; i <= n; ++i) power[i] += legendre_[j] * P[j][i];
    }
    for (std::size_t i = 0; i <= n; i += 2) even_.push_back(power[i]);
    compute_norms();
  }

  int order() const noexcept { return order_; }
  /// Coefficients c_k of x^{2k}.
  const std::vector<double>& even_coeffs() const noexcept { return even_; }
  /// Coefficients of P_j(x) in the Legendre expansion.
  const std::vector<double>& legendre_coeffs() const noexcept { return legendre_; }
  std::size_t degree() const noexcept { return 2 * (even_.size() - 1); }
  double sup_norm() const noexcept { return sup_norm_; }
  double l1_norm() const noexcept { return l1_norm_; }

  double operator()(double x) const noexcept {
    if (!(std::abs(x) <= 1.0)) return 0.0;
    const double x2 = x * x;
    double s = 0.0;
    for (std::size_t k = even_.size(); k-- > 0;) s = s * x2 + even_[k];
    return s;
  }

  /// K_h(x) = K(x / h) / h.
  double scaled(double x, double h) const noexcept { return (*this)(x / h) / h; }

  /// (K_h * K_eta)(t) = integral K_h(t - u) K_eta(u) du, evaluated exactly by
  /// Gauss-Legendre on the overlap of the two supports.
  double convolved(double t, double h, double eta) const {
    const double lo = std::max(-eta, t - h), hi = std::min(eta, t + h);
    if (!(lo < hi)) return 0.0;
    const double half = 0.5 * (hi - lo), mid = 0.5 * (hi + lo);
    double s = 0.0;
    for (std::size_t i = 0; i < conv_rule_.nodes.size(); ++i) {
      const double u = mid + half * conv_rule_.nodes[i];
      s += conv_rule_.weights[i] * (*this)((t - u) / h) * (*this)(u / eta);
    }
    return s * half / (h * eta);
  }

 private:
  void compute_norms() {
    // Integrand of the convolution has degree 2 * degree(); n nodes are exact
    // up to degree 2n - 1.
    conv_rule_ = gauss_legendre(degree() + 2);
    // Sign changes of K on [0, 1] by a fine scan plus bisection, then |K| is
    // integrated exactly piece by piece.
    std::vector<double> breaks{0.0};
    const int scan = 4096;
    double prev = (*this)(0.0);
    for (int i = 1; i <= scan; ++i) {
      const double x = static_cast<double>(i) / scan;
      const double v = (*this)(x);
      if ((prev < 0.0) != (v < 0.0) && i < scan) {
        double a = static_cast<double>(i - 1) / scan, b = x;
        for (int it = 0; it < 200 && b - a > 1e-16; ++it) {
          const double m = 0.5 * (a + b);
          if (((*this)(m) < 0.0) == (prev < 0.0)) a = m; else b = m;
        }
        breaks.push_back(0.5 * (a + b));
      }
      prev = v;
    }
    breaks.push_back(1.0);
    const QuadratureRule rule = gauss_legendre(degree() / 2 + 2);
    l1_norm_ = 0.0;
    for (std::size_t i = 0; i + 1 < breaks.size(); ++i)
      l1_norm_ += std::abs(integrate(rule, breaks[i], breaks[i + 1], [&](double x) { return (*this)(x); }));
    l1_norm_ *= 2.0;
    // Sup norm: scan, then golden-section refinement around each local max of |K|.
    const int n = 20000;
    auto absk = [&](double x) { return std::abs((*this)(x)); };
    sup_norm_ = std::max(absk(0.0), absk(1.0));
    for (int i = 1; i < n; ++i) {
      const double x = static_cast<double>(i) / n, step = 1.0 / n;
      if (absk(x) < absk(x - step) || absk(x) < absk(x + step)) continue;
      double a = x - step, b = x + step;
      const double g = 0.5 * (std::sqrt(5.0) - 1.0);
      for (int it = 0; it < 80; ++it) {
        const double c = b - g * (b - a), e = a + g * (b - a);
        if (absk(c) > absk(e)) b = e; else a = c;
      }
      sup_norm_ = std::max({sup_norm_, absk(x), absk(0.5 * (a + b))});
    }
  }

  int order_;
  std::vector<double> legendre_;
  std::vector<double> even_;
  QuadratureRule conv_rule_;
  double sup_norm_ = 0.0;
  double l1_norm_ = 0.0;
};

inline Kernel build_kernel(int M) { return Kernel(M); }

/// prod_m K_{h_m}(y_m).
class ProductKernel {
 public:
  ProductKernel(const Kernel& base, std::vector<double> h) : base_(base), h_(std::move(h)) {
    for (double v : h_)
      if (!(v > 0.0 && v <= 1.0)) throw InvalidArgument("bandwidths must lie in (0, 1]");
  }
  double operator()(std::span<const double> y) const {
    if (y.size() != h_.size()) throw DimensionMismatch("product kernel: argument dimension");
    double p = 1.0;
    for (std::size_t m = 0; m < h_.size(); ++m) p *= base_.scaled(y[m], h_[m]);
    return p;
  }
  const std::vector<double>& bandwidths() const noexcept { return h_; }
  double l1_norm() const { return std::pow(base_.l1_norm(), static_cast<double>(h_.size())); }
  double sup_norm() const {
    double p = 1.0;
    for (double v : h_) p *= base_.sup_norm() / v;
    return p;
  }

 private:
  const Kernel& base_;
  std::vector<double> h_;
};

/// prod_j (K_{h_j} * K_{eta_j})(y_j).
class ConvolvedKernel {
 public:
  ConvolvedKernel(const Kernel& base, std::vector<double> h, std::vector<double> eta)
      : base_(base), h_(std::move(h)), eta_(std::move(eta)) {
    if (h_.size() != eta_.size()) throw DimensionMismatch("convolve_kernels: h and eta differ in length");
    for (std::size_t j = 0; j < h_.size(); ++j)
      if (!(h_[j] > 0.0 && h_[j] <= 1.0 && eta_[j] > 0.0 && eta_[j] <= 1.0))
        throw InvalidArgument("bandwidths must lie in (0, 1]");
  }
  double factor(std::size_t j, double t) const { return base_.convolved(t, h_[j], eta_[j]); }
  double operator()(std::span<const double> y) const {
    if (y.size() != h_.size()) throw DimensionMismatch("convolved kernel: argument dimension");
    double p = 1.0;
    for (std::size_t j = 0; j < h_.size(); ++j) p *= factor(j, y[j]);
    return p;
  }
  /// Half-width of the support of factor j.
  double support(std::size_t j) const { return h_[j] + eta_[j]; }

 private:
  const Kernel& base_;
  std::vector<double> h_, eta_;
};

inline ConvolvedKernel convolve_kernels(const Kernel& base, std::vector<double> h, std::vector<double> eta) {
  return ConvolvedKernel(base, std::move(h), std::move(eta));
}

}  // namespace ejdke
