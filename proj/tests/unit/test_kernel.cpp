#include <gtest/gtest.h>

#include <random>

#include "ejdke/kernel.hpp"
#include "../support/oracles.hpp"

using ejdke::Kernel;

namespace {

double moment(const Kernel& K, int l) {
  return oracle::simpson([&](double x) { return std::pow(x, l) * K(x); }, -1.0, 1.0, 10000);
}

}  // namespace

TEST(Kernel, MomentSuite) {
  for (int M : {0, 1, 2, 3, 5}) {
    const Kernel K(M);
    EXPECT_NEAR(moment(K, 0), 1.0, 1e-10) << "M = " << M;
    for (int l = 1; l <= M; ++l) EXPECT_NEAR(moment(K, l), 0.0, 1e-8) << "M = " << M << ", l = " << l;
  }
}

TEST(Kernel, MatchesLegendreFormula) {
  for (int M : {0, 2, 3, 5, 8})
    for (double x = -1.0; x <= 1.0; x += 0.01) EXPECT_NEAR(Kernel(M)(x), oracle::kernel(M, x), 1e-13);
}

TEST(Kernel, OrderZeroIsTheBox) {
  const Kernel K(0);
  for (double x : {-1.0, -0.3, 0.0, 0.77, 1.0}) EXPECT_EQ(K(x), 0.5);
  EXPECT_EQ(K.degree(), 0u);
  EXPECT_NEAR(K.l1_norm(), 1.0, 1e-15);
  EXPECT_NEAR(K.sup_norm(), 0.5, 1e-15);
}

TEST(Kernel, FirstMomentVanishesBySymmetry) {
  const Kernel K(1);
  for (double x : {0.1, 0.4, 0.9}) EXPECT_EQ(K(x), K(-x));
  EXPECT_NEAR(moment(K, 1), 0.0, 1e-15);
}

TEST(Kernel, ZeroOutsideSupport) {
  for (int M : {0, 2, 5})
    for (double x : {1.0000001, 1.5, -2.0, 1e9, -1.01})
      EXPECT_EQ(Kernel(M)(x), 0.0);
}

TEST(Kernel, HigherOrderTakesNegativeValues) {
  for (int M : {2, 3, 5}) {
    const Kernel K(M);
    double lo = 0.0;
    for (double x = -1.0; x <= 1.0; x += 1e-3) lo = std::min(lo, K(x));
    EXPECT_LT(lo, 0.0) << "M = " << M;
  }
  const Kernel K3(3);
  EXPECT_LT(std::abs(moment(K3, 2)), 1e-8);
  EXPECT_LT(std::abs(moment(K3, 3)), 1e-8);
}

TEST(Kernel, NormsAgainstFineRiemannSums) {
  for (int M : {2, 3, 5}) {
    const Kernel K(M);
    const int n = 2'000'000;
    double l1 = 0.0, sup = 0.0;
    for (int i = 0; i < n; ++i) {
      const double x = -1.0 + (i + 0.5) * 2.0 / n;
      l1 += std::abs(K(x)) * 2.0 / n;
      sup = std::max(sup, std::abs(K(x)));
    }
    EXPECT_NEAR(K.l1_norm(), l1, 1e-8);
    EXPECT_GE(K.sup_norm(), sup - 1e-15);
    EXPECT_NEAR(K.sup_norm(), sup, 1e-9);
  }
}

TEST(Kernel, L1NormIsScaleInvariant) {
  const Kernel K(3);
  std::vector<double> vals;
  for (double h : {1.0, 0.5, 0.25, 0.1, 1.0 / 3.0}) {
    const int n = 400000;
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
      const double x = -h + (i + 0.5) * 2.0 * h / n;
      s += std::abs(K.scaled(x, h)) * 2.0 * h / n;
    }
    vals.push_back(s);
  }
  for (double v : vals) EXPECT_NEAR(v, vals.front(), 1e-10);
  EXPECT_NEAR(vals.front(), K.l1_norm(), 1e-8);
  EXPECT_DOUBLE_EQ(ejdke::ProductKernel(K, {0.3, 0.7, 1.0}).l1_norm(), std::pow(K.l1_norm(), 3));
}

TEST(Kernel, ConvolutionAgainstDirectQuadrature) {
  const Kernel K(2);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.6, 1.6);
  const double h = 0.7, eta = 0.9;
  for (int i = 0; i < 50; ++i) {
    const double t = u(rng);
    const double lo = std::max(-eta, t - h), hi = std::min(eta, t + h);
    const double ref = lo < hi ? oracle::simpson(
                                     [&](double s) { return oracle::kernel(2, (t - s) / h) / h * oracle::kernel(2, s / eta) / eta; },
                                     lo, hi, 2000)
                               : 0.0;
    EXPECT_NEAR(K.convolved(t, h, eta), ref, 1e-12);
  }
}

TEST(Kernel, ConvolutionCommutes) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-2.0, 2.0), bw(0.05, 1.0);
  for (int M : {2, 5}) {
    const Kernel K(M);
    for (int i = 0; i < 200; ++i) {
      const double t = u(rng), h = bw(rng), eta = bw(rng);
      EXPECT_NEAR(K.convolved(t, h, eta), K.convolved(t, eta, h), 1e-12);
    }
  }
}

TEST(Kernel, ConvolutionIntegratesToOne) {
  const Kernel K(3);
  for (auto [h, eta] : {std::pair{1.0, 1.0}, {0.5, 0.25}, {0.2, 1.0}}) {
    // The convolution is piecewise polynomial with breaks at +-h +- eta.
    std::vector<double> br{-(h + eta), -std::abs(h - eta), std::abs(h - eta), h + eta};
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < br.size(); ++i)
      s += oracle::simpson([&](double t) { return K.convolved(t, h, eta); }, br[i], br[i + 1], 4000);
    EXPECT_NEAR(s, 1.0, 1e-10);
  }
}

TEST(Kernel, ConvolvedSupport) {
  const Kernel K(2);
  const auto C = ejdke::convolve_kernels(K, {0.5, 0.25}, {0.5, 0.25});
  EXPECT_DOUBLE_EQ(C.support(0), 1.0);
  EXPECT_DOUBLE_EQ(C.support(1), 0.5);
  const std::vector<double> far{1.01, 0.0}, far2{0.0, -0.51};
  EXPECT_EQ(C(far), 0.0);
  EXPECT_EQ(C(far2), 0.0);
  EXPECT_EQ(K.convolved(1.0, 0.5, 0.5), 0.0);
}

TEST(Kernel, ProductKernelValueAndSupBound) {
  const Kernel K(2);
  const std::vector<double> h{0.5, 0.25, 1.0};
  const ejdke::ProductKernel P(K, h);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.1, 1.1);
  double ph = h[0] * h[1] * h[2];
  for (int i = 0; i < 100; ++i) {
    std::vector<double> y{u(rng) * h[0], u(rng) * h[1], u(rng) * h[2]};
    const double ref = oracle::kernel(2, y[0] / h[0]) * oracle::kernel(2, y[1] / h[1]) * oracle::kernel(2, y[2] / h[2]) / ph;
    EXPECT_NEAR(P(y), ref, 1e-12);
    EXPECT_LE(std::abs(P(y)), std::pow(K.sup_norm(), 3) / ph + 1e-12);
  }
  EXPECT_LE(P.sup_norm(), std::pow(K.sup_norm(), 3) / ph + 1e-12);
}

TEST(Kernel, NegativeOrderRejected) { EXPECT_THROW(Kernel(-1), ejdke::InvalidArgument); }

// Young-type bound: ||K_h * g||_A <= ||K_h||_1 ||g||_{2, A~} for g living on
// the enlarged set A~ = A padded by 2 sqrt(d).
TEST(Kernel, YoungBoundOnPaddedGrid) {
  const int M = 2;
  const Kernel K(M);
  const ejdke::EvalGrid A = ejdke::EvalGrid::cube(2, -1.0, 1.0, 24);
  const ejdke::EvalGrid At = A.padded(2.0 * std::sqrt(2.0));
  std::mt19937_64 rng(99);
  std::normal_distribution<double> n01;
  std::uniform_real_distribution<double> bw(0.1, 1.0);
  for (int trial = 0; trial < 30; ++trial) {
    const std::vector<double> h{bw(rng), bw(rng)};
    std::vector<double> g(At.size());
    // Mix rough and smooth test functions.
    const double freq = trial % 3 == 0 ? 0.0 : 3.0 * trial;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const auto x = At.node(i);
      g[i] = trial % 3 == 0 ? n01(rng) : std::cos(freq * x[0]) * std::exp(-x[1] * x[1]) + 0.1 * n01(rng);
    }
    const std::vector<double> conv = oracle::smooth_cells(M, h, g, At, A);
    const std::vector<double> zero(A.size(), 0.0), zt(At.size(), 0.0);
    const double lhs = ejdke::l2_distance_on_A(conv, zero, A);
    const double rhs = std::pow(K.l1_norm(), 2) * ejdke::l2_distance_on_A(g, zt, At);
    EXPECT_LE(lhs, rhs + 1e-9) << "trial " << trial;
  }
}
