#include <gtest/gtest.h>

#include "ejdke/model.hpp"
#include "ejdke/rates.hpp"
#include "ejdke/reference.hpp"

using namespace ejdke;

TEST(RateBandwidth, IsotropicAndAnisotropicExamples) {
  const std::vector<double> a = rate_exponents({{2, 2, 2}}, 3);
  for (double v : a) EXPECT_NEAR(v, 0.2, 1e-15);
  const auto h = rate_optimal_bandwidth({{2, 2, 2}}, 3, 1e5);
  for (double v : h) EXPECT_NEAR(v, 0.1, 1e-12);

  const SmoothnessSpec s{{1, 2, 2}};
  EXPECT_NEAR(s.beta_bar(), 1.5, 1e-15);
  const std::vector<double> b = rate_exponents(s, 3);
  EXPECT_NEAR(b[0], 0.375, 1e-15);
  EXPECT_NEAR(b[1], 0.1875, 1e-15);
  EXPECT_NEAR(b[2], 0.1875, 1e-15);
  EXPECT_NEAR(theoretical_exponent(3, s.beta_bar()), -0.75, 1e-15);
  EXPECT_NEAR(theoretical_exponent(3, 2.0), -0.8, 1e-15);
}

TEST(RateBandwidth, BalanceIdentity) {
  for (const std::vector<double>& beta :
       {std::vector<double>{1, 2, 3}, std::vector<double>{0.5, 4, 1.5, 2}, std::vector<double>{3, 3, 1, 0.7, 2}}) {
    const std::size_t d = beta.size();
    const auto a = rate_exponents({beta}, d);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) EXPECT_NEAR(beta[i] * a[i], beta[j] * a[j], 1e-14);
    double sum = 0.0;
    for (double v : a) sum += v;
    const double bb = SmoothnessSpec{beta}.beta_bar();
    EXPECT_NEAR(sum, static_cast<double>(d) / (2.0 * bb + static_cast<double>(d) - 2.0), 1e-14);
  }
}

TEST(RateBandwidth, Errors) {
  EXPECT_THROW(rate_exponents({{2, 2}}, 2), InvalidArgument);
  EXPECT_THROW(rate_exponents({{2, 2}}, 3), DimensionMismatch);
  EXPECT_THROW(rate_exponents({{2, 0, 2}}, 3), InvalidArgument);
}

TEST(TheoreticalRate, Cases) {
  const double T = 1e4, lt = std::log(T);
  EXPECT_NEAR(theoretical_rate(1, 0.5, 2.0, T), std::pow(lt, 1.25) / T, 1e-15);
  EXPECT_NEAR(theoretical_rate(1, 1.5, 2.0, T), lt / T, 1e-15);
  EXPECT_NEAR(theoretical_rate(2, 1.0, 2.0, T), lt / T, 1e-15);
  EXPECT_NEAR(theoretical_rate(3, 1.0, 2.0, T), std::pow(T, -0.8), 1e-15);
  EXPECT_THROW(theoretical_rate(3, 2.0, 2.0, T), InvalidArgument);
  EXPECT_THROW(theoretical_rate(3, 1.0, 2.0, 1.0), InvalidArgument);
}

TEST(TheoreticalRate, DecreasingInT) {
  for (std::size_t d : {1, 2, 3, 5})
    for (double alpha : {0.3, 1.0, 1.9}) {
      double prev = std::numeric_limits<double>::infinity();
      for (double T = 10.0; T < 1e8; T *= 1.7) {
        const double r = theoretical_rate(d, alpha, 1.5, T);
        EXPECT_LT(r, prev);
        prev = r;
      }
    }
}

TEST(BandwidthRule, LowDimensionRule) {
  const auto h = BandwidthRule::rate_optimal({{2}}).bandwidth(1, 1e4);
  EXPECT_NEAR(h[0], 0.1, 1e-12);
  EXPECT_EQ(BandwidthRule::fixed_h({0.3, 0.4}).bandwidth(2, 50.0), (std::vector<double>{0.3, 0.4}));
  EXPECT_THROW(BandwidthRule::fixed_h({0.3}).bandwidth(2, 50.0), DimensionMismatch);
  EXPECT_DOUBLE_EQ(BandwidthRule::power_law(2.0, 0.5).bandwidth(1, 100.0)[0], 0.2);
  EXPECT_DOUBLE_EQ(BandwidthRule::power_law(2.0, 0.5).bandwidth(1, 1.0)[0], 1.0);
}

TEST(MseExperiment, NeedsThreeTimeHorizons) {
  const ModelSpec m = build_model("smooth-1d");
  RateExperimentConfig cfg;
  cfg.T_grid = {100.0, 200.0};
  cfg.replications = 2;
  EXPECT_THROW(mse_experiment(m, BandwidthRule::fixed_h({0.5}), cfg, closed_form_reference(m, cfg.eval)),
               InvalidArgument);
}

TEST(MseExperiment, ShortHistogramOracleRejected) {
  const ModelSpec m = build_model("radial-pushback-3");
  RateExperimentConfig cfg;
  cfg.T_grid = {10.0, 20.0, 40.0};
  cfg.replications = 2;
  cfg.eval = EvalGrid::cube(3, -1, 1, 4);
  HistogramOracleConfig hc;
  hc.T = 1000.0;
  hc.dt = cfg.dt;
  EXPECT_THROW(mse_experiment(m, BandwidthRule::fixed_h({1, 1, 1}), cfg, histogram_reference(m, cfg.eval, hc)),
               InvalidArgument);
}

TEST(MseExperiment, FixedBandwidthPlateaus) {
  // With h held fixed the bias does not shrink, so the risk stops decreasing.
  const ModelSpec m = build_model("smooth-1d");
  RateExperimentConfig cfg;
  cfg.T_grid = {400.0, 1600.0, 6400.0};
  cfg.replications = 12;
  cfg.dt = 0.02;
  cfg.kernel_order = 0;
  cfg.eval = EvalGrid::cube(1, -3.0, 3.0, 120);
  const RateReport r = mse_experiment(m, BandwidthRule::fixed_h({1.0}), cfg, closed_form_reference(m, cfg.eval));
  ASSERT_EQ(r.rows.size(), 3u);
  EXPECT_GT(r.fit.slope, -0.3);
  EXPECT_GT(r.rows[2].median, 0.6 * r.rows[1].median);
  EXPECT_FALSE(r.pass);
  EXPECT_EQ(r.target_slope, -1.0);
}

TEST(VarianceProbe, ControlHasZeroVarianceAndErrors) {
  const ModelSpec m = build_model("radial-pushback-3");
  VarianceProbeConfig cfg;
  cfg.sizes = {0.5, 0.25};
  cfg.T = 20.0;
  cfg.dt = 0.01;
  cfg.replications = 20;
  const VarianceReport r = variance_probe(m, cfg);
  EXPECT_EQ(r.control_variance, 0.0);
  EXPECT_NEAR(r.target_slope, 5.0 / 3.0, 1e-15);
  for (std::size_t j = 0; j < 2; ++j) EXPECT_GT(r.variance[j], 0.0);
  EXPECT_GT(r.mean[0], r.mean[1]);

  VarianceProbeConfig few = cfg;
  few.replications = 19;
  EXPECT_THROW(variance_probe(m, few), InvalidArgument);
  VarianceProbeConfig big = cfg;
  big.sizes = {0.5, 1.0};
  EXPECT_THROW(variance_probe(m, big), InvalidArgument);
}

TEST(VarianceProbe, OneDimensionalSlopeNearTwo) {
  // Stable-like jumps with alpha = 0.5 on the smooth 1-d model.
  const ModelSpec m = build_model(json{{"preset", "smooth-1d"}, {"gamma0", 0.5}});
  ASSERT_TRUE(m.levy.has_value());
  ASSERT_EQ(m.levy->alpha, 0.5);
  VarianceProbeConfig cfg;
  cfg.sizes = {0.4, 0.2, 0.1, 0.05};
  cfg.T = 200.0;
  cfg.dt = 0.005;
  cfg.replications = 60;
  cfg.tolerance = 0.4;
  const VarianceReport r = variance_probe(m, cfg);
  EXPECT_EQ(r.target_slope, 2.0);
  EXPECT_NEAR(r.fit.slope, 2.0, 0.4);
  EXPECT_TRUE(r.pass);
}
