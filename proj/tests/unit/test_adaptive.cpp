#include <gtest/gtest.h>

#include <set>

#include "ejdke/adaptive.hpp"
#include "ejdke/model.hpp"
#include "ejdke/reference.hpp"
#include "../support/oracles.hpp"

using namespace ejdke;

namespace {

const Trajectory& path3() {
  static const Trajectory t = simulate_path(build_model("radial-pushback-3"), 40.0, 0.05, 10.0, 2024);
  return t;
}

double direct_dist2(const Trajectory& t, const Kernel& K, const std::vector<double>& h, const std::vector<double>& eta,
                    const EvalGrid& g) {
  const auto c = estimate_density_convolved(t, K, h, eta, g).values;
  const auto p = estimate_density(t, K, eta, g).values;
  double s = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) s += (c[i] - p[i]) * (c[i] - p[i]);
  return s * g.cell_volume();
}

double prod(const std::vector<double>& h) {
  double p = 1.0;
  for (double v : h) p *= v;
  return p;
}

AdaptiveStudyConfig tiny_study() {
  AdaptiveStudyConfig c;
  c.T = 50.0;
  c.dt = 0.05;
  c.substeps = 1;
  c.burn_in = 10.0;
  c.k_max = 2;
  c.eval = EvalGrid::cube(3, -1.0, 1.0, 6);
  c.replications = 10;
  c.seed = 5;
  return c;
}

}  // namespace

TEST(CandidateBandwidths, TheoreticalBoundsEmptyAtDeskScale) {
  const BandwidthGrid g = candidate_bandwidths(1e4, 3, GridMode::kPaperExact, 8);
  EXPECT_TRUE(g.empty());
  const double lt = std::log(1e4);
  EXPECT_NEAR(g.lower, std::pow(lt, 6) / 1e4, 1e-9);
  EXPECT_GT(g.lower, 1.0);
  EXPECT_NEAR(g.upper, std::pow(1.0 / lt, 9.0), 1e-18);
}

TEST(CandidateBandwidths, RelaxedMembers) {
  const BandwidthGrid g = candidate_bandwidths(1e4, 3, GridMode::kRelaxed, 8);
  ASSERT_FALSE(g.empty());
  EXPECT_EQ(g.size(), 512u);  // every k in {1..8}^3 has prod k <= 1e4
  std::set<std::vector<double>> seen;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto& h = g.members[i];
    for (std::size_t m = 0; m < 3; ++m) EXPECT_EQ(h[m], 1.0 / static_cast<double>(g.k[i][m]));
    EXPECT_GE(prod(h), 1e-4);
    EXPECT_LE(prod(h), 1.0);
    seen.insert(h);
  }
  EXPECT_EQ(seen.size(), g.size());
  EXPECT_NEAR(std::pow(1e4, g.growth_exponent), 512.0, 1e-6);

  // T = 27 allows prod k <= 27 only.
  const BandwidthGrid s = candidate_bandwidths(27.0, 3, GridMode::kRelaxed, 4);
  std::size_t count = 0;
  for (int a = 1; a <= 4; ++a)
    for (int b = 1; b <= 4; ++b)
      for (int c = 1; c <= 4; ++c) count += a * b * c <= 27;
  EXPECT_EQ(s.size(), count);
}

TEST(CandidateBandwidths, LowDimensionRejected) {
  try {
    candidate_bandwidths(1e4, 2, GridMode::kRelaxed, 4);
    FAIL();
  } catch (const InvalidArgument& e) {
    EXPECT_NE(std::string(e.what()).find("d >= 3"), std::string::npos);
  }
}

TEST(VariancePenalty, Examples) {
  EXPECT_NEAR(variance_penalty({0.1, 0.1, 0.1}, 1000.0, 3, 1.0), 0.01, 1e-15);
  EXPECT_DOUBLE_EQ(variance_penalty({1.0, 1.0, 1.0, 1.0}, 500.0, 4, 3.0), 3.0 / 500.0);
  EXPECT_NEAR(variance_penalty({0.1, 0.1, 0.1, 0.1}, 1e4, 4, 2.0), 0.02, 1e-15);
  EXPECT_THROW(variance_penalty({1.0, 1.0, 1.0}, 10.0, 3, 0.0), InvalidArgument);
}

TEST(GLTable, MatchesDirectEstimators) {
  const Kernel K(2);
  const EvalGrid g = EvalGrid::cube(3, -1.0, 1.0, 8);
  const auto members = explicit_bandwidths(40.0, 3, {{1, 1, 1}, {0.5, 1, 0.25}, {1.0 / 3, 0.5, 0.5}}).members;
  const GLTable t = gl_table(path3(), K, members, g);
  for (std::size_t j = 0; j < members.size(); ++j) {
    const auto p = estimate_density(path3(), K, members[j], g).values;
    for (std::size_t n = 0; n < p.size(); ++n) EXPECT_NEAR(t.plain[j][n], p[n], 1e-13);
    for (std::size_t i = 0; i < members.size(); ++i)
      EXPECT_NEAR(t.distance2(i, j), direct_dist2(path3(), K, members[i], members[j], g), 1e-13);
  }
}

TEST(BiasProxy, SingletonGrid) {
  const Kernel K(2);
  const EvalGrid g = EvalGrid::cube(3, -1.0, 1.0, 8);
  const std::vector<double> h{0.5, 0.5, 0.5};
  const BandwidthGrid grid = explicit_bandwidths(path3().T(), 3, {h});
  const double k = 1e-4;
  const double expect = std::max(0.0, direct_dist2(path3(), K, h, h, g) - variance_penalty(h, path3().T(), 3, k));
  EXPECT_GT(expect, 0.0);
  EXPECT_NEAR(bias_proxy(path3(), K, h, grid, g, k), expect, 1e-12);
}

TEST(BiasProxy, HugePenaltyClampsToZero) {
  const Kernel K(2);
  const EvalGrid g = EvalGrid::cube(3, -1.0, 1.0, 6);
  const BandwidthGrid grid = candidate_bandwidths(path3().T(), 3, GridMode::kRelaxed, 3);
  for (const auto& h : grid.members) EXPECT_EQ(bias_proxy(path3(), K, h, grid, g, 1e12), 0.0);
}

TEST(BiasProxy, BruteForceFiveMemberGrid) {
  const Kernel K(3);
  const EvalGrid g = EvalGrid::cube(3, -1.2, 1.2, 7);
  const BandwidthGrid grid =
      explicit_bandwidths(path3().T(), 3, {{1, 1, 1}, {0.5, 0.5, 0.5}, {1, 0.5, 0.25}, {0.25, 1, 1}, {0.5, 1.0 / 3, 1}});
  const double k = 0.01;
  const GLTable t = gl_table(path3(), K, grid.members, g);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    double a = 0.0;
    for (const auto& eta : grid.members)
      a = std::max(a, direct_dist2(path3(), K, grid.members[i], eta, g) - variance_penalty(eta, path3().T(), 3, k));
    EXPECT_NEAR(bias_proxy_from_table(t, i, k), a, 1e-10);
    EXPECT_NEAR(bias_proxy(path3(), K, grid.members[i], grid, g, k), a, 1e-10);
  }
  // h outside the grid is compared against the grid members only.
  const std::vector<double> h{0.25, 0.25, 0.5};
  double a = 0.0;
  for (const auto& eta : grid.members)
    a = std::max(a, direct_dist2(path3(), K, h, eta, g) - variance_penalty(eta, path3().T(), 3, k));
  EXPECT_NEAR(bias_proxy(path3(), K, h, grid, g, k), a, 1e-10);
}

TEST(BiasProxy, NonincreasingInK) {
  const Kernel K(2);
  const EvalGrid g = EvalGrid::cube(3, -1.0, 1.0, 8);
  const BandwidthGrid grid = candidate_bandwidths(path3().T(), 3, GridMode::kRelaxed, 3);
  const GLTable t = gl_table(path3(), K, grid.members, g);
  for (std::size_t i = 0; i < t.n(); ++i) {
    double prev = std::numeric_limits<double>::infinity();
    for (double k : {1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0}) {
      const double a = bias_proxy_from_table(t, i, k);
      EXPECT_GE(a, 0.0);
      EXPECT_LE(a, prev);
      EXPECT_LE(bias_proxy_from_table(t, i, 2.0 * k), a);
      prev = a;
    }
  }
}

TEST(SelectBandwidth, SingletonGrid) {
  const Kernel K(2);
  const EvalGrid g = EvalGrid::cube(3, -1.0, 1.0, 6);
  const BandwidthGrid grid = explicit_bandwidths(path3().T(), 3, {{0.5, 1, 0.5}});
  const AdaptiveSelection s = select_bandwidth(path3(), K, grid, g, 2.0);
  EXPECT_EQ(s.selected, 0u);
  EXPECT_EQ(s.h_tilde, (std::vector<double>{0.5, 1, 0.5}));
}

TEST(SelectBandwidth, DominatingMemberWins) {
  GLTable t;
  t.members = {{1, 1, 1}, {0.5, 0.5, 0.5}};
  t.eval = EvalGrid::cube(3, -1, 1, 2);
  t.T = 100.0;
  t.d = 3;
  t.plain = {std::vector<double>(8, 0.1), std::vector<double>(8, 0.2)};
  // Row 1 sees a large distance to member 0, row 0 sees none.
  t.dist2 = {0.0, 0.0, 5.0, 0.0};
  t.rows = {0, 1};
  const BandwidthGrid grid = explicit_bandwidths(100.0, 3, t.members);
  const AdaptiveSelection s = select_from_table(t, 1.0, grid, 2);
  EXPECT_LT(s.A[0], s.A[1]);
  EXPECT_LT(s.V[0], s.V[1]);
  EXPECT_EQ(s.selected, 0u);
  EXPECT_EQ(s.estimate, t.plain[0]);
}

TEST(SelectBandwidth, TiesGoToTheSmoothestMember) {
  const std::vector<std::vector<double>> m{{0.5, 1, 1}, {1, 1, 0.5}, {1, 0.5, 1}, {0.5, 0.5, 1}};
  EXPECT_EQ(argmin_with_ties({1.0, 1.0, 1.0, 1.0}, m), 1u);  // equal prod h: lexicographically largest
  EXPECT_EQ(argmin_with_ties({1.0, 2.0, 2.0, 1.0}, m), 0u);  // larger prod h
  EXPECT_EQ(argmin_with_ties({3.0, 2.0, 2.0, 1.0}, m), 3u);
}

TEST(SelectBandwidth, TableRescanOnSimulatedPath) {
  const Kernel K(2);
  const EvalGrid g = EvalGrid::cube(3, -1.0, 1.0, 8);
  const BandwidthGrid grid = candidate_bandwidths(path3().T(), 3, GridMode::kRelaxed, 4);
  for (double k : {1e-3, 1e-2, 2.0}) {
    const AdaptiveSelection s = select_bandwidth(path3(), K, grid, g, k);
    std::size_t best = 0;
    for (std::size_t i = 0; i < s.score.size(); ++i) {
      EXPECT_GE(s.A[i], 0.0);
      EXPECT_DOUBLE_EQ(s.score[i], s.A[i] + s.V[i]);
      EXPECT_DOUBLE_EQ(s.V[i], variance_penalty(s.members[i], path3().T(), 3, k));
      if (s.score[i] < s.score[best]) best = i;
    }
    EXPECT_EQ(s.score[s.selected], s.score[best]);
    EXPECT_EQ(s.h_tilde, s.members[s.selected]);
    EXPECT_TRUE(std::find(grid.members.begin(), grid.members.end(), s.h_tilde) != grid.members.end());
    const auto direct = estimate_density(path3(), K, s.h_tilde, g).values;
    for (std::size_t n = 0; n < direct.size(); ++n) EXPECT_NEAR(s.estimate[n], direct[n], 1e-13);
  }
}

TEST(SelectBandwidth, EmptyGridRejected) {
  const BandwidthGrid empty = candidate_bandwidths(100.0, 3, GridMode::kPaperExact, 4);
  EXPECT_THROW(select_bandwidth(path3(), Kernel(2), empty, EvalGrid::cube(3, -1, 1, 4), 2.0), InvalidArgument);
}

TEST(CalibrateK, SingletonDeterminismAndElbow) {
  const ModelSpec m = build_model("radial-pushback-3");
  const AdaptiveStudyConfig cfg = tiny_study();
  HistogramOracleConfig hc;
  hc.T = 2000.0;
  hc.dt = 0.05;
  const ReferenceDensity ref = histogram_reference(m, cfg.eval, hc);

  EXPECT_EQ(calibrate_k(m, cfg, {0.7}, ref).chosen_k, 0.7);

  const std::vector<double> ks{1e-4, 1e-3, 1e-2, 0.1, 1.0};
  const CalibrationReport a = calibrate_k(m, cfg, ks, ref);
  const CalibrationReport b = calibrate_k(m, cfg, ks, ref);
  EXPECT_EQ(a.median_risk, b.median_risk);
  EXPECT_EQ(a.chosen_k, b.chosen_k);
  for (std::size_t i = 0; i < a.chosen_index; ++i) EXPECT_GE(a.median_risk[i], a.median_risk[a.chosen_index]);

  AdaptiveStudyConfig few = cfg;
  few.replications = 9;
  EXPECT_THROW(calibrate_k(m, few, ks, ref), InvalidArgument);
}

TEST(OracleExperiment, ReportsExactArgmin) {
  const ModelSpec m = build_model("radial-pushback-3");
  const AdaptiveStudyConfig cfg = tiny_study();
  HistogramOracleConfig hc;
  hc.T = 2000.0;
  hc.dt = 0.05;
  const OracleRiskReport r = adaptive_oracle_experiment(m, cfg, 2.0, histogram_reference(m, cfg.eval, hc));
  EXPECT_TRUE(r.argmin_exact);
  EXPECT_EQ(r.selected_risk.size(), cfg.replications);
  for (std::size_t i = 0; i < cfg.replications; ++i) EXPECT_GE(r.selected_risk[i], r.oracle_risk[i]);
  EXPECT_GE(r.ratio, 1.0);
}
