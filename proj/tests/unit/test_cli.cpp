#include <gtest/gtest.h>

#include <sstream>

#include "ejdke/cli.hpp"
#include "../support/oracles.hpp"

using namespace ejdke;
namespace fs = std::filesystem;

namespace {

struct CliRun {
  int code;
  std::string out, err;
};

CliRun run(std::vector<std::string> args) {
  args.insert(args.begin(), "ejdke");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

json load(const fs::path& p) { return json::parse(oracle::slurp(p)); }

const fs::path& simulated_dir() {
  static const fs::path dir = [] {
    const fs::path d = oracle::temp_dir("cli_sim");
    const CliRun r = run({"simulate", "--preset", "radial-pushback-3", "--T", "40", "--dt", "0.05", "--seed", "7",
                       "--csv", "--out", d.string()});
    EXPECT_EQ(r.code, 0) << r.err;
    return d;
  }();
  return dir;
}

}  // namespace

TEST(Cli, SimulateWritesTrajectoryAndManifest) {
  const fs::path d = simulated_dir();
  ASSERT_TRUE(fs::exists(d / "trajectory.ejdt"));
  ASSERT_TRUE(fs::exists(d / "trajectory.csv"));
  const Trajectory t = read_trajectory(d / "trajectory.ejdt");
  EXPECT_EQ(t.dim, 3u);
  EXPECT_EQ(t.n_steps, 800u);
  EXPECT_EQ(t.seed, 7u);

  const json m = load(d / "manifest.json");
  EXPECT_EQ(m.at("subcommand"), "simulate");
  EXPECT_EQ(m.at("config").at("seed"), 7);
  EXPECT_EQ(m.at("config").at("model"), "radial-pushback-3");
  EXPECT_TRUE(m.at("version").get<std::string>().find(kVersion) != std::string::npos);
  EXPECT_TRUE(m.at("libraries").contains("eigen"));
  EXPECT_GE(m.at("wall_time_seconds").get<double>(), 0.0);
  EXPECT_FALSE(m.at("artifacts").empty());

  const std::string csv = oracle::slurp(d / "trajectory.csv");
  ASSERT_EQ(csv.rfind("# config: ", 0), 0u);
  EXPECT_NE(csv.substr(0, csv.find('\n')).find("\"seed\":7"), std::string::npos);
}

TEST(Cli, EstimateAndSelect) {
  const fs::path traj = simulated_dir() / "trajectory.ejdt";
  const fs::path d = oracle::temp_dir("cli_est");
  CliRun r = run({"estimate", "--traj", traj.string(), "--h", "0.5,0.5,1", "--eval-nodes", "6", "--out", d.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const json e = load(d / "estimate.json");
  EXPECT_EQ(e.at("h"), (std::vector<double>{0.5, 0.5, 1}));
  EXPECT_TRUE(fs::exists(d / "estimate.csv"));

  r = run({"select-bandwidth", "--traj", traj.string(), "--grid", "relaxed", "--k", "2.0", "--k-max", "3", "--M",
           "2", "--eval-nodes", "6", "--out", d.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const json s = load(d / "selection.json");
  const auto h = s.at("h_tilde").get<std::vector<double>>();
  bool in_grid = false;
  for (const auto& row : s.at("table")) in_grid = in_grid || row.at("h").get<std::vector<double>>() == h;
  EXPECT_TRUE(in_grid);
  EXPECT_EQ(s.at("k"), 2.0);
  EXPECT_EQ(s.at("grid").at("mode"), "relaxed");
}

TEST(Cli, ExitCodes) {
  const fs::path d = oracle::temp_dir("cli_err");
  const fs::path traj = simulated_dir() / "trajectory.ejdt";

  CliRun r = run({"simulate", "--bogus"});
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(json::parse(r.err).at("error").at("kind"), "usage");

  r = run({"rate-experiment", "--preset", "smooth-1d", "--T-grid", "100,200", "--out", d.string()});
  EXPECT_EQ(r.code, 3);
  const json e = json::parse(r.err).at("error");
  EXPECT_EQ(e.at("exit_code"), 3);
  EXPECT_NE(e.at("message").get<std::string>().find("at least 3"), std::string::npos);

  r = run({"simulate", "--config", (d / "missing.json").string(), "--out", d.string()});
  EXPECT_EQ(r.code, 4);

  r = run({"estimate", "--traj", traj.string(), "--h", "0.5,0.5", "--out", d.string()});
  EXPECT_EQ(r.code, 5);

  {
    std::ofstream bad(d / "bad.ejdt", std::ios::binary);
    bad << "EJDT garbage";
  }
  r = run({"estimate", "--traj", (d / "bad.ejdt").string(), "--h", "1,1,1", "--out", d.string()});
  EXPECT_EQ(r.code, 6);
  EXPECT_EQ(json::parse(r.err).at("error").at("kind"), "format");

  r = run({"select-bandwidth", "--traj", traj.string(), "--grid", "paper-exact", "--out", d.string()});
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("relaxed"), std::string::npos);

  // A manifest from one subcommand cannot drive another.
  r = run({"estimate", "--config", (simulated_dir() / "manifest.json").string(), "--out", d.string()});
  EXPECT_EQ(r.code, 4);
}

TEST(Cli, ManifestRerunIsByteIdentical) {
  const fs::path a = oracle::temp_dir("cli_rate_a"), b = oracle::temp_dir("cli_rate_b");
  CliRun r = run({"rate-experiment", "--preset", "smooth-1d", "--T-grid", "20,40,80", "--reps", "4", "--dt", "0.05",
               "--rule", "fixed", "--h", "0.5", "--seed", "3", "--out", a.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  r = run({"rate-experiment", "--config", (a / "manifest.json").string(), "--out", b.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* f : {"rate.csv", "rate_plot.csv"}) {
    EXPECT_EQ(oracle::csv_body(a / f), oracle::csv_body(b / f)) << f;
    EXPECT_EQ(oracle::slurp(a / f), oracle::slurp(b / f)) << f;
  }
  const json rate = load(a / "rate.json");
  EXPECT_EQ(rate.at("rows").size(), 3u);
  EXPECT_EQ(rate.at("reference").at("source"), "closed-form");

  // Flags override the manifest.
  r = run({"rate-experiment", "--config", (a / "manifest.json").string(), "--seed", "4", "--out", b.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(oracle::csv_body(a / "rate.csv"), oracle::csv_body(b / "rate.csv"));
  EXPECT_EQ(load(b / "manifest.json").at("config").at("seed"), 4);
}

TEST(Cli, ValidateModel) {
  const fs::path d = oracle::temp_dir("cli_val");
  const CliRun r = run({"validate-model", "--preset", "radial-pushback-2", "--probes", "200", "--out", d.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const json a = load(d / "assumptions.json");
  EXPECT_TRUE(a.at("all_passed").get<bool>());
  EXPECT_EQ(a.at("probe_count"), 200);
}
