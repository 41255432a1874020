#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "scaledrift/io_formats.hpp"
#include "temp_dir.hpp"

using namespace scaledrift;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "scaledrift");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST(Cli, UnknownSubcommandIsUsageError) {
  const auto r = run_cli({"frobnicate"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("Usage"), std::string::npos);
  EXPECT_EQ(run_cli({}).code, 1);
}

TEST(Cli, BadFlagValuesAreUsageErrors) {
  EXPECT_EQ(run_cli({"correct", "--dataset", "x", "--out", "y", "--backend", "particle"}).code, 1);
  EXPECT_EQ(run_cli({"correct", "--dataset", "x", "--out", "y", "--prior", "car=1.5"}).code, 1);
  EXPECT_EQ(run_cli({"evaluate", "--gt", "a", "--est", "b", "--out", "c", "--lengths", "100..50"}).code, 1);
  EXPECT_EQ(run_cli({"simulate", "--out", "x", "--drift", "sine:1"}).code, 1);
}

TEST(Cli, HelpExitsZero) { EXPECT_EQ(run_cli({"--help"}).code, 0); }

TEST(Cli, SelftestPasses) {
  const auto r = run_cli({"selftest"});
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(r.out.find("FAIL"), std::string::npos);
}

TEST(Cli, SimulateCorrectEvaluate) {
  TempDir tmp;
  const std::string data = (tmp / "data").string();
  auto r = run_cli({"simulate", "--out", data, "--seed", "3", "--frames", "600"});
  ASSERT_EQ(r.code, 0) << r.err;

  const std::string out = (tmp / "out").string();
  r = run_cli({"correct", "--dataset", data, "--out", out, "--gt", data + "/gt_poses.txt", "--lengths", "100..400"});
  ASSERT_EQ(r.code, 0) << r.err;

  std::ifstream kin(tmp / "out" / "kappa.txt");
  const auto kappas = parse_kappa_series(kin, "kappa.txt");
  std::ifstream tin(tmp / "data" / "true_kappa.txt");
  const auto truth = parse_kappa_series(tin, "true_kappa.txt");
  ASSERT_EQ(kappas.size(), truth.size());
  double sq = 0.0;
  for (std::size_t k = 0; k < kappas.size(); ++k) sq += std::pow(kappas[k].kappa - truth[k].kappa, 2);
  EXPECT_LT(std::sqrt(sq / static_cast<double>(kappas.size())), 0.05);

  const std::string ev = (tmp / "ev").string();
  r = run_cli({"evaluate", "--gt", data + "/gt_poses.txt", "--est", out + "/trajectory.txt", "--out", ev, "--lengths",
               "100..400"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(slurp(tmp / "ev" / "report.txt"), slurp(tmp / "out" / "report.txt"));
}

TEST(Cli, Deterministic) {
  TempDir tmp;
  for (const char* d : {"a", "b"}) {
    const std::string data = (tmp / d).string();
    ASSERT_EQ(run_cli({"simulate", "--out", data, "--seed", "5", "--frames", "300"}).code, 0);
    ASSERT_EQ(run_cli({"correct", "--dataset", data, "--out", data + "/out", "--backend", "histogram"}).code, 0);
  }
  for (const char* f : {"poses.txt", "map_points.txt", "detections.txt", "priors.txt", "config.txt", "out/kappa.txt",
                        "out/trajectory.txt"})
    EXPECT_EQ(slurp(tmp / "a" / f), slurp(tmp / "b" / f)) << f;
}

TEST(Cli, EvaluateLengthMismatchIsDataError) {
  TempDir tmp;
  std::ofstream(tmp / "gt.txt") << "1 0 0 0 0 1 0 0 0 0 1 0\n1 0 0 1 0 1 0 0 0 0 1 0\n";
  std::ofstream(tmp / "est.txt") << "1 0 0 0 0 1 0 0 0 0 1 0\n";
  const auto r = run_cli({"evaluate", "--gt", (tmp / "gt.txt").string(), "--est", (tmp / "est.txt").string(), "--out",
                          (tmp / "ev").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("ground-truth poses vs"), std::string::npos);
  EXPECT_FALSE(std::filesystem::exists(tmp / "ev" / "report.txt"));
}

TEST(Cli, MalformedInputIsDataErrorWithoutOutputs) {
  TempDir tmp;
  const std::string data = (tmp / "data").string();
  ASSERT_EQ(run_cli({"simulate", "--out", data, "--frames", "100"}).code, 0);
  std::ofstream(tmp / "data" / "poses.txt", std::ios::app) << "1 0 0\n";
  const auto r = run_cli({"correct", "--dataset", data, "--out", (tmp / "out").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("poses.txt:101"), std::string::npos) << r.err;
  EXPECT_FALSE(std::filesystem::exists(tmp / "out" / "trajectory.txt"));
}

TEST(Cli, ParseHelpers) {
  EXPECT_EQ(cli::parse_lengths("100..800"), (std::vector<double>{100, 200, 300, 400, 500, 600, 700, 800}));
  EXPECT_EQ(cli::parse_lengths("50..200:50"), (std::vector<double>{50, 100, 150, 200}));
  EXPECT_EQ(cli::parse_lengths("10,30"), (std::vector<double>{10, 30}));
  const auto p = cli::parse_prior("car=1.5:0.1");
  EXPECT_EQ(p.class_label, "car");
  EXPECT_EQ(p.mean(), 1.5);
  EXPECT_EQ(p.stddev(), 0.1);
  const auto d = cli::parse_drift("rotation:0.005:0.0012");
  EXPECT_EQ(d.kind, DriftKind::RotationCoupled);
  EXPECT_EQ(d.bias, 0.0012);
  EXPECT_THROW(cli::parse_drift("linear:1"), ConfigError);
}
