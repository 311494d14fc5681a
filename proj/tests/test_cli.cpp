#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
  const std::string cmd = std::string(TRAVELTIME_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string first_line(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  return line;
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("traveltime_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    std::ofstream cfg(dir_ / "small.ini");
    cfg << "[sampler]\niterations = 40\nburn_in = 20\nthin = 2\n[eval]\ninterval_draws = 1000\ncoverage_draws = 200\n";
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string simulate(const std::string& name, int trips = 60) {
    const fs::path out = dir_ / name;
    EXPECT_EQ(run("--seed 5 --out-dir " + out.string() + " simulate --grid 4x4 --trips " + std::to_string(trips)), 0);
    return out.string();
  }

  fs::path dir_;
};

}  // namespace

TEST_F(Cli, SimulateWritesDataset) {
  const fs::path d = simulate("data");
  for (const char* f : {"nodes.csv", "arcs.csv", "trips.csv", "gps.csv", "truth_trips.csv", "truth_arcs.csv", "manifest.ini"})
    EXPECT_TRUE(fs::exists(d / f)) << f;
  EXPECT_EQ(first_line(d / "trips.csv"), "trip_id,start_node,end_node,t_start_s,t_end_s");
  EXPECT_EQ(first_line(d / "gps.csv"), "trip_id,seq,t_s,x_m,y_m,speed_mps");
  const std::string manifest = slurp(d / "manifest.ini");
  EXPECT_NE(manifest.find("command = simulate"), std::string::npos);
  EXPECT_NE(manifest.find("config_hash"), std::string::npos);
}

TEST_F(Cli, SimulateIsDeterministic) {
  const fs::path a = simulate("a"), b = simulate("b");
  for (const char* f : {"trips.csv", "gps.csv", "truth_trips.csv"}) EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
}

TEST_F(Cli, FitPredictAndCoverage) {
  const std::string data = simulate("data");
  const fs::path model = dir_ / "mle";
  ASSERT_EQ(run("--data " + data + " --out-dir " + model.string() + " fit --method mle"), 0);
  EXPECT_TRUE(fs::exists(model / "estimates.csv"));
  {
    std::ofstream pairs(dir_ / "pairs.csv");
    pairs << "origin,destination\n0,15\n3,12\n";
  }
  const fs::path pred = dir_ / "pred";
  ASSERT_EQ(run("--data " + data + " --out-dir " + pred.string() + " --config " + (dir_ / "small.ini").string() +
                " predict --method mle --model " + model.string() + " --pairs " + (dir_ / "pairs.csv").string()),
            0);
  EXPECT_EQ(first_line(pred / "estimates.csv"), "trip_id,method,point_s,lo_s,hi_s");
  const fs::path cov = dir_ / "cov";
  ASSERT_EQ(run("--data " + data + " --out-dir " + cov.string() + " --config " + (dir_ / "small.ini").string() +
                " coverage-map --method mle --model " + model.string() + " --start 0 --threshold 60"),
            0);
  EXPECT_EQ(first_line(cov / "coverage_map.csv"), "node_id,probability");
}

TEST_F(Cli, BayesFitAndMapMatch) {
  const std::string data = simulate("data", 30);
  const fs::path model = dir_ / "bayes";
  ASSERT_EQ(run("--data " + data + " --out-dir " + model.string() + " fit --method bayes --iterations 240 --burn-in 40"), 0);
  EXPECT_TRUE(fs::exists(model / "posterior_params.csv"));
  EXPECT_TRUE(fs::exists(model / "psrf.csv"));
  const fs::path mm = dir_ / "mm";
  ASSERT_EQ(run("--data " + data + " --out-dir " + mm.string() + " map-match --model " + model.string() + " --trip 0 --min-snapshots 20"), 0);
  EXPECT_EQ(first_line(mm / "marginals.csv"), "trip_id,arc_id,probability");
}

TEST_F(Cli, EvaluateSchemaAndDeterminism) {
  const std::string data = simulate("data", 80);
  const std::string cfg = (dir_ / "small.ini").string();
  const fs::path a = dir_ / "ea", b = dir_ / "eb";
  const std::string common = "--data " + data + " --config " + cfg + " --threads 2 ";
  ASSERT_EQ(run(common + "--out-dir " + a.string() + " evaluate --methods bayes,mle,harmonic,budge"), 0);
  ASSERT_EQ(run(common + "--out-dir " + b.string() + " evaluate --methods bayes,mle,harmonic,budge"), 0);
  EXPECT_EQ(first_line(a / "metrics.csv"), "method,n,rmse_s,rmse_log,bias_ma,bias_ma_uncorrected,coverage_pct,width_s");
  const std::string metrics = slurp(a / "metrics.csv");
  for (const char* m : {"oracle,", "bayes,", "mle,", "harmonic,", "budge,"}) EXPECT_NE(metrics.find(m), std::string::npos) << m;
  EXPECT_EQ(metrics, slurp(b / "metrics.csv"));
  EXPECT_TRUE(fs::exists(a / "metrics.txt"));
}

TEST_F(Cli, ExitCodes) {
  EXPECT_EQ(run("--help"), 0);
  EXPECT_EQ(run("config --print-defaults"), 0);
  EXPECT_EQ(run("fit --method nonsense"), 1);
  EXPECT_EQ(run("--bogus-flag"), 1);
  EXPECT_EQ(run("--config " + (dir_ / "missing.ini").string() + " config"), 1);
  {
    std::ofstream bad(dir_ / "bad.ini");
    bad << "[prior]\nunknown_key = 3\n";
  }
  EXPECT_EQ(run("--config " + (dir_ / "bad.ini").string() + " config"), 1);
  EXPECT_EQ(run("--data " + (dir_ / "nowhere").string() + " --out-dir " + (dir_ / "o").string() + " fit --method mle"), 1);
}
