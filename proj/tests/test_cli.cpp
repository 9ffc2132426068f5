#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <iterator>

#include "ntftraffic/cli.hpp"

using namespace ntftraffic;
using cli::parse_args;
using cli::RunConfig;
using cli::UsageError;

namespace fs = std::filesystem;

namespace {

std::string usage_message(const std::vector<std::string>& args) {
  try {
    parse_args(args);
  } catch (const UsageError& e) {
    return e.what();
  }
  return "";
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

class CliRun : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("ntftraffic_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }
  void run(const std::vector<std::string>& args) const { cli::run(parse_args(args)); }

  fs::path dir_;
};

}  // namespace

TEST(ParseArgs, FactorizeRank) {
  const RunConfig c = parse_args({"factorize", "--input", "/dev/null", "--output", "m.cpm", "--rank", "10"});
  EXPECT_EQ(c.subcommand, "factorize");
  EXPECT_EQ(c.rank, 10);
  EXPECT_EQ(c.restarts, 1);
}

TEST(ParseArgs, PredictRejectsZeroK) {
  const std::string msg = usage_message({"predict", "--model", "/dev/null", "--train", "/dev/null", "--test",
                                         "/dev/null", "--predictions", "p", "--report", "r.csv", "--k", "0"});
  EXPECT_NE(msg.find("--k"), std::string::npos) << msg;
  EXPECT_EQ(msg.find('\n'), std::string::npos);
}

TEST(ParseArgs, WeightsRoundTrip) {
  const RunConfig c = parse_args({"generate", "--output", "t.tns3", "--weights", "0.2,0.2,0.2,0.2,0.2"});
  EXPECT_EQ(c.weights, (std::array<double, 5>{0.2, 0.2, 0.2, 0.2, 0.2}));
  const std::string text = cli::describe(c);
  EXPECT_NE(text.find("weights=0.2,0.2,0.2,0.2,0.2"), std::string::npos) << text;

  const RunConfig d = parse_args({"generate", "--output", "t.tns3", "--weights", "0.5,0.25,0.125,0.0625,0.0625"});
  EXPECT_NE(cli::describe(d).find("weights=0.5,0.25,0.125,0.0625,0.0625"), std::string::npos);
}

TEST(ParseArgs, BadWeights) {
  EXPECT_NE(usage_message({"generate", "--output", "t", "--weights", "0.2,0.2"}).find("--weights"), std::string::npos);
  EXPECT_NE(usage_message({"generate", "--output", "t", "--weights", "0.5,0.5,0.5,0,0"}).find("--weights"),
            std::string::npos);
  EXPECT_NE(usage_message({"generate", "--output", "t", "--weights", "a,b,c,d,e"}).find("--weights"),
            std::string::npos);
}

TEST(ParseArgs, RejectsUnknownAndMissing) {
  EXPECT_FALSE(usage_message({"factorize", "--input", "/dev/null", "--output", "m", "--bogus", "1"}).empty());
  EXPECT_FALSE(usage_message({"factorize", "--input", "/dev/null"}).empty());
  EXPECT_FALSE(usage_message({}).empty());
  EXPECT_FALSE(usage_message({"frobnicate"}).empty());
  EXPECT_NE(usage_message({"factorize", "--input", "/dev/null", "--output", "m", "--rank", "0"}).find("--rank"),
            std::string::npos);
  EXPECT_NE(usage_message({"pipeline", "--out-dir", "d", "--lambda", "-1"}).find("--lambda"), std::string::npos);
  EXPECT_NE(usage_message({"pipeline", "--out-dir", "d", "--train-size", "200"}).find("--train-size"),
            std::string::npos);
  EXPECT_THROW(parse_args({"factorize", "--help"}), cli::HelpRequested);
}

TEST(ParseArgs, PipelineDefaultsToPredictionRank) {
  EXPECT_EQ(parse_args({"pipeline", "--out-dir", "d"}).rank, kPredictionRank);
  EXPECT_EQ(parse_args({"pipeline", "--out-dir", "d", "--rank", "7"}).rank, 7);
  EXPECT_EQ(parse_args({"factorize", "--input", "/dev/null", "--output", "m"}).rank, kClusteringRank);
}

TEST_F(CliRun, GenerateFactorizeClusterPredictEvaluateProject) {
  run({"generate", "--n", "12", "--m", "10", "--l", "15", "--seed", "3", "--output", path("t.tns3"), "--labels",
       path("labels.csv")});
  run({"generate", "--n", "12", "--m", "10", "--l", "4", "--seed", "4", "--output", path("test.tns3")});
  EXPECT_EQ(read_tns3(path("t.tns3")).l(), 15);
  EXPECT_EQ(slurp(path("labels.csv")).rfind("sequence_index,archetype\n", 0), 0u);

  run({"factorize", "--input", path("t.tns3"), "--output", path("m.cpm"), "--rank", "4", "--max-sweeps", "200",
       "--trace", path("trace.csv")});
  const CPModel model = read_cpm(path("m.cpm"));
  EXPECT_EQ(model.rank(), 4);
  EXPECT_EQ(slurp(path("trace.csv")).rfind("sweep,objective\n1,", 0), 0u);

  run({"cluster", "--model", path("m.cpm"), "--input", path("t.tns3"), "--clusters", "3", "--labels",
       path("clusters.csv"), "--centroids", path("centroids.csv"), "--profiles", path("profile")});
  const std::string labels = slurp(path("clusters.csv"));
  EXPECT_EQ(labels.rfind("sequence_index,label\n0,0\n", 0), 0u);
  EXPECT_EQ(std::count(labels.begin(), labels.end(), '\n'), 16);
  EXPECT_EQ(slurp(path("centroids.csv")).rfind("cluster,medoid_sequence,coeff_0,coeff_1,coeff_2,coeff_3\n", 0), 0u);
  for (int c = 0; c < 3; ++c) {
    const std::string profile = slurp(path("profile_cluster" + std::to_string(c) + ".csv"));
    EXPECT_EQ(profile.rfind("time_step,mean_index\n", 0), 0u);
    EXPECT_EQ(std::count(profile.begin(), profile.end(), '\n'), 11);
  }

  run({"predict", "--model", path("m.cpm"), "--train", path("t.tns3"), "--test", path("test.tns3"),
       "--observed-steps", "3", "--k", "2", "--predictions", path("pred"), "--report", path("report.csv")});
  const std::string report = slurp(path("report.csv"));
  EXPECT_EQ(report.rfind("method,sequence,error\n", 0), 0u);
  for (const char* m : {"ntf_knn", "historic_average", "historic_nn"}) {
    EXPECT_NE(report.find(std::string("gpe,") + m + ","), std::string::npos);
    EXPECT_TRUE(fs::exists(path(std::string("pred.") + m + ".tns3")));
  }

  run({"evaluate", "--predictions", path("pred.historic_nn.tns3"), "--truth", path("test.tns3"), "--observed-steps",
       "3", "--method", "historic_nn", "--report", path("eval.csv")});
  const std::string eval = slurp(path("eval.csv"));
  const auto line = [](const std::string& text, const std::string& prefix) {
    const auto p = text.find(prefix);
    return p == std::string::npos ? std::string() : text.substr(p, text.find('\n', p) - p);
  };
  EXPECT_FALSE(line(eval, "gpe,historic_nn,").empty());
  EXPECT_EQ(line(eval, "gpe,historic_nn,"), line(report, "gpe,historic_nn,"));

  run({"project", "--input", path("t.tns3"), "--output", path("pca.csv")});
  const std::string pca = slurp(path("pca.csv"));
  EXPECT_EQ(pca.rfind("sequence,step,x,y,z\n0,0,", 0), 0u);
  EXPECT_EQ(std::count(pca.begin(), pca.end(), '\n'), 1 + 15 * 10);
}

TEST_F(CliRun, PredictClampOnlyAffectsExport) {
  run({"generate", "--n", "8", "--m", "8", "--l", "10", "--output", path("t.tns3")});
  run({"generate", "--n", "8", "--m", "8", "--l", "3", "--seed", "1", "--output", path("test.tns3")});
  // A model scaled far above the data forces predictions above 1.
  CPModel model = read_cpm([&] {
    run({"factorize", "--input", path("t.tns3"), "--output", path("m.cpm"), "--rank", "2", "--max-sweeps", "50"});
    return path("m.cpm");
  }());
  model.U *= 50.0;
  write_cpm(model, path("big.cpm"));
  const std::vector<std::string> base{"predict", "--model", path("big.cpm"), "--train", path("t.tns3"), "--test",
                                      path("test.tns3"), "--method", "ntf_knn", "--lambda", "1e6"};
  auto with = [&](std::vector<std::string> extra) {
    std::vector<std::string> a = base;
    a.insert(a.end(), extra.begin(), extra.end());
    return a;
  };
  run(with({"--predictions", path("raw"), "--report", path("raw.csv")}));
  run(with({"--predictions", path("clamped"), "--report", path("clamped.csv"), "--clamp"}));
  EXPECT_EQ(slurp(path("raw.csv")), slurp(path("clamped.csv")));
  EXPECT_THROW(read_tns3(path("raw.ntf_knn.tns3")), ParseError);
  EXPECT_NO_THROW(read_tns3(path("clamped.ntf_knn.tns3")));
}

TEST_F(CliRun, PipelineIsByteDeterministic) {
  const std::vector<std::string> args{"--n", "40", "--l", "30", "--train-size", "24", "--rank", "6", "--max-sweeps",
                                      "150", "--seed", "2", "--split-seed", "5"};
  auto go = [&](const std::string& sub) {
    std::vector<std::string> a{"pipeline", "--out-dir", path(sub)};
    a.insert(a.end(), args.begin(), args.end());
    run(a);
  };
  go("a");
  go("b");
  for (const char* f : {"tensor.tns3", "labels.csv", "model.cpm", "report.csv", "ksweep.csv"}) {
    EXPECT_FALSE(slurp(path(std::string("a/") + f)).empty()) << f;
    EXPECT_EQ(slurp(path(std::string("a/") + f)), slurp(path(std::string("b/") + f))) << f;
  }
  const std::string sweep = slurp(path("a/ksweep.csv"));
  EXPECT_EQ(sweep.rfind("k,gpe\n1,", 0), 0u);
  EXPECT_EQ(std::count(sweep.begin(), sweep.end(), '\n'), 6);
}

TEST_F(CliRun, RuntimeErrorsPropagate) {
  std::ofstream(path("bad.tns3")) << "tns3 1 1 1\n2.0\n";
  EXPECT_THROW(run({"factorize", "--input", path("bad.tns3"), "--output", path("m.cpm")}), ParseError);
}
