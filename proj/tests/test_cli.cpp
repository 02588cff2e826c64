// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "stemit/commands.hpp"

using namespace stemit;
using namespace stemit::cli;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string l; std::getline(ss, l);) out.push_back(l);
  return out;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / "stemit_cli" / (std::string(info->test_suite_name()) + "_" + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }

  fs::path path(const std::string& name) const { return dir_ / name; }

  /// Small, fast experiment config written to disk.
  std::string small_config(const std::string& extra_train = "") {
    const fs::path p = path("config.json");
    std::ofstream(p) << R"({"data": {"count": 12, "width": 8, "seed": 3, "split_seed": 4},
      "model": {"hidden": 8, "head1": 8, "head2": 4},
      "train": {"epochs": 3, "trials": 2)"
                     << extra_train << "}}";
    return p.string();
  }

  std::string gen_data(const std::string& config) {
    GenOptions g;
    g.config = config;
    g.out = path("data").string();
    std::stringstream out, err;
    EXPECT_EQ(cmd_gen(g, out, err), kOk) << err.str();
    return (path("data") / "records.jsonl").string();
  }

  fs::path dir_;
};

int run_cli(const std::string& args) {
  const char* exe = std::getenv("STEMIT_CLI");
  const std::string cmd = std::string(exe) + " " + args + " >/dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

#define REQUIRE_CLI()                                                   \
  if (!std::getenv("STEMIT_CLI")) GTEST_SKIP() << "STEMIT_CLI not set"

}  // namespace

TEST(Format, ShortestRoundTripAndQuoting) {
  EXPECT_EQ(fmt(0.1), "0.1");
  EXPECT_EQ(fmt(2.0), "2");
  const double x = 0.1 + 0.2;
  EXPECT_EQ(std::stod(fmt(x)), x);
  EXPECT_EQ(csv_field("plain"), "plain");
  EXPECT_EQ(csv_field("a,b"), "\"a,b\"");
  EXPECT_EQ(csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
  EXPECT_EQ(split(" a , b,c ", ','), (std::vector<std::string>{"a", "b", "c"}));
}

TEST(FeatureSets, PlusEntriesExtendTheFirst) {
  EXPECT_EQ(expand_feature_sets("smb+melt,+temp,+snowpack"),
            (std::vector<std::string>{"smb+melt", "smb+melt+temp", "smb+melt+snowpack"}));
  EXPECT_THROW(expand_feature_sets("+temp"), ConfigError);
  EXPECT_EQ(group_name("gcn+sage+temp:clamp", "smb"), "gcn_sage_temp-clamp__smb");
}

TEST_F(CliTest, GenIsDeterministic) {
  const std::string cfg = small_config();
  GenOptions g;
  g.config = cfg;
  g.grid = true;
  std::stringstream out, err;
  g.out = path("a").string();
  ASSERT_EQ(cmd_gen(g, out, err), kOk) << err.str();
  g.out = path("b").string();
  ASSERT_EQ(cmd_gen(g, out, err), kOk);
  for (const char* f : {"records.jsonl", "manifest.json", "grid.json"})
    EXPECT_EQ(slurp(path("a") / f), slurp(path("b") / f)) << f;
  EXPECT_NE(out.str().find("records: 12"), std::string::npos);
  g.out = path("c").string();
  g.seed = 99;
  ASSERT_EQ(cmd_gen(g, out, err), kOk);
  EXPECT_NE(slurp(path("a") / "records.jsonl"), slurp(path("c") / "records.jsonl"));
}

TEST_F(CliTest, ConfigErrorsMapToExitCodes) {
  std::stringstream out, err;
  GenOptions g;
  g.config = path("missing.json").string();
  EXPECT_EQ(cmd_gen(g, out, err), kIoError);
  std::ofstream(path("bad.json")) << R"({"train": {"epochs": 3, "epocs": 4}})";
  g.config = path("bad.json").string();
  EXPECT_EQ(cmd_gen(g, out, err), kConfigError);
  EXPECT_NE(err.str().find("train.epocs"), std::string::npos) << err.str();
  std::ofstream(path("type.json")) << R"({"train": {"epochs": "many"}})";
  g.config = path("type.json").string();
  EXPECT_EQ(cmd_gen(g, out, err), kConfigError);
  std::ofstream(path("syntax.json")) << "{";
  g.config = path("syntax.json").string();
  EXPECT_EQ(cmd_gen(g, out, err), kConfigError);
}

TEST_F(CliTest, SyncAttachesConstantGrid) {
  const std::string records = gen_data(small_config());
  clim::AnnualField f;
  f.points = {{-80, 50}, {0, 50}, {-80, 85}, {0, 85}};
  for (int y = 1980; y <= 2040; ++y) f.years.push_back(y);
  f.values["temp"].assign(f.years.size(), std::vector<double>(4, -12.5));
  clim::write_grid(f, path("grid.json").string());
  SyncOptions s{path("grid.json").string(), records, path("synced.jsonl").string(), {"temp"}, 9};
  std::stringstream out, err;
  ASSERT_EQ(cmd_sync(s, out, err), kOk) << err.str();
  for (const auto& r : graph::read_jsonl(s.out))
    for (const auto& row : r.phys.at("temp"))
      for (double v : row) EXPECT_EQ(v, -12.5);

  f.years = {2040};
  f.values["temp"].resize(1);
  clim::write_grid(f, path("short.json").string());
  s.grid = path("short.json").string();
  EXPECT_EQ(cmd_sync(s, out, err), kConfigError);
  s.grid = path("nope.json").string();
  EXPECT_EQ(cmd_sync(s, out, err), kIoError);
}

TEST_F(CliTest, TrainWritesTrialsAndAggregates) {
  const std::string records = gen_data(small_config());
  TrainOptions t;
  t.config = path("config.json").string();
  t.data = records;
  t.out = path("run").string();
  t.variant = "gcn+sage+temp";
  std::stringstream out, err;
  ASSERT_EQ(cmd_train(t, out, err), kOk) << err.str();
  for (int k = 1; k <= 2; ++k) {
    EXPECT_TRUE(fs::exists(path("run") / ("trial_" + std::to_string(k)) / "checkpoint.json"));
    const auto hist = lines(slurp(path("run") / ("trial_" + std::to_string(k)) / "history.csv"));
    ASSERT_EQ(hist.size(), 4u);
    EXPECT_EQ(hist[0], "epoch,lr,train_loss,val_loss,alpha,beta");
  }
  const auto rep = lines(slurp(path("run") / "report.csv"));
  ASSERT_EQ(rep.size(), 5u);
  EXPECT_EQ(rep[0], "variant,trial,rmse,mae,seconds,alpha,beta");
  EXPECT_EQ(rep[1].rfind("gcn+sage+temp,1,", 0), 0u);
  EXPECT_EQ(rep[3].rfind("gcn+sage+temp,mean,", 0), 0u);
  EXPECT_EQ(rep[4].rfind("gcn+sage+temp,std,", 0), 0u);
  EXPECT_EQ(lines(slurp(path("run") / "layers.csv")).size(), 16u);
  const auto ck = io::read_checkpoint((path("run") / "trial_2" / "checkpoint.json").string());
  EXPECT_EQ(ck.trial, 2);
  EXPECT_EQ(ck.model.cfg.variant(), "gcn+sage+temp");
}

TEST_F(CliTest, TrainIsByteReproducibleWithoutTiming) {
  const std::string records = gen_data(small_config());
  TrainOptions t;
  t.config = path("config.json").string();
  t.data = records;
  t.no_timing = true;
  t.trials = 1;
  std::stringstream out, err;
  t.out = path("r1").string();
  ASSERT_EQ(cmd_train(t, out, err), kOk) << err.str();
  t.out = path("r2").string();
  ASSERT_EQ(cmd_train(t, out, err), kOk);
  for (const char* f : {"report.csv", "layers.csv", "trial_1/history.csv", "trial_1/checkpoint.json"})
    EXPECT_EQ(slurp(path("r1") / f), slurp(path("r2") / f)) << f;
}

TEST_F(CliTest, TrainUsesGivenManifestAndFeatures) {
  const std::string records = gen_data(small_config());
  TrainOptions t;
  t.config = path("config.json").string();
  t.data = records;
  t.splits = (path("data") / "manifest.json").string();
  t.features = "none";
  t.trials = 1;
  t.out = path("run").string();
  std::stringstream out, err;
  ASSERT_EQ(cmd_train(t, out, err), kOk) << err.str();
  EXPECT_NE(out.str().find("[none]"), std::string::npos) << out.str();
  t.features = "smb+wind";
  EXPECT_EQ(cmd_train(t, out, err), kConfigError);
  t.features = "";
  t.variant = "lstm";
  EXPECT_EQ(cmd_train(t, out, err), kConfigError);
}

TEST_F(CliTest, AblateComparesGroups) {
  const std::string records = gen_data(small_config());
  AblateOptions a;
  a.base.config = path("config.json").string();
  a.base.data = records;
  a.base.trials = 1;
  a.base.epochs = 2;
  a.base.out = path("abl").string();
  a.variants = "sage+temp,gcn";
  a.feature_sets = "smb,+melt";
  std::stringstream out, err;
  ASSERT_EQ(cmd_ablate(a, out, err), kOk) << err.str();
  const auto rows = lines(slurp(path("abl") / "comparison.csv"));
  ASSERT_EQ(rows.size(), 5u);
  EXPECT_EQ(rows[0],
            "rank,variant,features,trials,rmse_mean,rmse_std,mae_mean,mae_std,seconds_mean,alpha_mean,beta_mean");
  EXPECT_TRUE(fs::exists(path("abl") / "sage_temp__smb_melt" / "report.csv"));
  EXPECT_TRUE(fs::exists(path("abl") / "gcn__smb" / "trial_1" / "history.csv"));
  double prev = -1;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto cols = split(rows[i], ',');
    EXPECT_EQ(cols[0], std::to_string(i));
    const double r = std::stod(cols[4]);
    EXPECT_GE(r, prev);
    prev = r;
  }
  a.variants = "";
  EXPECT_EQ(cmd_ablate(a, out, err), kConfigError);
  a.variants = "sage,bogus";
  EXPECT_EQ(cmd_ablate(a, out, err), kConfigError);
}

TEST(Gradcheck, PassesByDefaultAndFailsAtImpossibleTolerance) {
  std::stringstream out, err;
  EXPECT_EQ(cmd_gradcheck({}, out, err), kOk);
  const std::string text = out.str();
  for (const char* name : {"matmul", "conv_time", "sage_forward", "gcn_forward", "fuse3", "model:sage+temp"})
    EXPECT_NE(text.find(std::string("PASS ") + name), std::string::npos) << name;
  std::stringstream out2;
  EXPECT_EQ(cmd_gradcheck({0, 1e-12, 1e-5}, out2, err), kCheckFailed);
  EXPECT_NE(out2.str().find("FAIL "), std::string::npos);
  EXPECT_NE(out2.str().find("worst="), std::string::npos);
  EXPECT_EQ(cmd_gradcheck({0, -1.0, 1e-5}, out2, err), kConfigError);
}

TEST_F(CliTest, BinaryExitCodes) {
  REQUIRE_CLI();
  EXPECT_EQ(run_cli("--help"), 0);
  EXPECT_EQ(run_cli("train --help"), 0);
  EXPECT_EQ(run_cli(""), 2);
  EXPECT_EQ(run_cli("frobnicate"), 2);
  EXPECT_EQ(run_cli("train"), 2);  // --data is required
  EXPECT_EQ(run_cli("gen --config " + path("missing.json").string()), 3);
  EXPECT_EQ(run_cli("gradcheck --tol 1e-12"), 1);
  EXPECT_EQ(run_cli("gradcheck"), 0);
  const std::string cfg = small_config();
  EXPECT_EQ(run_cli("gen --config " + cfg + " --out " + path("d").string()), 0);
  EXPECT_TRUE(fs::exists(path("d") / "records.jsonl"));
  EXPECT_EQ(run_cli("ablate --data " + (path("d") / "records.jsonl").string() + " --variants ''"), 2);
  EXPECT_EQ(run_cli("sync --grid " + path("none.json").string() + " --records " +
                    (path("d") / "records.jsonl").string() + " --out " + path("o.jsonl").string()),
            3);
}
