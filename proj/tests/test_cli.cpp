// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "agenet/cli.hpp"
#include "agenet/data.hpp"

using namespace agenet;
namespace fs = std::filesystem;

namespace {

struct CliRun {
  int code = -1;
  std::string out;
  std::string err;
};

CliRun invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "agenet");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  CliRun r;
  r.code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

fs::path temp_path(const std::string& name) {
  return fs::temp_directory_path() / ("agenet_cli_" + name);
}

}  // namespace

TEST(Cli, Encode) {
  const CliRun r = invoke({"encode", "17", "16", "18"});
  EXPECT_EQ(r.code, kExitOk);
  EXPECT_EQ(r.out, "label [1,1,0]\nb [15.500000,16.500000,17.500000]\n");
}

TEST(Cli, LossSpotValues) {
  const CliRun a = invoke({"loss", "20", "20", "18", "20"});
  EXPECT_EQ(a.code, kExitOk);
  EXPECT_EQ(a.out.substr(0, 14), "loss 0.754380\n");
  const CliRun b = invoke({"loss", "20", "19", "17", "19"});
  EXPECT_EQ(b.out.substr(0, 14), "loss 0.310053\n");
  EXPECT_NE(b.out.find("grad "), std::string::npos);
}

TEST(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(invoke({}).code, kExitUsage);
  EXPECT_EQ(invoke({"frobnicate"}).code, kExitUsage);
  EXPECT_EQ(invoke({"gradcheck", "--scope", "net"}).code, kExitUsage);
  EXPECT_EQ(invoke({"encode", "17", "16"}).code, kExitUsage);
  EXPECT_EQ(invoke({"encode", "30", "16", "18"}).code, kExitUsage);
  EXPECT_EQ(invoke({"loss", "abc", "17", "16", "18"}).code, kExitUsage);
  EXPECT_EQ(invoke({"synth", "--count", "2"}).code, kExitUsage);
  EXPECT_EQ(invoke({"train", "--config", "/nonexistent/run.json"}).code, kExitUsage);
  EXPECT_EQ(invoke({"--help"}).code, kExitOk);
}

TEST(Cli, GradcheckOpsPasses) {
  const CliRun r = invoke({"gradcheck", "--scope", "ops", "--seeds", "2"});
  EXPECT_EQ(r.code, kExitOk) << r.out;
  EXPECT_NE(r.out.find("PASS affine"), std::string::npos);
  EXPECT_EQ(r.out.find("FAIL"), std::string::npos);
}

TEST(Cli, SynthDeterministicAndLoadable) {
  const fs::path a = temp_path("synth_a"), b = temp_path("synth_b");
  fs::remove_all(a);
  fs::remove_all(b);
  const std::vector<std::string> common = {"--count", "12", "--resolution", "16", "--seed", "7",
                                           "--noise", "0.05"};
  auto args_for = [&](const fs::path& dir) {
    std::vector<std::string> args = {"synth"};
    args.insert(args.end(), common.begin(), common.end());
    args.push_back("--out");
    args.push_back(dir.string());
    return args;
  };
  ASSERT_EQ(invoke(args_for(a)).code, kExitOk);
  ASSERT_EQ(invoke(args_for(b)).code, kExitOk);
  EXPECT_EQ(read_bytes(a / "manifest.csv"), read_bytes(b / "manifest.csv"));
  for (int i = 0; i < 12; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "images/%06d.img", i);
    EXPECT_EQ(read_bytes(a / name), read_bytes(b / name)) << name;
  }
  const auto loaded = load_manifest(a / "manifest.csv", AttributeSchema::morph());
  EXPECT_EQ(loaded.entries.size(), 12u);
  EXPECT_TRUE(loaded.rejected.empty());
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Cli, SynthZeroCountWritesHeaderOnly) {
  const fs::path dir = temp_path("synth_empty");
  fs::remove_all(dir);
  ASSERT_EQ(invoke({"synth", "--count", "0", "--out", dir.string()}).code, kExitOk);
  EXPECT_EQ(read_bytes(dir / "manifest.csv"), "path,age,gender,ethnicity\n");
  fs::remove_all(dir);
}

TEST(Cli, TrainThenEvalReproducesBest) {
  const fs::path dir = temp_path("train");
  fs::remove_all(dir);
  fs::create_directories(dir);
  {
    std::ofstream cfg(dir / "run.json");
    cfg << R"({"epochs": 2, "batch_size": 4, "crop_size": 12,
               "network": {"preset": "desk", "stage_channels": [8, 8, 16, 16]},
               "data": {"resolution": 16, "train_count": 8, "val_count": 4, "test_count": 4},
               "output_dir": "out"})";
  }
  const CliRun t = invoke({"train", "--config", (dir / "run.json").string(), "--seed", "3"});
  ASSERT_EQ(t.code, kExitOk) << t.err;
  EXPECT_NE(t.out.find("epoch 2 "), std::string::npos);
  const auto pos = t.out.find("best_val_mae ");
  ASSERT_NE(pos, std::string::npos);
  const std::string best = t.out.substr(pos + 13, t.out.find(' ', pos + 13) - pos - 13);

  const CliRun e = invoke({"eval", (dir / "out" / "best.agn").string(), "--split", "val"});
  ASSERT_EQ(e.code, kExitOk) << e.err;
  EXPECT_NE(e.out.find("\nmae " + best + "\n"), std::string::npos) << e.out;
  EXPECT_NE(e.out.find("samples 4"), std::string::npos);

  const CliRun mismatch = invoke({"eval", (dir / "out" / "best.agn").string(), "--schema", "utkface"});
  EXPECT_EQ(mismatch.code, kExitUsage);
  fs::remove_all(dir);
}

TEST(Cli, EvalMissingCheckpointIsUsageError) {
  EXPECT_EQ(invoke({"eval", "/nonexistent/best.agn"}).code, kExitUsage);
}

TEST(Cli, CorruptCheckpointIsFailure) {
  const fs::path p = temp_path("corrupt.agn");
  { std::ofstream(p, std::ios::binary) << "NOPE"; }
  const CliRun r = invoke({"eval", p.string()});
  EXPECT_EQ(r.code, kExitFailure);
  EXPECT_NE(r.err.find("magic"), std::string::npos);
  fs::remove(p);
}
