// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "agenet/config.hpp"

using namespace agenet;
using nlohmann::json;

namespace {

std::string error_of(const json& j) {
  try {
    train_config_from_json(j, {}, false);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Config, DefaultsWhenEmpty) {
  const TrainConfig cfg = train_config_from_json(json::object());
  EXPECT_EQ(cfg.epochs, 200u);
  EXPECT_EQ(cfg.batch_size, 64u);
  EXPECT_EQ(cfg.learning_rate, 0.0005);
  EXPECT_EQ(cfg.loss, LossKind::Ecr);
  EXPECT_TRUE(cfg.attribute_guidance);
  EXPECT_EQ(cfg.network.name, "desk");
  EXPECT_EQ(cfg.schema.name, AttributeSchema::morph().name);
}

TEST(Config, ReadsEveryField) {
  const json j = json::parse(R"({
    "epochs": 3, "batch_size": 8, "learning_rate": 0.001, "seed": 9, "loss": "l1",
    "attribute_guidance": false, "crop_size": 28,
    "head": {"global_dim": 32, "fuse_kernel": 5, "alpha": 0.5, "beta": 0.25, "gamma": 0},
    "network": {"preset": "desk", "stage_channels": [8, 16, 32, 64]},
    "schema": "utkface",
    "data": {"resolution": 32, "noise_sigma": 0.02, "synthetic_seed": 4,
             "train_count": 10, "val_count": 5, "test_count": 5}
  })");
  const TrainConfig cfg = train_config_from_json(j);
  EXPECT_EQ(cfg.epochs, 3u);
  EXPECT_EQ(cfg.seed, 9u);
  EXPECT_EQ(cfg.loss, LossKind::L1);
  EXPECT_FALSE(cfg.attribute_guidance);
  EXPECT_EQ(cfg.head.global_dim, 32u);
  EXPECT_EQ(cfg.head.fuse_kernel, 5u);
  EXPECT_EQ(cfg.head.gamma, 0.0);
  EXPECT_EQ(cfg.network.stage_channels[3], 64u);
  EXPECT_EQ(cfg.schema.a_max, 100);
  EXPECT_EQ(cfg.data.resolution, 32u);
  EXPECT_EQ(cfg.data.train_count, 10u);
  EXPECT_EQ(cfg.model_config().network.input_resolution, 28u);
}

TEST(Config, UnknownKeyReportedWithPath) {
  EXPECT_EQ(error_of({{"epochz", 3}}), "epochz: unknown key");
  EXPECT_EQ(error_of({{"data", {{"train_cnt", 3}}}}), "data.train_cnt: unknown key");
  EXPECT_EQ(error_of({{"head", {{"delta", 1.0}}}}), "head.delta: unknown key");
}

TEST(Config, TypeAndValueErrors) {
  EXPECT_NE(error_of({{"epochs", "many"}}).find("epochs"), std::string::npos);
  EXPECT_NE(error_of({{"epochs", -1}}).find("epochs"), std::string::npos);
  EXPECT_NE(error_of({{"loss", "mse"}}).find("loss"), std::string::npos);
  EXPECT_NE(error_of({{"network", "resnet"}}).find("network"), std::string::npos);
  EXPECT_NE(error_of({{"schema", {{"name", "x"}}}}).find("schema"), std::string::npos);
  EXPECT_NE(error_of(json::array()).size(), 0u);
}

TEST(Config, CustomSchema) {
  const json j = {{"schema",
                   {{"name", "narrow"}, {"a_min", 20}, {"a_max", 30}, {"group_boundaries", {20, 25}},
                    {"ethnicity_classes", 2}}}};
  const TrainConfig cfg = train_config_from_json(j);
  EXPECT_EQ(cfg.schema.name, "narrow");
  EXPECT_EQ(cfg.schema.age_groups(), 2u);
  EXPECT_EQ(cfg.schema.ethnicity_classes, 2u);
  EXPECT_EQ(cfg.schema.gender_classes, 2u);
}

TEST(Config, JsonRoundTrip) {
  TrainConfig cfg;
  cfg.epochs = 7;
  cfg.loss = LossKind::MulticlassCe;
  cfg.head.alpha = 0.3;
  cfg.schema = AttributeSchema::lap2016();
  cfg.network.stage_blocks = {2, 1, 1, 1};
  cfg.data.noise_sigma = 0.125;
  const json j = to_json(cfg);
  const TrainConfig back = train_config_from_json(j, {}, false);
  EXPECT_EQ(to_json(back), j);
  EXPECT_EQ(back.network.stage_blocks[0], 2u);
  EXPECT_EQ(back.schema.ethnicity_classes, 0u);
}

TEST(Config, FileLoadResolvesManifestRelativeToConfig) {
  const auto dir = std::filesystem::temp_directory_path() / "agenet_config_test";
  std::filesystem::create_directories(dir / "data");
  { std::ofstream(dir / "data" / "m.csv") << "path,age,gender,ethnicity\n"; }
  { std::ofstream(dir / "run.json") << R"({"data": {"manifest": "data/m.csv"}})"; }
  const TrainConfig cfg = load_train_config(dir / "run.json");
  EXPECT_EQ(cfg.data.manifest, dir / "data" / "m.csv");

  { std::ofstream(dir / "bad.json") << R"({"data": {"manifest": "nope.csv"}})"; }
  EXPECT_THROW(load_train_config(dir / "bad.json"), ConfigError);
  { std::ofstream(dir / "broken.json") << "{"; }
  EXPECT_THROW(load_train_config(dir / "broken.json"), ConfigError);
  EXPECT_THROW(load_train_config(dir / "absent.json"), std::runtime_error);
  std::filesystem::remove_all(dir);
}
