// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "agenet/data.hpp"

using namespace agenet;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = fs::temp_directory_path() / ("agenet_test_" + std::to_string(rd()) + std::to_string(rd()));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

Tensor small_image(double fill = 0.25) { return Tensor({3, 4, 4}, fill); }

int sign_changes_along_radius(const Tensor& img, std::size_t channel) {
  const std::size_t res = img.dim(1);
  const std::size_t row = res / 2;
  int changes = 0;
  double prev = 0.0;
  for (std::size_t x = res / 2; x < res; ++x) {
    const double v = img[channel * res * res + row * res + x] - 0.5;
    if (v == 0.0) continue;
    if (prev != 0.0 && (v > 0) != (prev > 0)) ++changes;
    prev = v;
  }
  return changes;
}

double half_mean(const Tensor& img, std::size_t channel, bool left) {
  const std::size_t res = img.dim(1);
  double s = 0.0;
  for (std::size_t y = 0; y < res; ++y) {
    for (std::size_t x = left ? 0 : res / 2; x < (left ? res / 2 : res); ++x) {
      s += img[channel * res * res + y * res + x];
    }
  }
  return s;
}

}  // namespace

TEST(ImageFile, RoundTripIsLossless) {
  TempDir dir;
  const auto s = synth_generate({.resolution = 16, .noise_sigma = 0.05, .seed = 4}, 2);
  write_image(dir.path() / "a.img", s.image);
  EXPECT_EQ(read_image(dir.path() / "a.img"), s.image);
  EXPECT_EQ(fs::file_size(dir.path() / "a.img"), 12u + 3u * 16 * 16 * 4);
}

TEST(ImageFile, RejectsBadMagicAndTruncation) {
  TempDir dir;
  write_image(dir.path() / "a.img", small_image());
  std::string bytes;
  {
    std::ifstream in(dir.path() / "a.img", std::ios::binary);
    bytes.assign(std::istreambuf_iterator<char>(in), {});
  }
  write_text(dir.path() / "bad.img", "IMG2" + bytes.substr(4));
  EXPECT_THROW(read_image(dir.path() / "bad.img"), std::runtime_error);
  write_text(dir.path() / "short.img", bytes.substr(0, bytes.size() - 3));
  EXPECT_THROW(read_image(dir.path() / "short.img"), std::runtime_error);
  EXPECT_THROW(read_image(dir.path() / "missing.img"), std::runtime_error);
}

TEST(Manifest, ValidFile) {
  TempDir dir;
  for (int i = 0; i < 3; ++i) write_image(dir.path() / (std::to_string(i) + ".img"), small_image());
  write_text(dir.path() / "m.csv", "path,age,gender,ethnicity\n0.img,20,0,1\n1.img,45,1,3\n2.img,77,0,0\n");
  const auto r = load_manifest(dir.path() / "m.csv", AttributeSchema::morph());
  ASSERT_EQ(r.entries.size(), 3u);
  EXPECT_TRUE(r.rejected.empty());
  EXPECT_EQ(r.entries[1].age, 45);
  EXPECT_EQ(r.entries[1].ethnicity, 3);
  EXPECT_EQ(r.entries[2].path, dir.path() / "2.img");
}

TEST(Manifest, OutOfRangeAgeRejectedWithLine) {
  TempDir dir;
  write_image(dir.path() / "0.img", small_image());
  write_text(dir.path() / "m.csv", "path,age,gender,ethnicity\r\n0.img,30,0,1\r\n0.img,150,0,1\r\n");
  const auto r = load_manifest(dir.path() / "m.csv", AttributeSchema::utkface());
  EXPECT_EQ(r.entries.size(), 1u);
  ASSERT_EQ(r.rejected.size(), 1u);
  EXPECT_EQ(r.rejected[0].rfind("line 3", 0), 0u) << r.rejected[0];
}

TEST(Manifest, MissingImageAndBadLabelsRejected) {
  TempDir dir;
  write_image(dir.path() / "0.img", small_image());
  write_text(dir.path() / "m.csv",
             "path,age,gender,ethnicity\nnope.img,30,0,1\n0.img,30,2,1\n0.img,30,0,4\n0.img,30,1,3\n");
  const auto r = load_manifest(dir.path() / "m.csv", AttributeSchema::morph());
  EXPECT_EQ(r.entries.size(), 1u);
  EXPECT_EQ(r.rejected.size(), 3u);
}

TEST(Manifest, HeaderOnlyWarns) {
  TempDir dir;
  write_text(dir.path() / "m.csv", "\xEF\xBB\xBFpath,age,gender,ethnicity\n");
  const auto r = load_manifest(dir.path() / "m.csv", AttributeSchema::morph());
  EXPECT_TRUE(r.entries.empty());
  EXPECT_EQ(r.warnings.size(), 1u);
}

TEST(Manifest, MalformedFilesThrow) {
  TempDir dir;
  const auto morph = AttributeSchema::morph();
  EXPECT_THROW(load_manifest(dir.path() / "absent.csv", morph), std::runtime_error);
  write_text(dir.path() / "a.csv", "");
  EXPECT_THROW(load_manifest(dir.path() / "a.csv", morph), std::runtime_error);
  write_text(dir.path() / "b.csv", "path,age,sex,ethnicity\n");
  EXPECT_THROW(load_manifest(dir.path() / "b.csv", morph), std::runtime_error);
  write_text(dir.path() / "c.csv", "path,age,gender,ethnicity\nx.img,20,0\n");
  EXPECT_THROW(load_manifest(dir.path() / "c.csv", morph), std::runtime_error);
  write_text(dir.path() / "d.csv", "path,age,gender,ethnicity\nx.img,twenty,0,0\n");
  EXPECT_THROW(load_manifest(dir.path() / "d.csv", morph), std::runtime_error);
  write_text(dir.path() / "e.csv", "path,age,gender,ethnicity\npath,age,gender,ethnicity\n");
  EXPECT_THROW(load_manifest(dir.path() / "e.csv", morph), std::runtime_error);
}

TEST(Manifest, WriteLoadRoundTrip) {
  TempDir dir;
  write_image(dir.path() / "x.img", small_image(0.5));
  const ManifestEntry entries[] = {{"x.img", 33, 1, 2}, {"x.img", 60, 0, 0}};
  write_manifest(dir.path() / "m.csv", entries);
  const auto r = load_manifest(dir.path() / "m.csv", AttributeSchema::morph());
  ASSERT_EQ(r.entries.size(), 2u);
  EXPECT_EQ(r.entries[0].age, 33);
  const auto s = load_sample(r.entries[0]);
  EXPECT_EQ(s.image, small_image(0.5));
  EXPECT_EQ(s.gender, 1);
  const ManifestEntry bad[] = {{"a,b.img", 33, 1, 2}};
  EXPECT_THROW(write_manifest(dir.path() / "n.csv", bad), std::invalid_argument);
}

TEST(Split, Ratios) {
  const auto s100 = split_811(100, 1);
  EXPECT_EQ(s100.train.size(), 80u);
  EXPECT_EQ(s100.val.size(), 10u);
  EXPECT_EQ(s100.test.size(), 10u);
  const auto s10 = split_811(10, 1);
  EXPECT_EQ(s10.train.size(), 8u);
  EXPECT_EQ(s10.val.size(), 1u);
  EXPECT_EQ(s10.test.size(), 1u);
  EXPECT_THROW(split_811(9, 1), std::invalid_argument);
}

TEST(Split, DisjointExhaustiveDeterministic) {
  const auto a = split_811(57, 42);
  const auto b = split_811(57, 42);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.val, b.val);
  EXPECT_EQ(a.test, b.test);
  std::set<std::size_t> all(a.train.begin(), a.train.end());
  all.insert(a.val.begin(), a.val.end());
  all.insert(a.test.begin(), a.test.end());
  EXPECT_EQ(all.size(), 57u);
  EXPECT_EQ(*all.rbegin(), 56u);
  EXPECT_NE(split_811(57, 43).train, a.train);
}

TEST(Crop, CenterOffset) {
  Tensor img({3, 64, 64});
  for (std::size_t i = 0; i < img.size(); ++i) img[i] = static_cast<double>(i);
  const Tensor c = center_crop(img, 56);
  EXPECT_EQ(c.shape(), (Shape{3, 56, 56}));
  EXPECT_EQ(c[0], img[4 * 64 + 4]);
  EXPECT_EQ(c, crop(img, 4, 4, 56));
  EXPECT_EQ(center_crop(img, 64), img);
  EXPECT_THROW(center_crop(img, 65), std::invalid_argument);
}

TEST(Crop, RandomOffsetsCoverRange) {
  Tensor img({3, 10, 10});
  for (std::size_t i = 0; i < img.size(); ++i) img[i] = static_cast<double>(i);
  std::mt19937_64 rng(3);
  std::set<double> corners;
  for (int i = 0; i < 400; ++i) {
    const Tensor c = random_crop(img, 8, rng);
    EXPECT_EQ(c.shape(), (Shape{3, 8, 8}));
    corners.insert(c[0]);
  }
  // Offsets in [0,2]^2: nine distinct top-left pixels.
  EXPECT_EQ(corners.size(), 9u);
  EXPECT_EQ(random_crop(img, 10, rng), img);
}

TEST(Crop, StackImages) {
  const Tensor imgs[] = {small_image(0.1), small_image(0.2)};
  const Tensor batch = stack_images(imgs);
  EXPECT_EQ(batch.shape(), (Shape{2, 3, 4, 4}));
  EXPECT_EQ(batch[48], 0.2);
  const Tensor mixed[] = {small_image(), Tensor({3, 5, 5})};
  EXPECT_THROW(stack_images(mixed), ShapeError);
}

TEST(Synth, Deterministic) {
  const SyntheticSpec spec{.resolution = 32, .noise_sigma = 0.1, .seed = 7, .count = 10};
  const auto a = synth_generate(spec, 3);
  const auto b = synth_generate(spec, 3);
  EXPECT_EQ(a.image, b.image);
  EXPECT_EQ(a.age, b.age);
  EXPECT_NE(synth_generate(spec, 4).image, a.image);
  for (double v : a.image.values()) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
    EXPECT_EQ(v, static_cast<double>(static_cast<float>(v)));
  }
}

TEST(Synth, LabelsWithinRange) {
  const SyntheticSpec spec{.resolution = 8, .seed = 1, .count = 300};
  std::set<int> genders, ethnicities;
  for (std::size_t i = 0; i < spec.count; ++i) {
    const auto s = synth_generate(spec, i);
    EXPECT_GE(s.age, 16);
    EXPECT_LE(s.age, 77);
    genders.insert(s.gender);
    ethnicities.insert(s.ethnicity);
  }
  EXPECT_EQ(genders.size(), 2u);
  EXPECT_EQ(ethnicities.size(), 4u);
}

TEST(Synth, StartingAgeHasOneRadialCycle) {
  EXPECT_EQ(synthetic_frequency(16, 16, 77), 1.0);
  EXPECT_EQ(synthetic_frequency(77, 16, 77), 7.0);
  for (int e = 0; e < 4; ++e) {
    const Tensor img = render_face_proxy(64, 16, 0, e, 16, 77);
    EXPECT_EQ(sign_changes_along_radius(img, radial_channel(e)), 2) << e;
  }
  const Tensor old = render_face_proxy(256, 77, 0, 0, 16, 77);
  EXPECT_EQ(sign_changes_along_radius(old, radial_channel(0)), 14);
}

TEST(Synth, GenderMirrorsRamp) {
  // Ethnicity 0 places the ramp in channel 1.
  const Tensor g0 = render_face_proxy(32, 40, 0, 0, 16, 77);
  const Tensor g1 = render_face_proxy(32, 40, 1, 0, 16, 77);
  EXPECT_GT(half_mean(g0, 1, false), half_mean(g0, 1, true));
  EXPECT_LT(half_mean(g1, 1, false), half_mean(g1, 1, true));
  EXPECT_EQ(half_mean(g0, radial_channel(0), true), half_mean(g1, radial_channel(0), true));
}

TEST(Synth, RejectsBadSpec) {
  EXPECT_THROW(synth_generate({.noise_sigma = -1.0}, 0), std::invalid_argument);
  EXPECT_THROW(synth_generate({.ethnicity_classes = 5}, 0), std::invalid_argument);
  EXPECT_THROW(render_face_proxy(32, 40, 0, 4, 16, 77), std::out_of_range);
}
