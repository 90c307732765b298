// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "agenet/attribute_head.hpp"
#include "agenet/tensor.hpp"

namespace agenet {

struct Sample {
  Tensor image;  // [3, H, W], values in [0, 1]
  int age = 0;
  int gender = 0;
  int ethnicity = 0;
};

// ---- image files -------------------------------------------------------------
//
// "IMG1" | height u32 LE | width u32 LE | 3*H*W float32 LE, channel-major.

void write_image(const std::filesystem::path& path, const Tensor& image);
Tensor read_image(const std::filesystem::path& path);

// ---- manifest ----------------------------------------------------------------
//
// UTF-8 comma-separated text, header exactly "path,age,gender,ethnicity". Relative
// paths resolve against the manifest's directory.

struct ManifestEntry {
  std::filesystem::path path;
  int age = 0;
  int gender = 0;
  int ethnicity = 0;
};

struct ManifestLoadResult {
  std::vector<ManifestEntry> entries;
  /// "line N: reason" for every row skipped because a label or file failed validation.
  std::vector<std::string> rejected;
  std::vector<std::string> warnings;
};

/// Throws on a missing file, a bad or duplicated header, or a malformed row.
ManifestLoadResult load_manifest(const std::filesystem::path& file, const AttributeSchema& schema);

void write_manifest(const std::filesystem::path& file, std::span<const ManifestEntry> entries);

Sample load_sample(const ManifestEntry& entry);

// ---- splitting and cropping --------------------------------------------------

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

/// Seeded shuffle of [0, count), then val = test = floor(count/10), train = the rest.
/// Rejects count < 10.
SplitIndices split_811(std::size_t count, std::uint64_t seed);

/// Uniform top-left offset in [0, H-out] x [0, W-out].
Tensor random_crop(const Tensor& image, std::size_t out_size, std::mt19937_64& rng);
/// Offset ((H-out)/2, (W-out)/2).
Tensor center_crop(const Tensor& image, std::size_t out_size);
Tensor crop(const Tensor& image, std::size_t top, std::size_t left, std::size_t out_size);

/// Stacks equally-sized [3,H,W] images into [N,3,H,W].
Tensor stack_images(std::span<const Tensor> images);

// ---- synthetic face proxies --------------------------------------------------
//
// Age drives the frequency of a concentric cosine pattern (1 + 6*(age-a_min)/(a_max-a_min)
// cycles from the centre to the edge), gender the sign of a horizontal luminance ramp,
// ethnicity a fixed permutation of the three channels.

struct SyntheticSpec {
  std::size_t resolution = 64;
  int a_min = 16;
  int a_max = 77;
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;
  std::size_t count = 0;
  std::size_t ethnicity_classes = 4;
};

/// Radial frequency in cycles for an age.
double synthetic_frequency(int age, int a_min, int a_max);

/// Renders a noise-free image for explicit labels (used by synth_generate).
Tensor render_face_proxy(std::size_t resolution, int age, int gender, int ethnicity, int a_min,
                         int a_max);

/// Deterministic in (spec.seed, index). Pixel values are rounded to float precision so
/// that an image file round trip is lossless.
Sample synth_generate(const SyntheticSpec& spec, std::size_t index);

/// Channel holding the radial pattern for an ethnicity.
std::size_t radial_channel(int ethnicity);

}  // namespace agenet
