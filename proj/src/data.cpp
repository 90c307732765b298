// SPDX-License-Identifier: Apache-2.0
#include "agenet/data.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace agenet {

namespace fs = std::filesystem;

namespace {

constexpr char kImageMagic[4] = {'I', 'M', 'G', '1'};
constexpr std::size_t kImageHeaderBytes = 12;

void put_u32(std::string& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void check_image_shape(const Tensor& image, const char* what) {
  if (image.rank() != 3 || image.dim(0) != 3) {
    throw ShapeError(std::string(what) + ": expected [3,H,W], got " + shape_string(image.shape()));
  }
}

}  // namespace

void write_image(const fs::path& path, const Tensor& image) {
  check_image_shape(image, "write_image");
  const std::size_t h = image.dim(1), w = image.dim(2);
  std::string buf(kImageMagic, 4);
  put_u32(buf, static_cast<std::uint32_t>(h));
  put_u32(buf, static_cast<std::uint32_t>(w));
  buf.reserve(kImageHeaderBytes + 4 * image.size());
  for (double v : image.values()) put_u32(buf, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

Tensor read_image(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open image " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < kImageHeaderBytes || std::memcmp(bytes.data(), kImageMagic, 4) != 0) {
    throw std::runtime_error("image " + path.string() + ": bad magic");
  }
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::size_t h = get_u32(p + 4), w = get_u32(p + 8);
  const std::size_t n = 3 * h * w;
  if (bytes.size() != kImageHeaderBytes + 4 * n) {
    throw std::runtime_error("image " + path.string() + ": expected " +
                             std::to_string(kImageHeaderBytes + 4 * n) + " bytes, found " +
                             std::to_string(bytes.size()));
  }
  Tensor t({3, h, w});
  for (std::size_t i = 0; i < n; ++i) {
    t[i] = std::bit_cast<float>(get_u32(p + kImageHeaderBytes + 4 * i));
  }
  return t;
}

// ---- manifest ----------------------------------------------------------------

namespace {

constexpr const char* kManifestHeader = "path,age,gender,ethnicity";

std::string trim_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

int parse_int_field(const std::string& s, const char* field, std::size_t line_no) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    throw std::runtime_error("manifest line " + std::to_string(line_no) + ": field '" + field +
                             "' is not an integer: '" + s + "'");
  }
  return v;
}

bool image_file_ok(const fs::path& path) {
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) return false;
  std::ifstream in(path, std::ios::binary);
  std::array<unsigned char, kImageHeaderBytes> hdr{};
  if (!in.read(reinterpret_cast<char*>(hdr.data()), hdr.size())) return false;
  if (std::memcmp(hdr.data(), kImageMagic, 4) != 0) return false;
  const std::uintmax_t expected =
      kImageHeaderBytes + 12ull * get_u32(hdr.data() + 4) * get_u32(hdr.data() + 8);
  return fs::file_size(path, ec) == expected;
}

}  // namespace

ManifestLoadResult load_manifest(const fs::path& file, const AttributeSchema& schema) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("manifest not found: " + file.string());
  const fs::path base = file.parent_path();

  ManifestLoadResult result;
  std::string line;
  if (!std::getline(in, line)) {
    throw std::runtime_error("manifest " + file.string() + ": missing header '" +
                             std::string(kManifestHeader) + "'");
  }
  line = trim_cr(line);
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  if (line != kManifestHeader) {
    throw std::runtime_error("manifest " + file.string() + ": header must be '" +
                             std::string(kManifestHeader) + "', got '" + line + "'");
  }

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim_cr(line);
    if (line.empty()) continue;
    if (line == kManifestHeader) {
      throw std::runtime_error("manifest " + file.string() + " line " + std::to_string(line_no) +
                               ": duplicate header");
    }
    const auto fields = split_fields(line);
    if (fields.size() != 4 || fields[0].empty()) {
      throw std::runtime_error("manifest " + file.string() + " line " + std::to_string(line_no) +
                               ": expected 4 fields (path,age,gender,ethnicity), got " +
                               std::to_string(fields.size()));
    }
    ManifestEntry e;
    e.path = fields[0];
    if (e.path.is_relative()) e.path = base / e.path;
    e.age = parse_int_field(fields[1], "age", line_no);
    e.gender = parse_int_field(fields[2], "gender", line_no);
    e.ethnicity = parse_int_field(fields[3], "ethnicity", line_no);

    const std::string where = "line " + std::to_string(line_no) + ": ";
    if (e.age < schema.a_min || e.age > schema.a_max) {
      result.rejected.push_back(where + "age " + std::to_string(e.age) + " outside [" +
                                std::to_string(schema.a_min) + ", " +
                                std::to_string(schema.a_max) + "]");
      continue;
    }
    if (e.gender < 0 || static_cast<std::size_t>(e.gender) >= schema.gender_classes) {
      result.rejected.push_back(where + "gender " + std::to_string(e.gender) + " out of range");
      continue;
    }
    if (e.ethnicity < 0 || (schema.ethnicity_classes > 0 &&
                            static_cast<std::size_t>(e.ethnicity) >= schema.ethnicity_classes)) {
      result.rejected.push_back(where + "ethnicity " + std::to_string(e.ethnicity) +
                                " out of range");
      continue;
    }
    if (!image_file_ok(e.path)) {
      result.rejected.push_back(where + "image missing or unreadable: " + e.path.string());
      continue;
    }
    result.entries.push_back(std::move(e));
  }
  if (line_no == 1) result.warnings.push_back("manifest " + file.string() + " has no rows");
  return result;
}

void write_manifest(const fs::path& file, std::span<const ManifestEntry> entries) {
  std::ofstream out(file, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + file.string() + " for writing");
  out << kManifestHeader << '\n';
  for (const auto& e : entries) {
    const std::string p = e.path.generic_string();
    if (p.find(',') != std::string::npos || p.find('\n') != std::string::npos) {
      throw std::invalid_argument("manifest path may not contain ',' or newline: " + p);
    }
    out << p << ',' << e.age << ',' << e.gender << ',' << e.ethnicity << '\n';
  }
  if (!out) throw std::runtime_error("failed writing " + file.string());
}

Sample load_sample(const ManifestEntry& entry) {
  return {read_image(entry.path), entry.age, entry.gender, entry.ethnicity};
}

// ---- splitting and cropping --------------------------------------------------

SplitIndices split_811(std::size_t count, std::uint64_t seed) {
  if (count < 10) {
    throw std::invalid_argument("split_811: need at least 10 entries, got " +
                                std::to_string(count));
  }
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  // Explicit Fisher-Yates so the permutation does not depend on the standard library.
  for (std::size_t i = count - 1; i > 0; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % (i + 1));
    std::swap(order[i], order[j]);
  }
  const std::size_t tenth = count / 10;
  const std::size_t n_train = count - 2 * tenth;
  SplitIndices s;
  s.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.val.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train),
               order.begin() + static_cast<std::ptrdiff_t>(n_train + tenth));
  s.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train + tenth), order.end());
  return s;
}

Tensor crop(const Tensor& image, std::size_t top, std::size_t left, std::size_t out_size) {
  check_image_shape(image, "crop");
  const std::size_t h = image.dim(1), w = image.dim(2);
  if (out_size == 0 || top + out_size > h || left + out_size > w) {
    throw std::invalid_argument("crop: window " + std::to_string(out_size) + " at (" +
                                std::to_string(top) + "," + std::to_string(left) +
                                ") exceeds image " + shape_string(image.shape()));
  }
  Tensor out({3, out_size, out_size});
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t y = 0; y < out_size; ++y) {
      const double* src = image.data() + (c * h + top + y) * w + left;
      std::copy(src, src + out_size, out.data() + (c * out_size + y) * out_size);
    }
  }
  return out;
}

Tensor random_crop(const Tensor& image, std::size_t out_size, std::mt19937_64& rng) {
  check_image_shape(image, "random_crop");
  if (out_size > image.dim(1) || out_size > image.dim(2)) {
    throw std::invalid_argument("random_crop: size " + std::to_string(out_size) +
                                " larger than image " + shape_string(image.shape()));
  }
  const std::size_t top = static_cast<std::size_t>(rng() % (image.dim(1) - out_size + 1));
  const std::size_t left = static_cast<std::size_t>(rng() % (image.dim(2) - out_size + 1));
  return crop(image, top, left, out_size);
}

Tensor center_crop(const Tensor& image, std::size_t out_size) {
  check_image_shape(image, "center_crop");
  if (out_size > image.dim(1) || out_size > image.dim(2)) {
    throw std::invalid_argument("center_crop: size " + std::to_string(out_size) +
                                " larger than image " + shape_string(image.shape()));
  }
  return crop(image, (image.dim(1) - out_size) / 2, (image.dim(2) - out_size) / 2, out_size);
}

Tensor stack_images(std::span<const Tensor> images) {
  if (images.empty()) throw std::invalid_argument("stack_images: empty batch");
  const Shape& s = images.front().shape();
  Tensor out({images.size(), s.at(0), s.at(1), s.at(2)});
  const std::size_t per = images.front().size();
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (images[i].shape() != s) {
      throw ShapeError("stack_images: image " + std::to_string(i) + " has shape " +
                       shape_string(images[i].shape()) + ", expected " + shape_string(s));
    }
    std::copy(images[i].data(), images[i].data() + per, out.data() + i * per);
  }
  return out;
}

// ---- synthetic face proxies --------------------------------------------------

namespace {

enum Plane { kRadial = 0, kRamp = 1, kFlat = 2 };

// Channel -> plane for each ethnicity class.
constexpr std::array<std::array<int, 3>, 4> kPermutations{{
    {kRadial, kRamp, kFlat},
    {kRamp, kFlat, kRadial},
    {kFlat, kRadial, kRamp},
    {kRadial, kFlat, kRamp},
}};

}  // namespace

double synthetic_frequency(int age, int a_min, int a_max) {
  if (a_max <= a_min) throw std::invalid_argument("synthetic_frequency: a_max must exceed a_min");
  return 1.0 + 6.0 * static_cast<double>(age - a_min) / static_cast<double>(a_max - a_min);
}

std::size_t radial_channel(int ethnicity) {
  const auto& perm = kPermutations.at(static_cast<std::size_t>(ethnicity));
  return static_cast<std::size_t>(std::find(perm.begin(), perm.end(), kRadial) - perm.begin());
}

Tensor render_face_proxy(std::size_t resolution, int age, int gender, int ethnicity, int a_min,
                         int a_max) {
  if (resolution < 2) throw std::invalid_argument("render_face_proxy: resolution must be >= 2");
  if (ethnicity < 0 || ethnicity >= static_cast<int>(kPermutations.size())) {
    throw std::out_of_range("render_face_proxy: ethnicity " + std::to_string(ethnicity) +
                            " outside 0..3");
  }
  const double f = synthetic_frequency(age, a_min, a_max);
  const double sign = gender % 2 == 0 ? 1.0 : -1.0;
  const double centre = 0.5 * static_cast<double>(resolution - 1);
  const double radius = 0.5 * static_cast<double>(resolution);
  const auto& perm = kPermutations[static_cast<std::size_t>(ethnicity)];

  Tensor img({3, resolution, resolution});
  const std::size_t plane = resolution * resolution;
  for (std::size_t y = 0; y < resolution; ++y) {
    for (std::size_t x = 0; x < resolution; ++x) {
      const double dx = static_cast<double>(x) - centre;
      const double dy = static_cast<double>(y) - centre;
      const double r = std::sqrt(dx * dx + dy * dy) / radius;
      const std::array<double, 3> v{
          0.5 + 0.5 * std::cos(2.0 * std::numbers::pi * f * r),
          0.5 + 0.4 * sign * (dx / centre),
          0.5,
      };
      for (std::size_t c = 0; c < 3; ++c) img[c * plane + y * resolution + x] = v[perm[c]];
    }
  }
  return img;
}

Sample synth_generate(const SyntheticSpec& spec, std::size_t index) {
  if (spec.noise_sigma < 0.0) throw std::invalid_argument("synth: noise_sigma must be >= 0");
  if (spec.ethnicity_classes == 0 || spec.ethnicity_classes > kPermutations.size()) {
    throw std::invalid_argument("synth: ethnicity_classes must be in 1..4");
  }
  std::seed_seq seq{static_cast<std::uint32_t>(spec.seed), static_cast<std::uint32_t>(spec.seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                    0x5eedu};
  std::mt19937_64 rng(seq);
  const auto span = static_cast<std::uint64_t>(spec.a_max - spec.a_min + 1);
  Sample s;
  s.age = spec.a_min + static_cast<int>(rng() % span);
  s.gender = static_cast<int>(rng() % 2);
  s.ethnicity = static_cast<int>(rng() % spec.ethnicity_classes);
  s.image = render_face_proxy(spec.resolution, s.age, s.gender, s.ethnicity, spec.a_min,
                              spec.a_max);
  std::normal_distribution<double> noise(0.0, spec.noise_sigma);
  for (double& v : s.image.values()) {
    if (spec.noise_sigma > 0.0) v += noise(rng);
    v = static_cast<double>(static_cast<float>(std::clamp(v, 0.0, 1.0)));
  }
  return s;
}

}  // namespace agenet
