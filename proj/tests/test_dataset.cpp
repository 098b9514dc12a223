#include <doctest.h>

#include <cmath>
#include <functional>

#include "vaebench/dataset.hpp"
#include "vaebench/errors.hpp"

using namespace vaebench;

namespace {

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<std::uint8_t>(v >> shift));
}

std::vector<std::uint8_t> idx_images(std::uint32_t n, std::uint32_t rows, const std::vector<std::uint8_t>& pixels) {
  std::vector<std::uint8_t> out;
  put_be32(out, 0x00000803);
  put_be32(out, n);
  put_be32(out, rows);
  put_be32(out, rows);
  out.insert(out.end(), pixels.begin(), pixels.end());
  return out;
}

std::vector<std::uint8_t> idx_labels(const std::vector<std::uint8_t>& labels) {
  std::vector<std::uint8_t> out;
  put_be32(out, 0x00000801);
  put_be32(out, static_cast<std::uint32_t>(labels.size()));
  out.insert(out.end(), labels.begin(), labels.end());
  return out;
}

std::size_t format_offset(const std::function<void()>& f) {
  try {
    f();
  } catch (const FormatError& e) {
    return e.offset();
  }
  FAIL("expected FormatError");
  return 0;
}

GenerationSpec small_spec() {
  GenerationSpec s;
  s.count = 4;
  s.image_size = 16;
  s.grid = 16;
  s.seed = 7;
  return s;
}

}  // namespace

TEST_CASE("hand-built IDX fixture") {
  // Two 2x2 images, stored row-major, and labels 3 and 7.
  const auto images = idx_images(2, 2, {0, 255, 51, 102, 1, 2, 3, 4});
  const auto labels = idx_labels({3, 7});
  REQUIRE(images.size() == 16 + 8);
  REQUIRE(images[3] == 0x03);
  const Dataset d = decode_idx(images, labels);
  CHECK(d.mode == DatasetMode::pixel_image);
  CHECK(d.image_size == 2);
  REQUIRE(d.size() == 2);
  CHECK(d.images[0].pixels == std::vector<double>{0.0, 1.0, 0.2, 0.4});
  CHECK(d.images[1].pixels == std::vector<double>{1 / 255.0, 2 / 255.0, 3 / 255.0, 4 / 255.0});
  CHECK(d.images[0].truth == 3.0);
  CHECK(d.images[1].truth == 7.0);
  CHECK(d.images[1].index == 1);
  CHECK(d.labels() == std::vector<int>{0, 1});
}

TEST_CASE("IDX all-zero image") {
  const Dataset d = decode_idx(idx_images(1, 3, std::vector<std::uint8_t>(9, 0)), idx_labels({0}));
  for (double p : d.images[0].pixels) CHECK(p == 0.0);
}

TEST_CASE("malformed IDX input reports the byte offset") {
  const auto labels = idx_labels({1, 2});
  auto images = idx_images(2, 2, {1, 2, 3, 4, 5, 6, 7, 8});

  auto bad_magic = images;
  bad_magic[2] = 0x09;
  CHECK(format_offset([&] { decode_idx(bad_magic, labels); }) == 0);
  auto bad_label_magic = labels;
  bad_label_magic[3] = 0x03;
  CHECK(format_offset([&] { decode_idx(images, bad_label_magic); }) == 0);

  // The second image starts at 16 + 4 and is cut short.
  auto truncated = images;
  truncated.resize(16 + 4 + 3);
  CHECK(format_offset([&] { decode_idx(truncated, labels); }) == 20);
  // Header cut inside the row count.
  auto short_header = images;
  short_header.resize(10);
  CHECK(format_offset([&] { decode_idx(short_header, labels); }) == 8);
  // Fewer labels than images: the label count field is at offset 4.
  CHECK(format_offset([&] { decode_idx(images, idx_labels({1})); }) == 4);
  auto short_labels = labels;
  short_labels.pop_back();
  CHECK(format_offset([&] { decode_idx(images, short_labels); }) == 9);
}

TEST_CASE("dataset generation is deterministic") {
  const Dataset a = generate_dataset(small_spec());
  const Dataset b = generate_dataset(small_spec());
  CHECK(encode_dataset(a) == encode_dataset(b));
  GenerationSpec other = small_spec();
  other.seed = 8;
  CHECK(encode_dataset(generate_dataset(other)) != encode_dataset(a));
}

TEST_CASE("generated data statistics") {
  GenerationSpec s = small_spec();
  s.count = 200;
  s.snr = 0.25;
  const Dataset d = generate_dataset(s);
  double mean = 0.0, sq = 0.0, n = 0.0;
  for (const auto& img : d.images)
    for (double p : img.pixels) {
      mean += p;
      n += 1.0;
    }
  mean /= n;
  for (const auto& img : d.images)
    for (double p : img.pixels) sq += (p - mean) * (p - mean);
  // Unit signal variance plus noise variance 1/snr.
  CHECK(sq / n == doctest::Approx(1.0 + 4.0).epsilon(0.03));
  const auto levels = d.truth_levels();
  CHECK(levels == std::vector<double>{0.0, 1.0});
  for (const auto& img : d.images) {
    CHECK(std::abs(img.pose.rotation.norm() - 1.0) < 1e-12);
    CHECK(img.pose.rotation.w >= 0.0);
    CHECK(std::abs(img.pose.shift[0]) <= 2.0);
    CHECK(img.pose.kernel_id < 3);
  }
}

TEST_CASE("degenerate pipeline reproduces the standardized projection") {
  GenerationSpec s = small_spec();
  s.count = 3;
  s.snr = 1e12;
  s.kernel_ids = {0};
  s.random_poses = false;
  s.law = ConformationLaw::discrete(1);
  const Dataset d = generate_dataset(s);
  const Image clean = project(make_phantom(0.0, 16));
  double mean = 0.0, sq = 0.0;
  for (double p : clean.pixels) mean += p;
  mean /= static_cast<double>(clean.pixels.size());
  for (double p : clean.pixels) sq += (p - mean) * (p - mean);
  const double sd = std::sqrt(sq / static_cast<double>(clean.pixels.size()));
  double worst = 0.0;
  for (const auto& img : d.images)
    for (std::size_t i = 0; i < clean.pixels.size(); ++i)
      worst = std::max(worst, std::abs(img.pixels[i] - (clean.pixels[i] - mean) / sd));
  // Noise at snr 1e12 has standard deviation 1e-6 on unit-variance signal.
  CHECK(worst < 1e-5);
}

TEST_CASE("dataset container round trip and corruption") {
  const Dataset d = generate_dataset(small_spec());
  const auto bytes = encode_dataset(d);
  const Dataset back = decode_dataset(bytes);
  CHECK(encode_dataset(back) == bytes);
  CHECK(back.images[2].pixels == d.images[2].pixels);
  CHECK(back.images[2].pose.shift == d.images[2].pose.shift);

  auto bad = bytes;
  bad[1] = 'X';
  CHECK(format_offset([&] { decode_dataset(bad); }) == 0);
  auto cut = bytes;
  cut.resize(bytes.size() - 5);
  // The 40-byte header promises more records than follow it.
  CHECK(format_offset([&] { decode_dataset(cut); }) == 40);
  auto extra = bytes;
  extra.push_back(0);
  CHECK(format_offset([&] { decode_dataset(extra); }) == bytes.size());
}

TEST_CASE("conformation law parsing") {
  CHECK(ConformationLaw::parse("uniform").kind == ConformationLaw::Kind::uniform);
  CHECK(ConformationLaw::parse("discrete:3").levels == 3);
  CHECK(ConformationLaw::parse("discrete:3").to_string() == "discrete:3");
  CHECK_THROWS_AS(ConformationLaw::parse("discrete:0"), ConfigError);
  CHECK_THROWS_AS(ConformationLaw::parse("gaussian"), ConfigError);
}
