#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vaebench/forward_model.hpp"
#include "vaebench/random.hpp"

namespace vaebench {

enum class DatasetMode : std::uint32_t { tomographic = 0, pixel_image = 1 };

struct ParticleImage {
  std::vector<double> pixels;  // D*D, row-major
  Pose pose;
  double truth = 0.0;  // conformation in [0,1], or class label in pixel_image mode
  std::size_t index = 0;
};

struct Dataset {
  DatasetMode mode = DatasetMode::tomographic;
  std::size_t image_size = 0;
  double snr = 0.0;
  std::uint64_t seed = 0;
  std::vector<ParticleImage> images;

  std::size_t size() const noexcept { return images.size(); }
  /// Distinct truth values in ascending order.
  std::vector<double> truth_levels() const;
  /// Truth mapped to its rank in truth_levels().
  std::vector<int> labels() const;
  /// Throws ContractError if images disagree on size or indices repeat.
  void validate() const;
};

struct ConformationLaw {
  enum class Kind { uniform, discrete } kind = Kind::uniform;
  std::size_t levels = 2;  // K for discrete

  static ConformationLaw uniform() { return {}; }
  static ConformationLaw discrete(std::size_t k) { return {Kind::discrete, k}; }
  /// Parses "uniform" or "discrete:K".
  static ConformationLaw parse(const std::string& text);
  std::string to_string() const;
};

struct GenerationSpec {
  std::size_t count = 2000;
  std::size_t image_size = 32;
  std::size_t grid = 32;
  double snr = 0.1;
  ConformationLaw law = ConformationLaw::discrete(2);
  std::uint64_t seed = 0;
  /// When false every image gets the identity rotation and zero shift.
  bool random_poses = true;
  /// Kernel ids drawn uniformly per image.
  std::vector<std::size_t> kernel_ids{0, 1, 2};
  double max_shift = 2.0;
  PhantomGeometry geometry{};
};

/// x_i = h * (T P R V_c) + noise. Clean images are standardized over the whole
/// dataset, then noise of variance 1/snr is added. Pixels are rounded to float32
/// so the in-memory dataset matches its file form exactly.
Dataset generate_dataset(const GenerationSpec& spec);

/// Uniformly distributed unit quaternion with w >= 0.
Quaternion random_rotation(Rng& rng);

// Dataset container, all little-endian:
//   magic "VBDS" | u32 version (=1) | u32 mode | u64 n | u32 D | f64 snr | u64 seed
//   n x { u64 index | f64 truth | 7 x f64 pose (qw qx qy qz t0 t1 reserved=0) | u32 kernel_id | D*D x f32 pixels }
inline constexpr std::uint32_t kDatasetVersion = 1;

std::vector<std::uint8_t> encode_dataset(const Dataset& data);
Dataset decode_dataset(std::vector<std::uint8_t> bytes);
void save_dataset(const std::string& path, const Dataset& data);
Dataset load_dataset(const std::string& path);

/// Reads an IDX image file (magic 0x00000803, n x rows x cols unsigned bytes
/// scaled to [0,1]) and its label file (magic 0x00000801). Labels become truth.
Dataset load_idx(const std::string& images_path, const std::string& labels_path);
Dataset decode_idx(std::vector<std::uint8_t> image_bytes, std::vector<std::uint8_t> label_bytes);

}  // namespace vaebench
