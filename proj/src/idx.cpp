#include <string>

#include "vaebench/binary_io.hpp"
#include "vaebench/dataset.hpp"
#include "vaebench/errors.hpp"

namespace vaebench {

namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

}  // namespace

Dataset decode_idx(std::vector<std::uint8_t> image_bytes, std::vector<std::uint8_t> label_bytes) {
  ByteReader images(std::move(image_bytes), "idx images");
  if (images.get_be<std::uint32_t>() != kImageMagic) throw FormatError("idx images: bad magic", 0);
  const auto n = images.get_be<std::uint32_t>();
  const std::size_t rows_at = images.offset();
  const auto rows = images.get_be<std::uint32_t>();
  const auto cols = images.get_be<std::uint32_t>();
  if (rows != cols || rows == 0) throw FormatError("idx images: images must be square", rows_at);

  ByteReader labels(std::move(label_bytes), "idx labels");
  if (labels.get_be<std::uint32_t>() != kLabelMagic) throw FormatError("idx labels: bad magic", 0);
  const std::size_t count_at = labels.offset();
  const auto label_count = labels.get_be<std::uint32_t>();
  if (label_count < n) {
    throw FormatError("idx labels: " + std::to_string(label_count) + " labels for " + std::to_string(n) + " images",
                      count_at);
  }

  Dataset data;
  data.mode = DatasetMode::pixel_image;
  data.image_size = rows;
  data.images.resize(n);
  const std::size_t pixels = std::size_t{rows} * cols;
  for (std::uint32_t i = 0; i < n; ++i) {
    auto& img = data.images[i];
    img.index = i;
    img.pixels.resize(pixels);
    images.need(pixels);
    for (double& p : img.pixels) p = static_cast<double>(images.get_u8()) / 255.0;
    img.truth = static_cast<double>(labels.get_u8());
  }
  return data;
}

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
  return decode_idx(read_file_bytes(images_path), read_file_bytes(labels_path));
}

}  // namespace vaebench
