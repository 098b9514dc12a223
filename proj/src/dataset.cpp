#include "vaebench/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "vaebench/binary_io.hpp"
#include "vaebench/errors.hpp"
#include "vaebench/random.hpp"

namespace vaebench {

std::vector<double> Dataset::truth_levels() const {
  std::set<double> s;
  for (const auto& img : images) s.insert(img.truth);
  return {s.begin(), s.end()};
}

std::vector<int> Dataset::labels() const {
  const auto levels = truth_levels();
  std::vector<int> out;
  out.reserve(images.size());
  for (const auto& img : images) {
    out.push_back(static_cast<int>(std::lower_bound(levels.begin(), levels.end(), img.truth) - levels.begin()));
  }
  return out;
}

void Dataset::validate() const {
  std::set<std::size_t> seen;
  for (const auto& img : images) {
    if (img.pixels.size() != image_size * image_size) {
      throw ContractError("image " + std::to_string(img.index) + " does not have " + std::to_string(image_size) +
                          "x" + std::to_string(image_size) + " pixels");
    }
    if (!seen.insert(img.index).second) throw ContractError("duplicate image index " + std::to_string(img.index));
  }
}

ConformationLaw ConformationLaw::parse(const std::string& text) {
  if (text == "uniform") return uniform();
  const std::string prefix = "discrete:";
  if (text.rfind(prefix, 0) == 0) {
    const std::string k = text.substr(prefix.size());
    std::size_t used = 0;
    unsigned long v = 0;
    try {
      v = std::stoul(k, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != k.size() || v < 1) throw ConfigError("bad conformation law '" + text + "'");
    return discrete(v);
  }
  throw ConfigError("conformation law must be 'uniform' or 'discrete:K', got '" + text + "'");
}

std::string ConformationLaw::to_string() const {
  return kind == Kind::uniform ? "uniform" : "discrete:" + std::to_string(levels);
}

Quaternion random_rotation(Rng& rng) {
  Quaternion q{rng.normal(), rng.normal(), rng.normal(), rng.normal()};
  const double n = q.norm();
  const double s = (q.w < 0.0 ? -1.0 : 1.0) / n;
  return {q.w * s, q.x * s, q.y * s, q.z * s};
}

Dataset generate_dataset(const GenerationSpec& spec) {
  if (spec.count < 1) throw ContractError("dataset needs at least one image");
  if (spec.image_size != spec.grid) throw ContractError("tomographic mode requires image_size == grid");
  if (!(spec.snr > 0.0)) throw ContractError("snr must be positive");
  if (spec.kernel_ids.empty()) throw ContractError("at least one kernel id is required");
  if (spec.max_shift > static_cast<double>(spec.grid) / 8.0) throw ContractError("max_shift exceeds L/8");
  for (std::size_t id : spec.kernel_ids) KernelBank::standard().kernel(id);

  const std::size_t d = spec.image_size;
  Dataset data;
  data.mode = DatasetMode::tomographic;
  data.image_size = d;
  data.snr = spec.snr;
  data.seed = spec.seed;
  data.images.resize(spec.count);

  for (std::size_t i = 0; i < spec.count; ++i) {
    Rng rng(spec.seed, "data", i);
    ParticleImage& img = data.images[i];
    img.index = i;
    if (spec.law.kind == ConformationLaw::Kind::uniform) {
      img.truth = rng.uniform();
    } else {
      const std::size_t k = spec.law.levels;
      img.truth = k == 1 ? 0.0 : static_cast<double>(rng.below(k)) / static_cast<double>(k - 1);
    }
    if (spec.random_poses) {
      img.pose.rotation = random_rotation(rng);
      img.pose.shift = {rng.uniform(-spec.max_shift, spec.max_shift), rng.uniform(-spec.max_shift, spec.max_shift)};
    }
    img.pose.kernel_id = spec.kernel_ids[rng.below(spec.kernel_ids.size())];

    const Volume v = make_phantom(img.truth, spec.grid, spec.geometry);
    img.pixels.assign(d * d, 0.0);
    ImagingOperator(spec.grid, img.pose).forward(v.voxels, img.pixels);
  }

  double mean = 0.0, sq = 0.0;
  const double total = static_cast<double>(spec.count * d * d);
  for (const auto& img : data.images)
    for (double p : img.pixels) mean += p;
  mean /= total;
  for (const auto& img : data.images)
    for (double p : img.pixels) sq += (p - mean) * (p - mean);
  const double sd = std::sqrt(sq / total);
  const double inv = sd > 0.0 ? 1.0 / sd : 1.0;

  for (std::size_t i = 0; i < spec.count; ++i) {
    auto& pixels = data.images[i].pixels;
    Image clean(d);
    for (std::size_t p = 0; p < pixels.size(); ++p) clean.pixels[p] = (pixels[p] - mean) * inv;
    // Standardized signal has unit variance over the dataset.
    Image noisy = add_noise(clean, spec.snr, derive_seed(spec.seed, "noise", i), 1.0);
    for (std::size_t p = 0; p < pixels.size(); ++p) pixels[p] = static_cast<double>(static_cast<float>(noisy.pixels[p]));
  }
  return data;
}

std::vector<std::uint8_t> encode_dataset(const Dataset& data) {
  ByteWriter w;
  w.put_bytes("VBDS", 4);
  w.put_le(kDatasetVersion);
  w.put_le(static_cast<std::uint32_t>(data.mode));
  w.put_le(static_cast<std::uint64_t>(data.size()));
  w.put_le(static_cast<std::uint32_t>(data.image_size));
  w.put_f64(data.snr);
  w.put_le(data.seed);
  for (const auto& img : data.images) {
    w.put_le(static_cast<std::uint64_t>(img.index));
    w.put_f64(img.truth);
    const auto& q = img.pose.rotation;
    for (double v : {q.w, q.x, q.y, q.z, img.pose.shift[0], img.pose.shift[1], 0.0}) w.put_f64(v);
    w.put_le(static_cast<std::uint32_t>(img.pose.kernel_id));
    for (double p : img.pixels) w.put_f32(static_cast<float>(p));
  }
  return w.bytes();
}

Dataset decode_dataset(std::vector<std::uint8_t> bytes) {
  ByteReader r(std::move(bytes), "dataset");
  r.need(4);
  std::string magic;
  for (int i = 0; i < 4; ++i) magic.push_back(static_cast<char>(r.get_u8()));
  if (magic != "VBDS") throw FormatError("dataset: bad magic", 0);
  if (r.get_le<std::uint32_t>() != kDatasetVersion) throw FormatError("dataset: unsupported version", 4);
  Dataset data;
  const std::size_t mode_at = r.offset();
  const auto mode = r.get_le<std::uint32_t>();
  if (mode > 1) throw FormatError("dataset: unknown mode", mode_at);
  data.mode = static_cast<DatasetMode>(mode);
  const auto n = r.get_le<std::uint64_t>();
  data.image_size = r.get_le<std::uint32_t>();
  data.snr = r.get_f64();
  data.seed = r.get_le<std::uint64_t>();
  const std::size_t pixels = data.image_size * data.image_size;
  const std::size_t record = 8 + 8 + 7 * 8 + 4 + 4 * pixels;
  if (n > r.remaining() / record) {
    throw FormatError("dataset: truncated, header declares " + std::to_string(n) + " images", r.offset());
  }
  data.images.resize(n);
  for (auto& img : data.images) {
    img.index = r.get_le<std::uint64_t>();
    img.truth = r.get_f64();
    double v[7];
    for (double& x : v) x = r.get_f64();
    img.pose.rotation = {v[0], v[1], v[2], v[3]};
    img.pose.shift = {v[4], v[5]};
    img.pose.kernel_id = r.get_le<std::uint32_t>();
    img.pixels.resize(pixels);
    for (double& p : img.pixels) p = r.get_f32();
  }
  if (r.remaining() != 0) throw FormatError("dataset: trailing bytes", r.offset());
  return data;
}

void save_dataset(const std::string& path, const Dataset& data) { write_file_atomic(path, encode_dataset(data)); }

Dataset load_dataset(const std::string& path) { return decode_dataset(read_file_bytes(path)); }

}  // namespace vaebench
