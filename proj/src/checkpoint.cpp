#include "vaebench/checkpoint.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <unistd.h>

#include "vaebench/binary_io.hpp"
#include "vaebench/errors.hpp"

namespace vaebench {

std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file_atomic(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  const std::string tmp = path + ".tmp" + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + tmp + "'");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("short write to '" + tmp + "'");
  }
  std::filesystem::rename(tmp, path);
}

void write_text_atomic(const std::string& path, const std::string& text) {
  write_file_atomic(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

std::vector<std::uint8_t> encode_checkpoint(std::span<const NamedTensor> tensors) {
  ByteWriter w;
  w.put_bytes("VBCK", 4);
  w.put_le(kCheckpointVersion);
  w.put_le(static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    w.put_string(t.name);
    w.put_le(static_cast<std::uint32_t>(t.value.rank()));
    for (std::size_t d : t.value.shape()) w.put_le(static_cast<std::uint64_t>(d));
  }
  for (const auto& t : tensors)
    for (double v : t.value.data()) w.put_f64(v);
  return w.bytes();
}

std::vector<NamedTensor> decode_checkpoint(std::vector<std::uint8_t> bytes) {
  ByteReader r(std::move(bytes), "checkpoint");
  r.need(4);
  char magic[4];
  for (char& c : magic) c = static_cast<char>(r.get_u8());
  if (std::string(magic, 4) != "VBCK") throw FormatError("checkpoint: bad magic", 0);
  const std::size_t version_at = r.offset();
  if (r.get_le<std::uint32_t>() != kCheckpointVersion) throw FormatError("checkpoint: unsupported version", version_at);
  const auto count = r.get_le<std::uint32_t>();
  std::vector<NamedTensor> out(count);
  std::vector<Shape> shapes(count);
  for (auto k = 0u; k < count; ++k) {
    out[k].name = r.get_string();
    const auto rank = r.get_le<std::uint32_t>();
    if (rank > 8) throw FormatError("checkpoint: implausible rank", r.offset() - 4);
    for (auto d = 0u; d < rank; ++d) shapes[k].push_back(static_cast<std::size_t>(r.get_le<std::uint64_t>()));
  }
  for (auto k = 0u; k < count; ++k) {
    const std::size_t n = numel(shapes[k]);
    r.need(n * 8);
    std::vector<double> data(n);
    for (double& v : data) v = r.get_f64();
    out[k].value = Tensor(shapes[k], std::move(data));
  }
  return out;
}

void save_checkpoint(const std::string& path, std::span<const NamedTensor> tensors) {
  write_file_atomic(path, encode_checkpoint(tensors));
}

void save_checkpoint(const std::string& path, std::span<Parameter* const> params) {
  std::vector<NamedTensor> tensors;
  tensors.reserve(params.size());
  for (const Parameter* p : params) tensors.push_back({p->name, p->value});
  save_checkpoint(path, tensors);
}

std::vector<NamedTensor> load_checkpoint(const std::string& path) { return decode_checkpoint(read_file_bytes(path)); }

void load_checkpoint_into(const std::string& path, std::span<Parameter* const> params) {
  const auto tensors = load_checkpoint(path);
  for (Parameter* p : params) {
    auto it = std::find_if(tensors.begin(), tensors.end(), [&](const NamedTensor& t) { return t.name == p->name; });
    if (it == tensors.end()) throw LookupError("checkpoint '" + path + "' has no parameter '" + p->name + "'");
    require_same_shape(p->value, it->value, "load_checkpoint_into");
    p->value = it->value;
  }
}

}  // namespace vaebench
