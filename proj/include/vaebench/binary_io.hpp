#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <type_traits>
#include <vector>

#include "vaebench/errors.hpp"

namespace vaebench {

/// Appends fixed-width values in little-endian byte order.
class ByteWriter {
 public:
  template <class T>
  void put_le(T value) {
    static_assert(std::is_integral_v<T>);
    using U = std::make_unsigned_t<T>;
    U u = static_cast<U>(value);
    for (std::size_t i = 0; i < sizeof(T); ++i) bytes_.push_back(static_cast<std::uint8_t>(u >> (8 * i)));
  }
  void put_f64(double v) {
    std::uint64_t u;
    std::memcpy(&u, &v, sizeof u);
    put_le(u);
  }
  void put_f32(float v) {
    std::uint32_t u;
    std::memcpy(&u, &v, sizeof u);
    put_le(u);
  }
  void put_bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    bytes_.insert(bytes_.end(), b, b + n);
  }
  void put_string(const std::string& s) {
    put_le(static_cast<std::uint32_t>(s.size()));
    put_bytes(s.data(), s.size());
  }

  const std::vector<std::uint8_t>& bytes() const noexcept { return bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
};

/// Reads fixed-width values, reporting the byte offset of any truncation.
class ByteReader {
 public:
  explicit ByteReader(std::vector<std::uint8_t> bytes, std::string what = "input")
      : bytes_(std::move(bytes)), what_(std::move(what)) {}

  std::size_t offset() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

  void need(std::size_t n) const {
    if (remaining() < n) throw FormatError(what_ + ": truncated, needed " + std::to_string(n) + " more bytes", pos_);
  }

  template <class T>
  T get_le() {
    need(sizeof(T));
    using U = std::make_unsigned_t<T>;
    U u = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) u |= static_cast<U>(static_cast<U>(bytes_[pos_ + i]) << (8 * i));
    pos_ += sizeof(T);
    return static_cast<T>(u);
  }
  template <class T>
  T get_be() {
    need(sizeof(T));
    using U = std::make_unsigned_t<T>;
    U u = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) u = static_cast<U>((u << 8) | bytes_[pos_ + i]);
    pos_ += sizeof(T);
    return static_cast<T>(u);
  }
  double get_f64() {
    const auto u = get_le<std::uint64_t>();
    double v;
    std::memcpy(&v, &u, sizeof v);
    return v;
  }
  float get_f32() {
    const auto u = get_le<std::uint32_t>();
    float v;
    std::memcpy(&v, &u, sizeof v);
    return v;
  }
  std::uint8_t get_u8() {
    need(1);
    return bytes_[pos_++];
  }
  std::string get_string() {
    const auto n = get_le<std::uint32_t>();
    need(n);
    std::string s(reinterpret_cast<const char*>(&bytes_[pos_]), n);
    pos_ += n;
    return s;
  }

 private:
  std::vector<std::uint8_t> bytes_;
  std::string what_;
  std::size_t pos_ = 0;
};

std::vector<std::uint8_t> read_file_bytes(const std::string& path);
/// Writes to a sibling temporary file and renames it into place.
void write_file_atomic(const std::string& path, const std::vector<std::uint8_t>& bytes);
void write_text_atomic(const std::string& path, const std::string& text);

}  // namespace vaebench
