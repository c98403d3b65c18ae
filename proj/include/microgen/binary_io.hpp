#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "microgen/error.hpp"

namespace microgen::io {

/// Little-endian byte sink.
class ByteWriter {
 public:
  void magic(std::string_view m) { bytes_.insert(bytes_.end(), m.begin(), m.end()); }
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u32(std::uint32_t v) { put_le(v); }
  void f32(float v) { put_le(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { put_le(std::bit_cast<std::uint64_t>(v)); }
  void raw(const std::uint8_t* data, std::size_t n) { bytes_.insert(bytes_.end(), data, data + n); }

  const std::vector<std::uint8_t>& bytes() const noexcept { return bytes_; }

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes_.data()), static_cast<std::streamsize>(bytes_.size()));
    if (!out) throw IoError("write failed for '" + path + "'");
  }

 private:
  template <typename U>
  void put_le(U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }

  std::vector<std::uint8_t> bytes_;
};

inline std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Little-endian byte source; failures report the file path and byte offset.
class ByteReader {
 public:
  ByteReader(std::vector<std::uint8_t> bytes, std::string path)
      : bytes_(std::move(bytes)), path_(std::move(path)) {}

  static ByteReader from_file(const std::string& path) { return ByteReader(read_file(path), path); }

  void expect_magic(std::string_view m) {
    need(m.size(), "magic");
    if (std::memcmp(bytes_.data() + pos_, m.data(), m.size()) != 0) {
      fail("bad magic, expected '" + std::string(m) + "'");
    }
    pos_ += m.size();
  }
  std::uint8_t u8() {
    need(1, "u8");
    return bytes_[pos_++];
  }
  std::uint32_t u32() { return get_le<std::uint32_t>("u32"); }
  float f32() { return std::bit_cast<float>(get_le<std::uint32_t>("f32")); }
  double f64() { return std::bit_cast<double>(get_le<std::uint64_t>("f64")); }
  const std::uint8_t* raw(std::size_t n) {
    need(n, "payload");
    const auto* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }

  std::size_t offset() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }
  const std::string& path() const noexcept { return path_; }

  [[noreturn]] void fail(const std::string& what) const { throw FormatError(path_, pos_, what); }
  [[noreturn]] void fail_at(std::size_t offset, const std::string& what) const {
    throw FormatError(path_, offset, what);
  }

  void expect_end() const {
    if (pos_ != bytes_.size()) fail(std::to_string(remaining()) + " trailing bytes");
  }

 private:
  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) {
      fail(std::string("truncated while reading ") + what + " (" + std::to_string(n) +
           " bytes needed, " + std::to_string(remaining()) + " left)");
    }
  }

  template <typename U>
  U get_le(const char* what) {
    need(sizeof(U), what);
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(bytes_[pos_ + i]) << (8 * i);
    pos_ += sizeof(U);
    return v;
  }

  std::vector<std::uint8_t> bytes_;
  std::string path_;
  std::size_t pos_ = 0;
};

// Raw little-endian f32 arrays (latent fixtures, expected generator outputs).
inline void write_f32_raw(const std::string& path, const std::vector<float>& values) {
  ByteWriter w;
  for (float v : values) w.f32(v);
  w.save(path);
}

inline std::vector<float> read_f32_raw(const std::string& path) {
  auto r = ByteReader::from_file(path);
  if (r.remaining() % 4 != 0) r.fail_at(r.remaining() - r.remaining() % 4, "size is not a multiple of 4");
  std::vector<float> out(r.remaining() / 4);
  for (auto& v : out) v = r.f32();
  return out;
}

}  // namespace microgen::io
