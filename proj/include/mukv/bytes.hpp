// Copyright 2026 The mukv Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef MUKV_BYTES_HPP_
#define MUKV_BYTES_HPP_

// Little-endian byte codecs shared by the wire formats and the store slabs.

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mukv/error.hpp"

namespace mukv {

using Bytes = std::vector<std::uint8_t>;

inline std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed large buffers in pieces.
  constexpr std::size_t kChunk = 1u << 30;
  for (std::size_t off = 0; off < bytes.size(); off += kChunk) {
    const std::size_t len = std::min(kChunk, bytes.size() - off);
    crc = crc32(crc, bytes.data() + off, static_cast<uInt>(len));
  }
  return static_cast<std::uint32_t>(crc);
}

inline std::uint32_t crc32_of_floats(std::span<const float> values) {
  Bytes tmp;
  tmp.reserve(values.size() * 4);
  for (float f : values) {
    const auto u = std::bit_cast<std::uint32_t>(f);
    for (int b = 0; b < 4; ++b) tmp.push_back(static_cast<std::uint8_t>(u >> (8 * b)));
  }
  return crc32_of(tmp);
}

class ByteWriter {
 public:
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

  void magic(std::string_view m) { buf_.insert(buf_.end(), m.begin(), m.end()); }

  void f32s(std::span<const float> values) {
    const std::size_t at = buf_.size();
    buf_.resize(at + values.size() * 4);
    std::uint8_t* p = buf_.data() + at;
    for (float f : values) {
      const auto u = std::bit_cast<std::uint32_t>(f);
      p[0] = static_cast<std::uint8_t>(u);
      p[1] = static_cast<std::uint8_t>(u >> 8);
      p[2] = static_cast<std::uint8_t>(u >> 16);
      p[3] = static_cast<std::uint8_t>(u >> 24);
      p += 4;
    }
  }

  void u32s(std::span<const std::uint32_t> values) {
    for (auto v : values) u32(v);
  }

  void bytes(std::span<const std::uint8_t> b) { buf_.insert(buf_.end(), b.begin(), b.end()); }

  std::size_t size() const { return buf_.size(); }
  const Bytes& buffer() const { return buf_; }
  Bytes take() { return std::move(buf_); }

 private:
  void put(std::uint64_t v, int width) {
    for (int b = 0; b < width; ++b) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
  }

  Bytes buf_;
};

/// Bounds-checked reader. Array reads validate the declared element count
/// against the buffer before allocating: a count whose byte size exceeds the
/// whole buffer is a LengthOverflow, one that merely runs past the end is a
/// TruncatedFile.
class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> data, std::string what = "buffer")
      : data_(data), what_(std::move(what)) {}

  std::size_t position() const { return pos_; }
  std::size_t remaining() const { return data_.size() - pos_; }
  bool at_end() const { return pos_ == data_.size(); }

  std::uint8_t u8() {
    need(1);
    return data_[pos_++];
  }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  float f32() { return std::bit_cast<float>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }

  void expect_magic(std::string_view m) {
    need(m.size());
    if (std::memcmp(data_.data() + pos_, m.data(), m.size()) != 0) {
      fail(ErrorKind::kBadMagic, what_ + ": expected magic \"" + std::string(m) + "\"");
    }
    pos_ += m.size();
  }

  std::vector<float> f32s(std::uint64_t count) {
    check_array(count, 4);
    std::vector<float> out(count);
    const std::uint8_t* p = data_.data() + pos_;
    for (std::uint64_t i = 0; i < count; ++i, p += 4) {
      const std::uint32_t u = std::uint32_t{p[0]} | (std::uint32_t{p[1]} << 8) |
                              (std::uint32_t{p[2]} << 16) | (std::uint32_t{p[3]} << 24);
      out[i] = std::bit_cast<float>(u);
    }
    pos_ += count * 4;
    return out;
  }

  std::vector<std::uint32_t> u32s(std::uint64_t count) {
    check_array(count, 4);
    std::vector<std::uint32_t> out(count);
    for (auto& v : out) v = u32();
    return out;
  }

  /// Element count times width, with overflow and whole-buffer checks.
  void check_array(std::uint64_t count, std::uint64_t width) const {
    if (count > std::numeric_limits<std::uint64_t>::max() / width ||
        count * width > data_.size()) {
      fail(ErrorKind::kLengthOverflow,
           what_ + ": declared length " + std::to_string(count) + " exceeds the buffer");
    }
    if (count * width > remaining()) {
      fail(ErrorKind::kTruncatedFile, what_ + ": ends inside a " + std::to_string(count) +
                                          "-element array at offset " + std::to_string(pos_));
    }
  }

 private:
  void need(std::size_t n) const {
    if (n > remaining()) {
      fail(ErrorKind::kTruncatedFile, what_ + ": ends at offset " + std::to_string(data_.size()) +
                                          ", needed " + std::to_string(n) + " more bytes at " +
                                          std::to_string(pos_));
    }
  }

  std::uint64_t get(int width) {
    need(static_cast<std::size_t>(width));
    std::uint64_t v = 0;
    for (int b = 0; b < width; ++b) v |= std::uint64_t{data_[pos_ + b]} << (8 * b);
    pos_ += static_cast<std::size_t>(width);
    return v;
  }

  std::span<const std::uint8_t> data_;
  std::string what_;
  std::size_t pos_ = 0;
};

/// Saturating u64 product used to size untrusted arrays.
inline std::uint64_t checked_mul(std::uint64_t a, std::uint64_t b) {
  if (a != 0 && b > std::numeric_limits<std::uint64_t>::max() / a) {
    return std::numeric_limits<std::uint64_t>::max();
  }
  return a * b;
}

inline Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open " + path.string());
  in.seekg(0, std::ios::end);
  const auto size = static_cast<std::size_t>(in.tellg());
  in.seekg(0, std::ios::beg);
  Bytes out(size);
  if (size > 0 && !in.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(size))) {
    fail(ErrorKind::kIo, "cannot read " + path.string());
  }
  return out;
}

inline void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::kIo, "cannot create " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::kIo, "cannot write " + path.string());
}

}  // namespace mukv

#endif  // MUKV_BYTES_HPP_
