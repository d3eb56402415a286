// diarkit/binio.hpp
//
// Copyright 2026 The diarkit authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef DIARKIT_BINIO_HPP
#define DIARKIT_BINIO_HPP

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "diarkit/common.hpp"
#include "diarkit/matrix.hpp"

namespace diarkit {

// All binary containers are little-endian. The library only targets
// little-endian hosts; this is checked once at stream construction.

inline void require_little_endian() {
  const std::uint16_t probe = 0x0102;
  unsigned char bytes[2];
  std::memcpy(bytes, &probe, 2);
  if (bytes[0] != 0x02)
    throw FormatError("diarkit binary containers require a little-endian host");
}

class BinaryWriter {
 public:
  explicit BinaryWriter(const std::string& path)
      : path_(path), out_(path, std::ios::binary) {
    require_little_endian();
    if (!out_) throw FormatError("cannot open for writing: " + path);
  }

  void magic(const char tag[5]) { out_.write(tag, 4); }
  void u32(std::uint32_t v) { raw(&v, sizeof(v)); }
  void u64(std::uint64_t v) { raw(&v, sizeof(v)); }
  void f32(float v) { raw(&v, sizeof(v)); }
  void f64(double v) { raw(&v, sizeof(v)); }

  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    raw(s.data(), s.size());
  }

  void f32_array(const float* data, std::size_t n) { raw(data, n * sizeof(float)); }
  void f64_array(const double* data, std::size_t n) { raw(data, n * sizeof(double)); }

  void matrix_f64(const Matrix& m) {
    u32(static_cast<std::uint32_t>(m.rows()));
    u32(static_cast<std::uint32_t>(m.cols()));
    f64_array(m.data(), m.size());
  }

  void matrix_f32(const Matrix& m) {
    u32(static_cast<std::uint32_t>(m.rows()));
    u32(static_cast<std::uint32_t>(m.cols()));
    for (std::size_t i = 0; i < m.size(); ++i) f32(static_cast<float>(m.data()[i]));
  }

  void close() {
    out_.close();
    if (!out_) throw FormatError("write failed: " + path_);
  }

 private:
  void raw(const void* p, std::size_t n) {
    out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
  }

  std::string path_;
  std::ofstream out_;
};

class BinaryReader {
 public:
  explicit BinaryReader(const std::string& path)
      : path_(path), in_(path, std::ios::binary) {
    require_little_endian();
    if (!in_) throw MissingArtifactError("cannot open: " + path);
  }

  void expect_magic(const char tag[5]) {
    char buf[4];
    raw(buf, 4);
    if (std::memcmp(buf, tag, 4) != 0)
      throw FormatError(format("%s: bad magic, expected %s", path_.c_str(), tag));
  }

  std::uint32_t u32() { std::uint32_t v; raw(&v, sizeof(v)); return v; }
  std::uint64_t u64() { std::uint64_t v; raw(&v, sizeof(v)); return v; }
  float f32() { float v; raw(&v, sizeof(v)); return v; }
  double f64() { double v; raw(&v, sizeof(v)); return v; }

  std::string str() {
    const std::uint32_t n = u32();
    std::string s(n, '\0');
    raw(s.data(), n);
    return s;
  }

  void f32_array(float* data, std::size_t n) { raw(data, n * sizeof(float)); }
  void f64_array(double* data, std::size_t n) { raw(data, n * sizeof(double)); }

  Matrix matrix_f64() {
    const std::uint32_t r = u32(), c = u32();
    Matrix m(r, c);
    f64_array(m.data(), m.size());
    return m;
  }

  Matrix matrix_f32() {
    const std::uint32_t r = u32(), c = u32();
    Matrix m(r, c);
    for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = f32();
    return m;
  }

  const std::string& path() const { return path_; }

 private:
  void raw(void* p, std::size_t n) {
    in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (in_.gcount() != static_cast<std::streamsize>(n))
      throw FormatError("unexpected end of file: " + path_);
  }

  std::string path_;
  std::ifstream in_;
};

inline bool file_exists(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  return f.good();
}

inline std::uint64_t file_digest(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw MissingArtifactError("cannot open: " + path);
  Fnv64 h;
  char buf[65536];
  while (f) {
    f.read(buf, sizeof(buf));
    h.update(buf, static_cast<std::size_t>(f.gcount()));
  }
  return h.digest();
}

}  // namespace diarkit

#endif  // DIARKIT_BINIO_HPP
