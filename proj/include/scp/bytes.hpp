#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>

#include "errors.hpp"

namespace scp {

// Byte buffers are plain std::string: cheap to move, hashable, easy to
// compare in golden tests.
using Bytes = std::string;

// All length prefixes on the wire are 32-bit big-endian. Scalar payload
// endianness is the backend's choice; the writer exposes both.
class ByteWriter {
 public:
  void u8(uint8_t v) { buf_.push_back(static_cast<char>(v)); }

  void u32_be(uint32_t v) {
    char b[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16),
                 static_cast<char>(v >> 8), static_cast<char>(v)};
    buf_.append(b, 4);
  }

  void u64_be(uint64_t v) {
    u32_be(static_cast<uint32_t>(v >> 32));
    u32_be(static_cast<uint32_t>(v));
  }

  void u32_le(uint32_t v) {
    char b[4] = {static_cast<char>(v), static_cast<char>(v >> 8),
                 static_cast<char>(v >> 16), static_cast<char>(v >> 24)};
    buf_.append(b, 4);
  }

  void u64_le(uint64_t v) {
    u32_le(static_cast<uint32_t>(v));
    u32_le(static_cast<uint32_t>(v >> 32));
  }

  void i32_le(int32_t v) { u32_le(static_cast<uint32_t>(v)); }
  void i64_le(int64_t v) { u64_le(static_cast<uint64_t>(v)); }
  void i32_be(int32_t v) { u32_be(static_cast<uint32_t>(v)); }
  void i64_be(int64_t v) { u64_be(static_cast<uint64_t>(v)); }

  void f64_le(double v) {
    uint64_t bits;
    std::memcpy(&bits, &v, 8);
    u64_le(bits);
  }

  void f64_be(double v) {
    uint64_t bits;
    std::memcpy(&bits, &v, 8);
    u64_be(bits);
  }

  // Length-prefixed byte string (u32 big-endian count + raw bytes).
  void str(std::string_view s) {
    u32_be(static_cast<uint32_t>(s.size()));
    buf_.append(s.data(), s.size());
  }

  void raw(std::string_view s) { buf_.append(s.data(), s.size()); }

  size_t size() const { return buf_.size(); }
  const Bytes& bytes() const& { return buf_; }
  Bytes take() { return std::move(buf_); }

 private:
  Bytes buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::string_view data) : data_(data) {}

  uint8_t u8() {
    need(1);
    return static_cast<uint8_t>(data_[pos_++]);
  }

  uint32_t u32_be() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = (v << 8) | static_cast<uint8_t>(data_[pos_ + i]);
    pos_ += 4;
    return v;
  }

  uint64_t u64_be() {
    uint64_t hi = u32_be();
    return (hi << 32) | u32_be();
  }

  uint32_t u32_le() {
    need(4);
    uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<uint8_t>(data_[pos_ + i]);
    pos_ += 4;
    return v;
  }

  uint64_t u64_le() {
    uint64_t lo = u32_le();
    return lo | (static_cast<uint64_t>(u32_le()) << 32);
  }

  int32_t i32_le() { return static_cast<int32_t>(u32_le()); }
  int64_t i64_le() { return static_cast<int64_t>(u64_le()); }
  int32_t i32_be() { return static_cast<int32_t>(u32_be()); }
  int64_t i64_be() { return static_cast<int64_t>(u64_be()); }

  double f64_le() {
    uint64_t bits = u64_le();
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }

  double f64_be() {
    uint64_t bits = u64_be();
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }

  std::string_view str() {
    uint32_t n = u32_be();
    need(n);
    std::string_view s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::string_view raw(size_t n) {
    need(n);
    std::string_view s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  size_t remaining() const { return data_.size() - pos_; }
  bool at_end() const { return pos_ == data_.size(); }

  void expect_end() const {
    if (!at_end()) raise(Errc::decode_failure, "trailing bytes after value");
  }

 private:
  void need(size_t n) const {
    if (data_.size() - pos_ < n) raise(Errc::decode_failure, "unexpected end of input");
  }

  std::string_view data_;
  size_t pos_ = 0;
};

// 64-bit FNV-1a, used for partitioning and registry fingerprints.
inline uint64_t fnv1a64(std::string_view bytes, uint64_t seed = 14695981039346656037ull) {
  uint64_t h = seed;
  for (char c : bytes) {
    h ^= static_cast<uint8_t>(c);
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace scp
