// SPDX-License-Identifier: Apache-2.0
//
// Little-endian byte codec used by checkpoints. Doubles are stored as their
// IEEE-754 bit pattern so round trips are bit-exact.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace lionrank {

class FormatError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class ByteWriter {
public:
  void u8(std::uint8_t v) { bytes_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f64(double v);
  void str(std::string_view s);
  void raw(std::string_view s) { bytes_.append(s); }
  void f64s(std::span<const double> values);

  const std::string &bytes() const { return bytes_; }
  std::string take() { return std::move(bytes_); }

private:
  std::string bytes_;
};

class ByteReader {
public:
  explicit ByteReader(std::string_view bytes) : bytes_(bytes) {}

  std::uint8_t u8();
  std::uint32_t u32();
  std::uint64_t u64();
  double f64();
  std::string str();
  std::string_view raw(std::size_t n);
  std::vector<double> f64s();
  // u32 element count, rejected if the rest of the input cannot hold that
  // many entries of at least `min_bytes` each.
  std::size_t count(std::size_t min_bytes);

  bool done() const { return pos_ == bytes_.size(); }
  std::size_t remaining() const { return bytes_.size() - pos_; }

private:
  void need(std::size_t n) const;
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

} // namespace lionrank
