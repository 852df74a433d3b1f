// SPDX-License-Identifier: Apache-2.0

#include "lionrank/serialize.hpp"

#include <bit>

namespace lionrank {

void ByteWriter::u32(std::uint32_t v) {
  for (int i = 0; i < 4; ++i)
    u8(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::u64(std::uint64_t v) {
  for (int i = 0; i < 8; ++i)
    u8(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

void ByteWriter::str(std::string_view s) {
  u32(static_cast<std::uint32_t>(s.size()));
  raw(s);
}

void ByteWriter::f64s(std::span<const double> values) {
  u64(values.size());
  for (double v : values)
    f64(v);
}

void ByteReader::need(std::size_t n) const {
  if (bytes_.size() - pos_ < n)
    throw FormatError("truncated data: need " + std::to_string(n) +
                      " bytes at offset " + std::to_string(pos_));
}

std::uint8_t ByteReader::u8() {
  need(1);
  return static_cast<std::uint8_t>(bytes_[pos_++]);
}

std::uint32_t ByteReader::u32() {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i)
    v |= static_cast<std::uint32_t>(u8()) << (8 * i);
  return v;
}

std::uint64_t ByteReader::u64() {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i)
    v |= static_cast<std::uint64_t>(u8()) << (8 * i);
  return v;
}

double ByteReader::f64() { return std::bit_cast<double>(u64()); }

std::string ByteReader::str() {
  const std::uint32_t n = u32();
  return std::string(raw(n));
}

std::string_view ByteReader::raw(std::size_t n) {
  need(n);
  auto out = bytes_.substr(pos_, n);
  pos_ += n;
  return out;
}

std::size_t ByteReader::count(std::size_t min_bytes) {
  const std::uint32_t n = u32();
  if (n > remaining() / min_bytes)
    throw FormatError("truncated data: count " + std::to_string(n) +
                      " exceeds remaining bytes");
  return n;
}

std::vector<double> ByteReader::f64s() {
  const std::uint64_t n = u64();
  if (n > remaining() / 8)
    throw FormatError("truncated data: array of " + std::to_string(n) +
                      " doubles");
  std::vector<double> out(n);
  for (auto &v : out)
    v = f64();
  return out;
}

} // namespace lionrank
