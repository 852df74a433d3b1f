// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace lionrank {

class ParseError : public std::runtime_error {
public:
  ParseError(std::size_t line, const std::string &message)
      : std::runtime_error("line " + std::to_string(line) + ": " + message),
        line_(line) {}
  std::size_t line() const { return line_; }

private:
  std::size_t line_;
};

std::vector<std::string> split_on(std::string_view line, char sep);
std::vector<std::string> split_whitespace(std::string_view line);

// Strips a trailing '\r' so CRLF files parse like LF files.
std::string_view chomp(std::string_view line);

// Fixed-point with `decimals` digits after the point.
std::string format_fixed(double value, int decimals);
// Shortest "%.{digits}g" rendering.
std::string format_general(double value, int digits);

// `id<TAB>text` per line; later duplicates replace earlier ones.
std::unordered_map<std::string, std::string> read_tsv_corpus(std::istream &in);

} // namespace lionrank
