// SPDX-License-Identifier: Apache-2.0
//
// Subcommands of the `lionrank` driver. run_cli is the whole program minus
// process plumbing, so tests can drive it in-process.

#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace lionrank::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitInternal = 1,
  kExitConfig = 2,  // bad flags or config values
  kExitParse = 3,   // malformed input file
  kExitNumeric = 4, // non-finite loss
  kExitInput = 5,   // missing file or unresolvable id
};

class InputError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class InputParseError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

int run_cli(const std::vector<std::string> &args, std::ostream &out,
            std::ostream &err);

// Records every file written under one output directory and emits
// manifest.json listing them.
class Manifest {
public:
  Manifest(std::filesystem::path root, std::string command);

  const std::filesystem::path &root() const { return root_; }
  // Writes `bytes` to root/relative and records it.
  void add(const std::filesystem::path &relative, const std::string &kind,
           std::string_view bytes);
  void set(const std::string &key, nlohmann::json value);
  // Writes root/manifest.json; returns its path.
  std::filesystem::path finish();

private:
  std::filesystem::path root_;
  nlohmann::json doc_;
  nlohmann::json artifacts_ = nlohmann::json::array();
};

inline constexpr int kManifestVersion = 1;

// One row of an optimizer comparison table.
struct BenchRow {
  std::string model;
  std::string optimizer; // "lion" or "adamw"
  double mean = 0.0;
  double peak = 0.0;
  double std_dev = 0.0;
  std::size_t data_points = 0;
  std::optional<std::size_t> state_bytes;
};

// TSV with header `model optimizer mean peak std data_points [state_bytes]`.
// Optimizer names are case-insensitive.
std::vector<BenchRow> read_bench_rows(std::istream &in);

// Rows grouped by model; the gain columns compare lion against adamw.
std::string format_bench_table(std::span<const BenchRow> rows);

} // namespace lionrank::cli
