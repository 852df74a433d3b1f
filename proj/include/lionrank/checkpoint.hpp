// SPDX-License-Identifier: Apache-2.0
//
// Sectioned binary checkpoint holding model config, vocabulary, parameters
// and (optionally) optimizer state. Byte layout: docs/checkpoint-format.md.

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "lionrank/model.hpp"
#include "lionrank/optim.hpp"
#include "lionrank/serialize.hpp"

namespace lionrank {

inline constexpr std::string_view kCheckpointMagic = "LIONRANK";
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::string name;
  std::uint32_t epoch = 0;
  std::uint64_t step = 0;
  Vocab vocab;
  CrossEncoder model;
  std::unique_ptr<Optimizer> optimizer; // null when not saved
};

std::string encode_checkpoint(std::string_view name, std::uint32_t epoch,
                              std::uint64_t step, const Vocab &vocab,
                              const CrossEncoder &model,
                              const Optimizer *optimizer = nullptr);
Checkpoint decode_checkpoint(std::string_view bytes);

// Whole-file helpers; throw std::runtime_error on I/O failure.
std::string read_file(const std::filesystem::path &path);
void write_file(const std::filesystem::path &path, std::string_view bytes);

} // namespace lionrank
