// SPDX-License-Identifier: Apache-2.0
//
// INI run configuration for the command-line driver.
//
//   [data]    triplets
//   [model]   name d_model n_layers n_heads d_ff max_len seed
//   [train]   optimizers batch_size epochs seed schedule warmup_ratio shuffle
//             no_decay
//   [lion]    lr beta1 beta2 weight_decay
//   [adamw]   lr beta1 beta2 eps weight_decay
//   [output]  dir ("{name}" expands to the model name)
//
// Unknown sections or keys are rejected. Relative input paths resolve against
// the config file's directory; relative output paths against the output root.

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <boost/property_tree/ptree.hpp>
#include <json.hpp>

#include "lionrank/model.hpp"
#include "lionrank/optim.hpp"
#include "lionrank/train.hpp"

namespace lionrank::cli {

inline constexpr const char *kOutputRootEnv = "LIONRANK_OUTPUT_ROOT";

struct RunConfig {
  std::filesystem::path triplets;
  std::string model_name = "toy";
  CrossEncoderConfig model; // vocab_size filled in once the vocab is built
  TrainConfig train;        // optimizer and base_lr are set per run
  std::vector<OptimizerKind> optimizers{OptimizerKind::lion};
  double lion_lr = 2e-5;
  double adamw_lr = 2e-5;
  std::filesystem::path output_dir;

  boost::property_tree::ptree effective; // after overrides, for the manifest

  double lr_for(OptimizerKind kind) const {
    return kind == OptimizerKind::lion ? lion_lr : adamw_lr;
  }
  TrainConfig train_config_for(OptimizerKind kind) const;
};

// `section.key=value` strings applied on top of the file.
RunConfig load_run_config(const std::filesystem::path &path,
                          const std::vector<std::string> &overrides);

RunConfig parse_run_config(const boost::property_tree::ptree &tree,
                           const std::filesystem::path &base_dir);

// LIONRANK_OUTPUT_ROOT, or the working directory when unset.
std::filesystem::path output_root();
std::filesystem::path resolve_output(const std::filesystem::path &p);

nlohmann::json ptree_to_json(const boost::property_tree::ptree &tree);

} // namespace lionrank::cli
