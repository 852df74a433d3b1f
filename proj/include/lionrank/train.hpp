// SPDX-License-Identifier: Apache-2.0
//
// Triplet -> pair conversion, BCE objective, and the seeded epoch loop.

#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "lionrank/model.hpp"
#include "lionrank/optim.hpp"
#include "lionrank/tensor.hpp"

namespace lionrank {

struct Triplet {
  std::string query;
  std::string positive;
  std::string negative;
};

struct TrainPair {
  std::string query;
  std::string passage;
  int label = 0;
};

struct PairConversion {
  std::vector<TrainPair> pairs;
  std::size_t skipped = 0; // triplets with an empty field
};

PairConversion triplets_to_pairs(std::span<const Triplet> triplets);

// `query<TAB>positive<TAB>negative` per line. Blank lines are ignored; any
// other line without exactly three fields is a ParseError.
std::vector<Triplet> read_triplets(std::istream &in);

inline constexpr double kBceClamp = 1e-12;

// -[y log p + (1 - y) log(1 - p)] with p clamped to [1e-12, 1 - 1e-12].
double bce_loss(double prediction, int label);

// Batch mean BCE of predictions [n x 1] against labels, recorded on the tape.
Tensor bce_loss(Tape &tape, const Tensor &predictions,
                std::span<const double> labels);

struct TrainConfig {
  std::size_t batch_size = 64;
  std::size_t epochs = 3;
  std::uint64_t seed = 12;
  OptimizerKind optimizer = OptimizerKind::lion;
  // base_lr, kind and warmup_ratio are used; total_steps is derived.
  ScheduleSpec schedule;
  bool shuffle = true;
  LionOptions lion;
  AdamWOptions adamw;
  std::vector<std::string> no_decay;
  std::string model_name = "toy";
  bool keep_checkpoints = true;

  void validate() const;
};

struct LossRecord {
  std::size_t step = 0;
  std::size_t epoch = 0; // 1-based
  double lr = 0.0;
  double loss = 0.0;
};

struct ResourceStats {
  std::size_t optimizer_state_bytes = 0;
  double mean_step_ms = 0.0;
  double peak_step_ms = 0.0;
  double std_step_ms = 0.0;
  std::size_t n_steps = 0;
};

// Mean, peak, and population standard deviation of per-step timings.
ResourceStats summarize_steps(std::span<const double> step_ms,
                              std::size_t state_bytes);

struct EpochCheckpoint {
  std::string name; // {model}-{optimizer}-epoch{K}
  std::size_t epoch = 0;
  std::string bytes;
};

struct TrainResult {
  std::vector<LossRecord> log;
  std::vector<double> epoch_mean_loss;
  std::vector<EpochCheckpoint> checkpoints;
  ResourceStats resources;
  std::size_t total_steps = 0;
};

class NumericError : public std::runtime_error {
public:
  NumericError(const std::string &what, std::size_t step)
      : std::runtime_error(what), step_(step) {}
  std::size_t step() const { return step_; }

private:
  std::size_t step_;
};

std::string checkpoint_name(const std::string &model, OptimizerKind optimizer,
                            std::size_t epoch);

// Steps per epoch times epochs; the last partial batch is kept.
std::size_t total_training_steps(std::size_t n_pairs, std::size_t batch_size,
                                 std::size_t epochs);

// Epoch order for a given seed: Fisher-Yates driven by mt19937_64 seeded with
// seed + epoch index (0-based).
std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed,
                                     std::size_t epoch_index, bool shuffle);

/// Trains `model` in place. Deterministic given the model's initial
/// parameters, the pairs, and the config.
TrainResult run_training(CrossEncoder &model, const Vocab &vocab,
                         std::span<const TrainPair> pairs,
                         const TrainConfig &config);

/// (baseline - candidate) / baseline * 100. Positive means the candidate
/// is cheaper.
double efficiency_gain(double baseline_mean, double candidate_mean);

void write_loss_log(std::ostream &out, std::span<const LossRecord> log);
std::string format_resource_report(const std::string &run_name,
                                   OptimizerKind optimizer,
                                   const ResourceStats &stats);

} // namespace lionrank
