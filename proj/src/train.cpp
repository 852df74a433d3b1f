// SPDX-License-Identifier: Apache-2.0

#include "lionrank/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>

#include "lionrank/checkpoint.hpp"
#include "lionrank/text_io.hpp"

namespace lionrank {

namespace {

bool blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) {
    return std::isspace(c) != 0;
  });
}

} // namespace

PairConversion triplets_to_pairs(std::span<const Triplet> triplets) {
  PairConversion out;
  out.pairs.reserve(triplets.size() * 2);
  for (const auto &t : triplets) {
    if (blank(t.query) || blank(t.positive) || blank(t.negative)) {
      ++out.skipped;
      continue;
    }
    out.pairs.push_back({t.query, t.positive, 1});
    out.pairs.push_back({t.query, t.negative, 0});
  }
  return out;
}

std::vector<Triplet> read_triplets(std::istream &in) {
  std::vector<Triplet> out;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto line = chomp(raw);
    if (blank(line))
      continue;
    auto fields = split_on(line, '\t');
    if (fields.size() != 3)
      throw ParseError(line_no, "expected query<TAB>positive<TAB>negative, "
                                "got " +
                                    std::to_string(fields.size()) + " fields");
    out.push_back({std::move(fields[0]), std::move(fields[1]),
                   std::move(fields[2])});
  }
  return out;
}

double bce_loss(double prediction, int label) {
  const double p = std::clamp(prediction, kBceClamp, 1.0 - kBceClamp);
  const double y = label ? 1.0 : 0.0;
  return -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
}

Tensor bce_loss(Tape &tape, const Tensor &predictions,
                std::span<const double> labels) {
  const std::size_t n = predictions.size();
  if (labels.size() != n || n == 0)
    throw DimensionError("bce_loss: " + std::to_string(n) +
                         " predictions vs " + std::to_string(labels.size()) +
                         " labels");
  auto p = predictions.data();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    total += bce_loss(p[i], labels[i] > 0.5 ? 1 : 0);
  const double inv_n = 1.0 / static_cast<double>(n);
  std::vector<double> y(labels.begin(), labels.end());
  return tape.record(
      {predictions}, Tensor::scalar(total * inv_n),
      [predictions, y, inv_n](std::span<const double> g) {
        auto dp = Tape::grad_buffer(predictions);
        auto p = predictions.data();
        for (std::size_t i = 0; i < dp.size(); ++i) {
          const double q = std::clamp(p[i], kBceClamp, 1.0 - kBceClamp);
          dp[i] += g[0] * inv_n * (q - y[i]) / (q * (1.0 - q));
        }
      });
}

void TrainConfig::validate() const {
  if (batch_size < 1)
    throw ConfigError("train: batch_size must be >= 1");
  if (epochs < 1)
    throw ConfigError("train: epochs must be >= 1");
  if (!(schedule.base_lr > 0.0))
    throw ConfigError("train: learning rate must be > 0");
  if (!(schedule.warmup_ratio >= 0.0 && schedule.warmup_ratio < 1.0))
    throw ConfigError("train: warmup_ratio must lie in [0, 1)");
  lion.validate();
  adamw.validate();
}

ResourceStats summarize_steps(std::span<const double> step_ms,
                              std::size_t state_bytes) {
  ResourceStats s;
  s.optimizer_state_bytes = state_bytes;
  s.n_steps = step_ms.size();
  if (step_ms.empty())
    return s;
  double total = 0.0;
  for (double t : step_ms) {
    total += t;
    s.peak_step_ms = std::max(s.peak_step_ms, t);
  }
  s.mean_step_ms = total / static_cast<double>(step_ms.size());
  double var = 0.0;
  for (double t : step_ms)
    var += (t - s.mean_step_ms) * (t - s.mean_step_ms);
  s.std_step_ms = std::sqrt(var / static_cast<double>(step_ms.size()));
  return s;
}

std::string checkpoint_name(const std::string &model, OptimizerKind optimizer,
                            std::size_t epoch) {
  return model + "-" + to_string(optimizer) + "-epoch" + std::to_string(epoch);
}

std::size_t total_training_steps(std::size_t n_pairs, std::size_t batch_size,
                                 std::size_t epochs) {
  return epochs * ((n_pairs + batch_size - 1) / batch_size);
}

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed,
                                     std::size_t epoch_index, bool shuffle) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i)
    order[i] = i;
  if (!shuffle || n < 2)
    return order;
  std::mt19937_64 rng(seed + epoch_index);
  // Fisher-Yates with rejection sampling; std::shuffle's draw pattern is
  // implementation-defined.
  for (std::size_t i = n - 1; i > 0; --i) {
    const std::uint64_t bound = i + 1;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t r;
    do {
      r = rng();
    } while (r >= limit);
    std::swap(order[i], order[r % bound]);
  }
  return order;
}

TrainResult run_training(CrossEncoder &model, const Vocab &vocab,
                         std::span<const TrainPair> pairs,
                         const TrainConfig &config) {
  config.validate();
  if (pairs.empty())
    throw std::invalid_argument("run_training: no training pairs");
  if (vocab.size() != model.config().vocab_size)
    throw ConfigError("run_training: vocab has " +
                      std::to_string(vocab.size()) + " ids, model expects " +
                      std::to_string(model.config().vocab_size));

  const std::size_t max_len = model.config().max_len;
  std::vector<TokenSequence> seqs;
  std::vector<double> labels;
  seqs.reserve(pairs.size());
  for (const auto &p : pairs) {
    seqs.push_back(tokenize_pair(vocab, p.query, p.passage, max_len));
    labels.push_back(p.label ? 1.0 : 0.0);
  }

  TrainResult result;
  result.total_steps =
      total_training_steps(pairs.size(), config.batch_size, config.epochs);
  ScheduleSpec schedule = config.schedule;
  schedule.total_steps = result.total_steps;
  schedule.validate();

  auto optimizer = make_optimizer(config.optimizer, config.lion, config.adamw);
  optimizer->set_no_decay(config.no_decay);
  ParameterList &params = model.parameters();
  optimizer->init_state(params);

  std::vector<double> step_ms;
  step_ms.reserve(result.total_steps);
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto order =
        epoch_order(pairs.size(), config.seed, epoch, config.shuffle);
    double epoch_loss = 0.0;
    for (std::size_t begin = 0; begin < order.size();
         begin += config.batch_size) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      zero_grads(params);

      Tape tape;
      std::vector<Tensor> preds;
      std::vector<double> batch_labels;
      preds.reserve(end - begin);
      for (std::size_t i = begin; i < end; ++i) {
        preds.push_back(model.forward(tape, seqs[order[i]]));
        batch_labels.push_back(labels[order[i]]);
      }
      const Tensor stacked = tape.concat(preds, 0);
      const Tensor loss = bce_loss(tape, stacked, batch_labels);
      const double loss_value = loss.item();
      if (!std::isfinite(loss_value))
        throw NumericError("non-finite loss at step " + std::to_string(step),
                           step);
      tape.backward(loss);

      const double lr = lr_at(schedule, step);
      const auto t0 = std::chrono::steady_clock::now();
      optimizer->step(params, lr);
      const auto t1 = std::chrono::steady_clock::now();
      step_ms.push_back(
          std::chrono::duration<double, std::milli>(t1 - t0).count());

      result.log.push_back({step, epoch + 1, lr, loss_value});
      epoch_loss += loss_value * static_cast<double>(end - begin);
      ++step;
    }
    result.epoch_mean_loss.push_back(epoch_loss /
                                     static_cast<double>(pairs.size()));
    if (config.keep_checkpoints) {
      const auto name =
          checkpoint_name(config.model_name, config.optimizer, epoch + 1);
      result.checkpoints.push_back(
          {name, epoch + 1,
           encode_checkpoint(name, static_cast<std::uint32_t>(epoch + 1), step,
                             vocab, model, optimizer.get())});
    }
  }
  zero_grads(params);
  result.resources = summarize_steps(step_ms, optimizer->state_bytes());
  return result;
}

double efficiency_gain(double baseline_mean, double candidate_mean) {
  if (!(baseline_mean > 0.0))
    throw std::invalid_argument("efficiency_gain: baseline mean must be > 0");
  return (baseline_mean - candidate_mean) / baseline_mean * 100.0;
}

void write_loss_log(std::ostream &out, std::span<const LossRecord> log) {
  out << "step\tepoch\tlr\tloss\n";
  for (const auto &r : log)
    out << r.step << '\t' << r.epoch << '\t' << format_general(r.lr, 10)
        << '\t' << format_general(r.loss, 10) << '\n';
}

std::string format_resource_report(const std::string &run_name,
                                   OptimizerKind optimizer,
                                   const ResourceStats &s) {
  std::ostringstream out;
  out << "run=" << run_name << '\n'
      << "optimizer=" << to_string(optimizer) << '\n'
      << "optimizer_state_bytes=" << s.optimizer_state_bytes << '\n'
      << "mean_step_ms=" << format_general(s.mean_step_ms, 10) << '\n'
      << "peak_step_ms=" << format_general(s.peak_step_ms, 10) << '\n'
      << "std_step_ms=" << format_general(s.std_step_ms, 10) << '\n'
      << "n_steps=" << s.n_steps << '\n'
      << "[table]\n"
      << "model\toptimizer\tmean\tpeak\tstd\tdata_points\tstate_bytes\n"
      << run_name << '\t' << to_string(optimizer) << '\t'
      << format_general(s.mean_step_ms, 10) << '\t'
      << format_general(s.peak_step_ms, 10) << '\t'
      << format_general(s.std_step_ms, 10) << '\t' << s.n_steps << '\t'
      << s.optimizer_state_bytes << '\n';
  return out.str();
}

} // namespace lionrank
