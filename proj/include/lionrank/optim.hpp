// SPDX-License-Identifier: Apache-2.0
//
// Lion and AdamW optimizers plus learning-rate schedules.

#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "lionrank/tensor.hpp"

namespace lionrank {

class ByteWriter;
class ByteReader;

enum class OptimizerKind { lion, adamw };

std::string to_string(OptimizerKind kind);
OptimizerKind parse_optimizer_kind(const std::string &name);

struct LionOptions {
  double beta1 = 0.9;
  double beta2 = 0.99;
  double weight_decay = 0.01;

  void validate() const;
};

struct AdamWOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;

  void validate() const;
};

constexpr double sign_of(double x) {
  return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0);
}

/// One Lion coordinate update. The interpolation `c` decides the step
/// direction; the momentum is refreshed with the raw gradient only after the
/// parameter has moved.
struct LionCoordinate {
  double interpolated;
  double param;
  double momentum;
};

constexpr LionCoordinate lion_coordinate(double param, double momentum,
                                         double grad, double lr, double beta1,
                                         double beta2, double weight_decay) {
  const double c = beta1 * momentum + (1.0 - beta1) * grad;
  const double next = param - lr * (sign_of(c) + weight_decay * param);
  const double m = beta2 * momentum + (1.0 - beta2) * grad;
  return {c, next, m};
}

struct AdamWCoordinate {
  double param;
  double m;
  double v;
};

// `step` is the 1-based step count after increment.
AdamWCoordinate adamw_coordinate(double param, double m, double v, double grad,
                                 double lr, std::uint64_t step,
                                 const AdamWOptions &opts, double weight_decay);

void lion_update(std::span<double> params, std::span<double> momentum,
                 std::span<const double> grads, double lr,
                 const LionOptions &opts, double weight_decay);

void adamw_update(std::span<double> params, std::span<double> m,
                  std::span<double> v, std::span<const double> grads,
                  double lr, std::uint64_t step, const AdamWOptions &opts,
                  double weight_decay);

/// Stateful optimizer over a named parameter list. State buffers are created
/// lazily on the first step, keyed by parameter order and checked by name and
/// size on every step.
class Optimizer {
public:
  virtual ~Optimizer() = default;

  virtual OptimizerKind kind() const = 0;
  // Applies one update using the gradients stored on the parameters.
  virtual void step(ParameterList &params, double lr) = 0;
  // Exact bytes held by optimizer state buffers (and the step counter).
  virtual std::size_t state_bytes() const = 0;
  virtual void init_state(const ParameterList &params) = 0;

  virtual void save(ByteWriter &out) const = 0;
  virtual void load(ByteReader &in) = 0;

  // Parameter names (substring match) exempt from weight decay.
  void set_no_decay(std::vector<std::string> patterns) {
    no_decay_ = std::move(patterns);
  }
  const std::vector<std::string> &no_decay() const { return no_decay_; }

protected:
  bool decays(const std::string &name) const;
  std::vector<std::string> no_decay_;
};

class Lion final : public Optimizer {
public:
  explicit Lion(LionOptions opts = {});

  OptimizerKind kind() const override { return OptimizerKind::lion; }
  void step(ParameterList &params, double lr) override;
  std::size_t state_bytes() const override;
  void init_state(const ParameterList &params) override;
  void save(ByteWriter &out) const override;
  void load(ByteReader &in) override;

  const LionOptions &options() const { return opts_; }
  std::span<const double> momentum(std::size_t index) const {
    return buffers_.at(index).m;
  }

private:
  struct Buffer {
    std::string name;
    std::vector<double> m;
  };
  LionOptions opts_;
  std::vector<Buffer> buffers_;
};

class AdamW final : public Optimizer {
public:
  explicit AdamW(AdamWOptions opts = {});

  OptimizerKind kind() const override { return OptimizerKind::adamw; }
  void step(ParameterList &params, double lr) override;
  std::size_t state_bytes() const override;
  void init_state(const ParameterList &params) override;
  void save(ByteWriter &out) const override;
  void load(ByteReader &in) override;

  const AdamWOptions &options() const { return opts_; }
  std::uint64_t step_count() const { return step_; }
  std::span<const double> first_moment(std::size_t index) const {
    return buffers_.at(index).m;
  }
  std::span<const double> second_moment(std::size_t index) const {
    return buffers_.at(index).v;
  }

private:
  struct Buffer {
    std::string name;
    std::vector<double> m;
    std::vector<double> v;
  };
  AdamWOptions opts_;
  std::vector<Buffer> buffers_;
  std::uint64_t step_ = 0;
};

std::unique_ptr<Optimizer> make_optimizer(OptimizerKind kind,
                                          const LionOptions &lion,
                                          const AdamWOptions &adamw);

// Reconstructs an optimizer (kind, hyperparameters, buffers) from a section
// written by Optimizer::save.
std::unique_ptr<Optimizer> load_optimizer(ByteReader &in);

// ---------------------------------------------------------------------------
// Learning-rate schedules

enum class ScheduleKind { constant, cosine };

std::string to_string(ScheduleKind kind);
ScheduleKind parse_schedule_kind(const std::string &name);

struct ScheduleSpec {
  ScheduleKind kind = ScheduleKind::constant;
  double base_lr = 2e-5;
  double warmup_ratio = 0.0;
  std::size_t total_steps = 1;

  void validate() const;
  // Linear warmup steps; only cosine schedules warm up.
  std::size_t warmup_steps() const;
};

/// Effective learning rate at a 0-based step in [0, total_steps].
double lr_at(const ScheduleSpec &spec, std::size_t step);

} // namespace lionrank
