// SPDX-License-Identifier: Apache-2.0

#include "lionrank/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "lionrank/serialize.hpp"

namespace lionrank {

std::string to_string(OptimizerKind kind) {
  return kind == OptimizerKind::lion ? "lion" : "adamw";
}

OptimizerKind parse_optimizer_kind(const std::string &name) {
  if (name == "lion")
    return OptimizerKind::lion;
  if (name == "adamw")
    return OptimizerKind::adamw;
  throw std::invalid_argument("unknown optimizer '" + name +
                              "' (expected lion or adamw)");
}

void LionOptions::validate() const {
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
    throw std::invalid_argument("lion: betas must lie in [0, 1)");
  if (!(weight_decay >= 0.0))
    throw std::invalid_argument("lion: weight decay must be >= 0");
}

void AdamWOptions::validate() const {
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
    throw std::invalid_argument("adamw: betas must lie in [0, 1)");
  if (!(eps >= 0.0))
    throw std::invalid_argument("adamw: eps must be >= 0");
  if (!(weight_decay >= 0.0))
    throw std::invalid_argument("adamw: weight decay must be >= 0");
}

namespace {

// Bias corrections 1 - beta^t depend only on the step, so callers hoist them.
AdamWCoordinate adamw_corrected(double param, double m, double v, double grad,
                                double lr, double correction1,
                                double correction2, const AdamWOptions &opts,
                                double weight_decay) {
  m = opts.beta1 * m + (1.0 - opts.beta1) * grad;
  v = opts.beta2 * v + (1.0 - opts.beta2) * grad * grad;
  const double m_hat = m / correction1;
  const double v_hat = v / correction2;
  // 0/0 only happens when grad and history are zero and eps == 0.
  const double denom = std::sqrt(v_hat) + opts.eps;
  const double adaptive = denom > 0.0 ? m_hat / denom : 0.0;
  param = param - lr * (adaptive + weight_decay * param);
  return {param, m, v};
}

} // namespace

AdamWCoordinate adamw_coordinate(double param, double m, double v, double grad,
                                 double lr, std::uint64_t step,
                                 const AdamWOptions &opts,
                                 double weight_decay) {
  const double t = static_cast<double>(step);
  return adamw_corrected(param, m, v, grad, lr, 1.0 - std::pow(opts.beta1, t),
                         1.0 - std::pow(opts.beta2, t), opts, weight_decay);
}

void lion_update(std::span<double> params, std::span<double> momentum,
                 std::span<const double> grads, double lr,
                 const LionOptions &opts, double weight_decay) {
  if (momentum.size() != params.size() || grads.size() != params.size())
    throw DimensionError("lion_update: buffer sizes differ");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto r = lion_coordinate(params[i], momentum[i], grads[i], lr,
                                   opts.beta1, opts.beta2, weight_decay);
    params[i] = r.param;
    momentum[i] = r.momentum;
  }
}

void adamw_update(std::span<double> params, std::span<double> m,
                  std::span<double> v, std::span<const double> grads,
                  double lr, std::uint64_t step, const AdamWOptions &opts,
                  double weight_decay) {
  if (m.size() != params.size() || v.size() != params.size() ||
      grads.size() != params.size())
    throw DimensionError("adamw_update: buffer sizes differ");
  const double t = static_cast<double>(step);
  const double c1 = 1.0 - std::pow(opts.beta1, t);
  const double c2 = 1.0 - std::pow(opts.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto r = adamw_corrected(params[i], m[i], v[i], grads[i], lr, c1, c2,
                                   opts, weight_decay);
    params[i] = r.param;
    m[i] = r.m;
    v[i] = r.v;
  }
}

bool Optimizer::decays(const std::string &name) const {
  return std::none_of(no_decay_.begin(), no_decay_.end(),
                      [&](const std::string &pattern) {
                        return name.find(pattern) != std::string::npos;
                      });
}

namespace {

// Checks that `params` lines up with the optimizer's buffers.
template <typename Buffers>
void check_alignment(const Buffers &buffers, const ParameterList &params,
                     const char *who) {
  if (buffers.size() != params.size())
    throw DimensionError(std::string(who) + ": optimizer tracks " +
                         std::to_string(buffers.size()) +
                         " parameters but got " +
                         std::to_string(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (buffers[i].name != params[i].name ||
        buffers[i].m.size() != params[i].value.size())
      throw DimensionError(std::string(who) + ": parameter '" +
                           params[i].name + "' " +
                           shape_to_string(params[i].value.shape()) +
                           " does not match optimizer state for '" +
                           buffers[i].name + "' (" +
                           std::to_string(buffers[i].m.size()) +
                           " elements)");
  }
}

std::span<const double> grad_or_zeros(const Tensor &t,
                                      std::vector<double> &scratch) {
  if (t.has_grad())
    return t.grad();
  scratch.assign(t.size(), 0.0);
  return scratch;
}

void save_patterns(ByteWriter &out, const std::vector<std::string> &patterns) {
  out.u32(static_cast<std::uint32_t>(patterns.size()));
  for (const auto &p : patterns)
    out.str(p);
}

std::vector<std::string> load_patterns(ByteReader &in) {
  std::vector<std::string> patterns(in.count(4));
  for (auto &p : patterns)
    p = in.str();
  return patterns;
}

} // namespace

// ---------------------------------------------------------------------------

Lion::Lion(LionOptions opts) : opts_(opts) { opts_.validate(); }

void Lion::init_state(const ParameterList &params) {
  buffers_.clear();
  for (const auto &p : params)
    buffers_.push_back({p.name, std::vector<double>(p.value.size(), 0.0)});
}

void Lion::step(ParameterList &params, double lr) {
  if (buffers_.empty() && !params.empty())
    init_state(params);
  check_alignment(buffers_, params, "lion");
  std::vector<double> scratch;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto &p = params[i];
    const double wd = decays(p.name) ? opts_.weight_decay : 0.0;
    lion_update(p.value.data(), buffers_[i].m, grad_or_zeros(p.value, scratch),
                lr, opts_, wd);
  }
}

std::size_t Lion::state_bytes() const {
  std::size_t n = 0;
  for (const auto &b : buffers_)
    n += b.m.size() * sizeof(double);
  return n;
}

void Lion::save(ByteWriter &out) const {
  out.str("lion");
  out.f64(opts_.beta1);
  out.f64(opts_.beta2);
  out.f64(opts_.weight_decay);
  save_patterns(out, no_decay_);
  out.u32(static_cast<std::uint32_t>(buffers_.size()));
  for (const auto &b : buffers_) {
    out.str(b.name);
    out.f64s(b.m);
  }
}

void Lion::load(ByteReader &in) {
  if (in.str() != "lion")
    throw FormatError("optimizer section is not a lion state");
  opts_.beta1 = in.f64();
  opts_.beta2 = in.f64();
  opts_.weight_decay = in.f64();
  opts_.validate();
  no_decay_ = load_patterns(in);
  buffers_.resize(in.count(12));
  for (auto &b : buffers_) {
    b.name = in.str();
    b.m = in.f64s();
  }
}

// ---------------------------------------------------------------------------

AdamW::AdamW(AdamWOptions opts) : opts_(opts) { opts_.validate(); }

void AdamW::init_state(const ParameterList &params) {
  buffers_.clear();
  step_ = 0;
  for (const auto &p : params)
    buffers_.push_back({p.name, std::vector<double>(p.value.size(), 0.0),
                        std::vector<double>(p.value.size(), 0.0)});
}

void AdamW::step(ParameterList &params, double lr) {
  if (buffers_.empty() && !params.empty())
    init_state(params);
  check_alignment(buffers_, params, "adamw");
  ++step_;
  std::vector<double> scratch;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto &p = params[i];
    const double wd = decays(p.name) ? opts_.weight_decay : 0.0;
    adamw_update(p.value.data(), buffers_[i].m, buffers_[i].v,
                 grad_or_zeros(p.value, scratch), lr, step_, opts_, wd);
  }
}

std::size_t AdamW::state_bytes() const {
  std::size_t n = sizeof(step_);
  for (const auto &b : buffers_)
    n += (b.m.size() + b.v.size()) * sizeof(double);
  return n;
}

void AdamW::save(ByteWriter &out) const {
  out.str("adamw");
  out.f64(opts_.beta1);
  out.f64(opts_.beta2);
  out.f64(opts_.eps);
  out.f64(opts_.weight_decay);
  save_patterns(out, no_decay_);
  out.u64(step_);
  out.u32(static_cast<std::uint32_t>(buffers_.size()));
  for (const auto &b : buffers_) {
    out.str(b.name);
    out.f64s(b.m);
    out.f64s(b.v);
  }
}

void AdamW::load(ByteReader &in) {
  if (in.str() != "adamw")
    throw FormatError("optimizer section is not an adamw state");
  opts_.beta1 = in.f64();
  opts_.beta2 = in.f64();
  opts_.eps = in.f64();
  opts_.weight_decay = in.f64();
  opts_.validate();
  no_decay_ = load_patterns(in);
  step_ = in.u64();
  buffers_.resize(in.count(20));
  for (auto &b : buffers_) {
    b.name = in.str();
    b.m = in.f64s();
    b.v = in.f64s();
    if (b.m.size() != b.v.size())
      throw FormatError("adamw state for '" + b.name +
                        "' has mismatched moment buffers");
  }
}

std::unique_ptr<Optimizer> make_optimizer(OptimizerKind kind,
                                          const LionOptions &lion,
                                          const AdamWOptions &adamw) {
  if (kind == OptimizerKind::lion)
    return std::make_unique<Lion>(lion);
  return std::make_unique<AdamW>(adamw);
}

std::unique_ptr<Optimizer> load_optimizer(ByteReader &in) {
  // Peek at the kind tag without consuming it.
  ByteReader peek = in;
  const std::string kind = peek.str();
  std::unique_ptr<Optimizer> opt;
  if (kind == "lion")
    opt = std::make_unique<Lion>();
  else if (kind == "adamw")
    opt = std::make_unique<AdamW>();
  else
    throw FormatError("unknown optimizer kind '" + kind + "' in checkpoint");
  opt->load(in);
  return opt;
}

// ---------------------------------------------------------------------------

std::string to_string(ScheduleKind kind) {
  return kind == ScheduleKind::constant ? "constant" : "cosine";
}

ScheduleKind parse_schedule_kind(const std::string &name) {
  if (name == "constant" || name == "none")
    return ScheduleKind::constant;
  if (name == "cosine")
    return ScheduleKind::cosine;
  throw std::invalid_argument("unknown schedule '" + name +
                              "' (expected constant or cosine)");
}

void ScheduleSpec::validate() const {
  if (!(warmup_ratio >= 0.0 && warmup_ratio < 1.0))
    throw std::invalid_argument("schedule: warmup_ratio must lie in [0, 1)");
  if (total_steps < 1)
    throw std::invalid_argument("schedule: total_steps must be >= 1");
  if (!(base_lr > 0.0))
    throw std::invalid_argument("schedule: base_lr must be > 0");
}

std::size_t ScheduleSpec::warmup_steps() const {
  if (kind != ScheduleKind::cosine)
    return 0;
  return static_cast<std::size_t>(
      std::floor(warmup_ratio * static_cast<double>(total_steps)));
}

double lr_at(const ScheduleSpec &spec, std::size_t step) {
  spec.validate();
  if (step > spec.total_steps)
    throw std::out_of_range("lr_at: step " + std::to_string(step) +
                            " beyond total_steps " +
                            std::to_string(spec.total_steps));
  const std::size_t warmup = spec.warmup_steps();
  if (step < warmup)
    return spec.base_lr * static_cast<double>(step + 1) /
           static_cast<double>(warmup);
  if (spec.kind == ScheduleKind::constant)
    return spec.base_lr;
  const double progress = static_cast<double>(step - warmup) /
                          static_cast<double>(spec.total_steps - warmup);
  return spec.base_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

} // namespace lionrank
