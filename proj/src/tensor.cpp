// SPDX-License-Identifier: Apache-2.0

#include "lionrank/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace lionrank {

std::string shape_to_string(const Shape &shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i)
      out << ", ";
    out << shape[i];
  }
  out << ']';
  return out.str();
}

std::size_t shape_numel(const Shape &shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad)
    : impl_(std::make_shared<detail::TensorStorage>()) {
  if (shape.empty())
    throw DimensionError("tensor shape must have at least one axis");
  if (data.size() != shape_numel(shape))
    throw DimensionError("tensor data has " + std::to_string(data.size()) +
                         " elements but shape " + shape_to_string(shape) +
                         " needs " + std::to_string(shape_numel(shape)));
  impl_->shape = std::move(shape);
  impl_->data = std::move(data);
  impl_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const std::size_t n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value),
                requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor({1}, {value}, requires_grad);
}

double Tensor::item() const {
  if (size() != 1)
    throw DimensionError("item() on tensor of shape " +
                         shape_to_string(shape()));
  return impl_->data[0];
}

double Tensor::at(std::size_t row, std::size_t col) const {
  if (rank() != 2)
    throw DimensionError("at(row, col) on tensor of shape " +
                         shape_to_string(shape()));
  if (row >= dim(0) || col >= dim(1))
    throw IndexError("at(" + std::to_string(row) + ", " + std::to_string(col) +
                     ") outside " + shape_to_string(shape()));
  return impl_->data[row * dim(1) + col];
}

std::span<double> Tensor::mutable_grad() { return Tape::grad_buffer(*this); }

void Tensor::zero_grad() {
  std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
}

Tensor Tensor::clone() const {
  Tensor out(impl_->shape, impl_->data, impl_->requires_grad);
  out.impl_->grad = impl_->grad;
  return out;
}

std::size_t parameter_count(const ParameterList &params) {
  std::size_t n = 0;
  for (const auto &p : params)
    n += p.value.size();
  return n;
}

void zero_grads(ParameterList &params) {
  for (auto &p : params)
    p.value.zero_grad();
}

// ---------------------------------------------------------------------------
// Tape plumbing

std::span<double> Tape::grad_buffer(const Tensor &t) {
  auto &storage = *t.impl_;
  if (storage.grad.size() != storage.data.size())
    storage.grad.assign(storage.data.size(), 0.0);
  return storage.grad;
}

void Tape::check_owner(const Tensor &t) const {
  if (!t.defined())
    throw std::invalid_argument("operation on undefined tensor");
  if (t.impl_->tape != nullptr && t.impl_->tape != this)
    throw std::logic_error("tensor was produced by a different tape");
}

bool Tape::needs_record(std::initializer_list<const Tensor *> inputs) const {
  if (!recording_)
    return false;
  return std::any_of(inputs.begin(), inputs.end(), [](const Tensor *t) {
    return t != nullptr && t->requires_grad();
  });
}

Tensor Tape::emit(Shape shape, std::vector<double> data,
                  std::initializer_list<const Tensor *> inputs,
                  BackwardRule rule) {
  return emit(std::move(shape), std::move(data),
              std::vector<const Tensor *>(inputs), std::move(rule));
}

Tensor Tape::emit(Shape shape, std::vector<double> data,
                  const std::vector<const Tensor *> &inputs,
                  BackwardRule rule) {
  Tensor out(std::move(shape), std::move(data));
  bool grad = recording_;
  if (grad) {
    grad = std::any_of(inputs.begin(), inputs.end(), [](const Tensor *t) {
      return t != nullptr && t->requires_grad();
    });
  }
  if (!grad)
    return out;
  Node node;
  for (const Tensor *in : inputs)
    if (in != nullptr)
      node.inputs.push_back(in->impl_->node);
  out.impl_->requires_grad = true;
  out.impl_->tape = this;
  out.impl_->node = nodes_.size();
  node.output = out.impl_;
  node.rule = std::move(rule);
  nodes_.push_back(std::move(node));
  return out;
}

Tensor Tape::record(std::vector<Tensor> inputs, Tensor output,
                    BackwardRule rule) {
  for (const auto &in : inputs)
    check_owner(in);
  if (output.impl_->tape != nullptr || output.impl_->node)
    throw std::logic_error("record(): output must be a fresh leaf tensor");
  std::vector<const Tensor *> ptrs;
  for (const auto &in : inputs)
    ptrs.push_back(&in);
  return emit(output.shape(), std::vector<double>(output.data().begin(),
                                                  output.data().end()),
              ptrs, std::move(rule));
}

void Tape::backward(const Tensor &loss) {
  check_owner(loss);
  if (loss.size() != 1)
    throw DimensionError("backward() needs a scalar loss, got shape " +
                         shape_to_string(loss.shape()));
  if (nodes_.empty() || !loss.impl_->node || loss.impl_->tape != this)
    throw std::logic_error("backward(): loss was not recorded on this tape");

  const std::size_t last = *loss.impl_->node;
  for (std::size_t i = 0; i <= last; ++i)
    nodes_[i].output->grad.assign(nodes_[i].output->data.size(), 0.0);
  nodes_[last].output->grad[0] = 1.0;

  visits_ = 0;
  for (std::size_t i = last + 1; i-- > 0;) {
    ++visits_;
    nodes_[i].rule(nodes_[i].output->grad);
  }
}

// ---------------------------------------------------------------------------
// Ops

namespace {

bool is_suffix(const Shape &small, const Shape &big) {
  if (small.size() > big.size())
    return false;
  return std::equal(small.rbegin(), small.rend(), big.rbegin());
}

const char *op_name(ElementwiseOp op) {
  switch (op) {
  case ElementwiseOp::add:
    return "add";
  case ElementwiseOp::sub:
    return "sub";
  case ElementwiseOp::mul:
    return "mul";
  case ElementwiseOp::relu:
    return "relu";
  case ElementwiseOp::sigmoid:
    return "sigmoid";
  case ElementwiseOp::tanh:
    return "tanh";
  }
  return "?";
}

double stable_sigmoid(double x) {
  if (x >= 0)
    return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void require_rank2(const Tensor &t, const char *what) {
  if (t.rank() != 2)
    throw DimensionError(std::string(what) + ": expected a 2-D tensor, got " +
                         shape_to_string(t.shape()));
}

} // namespace

Tensor Tape::matmul(const Tensor &a, const Tensor &b) {
  check_owner(a);
  check_owner(b);
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
    throw DimensionError("matmul: incompatible shapes " +
                         shape_to_string(a.shape()) + " and " +
                         shape_to_string(b.shape()));
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> out(m * n, 0.0);
  const double *A = a.data().data();
  const double *B = b.data().data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = A[i * k + p];
      for (std::size_t j = 0; j < n; ++j)
        out[i * n + j] += aip * B[p * n + j];
    }
  return emit({m, n}, std::move(out), {&a, &b},
              [a, b, m, k, n](std::span<const double> dC) {
                const double *A = a.data().data();
                const double *B = b.data().data();
                if (a.requires_grad()) {
                  auto dA = grad_buffer(a);
                  for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t p = 0; p < k; ++p) {
                      double acc = 0.0;
                      for (std::size_t j = 0; j < n; ++j)
                        acc += dC[i * n + j] * B[p * n + j];
                      dA[i * k + p] += acc;
                    }
                }
                if (b.requires_grad()) {
                  auto dB = grad_buffer(b);
                  for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t p = 0; p < k; ++p) {
                      const double aip = A[i * k + p];
                      for (std::size_t j = 0; j < n; ++j)
                        dB[p * n + j] += aip * dC[i * n + j];
                    }
                }
              });
}

Tensor Tape::transpose(const Tensor &a) {
  check_owner(a);
  require_rank2(a, "transpose");
  const std::size_t r = a.dim(0), c = a.dim(1);
  std::vector<double> out(r * c);
  auto x = a.data();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j)
      out[j * r + i] = x[i * c + j];
  return emit({c, r}, std::move(out), {&a},
              [a, r, c](std::span<const double> g) {
                auto da = grad_buffer(a);
                for (std::size_t i = 0; i < r; ++i)
                  for (std::size_t j = 0; j < c; ++j)
                    da[i * c + j] += g[j * r + i];
              });
}

Tensor Tape::elementwise(ElementwiseOp op, const Tensor &a, const Tensor *b) {
  check_owner(a);
  const bool binary = op == ElementwiseOp::add || op == ElementwiseOp::sub ||
                      op == ElementwiseOp::mul;
  if (binary != (b != nullptr))
    throw std::invalid_argument(std::string("elementwise ") + op_name(op) +
                                (binary ? " needs a second operand"
                                        : " takes a single operand"));
  const std::size_t n = a.size();
  auto x = a.data();
  std::vector<double> out(n);

  if (!binary) {
    switch (op) {
    case ElementwiseOp::relu:
      for (std::size_t i = 0; i < n; ++i)
        out[i] = x[i] > 0.0 ? x[i] : 0.0;
      break;
    case ElementwiseOp::sigmoid:
      for (std::size_t i = 0; i < n; ++i)
        out[i] = stable_sigmoid(x[i]);
      break;
    default:
      for (std::size_t i = 0; i < n; ++i)
        out[i] = std::tanh(x[i]);
      break;
    }
    auto y = std::make_shared<std::vector<double>>(out);
    return emit(a.shape(), std::move(out), {&a},
                [a, y, op, n](std::span<const double> g) {
                  auto da = grad_buffer(a);
                  auto x = a.data();
                  const auto &yv = *y;
                  for (std::size_t i = 0; i < n; ++i) {
                    double d;
                    if (op == ElementwiseOp::relu)
                      d = x[i] > 0.0 ? 1.0 : 0.0;
                    else if (op == ElementwiseOp::sigmoid)
                      d = yv[i] * (1.0 - yv[i]);
                    else
                      d = 1.0 - yv[i] * yv[i];
                    da[i] += g[i] * d;
                  }
                });
  }

  check_owner(*b);
  if (!is_suffix(b->shape(), a.shape()))
    throw DimensionError(std::string("elementwise ") + op_name(op) +
                         ": shapes " + shape_to_string(a.shape()) + " and " +
                         shape_to_string(b->shape()) +
                         " are not broadcastable");
  const std::size_t m = b->size();
  auto z = b->data();
  for (std::size_t i = 0; i < n; ++i) {
    const double bv = z[m ? i % m : 0];
    switch (op) {
    case ElementwiseOp::add:
      out[i] = x[i] + bv;
      break;
    case ElementwiseOp::sub:
      out[i] = x[i] - bv;
      break;
    default:
      out[i] = x[i] * bv;
      break;
    }
  }
  Tensor bb = *b;
  return emit(a.shape(), std::move(out), {&a, b},
              [a, bb, op, n, m](std::span<const double> g) {
                auto x = a.data();
                auto z = bb.data();
                if (a.requires_grad()) {
                  auto da = grad_buffer(a);
                  for (std::size_t i = 0; i < n; ++i)
                    da[i] += op == ElementwiseOp::mul ? g[i] * z[i % m] : g[i];
                }
                if (bb.requires_grad()) {
                  auto db = grad_buffer(bb);
                  for (std::size_t i = 0; i < n; ++i) {
                    double d = g[i];
                    if (op == ElementwiseOp::sub)
                      d = -d;
                    else if (op == ElementwiseOp::mul)
                      d *= x[i];
                    db[i % m] += d;
                  }
                }
              });
}

Tensor Tape::scale(const Tensor &a, double factor) {
  check_owner(a);
  std::vector<double> out(a.data().begin(), a.data().end());
  for (auto &v : out)
    v *= factor;
  return emit(a.shape(), std::move(out), {&a},
              [a, factor](std::span<const double> g) {
                auto da = grad_buffer(a);
                for (std::size_t i = 0; i < g.size(); ++i)
                  da[i] += g[i] * factor;
              });
}

Tensor Tape::softmax(const Tensor &a, std::size_t axis) {
  check_owner(a);
  if (axis >= a.rank())
    throw DimensionError("softmax: axis " + std::to_string(axis) +
                         " invalid for shape " + shape_to_string(a.shape()));
  const Shape &s = a.shape();
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i)
    outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i)
    inner *= s[i];
  const std::size_t len = s[axis];
  auto x = a.data();
  std::vector<double> out(a.size());
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * len * inner + in;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < len; ++j)
        mx = std::max(mx, x[base + j * inner]);
      double total = 0.0;
      for (std::size_t j = 0; j < len; ++j) {
        const double e = std::exp(x[base + j * inner] - mx);
        out[base + j * inner] = e;
        total += e;
      }
      for (std::size_t j = 0; j < len; ++j)
        out[base + j * inner] /= total;
    }
  auto y = std::make_shared<std::vector<double>>(out);
  return emit(s, std::move(out), {&a},
              [a, y, outer, inner, len](std::span<const double> g) {
                auto da = grad_buffer(a);
                const auto &yv = *y;
                for (std::size_t o = 0; o < outer; ++o)
                  for (std::size_t in = 0; in < inner; ++in) {
                    const std::size_t base = o * len * inner + in;
                    double dot = 0.0;
                    for (std::size_t j = 0; j < len; ++j)
                      dot += g[base + j * inner] * yv[base + j * inner];
                    for (std::size_t j = 0; j < len; ++j) {
                      const std::size_t idx = base + j * inner;
                      da[idx] += yv[idx] * (g[idx] - dot);
                    }
                  }
              });
}

Tensor Tape::layer_norm(const Tensor &a, const Tensor &gain,
                        const Tensor &bias, double eps) {
  check_owner(a);
  check_owner(gain);
  check_owner(bias);
  const std::size_t n = a.shape().back();
  if (n < 1)
    throw DimensionError("layer_norm: normalized axis is empty");
  if (gain.shape() != Shape{n} || bias.shape() != Shape{n})
    throw DimensionError("layer_norm: gain " + shape_to_string(gain.shape()) +
                         " and bias " + shape_to_string(bias.shape()) +
                         " must both be [" + std::to_string(n) + "]");
  const std::size_t rows = a.size() / n;
  auto x = a.data();
  auto gv = gain.data();
  auto bv = bias.data();
  auto xhat = std::make_shared<std::vector<double>>(a.size());
  auto inv_std = std::make_shared<std::vector<double>>(rows);
  std::vector<double> out(a.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double *row = x.data() + r * n;
    double mu = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      mu += row[j];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<double>(n);
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[r] = is;
    for (std::size_t j = 0; j < n; ++j) {
      const double h = (row[j] - mu) * is;
      (*xhat)[r * n + j] = h;
      out[r * n + j] = h * gv[j] + bv[j];
    }
  }
  return emit(a.shape(), std::move(out), {&a, &gain, &bias},
              [a, gain, bias, xhat, inv_std, rows,
               n](std::span<const double> g) {
                const auto &xh = *xhat;
                auto gv = gain.data();
                if (gain.requires_grad()) {
                  auto dg = grad_buffer(gain);
                  for (std::size_t i = 0; i < rows * n; ++i)
                    dg[i % n] += g[i] * xh[i];
                }
                if (bias.requires_grad()) {
                  auto db = grad_buffer(bias);
                  for (std::size_t i = 0; i < rows * n; ++i)
                    db[i % n] += g[i];
                }
                if (a.requires_grad()) {
                  auto da = grad_buffer(a);
                  const double inv_n = 1.0 / static_cast<double>(n);
                  for (std::size_t r = 0; r < rows; ++r) {
                    double mean_d = 0.0, mean_dx = 0.0;
                    for (std::size_t j = 0; j < n; ++j) {
                      const double d = g[r * n + j] * gv[j];
                      mean_d += d;
                      mean_dx += d * xh[r * n + j];
                    }
                    mean_d *= inv_n;
                    mean_dx *= inv_n;
                    for (std::size_t j = 0; j < n; ++j) {
                      const double d = g[r * n + j] * gv[j];
                      da[r * n + j] += (*inv_std)[r] *
                                       (d - mean_d - xh[r * n + j] * mean_dx);
                    }
                  }
                }
              });
}

Tensor Tape::embedding(const Tensor &table, std::span<const int> ids) {
  check_owner(table);
  require_rank2(table, "embedding");
  const std::size_t vocab = table.dim(0), d = table.dim(1);
  for (int id : ids)
    if (id < 0 || static_cast<std::size_t>(id) >= vocab)
      throw IndexError("embedding: id " + std::to_string(id) +
                       " out of range [0, " + std::to_string(vocab) + ")");
  std::vector<double> out(ids.size() * d);
  auto t = table.data();
  for (std::size_t i = 0; i < ids.size(); ++i)
    std::copy_n(t.begin() + static_cast<std::ptrdiff_t>(ids[i] * d), d,
                out.begin() + static_cast<std::ptrdiff_t>(i * d));
  std::vector<int> captured(ids.begin(), ids.end());
  return emit({ids.size(), d}, std::move(out), {&table},
              [table, captured, d](std::span<const double> g) {
                auto dt = grad_buffer(table);
                for (std::size_t i = 0; i < captured.size(); ++i)
                  for (std::size_t j = 0; j < d; ++j)
                    dt[static_cast<std::size_t>(captured[i]) * d + j] +=
                        g[i * d + j];
              });
}

Tensor Tape::reduce(ReduceOp op, const Tensor &a,
                    std::optional<std::size_t> axis) {
  check_owner(a);
  auto x = a.data();
  if (!axis) {
    double total = 0.0;
    for (double v : x)
      total += v;
    const double scale =
        op == ReduceOp::mean ? 1.0 / static_cast<double>(a.size()) : 1.0;
    return emit({1}, {total * scale}, {&a},
                [a, scale](std::span<const double> g) {
                  auto da = grad_buffer(a);
                  for (auto &v : da)
                    v += g[0] * scale;
                });
  }
  if (*axis >= a.rank())
    throw DimensionError("reduce: axis " + std::to_string(*axis) +
                         " invalid for shape " + shape_to_string(a.shape()));
  const Shape &s = a.shape();
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < *axis; ++i)
    outer *= s[i];
  for (std::size_t i = *axis + 1; i < s.size(); ++i)
    inner *= s[i];
  const std::size_t len = s[*axis];
  const double scale =
      op == ReduceOp::mean ? 1.0 / static_cast<double>(len) : 1.0;
  std::vector<double> out(outer * inner, 0.0);
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t j = 0; j < len; ++j)
      for (std::size_t in = 0; in < inner; ++in)
        out[o * inner + in] += x[(o * len + j) * inner + in];
  for (auto &v : out)
    v *= scale;
  Shape reduced;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (i != *axis)
      reduced.push_back(s[i]);
  if (reduced.empty())
    reduced.push_back(1);
  return emit(std::move(reduced), std::move(out), {&a},
              [a, outer, inner, len, scale](std::span<const double> g) {
                auto da = grad_buffer(a);
                for (std::size_t o = 0; o < outer; ++o)
                  for (std::size_t j = 0; j < len; ++j)
                    for (std::size_t in = 0; in < inner; ++in)
                      da[(o * len + j) * inner + in] +=
                          g[o * inner + in] * scale;
              });
}

Tensor Tape::slice_rows(const Tensor &a, std::size_t begin, std::size_t end) {
  check_owner(a);
  require_rank2(a, "slice_rows");
  if (begin > end || end > a.dim(0))
    throw IndexError("slice_rows: [" + std::to_string(begin) + ", " +
                     std::to_string(end) + ") outside " +
                     shape_to_string(a.shape()));
  const std::size_t c = a.dim(1);
  auto x = a.data();
  std::vector<double> out(x.begin() + static_cast<std::ptrdiff_t>(begin * c),
                          x.begin() + static_cast<std::ptrdiff_t>(end * c));
  return emit({end - begin, c}, std::move(out), {&a},
              [a, begin, c](std::span<const double> g) {
                auto da = grad_buffer(a);
                for (std::size_t i = 0; i < g.size(); ++i)
                  da[begin * c + i] += g[i];
              });
}

Tensor Tape::slice_cols(const Tensor &a, std::size_t begin, std::size_t end) {
  check_owner(a);
  require_rank2(a, "slice_cols");
  if (begin > end || end > a.dim(1))
    throw IndexError("slice_cols: [" + std::to_string(begin) + ", " +
                     std::to_string(end) + ") outside " +
                     shape_to_string(a.shape()));
  const std::size_t r = a.dim(0), c = a.dim(1), w = end - begin;
  auto x = a.data();
  std::vector<double> out(r * w);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < w; ++j)
      out[i * w + j] = x[i * c + begin + j];
  return emit({r, w}, std::move(out), {&a},
              [a, begin, r, c, w](std::span<const double> g) {
                auto da = grad_buffer(a);
                for (std::size_t i = 0; i < r; ++i)
                  for (std::size_t j = 0; j < w; ++j)
                    da[i * c + begin + j] += g[i * w + j];
              });
}

Tensor Tape::concat(std::span<const Tensor> parts, std::size_t axis) {
  if (parts.empty())
    throw std::invalid_argument("concat: no inputs");
  if (axis > 1)
    throw DimensionError("concat: axis must be 0 or 1");
  for (const auto &p : parts) {
    check_owner(p);
    require_rank2(p, "concat");
    if (p.dim(1 - axis) != parts[0].dim(1 - axis))
      throw DimensionError("concat: shapes " +
                           shape_to_string(parts[0].shape()) + " and " +
                           shape_to_string(p.shape()) + " differ off-axis");
  }
  const std::size_t other = parts[0].dim(1 - axis);
  std::size_t total = 0;
  for (const auto &p : parts)
    total += p.dim(axis);
  const std::size_t rows = axis == 0 ? total : other;
  const std::size_t cols = axis == 0 ? other : total;
  std::vector<double> out(rows * cols);
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (const auto &p : parts) {
    offsets.push_back(off);
    auto x = p.data();
    const std::size_t pr = p.dim(0), pc = p.dim(1);
    for (std::size_t i = 0; i < pr; ++i)
      for (std::size_t j = 0; j < pc; ++j) {
        const std::size_t r = axis == 0 ? off + i : i;
        const std::size_t c = axis == 0 ? j : off + j;
        out[r * cols + c] = x[i * pc + j];
      }
    off += p.dim(axis);
  }
  std::vector<Tensor> kept(parts.begin(), parts.end());
  std::vector<const Tensor *> ptrs;
  for (const auto &p : kept)
    ptrs.push_back(&p);
  return emit({rows, cols}, std::move(out), ptrs,
              [kept, offsets, axis, cols](std::span<const double> g) {
                for (std::size_t k = 0; k < kept.size(); ++k) {
                  const Tensor &p = kept[k];
                  if (!p.requires_grad())
                    continue;
                  auto dp = grad_buffer(p);
                  const std::size_t pr = p.dim(0), pc = p.dim(1);
                  for (std::size_t i = 0; i < pr; ++i)
                    for (std::size_t j = 0; j < pc; ++j) {
                      const std::size_t r = axis == 0 ? offsets[k] + i : i;
                      const std::size_t c = axis == 0 ? j : offsets[k] + j;
                      dp[i * pc + j] += g[r * cols + c];
                    }
                }
              });
}

Tensor finite_diff_grad(const std::function<double(const Tensor &)> &f,
                        Tensor &x, double h) {
  if (!(h > 0.0))
    throw std::invalid_argument("finite_diff_grad: step must be positive");
  std::vector<double> grad(x.size());
  auto data = x.data();
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double saved = data[i];
    data[i] = saved + h;
    const double up = f(x);
    data[i] = saved - h;
    const double down = f(x);
    data[i] = saved;
    grad[i] = (up - down) / (2.0 * h);
  }
  return Tensor(x.shape(), std::move(grad));
}

} // namespace lionrank
