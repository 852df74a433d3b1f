// SPDX-License-Identifier: Apache-2.0
//
// Dense double-precision tensors with a reverse-mode autodiff tape.
//
// A Tensor is a handle onto shared storage (shape, data, optional grad).
// Copying a Tensor shares the storage; use clone() for a deep copy. Ops are
// recorded on a Tape, which owns the backward rules for everything it
// produced. Leaf tensors (parameters, inputs) live outside any tape and may
// be used with many tapes over their lifetime.

#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace lionrank {

using Shape = std::vector<std::size_t>;

std::string shape_to_string(const Shape &shape);
std::size_t shape_numel(const Shape &shape);

class DimensionError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

class IndexError : public std::out_of_range {
public:
  using std::out_of_range::out_of_range;
};

namespace detail {
struct TensorStorage {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad; // empty until first touched
  bool requires_grad = false;
  const void *tape = nullptr; // owning tape for op outputs, null for leaves
  std::optional<std::size_t> node;
};
} // namespace detail

class Tensor {
public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const noexcept { return impl_ != nullptr; }
  const Shape &shape() const { return impl_->shape; }
  std::size_t rank() const { return impl_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return impl_->shape.at(axis); }
  std::size_t size() const { return impl_->data.size(); }

  std::span<const double> data() const { return impl_->data; }
  std::span<double> data() { return impl_->data; }
  double item() const;
  double at(std::size_t row, std::size_t col) const;

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool on) { impl_->requires_grad = on; }

  bool has_grad() const { return !impl_->grad.empty(); }
  // Empty span when no gradient has been accumulated yet.
  std::span<const double> grad() const { return impl_->grad; }
  std::span<double> mutable_grad();
  void zero_grad();

  // Tape node that produced this tensor; empty for leaves.
  std::optional<std::size_t> node_id() const { return impl_->node; }

  Tensor clone() const;
  bool shares_storage(const Tensor &other) const { return impl_ == other.impl_; }

private:
  friend class Tape;
  explicit Tensor(std::shared_ptr<detail::TensorStorage> impl)
      : impl_(std::move(impl)) {}
  std::shared_ptr<detail::TensorStorage> impl_;
};

struct Parameter {
  std::string name;
  Tensor value;
};
using ParameterList = std::vector<Parameter>;

std::size_t parameter_count(const ParameterList &params);
void zero_grads(ParameterList &params);

enum class ElementwiseOp { add, sub, mul, relu, sigmoid, tanh };
enum class ReduceOp { sum, mean };

class Tape {
public:
  // Receives the output gradient; accumulates into the inputs captured by the
  // rule itself.
  using BackwardRule = std::function<void(std::span<const double> out_grad)>;

  explicit Tape(bool recording = true) : recording_(recording) {}
  Tape(const Tape &) = delete;
  Tape &operator=(const Tape &) = delete;

  Tensor matmul(const Tensor &a, const Tensor &b);
  Tensor transpose(const Tensor &a);

  // Binary ops broadcast b along the leading axes of a: b.shape must equal a
  // trailing suffix of a.shape.
  Tensor elementwise(ElementwiseOp op, const Tensor &a,
                     const Tensor *b = nullptr);
  Tensor add(const Tensor &a, const Tensor &b) {
    return elementwise(ElementwiseOp::add, a, &b);
  }
  Tensor sub(const Tensor &a, const Tensor &b) {
    return elementwise(ElementwiseOp::sub, a, &b);
  }
  Tensor mul(const Tensor &a, const Tensor &b) {
    return elementwise(ElementwiseOp::mul, a, &b);
  }
  Tensor relu(const Tensor &a) { return elementwise(ElementwiseOp::relu, a); }
  Tensor sigmoid(const Tensor &a) {
    return elementwise(ElementwiseOp::sigmoid, a);
  }
  Tensor tanh(const Tensor &a) { return elementwise(ElementwiseOp::tanh, a); }
  Tensor scale(const Tensor &a, double factor);

  Tensor softmax(const Tensor &a, std::size_t axis);
  // Normalizes over the last axis.
  Tensor layer_norm(const Tensor &a, const Tensor &gain, const Tensor &bias,
                    double eps = 1e-5);
  Tensor embedding(const Tensor &table, std::span<const int> ids);
  Tensor reduce(ReduceOp op, const Tensor &a,
                std::optional<std::size_t> axis = std::nullopt);
  Tensor sum(const Tensor &a, std::optional<std::size_t> axis = std::nullopt) {
    return reduce(ReduceOp::sum, a, axis);
  }
  Tensor mean(const Tensor &a, std::optional<std::size_t> axis = std::nullopt) {
    return reduce(ReduceOp::mean, a, axis);
  }

  // 2-D slicing and concatenation; [begin, end) ranges.
  Tensor slice_rows(const Tensor &a, std::size_t begin, std::size_t end);
  Tensor slice_cols(const Tensor &a, std::size_t begin, std::size_t end);
  Tensor concat(std::span<const Tensor> parts, std::size_t axis);

  // Records an op computed outside the tape. `output` must be a fresh leaf;
  // `rule` accumulates into the gradients of `inputs`.
  Tensor record(std::vector<Tensor> inputs, Tensor output, BackwardRule rule);

  void backward(const Tensor &loss);

  bool recording() const noexcept { return recording_; }
  std::size_t size() const noexcept { return nodes_.size(); }
  std::size_t last_backward_visits() const noexcept { return visits_; }

  // Gradient buffer for `t`, allocated (zeroed) on first use. For rules
  // written outside the tape.
  static std::span<double> grad_buffer(const Tensor &t);

private:
  struct Node {
    std::vector<std::optional<std::size_t>> inputs;
    std::shared_ptr<detail::TensorStorage> output;
    BackwardRule rule;
  };

  bool needs_record(std::initializer_list<const Tensor *> inputs) const;
  Tensor emit(Shape shape, std::vector<double> data,
              std::initializer_list<const Tensor *> inputs, BackwardRule rule);
  Tensor emit(Shape shape, std::vector<double> data,
              const std::vector<const Tensor *> &inputs, BackwardRule rule);
  void check_owner(const Tensor &t) const;

  bool recording_;
  std::vector<Node> nodes_;
  std::size_t visits_ = 0;
};

// Central differences (f(x + h e_i) - f(x - h e_i)) / 2h, perturbing x's
// storage in place and restoring it afterwards.
Tensor finite_diff_grad(const std::function<double(const Tensor &)> &f,
                        Tensor &x, double h = 1e-5);

} // namespace lionrank
